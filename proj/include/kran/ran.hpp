// SPDX-License-Identifier: Apache-2.0
//
// kran - knowledge-supported radio access network control
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// Radio access side: ULA beam codebook, the exhaustive beam sweep used as the
// conventional procedure, RAN measurements, random access entry point and the
// control directives the knowledge agent sends to the RAN.

#ifndef KRAN_RAN_HPP
#define KRAN_RAN_HPP

#include "kran/raytrace.hpp"
#include "kran/scene.hpp"

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace kran {

inline constexpr double kArrayGainFloorDb = -60.0;
// Beam scores closer than this are treated as equal; lowest index wins.
inline constexpr double kBeamTieToleranceDb = 1e-9;

struct BeamCodebook {
    std::size_t n_elements = 16;
    std::vector<double> beams; // steering angles, rad, ascending
    double element_spacing = 0.5; // wavelengths

    /// `n_beams` steering angles spaced uniformly over [low, high].
    static BeamCodebook uniform(std::size_t n_beams, std::size_t n_elements, double low = deg_to_rad(-60.0),
                                double high = deg_to_rad(60.0), double spacing = 0.5)
    {
        if (n_beams < 2) throw InvalidInput("codebook needs at least 2 beams");
        BeamCodebook cb;
        cb.n_elements = n_elements;
        cb.element_spacing = spacing;
        cb.beams.resize(n_beams);
        for (std::size_t i = 0; i < n_beams; ++i)
            cb.beams[i] = low + (high - low) * static_cast<double>(i) / static_cast<double>(n_beams - 1);
        cb.validate();
        return cb;
    }

    std::size_t size() const { return beams.size(); }
    double span_low() const { return beams.front(); }
    double span_high() const { return beams.back(); }

    void validate() const
    {
        if (n_elements < 2) throw InvalidInput("codebook needs at least 2 array elements");
        if (beams.size() < 2) throw InvalidInput("codebook needs at least 2 beams");
        if (!(element_spacing > 0.0)) throw InvalidInput("element spacing must be positive");
        for (std::size_t i = 1; i < beams.size(); ++i)
            if (!(beams[i] > beams[i - 1])) throw InvalidInput("codebook beams must be strictly ascending");
        for (double b : beams)
            if (!(std::abs(b) <= kPi / 2.0)) throw InvalidInput("beam steering angle outside [-pi/2, pi/2]");
    }
};

/// ULA array factor gain in dB: 20 log10(N |AF|), floored at -60 dB.
inline double array_gain_db(const BeamCodebook &cb, std::size_t beam, double angle)
{
    if (beam >= cb.size()) throw InvalidInput("array_gain_db: invalid beam index " + std::to_string(beam));
    if (!(std::abs(angle) <= kPi / 2.0 + 1e-12)) throw InvalidInput("array_gain_db: angle outside [-pi/2, pi/2]");
    const double n = static_cast<double>(cb.n_elements);
    const double psi = 2.0 * kPi * cb.element_spacing * (std::sin(angle) - std::sin(cb.beams[beam]));
    const double s = std::sin(psi / 2.0);
    const double af = std::abs(s) < 1e-15 ? 1.0 : std::abs(std::sin(n * psi / 2.0) / (n * s));
    return std::max(20.0 * std::log10(n * af), kArrayGainFloorDb);
}

/// Gain toward an azimuth in the antenna frame; directions behind the panel get the floor.
inline double beam_gain_db_toward(const BeamCodebook &cb, std::size_t beam, double relative_az)
{
    if (std::abs(relative_az) > kPi / 2.0) {
        if (beam >= cb.size()) throw InvalidInput("invalid beam index");
        return kArrayGainFloorDb;
    }
    return array_gain_db(cb, beam, relative_az);
}

/// Index of the beam whose steering angle is closest to `angle`.
inline std::size_t nearest_beam(const BeamCodebook &cb, double angle)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < cb.size(); ++i)
        if (std::abs(cb.beams[i] - angle) < std::abs(cb.beams[best] - angle)) best = i;
    return best;
}

struct SweepResult {
    std::size_t best_beam = 0;
    std::size_t measurements = 0;
};

using BeamProbe = std::function<double(std::size_t)>;

/// Probes each candidate beam once (all beams when `candidates` is empty) and
/// returns the argmax; ties go to the lowest index.
inline SweepResult sweep_beams(const BeamCodebook &cb, const BeamProbe &probe,
                               std::span<const std::size_t> candidates = {})
{
    if (cb.size() == 0) throw InvalidInput("sweep_beams: empty codebook");
    std::vector<std::size_t> all;
    if (candidates.empty()) {
        all.resize(cb.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        candidates = all;
    }
    SweepResult r;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t idx : candidates) {
        const double rssi = probe(idx);
        ++r.measurements;
        const bool better = r.measurements == 1 || rssi > best + kBeamTieToleranceDb ||
                            (std::abs(rssi - best) <= kBeamTieToleranceDb && idx < r.best_beam);
        if (better) {
            best = rssi;
            r.best_beam = idx;
        }
    }
    return r;
}

/// Noise-free received power of `cir` through `beam`, dBm. Empty channel reads the noise floor.
inline double beam_rssi_dbm(const Cir &cir, const BeamCodebook &cb, std::size_t beam, const Pose &antenna,
                            double tx_power_dbm, double noise_floor_dbm, double extra_loss_db = 0.0)
{
    if (cir.empty()) return noise_floor_dbm;
    double sum = 0.0;
    for (const auto &p : cir.paths)
        sum += std::norm(p.gain) * std::pow(10.0, beam_gain_db_toward(cb, beam, relative_azimuth(antenna, p.aod)) / 10.0);
    if (!(sum > 0.0)) return noise_floor_dbm;
    return tx_power_dbm + 10.0 * std::log10(sum) - extra_loss_db;
}

struct CsiTap {
    double delay = 0.0;
    std::complex<double> gain;
    int path_id = kLosPathId;
};

struct UeRecord {
    std::string ue_id;
    double rssi = 0.0; // dBm
    double aoa = 0.0;  // rad, antenna frame
    std::vector<CsiTap> csi;
    std::size_t active_beam = 0;
    std::optional<Vec3> claimed_position;
};

struct RanState {
    Pose antenna_pose;
    double timestamp = 0.0;
    std::vector<UeRecord> records;
};

struct MeasurementNoise {
    double rssi_sigma_db = 1.0;
    double aoa_sigma_rad = deg_to_rad(2.0);
};

/// One air-interface observation of `cir` through `active_beam`.
template <class Rng>
UeRecord measure_ran_state(const std::string &ue_id, const Cir &cir, const BeamCodebook &cb, std::size_t active_beam,
                           const Pose &antenna, double tx_power_dbm, double noise_floor_dbm,
                           const MeasurementNoise &noise, Rng &rng)
{
    if (active_beam >= cb.size()) throw InvalidInput("measure_ran_state: invalid active beam");
    UeRecord rec;
    rec.ue_id = ue_id;
    rec.active_beam = active_beam;
    if (cir.empty()) {
        rec.rssi = noise_floor_dbm;
        return rec;
    }
    double sum = 0.0;
    double strongest = -1.0;
    for (const auto &p : cir.paths) {
        const double rel = relative_azimuth(antenna, p.aod);
        const double amp = std::pow(10.0, beam_gain_db_toward(cb, active_beam, rel) / 20.0);
        const std::complex<double> weighted = p.gain * amp;
        rec.csi.push_back({p.delay, weighted, p.path_id});
        sum += std::norm(weighted);
        if (std::norm(weighted) > strongest) {
            strongest = std::norm(weighted);
            rec.aoa = rel;
        }
    }
    rec.rssi = sum > 0.0 ? tx_power_dbm + 10.0 * std::log10(sum) : noise_floor_dbm;
    if (noise.rssi_sigma_db > 0.0) rec.rssi += std::normal_distribution<double>(0.0, noise.rssi_sigma_db)(rng);
    if (noise.aoa_sigma_rad > 0.0) rec.aoa += std::normal_distribution<double>(0.0, noise.aoa_sigma_rad)(rng);
    return rec;
}

// ---- control directives --------------------------------------------------

struct SetBeam {
    std::string ue_id;
    std::size_t beam = 0;
};
struct SweepWindow {
    std::string ue_id;
    double low = 0.0;  // rad
    double high = 0.0; // rad
};
struct ChannelEstimate {
    std::string ue_id;
    std::vector<CsiTap> taps;
};
struct Fallback {
    std::string ue_id;
};

using RanCnt = std::variant<SetBeam, SweepWindow, ChannelEstimate, Fallback>;

inline const std::string &directive_ue(const RanCnt &cnt)
{
    return std::visit([](const auto &d) -> const std::string & { return d.ue_id; }, cnt);
}

// SetBeam, SweepWindow and ChannelEstimate rely on sensor knowledge; Fallback does not.
inline bool is_knowledge_directive(const RanCnt &cnt) { return !std::holds_alternative<Fallback>(cnt); }

// ---- random access ---------------------------------------------------------

struct RachRequest {
    std::string ue_id;
    double timestamp = 0.0;
    Vec3 claimed_position = Vec3::Zero();
};

enum class Verdict { Accept, Reject, Unverified };

enum class AuthReason {
    Match,
    NewCell,
    Geofence,
    NoWitness,
    PositionMismatch,
    FingerprintMismatch,
    SensorsUnavailable,
    KaUnreachable,
    NoKnowledgeAgent,
};

struct AuthDecision {
    Verdict verdict = Verdict::Unverified;
    AuthReason reason = AuthReason::KaUnreachable;
    std::optional<double> mahalanobis_sq;
};

inline const char *to_string(Verdict v)
{
    switch (v) {
    case Verdict::Accept: return "ACCEPT";
    case Verdict::Reject: return "REJECT";
    case Verdict::Unverified: return "UNVERIFIED";
    }
    return "?";
}

inline const char *to_string(AuthReason r)
{
    switch (r) {
    case AuthReason::Match: return "MATCH";
    case AuthReason::NewCell: return "NEW_CELL";
    case AuthReason::Geofence: return "GEOFENCE";
    case AuthReason::NoWitness: return "NO_WITNESS";
    case AuthReason::PositionMismatch: return "POSITION_MISMATCH";
    case AuthReason::FingerprintMismatch: return "FINGERPRINT_MISMATCH";
    case AuthReason::SensorsUnavailable: return "SENSORS_UNAVAILABLE";
    case AuthReason::KaUnreachable: return "KA_UNREACHABLE";
    case AuthReason::NoKnowledgeAgent: return "NO_KA";
    }
    return "?";
}

// Whether the RAN lets the UE continue with the standard access procedure.
inline bool admits(const AuthDecision &d) { return d.verdict != Verdict::Reject; }

// Returns nullopt when the agent cannot answer (timeout, outage).
using Verifier = std::function<std::optional<AuthDecision>(const RanState &)>;

/// Wraps the request into a RAN state snapshot and asks the verifier. An
/// unreachable verifier yields UNVERIFIED and the RAN proceeds as usual.
inline AuthDecision handle_rach(const RachRequest &request, const Pose &antenna, const Verifier &verifier)
{
    RanState state;
    state.antenna_pose = antenna;
    state.timestamp = request.timestamp;
    UeRecord rec;
    rec.ue_id = request.ue_id;
    rec.claimed_position = request.claimed_position;
    state.records.push_back(std::move(rec));
    if (!verifier) return {Verdict::Unverified, AuthReason::KaUnreachable, std::nullopt};
    std::optional<AuthDecision> answer;
    try {
        answer = verifier(state);
    } catch (const std::exception &) {
        answer.reset();
    }
    if (!answer) return {Verdict::Unverified, AuthReason::KaUnreachable, std::nullopt};
    return *answer;
}

// ---- RAN control state -----------------------------------------------------

enum class SweepPolicy {
    Periodic,        // full SS-burst style sweeps on the period grid
    KnowledgeDriven, // beams come from directives; sweeps only on request
};

struct UeLinkControl {
    std::size_t active_beam = 0;
    SweepPolicy policy = SweepPolicy::Periodic;
    std::optional<std::pair<double, double>> window;
    bool window_sweep_pending = false;
    std::vector<CsiTap> equalizer;
    int pilot_suppressed_frames = 0;
};

struct RanControlState {
    std::map<std::string, UeLinkControl> links;
};

struct ApplyResult {
    bool ok = true;
    std::string error;
};

/// Applies one directive. Invalid directives leave `state` untouched.
inline ApplyResult apply_rancnt(const RanCnt &cnt, RanControlState &state, const BeamCodebook &cb)
{
    auto it = state.links.find(directive_ue(cnt));
    if (it == state.links.end()) return {false, "unknown ue '" + directive_ue(cnt) + "'"};
    UeLinkControl &link = it->second;
    return std::visit(
        [&](const auto &d) -> ApplyResult {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, SetBeam>) {
                if (d.beam >= cb.size()) return {false, "SetBeam index " + std::to_string(d.beam) + " out of range"};
                link.active_beam = d.beam;
                link.policy = SweepPolicy::KnowledgeDriven;
                link.window.reset();
                link.window_sweep_pending = false;
            } else if constexpr (std::is_same_v<T, SweepWindow>) {
                const double eps = 1e-12;
                if (!(d.low < d.high) || d.low < cb.span_low() - eps || d.high > cb.span_high() + eps)
                    return {false, "SweepWindow outside codebook span"};
                link.window = std::make_pair(d.low, d.high);
                link.window_sweep_pending = true;
                link.policy = SweepPolicy::KnowledgeDriven;
            } else if constexpr (std::is_same_v<T, ChannelEstimate>) {
                for (std::size_t i = 1; i < d.taps.size(); ++i)
                    if (d.taps[i].delay < d.taps[i - 1].delay) return {false, "ChannelEstimate taps not sorted"};
                link.equalizer = d.taps;
                link.pilot_suppressed_frames = 1;
            } else {
                link.policy = SweepPolicy::Periodic;
                link.window.reset();
                link.window_sweep_pending = false;
                link.pilot_suppressed_frames = 0;
            }
            return {};
        },
        cnt);
}

/// Beams the next sweep probes: the window contents (or the beam nearest the
/// window center if none fall inside), or the whole codebook.
inline std::vector<std::size_t> sweep_candidates(const UeLinkControl &link, const BeamCodebook &cb)
{
    std::vector<std::size_t> out;
    if (!link.window) {
        for (std::size_t i = 0; i < cb.size(); ++i) out.push_back(i);
        return out;
    }
    const auto [lo, hi] = *link.window;
    for (std::size_t i = 0; i < cb.size(); ++i)
        if (cb.beams[i] >= lo && cb.beams[i] <= hi) out.push_back(i);
    if (out.empty()) out.push_back(nearest_beam(cb, (lo + hi) / 2.0));
    return out;
}

// ---- canonical text --------------------------------------------------------

inline std::string canonical_taps(const std::vector<CsiTap> &taps)
{
    std::string s = "[";
    for (std::size_t i = 0; i < taps.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(taps[i].path_id) + ':' + format_number(taps[i].delay) + ':' +
             format_number(taps[i].gain.real()) + ':' + format_number(taps[i].gain.imag());
    }
    return s + "]";
}

inline std::string to_canonical(const RanCnt &cnt)
{
    return std::visit(
        [](const auto &d) -> std::string {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, SetBeam>)
                return "SET_BEAM ue=" + d.ue_id + " beam=" + std::to_string(d.beam);
            else if constexpr (std::is_same_v<T, SweepWindow>)
                return "SWEEP_WINDOW ue=" + d.ue_id + " low=" + format_number(d.low) + " high=" + format_number(d.high);
            else if constexpr (std::is_same_v<T, ChannelEstimate>)
                return "CHANNEL_ESTIMATE ue=" + d.ue_id + " taps=" + canonical_taps(d.taps);
            else
                return "FALLBACK ue=" + d.ue_id;
        },
        cnt);
}

inline std::string to_canonical(const UeRecord &r)
{
    std::string s = "ue=" + r.ue_id + " rssi=" + format_number(r.rssi) + " aoa=" + format_number(r.aoa) +
                    " beam=" + std::to_string(r.active_beam) + " csi=" + canonical_taps(r.csi);
    if (r.claimed_position) {
        const Vec3 &c = *r.claimed_position;
        s += " claim=" + format_number(c.x()) + ',' + format_number(c.y()) + ',' + format_number(c.z());
    }
    return s;
}

} // namespace kran

#endif // KRAN_RAN_HPP
