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

// Knowledge agent: fuses infrastructure sensor data into a world-frame
// environment state, maintains the fingerprint map of the radio cell and
// turns knowledge into RAN control directives (position verification, beam
// provision, channel provision) with a fallback to the conventional procedure
// whenever sensor knowledge is not trustworthy.

#ifndef KRAN_KA_HPP
#define KRAN_KA_HPP

#include "kran/ran.hpp"
#include "kran/raytrace.hpp"
#include "kran/scene.hpp"
#include "kran/sensors.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace kran {

enum class EntityClass { Ue, Agv, Passive };

inline const char *to_string(EntityClass c)
{
    switch (c) {
    case EntityClass::Ue: return "UE";
    case EntityClass::Agv: return "AGV";
    case EntityClass::Passive: return "PASSIVE";
    }
    return "?";
}

struct EntityEstimate {
    EntityClass cls = EntityClass::Passive;
    Vec3 position = Vec3::Zero();   // world, m
    Mat3 covariance = Mat3::Zero(); // m^2
    double last_seen = 0.0;
    Vec3 extents = Vec3::Zero();
    std::map<std::string, double> witnesses; // sensor id -> last observation time
    std::optional<double> aoa_residual;      // RAN AoA minus geometric bearing, rad
};

struct EnvState {
    double timestamp = 0.0;
    std::map<std::string, EntityEstimate> entities;
    std::uint64_t next_object_id = 0;
};

// What the agent knows about entities independently of the sensors (the AGV
// fleet registry and UE subscriptions).
struct RegistryEntry {
    EntityClass cls = EntityClass::Ue;
    Vec3 extents = Vec3::Zero();
    double reflectivity = 0.0;
};
using EntityRegistry = std::map<std::string, RegistryEntry>;

struct KaConfig {
    double auth_gate = 11.34;            // chi-square, 3 dof, 0.99
    double move_threshold = 0.25;        // m
    double env_change_threshold = 0.25;  // m
    double window_k = 3.0;               // sigma multiplier for sweep windows
    double staleness = 0.5;              // s
    double witness_gate = 2.0;           // m, Euclidean gate for the verification witness
    double association_gate = 1.0;       // m, anonymous detection to track
    double knowledge_sigma = 0.5;        // m, KNOWLEDGE vs WINDOW boundary
    double corridor_radius = 1.0;        // m, link relevance capsule
    double cell_size = 0.5;              // m, fingerprint grid
    double prediction_horizon = 5.0;     // s
    double prediction_dt = 0.05;         // s
    double prediction_interval = 0.5;    // s between route forecasts without changes
    double reverify_period = 1.0;        // s
    double aoa_gate = deg_to_rad(10.0);  // rad

    void validate() const
    {
        const std::pair<const char *, double> fields[] = {
            {"auth_gate", auth_gate},
            {"move_threshold", move_threshold},
            {"env_change_threshold", env_change_threshold},
            {"window_k", window_k},
            {"staleness", staleness},
            {"witness_gate", witness_gate},
            {"association_gate", association_gate},
            {"knowledge_sigma", knowledge_sigma},
            {"corridor_radius", corridor_radius},
            {"cell_size", cell_size},
            {"prediction_horizon", prediction_horizon},
            {"prediction_dt", prediction_dt},
            {"prediction_interval", prediction_interval},
            {"reverify_period", reverify_period},
            {"aoa_gate", aoa_gate},
        };
        for (const auto &[name, v] : fields)
            if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput(std::string("KaConfig.") + name + " must be positive");
        if (prediction_horizon < prediction_dt) throw InvalidInput("KaConfig.prediction_horizon must be >= prediction_dt");
    }
};

enum class KaMode { Knowledge, Window, Fallback };

inline const char *to_string(KaMode m)
{
    switch (m) {
    case KaMode::Knowledge: return "KNOWLEDGE";
    case KaMode::Window: return "WINDOW";
    case KaMode::Fallback: return "FALLBACK";
    }
    return "?";
}

struct SensorHealth {
    std::size_t total = 0;
    std::size_t up = 0; // not DOWN
    bool healthy() const { return up > 0; }
};

inline constexpr double kTimeEps = 1e-9;

inline bool is_fresh(double last_seen, double now, double staleness) { return now - last_seen <= staleness + kTimeEps; }

inline double position_sigma(const Mat3 &cov)
{
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// ---- fingerprint map -------------------------------------------------------

struct CellKey {
    std::int64_t i = 0;
    std::int64_t j = 0;
    auto operator<=>(const CellKey &) const = default;
};

inline CellKey cell_of(const Vec3 &p, double cell_size = 0.5)
{
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_size)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_size))};
}

/// Fingerprint of the set of sensors that can currently see an entity.
inline std::uint64_t witness_hash(const std::set<std::string> &sensor_ids)
{
    std::uint64_t h = fnv1a("kran-witness");
    for (const auto &id : sensor_ids) {
        h = fnv1a(id, h);
        h = fnv1a("\n", h);
    }
    return h;
}

struct FingerprintRecord {
    CellKey key;
    std::uint64_t hash = 0;
    std::uint64_t count = 1;
    double first_seen = 0.0;
    double last_seen = 0.0;
};

// Cell -> fingerprint store. Written only by the agent's stream processor.
class MapDb {
public:
    const FingerprintRecord *find(const CellKey &key) const
    {
        auto it = records_.find(key);
        return it == records_.end() ? nullptr : &it->second;
    }

    // Same hash bumps the count; a different hash replaces the record.
    const FingerprintRecord &update(const CellKey &key, std::uint64_t hash, double t)
    {
        auto [it, inserted] = records_.try_emplace(key, FingerprintRecord{key, hash, 1, t, t});
        FingerprintRecord &r = it->second;
        if (!inserted) {
            if (r.hash == hash) {
                ++r.count;
                r.last_seen = t;
            } else {
                r = FingerprintRecord{key, hash, 1, t, t};
            }
        }
        return r;
    }

    std::size_t size() const { return records_.size(); }
    const std::map<CellKey, FingerprintRecord> &records() const { return records_; }

    // `cell=<i>,<j> hash=<16-hex> count=<n> first=<s> last=<s>`, one per line, sorted by cell.
    void save(std::ostream &os) const
    {
        for (const auto &[key, r] : records_) {
            std::ostringstream hex;
            hex << std::hex << std::setw(16) << std::setfill('0') << r.hash;
            os << "cell=" << key.i << ',' << key.j << " hash=" << hex.str() << " count=" << r.count
               << " first=" << format_number(r.first_seen) << " last=" << format_number(r.last_seen) << '\n';
        }
    }

    static MapDb load(std::istream &is)
    {
        MapDb db;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            FingerprintRecord r;
            std::string hex;
            char comma = 0;
            std::istringstream ls(line);
            std::string tok;
            bool ok = true;
            int fields = 0;
            while (ls >> tok && ok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) {
                    ok = false;
                    break;
                }
                const std::string k = tok.substr(0, eq);
                std::istringstream v(tok.substr(eq + 1));
                if (k == "cell") ok = static_cast<bool>(v >> r.key.i >> comma >> r.key.j) && comma == ',';
                else if (k == "hash") ok = static_cast<bool>(v >> std::hex >> r.hash);
                else if (k == "count") ok = static_cast<bool>(v >> r.count);
                else if (k == "first") ok = static_cast<bool>(v >> r.first_seen);
                else if (k == "last") ok = static_cast<bool>(v >> r.last_seen);
                else ok = false;
                ++fields;
            }
            if (!ok || fields != 5 || r.count < 1)
                throw InvalidInput("map db line " + std::to_string(lineno) + " is malformed");
            db.records_[r.key] = r;
        }
        return db;
    }

private:
    std::map<CellKey, FingerprintRecord> records_;
};

// ---- fusion ----------------------------------------------------------------

namespace detail {

inline Mat3 invert_spd(const Mat3 &m)
{
    Eigen::LLT<Mat3> llt(m);
    if (llt.info() != Eigen::Success || !(m.determinant() > 1e-300)) llt.compute(m + 1e-12 * Mat3::Identity());
    return llt.solve(Mat3::Identity());
}

inline double point_segment_distance(const Vec3 &p, const Vec3 &a, const Vec3 &b)
{
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

inline bool measurement_less(const WorldMeasurement &a, const WorldMeasurement &b)
{
    return std::make_tuple(a.sensor_id, a.entity_id.value_or(""), a.position.x(), a.position.y(), a.position.z()) <
           std::make_tuple(b.sensor_id, b.entity_id.value_or(""), b.position.x(), b.position.y(), b.position.z());
}

} // namespace detail

struct FusedEstimate {
    Vec3 position = Vec3::Zero();
    Mat3 covariance = Mat3::Zero();
};

/// Inverse-covariance weighting: S_f = (sum S_i^-1)^-1, x_f = S_f sum S_i^-1 x_i.
/// A single measurement passes through unchanged.
inline FusedEstimate fuse_estimates(const std::vector<WorldMeasurement> &group)
{
    if (group.empty()) throw InvalidInput("fuse_estimates: empty group");
    if (group.size() == 1) return {group.front().position, group.front().covariance};
    Mat3 info = Mat3::Zero();
    Vec3 weighted = Vec3::Zero();
    for (const auto &m : group) {
        const Mat3 inv = detail::invert_spd(m.covariance);
        info += inv;
        weighted += inv * m.position;
    }
    FusedEstimate f;
    f.covariance = detail::invert_spd(info);
    f.covariance = 0.5 * (f.covariance + f.covariance.transpose()).eval();
    f.position = f.covariance * weighted;
    return f;
}

/// Translates every measurement to the world frame, associates anonymous
/// detections to tracks by nearest neighbour, fuses per entity and drops
/// entities unseen for longer than the staleness window. RAN AoA is kept only
/// as a consistency residual. Measurements are processed in a canonical order,
/// so the result does not depend on the order of `sens_states`.
inline EnvState fuse(const std::vector<SensState> &sens_states, const RanState *ran_state, const EnvState &prev,
                     const EntityRegistry &registry, const KaConfig &config, double now,
                     std::vector<std::string> *warnings = nullptr)
{
    EnvState next = prev;
    next.timestamp = now;

    std::vector<WorldMeasurement> all;
    for (const auto &s : sens_states) {
        if (s.health == Health::Down) continue;
        for (auto &m : to_common_frame(s)) {
            if (!is_symmetric_psd(m.covariance, 1e-9) || !is_finite(m.position)) {
                if (warnings) warnings->push_back("discarded non-PSD measurement from " + m.sensor_id);
                continue;
            }
            all.push_back(std::move(m));
        }
    }
    std::sort(all.begin(), all.end(), detail::measurement_less);

    std::map<std::string, std::vector<WorldMeasurement>> groups;
    std::vector<WorldMeasurement> anonymous;
    for (auto &m : all) {
        if (m.entity_id) groups[*m.entity_id].push_back(std::move(m));
        else anonymous.push_back(std::move(m));
    }

    // Association references: this step's tagged fixes, else the previous track.
    std::map<std::string, Vec3> refs;
    for (const auto &[id, e] : prev.entities) refs[id] = e.position;
    for (const auto &[id, g] : groups) {
        Vec3 mean = Vec3::Zero();
        for (const auto &m : g) mean += m.position;
        refs[id] = mean / static_cast<double>(g.size());
    }
    for (auto &m : anonymous) {
        const std::string *best = nullptr;
        double best_d = config.association_gate;
        for (const auto &[id, p] : refs) {
            const double d = (p - m.position).norm();
            if (d <= best_d) {
                best_d = d;
                best = &id;
            }
        }
        std::string id;
        if (best) {
            id = *best;
        } else {
            id = "obj-" + std::to_string(next.next_object_id++);
            refs[id] = m.position;
        }
        groups[id].push_back(std::move(m));
    }

    for (const auto &[id, group] : groups) {
        const FusedEstimate f = fuse_estimates(group);
        auto [it, inserted] = next.entities.try_emplace(id);
        EntityEstimate &e = it->second;
        if (auto reg = registry.find(id); reg != registry.end()) {
            e.cls = reg->second.cls;
            e.extents = reg->second.extents;
        } else if (inserted) {
            const bool tagged = std::any_of(group.begin(), group.end(), [](const auto &m) { return m.entity_id.has_value(); });
            e.cls = tagged ? EntityClass::Ue : EntityClass::Passive;
        }
        if (registry.find(id) == registry.end())
            for (const auto &m : group) e.extents = e.extents.cwiseMax(m.extents);
        e.position = f.position;
        e.covariance = f.covariance;
        e.last_seen = now;
        for (const auto &m : group) e.witnesses[m.sensor_id] = now;
    }

    for (auto it = next.entities.begin(); it != next.entities.end();) {
        if (!is_fresh(it->second.last_seen, now, config.staleness)) {
            it = next.entities.erase(it);
            continue;
        }
        auto &w = it->second.witnesses;
        for (auto wi = w.begin(); wi != w.end();) wi = is_fresh(wi->second, now, config.staleness) ? std::next(wi) : w.erase(wi);
        ++it;
    }

    if (ran_state) {
        for (const auto &rec : ran_state->records) {
            auto it = next.entities.find(rec.ue_id);
            if (it == next.entities.end() || it->second.position == ran_state->antenna_pose.position) continue;
            const double bearing =
                relative_azimuth(ran_state->antenna_pose, azimuth(it->second.position - ran_state->antenna_pose.position));
            it->second.aoa_residual = wrap_angle(rec.aoa - bearing);
        }
    }
    return next;
}

inline std::set<std::string> fresh_witnesses(const EntityEstimate &e, double now, double staleness)
{
    std::set<std::string> out;
    for (const auto &[id, t] : e.witnesses)
        if (is_fresh(t, now, staleness)) out.insert(id);
    return out;
}

// ---- verification ----------------------------------------------------------

struct AuditEntry {
    double timestamp = 0.0;
    std::string ue_id;
    AuthDecision decision;
};
using AuditLog = std::vector<AuditEntry>;

inline std::string to_canonical(const AuditEntry &a)
{
    return "ue=" + a.ue_id + " verdict=" + to_string(a.decision.verdict) + " reason=" + to_string(a.decision.reason) +
           " d2=" + (a.decision.mahalanobis_sq ? format_number(*a.decision.mahalanobis_sq) : std::string("-"));
}

/// Checks a claimed UE position against the geofence, the fused sensor
/// witness (Mahalanobis gate) and the fingerprint map. Every decision is
/// appended to `audit`; accepted claims update the map.
inline AuthDecision verify_ue(const UeRecord &record, const EnvState &env, MapDb &map, const SceneModel &scene,
                              const SensorHealth &health, const KaConfig &config, double now, AuditLog &audit)
{
    if (!record.claimed_position) throw InvalidInput("verify_ue: record carries no claimed position");
    const Vec3 claim = *record.claimed_position;
    auto decide = [&](AuthDecision d) {
        audit.push_back({now, record.ue_id, d});
        return d;
    };
    if (!geofence_contains(scene, claim)) return decide({Verdict::Reject, AuthReason::Geofence, std::nullopt});

    // The track carrying the claimant's own id is the witness; otherwise the
    // nearest fresh UE track inside the gate.
    const EntityEstimate *witness = nullptr;
    if (auto it = env.entities.find(record.ue_id);
        it != env.entities.end() && it->second.cls == EntityClass::Ue && is_fresh(it->second.last_seen, now, config.staleness)) {
        witness = &it->second;
    } else {
        double best = config.witness_gate;
        for (const auto &[id, e] : env.entities) {
            if (e.cls != EntityClass::Ue || !is_fresh(e.last_seen, now, config.staleness)) continue;
            const double d = (e.position - claim).norm();
            if (d <= best) {
                best = d;
                witness = &e;
            }
        }
    }
    if (!witness)
        return decide(health.healthy() ? AuthDecision{Verdict::Reject, AuthReason::NoWitness, std::nullopt}
                                       : AuthDecision{Verdict::Unverified, AuthReason::SensorsUnavailable, std::nullopt});

    Mat3 cov = witness->covariance;
    Eigen::LLT<Mat3> llt(cov);
    if (llt.info() != Eigen::Success || !(cov.determinant() > 0.0)) llt.compute(cov + 1e-9 * Mat3::Identity());
    const Vec3 r = claim - witness->position;
    const double d2 = r.dot(llt.solve(r));
    if (d2 > config.auth_gate) return decide({Verdict::Reject, AuthReason::PositionMismatch, d2});

    const CellKey key = cell_of(claim, config.cell_size);
    const std::uint64_t hash = witness_hash(fresh_witnesses(*witness, now, config.staleness));
    const FingerprintRecord *known = map.find(key);
    if (!known) {
        map.update(key, hash, now);
        return decide({Verdict::Accept, AuthReason::NewCell, d2});
    }
    if (known->hash != hash) return decide({Verdict::Reject, AuthReason::FingerprintMismatch, d2});
    map.update(key, hash, now);
    return decide({Verdict::Accept, AuthReason::Match, d2});
}

// ---- beam provision --------------------------------------------------------

inline double bearing_to(const Pose &antenna, const Vec3 &p)
{
    return relative_azimuth(antenna, azimuth(p - antenna.position));
}

/// Codebook argmax of the array gain at the bearing to the fused UE position.
/// Returns nullopt if the UE is not in the environment state.
inline std::optional<RanCnt> select_beam(const EnvState &env, const std::string &ue_id, const Pose &antenna,
                                         const BeamCodebook &cb)
{
    auto it = env.entities.find(ue_id);
    if (it == env.entities.end()) return std::nullopt;
    const double bearing = bearing_to(antenna, it->second.position);
    std::size_t best = 0;
    double best_gain = beam_gain_db_toward(cb, 0, bearing);
    for (std::size_t b = 1; b < cb.size(); ++b) {
        const double g = beam_gain_db_toward(cb, b, bearing);
        if (g > best_gain + kBeamTieToleranceDb) {
            best = b;
            best_gain = g;
        }
    }
    return SetBeam{ue_id, best};
}

/// Sweep window of +-k * atan(sigma_pos / range) around the bearing, clipped
/// to the codebook span. Falls back when the window covers the whole span or
/// the UE is closer than 0.5 m to the mast.
inline RanCnt narrow_sweep(const EnvState &env, const std::string &ue_id, const Pose &antenna, const BeamCodebook &cb,
                           const KaConfig &config)
{
    auto it = env.entities.find(ue_id);
    if (it == env.entities.end()) return Fallback{ue_id};
    const EntityEstimate &e = it->second;
    const double range = (e.position - antenna.position).norm();
    if (range < 0.5 || !e.covariance.allFinite()) return Fallback{ue_id};
    const double sigma_theta = std::atan(position_sigma(e.covariance) / range);
    const double bearing = bearing_to(antenna, e.position);
    double low = bearing - config.window_k * sigma_theta;
    double high = bearing + config.window_k * sigma_theta;
    const double span_low = cb.span_low(), span_high = cb.span_high();
    if (low <= span_low && high >= span_high) return Fallback{ue_id};
    low = std::max(low, span_low);
    high = std::min(high, span_high);
    if (!(low < high)) {
        // Bearing lies beyond a span edge: probe the edge neighbourhood.
        const double pitch = (span_high - span_low) / static_cast<double>(cb.size() - 1);
        if (bearing >= span_high) return SweepWindow{ue_id, std::max(span_low, span_high - pitch), span_high};
        return SweepWindow{ue_id, span_low, std::min(span_high, span_low + pitch)};
    }
    return SweepWindow{ue_id, low, high};
}

// ---- environment change and channel provision -----------------------------

struct EntityChange {
    enum class Kind { Moved, Appeared, Disappeared };
    std::string id;
    Kind kind = Kind::Moved;
    std::optional<Vec3> before;
    std::optional<Vec3> after;
};

struct ChangeSet {
    std::vector<EntityChange> changes; // sorted by id

    bool empty() const { return changes.empty(); }
    bool contains(const std::string &id) const
    {
        return std::any_of(changes.begin(), changes.end(), [&](const EntityChange &c) { return c.id == id; });
    }
};

/// Entities that moved strictly more than the change threshold, appeared or disappeared.
inline ChangeSet detect_change(const EnvState &prev, const EnvState &next, const KaConfig &config)
{
    ChangeSet cs;
    auto p = prev.entities.begin();
    auto n = next.entities.begin();
    while (p != prev.entities.end() || n != next.entities.end()) {
        if (n == next.entities.end() || (p != prev.entities.end() && p->first < n->first)) {
            cs.changes.push_back({p->first, EntityChange::Kind::Disappeared, p->second.position, std::nullopt});
            ++p;
        } else if (p == prev.entities.end() || n->first < p->first) {
            cs.changes.push_back({n->first, EntityChange::Kind::Appeared, std::nullopt, n->second.position});
            ++n;
        } else {
            if ((n->second.position - p->second.position).norm() > config.env_change_threshold)
                cs.changes.push_back({n->first, EntityChange::Kind::Moved, p->second.position, n->second.position});
            ++p;
            ++n;
        }
    }
    return cs;
}

using Rtm = std::function<Cir(const SceneModel &, const Vec3 &, const Vec3 &)>;

inline Rtm default_rtm()
{
    return [](const SceneModel &scene, const Vec3 &tx, const Vec3 &rx) { return trace_cir(scene, tx, rx); };
}

/// Static scene plus a box for every non-UE entity with extents, in id order.
inline SceneModel scene_from_env(const SceneModel &scene, const EnvState &env, const EntityRegistry &registry)
{
    SceneModel out = scene;
    for (const auto &[id, e] : env.entities) {
        if (e.cls == EntityClass::Ue || !(e.extents.squaredNorm() > 0.0)) continue;
        double refl = 0.0;
        if (auto reg = registry.find(id); reg != registry.end()) refl = reg->second.reflectivity;
        out.obstacles.push_back(Aabb::centered(e.position, e.extents, refl, id));
    }
    return out;
}

inline std::vector<CsiTap> taps_of(const Cir &cir)
{
    std::vector<CsiTap> taps;
    taps.reserve(cir.paths.size());
    for (const auto &p : cir.paths) taps.push_back({p.delay, p.gain, p.path_id});
    return taps;
}

// Route knowledge from the AGV routing system.
struct RouteKnowledge {
    std::map<std::string, RoutePlan> ue_routes;
    std::vector<MovingBlocker> blockers;
};

struct ChannelProvision {
    std::vector<RanCnt> directives;
    std::map<std::string, Cir> estimates; // per UE, the traced channel behind each ChannelEstimate
    std::vector<BlockageEvent> advisories;
};

/// Route forecast of tx-UE line-of-sight losses for each listed UE.
inline std::vector<BlockageEvent> forecast_blockage(const SceneModel &scene, const Vec3 &tx, const EnvState &env,
                                                    const std::vector<std::string> &ue_ids,
                                                    const RouteKnowledge &routes, const KaConfig &config, double now)
{
    std::vector<BlockageEvent> out;
    for (const auto &ue : ue_ids) {
        RoutePlan route;
        if (auto r = routes.ue_routes.find(ue); r != routes.ue_routes.end()) route = r->second;
        else if (auto e = env.entities.find(ue); e != env.entities.end()) route = RoutePlan::stationary(e->second.position);
        else continue;
        auto events = predict_blockage(scene, tx, ue, route, routes.blockers, now, config.prediction_horizon,
                                       config.prediction_dt);
        out.insert(out.end(), events.begin(), events.end());
    }
    return out;
}

/// Re-traces the channel of every UE whose tx-UE corridor contains a changed
/// entity (or whose own position changed) and emits one ChannelEstimate per
/// affected UE; RTM failures turn into Fallback for that UE. Route-based
/// blockage forecasts are returned as advisories.
inline ChannelProvision provide_channel(const EnvState &env, const ChangeSet &changes, const SceneModel &scene,
                                        const EntityRegistry &registry, const Vec3 &tx, const Rtm &rtm,
                                        const RouteKnowledge &routes, const std::vector<std::string> &ue_ids,
                                        const KaConfig &config, double now)
{
    ChannelProvision out;
    if (changes.empty()) return out;
    const SceneModel estimated = scene_from_env(scene, env, registry);
    for (const auto &ue : ue_ids) {
        auto it = env.entities.find(ue);
        if (it == env.entities.end()) continue;
        const Vec3 ue_pos = it->second.position;
        bool affected = changes.contains(ue);
        for (const auto &c : changes.changes) {
            if (affected) break;
            for (const auto &p : {c.before, c.after})
                if (p && detail::point_segment_distance(*p, tx, ue_pos) <= config.corridor_radius) affected = true;
        }
        if (!affected || ue_pos == tx) continue;
        try {
            Cir cir = rtm(estimated, tx, ue_pos);
            out.directives.push_back(ChannelEstimate{ue, taps_of(cir)});
            out.estimates[ue] = std::move(cir);
        } catch (const std::exception &) {
            out.directives.push_back(Fallback{ue});
        }
    }
    out.advisories = forecast_blockage(scene, tx, env, ue_ids, routes, config, now);
    return out;
}

/// KNOWLEDGE with a fresh fix no wider than knowledge_sigma, WINDOW with a
/// fresh but wider fix, FALLBACK otherwise.
inline KaMode evaluate_mode(const SensorHealth &health, const EnvState &env, const std::string &ue_id,
                            const KaConfig &config, double now)
{
    if (!health.healthy()) return KaMode::Fallback;
    auto it = env.entities.find(ue_id);
    if (it == env.entities.end() || !is_fresh(it->second.last_seen, now, config.staleness)) return KaMode::Fallback;
    return position_sigma(it->second.covariance) <= config.knowledge_sigma ? KaMode::Knowledge : KaMode::Window;
}

// ---- the agent ---------------------------------------------------------------

struct ModeTransition {
    std::string ue_id;
    KaMode from = KaMode::Fallback;
    KaMode to = KaMode::Fallback;
};

struct KaDecisions {
    std::vector<RanCnt> directives;
    std::map<std::string, Cir> estimates;
    std::vector<BlockageEvent> advisories; // newly announced this step
    std::vector<ModeTransition> transitions;
    std::map<std::string, KaMode> modes;
    std::vector<std::string> warnings;
};

// Single logical state machine consuming SensState/RanState in time order and
// producing RanCnt directives.
class KnowledgeAgent {
public:
    KnowledgeAgent(SceneModel scene, Pose antenna, BeamCodebook codebook, KaConfig config, EntityRegistry registry,
                   RouteKnowledge routes = {}, Rtm rtm = default_rtm())
        : scene_(std::move(scene)), antenna_(antenna), codebook_(std::move(codebook)), config_(config),
          registry_(std::move(registry)), routes_(std::move(routes)), rtm_(std::move(rtm))
    {
        config_.validate();
    }

    const EnvState &env() const { return env_; }
    const MapDb &map() const { return map_; }
    MapDb &map() { return map_; }
    const AuditLog &audit() const { return audit_; }
    const KaConfig &config() const { return config_; }
    const SensorHealth &health() const { return health_; }

    /// Fuses one step of sensor and RAN observations.
    std::vector<std::string> ingest(double now, const std::vector<SensState> &sens, const RanState *ran,
                                    const SensorHealth &health)
    {
        std::vector<std::string> warnings;
        health_ = health;
        env_ = fuse(sens, ran, env_, registry_, config_, now, &warnings);
        return warnings;
    }

    /// Verification service for the RAN's random-access handling.
    std::optional<AuthDecision> verify(const RanState &state)
    {
        if (state.records.empty() || !state.records.front().claimed_position) return std::nullopt;
        return verify_ue(state.records.front(), env_, map_, scene_, health_, config_, state.timestamp, audit_);
    }

    Verifier verifier()
    {
        return [this](const RanState &s) { return verify(s); };
    }

    /// Mode evaluation, beam provision, channel provision and route forecasts
    /// for the admitted UEs.
    KaDecisions decide(double now, const std::vector<std::string> &ue_ids)
    {
        KaDecisions out;
        std::vector<std::string> knowledge_ues;
        for (const auto &ue : ue_ids) {
            UeTrack &track = tracks_[ue];
            const KaMode mode = evaluate_mode(health_, env_, ue, config_, now);
            out.modes[ue] = mode;
            const bool entered = mode != track.mode;
            if (entered) {
                out.transitions.push_back({ue, track.mode, mode});
                track.mode = mode;
                track.anchor.reset();
                track.beam.reset();
            }
            if (mode == KaMode::Fallback) {
                if (entered) out.directives.push_back(Fallback{ue});
                continue;
            }
            knowledge_ues.push_back(ue);
            const Vec3 pos = env_.entities.at(ue).position;
            const bool moved = !track.anchor || (pos - *track.anchor).norm() > config_.move_threshold;
            if (mode == KaMode::Knowledge) {
                // Re-evaluate once the UE has moved; only a different beam is sent.
                if (!moved) continue;
                track.anchor = pos;
                const auto cnt = select_beam(env_, ue, antenna_, codebook_);
                if (!cnt) continue;
                const std::size_t beam = std::get<SetBeam>(*cnt).beam;
                if (!track.beam || *track.beam != beam) {
                    out.directives.push_back(*cnt);
                    track.beam = beam;
                }
            } else if (moved) {
                out.directives.push_back(narrow_sweep(env_, ue, antenna_, codebook_, config_));
                track.anchor = pos;
            }
        }

        for (const auto &[id, e] : env_.entities) {
            if (e.cls != EntityClass::Ue) continue;
            map_.update(cell_of(e.position, config_.cell_size), witness_hash(fresh_witnesses(e, now, config_.staleness)),
                        now);
        }

        const ChangeSet changes = detect_change(reference_, env_, config_);
        std::vector<BlockageEvent> forecast;
        if (!changes.empty()) {
            ChannelProvision cp = provide_channel(env_, changes, scene_, registry_, antenna_.position, rtm_, routes_,
                                                  knowledge_ues, config_, now);
            for (auto &d : cp.directives) out.directives.push_back(std::move(d));
            out.estimates = std::move(cp.estimates);
            forecast = std::move(cp.advisories);
            last_forecast_ = now;
            for (const auto &c : changes.changes) {
                if (c.kind == EntityChange::Kind::Disappeared) reference_.entities.erase(c.id);
                else reference_.entities[c.id] = env_.entities.at(c.id);
            }
        } else if (!last_forecast_ || now - *last_forecast_ >= config_.prediction_interval - kTimeEps) {
            forecast = forecast_blockage(scene_, antenna_.position, env_, knowledge_ues, routes_, config_, now);
            last_forecast_ = now;
        }
        reference_.timestamp = now;
        for (auto &ev : forecast)
            if (announce(ev)) out.advisories.push_back(ev);
        return out;
    }

private:
    struct UeTrack {
        KaMode mode = KaMode::Fallback; // the RAN starts on the conventional procedure
        std::optional<Vec3> anchor;
        std::optional<std::size_t> beam;
    };

    // Records a forecast event; true when it is not already covered by an
    // announced one (announced intervals grow as the horizon slides).
    bool announce(const BlockageEvent &ev)
    {
        auto &known = announced_[ev.ue_id];
        for (auto &k : known) {
            if (ev.start <= k.end + config_.prediction_dt + kTimeEps && k.start <= ev.end + config_.prediction_dt + kTimeEps) {
                k.start = std::min(k.start, ev.start);
                k.end = std::max(k.end, ev.end);
                return false;
            }
        }
        known.push_back(ev);
        return true;
    }

    SceneModel scene_;
    Pose antenna_;
    BeamCodebook codebook_;
    KaConfig config_;
    EntityRegistry registry_;
    RouteKnowledge routes_;
    Rtm rtm_;
    EnvState env_;
    EnvState reference_;
    MapDb map_;
    AuditLog audit_;
    SensorHealth health_;
    std::map<std::string, UeTrack> tracks_;
    std::map<std::string, std::vector<BlockageEvent>> announced_;
    std::optional<double> last_forecast_;
};

} // namespace kran

#endif // KRAN_KA_HPP
