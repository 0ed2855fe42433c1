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

// Fixed-timestep simulation binding scene, sensors, RAN, ray tracer and the
// knowledge agent. Everything random is drawn from substream(seed, ...) keyed
// by purpose and step, so BASELINE and KNOWLEDGE runs of one scenario share
// their sweep noise.

#ifndef KRAN_ENGINE_HPP
#define KRAN_ENGINE_HPP

#include "kran/ka.hpp"
#include "kran/metrics.hpp"
#include "kran/raytrace.hpp"
#include "kran/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace kran {

class TraceLog {
public:
    void append(double t, std::string_view kind, std::string_view payload)
    {
        if (t < last_) throw std::logic_error("trace timestamps must be non-decreasing");
        last_ = t;
        char stamp[48];
        std::snprintf(stamp, sizeof stamp, "t=%.6f kind=", t);
        text_ += stamp;
        text_ += kind;
        text_ += " payload=";
        text_ += payload;
        text_ += '\n';
        ++lines_;
    }

    const std::string &text() const { return text_; }
    std::size_t size() const { return lines_; }

private:
    std::string text_;
    std::size_t lines_ = 0;
    double last_ = -std::numeric_limits<double>::infinity();
};

struct DirectiveRecord {
    std::string ue_id;
    KaMode mode = KaMode::Fallback; // the UE's mode when the directive was issued
    bool knowledge = false;
};

// Per-step bookkeeping used by the comparison harnesses.
struct StepRecord {
    double t = 0.0;
    std::uint64_t measurements = 0;
    std::map<std::string, std::size_t> active_beams;
    std::map<std::string, KaMode> modes;
    std::vector<DirectiveRecord> directives;
};

struct AnnouncedAdvisory {
    double announced = 0.0;
    BlockageEvent event;
};

struct LossInterval {
    std::string ue_id;
    double start = 0.0;
    double end = 0.0; // one step past the last blocked step
};

struct RunResult {
    Metrics metrics;
    TraceLog trace;
    MapDb map;
    AuditLog audit;
    std::vector<StepRecord> steps;
    std::vector<AnnouncedAdvisory> advisories;
    std::vector<LossInterval> losses;
    std::vector<double> nmse_samples;
    std::vector<std::string> warnings;
};

/// Normalised squared error between estimated and true taps, paths matched by
/// id. With `envelope` only tap magnitudes are compared. nullopt when the true
/// channel carries no energy.
inline std::optional<double> channel_nmse(const std::vector<CsiTap> &estimate, const std::vector<CsiTap> &truth,
                                          bool envelope = false)
{
    std::map<int, std::complex<double>> est, ref;
    for (const auto &t : estimate) est[t.path_id] += envelope ? std::complex<double>(std::abs(t.gain)) : t.gain;
    for (const auto &t : truth) ref[t.path_id] += envelope ? std::complex<double>(std::abs(t.gain)) : t.gain;
    double err = 0.0, energy = 0.0;
    for (const auto &[id, h] : ref) {
        energy += std::norm(h);
        const auto it = est.find(id);
        err += std::norm((it == est.end() ? std::complex<double>() : it->second) - h);
    }
    for (const auto &[id, h] : est)
        if (!ref.count(id)) err += std::norm(h);
    if (!(energy > 0.0)) return std::nullopt;
    return err / energy;
}

namespace detail {

struct UeSession {
    bool admitted = false;
    double next_attempt = 0.0;
    int consecutive_rejects = 0;
};

inline std::string mode_payload(const std::string &ue, KaMode from, KaMode to)
{
    return std::string("ue=") + ue + " from=" + to_string(from) + " to=" + to_string(to);
}

inline std::string advisory_payload(const BlockageEvent &ev)
{
    return "ue=" + ev.ue_id + " start=" + format_number(ev.start) + " end=" + format_number(ev.end);
}

inline std::string auth_payload(const std::string &ue, const Vec3 &claim, const AuthDecision &d)
{
    std::string out = "ue=" + ue + " claim=" + format_number(claim.x()) + ',' + format_number(claim.y()) + ',' +
                      format_number(claim.z()) + " verdict=" + to_string(d.verdict) + " reason=" + to_string(d.reason);
    if (d.mahalanobis_sq) out += " d2=" + format_number(*d.mahalanobis_sq);
    return out;
}

} // namespace detail

/// Runs a validated scenario to completion.
inline RunResult run(const ScenarioConfig &config)
{
    config.validate();
    RunResult out;
    Metrics &m = out.metrics;
    m.scenario = config.name;
    m.mode = config.mode;
    m.seed = config.seed;
    m.steps = config.steps();
    m.duration = config.duration;

    const bool knowledge = config.mode == RunMode::Knowledge;
    const Pose &antenna = config.antenna.pose;
    const BeamCodebook &cb = config.codebook;
    const double mismatch_amp = std::pow(10.0, -config.ran.model_mismatch_db / 20.0);

    // Entities in id order; the truth scene appends non-UE boxes in that order.
    std::vector<EntityConfig> entities = config.entities;
    std::sort(entities.begin(), entities.end(), [](const auto &a, const auto &b) { return a.id < b.id; });
    EntityRegistry registry;
    RouteKnowledge routes;
    std::vector<MovingBlocker> blockers;
    for (const auto &e : entities) {
        registry[e.id] = RegistryEntry{e.cls, e.extents, e.reflectivity};
        if (e.cls == EntityClass::Ue) {
            routes.ue_routes[e.id] = e.route;
        } else if (e.extents.squaredNorm() > 0.0) {
            blockers.push_back(MovingBlocker{e.id, e.route, e.extents, e.reflectivity});
        }
    }
    routes.blockers = blockers;

    std::optional<KnowledgeAgent> ka;
    if (knowledge) {
        ka.emplace(config.scene, antenna, cb, config.ka, registry, routes);
        if (config.warm_start_map) {
            std::ifstream in(*config.warm_start_map);
            if (!in) throw ScenarioError(config.warm_start_map->string() + ": cannot open warm-start map");
            ka->map() = MapDb::load(in);
        }
    }

    // Attack requests in time order; bursts are expanded from the run seed.
    struct Attack {
        double t;
        std::string id;
        Vec3 claim;
    };
    std::vector<Attack> attacks;
    for (const auto &a : config.attackers) {
        for (const auto &r : a.requests) attacks.push_back({r.time, a.id, r.claim});
        if (a.burst) {
            auto rng = substream(config.seed, "attack:" + a.id, 0);
            for (std::size_t i = 0; i < a.burst->count; ++i) {
                Vec3 p;
                for (int k = 0; k < 3; ++k)
                    p[k] = std::uniform_real_distribution<double>(a.burst->region_min[k], a.burst->region_max[k])(rng);
                attacks.push_back({a.burst->start + static_cast<double>(i) * a.burst->period, a.id, p});
            }
        }
    }
    std::stable_sort(attacks.begin(), attacks.end(), [](const Attack &x, const Attack &y) { return x.t < y.t; });
    std::size_t next_attack = 0;

    std::map<std::string, detail::UeSession> sessions;
    for (const auto &e : entities)
        if (e.cls == EntityClass::Ue) sessions[e.id].next_attempt = e.join_time;
    RanControlState ran;
    std::map<std::string, KaMode> modes;
    std::map<std::string, std::optional<double>> loss_open; // per UE, start of the current loss
    std::uint64_t misselected = 0, link_steps = 0;
    double rssi_sum = 0.0, oracle_sum = 0.0;
    double nmse_env_sum = 0.0;
    std::size_t nmse_env_count = 0;
    std::map<KaMode, std::uint64_t> occupancy;
    std::uint64_t mode_samples = 0;

    const std::int64_t n_steps = config.steps();
    const std::int64_t sweep_every = config.sweep_every();
    const double dt = config.dt;

    auto count_auth = [&](const AuthDecision &d) { ++m.auth_outcomes[{d.verdict, d.reason}]; };

    for (std::int64_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const auto uk = static_cast<std::uint64_t>(k);
        StepRecord step;
        step.t = t;

        // 1. ground truth
        std::vector<EntityTruth> truth;
        std::map<std::string, Vec3> true_pos;
        for (const auto &e : entities) {
            const Vec3 p = route_position_at(e.route, t);
            true_pos[e.id] = p;
            truth.push_back({e.id, p, e.extents, e.uwb_tag});
        }
        const SceneModel world = place_blockers(config.scene, blockers, t);
        std::map<std::string, Cir> cir_true;
        for (const auto &e : entities) {
            if (e.cls != EntityClass::Ue) continue;
            Cir c = trace_cir(world, antenna.position, true_pos[e.id]);
            for (auto &p : c.paths) p.gain *= mismatch_amp;
            cir_true[e.id] = std::move(c);
        }

        // 2. sensors
        std::vector<SensState> sens;
        SensorHealth health;
        if (knowledge) {
            for (const auto &s : config.sensors) {
                const Health h = s.health_at(t);
                ++health.total;
                if (h != Health::Down) ++health.up;
                if (h == Health::Down || !s.emits_at(k, dt)) continue; // a dark sensor sends nothing
                auto rng = substream(config.seed, "sensor:" + s.meta.sensor_id, uk);
                if (s.meta.kind == SensorKind::Uwb) {
                    for (const auto &e : truth) {
                        if (!e.uwb_tag) continue;
                        if (auto st = uwb_measure(e.id, e.position, s.meta, s.noise, h, t, rng)) sens.push_back(std::move(*st));
                    }
                } else {
                    sens.push_back(vision_detect(config.scene, truth, s.meta, s.noise, h, t, rng));
                }
            }
            for (const auto &s : sens) out.trace.append(t, "SENSSTATE", to_canonical(s));
        }

        // 3. RAN measurements of admitted UEs
        RanState ran_state;
        ran_state.antenna_pose = antenna;
        ran_state.timestamp = t;
        for (const auto &[id, link] : ran.links) {
            auto rng = substream(config.seed, "ranstate:" + id, uk);
            UeRecord rec = measure_ran_state(id, cir_true[id], cb, link.active_beam, antenna, config.antenna.tx_power_dbm,
                                             config.antenna.noise_floor_dbm, config.ran.noise, rng);
            out.trace.append(t, "RANSTATE", to_canonical(rec));
            ran_state.records.push_back(std::move(rec));
        }

        // 4. fusion
        if (ka) {
            for (auto &w : ka->ingest(t, sens, &ran_state, health)) out.warnings.push_back(std::move(w));
        }

        // 5. random access: joins, periodic re-verification, attackers
        std::set<std::string> swept;
        auto rssi_probe = [&](const std::string &ue, std::uint64_t index) {
            auto rng = substream(config.seed, "sweep:" + ue, index);
            std::normal_distribution<double> noise(0.0, 1.0);
            const double sigma = config.ran.noise.rssi_sigma_db;
            return [&, ue, rng, noise, sigma](std::size_t beam) mutable {
                const double clean = beam_rssi_dbm(cir_true[ue], cb, beam, antenna, config.antenna.tx_power_dbm,
                                                   config.antenna.noise_floor_dbm);
                return sigma > 0.0 ? clean + sigma * noise(rng) : clean;
            };
        };
        auto do_sweep = [&](const std::string &ue, const std::vector<std::size_t> &candidates) {
            const SweepResult r = sweep_beams(cb, rssi_probe(ue, uk), candidates);
            m.beam_measurements_total += r.measurements;
            step.measurements += r.measurements;
            ran.links[ue].active_beam = r.best_beam;
            swept.insert(ue);
        };
        auto request = [&](const std::string &ue, const Vec3 &claim) {
            AuthDecision d;
            if (ka) d = handle_rach(RachRequest{ue, t, claim}, antenna, ka->verifier());
            else d = {Verdict::Unverified, AuthReason::NoKnowledgeAgent, std::nullopt};
            count_auth(d);
            out.trace.append(t, "AUTH", detail::auth_payload(ue, claim, d));
            return d;
        };
        for (auto &[id, s] : sessions) {
            if (t + kTimeEps < s.next_attempt) continue;
            const AuthDecision d = request(id, true_pos[id]);
            s.next_attempt = t + config.ka.reverify_period;
            if (!s.admitted) {
                if (!admits(d)) continue;
                s.admitted = true;
                s.consecutive_rejects = 0;
                ran.links[id] = UeLinkControl{};
                do_sweep(id, {}); // initial acquisition
            } else if (admits(d)) {
                s.consecutive_rejects = 0;
            } else if (++s.consecutive_rejects >= config.ran.max_consecutive_rejects) {
                s.admitted = false;
                ran.links.erase(id);
                modes.erase(id);
            }
        }
        while (next_attack < attacks.size() && attacks[next_attack].t <= t + kTimeEps) {
            request(attacks[next_attack].id, attacks[next_attack].claim);
            ++next_attack;
        }

        std::vector<std::string> admitted;
        for (const auto &[id, link] : ran.links) admitted.push_back(id);

        // 6. knowledge agent decisions
        if (ka) {
            KaDecisions dec = ka->decide(t, admitted);
            for (const auto &tr : dec.transitions) out.trace.append(t, "MODE", detail::mode_payload(tr.ue_id, tr.from, tr.to));
            modes = dec.modes;
            for (const auto &d : dec.directives) {
                const std::string &ue = directive_ue(d);
                out.trace.append(t, "RANCNT", to_canonical(d));
                step.directives.push_back({ue, modes.count(ue) ? modes[ue] : KaMode::Fallback, is_knowledge_directive(d)});
                const ApplyResult r = apply_rancnt(d, ran, cb);
                if (!r.ok) {
                    ++m.ran_directives_rejected;
                    out.warnings.push_back("t=" + format_number(t) + " directive rejected: " + r.error);
                    continue;
                }
                if (const auto *ce = std::get_if<ChannelEstimate>(&d)) {
                    ++m.channel_estimates;
                    const auto truth_taps = taps_of(cir_true[ue]);
                    if (auto e = channel_nmse(ce->taps, truth_taps)) out.nmse_samples.push_back(*e);
                    if (auto e = channel_nmse(ce->taps, truth_taps, true)) {
                        nmse_env_sum += *e;
                        ++nmse_env_count;
                    }
                }
            }
            for (const auto &adv : dec.advisories) {
                out.trace.append(t, "ADVISORY", detail::advisory_payload(adv));
                out.advisories.push_back({t, adv});
            }
        }

        // 7. beam sweeps: periodic policy or a pending knowledge window
        for (auto &[id, link] : ran.links) {
            if (swept.count(id)) continue;
            const bool periodic = link.policy == SweepPolicy::Periodic && k % sweep_every == 0;
            if (!periodic && !link.window_sweep_pending) continue;
            const auto candidates = link.window_sweep_pending ? sweep_candidates(link, cb) : std::vector<std::size_t>{};
            link.window_sweep_pending = false;
            do_sweep(id, candidates);
        }

        // 8. pilots and 9. link metrics
        for (auto &[id, link] : ran.links) {
            if (link.pilot_suppressed_frames > 0) --link.pilot_suppressed_frames;
            else m.pilot_overhead_total += config.ran.pilot_cost;

            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t b = 0; b < cb.size(); ++b)
                best = std::max(best, beam_rssi_dbm(cir_true[id], cb, b, antenna, config.antenna.tx_power_dbm,
                                                    config.antenna.noise_floor_dbm));
            const double active = beam_rssi_dbm(cir_true[id], cb, link.active_beam, antenna,
                                                config.antenna.tx_power_dbm, config.antenna.noise_floor_dbm);
            ++link_steps;
            if (active < best - 3.0) ++misselected;
            rssi_sum += active;
            oracle_sum += best;
            step.active_beams[id] = link.active_beam;
            if (knowledge) {
                const KaMode md = modes.count(id) ? modes[id] : KaMode::Fallback;
                step.modes[id] = md;
                ++occupancy[md];
                ++mode_samples;
            }

            const bool blocked = !cir_true[id].has_los();
            auto &open = loss_open[id];
            if (blocked && !open) open = t;
            if (!blocked && open) {
                out.losses.push_back({id, *open, t});
                open.reset();
            }
        }
        for (auto &[id, open] : loss_open) {
            if (open && !ran.links.count(id)) {
                out.losses.push_back({id, *open, t});
                open.reset();
            }
        }
        out.steps.push_back(std::move(step));
    }
    const double t_end = static_cast<double>(n_steps) * dt;
    for (auto &[id, open] : loss_open)
        if (open) out.losses.push_back({id, *open, t_end});
    std::stable_sort(out.losses.begin(), out.losses.end(),
                     [](const LossInterval &a, const LossInterval &b) { return a.start < b.start; });

    // link metrics
    m.misselection_valid = link_steps > 0;
    m.beam_misselection_rate = link_steps ? static_cast<double>(misselected) / static_cast<double>(link_steps) : 0.0;
    m.rssi_valid = link_steps > 0;
    m.mean_rssi_dbm = link_steps ? rssi_sum / static_cast<double>(link_steps) : 0.0;
    m.oracle_mean_rssi_dbm = link_steps ? oracle_sum / static_cast<double>(link_steps) : 0.0;

    m.nmse_valid = !out.nmse_samples.empty();
    if (m.nmse_valid) {
        double s = 0.0;
        for (double e : out.nmse_samples) s += e;
        m.channel_nmse = s / static_cast<double>(out.nmse_samples.size());
    }
    m.channel_nmse_envelope = nmse_env_count ? nmse_env_sum / static_cast<double>(nmse_env_count) : 0.0;

    // blockage lead times: the earliest announcement overlapping each loss
    const double slack = knowledge ? config.ka.prediction_dt : 0.0;
    auto overlaps = [&](const BlockageEvent &ev, const LossInterval &l) {
        return ev.ue_id == l.ue_id && ev.start <= l.end + slack + kTimeEps && l.start <= ev.end + slack + kTimeEps;
    };
    m.advisories = out.advisories.size();
    m.los_loss_intervals = out.losses.size();
    double lead_sum = 0.0;
    std::size_t leads = 0;
    for (const auto &l : out.losses) {
        std::optional<double> first;
        for (const auto &a : out.advisories)
            if (a.announced <= l.start + kTimeEps && overlaps(a.event, l) && (!first || a.announced < *first))
                first = a.announced;
        if (!first) {
            ++m.unannounced_losses;
            continue;
        }
        const double lead = l.start - *first;
        lead_sum += lead;
        m.blockage_min_lead_time_s = leads ? std::min(m.blockage_min_lead_time_s, lead) : lead;
        ++leads;
    }
    m.lead_valid = leads > 0;
    m.blockage_lead_time_s = leads ? lead_sum / static_cast<double>(leads) : 0.0;
    for (const auto &a : out.advisories)
        if (std::none_of(out.losses.begin(), out.losses.end(), [&](const LossInterval &l) { return overlaps(a.event, l); }))
            ++m.false_advisories;

    m.mode_valid = mode_samples > 0;
    if (mode_samples) {
        const auto n = static_cast<double>(mode_samples);
        m.mode_knowledge = static_cast<double>(occupancy[KaMode::Knowledge]) / n;
        m.mode_window = static_cast<double>(occupancy[KaMode::Window]) / n;
        m.mode_fallback = static_cast<double>(occupancy[KaMode::Fallback]) / n;
    }

    if (ka) {
        out.map = ka->map();
        out.audit = ka->audit();
    }
    return out;
}

inline std::string run_dir_name(const ScenarioConfig &config)
{
    return config.name + "_seed" + std::to_string(config.seed) + "_" + to_string(config.mode);
}

/// Writes metrics.csv, trace.log and map.db below `root`; returns the run directory.
inline std::filesystem::path write_run_dir(const RunResult &result, const ScenarioConfig &config,
                                           const std::filesystem::path &root)
{
    const auto dir = root / run_dir_name(config);
    std::filesystem::create_directories(dir);
    auto write = [&](const char *name, const std::string &text) {
        std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
        os << text;
    };
    write("metrics.csv", metrics_csv(result.metrics));
    write("trace.log", result.trace.text());
    std::ostringstream map;
    result.map.save(map);
    write("map.db", map.str());
    return dir;
}

} // namespace kran

#endif // KRAN_ENGINE_HPP
