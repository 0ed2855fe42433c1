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

// Scenario files: JSON documents described by scenarios/scenario.schema.json.
// Unknown keys are rejected; every error names the JSON pointer and line.

#ifndef KRAN_SCENARIO_HPP
#define KRAN_SCENARIO_HPP

#include "kran/json_lines.hpp"
#include "kran/ka.hpp"
#include "kran/ran.hpp"
#include "kran/scene.hpp"
#include "kran/sensors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kran {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RunMode { Baseline, Knowledge };

inline const char *to_string(RunMode m) { return m == RunMode::Baseline ? "baseline" : "knowledge"; }

struct HealthChange {
    double time = 0.0;
    Health state = Health::Ok;
};

struct SensorConfig {
    SensorMeta meta;
    NoiseModel noise;
    double rate_hz = 100.0;
    std::vector<HealthChange> health_schedule; // ascending time

    Health health_at(double t) const
    {
        Health h = Health::Ok;
        for (const auto &c : health_schedule)
            if (c.time <= t + kTimeEps) h = c.state;
        return h;
    }

    // Whether a reading is due at step k of a dt-spaced clock.
    bool emits_at(std::int64_t k, double dt) const
    {
        if (k == 0) return true;
        const auto ticks = [&](std::int64_t s) { return std::floor(static_cast<double>(s) * dt * rate_hz + 1e-9); };
        return ticks(k) > ticks(k - 1);
    }
};

struct EntityConfig {
    std::string id;
    EntityClass cls = EntityClass::Ue;
    RoutePlan route;
    Vec3 extents = Vec3::Zero();
    double reflectivity = 0.0;
    bool uwb_tag = true;
    double join_time = 0.0; // UEs only
};

struct AttackRequest {
    double time = 0.0;
    Vec3 claim = Vec3::Zero();
};

struct AttackBurst {
    double start = 0.0;
    double period = 0.01;
    std::size_t count = 0;
    Vec3 region_min = Vec3::Zero();
    Vec3 region_max = Vec3::Zero();
};

struct AttackerConfig {
    std::string id;
    std::vector<AttackRequest> requests;
    std::optional<AttackBurst> burst; // positions drawn from the run seed
};

struct AntennaConfig {
    Pose pose;
    double tx_power_dbm = 30.0;
    double noise_floor_dbm = -90.0;
};

struct RanConfig {
    double sweep_period = 0.02; // s
    MeasurementNoise noise;
    double model_mismatch_db = 0.0; // extra loss applied to the ground-truth channel only
    double pilot_cost = 1.0;        // overhead units per frame with pilots
    int max_consecutive_rejects = 3;
};

struct ScenarioConfig {
    std::string name = "scenario";
    SceneModel scene;
    AntennaConfig antenna;
    BeamCodebook codebook = BeamCodebook::uniform(32, 16);
    RanConfig ran;
    KaConfig ka;
    std::vector<SensorConfig> sensors;
    std::vector<EntityConfig> entities;
    std::vector<AttackerConfig> attackers;
    double duration = 10.0; // s
    double dt = 0.01;       // s
    std::uint64_t seed = 0;
    RunMode mode = RunMode::Knowledge;
    std::optional<std::filesystem::path> warm_start_map;

    std::int64_t steps() const { return static_cast<std::int64_t>(std::llround(duration / dt)); }
    std::int64_t sweep_every() const { return static_cast<std::int64_t>(std::llround(ran.sweep_period / dt)); }

    void validate() const
    {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("dt must be positive");
        if (!(duration >= dt)) throw InvalidInput("duration must be at least dt");
        scene.validate();
        antenna.pose.validate();
        codebook.validate();
        ka.validate();
        if (!(ran.sweep_period >= dt)) throw InvalidInput("sweep period must be at least dt");
        if (std::abs(ran.sweep_period / dt - static_cast<double>(sweep_every())) > 1e-6)
            throw InvalidInput("sweep period must be a multiple of dt");
        std::set<std::string> ids;
        for (const auto &s : sensors) {
            if (!ids.insert(s.meta.sensor_id).second) throw InvalidInput("duplicate sensor id '" + s.meta.sensor_id + "'");
            s.noise.validate();
            s.meta.mounting_pose.validate();
            if (!(s.rate_hz > 0.0)) throw InvalidInput("sensor '" + s.meta.sensor_id + "' rate must be positive");
        }
        ids.clear();
        for (const auto &e : entities) {
            if (!ids.insert(e.id).second) throw InvalidInput("duplicate entity id '" + e.id + "'");
            if (e.route.waypoints.empty()) throw InvalidInput("entity '" + e.id + "' has an empty route");
            e.route.validate();
            for (const auto &w : e.route.waypoints)
                if (!geofence_contains(scene, w.position))
                    throw InvalidInput("entity '" + e.id + "' has a route waypoint outside the geofence");
        }
    }
};

namespace detail {

using nlohmann::json;

class ScenarioReader {
public:
    ScenarioReader(const std::string &text, std::string source) : source_(std::move(source)), lines_(text)
    {
        try {
            root_ = json::parse(text);
        } catch (const json::parse_error &e) {
            throw ScenarioError(source_ + ": parse error: " + e.what());
        }
    }

    ScenarioConfig read()
    {
        const json &r = root_;
        keys(r, "", {"name", "mode", "seed", "duration_s", "dt_s", "scene", "antenna", "codebook", "ran", "ka",
                     "sensors", "entities", "attackers", "warm_start_map"});
        ScenarioConfig c;
        c.name = str(r, "", "name");
        for (char ch : c.name)
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-')
                fail("/name", "name may contain only letters, digits, '_' and '-'");
        if (r.contains("mode")) {
            const std::string m = str(r, "", "mode");
            if (m == "baseline") c.mode = RunMode::Baseline;
            else if (m == "knowledge") c.mode = RunMode::Knowledge;
            else fail("/mode", "expected 'baseline' or 'knowledge'");
        }
        if (r.contains("seed")) {
            if (!r["seed"].is_number_unsigned()) fail("/seed", "expected a non-negative integer");
            c.seed = r["seed"].get<std::uint64_t>();
        }
        c.duration = number(r, "", "duration_s");
        c.dt = number(r, "", "dt_s", 0.01);
        if (!(c.dt > 0.0)) fail("/dt_s", "dt must be positive");
        if (!(c.duration >= c.dt)) fail("/duration_s", "duration must be at least dt");
        read_scene(obj(r, "", "scene"), "/scene", c);
        read_antenna(obj(r, "", "antenna"), "/antenna", c);
        if (r.contains("codebook")) read_codebook(r["codebook"], "/codebook", c);
        if (r.contains("ran")) read_ran(r["ran"], "/ran", c);
        if (r.contains("ka")) read_ka(r["ka"], "/ka", c);
        if (r.contains("sensors")) {
            const json &arr = array(r, "", "sensors");
            for (std::size_t i = 0; i < arr.size(); ++i) c.sensors.push_back(read_sensor(arr[i], "/sensors/" + std::to_string(i)));
        }
        const json &ents = array(r, "", "entities");
        for (std::size_t i = 0; i < ents.size(); ++i)
            c.entities.push_back(read_entity(ents[i], "/entities/" + std::to_string(i), c.scene));
        if (r.contains("attackers")) {
            const json &arr = array(r, "", "attackers");
            for (std::size_t i = 0; i < arr.size(); ++i)
                c.attackers.push_back(read_attacker(arr[i], "/attackers/" + std::to_string(i)));
        }
        if (r.contains("warm_start_map")) c.warm_start_map = str(r, "", "warm_start_map");
        check_unique(c);
        try {
            c.validate();
        } catch (const InvalidInput &e) {
            throw ScenarioError(source_ + ":1: " + e.what());
        }
        return c;
    }

private:
    [[noreturn]] void fail(const std::string &ptr, const std::string &msg) const
    {
        throw ScenarioError(source_ + ":" + std::to_string(lines_.line_of(ptr)) + ": " + (ptr.empty() ? "/" : ptr) +
                            ": " + msg);
    }

    void keys(const json &j, const std::string &ptr, std::initializer_list<const char *> allowed) const
    {
        if (!j.is_object()) fail(ptr, "expected an object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char *k) { return it.key() == k; }))
                fail(ptr + "/" + it.key(), "unknown key '" + it.key() + "'");
        }
    }

    const json &member(const json &j, const std::string &ptr, const char *key) const
    {
        if (!j.contains(key)) fail(ptr, std::string("missing required key '") + key + "'");
        return j.at(key);
    }

    double number(const json &j, const std::string &ptr, const char *key, std::optional<double> def = std::nullopt) const
    {
        if (!j.contains(key)) {
            if (def) return *def;
            fail(ptr, std::string("missing required key '") + key + "'");
        }
        const json &v = j.at(key);
        if (!v.is_number()) fail(ptr + "/" + key, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(ptr + "/" + key, "expected a finite number");
        return d;
    }

    std::string str(const json &j, const std::string &ptr, const char *key) const
    {
        const json &v = member(j, ptr, key);
        if (!v.is_string()) fail(ptr + "/" + key, "expected a string");
        return v.get<std::string>();
    }

    const json &obj(const json &j, const std::string &ptr, const char *key) const
    {
        const json &v = member(j, ptr, key);
        if (!v.is_object()) fail(ptr + "/" + key, "expected an object");
        return v;
    }

    const json &array(const json &j, const std::string &ptr, const char *key) const
    {
        const json &v = member(j, ptr, key);
        if (!v.is_array()) fail(ptr + "/" + key, "expected an array");
        return v;
    }

    Vec3 vec3(const json &j, const std::string &ptr, const char *key) const
    {
        const json &v = member(j, ptr, key);
        const std::string p = ptr + "/" + key;
        if (!v.is_array() || v.size() != 3) fail(p, "expected [x, y, z]");
        Vec3 out;
        for (int k = 0; k < 3; ++k) {
            if (!v[k].is_number()) fail(p + "/" + std::to_string(k), "expected a number");
            out[k] = v[k].get<double>();
        }
        return out;
    }

    double angle(const json &j, const std::string &ptr, const char *key) const
    {
        const double deg = number(j, ptr, key, 0.0);
        if (deg < -180.0 || deg > 180.0) fail(ptr + "/" + key, "angle must lie in [-180, 180] degrees");
        return deg_to_rad(deg);
    }

    double positive(const json &j, const std::string &ptr, const char *key, double def) const
    {
        const double v = number(j, ptr, key, def);
        if (!(v > 0.0)) fail(ptr + "/" + key, "must be positive");
        return v;
    }

    void read_scene(const json &j, const std::string &ptr, ScenarioConfig &c) const
    {
        keys(j, ptr, {"carrier_frequency_hz", "geofence", "obstacles"});
        c.scene.carrier_frequency = positive(j, ptr, "carrier_frequency_hz", 140e9);
        const json &fence = array(j, ptr, "geofence");
        for (std::size_t i = 0; i < fence.size(); ++i) {
            const std::string p = ptr + "/geofence/" + std::to_string(i);
            if (!fence[i].is_array() || fence[i].size() != 2 || !fence[i][0].is_number() || !fence[i][1].is_number())
                fail(p, "expected [x, y]");
            c.scene.geofence.push_back({fence[i][0].get<double>(), fence[i][1].get<double>()});
        }
        try {
            SceneModel probe;
            probe.geofence = c.scene.geofence;
            probe.validate();
        } catch (const InvalidInput &e) {
            fail(ptr + "/geofence", e.what());
        }
        if (j.contains("obstacles")) {
            const json &obs = array(j, ptr, "obstacles");
            for (std::size_t i = 0; i < obs.size(); ++i) {
                const std::string p = ptr + "/obstacles/" + std::to_string(i);
                keys(obs[i], p, {"label", "min", "max", "reflectivity"});
                Aabb box;
                box.label = obs[i].contains("label") ? str(obs[i], p, "label") : "box-" + std::to_string(i);
                box.min = vec3(obs[i], p, "min");
                box.max = vec3(obs[i], p, "max");
                box.reflectivity = number(obs[i], p, "reflectivity", 0.3);
                try {
                    box.validate();
                } catch (const InvalidInput &e) {
                    fail(p, e.what());
                }
                c.scene.obstacles.push_back(std::move(box));
            }
        }
    }

    void read_antenna(const json &j, const std::string &ptr, ScenarioConfig &c) const
    {
        keys(j, ptr, {"position", "yaw_deg", "pitch_deg", "roll_deg", "tx_power_dbm", "noise_floor_dbm"});
        c.antenna.pose.position = vec3(j, ptr, "position");
        c.antenna.pose.yaw = angle(j, ptr, "yaw_deg");
        c.antenna.pose.pitch = angle(j, ptr, "pitch_deg");
        c.antenna.pose.roll = angle(j, ptr, "roll_deg");
        c.antenna.tx_power_dbm = number(j, ptr, "tx_power_dbm", 30.0);
        c.antenna.noise_floor_dbm = number(j, ptr, "noise_floor_dbm", -90.0);
    }

    void read_codebook(const json &j, const std::string &ptr, ScenarioConfig &c) const
    {
        keys(j, ptr, {"beams", "elements", "spacing_wavelengths", "span_deg"});
        const double beams = number(j, ptr, "beams", 32);
        const double elements = number(j, ptr, "elements", 16);
        if (beams < 2 || beams != std::floor(beams)) fail(ptr + "/beams", "must be an integer >= 2");
        if (elements < 2 || elements != std::floor(elements)) fail(ptr + "/elements", "must be an integer >= 2");
        double lo = -60.0, hi = 60.0;
        if (j.contains("span_deg")) {
            const json &s = j["span_deg"];
            if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
                fail(ptr + "/span_deg", "expected [low, high]");
            lo = s[0].get<double>();
            hi = s[1].get<double>();
            if (!(lo < hi) || lo < -90.0 || hi > 90.0) fail(ptr + "/span_deg", "span must satisfy -90 <= low < high <= 90");
        }
        c.codebook = BeamCodebook::uniform(static_cast<std::size_t>(beams), static_cast<std::size_t>(elements),
                                           deg_to_rad(lo), deg_to_rad(hi),
                                           positive(j, ptr, "spacing_wavelengths", 0.5));
    }

    void read_ran(const json &j, const std::string &ptr, ScenarioConfig &c) const
    {
        keys(j, ptr, {"sweep_period_s", "rssi_noise_db", "aoa_noise_deg", "model_mismatch_db", "pilot_cost",
                      "max_consecutive_rejects"});
        c.ran.sweep_period = positive(j, ptr, "sweep_period_s", 0.02);
        const double sweep_steps = c.ran.sweep_period / c.dt;
        if (sweep_steps < 1.0 - 1e-9 || std::abs(sweep_steps - std::round(sweep_steps)) > 1e-6)
            fail(ptr + "/sweep_period_s", "must be a positive multiple of dt_s");
        c.ran.noise.rssi_sigma_db = number(j, ptr, "rssi_noise_db", 1.0);
        c.ran.noise.aoa_sigma_rad = deg_to_rad(number(j, ptr, "aoa_noise_deg", 2.0));
        if (c.ran.noise.rssi_sigma_db < 0.0) fail(ptr + "/rssi_noise_db", "must be non-negative");
        if (c.ran.noise.aoa_sigma_rad < 0.0) fail(ptr + "/aoa_noise_deg", "must be non-negative");
        c.ran.model_mismatch_db = number(j, ptr, "model_mismatch_db", 0.0);
        c.ran.pilot_cost = number(j, ptr, "pilot_cost", 1.0);
        c.ran.max_consecutive_rejects = static_cast<int>(positive(j, ptr, "max_consecutive_rejects", 3));
    }

    void read_ka(const json &j, const std::string &ptr, ScenarioConfig &c) const
    {
        keys(j, ptr, {"auth_gate", "move_threshold_m", "env_change_threshold_m", "window_k", "staleness_s",
                      "witness_gate_m", "association_gate_m", "knowledge_sigma_m", "corridor_radius_m", "cell_size_m",
                      "prediction_horizon_s", "prediction_dt_s", "prediction_interval_s", "reverify_period_s",
                      "aoa_gate_deg"});
        KaConfig &k = c.ka;
        k.auth_gate = positive(j, ptr, "auth_gate", k.auth_gate);
        k.move_threshold = positive(j, ptr, "move_threshold_m", k.move_threshold);
        k.env_change_threshold = positive(j, ptr, "env_change_threshold_m", k.env_change_threshold);
        k.window_k = positive(j, ptr, "window_k", k.window_k);
        k.staleness = positive(j, ptr, "staleness_s", k.staleness);
        k.witness_gate = positive(j, ptr, "witness_gate_m", k.witness_gate);
        k.association_gate = positive(j, ptr, "association_gate_m", k.association_gate);
        k.knowledge_sigma = positive(j, ptr, "knowledge_sigma_m", k.knowledge_sigma);
        k.corridor_radius = positive(j, ptr, "corridor_radius_m", k.corridor_radius);
        k.cell_size = positive(j, ptr, "cell_size_m", k.cell_size);
        k.prediction_horizon = positive(j, ptr, "prediction_horizon_s", k.prediction_horizon);
        k.prediction_dt = positive(j, ptr, "prediction_dt_s", k.prediction_dt);
        k.prediction_interval = positive(j, ptr, "prediction_interval_s", k.prediction_interval);
        k.reverify_period = positive(j, ptr, "reverify_period_s", k.reverify_period);
        k.aoa_gate = deg_to_rad(positive(j, ptr, "aoa_gate_deg", rad_to_deg(k.aoa_gate)));
        if (k.prediction_horizon < k.prediction_dt) fail(ptr + "/prediction_horizon_s", "must be >= prediction_dt_s");
    }

    Health health_state(const json &j, const std::string &ptr) const
    {
        const std::string s = str(j, ptr, "state");
        if (s == "ok") return Health::Ok;
        if (s == "degraded") return Health::Degraded;
        if (s == "down") return Health::Down;
        fail(ptr + "/state", "expected 'ok', 'degraded' or 'down'");
    }

    SensorConfig read_sensor(const json &j, const std::string &ptr) const
    {
        keys(j, ptr, {"id", "kind", "position", "yaw_deg", "pitch_deg", "roll_deg", "sigma_m", "detection_probability",
                      "rate_hz", "fov_deg", "max_range_m", "health"});
        SensorConfig s;
        s.meta.sensor_id = str(j, ptr, "id");
        const std::string kind = str(j, ptr, "kind");
        if (kind == "uwb") s.meta.kind = SensorKind::Uwb;
        else if (kind == "vision") s.meta.kind = SensorKind::Vision;
        else fail(ptr + "/kind", "expected 'uwb' or 'vision'");
        s.meta.mounting_pose.position = j.contains("position") ? vec3(j, ptr, "position") : Vec3::Zero();
        s.meta.mounting_pose.yaw = angle(j, ptr, "yaw_deg");
        s.meta.mounting_pose.pitch = angle(j, ptr, "pitch_deg");
        s.meta.mounting_pose.roll = angle(j, ptr, "roll_deg");
        s.noise.sigma = number(j, ptr, "sigma_m", 0.10);
        if (s.noise.sigma < 0.0) fail(ptr + "/sigma_m", "must be non-negative");
        s.noise.detection_probability = number(j, ptr, "detection_probability", 0.98);
        if (s.noise.detection_probability < 0.0 || s.noise.detection_probability > 1.0)
            fail(ptr + "/detection_probability", "must lie in [0, 1]");
        s.rate_hz = positive(j, ptr, "rate_hz", s.meta.kind == SensorKind::Uwb ? 100.0 : 30.0);
        s.meta.fov = deg_to_rad(positive(j, ptr, "fov_deg", 90.0));
        s.meta.max_range = number(j, ptr, "max_range_m", 0.0);
        if (s.meta.max_range < 0.0) fail(ptr + "/max_range_m", "must be non-negative");
        if (j.contains("health")) {
            const json &h = array(j, ptr, "health");
            for (std::size_t i = 0; i < h.size(); ++i) {
                const std::string p = ptr + "/health/" + std::to_string(i);
                keys(h[i], p, {"t_s", "state"});
                HealthChange hc{number(h[i], p, "t_s"), health_state(h[i], p)};
                if (!s.health_schedule.empty() && !(hc.time > s.health_schedule.back().time))
                    fail(p + "/t_s", "health changes must be in increasing time order");
                s.health_schedule.push_back(hc);
            }
        }
        return s;
    }

    EntityConfig read_entity(const json &j, const std::string &ptr, const SceneModel &scene) const
    {
        keys(j, ptr, {"id", "class", "route", "extents_m", "reflectivity", "uwb_tag", "join_s"});
        EntityConfig e;
        e.id = str(j, ptr, "id");
        const std::string cls = str(j, ptr, "class");
        if (cls == "ue") e.cls = EntityClass::Ue;
        else if (cls == "agv") e.cls = EntityClass::Agv;
        else if (cls == "passive") e.cls = EntityClass::Passive;
        else fail(ptr + "/class", "expected 'ue', 'agv' or 'passive'");
        const json &route = array(j, ptr, "route");
        if (route.empty()) fail(ptr + "/route", "route needs at least one waypoint");
        for (std::size_t i = 0; i < route.size(); ++i) {
            const std::string p = ptr + "/route/" + std::to_string(i);
            keys(route[i], p, {"t_s", "position"});
            Waypoint w{number(route[i], p, "t_s"), vec3(route[i], p, "position")};
            if (!e.route.waypoints.empty() && !(w.time > e.route.waypoints.back().time))
                fail(p + "/t_s", "waypoint times must be strictly increasing");
            if (!geofence_contains(scene, w.position)) fail(p + "/position", "waypoint " + std::to_string(i) + " of '" + e.id + "' lies outside the geofence");
            e.route.waypoints.push_back(w);
        }
        if (j.contains("extents_m")) {
            e.extents = vec3(j, ptr, "extents_m");
            if ((e.extents.array() < 0.0).any()) fail(ptr + "/extents_m", "extents must be non-negative");
        }
        e.reflectivity = number(j, ptr, "reflectivity", 0.0);
        if (e.reflectivity < 0.0 || e.reflectivity > 1.0) fail(ptr + "/reflectivity", "must lie in [0, 1]");
        if (j.contains("uwb_tag")) {
            if (!j["uwb_tag"].is_boolean()) fail(ptr + "/uwb_tag", "expected true or false");
            e.uwb_tag = j["uwb_tag"].get<bool>();
        }
        e.join_time = number(j, ptr, "join_s", 0.0);
        return e;
    }

    AttackerConfig read_attacker(const json &j, const std::string &ptr) const
    {
        keys(j, ptr, {"id", "requests", "burst"});
        AttackerConfig a;
        a.id = str(j, ptr, "id");
        if (j.contains("requests")) {
            const json &reqs = array(j, ptr, "requests");
            for (std::size_t i = 0; i < reqs.size(); ++i) {
                const std::string p = ptr + "/requests/" + std::to_string(i);
                keys(reqs[i], p, {"t_s", "claim"});
                a.requests.push_back({number(reqs[i], p, "t_s"), vec3(reqs[i], p, "claim")});
            }
        }
        if (j.contains("burst")) {
            const std::string p = ptr + "/burst";
            const json &b = obj(j, ptr, "burst");
            keys(b, p, {"start_s", "period_s", "count", "region_min", "region_max"});
            AttackBurst burst;
            burst.start = number(b, p, "start_s", 0.0);
            burst.period = positive(b, p, "period_s", 0.01);
            const double count = number(b, p, "count");
            if (count < 0 || count != std::floor(count)) fail(p + "/count", "must be a non-negative integer");
            burst.count = static_cast<std::size_t>(count);
            burst.region_min = vec3(b, p, "region_min");
            burst.region_max = vec3(b, p, "region_max");
            if ((burst.region_min.array() > burst.region_max.array()).any()) fail(p, "region_min must not exceed region_max");
            a.burst = burst;
        }
        return a;
    }

    void check_unique(const ScenarioConfig &c) const
    {
        std::set<std::string> ids;
        for (std::size_t i = 0; i < c.sensors.size(); ++i)
            if (!ids.insert(c.sensors[i].meta.sensor_id).second)
                fail("/sensors/" + std::to_string(i) + "/id", "duplicate sensor id '" + c.sensors[i].meta.sensor_id + "'");
        ids.clear();
        for (std::size_t i = 0; i < c.entities.size(); ++i)
            if (!ids.insert(c.entities[i].id).second)
                fail("/entities/" + std::to_string(i) + "/id", "duplicate entity id '" + c.entities[i].id + "'");
    }

    std::string source_;
    JsonLineIndex lines_;
    json root_;
};

} // namespace detail

inline ScenarioConfig parse_scenario(const std::string &text, const std::string &source = "<scenario>")
{
    return detail::ScenarioReader(text, source).read();
}

/// Loads and validates a scenario file. A relative warm-start map path is
/// resolved against the scenario's directory.
inline ScenarioConfig load_scenario(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) throw ScenarioError(path.string() + ": cannot open scenario file");
    std::stringstream ss;
    ss << in.rdbuf();
    ScenarioConfig c = parse_scenario(ss.str(), path.string());
    if (c.warm_start_map && c.warm_start_map->is_relative()) c.warm_start_map = path.parent_path() / *c.warm_start_map;
    return c;
}

} // namespace kran

#endif // KRAN_SCENARIO_HPP
