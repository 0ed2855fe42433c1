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

#ifndef KRAN_SENSORS_HPP
#define KRAN_SENSORS_HPP

#include "kran/scene.hpp"

#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace kran {

enum class SensorKind { Uwb, Vision };
enum class Health { Ok, Degraded, Down };

inline const char *to_string(SensorKind k) { return k == SensorKind::Uwb ? "UWB" : "VISION"; }

inline const char *to_string(Health h)
{
    switch (h) {
    case Health::Ok: return "OK";
    case Health::Degraded: return "DEGRADED";
    case Health::Down: return "DOWN";
    }
    return "?";
}

struct SensorMeta {
    std::string sensor_id;
    SensorKind kind = SensorKind::Uwb;
    Pose mounting_pose;
    double fov = deg_to_rad(90.0); // full azimuth cone, vision only
    double max_range = 0.0;        // m; 0 means unlimited
};

struct PositionMeasurement {
    std::string entity_id;
    Vec3 position = Vec3::Zero(); // sensor frame
    Mat3 covariance = Mat3::Zero(); // m^2
};

struct Detection {
    std::optional<std::string> entity_id; // empty when identity is unknown
    Vec3 center = Vec3::Zero();           // sensor frame
    Vec3 extents = Vec3::Zero();
};

struct DetectionSet {
    std::vector<Detection> detections;
    Mat3 covariance = Mat3::Zero(); // per-detection center covariance, sensor frame
};

using SensPayload = std::variant<std::monostate, PositionMeasurement, DetectionSet>;

struct SensState {
    SensorMeta meta;
    double timestamp = 0.0;
    SensPayload payload;
    Health health = Health::Ok;
};

struct NoiseModel {
    double sigma = 0.10;                 // m per axis
    double detection_probability = 0.98; // vision only

    void validate() const
    {
        if (!(sigma >= 0.0)) throw InvalidInput("noise sigma must be non-negative");
        if (!(detection_probability >= 0.0 && detection_probability <= 1.0))
            throw InvalidInput("detection probability must lie in [0, 1]");
    }
};

// Ground truth handed to the sensor models.
struct EntityTruth {
    std::string id;
    Vec3 position = Vec3::Zero();
    Vec3 extents = Vec3::Zero(); // zero for point-like UEs
    bool uwb_tag = true;
};

inline bool is_symmetric_psd(const Mat3 &m, double tol = 1e-12)
{
    if (!m.allFinite()) return false;
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
    Eigen::SelfAdjointEigenSolver<Mat3> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

inline bool in_range(const SensorMeta &meta, const Vec3 &world)
{
    return meta.max_range <= 0.0 || (world - meta.mounting_pose.position).norm() <= meta.max_range;
}

/// Tag-based UWB fix of one entity, expressed in the sensor frame. Returns
/// nullopt when the sensor is down or the tag is out of range.
template <class Rng>
std::optional<SensState> uwb_measure(const std::string &entity_id, const Vec3 &true_position, const SensorMeta &meta,
                                     const NoiseModel &noise, Health health, double timestamp, Rng &rng)
{
    if (meta.kind != SensorKind::Uwb) throw InvalidInput("uwb_measure: sensor '" + meta.sensor_id + "' is not UWB");
    if (health == Health::Down || !in_range(meta, true_position)) return std::nullopt;
    const double sigma = health == Health::Degraded ? 2.0 * noise.sigma : noise.sigma;
    PositionMeasurement m;
    m.entity_id = entity_id;
    m.position = meta.mounting_pose.to_local(true_position);
    if (sigma > 0.0) {
        std::normal_distribution<double> n(0.0, sigma);
        for (int k = 0; k < 3; ++k) m.position[k] += n(rng);
    }
    m.covariance = sigma * sigma * Mat3::Identity();
    return SensState{meta, timestamp, std::move(m), health};
}

/// Camera-style detection of entities inside the azimuth field of view with a
/// clear line of sight, each surviving a Bernoulli(detection_probability) draw.
/// Identities are not reported. Other entities' boxes occlude.
template <class Rng>
SensState vision_detect(const SceneModel &scene, const std::vector<EntityTruth> &entities, const SensorMeta &meta,
                        const NoiseModel &noise, Health health, double timestamp, Rng &rng)
{
    if (meta.kind != SensorKind::Vision)
        throw InvalidInput("vision_detect: sensor '" + meta.sensor_id + "' is not a camera");
    SensState out{meta, timestamp, std::monostate{}, health};
    if (health == Health::Down) return out;
    const double sigma = health == Health::Degraded ? 2.0 * noise.sigma : noise.sigma;
    const Vec3 cam = meta.mounting_pose.position;
    const Mat3 rot_t = meta.mounting_pose.rotation().transpose();
    DetectionSet set;
    set.covariance = sigma * sigma * Mat3::Identity();
    std::bernoulli_distribution hit(noise.detection_probability);
    std::normal_distribution<double> jitter(0.0, sigma > 0.0 ? sigma : 1.0);
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const EntityTruth &e = entities[i];
        if (e.position == cam || !in_range(meta, e.position)) continue;
        const Vec3 local = meta.mounting_pose.to_local(e.position);
        if (std::abs(azimuth(local)) > meta.fov / 2.0) continue;
        SceneModel occluders = scene;
        for (std::size_t j = 0; j < entities.size(); ++j)
            if (j != i && entities[j].extents.squaredNorm() > 0.0)
                occluders.obstacles.push_back(Aabb::centered(entities[j].position, entities[j].extents, 0.0, entities[j].id));
        if (!los_clear(occluders, cam, e.position)) continue;
        if (!hit(rng)) continue;
        Detection d;
        d.center = local;
        if (sigma > 0.0)
            for (int k = 0; k < 3; ++k) d.center[k] += sigma * jitter(rng);
        d.extents = (rot_t.cwiseAbs() * e.extents).eval();
        set.detections.push_back(std::move(d));
    }
    out.payload = std::move(set);
    return out;
}

// A measurement after translation into the common (world) frame.
struct WorldMeasurement {
    std::string sensor_id;
    SensorKind kind = SensorKind::Uwb;
    std::optional<std::string> entity_id;
    Vec3 position = Vec3::Zero();
    Mat3 covariance = Mat3::Zero();
    Vec3 extents = Vec3::Zero();
};

/// Rigid transform of every payload position into the world frame; covariance
/// rotates as R * S * R^T.
inline std::vector<WorldMeasurement> to_common_frame(const SensState &state)
{
    std::vector<WorldMeasurement> out;
    const Pose &pose = state.meta.mounting_pose;
    const Mat3 r = pose.rotation();
    if (const auto *pm = std::get_if<PositionMeasurement>(&state.payload)) {
        WorldMeasurement w;
        w.sensor_id = state.meta.sensor_id;
        w.kind = state.meta.kind;
        w.entity_id = pm->entity_id;
        w.position = pose.to_world(pm->position);
        w.covariance = r * pm->covariance * r.transpose();
        out.push_back(std::move(w));
    } else if (const auto *ds = std::get_if<DetectionSet>(&state.payload)) {
        const Mat3 cov = r * ds->covariance * r.transpose();
        for (const auto &d : ds->detections) {
            WorldMeasurement w;
            w.sensor_id = state.meta.sensor_id;
            w.kind = state.meta.kind;
            w.entity_id = d.entity_id;
            w.position = pose.to_world(d.center);
            w.covariance = cov;
            w.extents = r.cwiseAbs() * d.extents;
            out.push_back(std::move(w));
        }
    }
    return out;
}

inline std::string to_canonical(const SensState &s)
{
    std::string out = "sensor=" + s.meta.sensor_id + " kind=" + to_string(s.meta.kind) + " health=" + to_string(s.health);
    auto vec = [](const Vec3 &v) {
        return format_number(v.x()) + ',' + format_number(v.y()) + ',' + format_number(v.z());
    };
    if (const auto *pm = std::get_if<PositionMeasurement>(&s.payload)) {
        out += " entity=" + pm->entity_id + " pos=" + vec(pm->position) + " var=" + format_number(pm->covariance(0, 0));
    } else if (const auto *ds = std::get_if<DetectionSet>(&s.payload)) {
        out += " detections=" + std::to_string(ds->detections.size());
        for (const auto &d : ds->detections) out += " [" + d.entity_id.value_or("?") + ' ' + vec(d.center) + ']';
    }
    return out;
}

} // namespace kran

#endif // KRAN_SENSORS_HPP
