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

// Deterministic geometric ray tracer: line of sight plus first-order specular
// reflections off axis-aligned boxes (image method), channel impulse response
// assembly, and route-driven blockage prediction.

#ifndef KRAN_RAYTRACE_HPP
#define KRAN_RAYTRACE_HPP

#include "kran/scene.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <vector>

namespace kran {

enum class PathKind { Los, Reflected };

// Path identity: 0 for the direct path, 1 + 6*obstacle + face for a reflection.
inline constexpr int kLosPathId = 0;
inline int reflection_path_id(std::size_t obstacle, int face) { return 1 + 6 * static_cast<int>(obstacle) + face; }

struct PropPath {
    PathKind kind = PathKind::Los;
    std::vector<Vec3> vertices; // tx, [reflection point], rx
    double length = 0.0;        // m
    double delay = 0.0;         // s
    std::complex<double> gain;  // linear amplitude
    double aod = 0.0;           // azimuth of departure at tx, rad
    double aoa = 0.0;           // azimuth of arrival at rx, rad
    double reflectivity = 1.0;  // product of bounce coefficients
    int path_id = kLosPathId;
};

struct Cir {
    std::vector<PropPath> paths; // ascending delay
    double carrier_frequency = 140e9;

    bool empty() const { return paths.empty(); }

    bool has_los() const
    {
        return std::any_of(paths.begin(), paths.end(), [](const PropPath &p) { return p.kind == PathKind::Los; });
    }

    double power() const
    {
        double sum = 0.0;
        for (const auto &p : paths) sum += std::norm(p.gain);
        return sum;
    }
};

struct BlockageEvent {
    std::string ue_id;
    double start = 0.0; // s
    double end = 0.0;   // s
};

// Ray-traced environment information handed back to the knowledge agent.
struct EnvInfo {
    std::map<std::string, Cir> channels;
    std::vector<BlockageEvent> blockage_events;
};

// A routed box that blocks (and optionally reflects) while it moves.
struct MovingBlocker {
    std::string id;
    RoutePlan route;
    Vec3 extents = Vec3::Ones(); // full box size, centered on the route position
    double reflectivity = 0.0;
};

/// Free-space amplitude lambda/(4 pi L) scaled by the bounce coefficients,
/// with carrier phase -2 pi L / lambda.
inline std::complex<double> path_gain(double length, double reflectivity, double freq)
{
    if (!(length > 0.0)) throw InvalidInput("path_gain: length must be positive");
    const double lambda = kSpeedOfLight / freq;
    const double amplitude = lambda / (4.0 * kPi * length) * reflectivity;
    return std::polar(amplitude, -2.0 * kPi * std::fmod(length / lambda, 1.0));
}

namespace detail {

inline PropPath make_path(PathKind kind, std::vector<Vec3> vertices, double reflectivity, int id, double freq)
{
    PropPath p;
    p.kind = kind;
    p.vertices = std::move(vertices);
    p.length = 0.0;
    for (std::size_t i = 1; i < p.vertices.size(); ++i) p.length += (p.vertices[i] - p.vertices[i - 1]).norm();
    p.delay = p.length / kSpeedOfLight;
    p.reflectivity = reflectivity;
    p.gain = path_gain(p.length, reflectivity, freq);
    p.aod = azimuth(p.vertices[1] - p.vertices.front());
    p.aoa = azimuth(p.vertices[p.vertices.size() - 2] - p.vertices.back());
    p.path_id = id;
    return p;
}

} // namespace detail

/// LOS (if unoccluded) plus every valid single-bounce reflection.
inline std::vector<PropPath> trace_paths(const SceneModel &scene, const Vec3 &tx, const Vec3 &rx)
{
    if (tx == rx) throw InvalidInput("trace_paths: tx and rx coincide");
    const double freq = scene.carrier_frequency;
    std::vector<PropPath> out;
    if (los_clear(scene, tx, rx)) out.push_back(detail::make_path(PathKind::Los, {tx, rx}, 1.0, kLosPathId, freq));

    for (std::size_t i = 0; i < scene.obstacles.size(); ++i) {
        const Aabb &box = scene.obstacles[i];
        if (!(box.reflectivity > 0.0)) continue;
        const auto box_faces = faces(box);
        for (int f = 0; f < 6; ++f) {
            const Face &face = box_faces[f];
            const int k = face.axis;
            // Both ends must sit strictly on the outward side of the face.
            if ((tx[k] - face.offset) * face.outward <= 0.0 || (rx[k] - face.offset) * face.outward <= 0.0) continue;
            const Vec3 image = mirror_across_face(tx, face);
            const double t = (face.offset - image[k]) / (rx[k] - image[k]);
            Vec3 q = image + t * (rx - image);
            q[k] = face.offset;
            const int u = (k + 1) % 3, v = (k + 2) % 3;
            if (q[u] < box.min[u] || q[u] > box.max[u] || q[v] < box.min[v] || q[v] > box.max[v]) continue;
            if (q == tx || q == rx) continue;
            if (!los_clear(scene, tx, q) || !los_clear(scene, q, rx)) continue;
            out.push_back(detail::make_path(PathKind::Reflected, {tx, q, rx}, box.reflectivity,
                                            reflection_path_id(i, f), freq));
        }
    }
    return out;
}

/// Recomputes gains for `freq` and sorts taps by delay (ties by path id).
inline Cir compose_cir(std::vector<PropPath> paths, double freq)
{
    for (auto &p : paths) p.gain = path_gain(p.length, p.reflectivity, freq);
    std::stable_sort(paths.begin(), paths.end(), [](const PropPath &a, const PropPath &b) {
        return a.delay < b.delay || (a.delay == b.delay && a.path_id < b.path_id);
    });
    return {std::move(paths), freq};
}

inline Cir trace_cir(const SceneModel &scene, const Vec3 &tx, const Vec3 &rx)
{
    return compose_cir(trace_paths(scene, tx, rx), scene.carrier_frequency);
}

/// Static scene plus each blocker placed at its route position at time t.
/// Blockers are appended in the given order.
inline SceneModel place_blockers(const SceneModel &scene, const std::vector<MovingBlocker> &blockers, double t)
{
    SceneModel out = scene;
    out.obstacles.reserve(scene.obstacles.size() + blockers.size());
    for (const auto &b : blockers)
        out.obstacles.push_back(Aabb::centered(route_position_at(b.route, t), b.extents, b.reflectivity, b.id));
    return out;
}

/// Steps [now, now + horizon] by dt and reports intervals where the tx-UE line
/// of sight is occluded. Consecutive blocked steps merge; an event ends one
/// step after its last blocked sample.
inline std::vector<BlockageEvent> predict_blockage(const SceneModel &scene, const Vec3 &tx, const std::string &ue_id,
                                                   const RoutePlan &ue_route,
                                                   const std::vector<MovingBlocker> &blockers, double now,
                                                   double horizon, double dt)
{
    if (!(dt > 0.0)) throw InvalidInput("predict_blockage: dt must be positive");
    if (!(horizon >= dt)) throw InvalidInput("predict_blockage: horizon must be at least dt");
    const auto steps = static_cast<long>(std::floor(horizon / dt + 1e-9));
    std::vector<BlockageEvent> events;
    bool open = false;
    for (long i = 0; i <= steps; ++i) {
        const double t = now + static_cast<double>(i) * dt;
        const Vec3 ue = route_position_at(ue_route, t);
        const bool blocked = ue != tx && !los_clear(place_blockers(scene, blockers, t), tx, ue);
        if (blocked) {
            if (!open) events.push_back({ue_id, t, t + dt});
            else events.back().end = t + dt;
        }
        open = blocked;
    }
    return events;
}

} // namespace kran

#endif // KRAN_RAYTRACE_HPP
