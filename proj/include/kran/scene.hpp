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

#ifndef KRAN_SCENE_HPP
#define KRAN_SCENE_HPP

#include "kran/core.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <string>
#include <vector>

namespace kran {

// Rigid pose. Rotation is R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct Pose {
    Vec3 position = Vec3::Zero();
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;

    static Pose identity() { return {}; }
    static Pose at(const Vec3 &p, double yaw = 0.0) { return {p, yaw, 0.0, 0.0}; }

    Mat3 rotation() const
    {
        return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                Eigen::AngleAxisd(roll, Vec3::UnitX()))
            .toRotationMatrix();
    }

    Vec3 to_world(const Vec3 &local) const { return rotation() * local + position; }
    Vec3 to_local(const Vec3 &world) const { return rotation().transpose() * (world - position); }

    void validate() const
    {
        if (!is_finite(position)) throw InvalidInput("pose position must be finite");
        for (double a : {yaw, pitch, roll})
            if (!std::isfinite(a) || a < -kPi || a > kPi) throw InvalidInput("pose angles must lie in [-pi, pi]");
    }
};

// Azimuth of a world-frame horizontal direction expressed in the frame of `pose`.
inline double relative_azimuth(const Pose &pose, double world_azimuth)
{
    const Vec3 dir(std::cos(world_azimuth), std::sin(world_azimuth), 0.0);
    return azimuth(pose.rotation().transpose() * dir);
}

struct Aabb {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();
    double reflectivity = 0.0; // amplitude coefficient
    std::string label;

    static Aabb centered(const Vec3 &center, const Vec3 &extents, double reflectivity = 0.0, std::string label = {})
    {
        return {center - extents / 2.0, center + extents / 2.0, reflectivity, std::move(label)};
    }

    Vec3 center() const { return (min + max) / 2.0; }
    Vec3 extents() const { return max - min; }

    bool contains(const Vec3 &p) const
    {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }

    void validate() const
    {
        if (!is_finite(min) || !is_finite(max)) throw InvalidInput("box '" + label + "' has non-finite corners");
        if ((min.array() > max.array()).any()) throw InvalidInput("box '" + label + "' has min > max");
        if (!(reflectivity >= 0.0 && reflectivity <= 1.0))
            throw InvalidInput("box '" + label + "' reflectivity outside [0, 1]");
    }
};

// One of the six axis-aligned faces of a box: the plane x[axis] == offset.
// `outward` is +1 for the max face, -1 for the min face.
struct Face {
    int axis = 0;
    int outward = 1;
    double offset = 0.0;
};

inline std::array<Face, 6> faces(const Aabb &box)
{
    std::array<Face, 6> out;
    for (int axis = 0; axis < 3; ++axis) {
        out[2 * axis] = {axis, -1, box.min[axis]};
        out[2 * axis + 1] = {axis, +1, box.max[axis]};
    }
    return out;
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct SceneModel {
    std::vector<Aabb> obstacles;
    std::vector<Vec2> geofence;
    double carrier_frequency = 140e9;

    double wavelength() const { return kSpeedOfLight / carrier_frequency; }

    void validate() const
    {
        for (const auto &box : obstacles) box.validate();
        if (!(carrier_frequency > 0.0) || !std::isfinite(carrier_frequency))
            throw InvalidInput("carrier frequency must be positive");
        if (geofence.size() < 3) throw InvalidInput("geofence needs at least 3 vertices");
        // Convex iff every consecutive cross product has the same sign (zeros allowed).
        int sign = 0;
        const std::size_t n = geofence.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 &a = geofence[i], &b = geofence[(i + 1) % n], &c = geofence[(i + 2) % n];
            const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            const int s = cross > 0.0 ? 1 : (cross < 0.0 ? -1 : 0);
            if (s == 0) continue;
            if (sign == 0) sign = s;
            else if (s != sign) throw InvalidInput("geofence polygon is not convex");
        }
        if (sign == 0) throw InvalidInput("geofence polygon is degenerate");
    }
};

struct Waypoint {
    double time = 0.0;
    Vec3 position = Vec3::Zero();
};

struct RoutePlan {
    std::vector<Waypoint> waypoints;

    static RoutePlan stationary(const Vec3 &p) { return {{{0.0, p}}}; }

    // Largest segment speed, m/s.
    double max_speed() const
    {
        double v = 0.0;
        for (std::size_t i = 1; i < waypoints.size(); ++i) {
            const double dt = waypoints[i].time - waypoints[i - 1].time;
            v = std::max(v, (waypoints[i].position - waypoints[i - 1].position).norm() / dt);
        }
        return v;
    }

    void validate() const
    {
        for (std::size_t i = 0; i < waypoints.size(); ++i) {
            if (!std::isfinite(waypoints[i].time) || !is_finite(waypoints[i].position))
                throw InvalidInput("route waypoint " + std::to_string(i) + " is not finite");
            if (i > 0 && !(waypoints[i].time > waypoints[i - 1].time))
                throw InvalidInput("route waypoint " + std::to_string(i) + " time is not increasing");
        }
    }
};

/// Closed segment vs closed box, slab method. Touching a face counts as a hit.
inline bool segment_intersects_aabb(const Vec3 &a, const Vec3 &b, const Aabb &box)
{
    if (a == b) throw InvalidInput("segment_intersects_aabb: degenerate segment");
    const Vec3 d = b - a;
    double t_enter = 0.0;
    double t_exit = 1.0;
    for (int k = 0; k < 3; ++k) {
        if (d[k] == 0.0) {
            if (a[k] < box.min[k] || a[k] > box.max[k]) return false;
            continue;
        }
        double t1 = (box.min[k] - a[k]) / d[k];
        double t2 = (box.max[k] - a[k]) / d[k];
        if (t1 > t2) std::swap(t1, t2);
        t_enter = std::max(t_enter, t1);
        t_exit = std::min(t_exit, t2);
        if (t_enter > t_exit) return false;
    }
    return true;
}

inline constexpr double kEndpointOffset = 1e-6; // m

/// True when no obstacle touches the segment. Both endpoints are pulled
/// 1e-6 m inward along the segment so a point lying on a face is not
/// occluded by that face.
inline bool los_clear(const SceneModel &scene, const Vec3 &a, const Vec3 &b)
{
    if (a == b) throw InvalidInput("los_clear: degenerate segment");
    const double len = (b - a).norm();
    const Vec3 u = (b - a) / len;
    Vec3 a2 = a, b2 = b;
    if (len > 2.0 * kEndpointOffset) {
        a2 = a + kEndpointOffset * u;
        b2 = b - kEndpointOffset * u;
    }
    return std::none_of(scene.obstacles.begin(), scene.obstacles.end(),
                        [&](const Aabb &box) { return segment_intersects_aabb(a2, b2, box); });
}

inline Vec3 mirror_across_face(const Vec3 &p, const Face &face)
{
    Vec3 out = p;
    out[face.axis] = 2.0 * face.offset - p[face.axis];
    return out;
}

/// Inside-or-on test of (p.x, p.y) against the convex geofence; height is ignored.
inline bool geofence_contains(const SceneModel &scene, const Vec3 &p)
{
    const auto &poly = scene.geofence;
    const std::size_t n = poly.size();
    if (n < 3) return false;
    bool any_pos = false, any_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 &a = poly[i], &b = poly[(i + 1) % n];
        const double cross = (b.x - a.x) * (p.y() - a.y) - (b.y - a.y) * (p.x() - a.x);
        const double scale = std::hypot(b.x - a.x, b.y - a.y);
        if (cross > 1e-12 * scale) any_pos = true;
        if (cross < -1e-12 * scale) any_neg = true;
        if (any_pos && any_neg) return false;
    }
    return true;
}

/// Linear interpolation along the route, clamped outside its time range.
inline Vec3 route_position_at(const RoutePlan &route, double t)
{
    const auto &w = route.waypoints;
    if (w.empty()) throw InvalidInput("route_position_at: empty route");
    if (t <= w.front().time) return w.front().position;
    if (t >= w.back().time) return w.back().position;
    auto hi = std::upper_bound(w.begin(), w.end(), t, [](double x, const Waypoint &wp) { return x < wp.time; });
    auto lo = hi - 1;
    const double s = (t - lo->time) / (hi->time - lo->time);
    return lo->position + s * (hi->position - lo->position);
}

} // namespace kran

#endif // KRAN_SCENE_HPP
