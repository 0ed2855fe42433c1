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

#ifndef KRAN_CORE_HPP
#define KRAN_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kran {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Raised for inputs that violate an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline bool is_finite(const Vec3 &v) { return v.allFinite(); }

// Wraps an angle into [-pi, pi].
inline double wrap_angle(double a)
{
    a = std::remainder(a, 2.0 * kPi);
    if (a < -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

// Azimuth of a direction in the horizontal (x, y) plane.
inline double azimuth(const Vec3 &dir) { return std::atan2(dir.y(), dir.x()); }

// 64-bit FNV-1a; stable across platforms, used for fingerprints and RNG stream ids.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Locale-independent compact number text used by every serialized record.
inline std::string format_number(double v, int significant = 9)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", significant, v);
    return buf;
}

// Deterministic random substream keyed by (seed, stream, index). Identical keys
// yield identical sequences regardless of what other streams consumed.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view stream, std::uint64_t index)
{
    const std::uint64_t id = fnv1a(stream);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

} // namespace kran

#endif // KRAN_CORE_HPP
