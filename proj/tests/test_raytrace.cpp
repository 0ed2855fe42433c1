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

#include "kran/raytrace.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace kran;

namespace {

SceneModel open_hall()
{
    SceneModel s;
    s.geofence = {{-10, -10}, {10, -10}, {10, 10}, {-10, 10}};
    return s;
}

// Wall whose min-y face lies on the plane y = 2, long enough for the two-path case.
SceneModel two_path_scene()
{
    SceneModel s = open_hall();
    s.obstacles.push_back(Aabb{{-5, 2, 0}, {9, 3, 5}, 0.3, "wall"});
    return s;
}

double min_power_db(const std::complex<double> &g) { return 20.0 * std::log10(std::abs(g)); }

} // namespace

TEST(TracePaths, EmptySceneSingleLos)
{
    const auto paths = trace_paths(open_hall(), {0, 0, 2}, {3, 0, 2});
    ASSERT_EQ(paths.size(), 1u);
    EXPECT_EQ(paths[0].kind, PathKind::Los);
    EXPECT_NEAR(paths[0].length, 3.0, 1e-12);
    EXPECT_NEAR(paths[0].delay, 1.00069e-8, 1e-13);
    EXPECT_EQ(paths[0].vertices.size(), 2u);
}

TEST(TracePaths, WallAddsOneReflection)
{
    const auto paths = trace_paths(two_path_scene(), {0, 0, 2}, {4, 0, 2});
    ASSERT_EQ(paths.size(), 2u);
    const PropPath &refl = paths[0].kind == PathKind::Reflected ? paths[0] : paths[1];
    const PropPath &los = paths[0].kind == PathKind::Los ? paths[0] : paths[1];
    EXPECT_NEAR(los.length, 4.0, 1e-12);
    EXPECT_NEAR(refl.length, 5.6569, 1e-4);
    ASSERT_EQ(refl.vertices.size(), 3u);
    EXPECT_LT((refl.vertices[1] - Vec3(2, 2, 2)).norm(), 1e-12);
    EXPECT_NEAR(std::abs(refl.gain), 0.3 * std::abs(path_gain(refl.length, 1.0, 140e9)), 1e-18);
}

TEST(TracePaths, ReflectionPointMinimisesTravel)
{
    // Brute-force minimisation of |tx-q| + |q-rx| over the face y = 2.
    const Vec3 tx{0, 0, 2}, rx{4, 0, 2};
    double best = 1e9;
    for (double x = -5; x <= 9; x += 0.01)
        for (double z = 0; z <= 5; z += 0.01) {
            const Vec3 q{x, 2, z};
            best = std::min(best, (q - tx).norm() + (rx - q).norm());
        }
    const auto paths = trace_paths(two_path_scene(), tx, rx);
    EXPECT_NEAR(paths[1].length, best, 1e-3);
}

TEST(TracePaths, FullyBlocked)
{
    SceneModel s = open_hall();
    s.obstacles.push_back(Aabb::centered({2, 0, 2}, {1, 1, 1}, 0.0));
    EXPECT_TRUE(trace_paths(s, {0, 0, 2}, {4, 0, 2}).empty());
}

TEST(TracePaths, CoincidentEndpointsThrow)
{
    EXPECT_THROW(trace_paths(open_hall(), {1, 1, 1}, {1, 1, 1}), InvalidInput);
}

TEST(TracePaths, MatchesBruteForceOracle)
{
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const auto rs = oracle::random_scene(rng);
        const auto got = trace_paths(rs.scene, rs.tx, rs.rx);
        const auto want = oracle::brute_force_paths(rs.scene, rs.tx, rs.rx);
        ASSERT_EQ(got.size(), want.size()) << "trial " << trial;
        std::vector<double> lengths;
        for (const auto &p : got) lengths.push_back(p.length);
        std::sort(lengths.begin(), lengths.end());
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(lengths[i], want[i].length, 1e-9) << "trial " << trial;
    }
}

TEST(TracePaths, Reciprocity)
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const auto rs = oracle::random_scene(rng);
        auto fwd = trace_paths(rs.scene, rs.tx, rs.rx);
        auto rev = trace_paths(rs.scene, rs.rx, rs.tx);
        ASSERT_EQ(fwd.size(), rev.size());
        auto by_id = [](const PropPath &a, const PropPath &b) { return a.path_id < b.path_id; };
        std::sort(fwd.begin(), fwd.end(), by_id);
        std::sort(rev.begin(), rev.end(), by_id);
        for (std::size_t i = 0; i < fwd.size(); ++i) {
            EXPECT_EQ(fwd[i].path_id, rev[i].path_id);
            EXPECT_NEAR(fwd[i].length, rev[i].length, 1e-12);
            EXPECT_NEAR(std::abs(fwd[i].gain - rev[i].gain), 0.0, 1e-12);
            EXPECT_NEAR(std::abs(wrap_angle(fwd[i].aod - rev[i].aoa)), 0.0, 1e-9);
            EXPECT_NEAR(std::abs(wrap_angle(fwd[i].aoa - rev[i].aod)), 0.0, 1e-9);
        }
    }
}

TEST(TracePaths, PathInvariants)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto rs = oracle::random_scene(rng);
        const double lambda = rs.scene.wavelength();
        for (const auto &p : trace_paths(rs.scene, rs.tx, rs.rx)) {
            EXPECT_NEAR(p.delay, p.length / 299792458.0, 1e-15);
            EXPECT_LE(std::abs(p.gain), lambda / (4.0 * kPi * p.length) * (1 + 1e-12));
            EXPECT_EQ(p.vertices.size(), p.kind == PathKind::Los ? 2u : 3u);
        }
    }
}

TEST(PathGain, OneMetreAt140GHz)
{
    const double lambda = 299792458.0 / 140e9;
    const auto g = path_gain(1.0, 1.0, 140e9);
    EXPECT_NEAR(std::abs(g), lambda / (4.0 * kPi), 1e-18);
    EXPECT_NEAR(std::abs(g), 1.70405e-4, 5e-9);
    EXPECT_NEAR(min_power_db(g), -75.37, 0.005);
    // the rounded c = 3e8 figure differs only in the fourth digit
    EXPECT_NEAR(std::abs(g), 1.7053e-4, 2e-7);
}

TEST(PathGain, DoublingLengthCostsSixDb)
{
    EXPECT_NEAR(min_power_db(path_gain(2.0, 1.0, 140e9)) - min_power_db(path_gain(1.0, 1.0, 140e9)), -6.0206, 1e-4);
}

TEST(PathGain, BounceScalesAmplitude)
{
    const auto a = path_gain(7.3, 1.0, 140e9), b = path_gain(7.3, 0.3, 140e9);
    EXPECT_NEAR(std::abs(b) / std::abs(a), 0.3, 1e-12);
    EXPECT_NEAR(min_power_db(b) - min_power_db(a), -10.4576, 1e-4);
    EXPECT_NEAR(std::arg(a), std::arg(b), 1e-12);
}

TEST(PathGain, PhaseFollowsLength)
{
    const double lambda = 299792458.0 / 140e9;
    const auto a = path_gain(3.0, 1.0, 140e9), b = path_gain(3.0 + lambda / 4.0, 1.0, 140e9);
    EXPECT_NEAR(std::abs(wrap_angle(std::arg(b) - std::arg(a)) + kPi / 2.0), 0.0, 1e-6);
    EXPECT_THROW(path_gain(0.0, 1.0, 140e9), InvalidInput);
}

TEST(ComposeCir, EmptyAndSingle)
{
    EXPECT_TRUE(compose_cir({}, 140e9).empty());
    const Cir c = trace_cir(open_hall(), {0, 0, 2}, {3, 0, 2});
    EXPECT_EQ(c.paths.size(), 1u);
    EXPECT_TRUE(c.has_los());
}

TEST(ComposeCir, TwoPathDelays)
{
    const Cir c = compose_cir(trace_paths(two_path_scene(), {0, 0, 2}, {4, 0, 2}), 140e9);
    ASSERT_EQ(c.paths.size(), 2u);
    EXPECT_NEAR(c.paths[0].delay, 1.334e-8, 1e-11);
    EXPECT_NEAR(c.paths[1].delay, 1.887e-8, 1e-11);
    EXPECT_LT(c.paths[0].delay, c.paths[1].delay);
}

TEST(PredictBlockage, NoBlockers)
{
    EXPECT_TRUE(predict_blockage(open_hall(), {0, 0, 1}, "ue", RoutePlan::stationary({10, 0, 1}), {}, 0.0, 5.0, 0.1).empty());
}

namespace {

// Box of 1 m width sliding along y across the tx-UE line at x = 5.
MovingBlocker crossing(double t_enter, const std::string &id = "agv")
{
    // centre y(t) = t - t_enter - 0.5: the box covers y = 0 for t in [t_enter, t_enter + 1]
    const double y0 = -0.5 - t_enter;
    return MovingBlocker{id, RoutePlan{{{0.0, {5, y0, 1}}, {100.0, {5, y0 + 100.0, 1}}}}, {1, 1, 2}, 0.0};
}

} // namespace

TEST(PredictBlockage, CrossingBetweenThreeAndFourSeconds)
{
    // offset from the grid so no sample has a face exactly on the line
    const MovingBlocker b = crossing(2.95);
    const auto ev = predict_blockage(open_hall(), {0, 0, 1}, "ue", RoutePlan::stationary({10, 0, 1}), {b}, 0.0, 6.0, 0.1);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].ue_id, "ue");
    EXPECT_NEAR(ev[0].start, 3.0, 1e-9);
    EXPECT_NEAR(ev[0].end, 4.0, 1e-9);
    // per-sample oracle on the predictor's own grid
    for (int i = 0; i <= 60; ++i) {
        const double t = i * 0.1;
        const SceneModel at = place_blockers(open_hall(), {b}, t);
        const bool expected = oracle::blocked(at, {0, 0, 1}, {10, 0, 1});
        const bool inside = t >= ev[0].start - 1e-9 && t < ev[0].end - 1e-9;
        EXPECT_EQ(expected, inside) << "t=" << t;
    }
}

TEST(PredictBlockage, TwoDisjointCrossingsSorted)
{
    const MovingBlocker a = crossing(1.0, "a"), b = crossing(4.0, "b");
    const auto ev =
        predict_blockage(open_hall(), {0, 0, 1}, "ue", RoutePlan::stationary({10, 0, 1}), {b, a}, 0.0, 8.0, 0.05);
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_LT(ev[0].start, ev[1].start);
    EXPECT_NEAR(ev[0].start, 1.0, 0.051);
    EXPECT_NEAR(ev[1].start, 4.0, 0.051);
    for (const auto &e : ev) EXPECT_LT(e.start, e.end);
}

TEST(PredictBlockage, ShortHorizonMatchesInstantaneousLos)
{
    const MovingBlocker b = crossing(3.0);
    for (double now : {1.0, 3.5, 5.0}) {
        const auto ev =
            predict_blockage(open_hall(), {0, 0, 1}, "ue", RoutePlan::stationary({10, 0, 1}), {b}, now, 0.01, 0.01);
        const bool clear = los_clear(place_blockers(open_hall(), {b}, now), {0, 0, 1}, {10, 0, 1});
        EXPECT_EQ(!clear, !ev.empty() && ev[0].start == now) << now;
    }
}

TEST(PredictBlockage, RejectsBadSteps)
{
    EXPECT_THROW(predict_blockage(open_hall(), {0, 0, 1}, "ue", RoutePlan::stationary({1, 0, 1}), {}, 0.0, 1.0, 0.0),
                 InvalidInput);
    EXPECT_THROW(predict_blockage(open_hall(), {0, 0, 1}, "ue", RoutePlan::stationary({1, 0, 1}), {}, 0.0, 0.01, 0.1),
                 InvalidInput);
}
