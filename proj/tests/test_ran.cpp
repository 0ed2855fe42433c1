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

#include "kran/ran.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace kran;

namespace {

// Closed-form ULA gain evaluated in long double, written out independently.
long double af_gain_db(long double n, long double spacing, long double steer, long double angle)
{
    const long double pi = 3.141592653589793238462643383279L;
    const long double psi = 2.0L * pi * spacing * (std::sin(angle) - std::sin(steer));
    long double af = 1.0L;
    if (std::fabs(std::sin(psi / 2.0L)) > 1e-18L) af = std::fabs(std::sin(n * psi / 2.0L) / (n * std::sin(psi / 2.0L)));
    return std::max(20.0L * std::log10(n * af), -60.0L);
}

BeamCodebook single_beam_cb(std::size_t n, double steer)
{
    BeamCodebook cb;
    cb.n_elements = n;
    cb.beams = {steer, steer + 0.5};
    return cb;
}

SceneModel hall()
{
    SceneModel s;
    s.geofence = {{-20, -20}, {20, -20}, {20, 20}, {-20, 20}};
    return s;
}

RanControlState one_link()
{
    RanControlState st;
    st.links["ue"] = UeLinkControl{};
    return st;
}

} // namespace

TEST(ArrayGain, MainLobePeak)
{
    EXPECT_NEAR(array_gain_db(single_beam_cb(8, 0.0), 0, 0.0), 18.06, 0.005);
    EXPECT_NEAR(array_gain_db(single_beam_cb(8, 0.3), 0, 0.3), 20.0 * std::log10(8.0), 1e-12);
}

TEST(ArrayGain, FirstNullHitsFloor)
{
    // psi = 2 pi / N with half-wavelength spacing: sin(angle) = 2 / N.
    const double angle = std::asin(2.0 / 8.0);
    EXPECT_EQ(array_gain_db(single_beam_cb(8, 0.0), 0, angle), kArrayGainFloorDb);
}

TEST(ArrayGain, MatchesClosedForm)
{
    const double got = array_gain_db(single_beam_cb(8, 0.0), 0, deg_to_rad(10.0));
    const long double want = af_gain_db(8, 0.5, 0, 10.0L * 3.141592653589793238462643383279L / 180.0L);
    EXPECT_NEAR(got, static_cast<double>(want), 1e-9);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> a(-kPi / 2.0, kPi / 2.0);
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    for (int i = 0; i < 2000; ++i) {
        const std::size_t beam = static_cast<std::size_t>(i) % cb.size();
        const double ang = a(rng);
        EXPECT_NEAR(array_gain_db(cb, beam, ang), static_cast<double>(af_gain_db(16, 0.5, cb.beams[beam], ang)), 1e-7);
    }
}

TEST(ArrayGain, ContinuousAtSteeringAngle)
{
    const BeamCodebook cb = single_beam_cb(16, 0.2);
    EXPECT_NEAR(array_gain_db(cb, 0, 0.2 + 1e-10), array_gain_db(cb, 0, 0.2), 1e-9);
}

TEST(ArrayGain, RejectsBadInput)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    EXPECT_THROW(array_gain_db(cb, 32, 0.0), InvalidInput);
    EXPECT_THROW(array_gain_db(cb, 0, 2.0), InvalidInput);
}

TEST(Codebook, DefaultLayout)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    EXPECT_EQ(cb.size(), 32u);
    EXPECT_NEAR(cb.span_low(), deg_to_rad(-60.0), 1e-15);
    EXPECT_NEAR(cb.span_high(), deg_to_rad(60.0), 1e-15);
    EXPECT_NEAR(cb.beams[1] - cb.beams[0], deg_to_rad(120.0 / 31.0), 1e-12);
    EXPECT_THROW(BeamCodebook::uniform(1, 16), InvalidInput);
    EXPECT_THROW(BeamCodebook::uniform(8, 1), InvalidInput);
}

TEST(Sweep, UniqueMaximum)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    const auto r = sweep_beams(cb, [](std::size_t b) { return b == 5 ? 1.0 : 0.0; });
    EXPECT_EQ(r.best_beam, 5u);
    EXPECT_EQ(r.measurements, 32u);
}

TEST(Sweep, TiesGoToLowestIndex)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    EXPECT_EQ(sweep_beams(cb, [](std::size_t) { return -70.0; }).best_beam, 0u);
    EXPECT_EQ(sweep_beams(cb, [](std::size_t b) { return b == 4 || b == 9 ? 3.0 : 0.0; }).best_beam, 4u);
}

TEST(Sweep, MeasurementsEqualProbeCalls)
{
    const BeamCodebook cb = BeamCodebook::uniform(24, 8);
    std::mt19937_64 rng(4);
    std::size_t calls = 0;
    const auto r = sweep_beams(cb, [&](std::size_t) {
        ++calls;
        return std::uniform_real_distribution<double>(-90, -40)(rng);
    });
    EXPECT_EQ(r.measurements, calls);
    calls = 0;
    const std::vector<std::size_t> subset{3, 4, 5};
    const auto w = sweep_beams(cb, [&](std::size_t b) { ++calls; return -static_cast<double>(b); }, subset);
    EXPECT_EQ(w.measurements, 3u);
    EXPECT_EQ(calls, 3u);
    EXPECT_EQ(w.best_beam, 3u);
}

TEST(Sweep, ArgmaxInvariantUnderTxPower)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    const Pose antenna = Pose::at({-10, 0, 3});
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto rs = oracle::random_scene(rng);
        const Cir cir = trace_cir(rs.scene, rs.tx, rs.rx);
        const Pose ant = Pose::at(rs.tx, std::uniform_real_distribution<double>(-kPi, kPi)(rng));
        const double shift = std::uniform_real_distribution<double>(-40, 40)(rng);
        const auto a = sweep_beams(cb, [&](std::size_t b) { return beam_rssi_dbm(cir, cb, b, ant, 30.0, -90.0); });
        const auto b =
            sweep_beams(cb, [&](std::size_t b) { return beam_rssi_dbm(cir, cb, b, ant, 30.0 + shift, -90.0 + shift); });
        EXPECT_EQ(a.best_beam, b.best_beam) << "trial " << trial;
    }
    (void)antenna;
}

TEST(Sweep, BlockedLosPicksReflection)
{
    // LOS blocked by an absorber; a wall at y = 3 gives a single reflection.
    SceneModel s = hall();
    s.obstacles.push_back(Aabb{{-5, 3, 0}, {15, 4, 6}, 0.5, "wall"});
    s.obstacles.push_back(Aabb::centered({4, 0, 2}, {0.6, 0.6, 0.6}, 0.0, "absorber"));
    const Vec3 tx{0, 0, 2}, rx{8, 0, 2};
    const Cir cir = trace_cir(s, tx, rx);
    ASSERT_FALSE(cir.has_los());
    ASSERT_EQ(cir.paths.size(), 1u);
    const double refl_aod = std::atan2(3.0, 4.0);
    EXPECT_NEAR(cir.paths[0].aod, refl_aod, 1e-12);

    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    const Pose ant = Pose::at(tx);
    const auto r = sweep_beams(cb, [&](std::size_t b) { return beam_rssi_dbm(cir, cb, b, ant, 30.0, -90.0); });
    // independent argmax over the closed-form gains
    std::size_t want = 0;
    long double best = -1e9L;
    for (std::size_t b = 0; b < cb.size(); ++b) {
        const long double g = af_gain_db(16, 0.5, cb.beams[b], refl_aod);
        if (g > best + 1e-9L) best = g, want = b;
    }
    EXPECT_EQ(r.best_beam, want);
    EXPECT_EQ(r.best_beam, nearest_beam(cb, refl_aod));
}

TEST(MeasureRanState, EmptyCirReadsNoiseFloor)
{
    std::mt19937_64 rng(0);
    const auto rec = measure_ran_state("ue", Cir{}, BeamCodebook::uniform(32, 16), 3, Pose{}, 30.0, -90.0,
                                       MeasurementNoise{}, rng);
    EXPECT_EQ(rec.rssi, -90.0);
    EXPECT_TRUE(rec.csi.empty());
    EXPECT_EQ(rec.active_beam, 3u);
}

TEST(MeasureRanState, SingleLosNoiseFree)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    const Vec3 tx{0, 0, 2}, rx{6, 2, 2};
    const Cir cir = trace_cir(hall(), tx, rx);
    const Pose ant = Pose::at(tx, deg_to_rad(5.0));
    std::mt19937_64 rng(0);
    const MeasurementNoise quiet{0.0, 0.0};
    for (std::size_t beam : {0u, 12u, 20u}) {
        const auto rec = measure_ran_state("ue", cir, cb, beam, ant, 30.0, -90.0, quiet, rng);
        const double d = (rx - tx).norm();
        const double fspl = 20.0 * std::log10(4.0 * kPi * d / hall().wavelength());
        const double rel = std::atan2(2.0, 6.0) - deg_to_rad(5.0);
        EXPECT_NEAR(rec.rssi, 30.0 - fspl + array_gain_db(cb, beam, rel), 1e-9);
        EXPECT_NEAR(rec.aoa, rel, 1e-12);
        ASSERT_EQ(rec.csi.size(), 1u);
        EXPECT_LE(rec.rssi, 30.0 + 20.0 * std::log10(16.0));
    }
}

TEST(MeasureRanState, SameSeedSameRecord)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    SceneModel s = hall();
    s.obstacles.push_back(Aabb{{-5, 3, 0}, {15, 4, 6}, 0.5, "wall"});
    const Cir cir = trace_cir(s, {0, 0, 2}, {8, 1, 1.5});
    auto once = [&] {
        auto rng = substream(42, "ranstate:ue", 7);
        return to_canonical(measure_ran_state("ue", cir, cb, 17, Pose::at({0, 0, 2}), 30.0, -90.0, MeasurementNoise{}, rng));
    };
    EXPECT_EQ(once(), once());
}

TEST(MeasureRanState, CsiSortedAndBounded)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto rs = oracle::random_scene(rng);
        const Cir cir = trace_cir(rs.scene, rs.tx, rs.rx);
        const std::size_t beam = static_cast<std::size_t>(trial) % cb.size();
        const auto rec = measure_ran_state("ue", cir, cb, beam, Pose::at(rs.tx), 30.0, -90.0, MeasurementNoise{0, 0}, rng);
        for (std::size_t i = 1; i < rec.csi.size(); ++i) EXPECT_LE(rec.csi[i - 1].delay, rec.csi[i].delay);
        EXPECT_LE(rec.rssi, 30.0 + 20.0 * std::log10(16.0) + 1e-9);
    }
}

TEST(HandleRach, VerdictPropagates)
{
    const RachRequest req{"ue-1", 2.5, {3, 4, 1}};
    RanState seen;
    const Verifier accept = [&](const RanState &s) -> std::optional<AuthDecision> {
        seen = s;
        return AuthDecision{Verdict::Accept, AuthReason::Match, 0.7};
    };
    const auto d = handle_rach(req, Pose::at({0, 0, 3}), accept);
    EXPECT_EQ(d.verdict, Verdict::Accept);
    EXPECT_TRUE(admits(d));
    ASSERT_EQ(seen.records.size(), 1u);
    EXPECT_EQ(seen.records[0].ue_id, "ue-1");
    EXPECT_EQ(seen.timestamp, 2.5);
    ASSERT_TRUE(seen.records[0].claimed_position);
    EXPECT_EQ(*seen.records[0].claimed_position, Vec3(3, 4, 1));

    const Verifier reject = [](const RanState &) -> std::optional<AuthDecision> {
        return AuthDecision{Verdict::Reject, AuthReason::Geofence, std::nullopt};
    };
    const auto r = handle_rach(req, Pose{}, reject);
    EXPECT_EQ(r.verdict, Verdict::Reject);
    EXPECT_EQ(r.reason, AuthReason::Geofence);
    EXPECT_FALSE(admits(r));
}

TEST(HandleRach, UnreachableVerifierFallsBack)
{
    const RachRequest req{"ue-1", 0.0, {0, 0, 0}};
    const Verifier timeout = [](const RanState &) -> std::optional<AuthDecision> { return std::nullopt; };
    const Verifier broken = [](const RanState &) -> std::optional<AuthDecision> { throw std::runtime_error("down"); };
    for (const auto &v : {timeout, broken, Verifier{}}) {
        const auto d = handle_rach(req, Pose{}, v);
        EXPECT_EQ(d.verdict, Verdict::Unverified);
        EXPECT_EQ(d.reason, AuthReason::KaUnreachable);
        EXPECT_TRUE(admits(d));
    }
}

TEST(ApplyRanCnt, SetBeam)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    auto st = one_link();
    ASSERT_TRUE(apply_rancnt(SetBeam{"ue", 7}, st, cb).ok);
    EXPECT_EQ(st.links["ue"].active_beam, 7u);
    EXPECT_EQ(st.links["ue"].policy, SweepPolicy::KnowledgeDriven);
}

TEST(ApplyRanCnt, SetBeamIdempotent)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    auto a = one_link();
    apply_rancnt(SetBeam{"ue", 11}, a, cb);
    auto b = a;
    apply_rancnt(SetBeam{"ue", 11}, b, cb);
    EXPECT_EQ(a.links["ue"].active_beam, b.links["ue"].active_beam);
    EXPECT_EQ(a.links["ue"].policy, b.links["ue"].policy);
    EXPECT_EQ(a.links["ue"].window, b.links["ue"].window);
}

TEST(ApplyRanCnt, WindowRestrictsNextSweep)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    auto st = one_link();
    ASSERT_TRUE(apply_rancnt(SweepWindow{"ue", deg_to_rad(-10.0), deg_to_rad(10.0)}, st, cb).ok);
    const auto cand = sweep_candidates(st.links["ue"], cb);
    std::size_t expected = 0;
    for (double b : cb.beams) expected += std::abs(b) <= deg_to_rad(10.0);
    EXPECT_EQ(expected, 6u);
    EXPECT_EQ(cand.size(), 6u);
    for (std::size_t i : cand) EXPECT_LE(std::abs(cb.beams[i]), deg_to_rad(10.0));
    EXPECT_TRUE(st.links["ue"].window_sweep_pending);
}

TEST(ApplyRanCnt, FallbackRestoresFullSweep)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    auto st = one_link();
    apply_rancnt(SweepWindow{"ue", deg_to_rad(-10.0), deg_to_rad(10.0)}, st, cb);
    apply_rancnt(ChannelEstimate{"ue", {}}, st, cb);
    ASSERT_TRUE(apply_rancnt(Fallback{"ue"}, st, cb).ok);
    EXPECT_EQ(sweep_candidates(st.links["ue"], cb).size(), 32u);
    EXPECT_EQ(st.links["ue"].policy, SweepPolicy::Periodic);
    EXPECT_EQ(st.links["ue"].pilot_suppressed_frames, 0);
}

TEST(ApplyRanCnt, ChannelEstimateSuppressesPilots)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    auto st = one_link();
    const std::vector<CsiTap> taps{{1e-8, {1e-4, 0}, 0}, {2e-8, {0, 1e-5}, 7}};
    ASSERT_TRUE(apply_rancnt(ChannelEstimate{"ue", taps}, st, cb).ok);
    EXPECT_EQ(st.links["ue"].equalizer.size(), 2u);
    EXPECT_EQ(st.links["ue"].pilot_suppressed_frames, 1);
}

TEST(ApplyRanCnt, InvalidDirectivesLeaveStateUntouched)
{
    const BeamCodebook cb = BeamCodebook::uniform(32, 16);
    auto st = one_link();
    apply_rancnt(SetBeam{"ue", 4}, st, cb);
    const std::string before = std::to_string(st.links["ue"].active_beam);
    const std::vector<RanCnt> bad{
        SetBeam{"ue", 32},
        SweepWindow{"ue", 0.2, 0.1},
        SweepWindow{"ue", deg_to_rad(-70.0), 0.0},
        ChannelEstimate{"ue", {{2e-8, {1, 0}, 1}, {1e-8, {1, 0}, 0}}},
        SetBeam{"ghost", 1},
    };
    for (const auto &cnt : bad) {
        const auto res = apply_rancnt(cnt, st, cb);
        EXPECT_FALSE(res.ok) << to_canonical(cnt);
        EXPECT_FALSE(res.error.empty());
        EXPECT_EQ(std::to_string(st.links["ue"].active_beam), before);
        EXPECT_FALSE(st.links["ue"].window);
        EXPECT_TRUE(st.links["ue"].equalizer.empty());
    }
    EXPECT_EQ(st.links.count("ghost"), 0u);
}

TEST(Canonical, DirectiveText)
{
    EXPECT_EQ(to_canonical(RanCnt{SetBeam{"ue-1", 7}}), "SET_BEAM ue=ue-1 beam=7");
    EXPECT_EQ(to_canonical(RanCnt{Fallback{"ue-1"}}), "FALLBACK ue=ue-1");
    EXPECT_TRUE(is_knowledge_directive(SweepWindow{"u", 0, 1}));
    EXPECT_FALSE(is_knowledge_directive(Fallback{"u"}));
}
