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

#include "kran/sensors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace kran;

namespace {

SensorMeta uwb(const Pose &pose = {}) { return SensorMeta{"uwb", SensorKind::Uwb, pose}; }
SensorMeta camera(const Pose &pose = {}) { return SensorMeta{"cam", SensorKind::Vision, pose}; }

SceneModel hall()
{
    SceneModel s;
    s.geofence = {{-20, -20}, {20, -20}, {20, 20}, {-20, 20}};
    return s;
}

const PositionMeasurement &position_of(const SensState &s) { return std::get<PositionMeasurement>(s.payload); }
const DetectionSet &detections_of(const SensState &s) { return std::get<DetectionSet>(s.payload); }

} // namespace

TEST(UwbMeasure, NoiseFreeIdentityPose)
{
    std::mt19937_64 rng(0);
    const auto s = uwb_measure("ue", {3, -2, 1}, uwb(), NoiseModel{0.0, 1.0}, Health::Ok, 0.1, rng);
    ASSERT_TRUE(s);
    EXPECT_EQ(position_of(*s).position, Vec3(3, -2, 1));
    EXPECT_EQ(position_of(*s).entity_id, "ue");
    EXPECT_EQ(s->timestamp, 0.1);
}

TEST(UwbMeasure, TranslatedMount)
{
    std::mt19937_64 rng(0);
    const auto s = uwb_measure("ue", {3, -2, 1}, uwb(Pose::at({5, 0, 0})), NoiseModel{0.0, 1.0}, Health::Ok, 0.0, rng);
    EXPECT_LT((position_of(*s).position - Vec3(-2, -2, 1)).norm(), 1e-15);
}

TEST(UwbMeasure, SampleSpreadMatchesSigma)
{
    std::mt19937_64 rng(99);
    const int n = 10000;
    Vec3 sum = Vec3::Zero(), sq = Vec3::Zero();
    const Vec3 truth{1, 2, 3};
    for (int i = 0; i < n; ++i) {
        const auto s = uwb_measure("ue", truth, uwb(), NoiseModel{0.1, 1.0}, Health::Ok, 0.0, rng);
        const Vec3 e = position_of(*s).position - truth;
        sum += e;
        sq += e.cwiseProduct(e);
        EXPECT_TRUE(is_symmetric_psd(position_of(*s).covariance));
    }
    for (int k = 0; k < 3; ++k) {
        const double mean = sum[k] / n;
        const double sd = std::sqrt((sq[k] - n * mean * mean) / (n - 1));
        EXPECT_GE(sd, 0.095);
        EXPECT_LE(sd, 0.105);
    }
}

TEST(UwbMeasure, DegradedDoublesSigma)
{
    std::mt19937_64 rng(1);
    const auto s = uwb_measure("ue", {0, 0, 0}, uwb(), NoiseModel{0.1, 1.0}, Health::Degraded, 0.0, rng);
    EXPECT_NEAR(position_of(*s).covariance(0, 0), 0.04, 1e-15);
    EXPECT_EQ(s->health, Health::Degraded);
}

TEST(UwbMeasure, DownSensorSilent)
{
    std::mt19937_64 rng(1);
    EXPECT_FALSE(uwb_measure("ue", {0, 0, 0}, uwb(), NoiseModel{}, Health::Down, 0.0, rng));
}

TEST(UwbMeasure, RangeLimitAndKind)
{
    std::mt19937_64 rng(1);
    SensorMeta m = uwb();
    m.max_range = 5.0;
    EXPECT_FALSE(uwb_measure("ue", {6, 0, 0}, m, NoiseModel{}, Health::Ok, 0.0, rng));
    EXPECT_TRUE(uwb_measure("ue", {4, 0, 0}, m, NoiseModel{}, Health::Ok, 0.0, rng));
    EXPECT_THROW(uwb_measure("ue", {0, 0, 0}, camera(), NoiseModel{}, Health::Ok, 0.0, rng), InvalidInput);
}

TEST(VisionDetect, OccludedEntityNotReported)
{
    SceneModel s = hall();
    s.obstacles.push_back(Aabb::centered({5, 0, 1}, {1, 4, 4}));
    std::mt19937_64 rng(0);
    const std::vector<EntityTruth> ents{{"agv", {10, 0, 1}, {1, 1, 1}, false}};
    const auto out = vision_detect(s, ents, camera(Pose::at({0, 0, 1})), NoiseModel{0.0, 1.0}, Health::Ok, 0.0, rng);
    EXPECT_TRUE(detections_of(out).detections.empty());
}

TEST(VisionDetect, VisibleEntityExactCentre)
{
    std::mt19937_64 rng(0);
    const Pose mount{{0, 0, 2}, deg_to_rad(30.0), 0.0, 0.0};
    const std::vector<EntityTruth> ents{{"agv", {6, 3, 1}, {1, 2, 1}, false}};
    const auto out = vision_detect(hall(), ents, camera(mount), NoiseModel{0.0, 1.0}, Health::Ok, 0.0, rng);
    ASSERT_EQ(detections_of(out).detections.size(), 1u);
    const Detection &d = detections_of(out).detections[0];
    EXPECT_LT((d.center - mount.to_local({6, 3, 1})).norm(), 1e-12);
    EXPECT_FALSE(d.entity_id);
}

TEST(VisionDetect, FieldOfView)
{
    std::mt19937_64 rng(0);
    const std::vector<EntityTruth> ents{{"front", {5, 1, 0}, {}, false}, {"side", {1, 5, 0}, {}, false},
                                        {"back", {-5, 0, 0}, {}, false}};
    const auto out = vision_detect(hall(), ents, camera(), NoiseModel{0.0, 1.0}, Health::Ok, 0.0, rng);
    ASSERT_EQ(detections_of(out).detections.size(), 1u);
    EXPECT_LT((detections_of(out).detections[0].center - Vec3(5, 1, 0)).norm(), 1e-12);
}

TEST(VisionDetect, OtherEntitiesOcclude)
{
    std::mt19937_64 rng(0);
    const std::vector<EntityTruth> ents{{"near", {3, 0, 0}, {1, 1, 1}, false}, {"far", {8, 0, 0}, {1, 1, 1}, false}};
    const auto out = vision_detect(hall(), ents, camera(), NoiseModel{0.0, 1.0}, Health::Ok, 0.0, rng);
    ASSERT_EQ(detections_of(out).detections.size(), 1u);
    EXPECT_NEAR(detections_of(out).detections[0].center.x(), 3.0, 1e-12);
}

TEST(VisionDetect, DetectionRate)
{
    std::mt19937_64 rng(77);
    const std::vector<EntityTruth> ents{{"agv", {5, 0, 0}, {1, 1, 1}, false}};
    int hits = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i)
        hits += static_cast<int>(
            detections_of(vision_detect(hall(), ents, camera(), NoiseModel{0.1, 0.98}, Health::Ok, 0.0, rng)).detections.size());
    const double rate = static_cast<double>(hits) / n;
    EXPECT_GE(rate, 0.975);
    EXPECT_LE(rate, 0.985);
}

TEST(VisionDetect, DownCameraHasNoPayload)
{
    std::mt19937_64 rng(0);
    const auto out = vision_detect(hall(), {{"agv", {5, 0, 0}, {1, 1, 1}, false}}, camera(), NoiseModel{}, Health::Down, 0.0, rng);
    EXPECT_TRUE(std::holds_alternative<std::monostate>(out.payload));
    EXPECT_TRUE(to_common_frame(out).empty());
    EXPECT_THROW(vision_detect(hall(), {}, uwb(), NoiseModel{}, Health::Ok, 0.0, rng), InvalidInput);
}

TEST(CommonFrame, IdentityPose)
{
    const SensState s{uwb(), 0.0, PositionMeasurement{"ue", {1, 2, 3}, Vec3(0.1, 0.2, 0.3).asDiagonal()}, Health::Ok};
    const auto w = to_common_frame(s);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w[0].position, Vec3(1, 2, 3));
    EXPECT_TRUE(w[0].covariance.isApprox(Mat3(Vec3(0.1, 0.2, 0.3).asDiagonal())));
    EXPECT_EQ(*w[0].entity_id, "ue");
}

TEST(CommonFrame, TranslationKeepsCovariance)
{
    const Mat3 cov = Vec3(0.1, 0.2, 0.3).asDiagonal();
    const SensState s{uwb(Pose::at({4, -1, 2})), 0.0, PositionMeasurement{"ue", {1, 2, 3}, cov}, Health::Ok};
    const auto w = to_common_frame(s);
    EXPECT_LT((w[0].position - Vec3(5, 1, 5)).norm(), 1e-15);
    EXPECT_EQ(w[0].covariance, cov);
}

TEST(CommonFrame, YawNinety)
{
    const Pose mount{{2, 3, 1}, kPi / 2.0, 0.0, 0.0};
    const Mat3 cov = Vec3(0.1, 0.2, 0.3).asDiagonal();
    const SensState s{uwb(mount), 0.0, PositionMeasurement{"ue", {1, 0, 0}, cov}, Health::Ok};
    const auto w = to_common_frame(s);
    EXPECT_LT((w[0].position - Vec3(2, 4, 1)).norm(), 1e-12);
    // explicit R = [[0,-1,0],[1,0,0],[0,0,1]]: x and y variances swap
    Mat3 r;
    r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    EXPECT_LT((w[0].covariance - r * cov * r.transpose()).norm(), 1e-12);
    EXPECT_NEAR(w[0].covariance(0, 0), 0.2, 1e-12);
    EXPECT_NEAR(w[0].covariance(1, 1), 0.1, 1e-12);
}

TEST(CommonFrame, RoundTripAndPsd)
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> a(-kPi, kPi), u(-20, 20);
    for (int i = 0; i < 1000; ++i) {
        const Pose p{{u(rng), u(rng), u(rng)}, a(rng), a(rng) / 2.0, a(rng)};
        const Vec3 x{u(rng), u(rng), u(rng)};
        Mat3 m = Mat3::Random();
        const Mat3 cov = m * m.transpose();
        const SensState s{uwb(p), 0.0, PositionMeasurement{"ue", p.to_local(x), cov}, Health::Ok};
        const auto w = to_common_frame(s);
        EXPECT_LT((w[0].position - x).norm(), 1e-9);
        EXPECT_TRUE(is_symmetric_psd(w[0].covariance, 1e-12));
    }
}

TEST(Canonical, SensStateText)
{
    const SensState s{uwb(), 0.0, PositionMeasurement{"ue", {1, 2, 3}, 0.01 * Mat3::Identity()}, Health::Ok};
    EXPECT_EQ(to_canonical(s), "sensor=uwb kind=UWB health=OK entity=ue pos=1,2,3 var=0.01");
}

TEST(NoiseModel, Validation)
{
    EXPECT_THROW((NoiseModel{-0.1, 0.5}.validate()), InvalidInput);
    EXPECT_THROW((NoiseModel{0.1, 1.5}.validate()), InvalidInput);
    EXPECT_NO_THROW(NoiseModel{}.validate());
}
