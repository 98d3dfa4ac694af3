// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "egopose/body.hpp"

using namespace egopose;
using body::Mat3;
using body::Vec3;

namespace {

double mat_err(const Mat3& a, const Mat3& b) {
    double e = 0.0;
    for (int i = 0; i < 9; ++i) e = std::max(e, std::abs(a[i] - b[i]));
    return e;
}

double det3(const Mat3& r) {
    return r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
           r[2] * (r[3] * r[7] - r[4] * r[6]);
}

double orthogonality_err(const Mat3& r) {
    double e = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += r[k * 3 + i] * r[k * 3 + j];
            e = std::max(e, std::abs(dot - (i == j ? 1.0 : 0.0)));
        }
    return e;
}

bool in_subtree(const body::Skeleton& s, int j, int root) {
    while (j >= 0) {
        if (j == root) return true;
        j = s.parent[j];
    }
    return false;
}

}  // namespace

TEST_CASE("6D row (1,0,0,0,1,0) maps to the identity rotation") {
    Mat3 r = body::rot6d_to_matrix({1, 0, 0, 0, 1, 0});
    CHECK(mat_err(r, {1, 0, 0, 0, 1, 0, 0, 0, 1}) < 1e-12);
}

TEST_CASE("6D row (0,1,0,1,0,0) orthonormalizes with det +1") {
    Mat3 r = body::rot6d_to_matrix({0, 1, 0, 1, 0, 0});
    // columns: (0,1,0), (1,0,0), and their cross product (0,0,-1)
    Mat3 want = {0, 1, 0, 1, 0, 0, 0, 0, -1};
    CHECK(mat_err(r, want) < 1e-12);
    CHECK(det3(r) == doctest::Approx(1.0));
}

TEST_CASE("1000 random 6D rows produce orthonormal right-handed matrices") {
    RngStream rng(3, "rot6d");
    for (int i = 0; i < 1000; ++i) {
        std::array<double, 6> row;
        for (auto& v : row) v = rng.normal();
        Mat3 r = body::rot6d_to_matrix(row);
        CHECK(orthogonality_err(r) < 1e-10);
        CHECK(std::abs(det3(r) - 1.0) < 1e-10);
    }
}

TEST_CASE("degenerate 6D row throws naming the joint") {
    CHECK_THROWS_AS(body::rot6d_to_matrix({0, 0, 0, 0, 0, 0}, 5), std::exception);
}

TEST_CASE("differentiable 6D conversion matches the plain one") {
    RngStream rng(5, "rot6d-t");
    std::array<double, 6> row;
    for (auto& v : row) v = rng.normal();
    ad::Tensor t = body::rot6d_to_matrix_t(ad::Tensor::from({6}, {row.begin(), row.end()}));
    Mat3 r = body::rot6d_to_matrix(row);
    for (int i = 0; i < 9; ++i) CHECK(t.at(i) == doctest::Approx(r[i]).epsilon(1e-12));
}

TEST_CASE("FK at identity pose equals cumulative rest offsets around gamma") {
    const auto& skel = body::Skeleton::default_human();
    body::PoseState pose = body::PoseState::identity();
    body::BodyShape beta;
    body::Translation gamma;
    gamma.gamma = {0.2, 1.0, 2.0};
    auto joints = body::forward_kinematics(pose, beta, gamma, skel);
    std::vector<Vec3> want(body::kJointCount);
    want[0] = gamma.gamma;
    for (int j = 1; j < body::kJointCount; ++j) {
        const int p = skel.parent[j];
        for (int k = 0; k < 3; ++k) want[j][k] = want[p][k] + skel.rest_offsets[j][k];
    }
    for (int j = 0; j < body::kJointCount; ++j)
        for (int k = 0; k < 3; ++k) CHECK(joints[j][k] == doctest::Approx(want[j][k]));
}

TEST_CASE("180-degree root yaw mirrors joints in x and z about gamma") {
    const auto& skel = body::Skeleton::default_human();
    body::BodyShape beta;
    body::Translation gamma;
    gamma.gamma = {0.5, 0.9, 2.0};
    body::PoseState pose = body::PoseState::identity();
    // Rotation about +y by pi: columns (-1,0,0) and (0,1,0).
    pose.rot6d[0] = -1; pose.rot6d[1] = 0; pose.rot6d[2] = 0;
    pose.rot6d[3] = 0; pose.rot6d[4] = 1; pose.rot6d[5] = 0;
    auto turned = body::forward_kinematics(pose, beta, gamma, skel);
    auto plain = body::forward_kinematics(body::PoseState::identity(), beta, gamma, skel);
    for (int j = 0; j < body::kJointCount; ++j) {
        CHECK(turned[j][0] - gamma.gamma[0] == doctest::Approx(-(plain[j][0] - gamma.gamma[0])));
        CHECK(turned[j][1] == doctest::Approx(plain[j][1]));
        CHECK(turned[j][2] - gamma.gamma[2] == doctest::Approx(-(plain[j][2] - gamma.gamma[2])));
    }
}

TEST_CASE("scaling one bone by 1.1 shifts exactly its subtree by 0.1*offset") {
    const auto& skel = body::Skeleton::default_human();
    body::Translation gamma;
    body::PoseState pose = body::PoseState::identity();
    std::array<double, body::kJointCount> ones;
    ones.fill(1.0);
    auto base = body::forward_kinematics_scaled(pose, ones, gamma, skel);
    const int bone = 4;  // a mid-chain joint with descendants
    auto scaled_arr = ones;
    scaled_arr[bone] = 1.1;
    auto moved = body::forward_kinematics_scaled(pose, scaled_arr, gamma, skel);
    for (int j = 0; j < body::kJointCount; ++j) {
        for (int k = 0; k < 3; ++k) {
            const double want =
                in_subtree(skel, j, bone) ? 0.1 * skel.rest_offsets[bone][k] : 0.0;
            CHECK(moved[j][k] - base[j][k] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("mean shape gives unit bone scales") {
    auto s = body::bone_scales(body::BodyShape{});
    for (int j = 1; j < body::kJointCount; ++j) CHECK(s[j] == doctest::Approx(1.0));
}

TEST_CASE("differentiable FK matches the plain version") {
    const auto& skel = body::Skeleton::default_human();
    RngStream rng(9, "fk-t");
    body::PoseState pose;
    for (auto& v : pose.rot6d) v = rng.normal();
    body::BodyShape beta;
    for (auto& b : beta.beta) b = 0.3 * rng.normal();
    body::Translation gamma;
    gamma.gamma = {rng.normal(), rng.normal(), 2.0};
    auto ref = body::forward_kinematics(pose, beta, gamma, skel);
    ad::Tensor t = body::forward_kinematics_t(pose.tensor(), beta, gamma, skel);
    for (int j = 0; j < body::kJointCount; ++j)
        for (int k = 0; k < 3; ++k) CHECK(t.at(j, k) == doctest::Approx(ref[j][k]));
}

TEST_CASE("occupancy at a bone midpoint with radius 0.1 tau 0.05 is 2.0") {
    std::vector<body::Capsule> caps = {{{0, 0, 0}, {0, 0, 1}, 0.1}};
    CHECK(body::capsule_occupancy({0, 0, 0.5}, caps, 0.05) == doctest::Approx(2.0));
    // exactly at the surface
    CHECK(body::capsule_occupancy({0.1, 0, 0.5}, caps, 0.05) == doctest::Approx(0.0));
    // far away: strongly negative, so the gated sigmoid contribution is zero
    const double f = body::capsule_occupancy({1.0, 0, 0.5}, caps, 0.05);
    CHECK(f < -1.0);
}

TEST_CASE("surface distance is negative inside and positive outside") {
    std::vector<body::Capsule> caps = {{{0, 0, 0}, {0, 0, 1}, 0.1}};
    CHECK(body::capsule_surface_distance({0, 0, 0.5}, caps) == doctest::Approx(-0.1));
    CHECK(body::capsule_surface_distance({0.5, 0, 0.5}, caps) == doctest::Approx(0.4));
}

TEST_CASE("body floating far above a floor cloud scores zero collision") {
    const auto& skel = body::Skeleton::default_human();
    body::PoseState pose = body::PoseState::identity();
    body::BodyShape beta;
    body::Translation gamma;
    gamma.gamma = {0, 3.0, 0};  // well above the floor
    std::vector<Vec3> floor;
    RngStream rng(1, "floor-pts");
    for (int i = 0; i < 500; ++i) floor.push_back({rng.uniform(-2, 2), 0.0, rng.uniform(-2, 2)});
    CHECK(body::collision_score(pose, beta, gamma, floor, skel,
                                body::CapsuleParams::default_params()) == doctest::Approx(0.0));
}

TEST_CASE("single point at a bone midpoint scores sigmoid(2.0)") {
    const auto& skel = body::Skeleton::default_human();
    body::PoseState pose = body::PoseState::identity();
    body::BodyShape beta;
    body::Translation gamma;
    gamma.gamma = {0, 1.0, 2.0};
    auto joints = body::forward_kinematics(pose, beta, gamma, skel);
    body::CapsuleParams params;
    params.radius_by_joint.fill(0.1);
    params.tau = 0.05;
    // midpoint of the bone ending at joint 4 (knee): deep inside that capsule
    const int j = 4;
    const int p = skel.parent[j];
    Vec3 mid = {(joints[j][0] + joints[p][0]) / 2, (joints[j][1] + joints[p][1]) / 2,
                (joints[j][2] + joints[p][2]) / 2};
    const double got =
        body::collision_score(pose, beta, gamma, {mid}, skel, params);
    CHECK(got == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-6));
    CHECK(got == doctest::Approx(0.8808).epsilon(1e-3));
}

TEST_CASE("collision score equals a brute-force per-point loop") {
    const auto& skel = body::Skeleton::default_human();
    const auto& params = body::CapsuleParams::default_params();
    RngStream rng(21, "coll-oracle");
    body::PoseState pose = body::PoseState::identity();
    for (auto& v : pose.rot6d) v += 0.1 * rng.normal();
    body::BodyShape beta;
    body::Translation gamma;
    gamma.gamma = {0.1, 0.8, 1.5};
    auto joints = body::forward_kinematics(pose, beta, gamma, skel);
    auto caps = body::build_capsules(joints, skel, params, beta);
    std::vector<Vec3> pts;
    for (int i = 0; i < 2000; ++i)
        pts.push_back({gamma.gamma[0] + rng.uniform(-1, 1), gamma.gamma[1] + rng.uniform(-1, 1),
                       gamma.gamma[2] + rng.uniform(-1, 1)});
    double want = 0.0;
    for (const auto& q : pts) {
        const double f = body::capsule_occupancy(q, caps, params.tau);
        if (f > 0.0) want += 1.0 / (1.0 + std::exp(-f));
    }
    want /= static_cast<double>(pts.size());
    const double got = body::collision_score(pose, beta, gamma, pts, skel, params);
    CHECK(std::abs(got - want) < 1e-12);
}

TEST_CASE("collision score gradient matches finite differences") {
    const auto& skel = body::Skeleton::default_human();
    const auto& params = body::CapsuleParams::default_params();
    RngStream rng(23, "coll-grad");
    body::PoseState pose = body::PoseState::identity();
    for (auto& v : pose.rot6d) v += 0.1 * rng.normal();
    body::BodyShape beta;
    body::Translation gamma;
    gamma.gamma = {0.0, 0.6, 1.5};
    std::vector<Vec3> pts;
    for (int i = 0; i < 200; ++i)
        pts.push_back({gamma.gamma[0] + rng.uniform(-0.6, 0.6),
                       gamma.gamma[1] + rng.uniform(-0.8, 0.8),
                       gamma.gamma[2] + rng.uniform(-0.6, 0.6)});
    auto f = [&](const ad::Tensor& x) {
        auto cs = body::collision_score_t(x, beta, gamma, pts, skel, params);
        return cs.score;
    };
    CHECK(ad::gradient_check(f, pose.tensor(), 1e-5) < 1e-3);
}

TEST_CASE("orthonormality penalty is zero on identity rows") {
    CHECK(body::orthonormal_penalty(body::PoseState::identity()) == doctest::Approx(0.0));
}

TEST_CASE("one row scaled by 2 contributes penalty 2") {
    body::PoseState pose = body::PoseState::identity();
    for (int k = 0; k < 6; ++k) pose.rot6d[3 * 6 + k] *= 2.0;
    CHECK(body::orthonormal_penalty(pose) == doctest::Approx(2.0));
}

TEST_CASE("penalty decreases under gradient descent for 50 steps") {
    RngStream rng(31, "orth-gd");
    ad::Tensor x = ad::Tensor::randn({24, 6}, rng, 1.0, /*requires_grad=*/true);
    double prev = 1e300;
    for (int i = 0; i < 50; ++i) {
        x.zero_grad();
        ad::Tensor p = body::orthonormal_penalty_t(x);
        CHECK(p.item() < prev);
        prev = p.item();
        ad::backward(p);
        for (size_t k = 0; k < x.numel(); ++k) x.value()[k] -= 0.01 * x.grad()[k];
    }
}
