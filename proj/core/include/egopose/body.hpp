// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <array>
#include <vector>

#include "egopose/tensor.hpp"

namespace egopose::body {

inline constexpr int kJointCount = 24;
inline constexpr int kBoneCount = kJointCount - 1;
inline constexpr int kShapeDim = 10;

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

// 24-joint kinematic tree (pelvis root, spine chain, limbs) with hand-authored
// rest offsets of an average adult, in meters, y up.
struct Skeleton {
    std::array<int, kJointCount> parent;             // -1 for the root
    std::array<Vec3, kJointCount> rest_offsets;      // child relative to parent

    static const Skeleton& default_human();

    // Hop distance between joints over the skeleton edges (for locality tests).
    static int graph_distance(const Skeleton& s, int a, int b);
};

// Per-joint rotations in the 6D representation; the diffusion variable.
// Rows need not be orthonormal mid-diffusion.
struct PoseState {
    std::vector<double> rot6d;  // 24 x 6 row-major

    PoseState() : rot6d(kJointCount * 6, 0.0) {}
    static PoseState identity();
    ad::Tensor tensor(bool requires_grad = false) const;
    static PoseState from_tensor(const ad::Tensor& t);
};

struct BodyShape {
    std::array<double, kShapeDim> beta{};  // zeros = mean shape
};

struct Translation {
    Vec3 gamma{0.0, 0.0, 0.0};  // pelvis position, camera frame, meters
};

// Analytic capsule body: one capsule per skeleton edge, radius by child joint.
struct CapsuleParams {
    std::array<double, kJointCount> radius_by_joint;  // index = child joint
    double tau = 0.05;  // occupancy softness, meters

    static const CapsuleParams& default_params();
};

struct Capsule {
    Vec3 a, b;   // segment endpoints
    double r;    // radius
};

// ---- rotation ----

// Gram-Schmidt of the two 3-vectors plus cross product. Output satisfies
// R^T R = I within 1e-10 and det(R) = +1. Throws on a degenerate input,
// identifying the joint when joint >= 0.
Mat3 rot6d_to_matrix(const std::array<double, 6>& row, int joint = -1);
// Differentiable version; row6 is a [6] tensor, result is [3,3].
ad::Tensor rot6d_to_matrix_t(const ad::Tensor& row6, int joint = -1);

// ---- shape ----

// beta -> per-bone length multipliers via a fixed seeded linear map, clamped
// to (0.5, 2.0). Index = child joint (1..23).
std::array<double, kJointCount> bone_scales(const BodyShape& shape);

// ---- forward kinematics ----

// Joint positions in meters, camera frame. Root equals gamma; each child is
// parent position plus accumulated rotation applied to the scaled rest offset.
std::vector<Vec3> forward_kinematics(const PoseState& pose, const BodyShape& shape,
                                     const Translation& gamma, const Skeleton& skel);
// Same kinematic chain with explicit per-bone length multipliers.
std::vector<Vec3> forward_kinematics_scaled(const PoseState& pose,
                                            const std::array<double, kJointCount>& scales,
                                            const Translation& gamma, const Skeleton& skel);
// Differentiable version over the [24,6] pose tensor; returns [24,3].
ad::Tensor forward_kinematics_t(const ad::Tensor& rot6d, const BodyShape& shape,
                                const Translation& gamma, const Skeleton& skel);

std::vector<Capsule> build_capsules(const std::vector<Vec3>& joints, const Skeleton& skel,
                                    const CapsuleParams& params, const BodyShape& shape);

// ---- occupancy / collision ----

// Soft occupancy f(q) = max over bones of (radius - dist(q, segment)) / tau.
// Positive strictly inside some capsule, negative outside all.
double capsule_occupancy(const Vec3& q, const std::vector<Capsule>& capsules, double tau);

/// Signed distance to the capsule surface: min over bones of dist - radius.
double capsule_surface_distance(const Vec3& q, const std::vector<Capsule>& capsules);

struct CollisionScore {
    ad::Tensor score;        // scalar in [0,1]
    bool empty_scene = false;  // true when the crop had no points (score 0)
};

// Mean over scene points of sigmoid(f) gated by the inside indicator. The
// indicator carries no gradient; the sigmoid path is differentiated through
// FK and the capsule distances.
CollisionScore collision_score_t(const ad::Tensor& rot6d, const BodyShape& shape,
                                 const Translation& gamma,
                                 const std::vector<Vec3>& scene_points,
                                 const Skeleton& skel, const CapsuleParams& params);

// Value-only convenience wrapper.
double collision_score(const PoseState& pose, const BodyShape& shape,
                       const Translation& gamma, const std::vector<Vec3>& scene_points,
                       const Skeleton& skel, const CapsuleParams& params);

// Sum over joints of (|u|-1)^2 + (|v|-1)^2 + (u.v)^2 on the raw 6D rows.
// Zero iff every row's two 3-vectors are unit and orthogonal.
ad::Tensor orthonormal_penalty_t(const ad::Tensor& rot6d);
double orthonormal_penalty(const PoseState& pose);

}  // namespace egopose::body
