// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include "egopose/body.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

namespace egopose::body {

using ad::Tensor;

namespace {

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm3(const Vec3& a) { return std::sqrt(dot3(a, a)); }

Vec3 sub3(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 mat3_apply(const Mat3& m, const Vec3& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
    return c;
}

double point_segment_distance(const Vec3& q, const Vec3& a, const Vec3& b) {
    const Vec3 ab = sub3(b, a);
    const Vec3 aq = sub3(q, a);
    const double len2 = dot3(ab, ab);
    double t = len2 > 0.0 ? dot3(aq, ab) / len2 : 0.0;
    t = std::min(std::max(t, 0.0), 1.0);
    const Vec3 d{aq[0] - t * ab[0], aq[1] - t * ab[1], aq[2] - t * ab[2]};
    return norm3(d);
}

}  // namespace

const Skeleton& Skeleton::default_human() {
    static const Skeleton s = [] {
        Skeleton sk;
        sk.parent = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                     9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
        sk.rest_offsets = {{
            {0.00, 0.00, 0.00},    // 0 pelvis (root)
            {0.09, -0.09, 0.00},   // 1 left hip
            {-0.09, -0.09, 0.00},  // 2 right hip
            {0.00, 0.11, 0.00},    // 3 spine1
            {0.04, -0.38, 0.00},   // 4 left knee
            {-0.04, -0.38, 0.00},  // 5 right knee
            {0.00, 0.13, 0.00},    // 6 spine2
            {0.00, -0.40, -0.03},  // 7 left ankle
            {0.00, -0.40, -0.03},  // 8 right ankle
            {0.00, 0.05, 0.00},    // 9 spine3
            {0.00, -0.06, 0.13},   // 10 left foot
            {0.00, -0.06, 0.13},   // 11 right foot
            {0.00, 0.21, -0.02},   // 12 neck
            {0.07, 0.11, -0.02},   // 13 left collar
            {-0.07, 0.11, -0.02},  // 14 right collar
            {0.00, 0.09, 0.03},    // 15 head
            {0.10, 0.04, 0.00},    // 16 left shoulder
            {-0.10, 0.04, 0.00},   // 17 right shoulder
            {0.26, 0.00, 0.00},    // 18 left elbow
            {-0.26, 0.00, 0.00},   // 19 right elbow
            {0.25, 0.00, 0.00},    // 20 left wrist
            {-0.25, 0.00, 0.00},   // 21 right wrist
            {0.08, 0.00, 0.00},    // 22 left hand
            {-0.08, 0.00, 0.00},   // 23 right hand
        }};
        return sk;
    }();
    return s;
}

int Skeleton::graph_distance(const Skeleton& s, int a, int b) {
    if (a == b) return 0;
    std::vector<std::vector<int>> adj(kJointCount);
    for (int j = 1; j < kJointCount; ++j) {
        adj[j].push_back(s.parent[j]);
        adj[s.parent[j]].push_back(j);
    }
    std::vector<int> dist(kJointCount, -1);
    std::queue<int> q;
    q.push(a);
    dist[a] = 0;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                if (v == b) return dist[v];
                q.push(v);
            }
    }
    return dist[b];
}

PoseState PoseState::identity() {
    PoseState p;
    for (int j = 0; j < kJointCount; ++j) {
        p.rot6d[j * 6 + 0] = 1.0;  // (1,0,0, 0,1,0) per row
        p.rot6d[j * 6 + 4] = 1.0;
    }
    return p;
}

Tensor PoseState::tensor(bool requires_grad) const {
    return Tensor::from({kJointCount, 6}, rot6d, requires_grad);
}

PoseState PoseState::from_tensor(const Tensor& t) {
    PoseState p;
    p.rot6d = t.value();
    return p;
}

const CapsuleParams& CapsuleParams::default_params() {
    static const CapsuleParams p = [] {
        CapsuleParams cp;
        cp.radius_by_joint = {0.00, 0.10, 0.10, 0.12, 0.07, 0.07, 0.12, 0.05,
                              0.05, 0.12, 0.04, 0.04, 0.06, 0.08, 0.08, 0.09,
                              0.06, 0.06, 0.045, 0.045, 0.04, 0.04, 0.035, 0.035};
        cp.tau = 0.05;
        return cp;
    }();
    return p;
}

Mat3 rot6d_to_matrix(const std::array<double, 6>& row, int joint) {
    const auto degenerate = [joint](const char* what) -> std::runtime_error {
        std::string msg = std::string("rot6d_to_matrix: degenerate ") + what;
        if (joint >= 0) msg += " at joint " + std::to_string(joint);
        return std::runtime_error(msg);
    };
    const Vec3 a{row[0], row[1], row[2]};
    const Vec3 b{row[3], row[4], row[5]};
    const double na = norm3(a);
    if (na <= 1e-8) throw degenerate("first vector");
    const Vec3 u{a[0] / na, a[1] / na, a[2] / na};
    const double ub = dot3(u, b);
    const Vec3 w{b[0] - ub * u[0], b[1] - ub * u[1], b[2] - ub * u[2]};
    const double nw = norm3(w);
    if (nw <= 1e-8) throw degenerate("second vector after projection");
    const Vec3 v{w[0] / nw, w[1] / nw, w[2] / nw};
    const Vec3 c{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                 u[0] * v[1] - u[1] * v[0]};
    return {u[0], v[0], c[0], u[1], v[1], c[1], u[2], v[2], c[2]};
}

ad::Tensor rot6d_to_matrix_t(const Tensor& row6, int joint) {
    using namespace ad;
    if (row6.numel() != 6)
        throw std::invalid_argument("rot6d_to_matrix: expected a 6-vector");
    Tensor flat = row6.ndim() == 1 ? row6 : reshape(row6, {6});
    Tensor a = slice(flat, 0, 0, 3);
    Tensor b = slice(flat, 0, 3, 3);

    Tensor na2 = sum_all(square(a));
    if (na2.item() <= 1e-16)
        throw std::runtime_error("rot6d_to_matrix: degenerate first vector" +
                                 (joint >= 0 ? " at joint " + std::to_string(joint) : ""));
    Tensor u = mul(a, rsqrt(na2));
    Tensor ub = sum_all(mul(u, b));
    Tensor w = sub(b, mul(u, ub));
    Tensor nw2 = sum_all(square(w));
    if (nw2.item() <= 1e-16)
        throw std::runtime_error(
            "rot6d_to_matrix: degenerate second vector after projection" +
            (joint >= 0 ? " at joint " + std::to_string(joint) : ""));
    Tensor v = mul(w, rsqrt(nw2));

    auto el = [](const Tensor& t, size_t i) { return slice(t, 0, i, 1); };
    Tensor c0 = sub(mul(el(u, 1), el(v, 2)), mul(el(u, 2), el(v, 1)));
    Tensor c1 = sub(mul(el(u, 2), el(v, 0)), mul(el(u, 0), el(v, 2)));
    Tensor c2 = sub(mul(el(u, 0), el(v, 1)), mul(el(u, 1), el(v, 0)));

    // Rows of R with columns (u, v, u x v).
    Tensor r0 = reshape(concat({el(u, 0), el(v, 0), c0}, 0), {1, 3});
    Tensor r1 = reshape(concat({el(u, 1), el(v, 1), c1}, 0), {1, 3});
    Tensor r2 = reshape(concat({el(u, 2), el(v, 2), c2}, 0), {1, 3});
    return concat({r0, r1, r2}, 0);
}

std::array<double, kJointCount> bone_scales(const BodyShape& shape) {
    // Fixed seeded linear map from beta to per-bone multipliers.
    static const std::vector<double> map = [] {
        RngStream rng(0x5eed, "bone-scale-map");
        std::vector<double> m(kJointCount * kShapeDim);
        for (double& x : m) x = rng.normal() * 0.03;
        return m;
    }();
    std::array<double, kJointCount> s{};
    for (int j = 0; j < kJointCount; ++j) {
        double acc = 1.0;
        for (int k = 0; k < kShapeDim; ++k) acc += map[j * kShapeDim + k] * shape.beta[k];
        s[j] = std::min(std::max(acc, 0.5), 2.0);
    }
    return s;
}

std::vector<Vec3> forward_kinematics_scaled(const PoseState& pose,
                                            const std::array<double, kJointCount>& scales,
                                            const Translation& gamma, const Skeleton& skel) {
    std::vector<Vec3> pos(kJointCount);
    std::vector<Mat3> glob(kJointCount);
    for (int j = 0; j < kJointCount; ++j) {
        std::array<double, 6> row;
        for (int k = 0; k < 6; ++k) row[k] = pose.rot6d[j * 6 + k];
        const Mat3 local = rot6d_to_matrix(row, j);
        if (skel.parent[j] < 0) {
            glob[j] = local;
            pos[j] = gamma.gamma;
        } else {
            const int p = skel.parent[j];
            const Vec3 off{skel.rest_offsets[j][0] * scales[j],
                           skel.rest_offsets[j][1] * scales[j],
                           skel.rest_offsets[j][2] * scales[j]};
            const Vec3 d = mat3_apply(glob[p], off);
            pos[j] = {pos[p][0] + d[0], pos[p][1] + d[1], pos[p][2] + d[2]};
            glob[j] = mat3_mul(glob[p], local);
        }
    }
    return pos;
}

std::vector<Vec3> forward_kinematics(const PoseState& pose, const BodyShape& shape,
                                     const Translation& gamma, const Skeleton& skel) {
    return forward_kinematics_scaled(pose, bone_scales(shape), gamma, skel);
}

ad::Tensor forward_kinematics_t(const Tensor& rot6d, const BodyShape& shape,
                                const Translation& gamma, const Skeleton& skel) {
    using namespace ad;
    if (rot6d.ndim() != 2 || rot6d.rows() != kJointCount || rot6d.cols() != 6)
        throw std::invalid_argument("forward_kinematics: pose must be [24,6]");
    const auto scales = bone_scales(shape);

    std::vector<Tensor> glob(kJointCount);  // [3,3]
    std::vector<Tensor> pos(kJointCount);   // [3,1] column vectors
    for (int j = 0; j < kJointCount; ++j) {
        Tensor local = rot6d_to_matrix_t(slice(rot6d, 0, j, 1), j);
        if (skel.parent[j] < 0) {
            glob[j] = local;
            pos[j] = Tensor::from({3, 1},
                                  {gamma.gamma[0], gamma.gamma[1], gamma.gamma[2]});
        } else {
            const int p = skel.parent[j];
            Tensor off = Tensor::from({3, 1}, {skel.rest_offsets[j][0] * scales[j],
                                               skel.rest_offsets[j][1] * scales[j],
                                               skel.rest_offsets[j][2] * scales[j]});
            pos[j] = add(pos[p], matmul(glob[p], off));
            glob[j] = matmul(glob[p], local);
        }
    }
    std::vector<Tensor> rows;
    rows.reserve(kJointCount);
    for (int j = 0; j < kJointCount; ++j) rows.push_back(reshape(pos[j], {1, 3}));
    return concat(rows, 0);
}

std::vector<Capsule> build_capsules(const std::vector<Vec3>& joints, const Skeleton& skel,
                                    const CapsuleParams& params, const BodyShape&) {
    std::vector<Capsule> caps;
    caps.reserve(kBoneCount);
    for (int j = 1; j < kJointCount; ++j)
        caps.push_back({joints[skel.parent[j]], joints[j], params.radius_by_joint[j]});
    return caps;
}

double capsule_occupancy(const Vec3& q, const std::vector<Capsule>& capsules, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("capsule_occupancy: tau must be positive");
    double f = -std::numeric_limits<double>::infinity();
    for (const Capsule& c : capsules)
        f = std::max(f, (c.r - point_segment_distance(q, c.a, c.b)) / tau);
    return f;
}

double capsule_surface_distance(const Vec3& q, const std::vector<Capsule>& capsules) {
    double d = std::numeric_limits<double>::infinity();
    for (const Capsule& c : capsules)
        d = std::min(d, point_segment_distance(q, c.a, c.b) - c.r);
    return d;
}

CollisionScore collision_score_t(const Tensor& rot6d, const BodyShape& shape,
                                 const Translation& gamma,
                                 const std::vector<Vec3>& scene_points,
                                 const Skeleton& skel, const CapsuleParams& params) {
    using namespace ad;
    if (scene_points.empty()) return {Tensor::scalar(0.0), true};
    if (params.tau <= 0.0) throw std::invalid_argument("collision_score: tau must be positive");

    const size_t m = scene_points.size();
    std::vector<double> pdata(m * 3);
    for (size_t i = 0; i < m; ++i)
        for (int k = 0; k < 3; ++k) pdata[i * 3 + k] = scene_points[i][k];
    Tensor points = Tensor::from({m, 3}, std::move(pdata));

    Tensor joints = forward_kinematics_t(rot6d, shape, gamma, skel);

    std::vector<Tensor> per_bone;
    per_bone.reserve(kBoneCount);
    for (int j = 1; j < kJointCount; ++j) {
        Tensor a = reshape(slice(joints, 0, skel.parent[j], 1), {3});
        Tensor b = reshape(slice(joints, 0, j, 1), {3});
        Tensor ab = sub(b, a);
        Tensor len2 = sum_all(square(ab));
        Tensor aq = sub(points, a);                        // [M,3]
        Tensor t = clamp(mul(sum_axis(mul(aq, ab), 1), reciprocal(len2)), 0.0, 1.0);
        Tensor closest = mul(broadcast_rows(ab, m), reshape(t, {m, 1}));
        Tensor d = sqrt_(sum_axis(square(sub(aq, closest)), 1));  // [M]
        Tensor f = scale(add_const(neg(d), params.radius_by_joint[j]), 1.0 / params.tau);
        per_bone.push_back(reshape(f, {1, m}));
    }
    Tensor f = max_axis(concat(per_bone, 0), 0);  // [M]

    // Inside indicator gates the sigmoid term but carries no gradient.
    std::vector<double> gate(m);
    for (size_t i = 0; i < m; ++i) gate[i] = f.value()[i] > 0.0 ? 1.0 : 0.0;
    Tensor score = mean_all(stop_grad_gate(sigmoid(f), gate));
    return {score, false};
}

double collision_score(const PoseState& pose, const BodyShape& shape,
                       const Translation& gamma, const std::vector<Vec3>& scene_points,
                       const Skeleton& skel, const CapsuleParams& params) {
    return collision_score_t(pose.tensor(), shape, gamma, scene_points, skel, params)
        .score.item();
}

ad::Tensor orthonormal_penalty_t(const Tensor& rot6d) {
    using namespace ad;
    Tensor a = slice(rot6d, 1, 0, 3);
    Tensor b = slice(rot6d, 1, 3, 3);
    Tensor na = sqrt_(sum_axis(square(a), 1));
    Tensor nb = sqrt_(sum_axis(square(b), 1));
    Tensor dot = sum_axis(mul(a, b), 1);
    return add(add(sum_all(square(add_const(na, -1.0))), sum_all(square(add_const(nb, -1.0)))),
               sum_all(square(dot)));
}

double orthonormal_penalty(const PoseState& pose) {
    double total = 0.0;
    for (int j = 0; j < kJointCount; ++j) {
        const double* r = pose.rot6d.data() + j * 6;
        const double na = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
        const double nb = std::sqrt(r[3] * r[3] + r[4] * r[4] + r[5] * r[5]);
        const double dot = r[0] * r[3] + r[1] * r[4] + r[2] * r[5];
        total += (na - 1.0) * (na - 1.0) + (nb - 1.0) * (nb - 1.0) + dot * dot;
    }
    return total;
}

}  // namespace egopose::body
