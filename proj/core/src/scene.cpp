// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include "egopose/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "egopose/rng.hpp"

namespace egopose::scene {

SceneTemplate parse_template(const std::string& name) {
    if (name == "floor") return SceneTemplate::floor;
    if (name == "floor+seat") return SceneTemplate::floor_seat;
    if (name == "floor+box+wall") return SceneTemplate::floor_box_wall;
    throw std::invalid_argument("unknown scene template: " + name);
}

std::string template_name(SceneTemplate t) {
    switch (t) {
        case SceneTemplate::floor: return "floor";
        case SceneTemplate::floor_seat: return "floor+seat";
        case SceneTemplate::floor_box_wall: return "floor+box+wall";
    }
    return "?";
}

namespace {

void sample_floor(RngStream& rng, size_t n, ScenePointCloud& out) {
    for (size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(-3.0, 3.0);
        const double z = rng.uniform(-3.0, 3.0);
        const double y = rng.uniform(-0.005, 0.005);  // surface jitter
        out.points.push_back({x, y, z});
        out.tags.push_back(SurfaceTag::floor);
    }
}

// Uniform sampling on the 5 exposed faces of an axis-aligned box standing on
// the floor (bottom face omitted).
void sample_box(RngStream& rng, size_t n, const Vec3& center, double sx, double sy, double sz,
                SurfaceTag tag, ScenePointCloud& out) {
    const double ax = sx * sz, ay = sy * sz, az = sx * sy;  // top, x-faces, z-faces
    const double total = ax + 2.0 * ay + 2.0 * az;
    for (size_t i = 0; i < n; ++i) {
        const double pick = rng.uniform(0.0, total);
        double u = rng.uniform(-0.5, 0.5), v = rng.uniform(-0.5, 0.5);
        Vec3 p;
        if (pick < ax) {
            p = {center[0] + u * sx, center[1] + 0.5 * sy, center[2] + v * sz};
        } else if (pick < ax + 2.0 * ay) {
            const double side = pick < ax + ay ? 0.5 : -0.5;
            p = {center[0] + side * sx, center[1] + u * sy, center[2] + v * sz};
        } else {
            const double side = pick < ax + 2.0 * ay + az ? 0.5 : -0.5;
            p = {center[0] + u * sx, center[1] + v * sy, center[2] + side * sz};
        }
        out.points.push_back(p);
        out.tags.push_back(tag);
    }
}

void sample_wall(RngStream& rng, size_t n, double wall_z, ScenePointCloud& out) {
    for (size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(-3.0, 3.0);
        const double y = rng.uniform(0.0, 2.5);
        const double z = wall_z + rng.uniform(-0.005, 0.005);
        out.points.push_back({x, y, z});
        out.tags.push_back(SurfaceTag::wall);
    }
}

}  // namespace

ScenePointCloud generate_scene(uint64_t seed, SceneTemplate tmpl, SceneMeta* meta_out,
                               size_t total_points) {
    RngStream rng(seed, "scene-gen");
    ScenePointCloud cloud;
    cloud.points.reserve(total_points);
    cloud.tags.reserve(total_points);

    SceneMeta meta;
    meta.tmpl = tmpl;
    meta.seed = seed;

    switch (tmpl) {
        case SceneTemplate::floor: {
            sample_floor(rng, total_points, cloud);
            break;
        }
        case SceneTemplate::floor_seat: {
            meta.has_seat = true;
            meta.seat_height = rng.uniform(0.40, 0.52);
            meta.seat_size = rng.uniform(0.42, 0.55);
            meta.seat_center = {rng.uniform(-1.2, 1.2), meta.seat_height,
                                rng.uniform(-1.2, 1.2)};
            const size_t n_seat = total_points * 3 / 10;
            sample_floor(rng, total_points - n_seat, cloud);
            sample_box(rng, n_seat,
                       {meta.seat_center[0], meta.seat_height / 2.0, meta.seat_center[2]},
                       meta.seat_size, meta.seat_height, meta.seat_size, SurfaceTag::seat,
                       cloud);
            break;
        }
        case SceneTemplate::floor_box_wall: {
            meta.has_clutter = true;
            meta.clutter_size = rng.uniform(0.3, 0.5);
            meta.clutter_center = {rng.uniform(-1.2, 1.2), meta.clutter_size / 2.0,
                                   rng.uniform(-1.2, 1.2)};
            const double wall_z = rng.uniform(2.0, 3.0);
            const size_t n_box = total_points / 5;
            const size_t n_wall = total_points / 5;
            sample_floor(rng, total_points - n_box - n_wall, cloud);
            sample_box(rng, n_box, meta.clutter_center, meta.clutter_size, meta.clutter_size,
                       meta.clutter_size, SurfaceTag::clutter, cloud);
            sample_wall(rng, n_wall, wall_z, cloud);
            break;
        }
    }

    if (meta_out) *meta_out = meta;
    return cloud;
}

ScenePointCloud crop_scene(const ScenePointCloud& cloud, const body::Translation& gamma_hat,
                           size_t fixed_count, double half_extent) {
    const auto& g = gamma_hat.gamma;
    for (double c : g)
        if (!std::isfinite(c))
            throw std::invalid_argument("crop_scene: non-finite translation");

    std::vector<size_t> kept;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3& p = cloud.points[i];
        if (std::abs(p[0] - g[0]) <= half_extent && std::abs(p[2] - g[2]) <= half_extent)
            kept.push_back(i);
    }

    ScenePointCloud out;
    if (kept.empty()) {
        out.empty_flagged = true;
        return out;
    }

    out.points.reserve(fixed_count);
    out.tags.reserve(fixed_count);
    // Deterministic stride subsample (or cyclic pad) to the fixed count.
    for (size_t k = 0; k < fixed_count; ++k) {
        const size_t i = kept.size() >= fixed_count ? kept[k * kept.size() / fixed_count]
                                                    : kept[k % kept.size()];
        const Vec3& p = cloud.points[i];
        out.points.push_back({p[0] - g[0], p[1] - g[1], p[2] - g[2]});
        out.tags.push_back(cloud.tags[i]);
    }
    return out;
}

std::vector<body::Vec3> guidance_cloud(const ScenePointCloud& cloud,
                                       const body::Translation& gamma_hat, size_t max_points) {
    const auto& g = gamma_hat.gamma;
    std::vector<size_t> kept;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3& p = cloud.points[i];
        if (std::abs(p[0] - g[0]) <= 1.2 && std::abs(p[1] - g[1]) <= 1.2 &&
            std::abs(p[2] - g[2]) <= 1.2)
            kept.push_back(i);
    }
    std::vector<body::Vec3> out;
    const size_t n = std::min(max_points, kept.size());
    out.reserve(n);
    for (size_t k = 0; k < n; ++k) out.push_back(cloud.points[kept[k * kept.size() / n]]);
    return out;
}

Pixel project(const Vec3& p, const CameraModel& cam) {
    if (p[2] <= 1e-6) return {0.0, 0.0, false};
    return {cam.f * p[0] / p[2] + cam.cx, cam.f * p[1] / p[2] + cam.cy, true};
}

VisibilityResult visibility_from_truncation(const std::vector<Vec3>& joints3d,
                                            const CameraModel& cam) {
    if (joints3d.size() != body::kJointCount)
        throw std::invalid_argument("visibility_from_truncation: expected 24 joints");
    VisibilityResult res;
    for (int j = 0; j < body::kJointCount; ++j) {
        const Pixel px = project(joints3d[j], cam);
        const bool in =
            px.visible && px.u >= 0.0 && px.u <= cam.width && px.v >= 0.0 && px.v <= cam.height;
        res.mask.v[j] = in ? 1 : 0;
        if (in) res.keypoints[j] = {px.u, px.v};
    }
    return res;
}

BBoxFeature bbox_feature(const VisibilityResult& vis, const CameraModel& cam) {
    double lo_u = 1e30, hi_u = -1e30, lo_v = 1e30, hi_v = -1e30;
    int n = 0;
    for (int j = 0; j < body::kJointCount; ++j) {
        if (!vis.mask.v[j]) continue;
        lo_u = std::min(lo_u, vis.keypoints[j][0]);
        hi_u = std::max(hi_u, vis.keypoints[j][0]);
        lo_v = std::min(lo_v, vis.keypoints[j][1]);
        hi_v = std::max(hi_v, vis.keypoints[j][1]);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("bbox_feature: no visible keypoints");

    BBoxFeature bb;
    bb.f = cam.f;
    bb.bx = 0.5 * (lo_u + hi_u);
    bb.by = 0.5 * (lo_v + hi_v);
    bb.b = std::max({(hi_u - lo_u) * 1.1, (hi_v - lo_v) * 1.1, 32.0});
    return bb;
}

}  // namespace egopose::scene
