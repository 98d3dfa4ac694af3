// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "egopose/body.hpp"

namespace egopose::scene {

using body::Vec3;

enum class SurfaceTag : uint8_t { floor = 0, seat = 1, wall = 2, clutter = 3 };

struct ScenePointCloud {
    std::vector<Vec3> points;          // meters
    std::vector<SurfaceTag> tags;      // one per point
    bool empty_flagged = false;        // set by an empty crop

    size_t size() const { return points.size(); }
};

struct CameraModel {
    double f = 500.0;        // focal length, pixels
    double cx = 320.0, cy = 240.0;
    double width = 640.0, height = 480.0;
};

struct VisibilityMask {
    std::array<int, body::kJointCount> v{};  // 1 = joint projects inside frame

    int visible_count() const {
        int n = 0;
        for (int x : v) n += x;
        return n;
    }
    bool fully_truncated() const { return visible_count() == 0; }
};

// Normalized bounding-box triple (bx, by, b) / f.
struct BBoxFeature {
    double bx = 0.0, by = 0.0, b = 0.0;  // pixels, before normalization
    double f = 1.0;
    std::array<double, 3> normalized() const { return {bx / f, by / f, b / f}; }
};

enum class SceneTemplate { floor, floor_seat, floor_box_wall };

SceneTemplate parse_template(const std::string& name);  // throws on unknown name
std::string template_name(SceneTemplate t);

// Layout parameters drawn during generation; consumed by the pose library so
// poses correlate with scene structure (seat height <-> sitting).
struct SceneMeta {
    SceneTemplate tmpl = SceneTemplate::floor;
    uint64_t seed = 0;
    bool has_seat = false;
    Vec3 seat_center{0, 0, 0};  // center of the seat top surface
    double seat_size = 0.5;
    double seat_height = 0.45;
    bool has_clutter = false;
    Vec3 clutter_center{0, 0, 0};
    double clutter_size = 0.4;
};

// Deterministic procedural scene: 20000 points uniformly sampled on the
// template's surfaces, floor at y = 0, world frame.
ScenePointCloud generate_scene(uint64_t seed, SceneTemplate tmpl, SceneMeta* meta_out = nullptr,
                               size_t total_points = 20000);

// Select points whose horizontal (x,z) coordinates lie within +-1 m of
// gamma_hat, shift everything by -gamma_hat, and pad/subsample to exactly
// fixed_count points (deterministic stride subsampling, cyclic padding).
// An empty crop returns an empty-flagged cloud.
ScenePointCloud crop_scene(const ScenePointCloud& cloud, const body::Translation& gamma_hat,
                           size_t fixed_count, double half_extent = 1.0);

// Scene points used for collision guidance during sampling: every point
// within a +-1.2 m box of gamma_hat (all three axes, original camera-frame
// coordinates), evenly strided down to at most max_points so every nearby
// structure stays proportionally represented.
std::vector<body::Vec3> guidance_cloud(const ScenePointCloud& cloud,
                                       const body::Translation& gamma_hat,
                                       size_t max_points = 1024);

struct Pixel {
    double u = 0.0, v = 0.0;
    bool visible = false;  // false for non-positive depth
};

Pixel project(const Vec3& p, const CameraModel& cam);

struct VisibilityResult {
    VisibilityMask mask;
    // 2D keypoints for visible joints, zero-filled rows for invisible ones.
    std::array<std::array<double, 2>, body::kJointCount> keypoints{};
};

// v^j = 1 iff the joint projects inside [0,width]x[0,height] with positive
// depth. Frustum truncation only; no occlusion raycasting.
VisibilityResult visibility_from_truncation(const std::vector<Vec3>& joints3d,
                                            const CameraModel& cam);

// Axis-aligned bounds of the visible keypoints expanded by 10%; b is the max
// side, floored at a 32 px minimum box. Throws when no joint is visible.
BBoxFeature bbox_feature(const VisibilityResult& vis, const CameraModel& cam);

}  // namespace egopose::scene
