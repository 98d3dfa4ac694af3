// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include <doctest.h>

#include <cmath>

#include "egopose/scene.hpp"

using namespace egopose;
using body::Vec3;

TEST_CASE("floor-only scene lies within the floor jitter band") {
    auto cloud = scene::generate_scene(1, scene::SceneTemplate::floor);
    REQUIRE(cloud.size() == 20000);
    for (const auto& p : cloud.points) {
        CHECK(p[1] >= -0.005);
        CHECK(p[1] <= 0.005);
    }
    for (auto t : cloud.tags) CHECK(t == scene::SurfaceTag::floor);
}

TEST_CASE("seat-tagged points lie in the configured seat cuboid") {
    scene::SceneMeta meta;
    auto cloud = scene::generate_scene(7, scene::SceneTemplate::floor_seat, &meta);
    REQUIRE(meta.has_seat);
    int n_seat = 0;
    const double eps = 1e-9;
    for (size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.tags[i] != scene::SurfaceTag::seat) continue;
        ++n_seat;
        const auto& p = cloud.points[i];
        CHECK(std::abs(p[0] - meta.seat_center[0]) <= meta.seat_size / 2 + eps);
        CHECK(std::abs(p[2] - meta.seat_center[2]) <= meta.seat_size / 2 + eps);
        CHECK(p[1] >= -eps);
        CHECK(p[1] <= meta.seat_height + eps);
    }
    CHECK(n_seat > 0);
}

TEST_CASE("scene generation is deterministic in the seed") {
    auto a = scene::generate_scene(42, scene::SceneTemplate::floor_box_wall);
    auto b = scene::generate_scene(42, scene::SceneTemplate::floor_box_wall);
    CHECK(a.points == b.points);
    CHECK(a.tags == b.tags);
    auto c = scene::generate_scene(43, scene::SceneTemplate::floor_box_wall);
    CHECK(a.points != c.points);
}

TEST_CASE("template names round-trip and unknown names throw") {
    for (auto t : {scene::SceneTemplate::floor, scene::SceneTemplate::floor_seat,
                   scene::SceneTemplate::floor_box_wall})
        CHECK(scene::parse_template(scene::template_name(t)) == t);
    CHECK_THROWS(scene::parse_template("garden"));
}

TEST_CASE("crop keeps and recenters points inside the 2x2 m window") {
    scene::ScenePointCloud cloud;
    body::Translation g;
    g.gamma = {0.3, 1.1, 0.2};
    cloud.points = {{g.gamma[0] + 0.5, 0.0, g.gamma[2] + 0.5},   // kept
                    {g.gamma[0] + 1.5, 0.0, g.gamma[2]}};        // discarded
    cloud.tags = {scene::SurfaceTag::floor, scene::SurfaceTag::floor};
    auto crop = scene::crop_scene(cloud, g, 4);
    REQUIRE(crop.size() == 4);  // cyclic padding of the single kept point
    for (size_t i = 0; i < crop.size(); ++i) {
        CHECK(crop.points[i][0] == doctest::Approx(0.5));
        CHECK(crop.points[i][1] == doctest::Approx(-g.gamma[1]));
        CHECK(crop.points[i][2] == doctest::Approx(0.5));
    }
}

TEST_CASE("crop of a full scene yields exactly the configured point count") {
    auto cloud = scene::generate_scene(5, scene::SceneTemplate::floor_seat);
    body::Translation g;
    g.gamma = {0.0, 0.0, 0.0};
    auto crop = scene::crop_scene(cloud, g, 4096);
    CHECK(crop.size() == 4096);
    CHECK_FALSE(crop.empty_flagged);
}

TEST_CASE("empty crop is flagged") {
    scene::ScenePointCloud cloud;
    cloud.points = {{10, 0, 10}};
    cloud.tags = {scene::SurfaceTag::floor};
    body::Translation g;
    g.gamma = {0, 0, 0};
    auto crop = scene::crop_scene(cloud, g, 16);
    CHECK(crop.empty_flagged);
    CHECK(crop.size() == 0);
}

TEST_CASE("crop throws on a non-finite center") {
    scene::ScenePointCloud cloud;
    cloud.points = {{0, 0, 0}};
    cloud.tags = {scene::SurfaceTag::floor};
    body::Translation g;
    g.gamma = {std::nan(""), 0, 0};
    CHECK_THROWS(scene::crop_scene(cloud, g, 16));
}

TEST_CASE("pinhole projection oracles") {
    scene::CameraModel cam;  // f=500, c=(320,240)
    auto p0 = scene::project({0, 0, 2}, cam);
    CHECK(p0.visible);
    CHECK(p0.u == doctest::Approx(320.0));
    CHECK(p0.v == doctest::Approx(240.0));
    auto p1 = scene::project({1, 0, 2}, cam);
    CHECK(p1.u == doctest::Approx(570.0));
    CHECK(p1.v == doctest::Approx(240.0));
    auto behind = scene::project({0, 0, -1}, cam);
    CHECK_FALSE(behind.visible);
}

TEST_CASE("all joints in frame gives an all-ones mask") {
    scene::CameraModel cam;
    std::vector<Vec3> joints(body::kJointCount);
    RngStream rng(2, "vis-pts");
    for (auto& j : joints) j = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 2.0};
    auto vis = scene::visibility_from_truncation(joints, cam);
    CHECK(vis.mask.visible_count() == body::kJointCount);
    for (int j = 0; j < body::kJointCount; ++j) {
        auto px = scene::project(joints[j], cam);
        CHECK(vis.keypoints[j][0] == doctest::Approx(px.u));
        CHECK(vis.keypoints[j][1] == doctest::Approx(px.v));
    }
}

TEST_CASE("a close-up camera truncates the lower body") {
    scene::CameraModel cam;
    std::vector<Vec3> joints(body::kJointCount);
    // Upper-body joints near the axis; leg-chain joints far below the frame.
    const std::array<int, 8> legs = {0, 1, 2, 4, 5, 7, 8, 10};
    for (int j = 0; j < body::kJointCount; ++j) joints[j] = {0.0, 0.0, 1.0};
    for (int j : legs) joints[j] = {0.0, 2.0, 1.0};  // v = 500*2 + 240, below the frame
    auto vis = scene::visibility_from_truncation(joints, cam);
    for (int j : legs) {
        CHECK(vis.mask.v[j] == 0);
        CHECK(vis.keypoints[j][0] == 0.0);  // invisible rows are zero-filled
        CHECK(vis.keypoints[j][1] == 0.0);
    }
    CHECK(vis.mask.visible_count() == body::kJointCount - 8);
}

TEST_CASE("no visible joint flags the sample fully truncated") {
    scene::CameraModel cam;
    std::vector<Vec3> joints(body::kJointCount, Vec3{0, 0, -1.0});
    auto vis = scene::visibility_from_truncation(joints, cam);
    CHECK(vis.mask.visible_count() == 0);
    CHECK(vis.mask.fully_truncated());
}

TEST_CASE("bbox feature from keypoints spanning (100,100)-(300,300)") {
    scene::CameraModel cam;
    scene::VisibilityResult vis;
    vis.mask.v[0] = 1;
    vis.keypoints[0] = {100, 100};
    vis.mask.v[1] = 1;
    vis.keypoints[1] = {300, 300};
    auto bb = scene::bbox_feature(vis, cam);
    auto n = bb.normalized();
    CHECK(n[0] == doctest::Approx(0.4));
    CHECK(n[1] == doctest::Approx(0.4));
    CHECK(n[2] == doctest::Approx(0.44));
}

TEST_CASE("single keypoint falls back to the 32 px minimum box") {
    scene::CameraModel cam;
    scene::VisibilityResult vis;
    vis.mask.v[3] = 1;
    vis.keypoints[3] = {200, 150};
    auto bb = scene::bbox_feature(vis, cam);
    CHECK(bb.normalized()[2] == doctest::Approx(32.0 / cam.f));
}

TEST_CASE("doubling f halves the normalized box") {
    scene::CameraModel cam;
    scene::VisibilityResult vis;
    vis.mask.v[0] = 1;
    vis.keypoints[0] = {100, 100};
    vis.mask.v[1] = 1;
    vis.keypoints[1] = {300, 300};
    auto b1 = scene::bbox_feature(vis, cam).normalized();
    cam.f *= 2.0;
    auto b2 = scene::bbox_feature(vis, cam).normalized();
    for (int k = 0; k < 3; ++k) CHECK(b2[k] == doctest::Approx(b1[k] / 2.0));
}

TEST_CASE("bbox with no visible joints throws") {
    scene::CameraModel cam;
    scene::VisibilityResult vis;
    CHECK_THROWS(scene::bbox_feature(vis, cam));
}
