// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "egopose/dataset.hpp"

using namespace egopose;
namespace fs = std::filesystem;

namespace {

cfg::DataConfig small_config() {
    cfg::DataConfig dc;
    dc.size = 30;
    dc.scene_points = 4000;
    return dc;
}

}  // namespace

TEST_CASE("generated samples are never fully truncated") {
    auto dc = small_config();
    for (uint64_t i = 0; i < 10; ++i) {
        auto rec = data::generate_sample(99, i, dc);
        if (rec.vis.fully_truncated()) continue;  // filtered by generate_dataset
        CHECK(rec.vis.visible_count() > 0);
        CHECK(rec.gamma.gamma[2] > 0.0);  // body in front of the camera
    }
    auto splits = data::generate_dataset(99, dc);
    for (const auto* split : {&splits.train, &splits.val, &splits.test})
        for (const auto& rec : *split) CHECK(rec.vis.visible_count() > 0);
}

TEST_CASE("split sizes follow the configured fractions") {
    auto splits = data::generate_dataset(3, small_config());
    CHECK(splits.val.size() == 3);
    CHECK(splits.test.size() == 3);
    CHECK(splits.train.size() == 24);
}

TEST_CASE("record JSON round-trips bit exactly") {
    auto dc = small_config();
    auto rec = data::generate_sample(5, 0, dc);
    const std::string line = data::record_to_json(rec);
    auto back = data::record_from_json(line);
    CHECK(data::record_to_json(back) == line);
    CHECK(back.theta.rot6d == rec.theta.rot6d);
    CHECK(back.gamma.gamma == rec.gamma.gamma);
    CHECK(back.scene_seed == rec.scene_seed);
    CHECK(back.vis.v == rec.vis.v);
    CHECK(back.keypoints == rec.keypoints);
    CHECK(back.camera.f == rec.camera.f);
}

TEST_CASE("scene cloud regenerates deterministically in the camera frame") {
    auto dc = small_config();
    auto rec = data::generate_sample(5, 1, dc);
    auto a = rec.scene_cloud();
    auto b = rec.scene_cloud();
    CHECK(a.points == b.points);
    // World floor at y=0 appears at -cam_pos.y in the camera frame.
    bool found_floor = false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a.tags[i] == scene::SurfaceTag::floor) {
            CHECK(a.points[i][1] == doctest::Approx(-rec.cam_pos[1]).epsilon(0.05));
            found_floor = true;
            break;
        }
    CHECK(found_floor);
}

TEST_CASE("dataset files and manifest are deterministic in the seed") {
    const std::string d1 = "/tmp/egopose_ds_a", d2 = "/tmp/egopose_ds_b";
    fs::remove_all(d1);
    fs::remove_all(d2);
    auto dc = small_config();
    data::write_dataset(d1, data::generate_dataset(11, dc), 11);
    data::write_dataset(d2, data::generate_dataset(11, dc), 11);
    for (const char* name : {"train.jsonl", "val.jsonl", "test.jsonl", "manifest.json"}) {
        std::ifstream f1(d1 + "/" + name), f2(d2 + "/" + name);
        REQUIRE(f1.good());
        std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(s1 == s2);
    }
    auto back = data::read_records(d1 + "/val.jsonl");
    auto splits = data::generate_dataset(11, dc);
    REQUIRE(back.size() == splits.val.size());
    CHECK(data::record_to_json(back[0]) == data::record_to_json(splits.val[0]));
}

TEST_CASE("size zero is rejected") {
    cfg::DataConfig dc = small_config();
    dc.size = 0;
    CHECK_THROWS_AS(data::generate_dataset(1, dc), std::invalid_argument);
}

TEST_CASE("config round-trips through JSON") {
    cfg::ExperimentConfig c;
    c.seed = 1234;
    c.schedule.steps = 17;
    c.sampling.a = 3.5;
    c.data.templates = {"floor"};
    auto back = cfg::ExperimentConfig::from_json_string(c.to_json_string());
    CHECK(back.seed == 1234);
    CHECK(back.schedule.steps == 17);
    CHECK(back.sampling.a == 3.5);
    CHECK(back.data.templates == std::vector<std::string>{"floor"});
    CHECK(back.to_json_string() == c.to_json_string());
}
