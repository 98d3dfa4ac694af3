// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "egopose/config.hpp"
#include "egopose/scene.hpp"

namespace egopose::data {

// One training/evaluation record. Scene geometry is regenerated on demand
// from (scene_seed, template); every stored coordinate is in the camera frame
// (the camera has identity rotation, so frames differ by cam_pos only).
struct SampleRecord {
    uint64_t scene_seed = 0;
    scene::SceneTemplate tmpl = scene::SceneTemplate::floor;
    body::Vec3 cam_pos{0, 0, 0};  // world position of the camera
    scene::CameraModel camera;
    body::Translation gamma;      // ground-truth pelvis, camera frame
    body::BodyShape beta;
    body::PoseState theta;        // ground-truth pose, 6D rows
    scene::VisibilityMask vis;
    std::array<std::array<double, 2>, body::kJointCount> keypoints{};  // J_est
    scene::BBoxFeature bbox;
    std::string pose_kind;        // stand | sit | lean

    // Scene point cloud in this record's camera frame.
    scene::ScenePointCloud scene_cloud() const;
};

// Deterministic per-index sample generation; resamples the camera a bounded
// number of times to avoid fully truncated records.
SampleRecord generate_sample(uint64_t root_seed, uint64_t index, const cfg::DataConfig& dc);

struct DatasetSplits {
    std::vector<SampleRecord> train, val, test;
};

DatasetSplits generate_dataset(uint64_t root_seed, const cfg::DataConfig& dc);

// Line-delimited JSON, one record per line; round-trips bit-exactly.
void write_records(const std::string& path, const std::vector<SampleRecord>& recs);
std::vector<SampleRecord> read_records(const std::string& path);

std::string record_to_json(const SampleRecord& rec);
SampleRecord record_from_json(const std::string& line);

// Writes train/val/test files plus a manifest with per-file checksums.
void write_dataset(const std::string& dir, const DatasetSplits& splits, uint64_t root_seed);
uint64_t file_checksum(const std::string& path);

}  // namespace egopose::data
