// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include "egopose/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "egopose/rng.hpp"

namespace egopose::data {

using body::Mat3;
using body::Vec3;
using nlohmann::json;

namespace {

Mat3 axis_angle_to_matrix(const Vec3& axis, double angle) {
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (n < 1e-12) return {1, 0, 0, 0, 1, 0, 0, 0, 1};
    const double x = axis[0] / n, y = axis[1] / n, z = axis[2] / n;
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    return {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
            t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
            t * x * z - s * y, t * y * z + s * x, t * z * z + c};
}

// First two columns of R as the 6D row.
void set_joint_rotation(body::PoseState& pose, int j, const Mat3& r) {
    double* row = pose.rot6d.data() + j * 6;
    row[0] = r[0];
    row[1] = r[3];
    row[2] = r[6];
    row[3] = r[1];
    row[4] = r[4];
    row[5] = r[7];
}

void perturb_joint(body::PoseState& pose, int j, RngStream& rng, double sigma) {
    const Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
    const double angle = rng.normal() * sigma;
    set_joint_rotation(pose, j, axis_angle_to_matrix(axis, angle));
}

// Parametric pose library: stand / sit / lean with per-joint noise. Sitting is
// only drawn for scenes with a seat, giving the learnable scene-pose
// correlation.
body::PoseState make_pose(const std::string& kind, RngStream& rng) {
    body::PoseState pose = body::PoseState::identity();

    // Global yaw; the body roughly faces the camera (-z) with spread.
    const double yaw = M_PI + rng.normal() * 0.5;
    set_joint_rotation(pose, 0, axis_angle_to_matrix({0, 1, 0}, yaw));

    if (kind == "sit") {
        const double hip = M_PI / 2.0 + rng.normal() * 0.12;
        const double knee = -M_PI / 2.0 + rng.normal() * 0.12;
        set_joint_rotation(pose, 1, axis_angle_to_matrix({1, 0, 0}, hip));
        set_joint_rotation(pose, 2, axis_angle_to_matrix({1, 0, 0}, hip + rng.normal() * 0.05));
        set_joint_rotation(pose, 4, axis_angle_to_matrix({1, 0, 0}, knee));
        set_joint_rotation(pose, 5, axis_angle_to_matrix({1, 0, 0}, knee + rng.normal() * 0.05));
    } else if (kind == "lean") {
        const double pitch = 0.35 + rng.normal() * 0.1;
        set_joint_rotation(pose, 3, axis_angle_to_matrix({1, 0, 0}, pitch));
        set_joint_rotation(pose, 6, axis_angle_to_matrix({1, 0, 0}, pitch * 0.5));
        perturb_joint(pose, 1, rng, 0.08);
        perturb_joint(pose, 2, rng, 0.08);
    } else {  // stand
        perturb_joint(pose, 1, rng, 0.08);
        perturb_joint(pose, 2, rng, 0.08);
        perturb_joint(pose, 4, rng, 0.08);
        perturb_joint(pose, 5, rng, 0.08);
    }
    // Common upper-body variation.
    for (int j : {3, 6, 9, 12, 15}) perturb_joint(pose, j, rng, 0.06);
    for (int j : {16, 17, 18, 19, 20, 21}) perturb_joint(pose, j, rng, 0.25);
    return pose;
}

// Pelvis height that rests the lowest capsule surface on y = 0.
double grounded_pelvis_height(const body::PoseState& pose, const body::BodyShape& beta) {
    const auto& skel = body::Skeleton::default_human();
    const auto& caps = body::CapsuleParams::default_params();
    const auto joints = body::forward_kinematics(pose, beta, {{0.0, 0.0, 0.0}}, skel);
    double lowest = 1e30;
    for (int j = 0; j < body::kJointCount; ++j) {
        const double r = caps.radius_by_joint[std::max(j, 1)];
        lowest = std::min(lowest, joints[j][1] - r);
    }
    return -lowest;
}

}  // namespace

scene::ScenePointCloud SampleRecord::scene_cloud() const {
    scene::ScenePointCloud cloud = scene::generate_scene(scene_seed, tmpl);
    for (auto& p : cloud.points) {
        p[0] -= cam_pos[0];
        p[1] -= cam_pos[1];
        p[2] -= cam_pos[2];
    }
    return cloud;
}

SampleRecord generate_sample(uint64_t root_seed, uint64_t index, const cfg::DataConfig& dc) {
    RngStream rng(root_seed, "data", index);
    SampleRecord rec;

    const auto& tnames = dc.templates;
    rec.tmpl = scene::parse_template(tnames[rng.uniform_index(tnames.size())]);
    rec.scene_seed = rng.next_u64();

    scene::SceneMeta meta;
    (void)scene::generate_scene(rec.scene_seed, rec.tmpl, &meta, 64);  // layout only

    for (double& b : rec.beta.beta) b = rng.normal() * 0.5;

    // Scene-consistent pose kind.
    const double pick = rng.uniform();
    if (meta.has_seat)
        rec.pose_kind = pick < 0.55 ? "sit" : (pick < 0.85 ? "stand" : "lean");
    else
        rec.pose_kind = pick < 0.7 ? "stand" : "lean";
    rec.theta = make_pose(rec.pose_kind, rng);

    // World placement.
    Vec3 pelvis_world;
    if (rec.pose_kind == "sit") {
        pelvis_world = {meta.seat_center[0] + rng.normal() * 0.03,
                        meta.seat_height + 0.19,
                        meta.seat_center[2] + rng.normal() * 0.03};
    } else {
        pelvis_world = {rng.uniform(-1.0, 1.0), grounded_pelvis_height(rec.theta, rec.beta),
                        rng.uniform(-1.0, 1.0)};
    }

    // Camera draws retry until at least one joint is visible.
    const auto& skel = body::Skeleton::default_human();
    for (int attempt = 0; attempt < 50; ++attempt) {
        rec.camera.f = rng.uniform(dc.focal_min, dc.focal_max);
        rec.camera.width = dc.image_width;
        rec.camera.height = dc.image_height;
        rec.camera.cx = dc.image_width / 2.0 + rng.uniform(-20.0, 20.0);
        rec.camera.cy = dc.image_height / 2.0 + rng.uniform(-20.0, 20.0);
        const double depth = rng.uniform(dc.depth_min, dc.depth_max);
        rec.cam_pos = {pelvis_world[0] + rng.uniform(-0.6, 0.6),
                       rng.uniform(dc.cam_height_min, dc.cam_height_max),
                       pelvis_world[2] - depth};
        rec.gamma.gamma = {pelvis_world[0] - rec.cam_pos[0], pelvis_world[1] - rec.cam_pos[1],
                           pelvis_world[2] - rec.cam_pos[2]};

        const auto joints = body::forward_kinematics(rec.theta, rec.beta, rec.gamma, skel);
        const auto vis = scene::visibility_from_truncation(joints, rec.camera);
        if (vis.mask.visible_count() > 0) {
            rec.vis = vis.mask;
            rec.keypoints = vis.keypoints;
            rec.bbox = scene::bbox_feature(vis, rec.camera);
            return rec;
        }
    }
    rec.vis = scene::VisibilityMask{};  // fully truncated; caller filters
    return rec;
}

DatasetSplits generate_dataset(uint64_t root_seed, const cfg::DataConfig& dc) {
    if (dc.size <= 0) throw std::invalid_argument("generate_dataset: size must be positive");
    std::vector<SampleRecord> all;
    all.reserve(dc.size);
    uint64_t index = 0;
    while (all.size() < static_cast<size_t>(dc.size)) {
        SampleRecord rec = generate_sample(root_seed, index++, dc);
        if (!rec.vis.fully_truncated()) all.push_back(std::move(rec));
    }
    const size_t n = all.size();
    const size_t n_test = static_cast<size_t>(n * dc.test_fraction);
    const size_t n_val = static_cast<size_t>(n * dc.val_fraction);
    const size_t n_train = n - n_val - n_test;

    DatasetSplits s;
    s.train.assign(all.begin(), all.begin() + n_train);
    s.val.assign(all.begin() + n_train, all.begin() + n_train + n_val);
    s.test.assign(all.begin() + n_train + n_val, all.end());
    return s;
}

std::string record_to_json(const SampleRecord& rec) {
    json j;
    j["scene_seed"] = rec.scene_seed;
    j["template"] = scene::template_name(rec.tmpl);
    j["cam_pos"] = rec.cam_pos;
    j["camera"] = {{"f", rec.camera.f},
                   {"cx", rec.camera.cx},
                   {"cy", rec.camera.cy},
                   {"width", rec.camera.width},
                   {"height", rec.camera.height}};
    j["gamma"] = rec.gamma.gamma;
    j["beta"] = rec.beta.beta;
    j["theta"] = rec.theta.rot6d;
    j["vis"] = rec.vis.v;
    j["keypoints"] = rec.keypoints;
    j["bbox"] = {{"bx", rec.bbox.bx}, {"by", rec.bbox.by}, {"b", rec.bbox.b}, {"f", rec.bbox.f}};
    j["pose_kind"] = rec.pose_kind;
    return j.dump();
}

SampleRecord record_from_json(const std::string& line) {
    const json j = json::parse(line);
    SampleRecord rec;
    rec.scene_seed = j.at("scene_seed").get<uint64_t>();
    rec.tmpl = scene::parse_template(j.at("template").get<std::string>());
    rec.cam_pos = j.at("cam_pos").get<Vec3>();
    const auto& c = j.at("camera");
    rec.camera = {c.at("f").get<double>(), c.at("cx").get<double>(), c.at("cy").get<double>(),
                  c.at("width").get<double>(), c.at("height").get<double>()};
    rec.gamma.gamma = j.at("gamma").get<Vec3>();
    rec.beta.beta = j.at("beta").get<std::array<double, body::kShapeDim>>();
    rec.theta.rot6d = j.at("theta").get<std::vector<double>>();
    rec.vis.v = j.at("vis").get<std::array<int, body::kJointCount>>();
    rec.keypoints =
        j.at("keypoints").get<std::array<std::array<double, 2>, body::kJointCount>>();
    const auto& b = j.at("bbox");
    rec.bbox = {b.at("bx").get<double>(), b.at("by").get<double>(), b.at("b").get<double>(),
                b.at("f").get<double>()};
    rec.pose_kind = j.at("pose_kind").get<std::string>();
    return rec;
}

void write_records(const std::string& path, const std::vector<SampleRecord>& recs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_records: cannot write " + path);
    for (const auto& r : recs) out << record_to_json(r) << "\n";
}

std::vector<SampleRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_records: cannot open " + path);
    std::vector<SampleRecord> recs;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) recs.push_back(record_from_json(line));
    return recs;
}

uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("file_checksum: cannot open " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
    return h;
}

void write_dataset(const std::string& dir, const DatasetSplits& splits, uint64_t root_seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_records(dir + "/train.jsonl", splits.train);
    write_records(dir + "/val.jsonl", splits.val);
    write_records(dir + "/test.jsonl", splits.test);
    json manifest{{"root_seed", root_seed},
                  {"counts",
                   {{"train", splits.train.size()},
                    {"val", splits.val.size()},
                    {"test", splits.test.size()}}},
                  {"checksums",
                   {{"train.jsonl", file_checksum(dir + "/train.jsonl")},
                    {"val.jsonl", file_checksum(dir + "/val.jsonl")},
                    {"test.jsonl", file_checksum(dir + "/test.jsonl")}}}};
    std::ofstream out(dir + "/manifest.json");
    out << manifest.dump(2) << "\n";
}

}  // namespace egopose::data
