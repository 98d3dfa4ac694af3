// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace egopose::cfg {

struct DataConfig {
    int size = 5000;                     // total samples before splitting
    std::vector<std::string> templates = {"floor", "floor+seat", "floor+box+wall"};
    int scene_points = 20000;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    // Camera placement ranges (meters / pixels).
    double depth_min = 1.0, depth_max = 2.6;
    double cam_height_min = 0.8, cam_height_max = 1.6;
    double focal_min = 420.0, focal_max = 580.0;
    double image_width = 640.0, image_height = 480.0;
};

struct ModelConfig {
    int obs_dim = 128;       // observation (2D keypoint) feature width
    int scene_dim = 128;     // local scene feature width
    int temb_dim = 64;       // timestep embedding width
    int pose_embed = 128;    // per-joint pose embedding width
    int gcn_hidden = 128;    // hidden width of the GCN blocks
    int gcn_blocks = 4;      // residual modulated blocks between input/output layers
    int point_hidden = 32;   // per-point hidden width of the scene encoders
    int crop_points = 4096;  // M, fixed crop size fed to the local scene encoder
};

struct ScheduleConfig {
    int steps = 100;               // T
    std::string type = "cosine";   // cosine | linear
};

struct LossWeights {
    double lambda_simple = 0.001;
    double lambda_3d = 0.05;
    double lambda_2d = 0.01;
    double lambda_beta = 0.0005;
    double lambda_coll = 0.0002;
    double lambda_orth = 0.1;
    int coll_warmup_epochs = 3;  // collision loss disabled for the first epochs
};

struct TrainConfig {
    int epochs = 12;
    int batch_size = 12;
    double lr = 3e-4;
    double cond_dropout = 0.05;  // whole-sample observation-feature dropout
    double head_lr = 1e-3;
    int head_epochs = 8;
    double divergence_threshold = 1e3;
};

struct SamplingConfig {
    int n = 5;
    bool guidance = true;
    bool cf_fusion = true;
    double a = 75.0;           // guidance scale
    int guidance_sign = -1;    // -1 descends the collision score (default)
    int sigma_free_steps = 10; // final steps use a * grad without Sigma_t
    bool gt_translation = false;
};

struct EvalConfig {
    std::vector<int> n_list = {5, 10, 20};
    int eval_crop_points = 20000;
    double contact_threshold = 0.02;  // meters
    int max_inputs = 0;               // 0 = whole split
};

struct ExperimentConfig {
    uint64_t seed = 0;
    std::string out_dir = "runs/default";
    std::string dataset_dir = "data/default";
    DataConfig data;
    ModelConfig model;
    ScheduleConfig schedule;
    LossWeights loss;
    TrainConfig train;
    SamplingConfig sampling;
    EvalConfig eval;

    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;
    std::string to_json_string() const;
    static ExperimentConfig from_json_string(const std::string& s);
};

}  // namespace egopose::cfg
