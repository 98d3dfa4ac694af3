// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include "egopose/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace egopose::cfg {

using nlohmann::json;

namespace {

// Read a field if present, keeping the default otherwise; config files may be
// partial overrides.
template <class T>
void get(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

static void from_json_obj(const json& j, DataConfig& c) {
    get(j, "size", c.size);
    get(j, "templates", c.templates);
    get(j, "scene_points", c.scene_points);
    get(j, "val_fraction", c.val_fraction);
    get(j, "test_fraction", c.test_fraction);
    get(j, "depth_min", c.depth_min);
    get(j, "depth_max", c.depth_max);
    get(j, "cam_height_min", c.cam_height_min);
    get(j, "cam_height_max", c.cam_height_max);
    get(j, "focal_min", c.focal_min);
    get(j, "focal_max", c.focal_max);
    get(j, "image_width", c.image_width);
    get(j, "image_height", c.image_height);
}

static json to_json_obj(const DataConfig& c) {
    return {{"size", c.size},
            {"templates", c.templates},
            {"scene_points", c.scene_points},
            {"val_fraction", c.val_fraction},
            {"test_fraction", c.test_fraction},
            {"depth_min", c.depth_min},
            {"depth_max", c.depth_max},
            {"cam_height_min", c.cam_height_min},
            {"cam_height_max", c.cam_height_max},
            {"focal_min", c.focal_min},
            {"focal_max", c.focal_max},
            {"image_width", c.image_width},
            {"image_height", c.image_height}};
}

static void from_json_obj(const json& j, ModelConfig& c) {
    get(j, "obs_dim", c.obs_dim);
    get(j, "scene_dim", c.scene_dim);
    get(j, "temb_dim", c.temb_dim);
    get(j, "pose_embed", c.pose_embed);
    get(j, "gcn_hidden", c.gcn_hidden);
    get(j, "gcn_blocks", c.gcn_blocks);
    get(j, "point_hidden", c.point_hidden);
    get(j, "crop_points", c.crop_points);
}

static json to_json_obj(const ModelConfig& c) {
    return {{"obs_dim", c.obs_dim},       {"scene_dim", c.scene_dim},
            {"temb_dim", c.temb_dim},     {"pose_embed", c.pose_embed},
            {"gcn_hidden", c.gcn_hidden}, {"gcn_blocks", c.gcn_blocks},
            {"point_hidden", c.point_hidden}, {"crop_points", c.crop_points}};
}

static void from_json_obj(const json& j, ScheduleConfig& c) {
    get(j, "steps", c.steps);
    get(j, "type", c.type);
}

static json to_json_obj(const ScheduleConfig& c) {
    return {{"steps", c.steps}, {"type", c.type}};
}

static void from_json_obj(const json& j, LossWeights& c) {
    get(j, "lambda_simple", c.lambda_simple);
    get(j, "lambda_3d", c.lambda_3d);
    get(j, "lambda_2d", c.lambda_2d);
    get(j, "lambda_beta", c.lambda_beta);
    get(j, "lambda_coll", c.lambda_coll);
    get(j, "lambda_orth", c.lambda_orth);
    get(j, "coll_warmup_epochs", c.coll_warmup_epochs);
}

static json to_json_obj(const LossWeights& c) {
    return {{"lambda_simple", c.lambda_simple}, {"lambda_3d", c.lambda_3d},
            {"lambda_2d", c.lambda_2d},         {"lambda_beta", c.lambda_beta},
            {"lambda_coll", c.lambda_coll},     {"lambda_orth", c.lambda_orth},
            {"coll_warmup_epochs", c.coll_warmup_epochs}};
}

static void from_json_obj(const json& j, TrainConfig& c) {
    get(j, "epochs", c.epochs);
    get(j, "batch_size", c.batch_size);
    get(j, "lr", c.lr);
    get(j, "cond_dropout", c.cond_dropout);
    get(j, "head_lr", c.head_lr);
    get(j, "head_epochs", c.head_epochs);
    get(j, "divergence_threshold", c.divergence_threshold);
    if (c.cond_dropout < 0.0 || c.cond_dropout > 1.0)
        throw std::invalid_argument("config: cond_dropout must be in [0,1]");
}

static json to_json_obj(const TrainConfig& c) {
    return {{"epochs", c.epochs},           {"batch_size", c.batch_size},
            {"lr", c.lr},                   {"cond_dropout", c.cond_dropout},
            {"head_lr", c.head_lr},         {"head_epochs", c.head_epochs},
            {"divergence_threshold", c.divergence_threshold}};
}

static void from_json_obj(const json& j, SamplingConfig& c) {
    get(j, "n", c.n);
    get(j, "guidance", c.guidance);
    get(j, "cf_fusion", c.cf_fusion);
    get(j, "a", c.a);
    get(j, "guidance_sign", c.guidance_sign);
    get(j, "sigma_free_steps", c.sigma_free_steps);
    get(j, "gt_translation", c.gt_translation);
}

static json to_json_obj(const SamplingConfig& c) {
    return {{"n", c.n},
            {"guidance", c.guidance},
            {"cf_fusion", c.cf_fusion},
            {"a", c.a},
            {"guidance_sign", c.guidance_sign},
            {"sigma_free_steps", c.sigma_free_steps},
            {"gt_translation", c.gt_translation}};
}

static void from_json_obj(const json& j, EvalConfig& c) {
    get(j, "n_list", c.n_list);
    get(j, "eval_crop_points", c.eval_crop_points);
    get(j, "contact_threshold", c.contact_threshold);
    get(j, "max_inputs", c.max_inputs);
}

static json to_json_obj(const EvalConfig& c) {
    return {{"n_list", c.n_list},
            {"eval_crop_points", c.eval_crop_points},
            {"contact_threshold", c.contact_threshold},
            {"max_inputs", c.max_inputs}};
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& s) {
    const json j = json::parse(s);
    ExperimentConfig c;
    get(j, "seed", c.seed);
    get(j, "out_dir", c.out_dir);
    get(j, "dataset_dir", c.dataset_dir);
    if (j.contains("data")) from_json_obj(j.at("data"), c.data);
    if (j.contains("model")) from_json_obj(j.at("model"), c.model);
    if (j.contains("schedule")) from_json_obj(j.at("schedule"), c.schedule);
    if (j.contains("loss")) from_json_obj(j.at("loss"), c.loss);
    if (j.contains("train")) from_json_obj(j.at("train"), c.train);
    if (j.contains("sampling")) from_json_obj(j.at("sampling"), c.sampling);
    if (j.contains("eval")) from_json_obj(j.at("eval"), c.eval);
    return c;
}

std::string ExperimentConfig::to_json_string() const {
    json j{{"seed", seed},
           {"out_dir", out_dir},
           {"dataset_dir", dataset_dir},
           {"data", to_json_obj(data)},
           {"model", to_json_obj(model)},
           {"schedule", to_json_obj(schedule)},
           {"loss", to_json_obj(loss)},
           {"train", to_json_obj(train)},
           {"sampling", to_json_obj(sampling)},
           {"eval", to_json_obj(eval)}};
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_string(s);
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << to_json_string() << "\n";
}

}  // namespace egopose::cfg
