// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "egopose/config.hpp"
#include "egopose/scene.hpp"
#include "egopose/tensor.hpp"

namespace egopose::model {

// Affine map y = xW + b over row vectors.
struct Linear {
    ad::Tensor W;  // [in, out]
    ad::Tensor b;  // [out]

    ad::Tensor forward(const ad::Tensor& x) const;
};

// Per-sample conditioning ingredients (camera frame throughout).
struct ConditionInputs {
    std::array<std::array<double, 2>, body::kJointCount> keypoints{};
    std::array<int, body::kJointCount> vis{};
    scene::BBoxFeature bbox;
    scene::CameraModel camera;
    scene::ScenePointCloud crop;  // cropped and gamma-centered point cloud
};

// Scene-conditioned articulated-pose model: point-cloud scene encoder,
// keypoint observation encoder, translation/shape heads, and a modulated
// graph-convolutional denoiser over the 24-joint skeleton. All parameters are
// owned here under stable names; initialization is deterministic in the seed.
class PoseModel {
public:
    PoseModel(const cfg::ModelConfig& mc, uint64_t seed);

    // [scene_dim] max-pooled point feature; an empty cloud encodes to zeros.
    ad::Tensor encode_scene(const scene::ScenePointCloud& crop) const;
    // [24, obs_dim] per-joint keypoint features. Invisible joints contribute
    // zero rows; mask_obs zeroes the whole observation channel (condition
    // dropout / the observation-free guidance branch).
    ad::Tensor encode_obs(const ConditionInputs& in, bool mask_obs) const;
    // [temb_dim] sinusoidal embedding of the diffusion step, passed through a
    // small MLP.
    ad::Tensor timestep_embedding(int t) const;

    // Per-joint condition [24, condition_dim()]: obs feature, shared scene
    // feature, estimated pelvis, normalized bounding box, normalized
    // intrinsics, timestep embedding.
    ad::Tensor build_condition(const ConditionInputs& in, const body::Vec3& gamma_hat, int t,
                               bool mask_obs) const;
    // Sampler split of build_condition: the t-independent columns, completed
    // per step with a timestep embedding. complete_condition(static, t) equals
    // build_condition(..., t, ...) column-for-column.
    ad::Tensor build_condition_static(const ConditionInputs& in, const body::Vec3& gamma_hat,
                                      bool mask_obs) const;
    ad::Tensor complete_condition(const ad::Tensor& static_part, int t) const;
    size_t condition_dim() const;

    // Camera-frame pelvis estimate [3] and shape estimate [10].
    ad::Tensor predict_translation(const ConditionInputs& in) const;
    ad::Tensor predict_shape(const ConditionInputs& in) const;

    // Denoiser forward. x is [batch*24, 6] noisy pose rows, cond is
    // [batch*24, condition_dim()]; returns the clean-pose estimate, same shape
    // as x. Samples in the batch do not interact.
    ad::Tensor denoise(const ad::Tensor& x, const ad::Tensor& cond, size_t batch,
                       double skip_scale = 0.0) const;

    std::vector<std::pair<std::string, ad::Tensor>>& params() { return params_; }
    const std::vector<std::pair<std::string, ad::Tensor>>& params() const { return params_; }
    ad::Tensor param(const std::string& name) const;  // throws on unknown name

    // Binary checkpoint; round-trips every parameter bit-exactly.
    void save(const std::string& path) const;
    void load(const std::string& path);  // throws on magic/shape mismatch

    const cfg::ModelConfig& config() const { return mc_; }

private:
    // bias_init nudges relu pre-activations away from the kink for the
    // exactly-zero input rows produced by masked/invisible slots.
    Linear make_linear(size_t in, size_t out, const std::string& name, RngStream& rng,
                       bool zero_init = false, double bias_init = 0.0);
    ad::Tensor make_param(const ad::Shape& s, const std::string& name, RngStream& rng,
                          double stddev);
    // Signed affinity (skeleton structure plus learned delta), rows normalized
    // by their absolute sums.
    ad::Tensor affinity() const;
    // One modulated graph convolution: per-joint channel modulation (stored as
    // a delta around 1) on the transformed features, then affinity
    // aggregation within each sample's 24-joint block.
    ad::Tensor gcn_layer(const ad::Tensor& h, const Linear& lin, const ad::Tensor& mod,
                         size_t batch) const;

    cfg::ModelConfig mc_;
    std::vector<std::pair<std::string, ad::Tensor>> params_;

    // scene encoder
    Linear scene_l1_, scene_l2_, scene_l3_;
    // observation encoder
    Linear obs_l1_, obs_l2_;
    // timestep MLP
    Linear temb_l1_, temb_l2_;
    // heads
    Linear trans_l1_, trans_l2_, shape_l1_, shape_l2_;
    // denoiser
    Linear pose_embed_;
    Linear gcn_in_;
    std::vector<Linear> gcn_blocks_;
    Linear gcn_out_;
    std::vector<ad::Tensor> mods_;  // one [24, out] modulation per GCN layer
    ad::Tensor adj_delta_;          // learned affinity delta [24, 24]
    std::vector<double> adj_base_;  // degree-normalized skeleton adjacency
};

// Flattens per-sample [24,6] pose rows into the [batch*24,6] layout used by
// PoseModel::denoise.
ad::Tensor stack_pose_batch(const std::vector<ad::Tensor>& poses);

}  // namespace egopose::model
