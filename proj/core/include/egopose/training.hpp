// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <string>

#include "egopose/dataset.hpp"
#include "egopose/diffusion.hpp"
#include "egopose/model.hpp"

namespace egopose::train {

// Per-term values of the weighted training objective (already weighted terms
// would hide scale problems, so these are the raw term values; total applies
// the weights).
struct LossReport {
    double simple = 0.0;  // clean-pose reconstruction on rotation matrices
    double l3d = 0.0;     // joint-position error
    double l2d = 0.0;     // reprojection error over visible joints
    double beta = 0.0;    // shape error (head phase)
    double trans = 0.0;   // translation error (head phase)
    double coll = 0.0;    // scene collision score
    double orth = 0.0;    // 6D orthonormality penalty
    double total = 0.0;
};

// Conditioning ingredients for a record: keypoints, visibility, bounding box,
// camera, and the gamma-centered scene crop.
model::ConditionInputs make_condition_inputs(const data::SampleRecord& rec, int crop_points);

// Individual objective terms over a [24,6] clean-pose prediction.
// Mean over joints of the squared Frobenius distance between predicted and
// ground-truth rotation matrices.
ad::Tensor loss_simple(const ad::Tensor& pred, const body::PoseState& gt);
// Mean squared error of the 24 joint positions under the record's shape and
// translation.
ad::Tensor loss_3d(const ad::Tensor& pred, const data::SampleRecord& rec);
// Mean over visible joints of the squared width-normalized reprojection
// error (both pixel coordinates).
ad::Tensor loss_2d(const ad::Tensor& pred, const data::SampleRecord& rec);

// Denoiser objective for one record. The timestep, noise, and condition
// dropout are drawn deterministically from (seed, epoch, index). The
// collision term is weighted zero while epoch < coll_warmup_epochs.
ad::Tensor diffusion_loss(const model::PoseModel& net, const data::SampleRecord& rec,
                          const diff::NoiseSchedule& ns, const cfg::LossWeights& lw,
                          const cfg::TrainConfig& tc, int epoch, uint64_t seed, uint64_t index,
                          LossReport* report = nullptr);

// Translation/shape head objective for one record.
ad::Tensor head_loss(const model::PoseModel& net, const data::SampleRecord& rec,
                     const cfg::ModelConfig& mc, LossReport* report = nullptr);

struct TrainOutcome {
    int head_epochs_run = 0;
    int epochs_run = 0;
    double best_val = 0.0;
    std::string best_checkpoint;  // path of the best-validation checkpoint
    std::string last_checkpoint;
};

// Two-phase training: the translation/shape heads first, then the denoiser
// with ground-truth translation conditioning. Writes per-epoch checkpoints, a
// best-by-validation checkpoint, an append-only metrics log, and a state file
// that makes re-invocation with resume = true continue after the last
// completed epoch. Throws if the objective diverges past
// divergence_threshold or turns non-finite, naming the epoch and batch.
TrainOutcome train(model::PoseModel& net, const data::DatasetSplits& splits,
                   const cfg::ExperimentConfig& cfg, const std::string& out_dir,
                   bool resume = false);

// Mean validation loss with frozen draws (epoch index -1).
double validation_loss(const model::PoseModel& net, const std::vector<data::SampleRecord>& val,
                       const diff::NoiseSchedule& ns, const cfg::ExperimentConfig& cfg);

}  // namespace egopose::train
