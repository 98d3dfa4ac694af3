// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "egopose/dataset.hpp"
#include "egopose/diffusion.hpp"

namespace egopose::metrics {

using body::Vec3;

// Joint-position errors in meters over the selected joints (visible ones for
// the aligned variants). Throws when the selection is empty.
double mpjpe_global(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                    const scene::VisibilityMask& vis);
// Pelvis-relative (joint 0 subtracted from both skeletons).
double mpjpe_pelvis(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                    const scene::VisibilityMask& vis);
// Similarity-aligned (rotation, scale, translation fit on the visible joints).
// Requires at least 3 visible, non-collinear joints; throws otherwise.
double mpjpe_procrustes(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                        const scene::VisibilityMask& vis);

// Best pelvis-aligned error over the invisible joints across a sample set.
// Returns 0 when every joint is visible. Non-increasing in the number of
// samples by construction.
double min_of_n_mpjpe(const std::vector<std::vector<Vec3>>& preds, const std::vector<Vec3>& gt,
                      const scene::VisibilityMask& vis);

// Fraction of scene points strictly inside the body capsules.
double collision_ratio(const std::vector<body::Capsule>& capsules,
                       const std::vector<Vec3>& scene_points, double tau);
// True when some scene point lies within `threshold` of the capsule surface
// (inside counts as contact).
bool in_contact(const std::vector<body::Capsule>& capsules,
                const std::vector<Vec3>& scene_points, double threshold);

// Spread of a sample set over the invisible joints, millimeters. sample_std
// is the mean per-coordinate standard deviation across samples; apd the mean
// pairwise joint distance. Zero when every joint is visible.
double sample_std_mm(const std::vector<std::vector<Vec3>>& preds,
                     const scene::VisibilityMask& vis);
double apd_mm(const std::vector<std::vector<Vec3>>& preds, const scene::VisibilityMask& vis);

struct EvalReport {
    int n_inputs = 0;
    int n_samples = 0;              // draws per input
    double g_mpjpe_mm = 0.0;        // visible joints, camera frame
    double mpjpe_mm = 0.0;          // visible joints, pelvis-aligned
    double pa_mpjpe_mm = 0.0;       // visible joints, similarity-aligned
    int pa_skipped = 0;             // inputs without a valid similarity fit
    std::map<int, double> min_of_n_mm;  // invisible joints, by sample count
    double collision = 0.0;         // mean inside-point ratio
    double contact = 0.0;           // fraction of samples touching the scene
    double std_mm = 0.0;
    double apd_mm = 0.0;

    std::string to_text() const;    // human-readable block
    std::string to_table() const;   // one "name,value" line per metric
};

// Samples the model over (at most max_inputs of) the given records and
// aggregates every metric. Sample pools are nested: the n-sample pool for
// each entry of n_list is a prefix of the largest pool, so min_of_n_mm is
// non-increasing in n. Deterministic in (cfg.seed, record order).
EvalReport evaluate(const model::PoseModel& net, const std::vector<data::SampleRecord>& records,
                    const cfg::ExperimentConfig& cfg);

}  // namespace egopose::metrics
