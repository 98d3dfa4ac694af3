// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <vector>

#include "egopose/config.hpp"
#include "egopose/model.hpp"

namespace egopose::diff {

// Variance schedule indexed t = 0..T-1. abar is the cumulative signal level:
// abar[0] is close to 1 and the sequence is strictly decreasing.
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> a;       // per-step signal keep ratio a_t
    std::vector<double> abar;    // cumulative product of a
    std::vector<double> b;       // 1 - a_t
    std::vector<double> sigma;   // posterior variance; sigma[0] is 0 by convention

    static NoiseSchedule make(const cfg::ScheduleConfig& sc);  // throws on bad config
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, elementwise over 144 values.
std::vector<double> forward_noise(const NoiseSchedule& ns, const std::vector<double>& x0,
                                  int t, const std::vector<double>& eps);

// Coefficient of the denoiser's structural input skip: the posterior-mean
// shrinkage sqrt(abar) * v / (abar * v + 1 - abar) of a unit-Gaussian-prior
// estimate with prior variance v. Near 1 as abar -> 1 (the clean pose tracks
// the noisy input), decaying through the middle of the schedule so the
// network is not forced to cancel large passed-through noise.
// Prior variances behind the structural skip. With observations present the
// clean pose is tightly determined, so the skip shrinks the noisy input hard;
// without them the prior over poses is much wider and the posterior tracks
// x_t more strongly. Using the wider value for the masked branch is what lets
// classifier-free fusion add diversity on unobserved joints.
inline constexpr double kPriorVarCond = 0.1;
inline constexpr double kPriorVarUncond = 1.0;

double x0_skip(double abar, double prior_var = kPriorVarCond);

// Posterior mean of x_{t-1} given (x_t, x0hat). Throws for t <= 0.
std::vector<double> posterior_mean(const NoiseSchedule& ns, const std::vector<double>& xt,
                                   const std::vector<double>& x0hat, int t);

// Visible rows from pred_full, invisible rows from pred_masked ([24,6] flat).
std::vector<double> fuse_classifier_free(const std::vector<double>& pred_full,
                                         const std::vector<double>& pred_masked,
                                         const scene::VisibilityMask& vis);

// Everything a sampling chain needs besides the RNG.
struct SamplerInputs {
    const model::PoseModel* net = nullptr;
    model::ConditionInputs cond;
    body::Vec3 gamma_hat{0, 0, 0};
    body::BodyShape beta_hat;
    // Camera-frame scene points for the collision-score guidance term.
    std::vector<body::Vec3> guidance_points;
};

// One state per denoising step plus the initial noise (steps + 1 entries).
struct SampleTrace {
    std::vector<int> t_index;                        // steps-1 .. 0, after the initial -1
    std::vector<std::vector<double>> states;         // 144 values each
};

// Reverse-process sampler. Starts from standard normal pose rows; for t >= 1
// takes a posterior step (noiseless at t == 1), and at t == 0 returns the
// clean-pose estimate directly. Optional per-joint fusion of the masked and
// full condition branches, and collision-score gradient guidance on the
// posterior mean (scaled by the posterior variance except over the last
// sigma_free_steps). Guidance draws nothing from the RNG, so a = 0 reproduces
// the unguided chain bit for bit. Throws on non-finite states, naming the
// step.
body::PoseState guided_sample(const NoiseSchedule& ns, const SamplerInputs& si,
                              const cfg::SamplingConfig& sac, RngStream& rng,
                              SampleTrace* trace = nullptr);

}  // namespace egopose::diff
