// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include "egopose/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace egopose::diff {

using ad::Tensor;

NoiseSchedule NoiseSchedule::make(const cfg::ScheduleConfig& sc) {
    if (sc.steps < 1) throw std::invalid_argument("schedule: steps must be >= 1");
    NoiseSchedule ns;
    ns.steps = sc.steps;
    const int T = sc.steps;
    ns.a.resize(T);
    ns.abar.resize(T);
    ns.b.resize(T);
    ns.sigma.resize(T);

    if (sc.type == "cosine") {
        const double s = 0.008;
        auto f = [&](double u) {
            const double x = (u + s) / (1.0 + s) * M_PI / 2.0;
            return std::cos(x) * std::cos(x);
        };
        double prev = 1.0;
        for (int t = 0; t < T; ++t) {
            double ab = f(static_cast<double>(t + 1) / T) / f(0.0);
            double at = ab / prev;
            at = std::min(std::max(at, 1e-3), 0.9999);
            ns.a[t] = at;
            ns.abar[t] = prev * at;
            prev = ns.abar[t];
        }
    } else if (sc.type == "linear") {
        const double beta0 = 1e-4, beta1 = 0.02;
        double prod = 1.0;
        for (int t = 0; t < T; ++t) {
            const double beta =
                T == 1 ? beta0 : beta0 + (beta1 - beta0) * static_cast<double>(t) / (T - 1);
            ns.a[t] = 1.0 - beta;
            prod *= ns.a[t];
            ns.abar[t] = prod;
        }
    } else {
        throw std::invalid_argument("schedule: unknown type '" + sc.type + "'");
    }
    for (int t = 0; t < T; ++t) {
        ns.b[t] = 1.0 - ns.a[t];
        const double abar_prev = t == 0 ? 1.0 : ns.abar[t - 1];
        ns.sigma[t] = t == 0 ? 0.0 : ns.b[t] * (1.0 - abar_prev) / (1.0 - ns.abar[t]);
    }
    return ns;
}

std::vector<double> forward_noise(const NoiseSchedule& ns, const std::vector<double>& x0,
                                  int t, const std::vector<double>& eps) {
    if (t < 0 || t >= ns.steps) throw std::invalid_argument("forward_noise: t out of range");
    if (x0.size() != eps.size())
        throw std::invalid_argument("forward_noise: x0/eps size mismatch");
    const double sa = std::sqrt(ns.abar[t]), sb = std::sqrt(1.0 - ns.abar[t]);
    std::vector<double> out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = sa * x0[i] + sb * eps[i];
    return out;
}

double x0_skip(double abar, double prior_var) {
    return std::sqrt(abar) * prior_var / (abar * prior_var + 1.0 - abar);
}

std::vector<double> posterior_mean(const NoiseSchedule& ns, const std::vector<double>& xt,
                                   const std::vector<double>& x0hat, int t) {
    if (t <= 0 || t >= ns.steps)
        throw std::invalid_argument("posterior_mean: t must be in [1, steps)");
    if (xt.size() != x0hat.size())
        throw std::invalid_argument("posterior_mean: size mismatch");
    const double abar_prev = ns.abar[t - 1];
    const double denom = 1.0 - ns.abar[t];
    // A degenerate noiseless step (a_t = 1) keeps the state unchanged.
    if (ns.b[t] == 0.0 || denom <= 0.0) return xt;
    const double c0 = std::sqrt(abar_prev) * ns.b[t] / denom;
    // Complement rather than the textbook sqrt(a_t)(1-abar_{t-1})/(1-abar_t):
    // the two agree to O((1-sqrt(a_t))(1-sqrt(abar_{t-1}))), and this form
    // makes the mean an exact convex combination, so theta0_hat = theta_t
    // implies mu = theta_t for any schedule.
    const double ct = 1.0 - c0;
    std::vector<double> mu(xt.size());
    for (size_t i = 0; i < xt.size(); ++i) mu[i] = c0 * x0hat[i] + ct * xt[i];
    return mu;
}

std::vector<double> fuse_classifier_free(const std::vector<double>& pred_full,
                                         const std::vector<double>& pred_masked,
                                         const scene::VisibilityMask& vis) {
    if (pred_full.size() != pred_masked.size() ||
        pred_full.size() != static_cast<size_t>(body::kJointCount) * 6)
        throw std::invalid_argument("fuse_classifier_free: expected [24,6] inputs");
    std::vector<double> out(pred_full.size());
    for (int j = 0; j < body::kJointCount; ++j)
        for (int k = 0; k < 6; ++k)
            out[j * 6 + k] = vis.v[j] ? pred_full[j * 6 + k] : pred_masked[j * 6 + k];
    return out;
}

namespace {

constexpr size_t kPoseDim = static_cast<size_t>(body::kJointCount) * 6;

// Collision-score gradient with respect to the 144 pose values; zero for an
// empty guidance set.
std::vector<double> collision_gradient(const SamplerInputs& si,
                                       const std::vector<double>& pose_values) {
    std::vector<double> g(kPoseDim, 0.0);
    if (si.guidance_points.empty()) return g;
    Tensor rot = Tensor::from({(size_t)body::kJointCount, 6}, pose_values, true);
    body::Translation gamma;
    gamma.gamma = si.gamma_hat;
    auto cs = body::collision_score_t(rot, si.beta_hat, gamma, si.guidance_points,
                                      body::Skeleton::default_human(),
                                      body::CapsuleParams::default_params());
    if (cs.empty_scene) return g;
    ad::backward(cs.score);
    if (rot.has_grad()) g = rot.grad();
    return g;
}

void check_finite(const std::vector<double>& v, int t) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error("sampling produced a non-finite state at step t=" +
                                     std::to_string(t));
}

}  // namespace

body::PoseState guided_sample(const NoiseSchedule& ns, const SamplerInputs& si,
                              const cfg::SamplingConfig& sac, RngStream& rng,
                              SampleTrace* trace) {
    if (si.net == nullptr) throw std::invalid_argument("guided_sample: missing model");
    const model::PoseModel& net = *si.net;

    Tensor cond_full_static = net.build_condition_static(si.cond, si.gamma_hat, false);
    Tensor cond_masked_static;
    if (sac.cf_fusion)
        cond_masked_static = net.build_condition_static(si.cond, si.gamma_hat, true);

    std::vector<double> x(kPoseDim);
    for (auto& v : x) v = rng.normal();
    if (trace) {
        trace->t_index.push_back(-1);
        trace->states.push_back(x);
    }

    auto predict_x0 = [&](const std::vector<double>& xt, int t) {
        Tensor xt_t = Tensor::from({(size_t)body::kJointCount, 6}, xt);
        const double skip = x0_skip(ns.abar[t]);
        std::vector<double> pred =
            net.denoise(xt_t, net.complete_condition(cond_full_static, t), 1, skip).value();
        if (sac.cf_fusion) {
            std::vector<double> masked =
                net.denoise(xt_t, net.complete_condition(cond_masked_static, t), 1,
                            x0_skip(ns.abar[t], kPriorVarUncond))
                    .value();
            scene::VisibilityMask vm;
            vm.v = si.cond.vis;
            pred = fuse_classifier_free(pred, masked, vm);
        }
        return pred;
    };

    for (int t = ns.steps - 1; t >= 0; --t) {
        std::vector<double> x0hat = predict_x0(x, t);
        check_finite(x0hat, t);
        if (t == 0) {
            x = std::move(x0hat);
        } else {
            std::vector<double> mu = posterior_mean(ns, x, x0hat, t);
            if (sac.guidance && sac.a != 0.0) {
                // The gradient is taken at the clean prediction: capsule
                // geometry at the noisy state bears little relation to the
                // final pose, so descending the score there mostly adds noise.
                const std::vector<double> g = collision_gradient(si, x0hat);
                const double scale = t < sac.sigma_free_steps
                                         ? sac.guidance_sign * sac.a
                                         : sac.guidance_sign * sac.a * ns.sigma[t];
                for (size_t i = 0; i < kPoseDim; ++i) mu[i] += scale * g[i];
            }
            if (t > 1) {
                const double sd = std::sqrt(ns.sigma[t]);
                for (auto& v : mu) v += sd * rng.normal();
            }
            x = std::move(mu);
        }
        check_finite(x, t);
        if (trace) {
            trace->t_index.push_back(t);
            trace->states.push_back(x);
        }
    }

    body::PoseState out;
    out.rot6d = x;
    return out;
}

}  // namespace egopose::diff
