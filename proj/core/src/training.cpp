// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include "egopose/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace egopose::train {

using ad::Tensor;
using nlohmann::json;

namespace {

constexpr int kJ = body::kJointCount;

model::ConditionInputs condition_inputs_from_cloud(const data::SampleRecord& rec,
                                                   const scene::ScenePointCloud& cloud,
                                                   int crop_points) {
    model::ConditionInputs ci;
    ci.keypoints = rec.keypoints;
    ci.vis = rec.vis.v;
    ci.bbox = rec.bbox;
    ci.camera = rec.camera;
    ci.crop = scene::crop_scene(cloud, rec.gamma, static_cast<size_t>(crop_points));
    return ci;
}

// Camera-frame points near the body for the collision term; stride-subsampled
// to keep the per-record graph small.
std::vector<body::Vec3> collision_points(const data::SampleRecord& rec,
                                         const scene::ScenePointCloud& cloud, size_t max_n) {
    std::vector<body::Vec3> near;
    for (const auto& p : cloud.points)
        if (std::abs(p[0] - rec.gamma.gamma[0]) <= 1.0 &&
            std::abs(p[2] - rec.gamma.gamma[2]) <= 1.0)
            near.push_back(p);
    if (near.size() <= max_n) return near;
    std::vector<body::Vec3> out;
    out.reserve(max_n);
    for (size_t k = 0; k < max_n; ++k) out.push_back(near[k * near.size() / max_n]);
    return out;
}

Tensor mse_to_const(const Tensor& pred, const std::vector<double>& target) {
    Tensor t = Tensor::from(pred.shape(), target);
    return ad::mean_all(ad::square(ad::sub(pred, t)));
}

bool head_param(const std::string& name) {
    return name.rfind("trans.", 0) == 0 || name.rfind("shape.", 0) == 0;
}

bool encoder_param(const std::string& name) {
    return name.rfind("scene.", 0) == 0 || name.rfind("obs.", 0) == 0;
}

}  // namespace

model::ConditionInputs make_condition_inputs(const data::SampleRecord& rec, int crop_points) {
    return condition_inputs_from_cloud(rec, rec.scene_cloud(), crop_points);
}

ad::Tensor loss_simple(const ad::Tensor& pred, const body::PoseState& gt) {
    Tensor simple_sum = Tensor::scalar(0.0);
    for (int j = 0; j < kJ; ++j) {
        Tensor row = ad::reshape(ad::slice(pred, 0, j, 1), {6});
        Tensor rhat = body::rot6d_to_matrix_t(row, j);
        std::array<double, 6> gt_row;
        std::copy_n(gt.rot6d.begin() + j * 6, 6, gt_row.begin());
        const body::Mat3 rgt = body::rot6d_to_matrix(gt_row, j);
        Tensor diff = ad::sub(rhat, Tensor::from({3, 3}, {rgt.begin(), rgt.end()}));
        simple_sum = ad::add(simple_sum, ad::sum_all(ad::square(diff)));
    }
    return ad::scale(simple_sum, 1.0 / kJ);
}

ad::Tensor loss_3d(const ad::Tensor& pred, const data::SampleRecord& rec) {
    const auto& skel = body::Skeleton::default_human();
    Tensor jhat = body::forward_kinematics_t(pred, rec.beta, rec.gamma, skel);
    const auto jgt = body::forward_kinematics(rec.theta, rec.beta, rec.gamma, skel);
    std::vector<double> jgt_flat;
    jgt_flat.reserve(kJ * 3);
    for (const auto& p : jgt) jgt_flat.insert(jgt_flat.end(), p.begin(), p.end());
    return mse_to_const(jhat, jgt_flat);
}

ad::Tensor loss_2d(const ad::Tensor& pred, const data::SampleRecord& rec) {
    const auto& skel = body::Skeleton::default_human();
    Tensor jhat = body::forward_kinematics_t(pred, rec.beta, rec.gamma, skel);
    const double w = rec.camera.width;
    Tensor x = ad::slice(jhat, 1, 0, 1);
    Tensor y = ad::slice(jhat, 1, 1, 1);
    Tensor z = ad::clamp(ad::slice(jhat, 1, 2, 1), 0.05, 1e9);
    Tensor inv_z = ad::reciprocal(z);
    Tensor un = ad::scale(ad::mul(x, inv_z), rec.camera.f / w);
    Tensor vn = ad::scale(ad::mul(y, inv_z), rec.camera.f / w);
    std::vector<double> un_gt(kJ, 0.0), vn_gt(kJ, 0.0), gate(kJ, 0.0);
    int n_vis = 0;
    for (int j = 0; j < kJ; ++j) {
        if (!rec.vis.v[j]) continue;
        un_gt[j] = (rec.keypoints[j][0] - rec.camera.cx) / w;
        vn_gt[j] = (rec.keypoints[j][1] - rec.camera.cy) / w;
        gate[j] = 1.0;
        ++n_vis;
    }
    Tensor du = ad::stop_grad_gate(ad::sub(un, Tensor::from({(size_t)kJ, 1}, un_gt)), gate);
    Tensor dv = ad::stop_grad_gate(ad::sub(vn, Tensor::from({(size_t)kJ, 1}, vn_gt)), gate);
    return ad::scale(ad::add(ad::sum_all(ad::square(du)), ad::sum_all(ad::square(dv))),
                     1.0 / std::max(n_vis, 1));
}

ad::Tensor diffusion_loss(const model::PoseModel& net, const data::SampleRecord& rec,
                          const diff::NoiseSchedule& ns, const cfg::LossWeights& lw,
                          const cfg::TrainConfig& tc, int epoch, uint64_t seed, uint64_t index,
                          LossReport* report) {
    RngStream rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch + 1)),
                  "train-loss", index);
    const auto& skel = body::Skeleton::default_human();
    const scene::ScenePointCloud cloud = rec.scene_cloud();
    model::ConditionInputs ci =
        condition_inputs_from_cloud(rec, cloud, net.config().crop_points);

    const int t = static_cast<int>(rng.uniform_index(ns.steps));
    std::vector<double> eps(kJ * 6);
    for (auto& e : eps) e = rng.normal();
    const std::vector<double> xt = diff::forward_noise(ns, rec.theta.rot6d, t, eps);
    const bool mask_obs = rng.uniform() < tc.cond_dropout;

    Tensor cond = net.build_condition(ci, rec.gamma.gamma, t, mask_obs);
    const double skip = diff::x0_skip(
        ns.abar[t], mask_obs ? diff::kPriorVarUncond : diff::kPriorVarCond);
    Tensor pred = net.denoise(Tensor::from({(size_t)kJ, 6}, xt), cond, 1, skip);

    Tensor l_simple = loss_simple(pred, rec.theta);
    Tensor l_3d = loss_3d(pred, rec);
    Tensor l_2d = loss_2d(pred, rec);
    Tensor l_orth = body::orthonormal_penalty_t(pred);

    const bool use_coll = epoch >= lw.coll_warmup_epochs;
    Tensor l_coll = Tensor::scalar(0.0);
    if (use_coll) {
        const auto pts = collision_points(rec, cloud, 512);
        auto cs = body::collision_score_t(pred, rec.beta, rec.gamma, pts, skel,
                                          body::CapsuleParams::default_params());
        if (!cs.empty_scene) l_coll = cs.score;
    }

    Tensor total = ad::add(
        ad::add(ad::add(ad::scale(l_simple, lw.lambda_simple), ad::scale(l_3d, lw.lambda_3d)),
                ad::add(ad::scale(l_2d, lw.lambda_2d), ad::scale(l_orth, lw.lambda_orth))),
        ad::scale(l_coll, use_coll ? lw.lambda_coll : 0.0));

    if (report) {
        report->simple = l_simple.item();
        report->l3d = l_3d.item();
        report->l2d = l_2d.item();
        report->coll = l_coll.item();
        report->orth = l_orth.item();
        report->total = total.item();
    }
    return total;
}

ad::Tensor head_loss(const model::PoseModel& net, const data::SampleRecord& rec,
                     const cfg::ModelConfig& mc, LossReport* report) {
    model::ConditionInputs ci = make_condition_inputs(rec, mc.crop_points);
    Tensor gamma_hat = net.predict_translation(ci);
    Tensor beta_hat = net.predict_shape(ci);
    Tensor l_trans = mse_to_const(
        gamma_hat, {rec.gamma.gamma[0], rec.gamma.gamma[1], rec.gamma.gamma[2]});
    Tensor l_beta = mse_to_const(beta_hat, {rec.beta.beta.begin(), rec.beta.beta.end()});
    Tensor total = ad::add(l_trans, l_beta);
    if (report) {
        report->trans = l_trans.item();
        report->beta = l_beta.item();
        report->total = total.item();
    }
    return total;
}

double validation_loss(const model::PoseModel& net, const std::vector<data::SampleRecord>& val,
                       const diff::NoiseSchedule& ns, const cfg::ExperimentConfig& cfg) {
    if (val.empty()) return 0.0;
    double sum = 0.0;
    for (size_t i = 0; i < val.size(); ++i) {
        Tensor l = diffusion_loss(net, val[i], ns, cfg.loss, cfg.train, /*epoch=*/-1, cfg.seed,
                                  i, nullptr);
        sum += l.item();
    }
    return sum / static_cast<double>(val.size());
}

namespace {

struct TrainState {
    int head_epochs_done = 0;
    int diff_epochs_done = 0;
    double best_val = std::numeric_limits<double>::infinity();
    std::string best_checkpoint;
};

std::string state_path(const std::string& out_dir) { return out_dir + "/state.json"; }

TrainState load_state(const std::string& out_dir) {
    TrainState st;
    std::ifstream in(state_path(out_dir));
    if (!in) return st;
    json j;
    in >> j;
    st.head_epochs_done = j.value("head_epochs_done", 0);
    st.diff_epochs_done = j.value("diff_epochs_done", 0);
    st.best_val = j.value("best_val", std::numeric_limits<double>::infinity());
    st.best_checkpoint = j.value("best_checkpoint", std::string());
    return st;
}

void save_state(const std::string& out_dir, const TrainState& st) {
    json j{{"head_epochs_done", st.head_epochs_done},
           {"diff_epochs_done", st.diff_epochs_done},
           {"best_val", st.best_val},
           {"best_checkpoint", st.best_checkpoint}};
    std::ofstream out(state_path(out_dir));
    out << j.dump(2) << "\n";
}

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed, const char* phase, int epoch) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    RngStream rng(seed, phase, static_cast<uint64_t>(epoch));
    for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    return idx;
}

void check_divergence(double value, double threshold, const char* phase, int epoch,
                      size_t batch) {
    if (std::isfinite(value) && value < threshold) return;
    throw std::runtime_error(std::string("training diverged (") + phase + " phase, epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch) +
                             "): loss " + std::to_string(value));
}

}  // namespace

TrainOutcome train(model::PoseModel& net, const data::DatasetSplits& splits,
                   const cfg::ExperimentConfig& cfg, const std::string& out_dir, bool resume) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    if (splits.train.empty()) throw std::invalid_argument("train: empty training split");

    TrainState st;
    if (resume) {
        st = load_state(out_dir);
        if (fs::exists(out_dir + "/last.ckpt")) net.load(out_dir + "/last.ckpt");
    }

    const auto ns = diff::NoiseSchedule::make(cfg.schedule);
    std::ofstream log(out_dir + "/train_log.txt", std::ios::app);
    const size_t batch = std::max(1, cfg.train.batch_size);

    ad::AdamOptimizer head_opt({cfg.train.head_lr});
    for (auto& [name, t] : net.params())
        if (head_param(name) || encoder_param(name)) head_opt.register_param(name, t);
    if (resume && st.head_epochs_done > 0 && fs::exists(out_dir + "/optim_head.bin"))
        head_opt.load_state(out_dir + "/optim_head.bin");

    for (int e = st.head_epochs_done; e < cfg.train.head_epochs; ++e) {
        const auto order = shuffled_indices(splits.train.size(), cfg.seed, "shuffle-head", e);
        double epoch_sum = 0.0;
        size_t batch_id = 0;
        for (size_t i = 0; i < order.size(); i += batch) {
            head_opt.zero_grad();
            const size_t hi = std::min(i + batch, order.size());
            double batch_sum = 0.0;
            for (size_t k = i; k < hi; ++k) {
                LossReport rep;
                Tensor l = head_loss(net, splits.train[order[k]], cfg.model, &rep);
                ad::backward(ad::scale(l, 1.0 / static_cast<double>(hi - i)));
                batch_sum += rep.total;
            }
            const double mean = batch_sum / static_cast<double>(hi - i);
            check_divergence(mean, cfg.train.divergence_threshold, "head", e, batch_id);
            head_opt.step();
            epoch_sum += batch_sum;
            ++batch_id;
        }
        log << "phase=head epoch=" << e
            << " train_loss=" << epoch_sum / static_cast<double>(order.size()) << "\n"
            << std::flush;
        st.head_epochs_done = e + 1;
        net.save(out_dir + "/last.ckpt");
        head_opt.save_state(out_dir + "/optim_head.bin");
        save_state(out_dir, st);
    }

    ad::AdamOptimizer diff_opt({cfg.train.lr});
    for (auto& [name, t] : net.params())
        if (!head_param(name)) diff_opt.register_param(name, t);
    if (resume && st.diff_epochs_done > 0 && fs::exists(out_dir + "/optim_diff.bin"))
        diff_opt.load_state(out_dir + "/optim_diff.bin");

    TrainOutcome out;
    for (int e = st.diff_epochs_done; e < cfg.train.epochs; ++e) {
        const auto order = shuffled_indices(splits.train.size(), cfg.seed, "shuffle-diff", e);
        double epoch_sum = 0.0;
        size_t batch_id = 0;
        for (size_t i = 0; i < order.size(); i += batch) {
            diff_opt.zero_grad();
            const size_t hi = std::min(i + batch, order.size());
            double batch_sum = 0.0;
            for (size_t k = i; k < hi; ++k) {
                LossReport rep;
                Tensor l = diffusion_loss(net, splits.train[order[k]], ns, cfg.loss, cfg.train,
                                          e, cfg.seed, order[k], &rep);
                ad::backward(ad::scale(l, 1.0 / static_cast<double>(hi - i)));
                batch_sum += rep.total;
            }
            const double mean = batch_sum / static_cast<double>(hi - i);
            check_divergence(mean, cfg.train.divergence_threshold, "diffusion", e, batch_id);
            diff_opt.step();
            epoch_sum += batch_sum;
            ++batch_id;
        }
        const double val = validation_loss(net, splits.val, ns, cfg);
        const std::string ckpt = out_dir + "/epoch_" + std::to_string(e) + ".ckpt";
        net.save(ckpt);
        net.save(out_dir + "/last.ckpt");
        if (val < st.best_val || st.best_checkpoint.empty()) {
            st.best_val = val;
            st.best_checkpoint = out_dir + "/best.ckpt";
            net.save(st.best_checkpoint);
        }
        log << "phase=diffusion epoch=" << e
            << " train_loss=" << epoch_sum / static_cast<double>(order.size())
            << " val_loss=" << val << "\n"
            << std::flush;
        st.diff_epochs_done = e + 1;
        diff_opt.save_state(out_dir + "/optim_diff.bin");
        save_state(out_dir, st);
    }

    out.head_epochs_run = st.head_epochs_done;
    out.epochs_run = st.diff_epochs_done;
    out.best_val = st.best_val;
    out.best_checkpoint = st.best_checkpoint;
    out.last_checkpoint = out_dir + "/last.ckpt";
    return out;
}

}  // namespace egopose::train
