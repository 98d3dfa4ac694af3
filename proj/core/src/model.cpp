// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include "egopose/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace egopose::model {

using ad::Shape;
using ad::Tensor;

namespace {

constexpr int kJ = body::kJointCount;
constexpr uint64_t kCheckpointMagic = 0x45474f504f534531ULL;  // "EGOPOSE1"
constexpr uint32_t kCheckpointVersion = 1;

// Symmetrically degree-normalized skeleton adjacency with self loops.
std::vector<double> normalized_adjacency() {
    const auto& skel = body::Skeleton::default_human();
    std::vector<double> a(kJ * kJ, 0.0);
    for (int j = 0; j < kJ; ++j) {
        a[j * kJ + j] = 1.0;
        const int p = skel.parent[j];
        if (p >= 0) a[j * kJ + p] = a[p * kJ + j] = 1.0;
    }
    std::vector<double> deg(kJ, 0.0);
    for (int i = 0; i < kJ; ++i)
        for (int j = 0; j < kJ; ++j) deg[i] += a[i * kJ + j];
    for (int i = 0; i < kJ; ++i)
        for (int j = 0; j < kJ; ++j) a[i * kJ + j] /= std::sqrt(deg[i] * deg[j]);
    return a;
}

Tensor tile_rows(const Tensor& t, size_t copies) {
    if (copies == 1) return t;
    return ad::concat(std::vector<Tensor>(copies, t), 0);
}

}  // namespace

Tensor Linear::forward(const Tensor& x) const { return ad::add(ad::matmul(x, W), b); }

Tensor PoseModel::make_param(const Shape& s, const std::string& name, RngStream& rng,
                             double stddev) {
    Tensor t = stddev == 0.0 ? Tensor::zeros(s, true) : Tensor::randn(s, rng, stddev, true);
    params_.emplace_back(name, t);
    return t;
}

Linear PoseModel::make_linear(size_t in, size_t out, const std::string& name, RngStream& rng,
                              bool zero_init, double bias_init) {
    const double stddev = zero_init ? 0.0 : std::sqrt(2.0 / static_cast<double>(in + out));
    Linear l;
    l.W = make_param({in, out}, name + ".W", rng, stddev);
    l.b = make_param({out}, name + ".b", rng, 0.0);
    if (bias_init != 0.0)
        for (auto& v : l.b.value()) v = bias_init;
    return l;
}

PoseModel::PoseModel(const cfg::ModelConfig& mc, uint64_t seed) : mc_(mc) {
    RngStream rng(seed, "model-init", 0);
    const size_t ph = mc_.point_hidden;

    scene_l1_ = make_linear(3, ph, "scene.l1", rng, false, 0.01);
    scene_l2_ = make_linear(ph, ph, "scene.l2", rng, false, 0.01);
    scene_l3_ = make_linear(ph, mc_.scene_dim, "scene.l3", rng);

    obs_l1_ = make_linear(3, mc_.obs_dim, "obs.l1", rng, false, 0.01);
    obs_l2_ = make_linear(mc_.obs_dim, mc_.obs_dim, "obs.l2", rng);

    temb_l1_ = make_linear(mc_.temb_dim, mc_.temb_dim, "temb.l1", rng, false, 0.01);
    temb_l2_ = make_linear(mc_.temb_dim, mc_.temb_dim, "temb.l2", rng);

    const size_t head_in = mc_.scene_dim + mc_.obs_dim + 6;
    trans_l1_ = make_linear(head_in, 64, "trans.l1", rng, false, 0.01);
    trans_l2_ = make_linear(64, 3, "trans.l2", rng);
    shape_l1_ = make_linear(head_in, 64, "shape.l1", rng, false, 0.01);
    shape_l2_ = make_linear(64, body::kShapeDim, "shape.l2", rng);

    pose_embed_ = make_linear(6, mc_.pose_embed, "denoiser.pose_embed", rng);
    gcn_in_ = make_linear(mc_.pose_embed + condition_dim(), mc_.gcn_hidden, "denoiser.gcn_in",
                          rng);
    mods_.push_back(make_param({(size_t)kJ, (size_t)mc_.gcn_hidden}, "denoiser.mod_in", rng, 0.0));
    for (int k = 0; k < mc_.gcn_blocks; ++k) {
        const std::string base = "denoiser.block" + std::to_string(k);
        gcn_blocks_.push_back(make_linear(mc_.gcn_hidden, mc_.gcn_hidden, base, rng));
        mods_.push_back(make_param({(size_t)kJ, (size_t)mc_.gcn_hidden}, base + ".mod", rng, 0.0));
    }
    gcn_out_ = make_linear(mc_.gcn_hidden, 6, "denoiser.gcn_out", rng);
    mods_.push_back(make_param({(size_t)kJ, 6}, "denoiser.mod_out", rng, 0.0));
    adj_delta_ = make_param({(size_t)kJ, (size_t)kJ}, "denoiser.adj_delta", rng, 0.0);
    adj_base_ = normalized_adjacency();
}

size_t PoseModel::condition_dim() const {
    return 2 * mc_.obs_dim + mc_.scene_dim + 3 + 3 + 3 + mc_.temb_dim;
}

Tensor PoseModel::encode_scene(const scene::ScenePointCloud& crop) const {
    if (crop.empty_flagged || crop.points.empty())
        return Tensor::zeros({(size_t)mc_.scene_dim});
    std::vector<double> flat;
    flat.reserve(crop.points.size() * 3);
    for (const auto& p : crop.points) {
        flat.push_back(p[0]);
        flat.push_back(p[1]);
        flat.push_back(p[2]);
    }
    Tensor x = Tensor::from({crop.points.size(), 3}, std::move(flat));
    Tensor h = ad::relu(scene_l1_.forward(x));
    h = ad::relu(scene_l2_.forward(h));
    h = scene_l3_.forward(h);
    return ad::max_axis(h, 0);
}

Tensor PoseModel::encode_obs(const ConditionInputs& in, bool mask_obs) const {
    std::vector<double> flat(kJ * 3, 0.0);
    if (!mask_obs) {
        for (int j = 0; j < kJ; ++j) {
            if (!in.vis[j]) continue;
            flat[j * 3 + 0] = (in.keypoints[j][0] - in.bbox.bx) / in.bbox.b;
            flat[j * 3 + 1] = (in.keypoints[j][1] - in.bbox.by) / in.bbox.b;
            flat[j * 3 + 2] = 1.0;
        }
    }
    Tensor x = Tensor::from({(size_t)kJ, 3}, std::move(flat));
    Tensor h = ad::relu(obs_l1_.forward(x));
    return obs_l2_.forward(h);
}

Tensor PoseModel::timestep_embedding(int t) const {
    const size_t half = mc_.temb_dim / 2;
    std::vector<double> e(mc_.temb_dim, 0.0);
    for (size_t i = 0; i < half; ++i) {
        const double w = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                  static_cast<double>(half));
        e[i] = std::sin(t * w);
        e[half + i] = std::cos(t * w);
    }
    Tensor x = Tensor::from({1, (size_t)mc_.temb_dim}, std::move(e));
    return ad::reshape(temb_l2_.forward(ad::relu(temb_l1_.forward(x))),
                       {(size_t)mc_.temb_dim});
}

Tensor PoseModel::build_condition_static(const ConditionInputs& in, const body::Vec3& gamma_hat,
                                         bool mask_obs) const {
    Tensor obs = encode_obs(in, mask_obs);                        // [24, obs]
    // Pooled observation context gives every joint direct access to all
    // visible keypoints instead of relying on graph hops; it is part of the
    // observation feature, so condition dropout removes it too.
    Tensor pooled = ad::broadcast_rows(ad::scale(ad::sum_axis(obs, 0), 1.0 / kJ), kJ);
    Tensor scn = ad::broadcast_rows(encode_scene(in.crop), kJ);   // [24, scene]
    Tensor gam = ad::broadcast_rows(
        Tensor::from({3}, {gamma_hat[0], gamma_hat[1], gamma_hat[2]}), kJ);
    const auto bn = in.bbox.normalized();
    Tensor box = ad::broadcast_rows(Tensor::from({3}, {bn[0], bn[1], bn[2]}), kJ);
    Tensor intr = ad::broadcast_rows(
        Tensor::from({3}, {in.camera.f / in.camera.width, in.camera.cx / in.camera.width,
                           in.camera.cy / in.camera.width}),
        kJ);
    return ad::concat({obs, pooled, scn, gam, box, intr}, 1);
}

Tensor PoseModel::complete_condition(const Tensor& static_part, int t) const {
    Tensor temb = ad::broadcast_rows(timestep_embedding(t), kJ);
    return ad::concat({static_part, temb}, 1);
}

Tensor PoseModel::build_condition(const ConditionInputs& in, const body::Vec3& gamma_hat, int t,
                                  bool mask_obs) const {
    return complete_condition(build_condition_static(in, gamma_hat, mask_obs), t);
}

namespace {

Tensor head_input(const PoseModel& m, const ConditionInputs& in) {
    Tensor scn = m.encode_scene(in.crop);
    Tensor obs = m.encode_obs(in, /*mask_obs=*/false);
    Tensor pooled = ad::scale(ad::sum_axis(obs, 0), 1.0 / kJ);
    const auto bn = in.bbox.normalized();
    Tensor extra = Tensor::from(
        {6}, {bn[0], bn[1], bn[2], in.camera.f / in.camera.width,
              in.camera.cx / in.camera.width, in.camera.cy / in.camera.width});
    return ad::concat({scn, pooled, extra}, 0);
}

}  // namespace

Tensor PoseModel::predict_translation(const ConditionInputs& in) const {
    Tensor hi = head_input(*this, in);
    Tensor h = ad::relu(trans_l1_.forward(ad::reshape(hi, {1, hi.numel()})));
    return ad::reshape(trans_l2_.forward(h), {3});
}

Tensor PoseModel::predict_shape(const ConditionInputs& in) const {
    Tensor hi = head_input(*this, in);
    Tensor h = ad::relu(shape_l1_.forward(ad::reshape(hi, {1, hi.numel()})));
    return ad::reshape(shape_l2_.forward(h), {(size_t)body::kShapeDim});
}

Tensor PoseModel::affinity() const {
    Tensor base = Tensor::from({(size_t)kJ, (size_t)kJ}, adj_base_);
    Tensor s = ad::add(base, adj_delta_);
    Tensor abs_s = ad::add(ad::relu(s), ad::relu(ad::neg(s)));
    Tensor row_sums = ad::reshape(ad::sum_axis(abs_s, 1), {(size_t)kJ, 1});
    return ad::mul(s, ad::reciprocal(row_sums));  // column-broadcast
}

Tensor PoseModel::gcn_layer(const Tensor& h, const Linear& lin, const Tensor& mod,
                            size_t batch) const {
    Tensor t = lin.forward(h);
    Tensor m = tile_rows(ad::add_const(mod, 1.0), batch);
    Tensor tm = ad::mul(t, m);
    Tensor a = affinity();
    if (batch == 1) return ad::matmul(a, tm);
    std::vector<Tensor> blocks;
    blocks.reserve(batch);
    for (size_t bb = 0; bb < batch; ++bb)
        blocks.push_back(ad::matmul(a, ad::slice(tm, 0, bb * kJ, kJ)));
    return ad::concat(blocks, 0);
}

Tensor PoseModel::denoise(const Tensor& x, const Tensor& cond, size_t batch,
                          double skip_scale) const {
    if (x.rows() != batch * kJ || cond.rows() != batch * kJ)
        throw std::invalid_argument("denoise: row count does not match batch*24");
    Tensor pe = pose_embed_.forward(x);
    Tensor h = ad::tanh_(gcn_layer(ad::concat({pe, cond}, 1), gcn_in_, mods_[0], batch));
    for (int k = 0; k < mc_.gcn_blocks; ++k)
        h = ad::add(h, ad::tanh_(gcn_layer(h, gcn_blocks_[k], mods_[k + 1], batch)));
    Tensor out = gcn_layer(h, gcn_out_, mods_.back(), batch);
    // Structural skip with the schedule coefficient: sqrt(abar_t) * x_t is the
    // zeroth-order clean-pose estimate, and the network learns the correction.
    // Deep tanh stacks fight the identity map, so without this the network
    // converges to the conditional mean, the prediction goes insensitive to
    // the noisy input, and sampling loses its diversity at small timesteps.
    if (skip_scale != 0.0) out = ad::add(out, ad::scale(x, skip_scale));
    return out;
}

Tensor PoseModel::param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return t;
    throw std::invalid_argument("unknown parameter: " + name);
}

void PoseModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint save: cannot write " + path);
    auto put = [&](const void* p, size_t n) { out.write(static_cast<const char*>(p), n); };
    put(&kCheckpointMagic, 8);
    put(&kCheckpointVersion, 4);
    const uint64_t count = params_.size();
    put(&count, 8);
    for (const auto& [name, t] : params_) {
        const uint32_t nl = name.size();
        put(&nl, 4);
        put(name.data(), nl);
        const uint32_t nd = t.shape().size();
        put(&nd, 4);
        for (size_t d : t.shape()) {
            const uint64_t dd = d;
            put(&dd, 8);
        }
        put(t.value().data(), t.numel() * sizeof(double));
    }
    if (!out) throw std::runtime_error("checkpoint save: write failed for " + path);
}

void PoseModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint load: cannot open " + path);
    auto get = [&](void* p, size_t n) {
        if (!in.read(static_cast<char*>(p), n))
            throw std::runtime_error("checkpoint load: truncated file " + path);
    };
    uint64_t magic = 0, count = 0;
    uint32_t version = 0;
    get(&magic, 8);
    get(&version, 4);
    if (magic != kCheckpointMagic || version != kCheckpointVersion)
        throw std::runtime_error("checkpoint load: bad magic or version in " + path);
    get(&count, 8);
    if (count != params_.size())
        throw std::runtime_error("checkpoint load: parameter count mismatch in " + path);
    for (auto& [name, t] : params_) {
        uint32_t nl = 0;
        get(&nl, 4);
        std::string fname(nl, '\0');
        get(fname.data(), nl);
        if (fname != name)
            throw std::runtime_error("checkpoint load: expected parameter " + name + ", found " +
                                     fname);
        uint32_t nd = 0;
        get(&nd, 4);
        Shape s(nd);
        for (auto& d : s) {
            uint64_t dd = 0;
            get(&dd, 8);
            d = dd;
        }
        if (s != t.shape())
            throw std::runtime_error("checkpoint load: shape mismatch for " + name);
        get(t.value().data(), t.numel() * sizeof(double));
    }
}

Tensor stack_pose_batch(const std::vector<Tensor>& poses) {
    if (poses.size() == 1) return poses[0];
    return ad::concat(poses, 0);
}

}  // namespace egopose::model
