// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.
//
// Microbenchmarks for the hot paths: forward kinematics, the collision
// score, the denoiser forward pass, and one full sampling chain.

#include <benchmark/benchmark.h>

#include "egopose/metrics.hpp"
#include "egopose/training.hpp"

using namespace egopose;

namespace {

cfg::ModelConfig bench_model() {
    cfg::ModelConfig mc;
    mc.obs_dim = 32;
    mc.scene_dim = 32;
    mc.temb_dim = 16;
    mc.pose_embed = 32;
    mc.gcn_hidden = 48;
    mc.point_hidden = 16;
    mc.crop_points = 256;
    return mc;
}

data::SampleRecord bench_record() {
    cfg::DataConfig dc;
    dc.size = 4;
    for (uint64_t i = 0;; ++i) {
        auto rec = data::generate_sample(123, i, dc);
        if (!rec.vis.fully_truncated()) return rec;
    }
}

body::PoseState random_pose(uint64_t seed) {
    RngStream rng(seed, "bench-pose");
    body::PoseState p = body::PoseState::identity();
    for (auto& v : p.rot6d) v += 0.1 * rng.normal();
    return p;
}

void bm_forward_kinematics(benchmark::State& state) {
    const auto& skel = body::Skeleton::default_human();
    auto pose = random_pose(1);
    body::BodyShape beta;
    body::Translation gamma;
    gamma.gamma = {0, 1, 2};
    for (auto _ : state)
        benchmark::DoNotOptimize(body::forward_kinematics(pose, beta, gamma, skel));
}
BENCHMARK(bm_forward_kinematics);

void bm_collision_score(benchmark::State& state) {
    const auto& skel = body::Skeleton::default_human();
    const auto& params = body::CapsuleParams::default_params();
    auto pose = random_pose(2);
    body::BodyShape beta;
    body::Translation gamma;
    gamma.gamma = {0, 1, 2};
    RngStream rng(3, "bench-pts");
    std::vector<body::Vec3> pts;
    for (int i = 0; i < state.range(0); ++i)
        pts.push_back({gamma.gamma[0] + rng.uniform(-1, 1), gamma.gamma[1] + rng.uniform(-1, 1),
                       gamma.gamma[2] + rng.uniform(-1, 1)});
    for (auto _ : state)
        benchmark::DoNotOptimize(body::collision_score(pose, beta, gamma, pts, skel, params));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_collision_score)->Arg(512)->Arg(4096);

void bm_scene_generation(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(scene::generate_scene(7, scene::SceneTemplate::floor_seat));
}
BENCHMARK(bm_scene_generation);

void bm_denoiser_forward(benchmark::State& state) {
    model::PoseModel net(bench_model(), 5);
    auto rec = bench_record();
    auto ci = train::make_condition_inputs(rec, net.config().crop_points);
    auto cond = net.build_condition(ci, rec.gamma.gamma, 7, false);
    RngStream rng(6, "bench-x");
    auto x = ad::Tensor::randn({24, 6}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(net.denoise(x, cond, 1));
}
BENCHMARK(bm_denoiser_forward);

void bm_sampling_chain(benchmark::State& state) {
    model::PoseModel net(bench_model(), 5);
    auto rec = bench_record();
    diff::SamplerInputs si;
    si.net = &net;
    si.cond = train::make_condition_inputs(rec, net.config().crop_points);
    si.gamma_hat = rec.gamma.gamma;
    si.beta_hat = rec.beta;
    for (const auto& p : si.cond.crop.points)
        if (si.guidance_points.size() < 256) si.guidance_points.push_back(p);
    cfg::ScheduleConfig sc;
    sc.steps = static_cast<int>(state.range(0));
    auto ns = diff::NoiseSchedule::make(sc);
    cfg::SamplingConfig sac;
    uint64_t i = 0;
    for (auto _ : state) {
        RngStream rng(9, "bench-sample", i++);
        benchmark::DoNotOptimize(diff::guided_sample(ns, si, sac, rng));
    }
}
BENCHMARK(bm_sampling_chain)->Arg(10)->Arg(50);

void bm_diffusion_loss_backward(benchmark::State& state) {
    model::PoseModel net(bench_model(), 5);
    auto rec = bench_record();
    cfg::ScheduleConfig sc;
    sc.steps = 50;
    auto ns = diff::NoiseSchedule::make(sc);
    cfg::LossWeights lw;
    cfg::TrainConfig tc;
    uint64_t i = 0;
    for (auto _ : state) {
        for (auto& [name, p] : net.params()) p.zero_grad();
        auto loss = train::diffusion_loss(net, rec, ns, lw, tc, 0, 11, i++);
        ad::backward(loss);
        benchmark::DoNotOptimize(loss.item());
    }
}
BENCHMARK(bm_diffusion_loss_backward);

}  // namespace

BENCHMARK_MAIN();
