// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.
//
// Single experiment driver: data generation, two-phase training, sampling,
// evaluation, and the guidance/fusion ablation grid.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "egopose/dataset.hpp"
#include "egopose/diffusion.hpp"
#include "egopose/metrics.hpp"
#include "egopose/training.hpp"

namespace fs = std::filesystem;
using namespace egopose;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out;
    bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file (partial overrides)");
    cmd->add_option("--seed", args.seed, "root seed override");
    cmd->add_option("--out", args.out, "output directory override");
    cmd->add_flag("--force", args.force, "overwrite existing outputs");
}

cfg::ExperimentConfig resolve_config(const CommonArgs& args) {
    cfg::ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = cfg::ExperimentConfig::load(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    if (!args.out.empty()) cfg.out_dir = args.out;
    return cfg;
}

void persist_config(const cfg::ExperimentConfig& cfg, const std::string& dir) {
    fs::create_directories(dir);
    cfg.save(dir + "/config.json");
}

data::DatasetSplits load_dataset(const cfg::ExperimentConfig& cfg) {
    const std::string& d = cfg.dataset_dir;
    if (!fs::exists(d + "/manifest.json"))
        throw std::runtime_error("dataset not found in " + d + " (run gen-data first)");
    data::DatasetSplits s;
    s.train = data::read_records(d + "/train.jsonl");
    s.val = data::read_records(d + "/val.jsonl");
    s.test = data::read_records(d + "/test.jsonl");
    return s;
}

// Loads the newest checkpoint. When --out redirects the output directory,
// the checkpoint is still found under the training directory recorded in the
// config file.
model::PoseModel restore_model(const cfg::ExperimentConfig& cfg, const CommonArgs& args) {
    model::PoseModel net(cfg.model, cfg.seed);
    std::vector<std::string> dirs = {cfg.out_dir};
    if (!args.config_path.empty()) {
        const std::string train_dir = cfg::ExperimentConfig::load(args.config_path).out_dir;
        if (train_dir != cfg.out_dir) dirs.push_back(train_dir);
    }
    for (const auto& d : dirs) {
        if (fs::exists(d + "/best.ckpt")) {
            net.load(d + "/best.ckpt");
            return net;
        }
        if (fs::exists(d + "/last.ckpt")) {
            net.load(d + "/last.ckpt");
            return net;
        }
    }
    throw std::runtime_error("no checkpoint in " + dirs.front() + " (run train first)");
}

int cmd_gen_data(const CommonArgs& args) {
    cfg::ExperimentConfig cfg = resolve_config(args);
    const std::string dir = args.out.empty() ? cfg.dataset_dir : args.out;
    if (fs::exists(dir + "/manifest.json") && !args.force) {
        std::cerr << "refusing to overwrite existing dataset in " << dir
                  << " (use --force)\n";
        return 2;
    }
    const auto splits = data::generate_dataset(cfg.seed, cfg.data);
    data::write_dataset(dir, splits, cfg.seed);
    persist_config(cfg, dir);
    std::cout << "wrote " << splits.train.size() << "/" << splits.val.size() << "/"
              << splits.test.size() << " train/val/test records to " << dir << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    cfg::ExperimentConfig cfg = resolve_config(args);
    if (args.force) {
        fs::remove(cfg.out_dir + "/state.json");
        fs::remove(cfg.out_dir + "/train_log.txt");
    }
    persist_config(cfg, cfg.out_dir);
    const auto splits = load_dataset(cfg);
    model::PoseModel net(cfg.model, cfg.seed);
    const bool resume = fs::exists(cfg.out_dir + "/state.json");
    const auto outcome = train::train(net, splits, cfg, cfg.out_dir, resume);
    std::cout << "trained " << outcome.head_epochs_run << " head epochs and "
              << outcome.epochs_run << " denoiser epochs; best validation loss "
              << outcome.best_val << "\nbest checkpoint: " << outcome.best_checkpoint << "\n";
    return 0;
}

int cmd_sample(const CommonArgs& args, int n, int guidance, int cf, double a) {
    cfg::ExperimentConfig cfg = resolve_config(args);
    if (n > 0) cfg.sampling.n = n;
    if (guidance >= 0) cfg.sampling.guidance = guidance != 0;
    if (cf >= 0) cfg.sampling.cf_fusion = cf != 0;
    if (a >= 0.0) cfg.sampling.a = a;

    const auto splits = load_dataset(cfg);
    model::PoseModel net = restore_model(cfg, args);
    const auto ns = diff::NoiseSchedule::make(cfg.schedule);
    const auto& skel = body::Skeleton::default_human();

    size_t limit = splits.test.size();
    if (cfg.eval.max_inputs > 0) limit = std::min(limit, (size_t)cfg.eval.max_inputs);
    fs::create_directories(cfg.out_dir);
    std::vector<std::ofstream> outs;
    for (int s = 0; s < cfg.sampling.n; ++s)
        outs.emplace_back(cfg.out_dir + "/samples_" + std::to_string(s) + ".jsonl");
    for (size_t i = 0; i < limit; ++i) {
        const auto& rec = splits.test[i];
        diff::SamplerInputs si;
        si.net = &net;
        si.cond.keypoints = rec.keypoints;
        si.cond.vis = rec.vis.v;
        si.cond.bbox = rec.bbox;
        si.cond.camera = rec.camera;
        const auto cloud = rec.scene_cloud();
        body::Translation gh;
        if (cfg.sampling.gt_translation) {
            si.gamma_hat = rec.gamma.gamma;
        } else {
            model::ConditionInputs head_ci = si.cond;
            body::Translation seed;
            for (const auto& p : cloud.points)
                for (int k = 0; k < 3; ++k) seed.gamma[k] += p[k] / cloud.points.size();
            head_ci.crop = scene::crop_scene(cloud, seed, cfg.model.crop_points);
            const auto g = net.predict_translation(head_ci).value();
            si.gamma_hat = {g[0], g[1], g[2]};
            const auto b = net.predict_shape(head_ci).value();
            for (int k = 0; k < body::kShapeDim; ++k) si.beta_hat.beta[k] = b[k];
        }
        gh.gamma = si.gamma_hat;
        si.cond.crop = scene::crop_scene(cloud, gh, cfg.model.crop_points);
        if (cfg.sampling.guidance) si.guidance_points = scene::guidance_cloud(cloud, gh);
        for (int s = 0; s < cfg.sampling.n; ++s) {
            RngStream rng(cfg.seed, "eval-sample", i * 4096 + (size_t)s);
            const auto pose = diff::guided_sample(ns, si, cfg.sampling, rng);
            const auto joints = body::forward_kinematics(pose, si.beta_hat, gh, skel);
            nlohmann::json j;
            j["input"] = i;
            j["sample"] = s;
            j["theta"] = pose.rot6d;
            std::vector<double> flat;
            for (const auto& p : joints) flat.insert(flat.end(), p.begin(), p.end());
            j["joints"] = flat;
            outs[s] << j.dump() << "\n";
        }
    }
    persist_config(cfg, cfg.out_dir);
    std::cout << "wrote " << cfg.sampling.n << " sample files for " << limit << " inputs to "
              << cfg.out_dir << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, int n, int guidance, int cf, double a) {
    cfg::ExperimentConfig cfg = resolve_config(args);
    if (n > 0) cfg.sampling.n = n;
    if (guidance >= 0) cfg.sampling.guidance = guidance != 0;
    if (cf >= 0) cfg.sampling.cf_fusion = cf != 0;
    if (a >= 0.0) cfg.sampling.a = a;

    const auto splits = load_dataset(cfg);
    model::PoseModel net = restore_model(cfg, args);
    const auto report = metrics::evaluate(net, splits.test, cfg);
    std::cout << report.to_text();
    fs::create_directories(cfg.out_dir);
    std::ofstream table(cfg.out_dir + "/eval_report.csv");
    table << report.to_table();
    persist_config(cfg, cfg.out_dir);
    return 0;
}

int cmd_ablate(const CommonArgs& args, double a) {
    cfg::ExperimentConfig cfg = resolve_config(args);
    if (a >= 0.0) cfg.sampling.a = a;
    const auto splits = load_dataset(cfg);
    model::PoseModel net = restore_model(cfg, args);

    struct Variant {
        const char* name;
        bool guidance, cf;
    };
    const Variant variants[] = {{"full", true, true},
                                {"no-guidance", false, true},
                                {"no-fusion", true, false},
                                {"plain", false, false}};
    fs::create_directories(cfg.out_dir);
    std::ofstream table(cfg.out_dir + "/ablate.csv");
    for (const auto& v : variants) {
        cfg::ExperimentConfig c = cfg;
        c.sampling.guidance = v.guidance;
        c.sampling.cf_fusion = v.cf;
        const auto rep = metrics::evaluate(net, splits.test, c);
        std::cout << "== variant " << v.name << " ==\n" << rep.to_text();
        std::istringstream rows(rep.to_table());
        std::string row;
        while (std::getline(rows, row)) table << v.name << "," << row << "\n";
    }
    persist_config(cfg, cfg.out_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scene-conditioned articulated pose recovery"};
    app.require_subcommand(1);

    CommonArgs ga, gt, gs, ge, gb;
    int n = -1, guidance = -1, cf = -1;
    double a = -1.0;

    auto* c_gen = app.add_subcommand("gen-data", "generate the procedural dataset");
    add_common(c_gen, ga);
    auto* c_train = app.add_subcommand("train", "train heads then the denoiser");
    add_common(c_train, gt);
    auto* c_sample = app.add_subcommand("sample", "draw poses for the test split");
    add_common(c_sample, gs);
    c_sample->add_option("--n", n, "samples per input");
    c_sample->add_option("--guidance", guidance, "collision guidance on/off (1/0)");
    c_sample->add_option("--cf", cf, "per-joint condition fusion on/off (1/0)");
    c_sample->add_option("--a", a, "guidance scale");
    auto* c_eval = app.add_subcommand("eval", "run the metric suite on the test split");
    add_common(c_eval, ge);
    c_eval->add_option("--n", n, "samples per input");
    c_eval->add_option("--guidance", guidance, "collision guidance on/off (1/0)");
    c_eval->add_option("--cf", cf, "per-joint condition fusion on/off (1/0)");
    c_eval->add_option("--a", a, "guidance scale");
    auto* c_ablate = app.add_subcommand("ablate", "guidance/fusion ablation grid");
    add_common(c_ablate, gb);
    c_ablate->add_option("--a", a, "guidance scale");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (c_gen->parsed()) return cmd_gen_data(ga);
        if (c_train->parsed()) return cmd_train(gt);
        if (c_sample->parsed()) return cmd_sample(gs, n, guidance, cf, a);
        if (c_eval->parsed()) return cmd_eval(ge, n, guidance, cf, a);
        if (c_ablate->parsed()) return cmd_ablate(gb, a);
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
