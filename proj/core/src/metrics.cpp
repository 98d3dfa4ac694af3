// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#include "egopose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace egopose::metrics {

namespace {

constexpr int kJ = body::kJointCount;

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Vec3 sub3(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

double mean_over_mask(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                      const scene::VisibilityMask& vis, bool visible_set) {
    double sum = 0.0;
    int n = 0;
    for (int j = 0; j < kJ; ++j) {
        if ((vis.v[j] != 0) != visible_set) continue;
        sum += norm3(sub3(pred[j], gt[j]));
        ++n;
    }
    if (n == 0) throw std::invalid_argument("mpjpe: empty joint selection");
    return sum / n;
}

std::vector<Vec3> pelvis_align(const std::vector<Vec3>& joints) {
    std::vector<Vec3> out(joints.size());
    for (size_t j = 0; j < joints.size(); ++j) out[j] = sub3(joints[j], joints[0]);
    return out;
}

// Largest eigenvector of a symmetric 4x4 matrix by cyclic Jacobi rotations.
std::array<double, 4> top_eigenvector4(std::array<double, 16> m) {
    std::array<double, 16> v{};
    for (int i = 0; i < 4; ++i) v[i * 4 + i] = 1.0;
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 4; ++p)
            for (int q = p + 1; q < 4; ++q) off += m[p * 4 + q] * m[p * 4 + q];
        if (off < 1e-24) break;
        for (int p = 0; p < 4; ++p)
            for (int q = p + 1; q < 4; ++q) {
                const double apq = m[p * 4 + q];
                if (std::abs(apq) < 1e-18) continue;
                const double theta = (m[q * 4 + q] - m[p * 4 + p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < 4; ++k) {
                    const double mkp = m[k * 4 + p], mkq = m[k * 4 + q];
                    m[k * 4 + p] = c * mkp - s * mkq;
                    m[k * 4 + q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < 4; ++k) {
                    const double mpk = m[p * 4 + k], mqk = m[q * 4 + k];
                    m[p * 4 + k] = c * mpk - s * mqk;
                    m[q * 4 + k] = s * mpk + c * mqk;
                }
                for (int k = 0; k < 4; ++k) {
                    const double vkp = v[k * 4 + p], vkq = v[k * 4 + q];
                    v[k * 4 + p] = c * vkp - s * vkq;
                    v[k * 4 + q] = s * vkp + c * vkq;
                }
            }
    }
    int best = 0;
    for (int i = 1; i < 4; ++i)
        if (m[i * 4 + i] > m[best * 4 + best]) best = i;
    return {v[0 * 4 + best], v[1 * 4 + best], v[2 * 4 + best], v[3 * 4 + best]};
}

body::Mat3 quat_to_matrix(const std::array<double, 4>& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
            2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

}  // namespace

double mpjpe_global(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                    const scene::VisibilityMask& vis) {
    return mean_over_mask(pred, gt, vis, true);
}

double mpjpe_pelvis(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                    const scene::VisibilityMask& vis) {
    return mean_over_mask(pelvis_align(pred), pelvis_align(gt), vis, true);
}

double mpjpe_procrustes(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt,
                        const scene::VisibilityMask& vis) {
    std::vector<Vec3> p, q;
    for (int j = 0; j < kJ; ++j)
        if (vis.v[j]) {
            p.push_back(pred[j]);
            q.push_back(gt[j]);
        }
    const size_t n = p.size();
    if (n < 3)
        throw std::invalid_argument("procrustes: needs at least 3 visible joints");
    Vec3 mp{0, 0, 0}, mq{0, 0, 0};
    for (size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
            mp[k] += p[i][k] / n;
            mq[k] += q[i][k] / n;
        }
    double max_cross = 0.0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            const Vec3 a = sub3(q[i], mq), b = sub3(q[j], mq);
            const Vec3 c{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                         a[0] * b[1] - a[1] * b[0]};
            max_cross = std::max(max_cross, norm3(c));
        }
    if (max_cross < 1e-10)
        throw std::invalid_argument("procrustes: visible joints are collinear");

    // Rotation by the quaternion method: maximize sum q_c . R p_c.
    double h[9] = {0};
    double p_var = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec3 a = sub3(p[i], mp), b = sub3(q[i], mq);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) h[r * 3 + c] += a[r] * b[c];
        p_var += a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    }
    const double sxx = h[0], sxy = h[1], sxz = h[2], syx = h[3], syy = h[4], syz = h[5],
                 szx = h[6], szy = h[7], szz = h[8];
    std::array<double, 16> nmat{
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz};
    const body::Mat3 rot = quat_to_matrix(top_eigenvector4(nmat));

    double num = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec3 a = sub3(p[i], mp), b = sub3(q[i], mq);
        for (int r = 0; r < 3; ++r)
            num += b[r] * (rot[r * 3 + 0] * a[0] + rot[r * 3 + 1] * a[1] + rot[r * 3 + 2] * a[2]);
    }
    const double s = p_var > 1e-12 ? num / p_var : 1.0;

    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec3 a = sub3(p[i], mp), b = sub3(q[i], mq);
        Vec3 e;
        for (int r = 0; r < 3; ++r)
            e[r] = s * (rot[r * 3 + 0] * a[0] + rot[r * 3 + 1] * a[1] + rot[r * 3 + 2] * a[2]) -
                   b[r];
        sum += norm3(e);
    }
    return sum / n;
}

double min_of_n_mpjpe(const std::vector<std::vector<Vec3>>& preds, const std::vector<Vec3>& gt,
                      const scene::VisibilityMask& vis) {
    if (preds.empty()) throw std::invalid_argument("min_of_n_mpjpe: empty sample set");
    if (vis.visible_count() == kJ) return 0.0;
    const auto gt_al = pelvis_align(gt);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& pred : preds)
        best = std::min(best, mean_over_mask(pelvis_align(pred), gt_al, vis, false));
    return best;
}

double collision_ratio(const std::vector<body::Capsule>& capsules,
                       const std::vector<Vec3>& scene_points, double tau) {
    if (scene_points.empty()) return 0.0;
    size_t inside = 0;
    for (const auto& q : scene_points)
        if (body::capsule_occupancy(q, capsules, tau) > 0.0) ++inside;
    return static_cast<double>(inside) / static_cast<double>(scene_points.size());
}

bool in_contact(const std::vector<body::Capsule>& capsules,
                const std::vector<Vec3>& scene_points, double threshold) {
    for (const auto& q : scene_points)
        if (body::capsule_surface_distance(q, capsules) <= threshold) return true;
    return false;
}

double sample_std_mm(const std::vector<std::vector<Vec3>>& preds,
                     const scene::VisibilityMask& vis) {
    const size_t n = preds.size();
    const int inv = kJ - vis.visible_count();
    if (n < 2 || inv == 0) return 0.0;
    double acc = 0.0;
    for (int j = 0; j < kJ; ++j) {
        if (vis.v[j]) continue;
        for (int k = 0; k < 3; ++k) {
            double mean = 0.0;
            for (const auto& p : preds) mean += p[j][k] / n;
            double var = 0.0;
            for (const auto& p : preds) var += (p[j][k] - mean) * (p[j][k] - mean) / n;
            acc += std::sqrt(var);
        }
    }
    return acc / (inv * 3) * 1000.0;
}

double apd_mm(const std::vector<std::vector<Vec3>>& preds, const scene::VisibilityMask& vis) {
    const size_t n = preds.size();
    const int inv = kJ - vis.visible_count();
    if (n < 2 || inv == 0) return 0.0;
    double acc = 0.0;
    size_t pairs = 0;
    for (size_t a = 0; a < n; ++a)
        for (size_t b = a + 1; b < n; ++b) {
            double d = 0.0;
            for (int j = 0; j < kJ; ++j)
                if (!vis.v[j]) d += norm3(sub3(preds[a][j], preds[b][j])) / inv;
            acc += d;
            ++pairs;
        }
    return acc / pairs * 1000.0;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "inputs: " << n_inputs << "  samples per input: " << n_samples << "\n";
    os << "visible joints (mm):  global " << g_mpjpe_mm << "  pelvis-aligned " << mpjpe_mm
       << "  similarity-aligned " << pa_mpjpe_mm;
    if (pa_skipped > 0) os << " (skipped " << pa_skipped << ")";
    os << "\ninvisible joints, best-of-n (mm):";
    for (const auto& [n, v] : min_of_n_mm) os << "  n=" << n << " " << v;
    os << "\nscene: collision " << collision << "  contact " << contact;
    os << "\ndiversity (mm): std " << std_mm << "  apd " << apd_mm << "\n";
    return os.str();
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << "n_inputs," << n_inputs << "\n";
    os << "n_samples," << n_samples << "\n";
    os << "g_mpjpe_mm," << g_mpjpe_mm << "\n";
    os << "mpjpe_mm," << mpjpe_mm << "\n";
    os << "pa_mpjpe_mm," << pa_mpjpe_mm << "\n";
    for (const auto& [n, v] : min_of_n_mm) os << "min_of_" << n << "_mm," << v << "\n";
    os << "collision," << collision << "\n";
    os << "contact," << contact << "\n";
    os << "std_mm," << std_mm << "\n";
    os << "apd_mm," << apd_mm << "\n";
    return os.str();
}

EvalReport evaluate(const model::PoseModel& net, const std::vector<data::SampleRecord>& records,
                    const cfg::ExperimentConfig& cfg) {
    EvalReport rep;
    const auto& skel = body::Skeleton::default_human();
    const auto& caps = body::CapsuleParams::default_params();
    const auto ns = diff::NoiseSchedule::make(cfg.schedule);

    int n_max = cfg.sampling.n;
    for (int n : cfg.eval.n_list) n_max = std::max(n_max, n);
    rep.n_samples = cfg.sampling.n;

    size_t limit = records.size();
    if (cfg.eval.max_inputs > 0)
        limit = std::min(limit, static_cast<size_t>(cfg.eval.max_inputs));

    double g_sum = 0, p_sum = 0, pa_sum = 0, coll_sum = 0, std_sum = 0, apd_sum = 0;
    int pa_count = 0, div_count = 0;
    size_t contact_hits = 0, contact_total = 0;
    std::map<int, double> min_sums;
    std::map<int, int> min_counts;

    for (size_t i = 0; i < limit; ++i) {
        const auto& rec = records[i];
        const scene::ScenePointCloud cloud = rec.scene_cloud();

        diff::SamplerInputs si;
        si.net = &net;
        si.cond.keypoints = rec.keypoints;
        si.cond.vis = rec.vis.v;
        si.cond.bbox = rec.bbox;
        si.cond.camera = rec.camera;

        if (cfg.sampling.gt_translation) {
            si.gamma_hat = rec.gamma.gamma;
        } else {
            model::ConditionInputs head_ci = si.cond;
            // The head has no access to ground truth at evaluation time: crop
            // around a scene-centroid seed first, then re-crop at the estimate.
            body::Translation seed;
            for (const auto& p : cloud.points)
                for (int k = 0; k < 3; ++k) seed.gamma[k] += p[k] / cloud.points.size();
            head_ci.crop = scene::crop_scene(cloud, seed, cfg.model.crop_points);
            const auto g = net.predict_translation(head_ci).value();
            si.gamma_hat = {g[0], g[1], g[2]};
            const auto b = net.predict_shape(head_ci).value();
            for (int k = 0; k < body::kShapeDim; ++k) si.beta_hat.beta[k] = b[k];
        }
        body::Translation gh;
        gh.gamma = si.gamma_hat;
        si.cond.crop = scene::crop_scene(cloud, gh, cfg.model.crop_points);
        if (cfg.sampling.guidance)
            si.guidance_points = scene::guidance_cloud(cloud, gh);

        std::vector<std::vector<Vec3>> joints_by_sample;
        for (int s = 0; s < n_max; ++s) {
            RngStream rng(cfg.seed, "eval-sample", i * 4096 + static_cast<size_t>(s));
            const body::PoseState pose = diff::guided_sample(ns, si, cfg.sampling, rng);
            body::Translation gamma_fk;
            gamma_fk.gamma = si.gamma_hat;
            joints_by_sample.push_back(
                body::forward_kinematics(pose, si.beta_hat, gamma_fk, skel));
            if (s < cfg.sampling.n) {
                const auto capsules = body::build_capsules(joints_by_sample.back(), skel, caps,
                                                           si.beta_hat);
                coll_sum += collision_ratio(capsules, cloud.points, caps.tau) /
                            (static_cast<double>(limit) * cfg.sampling.n);
                contact_hits +=
                    in_contact(capsules, cloud.points, cfg.eval.contact_threshold) ? 1 : 0;
                ++contact_total;
            }
        }

        const auto jgt = body::forward_kinematics(rec.theta, rec.beta, rec.gamma, skel);
        double g_rec = 0, p_rec = 0, pa_rec = 0;
        int pa_rec_n = 0;
        for (int s = 0; s < cfg.sampling.n; ++s) {
            g_rec += mpjpe_global(joints_by_sample[s], jgt, rec.vis) / cfg.sampling.n;
            p_rec += mpjpe_pelvis(joints_by_sample[s], jgt, rec.vis) / cfg.sampling.n;
            try {
                pa_rec += mpjpe_procrustes(joints_by_sample[s], jgt, rec.vis);
                ++pa_rec_n;
            } catch (const std::invalid_argument&) {
            }
        }
        g_sum += g_rec;
        p_sum += p_rec;
        if (pa_rec_n > 0) {
            pa_sum += pa_rec / pa_rec_n;
            ++pa_count;
        } else {
            ++rep.pa_skipped;
        }

        if (rec.vis.visible_count() < kJ) {
            for (int n : cfg.eval.n_list) {
                const int nn = std::min(n, n_max);
                std::vector<std::vector<Vec3>> pool(joints_by_sample.begin(),
                                                    joints_by_sample.begin() + nn);
                min_sums[n] += min_of_n_mpjpe(pool, jgt, rec.vis);
                min_counts[n] += 1;
            }
        }

        if (rec.vis.visible_count() < kJ) {
            std::vector<std::vector<Vec3>> div_pool(joints_by_sample.begin(),
                                                    joints_by_sample.begin() + cfg.sampling.n);
            std_sum += sample_std_mm(div_pool, rec.vis);
            apd_sum += apd_mm(div_pool, rec.vis);
            ++div_count;
        }
    }

    rep.n_inputs = static_cast<int>(limit);
    rep.g_mpjpe_mm = limit ? g_sum / limit * 1000.0 : 0.0;
    rep.mpjpe_mm = limit ? p_sum / limit * 1000.0 : 0.0;
    rep.pa_mpjpe_mm = pa_count ? pa_sum / pa_count * 1000.0 : 0.0;
    for (const auto& [n, s] : min_sums)
        rep.min_of_n_mm[n] = s / std::max(min_counts[n], 1) * 1000.0;
    rep.collision = coll_sum;
    rep.contact = contact_total ? static_cast<double>(contact_hits) / contact_total : 0.0;
    rep.std_mm = div_count ? std_sum / div_count : 0.0;
    rep.apd_mm = div_count ? apd_sum / div_count : 0.0;
    return rep;
}

}  // namespace egopose::metrics
