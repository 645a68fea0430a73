#pragma once

// Training loop: adaptive-moment descent on L = L_d + β·L_p over mini-batches
// of whole LR/HR sequence pairs. The data loss is the mean absolute deviation
// and the physics loss the Frobenius norm of the discrete PDE residual over
// the full count product, both evaluated on the denormalized prediction.
// Deterministic given the seed: fixed iteration order, single-threaded math.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "physr/checkpoint.hpp"
#include "physr/errors.hpp"
#include "physr/eval.hpp"
#include "physr/field_io.hpp"
#include "physr/manifest.hpp"
#include "physr/model.hpp"
#include "physr/residual_grad.hpp"

namespace physr::train {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-6;
    bool decoupled_wd = false;     // true: decay applied outside the moments
    size_t batch_size = 16;
    int epochs = 1;
    double beta = 0.025;           // physics-loss weight
    uint64_t seed = 0;
    int eval_every = 1;            // epochs between test-split evaluations
    bool deterministic = true;     // zeroes the wall-time column in history
    bool squared_physics = false;  // ‖R‖²/count instead of ‖R‖/count
    bool flip_residual_sign = false;
    bool one_sided_residual = false; // derivatives without boundary information
    int fd_order = 4;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    bool freeze_temporal = false, freeze_spatial = false, freeze_global = false;

    void validate() const {
        if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
        if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (beta < 0) throw ConfigError("beta must be >= 0");
        if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
        if (fd_order != 2 && fd_order != 4 && fd_order != 6)
            throw ConfigError("fd_order must be 2, 4, or 6");
        if (!(adam_beta1 > 0 && adam_beta1 < 1 && adam_beta2 > 0 && adam_beta2 < 1))
            throw ConfigError("adam momenta must lie in (0,1)");
    }
};

// A corpus loaded into memory: normalized LR inputs, physical-unit HR truth.
template <typename T>
struct TrainSample {
    std::vector<T> lr_norm;   // [t_lr, C, S_lr]
    size_t t_lr = 0;
    std::vector<T> hr_true;   // [t_hr, C, S_hr], physical units
    Tensor<float> hr_truth_f; // same values, for the evaluation metric
};

template <typename T>
struct TrainData {
    GridSpec lr_grid, hr_grid;
    double dt_hr = 0.0;
    NormStats stats;
    GrayScottParams gs;
    int r_t = 1, r_s = 1;
    std::vector<std::string> channel_names;
    std::vector<TrainSample<T>> samples;
    std::vector<size_t> train_idx, test_idx;

    size_t t_lr() const { return samples.empty() ? 0 : samples[0].t_lr; }
    size_t t_hr() const { return size_t(r_t) * (t_lr() - 1) + 1; }

    static TrainData load(const DatasetManifest& m, const std::string& base_dir) {
        if (!m.has_lr()) throw DataError("manifest has no degraded (LR) samples yet");
        if (m.pde.kind == PDEKind::RBC2D)
            throw ConfigError(
                "training requires a reaction-diffusion corpus; convection data is "
                "ingest/evaluation-only");
        m.norm_stats.validate();

        TrainData d;
        d.stats = m.norm_stats;
        d.gs = m.pde.gs();
        d.r_t = m.degrade_spec.r_t;
        d.r_s = m.degrade_spec.r_s;
        for (size_t i = 0; i < m.samples.size(); ++i) {
            FieldSequence lr = load_field(resolve_path(base_dir, m.samples[i].lr_path));
            FieldSequence hr = load_field(resolve_path(base_dir, m.samples[i].hr_path));
            if (lr.channels() != 2 || hr.channels() != 2)
                throw DataError("training expects two-channel sequences");
            if (i == 0) {
                d.lr_grid = lr.grid;
                d.hr_grid = hr.grid;
                d.dt_hr = hr.dt;
                d.channel_names = hr.channel_names;
            } else if (lr.grid.sizes != d.lr_grid.sizes ||
                       hr.grid.sizes != d.hr_grid.sizes) {
                throw DataError("sample " + std::to_string(i) +
                                " grid differs from the corpus");
            }
            TrainSample<T> s;
            s.t_lr = lr.frames();
            FieldSequence lrn = normalize(lr, m.norm_stats);
            s.lr_norm.assign(lrn.values.data(), lrn.values.data() + lrn.values.numel());
            s.hr_true.assign(hr.values.data(), hr.values.data() + hr.values.numel());
            s.hr_truth_f = hr.values;
            d.samples.push_back(std::move(s));
            if (m.samples[i].split == "train")
                d.train_idx.push_back(i);
            else
                d.test_idx.push_back(i);
        }
        if (d.samples.empty()) throw DataError("manifest lists no samples");
        return d;
    }
};

struct EpochRow {
    int epoch = 0;
    double loss = 0, loss_data = 0, loss_phys = 0;
    double test_eps = std::numeric_limits<double>::quiet_NaN();
    double wall_s = 0;
};

struct TrainResult {
    std::vector<EpochRow> history;
    double best_test_eps = std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    double final_test_eps = std::numeric_limits<double>::quiet_NaN();
    double t_epoch_s_median = 0.0;
};

namespace detail {

inline std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v.size() % 2 ? v[v.size() / 2]
                        : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

} // namespace detail

// Mean test-split ε (%) of the current parameters: forward, denormalize,
// compare with the stored truth using the evaluation metric.
template <typename T>
double evaluate_test_eps(PhySRModel<T>& model, const TrainData<T>& data) {
    if (data.test_idx.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    for (size_t idx : data.test_idx) {
        const auto& s = data.samples[idx];
        auto out = model.forward(s.lr_norm, s.t_lr);
        Tensor<float> hat(s.hr_truth_f.shape());
        const size_t C = size_t(model.cfg.n_channels), S = model.S_hr;
        const size_t t_hr = model.cfg.hr_frames(s.t_lr);
        for (size_t t = 0; t < t_hr; ++t)
            for (size_t c = 0; c < C; ++c) {
                const T sd = T(data.stats.stddev[c]), mn = T(data.stats.mean[c]);
                const T* src = out.data() + (t * C + c) * S;
                float* dst = hat.data() + (t * C + c) * S;
                for (size_t n = 0; n < S; ++n) dst[n] = float(src[n] * sd + mn);
            }
        acc += eval::relative_error(s.hr_truth_f, hat);
    }
    return acc / double(data.test_idx.size());
}

namespace detail {

inline void fnv_bit(uint64_t& h, bool bit) {
    h ^= uint64_t(bit) + 0x9e3779b97f4a7c15ull;
    h *= 1099511628211ull;
}

// Forward + losses for one batch. When grads is true, also backpropagates into
// the model's gradient accumulators (caller zeroes them first). When pattern
// is non-null it receives a hash of every ReLU activation state and every
// L1 difference sign — the complete set of kinks the loss surface has.
template <typename T>
void batch_pass(PhySRModel<T>& model, const TrainData<T>& data,
                const std::vector<size_t>& batch, const resid::GSResidual<T>& residual,
                const TrainConfig& cfg, bool grads, double& l_data, double& l_phys,
                uint64_t* pattern = nullptr) {
    const size_t B = batch.size();
    const size_t C = size_t(model.cfg.n_channels), S = model.S_hr;
    const size_t t_hr = data.t_hr();
    const size_t numel = t_hr * C * S;             // per sample, channels included
    const size_t count_total = t_hr * S * B;       // loss count, channels excluded

    const bool cache_frames = grads || pattern != nullptr;
    std::vector<typename PhySRModel<T>::Cache> caches(cache_frames ? B : 0);
    std::vector<std::vector<T>> phys(B), R(B);
    double sum_abs = 0.0, ssq = 0.0;
    uint64_t hash = 14695981039346656037ull;

    for (size_t b = 0; b < B; ++b) {
        const auto& s = data.samples[batch[b]];
        auto out = model.forward(s.lr_norm, s.t_lr, cache_frames ? &caches[b] : nullptr);
        if (pattern)
            for (const auto& fc : caches[b].frames)
                for (const auto& eo : fc.expand_out)
                    for (const T& x : eo) fnv_bit(hash, x > T(0));
        phys[b].resize(numel);
        for (size_t t = 0; t < t_hr; ++t)
            for (size_t c = 0; c < C; ++c) {
                const T sd = T(data.stats.stddev[c]), mn = T(data.stats.mean[c]);
                const T* src = out.data() + (t * C + c) * S;
                T* dst = phys[b].data() + (t * C + c) * S;
                for (size_t n = 0; n < S; ++n) dst[n] = src[n] * sd + mn;
            }
        for (size_t i = 0; i < numel; ++i) {
            const double diff = double(phys[b][i]) - double(s.hr_true[i]);
            sum_abs += std::abs(diff);
            if (pattern) fnv_bit(hash, diff > 0);
        }
        if (cfg.beta > 0) {
            R[b] = residual.forward(phys[b], t_hr);
            for (const T& r : R[b]) ssq += double(r) * double(r);
        }
    }
    if (pattern) *pattern = hash;

    l_data = sum_abs / (double(B) * double(numel));
    l_phys = cfg.beta > 0
                 ? resid::physics_loss_value(ssq, count_total, cfg.squared_physics)
                 : 0.0;
    if (!grads) return;

    // dL/dR scale: ‖R‖/count → R/(‖R‖·count); squared → 2R/count.
    const double norm_all = std::sqrt(ssq);
    double r_coef = 0.0;
    if (cfg.beta > 0) {
        if (cfg.squared_physics)
            r_coef = 2.0 * cfg.beta / double(count_total);
        else if (norm_all > 0)
            r_coef = cfg.beta / (norm_all * double(count_total));
    }
    const double d_coef = 1.0 / (double(B) * double(numel));

    std::vector<T> dphys(numel), dnorm(numel);
    for (size_t b = 0; b < B; ++b) {
        const auto& s = data.samples[batch[b]];
        for (size_t i = 0; i < numel; ++i) {
            const double diff = double(phys[b][i]) - double(s.hr_true[i]);
            dphys[i] = T(diff > 0 ? d_coef : (diff < 0 ? -d_coef : 0.0));
        }
        if (r_coef != 0.0) {
            std::vector<T> dR(numel);
            for (size_t i = 0; i < numel; ++i) dR[i] = T(r_coef) * R[b][i];
            residual.backward(phys[b], t_hr, dR, dphys);
        }
        for (size_t t = 0; t < t_hr; ++t)
            for (size_t c = 0; c < C; ++c) {
                const T sd = T(data.stats.stddev[c]);
                T* p = dphys.data() + (t * C + c) * S;
                T* q = dnorm.data() + (t * C + c) * S;
                for (size_t n = 0; n < S; ++n) q[n] = p[n] * sd;
            }
        model.backward(caches[b], dnorm);
    }
}

} // namespace detail

// Trains the (already initialized) model in place. Writes the history table
// to history_path and the best-by-test-ε parameters to checkpoint_path when
// those paths are non-empty.
template <typename T>
TrainResult fit(PhySRModel<T>& model, const TrainData<T>& data, const TrainConfig& cfg,
                const std::string& checkpoint_path = "",
                const std::string& history_path = "") {
    cfg.validate();
    if (data.train_idx.empty()) throw DataError("training split is empty");
    if (data.t_lr() < 2) throw DataError("training needs at least two LR frames");

    resid::GSResidual<T> residual;
    if (cfg.beta > 0)
        residual = resid::GSResidual<T>::make(data.gs, data.hr_grid, data.dt_hr,
                                              cfg.fd_order, cfg.one_sided_residual,
                                              cfg.flip_residual_sign);

    auto refs = model.params();
    std::vector<bool> trainable(refs.size());
    for (size_t i = 0; i < refs.size(); ++i) {
        switch (param_group(refs[i].name)) {
            case ParamGroup::Temporal: trainable[i] = !cfg.freeze_temporal; break;
            case ParamGroup::Spatial: trainable[i] = !cfg.freeze_spatial; break;
            case ParamGroup::Global: trainable[i] = !cfg.freeze_global; break;
        }
    }

    // Adaptive-moment state per parameter array.
    std::vector<std::vector<double>> mom1(refs.size()), mom2(refs.size());
    for (size_t i = 0; i < refs.size(); ++i) {
        mom1[i].assign(refs[i].value->size(), 0.0);
        mom2[i].assign(refs[i].value->size(), 0.0);
    }
    long step = 0;

    TrainResult result;
    std::vector<double> epoch_secs;
    std::vector<size_t> order = data.train_idx;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng(Rng::spawn(cfg.seed, uint64_t(epoch) + 1));
        shuffle(order, shuffle_rng);

        double ep_loss = 0, ep_data = 0, ep_phys = 0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<size_t> batch(order.begin() + long(start),
                                      order.begin() + long(stop));
            model.zero_grad();
            double l_data = 0, l_phys = 0;
            detail::batch_pass(model, data, batch, residual, cfg, true, l_data, l_phys);
            const double l_total = l_data + cfg.beta * l_phys;
            if (!std::isfinite(l_total)) {
                std::string ids;
                for (size_t b : batch) ids += (ids.empty() ? "" : ", ") + std::to_string(b);
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch starting at sample " +
                                   std::to_string(start) + " (sample ids: " + ids + ")");
            }

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
            const double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
            for (size_t i = 0; i < refs.size(); ++i) {
                if (!trainable[i]) continue;
                auto& w = *refs[i].value;
                auto& g = *refs[i].grad;
                auto& m1 = mom1[i];
                auto& m2 = mom2[i];
                for (size_t k = 0; k < w.size(); ++k) {
                    double gk = double(g[k]);
                    if (!cfg.decoupled_wd) gk += cfg.weight_decay * double(w[k]);
                    m1[k] = cfg.adam_beta1 * m1[k] + (1.0 - cfg.adam_beta1) * gk;
                    m2[k] = cfg.adam_beta2 * m2[k] + (1.0 - cfg.adam_beta2) * gk * gk;
                    double upd = (m1[k] / bc1) / (std::sqrt(m2[k] / bc2) + cfg.adam_eps);
                    if (cfg.decoupled_wd) upd += cfg.weight_decay * double(w[k]);
                    w[k] = T(double(w[k]) - cfg.learning_rate * upd);
                }
            }

            const size_t bsz = stop - start;
            ep_loss += l_total * double(bsz);
            ep_data += l_data * double(bsz);
            ep_phys += l_phys * double(bsz);
            seen += bsz;
        }

        EpochRow row;
        row.epoch = epoch;
        row.loss = ep_loss / double(seen);
        row.loss_data = ep_data / double(seen);
        row.loss_phys = ep_phys / double(seen);

        const bool scheduled =
            ((epoch + 1) % cfg.eval_every == 0) || epoch + 1 == cfg.epochs;
        if (scheduled && !data.test_idx.empty()) {
            row.test_eps = evaluate_test_eps(model, data);
            result.final_test_eps = row.test_eps;
            if (row.test_eps < result.best_test_eps) {
                result.best_test_eps = row.test_eps;
                result.best_epoch = epoch;
                if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, model);
            }
        }

        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        epoch_secs.push_back(secs);
        row.wall_s = cfg.deterministic ? 0.0 : secs;
        result.history.push_back(row);
    }

    result.t_epoch_s_median = detail::median(epoch_secs);
    if (data.test_idx.empty()) {
        // No test split: retain the final parameters as the checkpoint.
        if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, model);
    }

    if (!history_path.empty()) {
        std::ofstream out(history_path);
        if (!out) throw DataError("cannot write history: " + history_path);
        out << "epoch\tloss\tloss_data\tloss_phys\ttest_eps\twall_s\n";
        for (const auto& r : result.history)
            out << r.epoch << '\t' << detail::fmt_g17(r.loss) << '\t'
                << detail::fmt_g17(r.loss_data) << '\t' << detail::fmt_g17(r.loss_phys)
                << '\t' << detail::fmt_g17(r.test_eps) << '\t'
                << detail::fmt_g17(r.wall_s) << '\n';
    }
    return result;
}

struct GradCheckReport {
    double worst = 0.0;
    // Worst relative deviation per trainable parameter array.
    std::vector<std::pair<std::string, double>> groups;
    // Entries whose probe window straddles a kink of the loss surface (a ReLU
    // activation or an L1 sign flipped between w−ε and w+ε): no finite
    // difference estimates a one-sided derivative there. A wrong analytic
    // gradient leaves the activation pattern alone and is always reported.
    size_t skipped = 0;
};

// Central-difference check of the full training loss (data + physics) against
// the analytic gradients, on one batch. Frozen groups are skipped entirely.
// Each entry is probed at ε and ε/2; probes that flip any activation state
// are counted in `skipped`, the rest are compared at the ε/2 estimate.
// Relative deviation uses a floor so that near-zero gradients are compared
// absolutely at the same tolerance scale.
template <typename T>
GradCheckReport gradient_check(PhySRModel<T>& model, const TrainData<T>& data,
                               const TrainConfig& cfg, size_t entries_per_array = 8,
                               double fd_eps = 1e-4) {
    cfg.validate();
    if (model.cfg.features > 4 || model.S_lr > 36)
        throw ConfigError("gradient check expects a miniature model "
                          "(features <= 4, low-res grid <= 6x6)");
    if (data.train_idx.empty()) throw DataError("training split is empty");

    resid::GSResidual<T> residual;
    if (cfg.beta > 0)
        residual = resid::GSResidual<T>::make(data.gs, data.hr_grid, data.dt_hr,
                                              cfg.fd_order, cfg.one_sided_residual,
                                              cfg.flip_residual_sign);

    std::vector<size_t> batch(
        data.train_idx.begin(),
        data.train_idx.begin() +
            long(std::min(cfg.batch_size, data.train_idx.size())));

    auto loss_value = [&](uint64_t& pattern) {
        double l_data = 0, l_phys = 0;
        detail::batch_pass(model, data, batch, residual, cfg, false, l_data, l_phys,
                           &pattern);
        return l_data + cfg.beta * l_phys;
    };

    model.zero_grad();
    {
        double l_data = 0, l_phys = 0;
        detail::batch_pass(model, data, batch, residual, cfg, true, l_data, l_phys);
    }

    GradCheckReport report;
    for (auto& p : model.params()) {
        const ParamGroup grp = param_group(p.name);
        if ((grp == ParamGroup::Temporal && cfg.freeze_temporal) ||
            (grp == ParamGroup::Spatial && cfg.freeze_spatial) ||
            (grp == ParamGroup::Global && cfg.freeze_global))
            continue;
        auto& w = *p.value;
        auto& g = *p.grad;
        double worst = 0.0;
        const size_t stride = std::max<size_t>(1, w.size() / entries_per_array);
        for (size_t i = 0; i < w.size(); i += stride) {
            const T keep = w[i];
            uint64_t pp = 0, pm = 0, pp2 = 0, pm2 = 0;
            w[i] = keep + T(fd_eps);
            const double lp = loss_value(pp);
            w[i] = keep - T(fd_eps);
            const double lm = loss_value(pm);
            w[i] = keep + T(fd_eps / 2);
            const double lp2 = loss_value(pp2);
            w[i] = keep - T(fd_eps / 2);
            const double lm2 = loss_value(pm2);
            w[i] = keep;
            if (pp != pm || pp2 != pm2) { // a kink sits inside the probe window
                ++report.skipped;
                continue;
            }
            const double fd1 = (lp - lm) / (2.0 * fd_eps);
            const double fd2 = (lp2 - lm2) / fd_eps;
            const double a = double(g[i]);
            const double scale =
                std::max({std::abs(fd1), std::abs(fd2), std::abs(a), 1e-3});
            if (std::abs(fd1 - fd2) > 5e-3 * scale) { // numeric backstop
                ++report.skipped;
                continue;
            }
            // The half-step estimate is the cleaner of the consistent pair.
            const double dev =
                std::abs(a - fd2) / std::max({std::abs(a), std::abs(fd2), 1e-3});
            worst = std::max(worst, dev);
        }
        report.groups.emplace_back(p.name, worst);
        report.worst = std::max(report.worst, worst);
    }
    return report;
}

} // namespace physr::train
