#pragma once

// Comparative studies on a common corpus: the four-model ablation grid, the
// finite-difference kernel-order sweep, and inference timing. Every run in a
// study shares seeds, data order, and budget — only the designated knob moves,
// and a hash over the remaining configuration enforces that.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "physr/model.hpp"
#include "physr/train.hpp"

namespace physr::studies {

// Model variants:
//   A  full model
//   B  plain convolution in place of the recurrent temporal cell
//   C  data loss only (beta = 0)
//   D  zero padding and one-sided residual stencils (no boundary knowledge)
enum class Variant { A, B, C, D };

inline char variant_tag(Variant v) {
    switch (v) {
        case Variant::A: return 'A';
        case Variant::B: return 'B';
        case Variant::C: return 'C';
        default: return 'D';
    }
}

inline Variant variant_from_tag(char c) {
    switch (c) {
        case 'A': case 'a': return Variant::A;
        case 'B': case 'b': return Variant::B;
        case 'C': case 'c': return Variant::C;
        case 'D': case 'd': return Variant::D;
        default: throw ConfigError(std::string("unknown ablation variant '") + c +
                                   "' (expected A, B, C, or D)");
    }
}

// Each variant flips exactly one knob relative to the full model A.
inline void apply_variant(Variant v, PhySRConfig& mc, train::TrainConfig& tc) {
    switch (v) {
        case Variant::A:
            break;
        case Variant::B:
            mc.use_convlstm = false;
            break;
        case Variant::C:
            tc.beta = 0.0;
            break;
        case Variant::D:
            mc.padding = nn::Padding::Zero;
            tc.one_sided_residual = true;
            break;
    }
}

namespace detail {

inline void hash_bytes(uint64_t& h, const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 1099511628211ull;
    }
}

template <typename V>
inline void hash_val(uint64_t& h, V v) {
    hash_bytes(h, &v, sizeof(v));
}

inline double now_s() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

} // namespace detail

// FNV-1a over every configuration field, in declaration order.
inline uint64_t config_hash(const PhySRConfig& mc, const train::TrainConfig& tc) {
    uint64_t h = 14695981039346656037ull;
    detail::hash_val(h, int32_t(mc.n_res_blocks));
    detail::hash_val(h, int32_t(mc.features));
    detail::hash_val(h, int32_t(mc.kernel_size));
    detail::hash_val(h, int32_t(mc.expansion));
    detail::hash_val(h, int32_t(mc.r_t));
    detail::hash_val(h, int32_t(mc.r_s));
    detail::hash_val(h, int32_t(mc.spatial_dims));
    detail::hash_val(h, int32_t(mc.n_channels));
    detail::hash_val(h, int32_t(mc.padding));
    detail::hash_val(h, uint8_t(mc.use_convlstm));
    detail::hash_val(h, tc.learning_rate);
    detail::hash_val(h, tc.weight_decay);
    detail::hash_val(h, uint8_t(tc.decoupled_wd));
    detail::hash_val(h, uint64_t(tc.batch_size));
    detail::hash_val(h, int32_t(tc.epochs));
    detail::hash_val(h, tc.beta);
    detail::hash_val(h, tc.seed);
    detail::hash_val(h, int32_t(tc.eval_every));
    detail::hash_val(h, uint8_t(tc.deterministic));
    detail::hash_val(h, uint8_t(tc.squared_physics));
    detail::hash_val(h, uint8_t(tc.flip_residual_sign));
    detail::hash_val(h, uint8_t(tc.one_sided_residual));
    detail::hash_val(h, int32_t(tc.fd_order));
    detail::hash_val(h, tc.adam_beta1);
    detail::hash_val(h, tc.adam_beta2);
    detail::hash_val(h, tc.adam_eps);
    detail::hash_val(h, uint8_t(tc.freeze_temporal));
    detail::hash_val(h, uint8_t(tc.freeze_spatial));
    detail::hash_val(h, uint8_t(tc.freeze_global));
    return h;
}

// Hash with the four ablation knobs pinned to canonical values: two variant
// configs share a training budget if and only if their budget hashes agree.
inline uint64_t budget_hash(const PhySRConfig& mc, const train::TrainConfig& tc) {
    PhySRConfig m = mc;
    train::TrainConfig t = tc;
    m.use_convlstm = true;
    m.padding = nn::Padding::Periodic;
    t.beta = 0.0;
    t.one_sided_residual = false;
    return config_hash(m, t);
}

// Median wall-clock milliseconds per reconstructed HR frame, one warm-up
// forward followed by `reps` timed repetitions, run strictly sequentially.
template <typename T>
double measure_infer_ms(PhySRModel<T>& model, const std::vector<T>& lr_norm,
                        size_t t_lr, int reps = 21) {
    if (reps < 1) throw ConfigError("timing needs at least one repetition");
    const size_t t_hr = model.cfg.hr_frames(t_lr);
    volatile T sink = T(0);
    std::vector<T> out = model.forward(lr_norm, t_lr);  // warm-up
    sink = out[0];
    std::vector<double> ms(static_cast<size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        double t0 = detail::now_s();
        out = model.forward(lr_norm, t_lr);
        ms[size_t(r)] = (detail::now_s() - t0) * 1000.0;
        sink = out[0];
    }
    (void)sink;
    return train::detail::median(ms) / double(t_hr);
}

struct VariantResult {
    Variant variant = Variant::A;
    std::vector<uint64_t> seeds;
    std::vector<double> per_seed_eps;  // best test ε per seed, %
    double mean_eps = 0.0;
    double std_eps = 0.0;              // population std over seeds
    uint64_t param_count = 0;
    double t_epoch_s = 0.0;            // median per-epoch seconds over seeds
    double t_infer_ms = 0.0;           // per reconstructed HR frame
};

struct StudyOptions {
    int n_seeds = 3;
    uint64_t base_seed = 0;
    int timing_reps = 21;
    std::string out_dir;  // when set: per-run history/checkpoint files land here
};

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / double(v.size()));
}

} // namespace detail

// Train one variant across the shared seed set and aggregate its test error.
template <typename T>
VariantResult run_variant(Variant v, const train::TrainData<T>& data,
                          const PhySRConfig& base_mc, const train::TrainConfig& base_tc,
                          const StudyOptions& opt) {
    if (opt.n_seeds < 1) throw ConfigError("studies need at least one seed");
    if (data.test_idx.empty()) throw DataError("studies require a test split");
    PhySRConfig mc = base_mc;
    train::TrainConfig tc = base_tc;
    apply_variant(v, mc, tc);
    if (budget_hash(mc, tc) != budget_hash(base_mc, base_tc))
        throw ConfigError("ablation variants must share the training budget");

    VariantResult res;
    res.variant = v;
    std::vector<double> epoch_s;
    for (int i = 0; i < opt.n_seeds; ++i) {
        uint64_t seed = opt.base_seed + uint64_t(i);
        tc.seed = seed;
        auto model = PhySRModel<T>::make(mc, data.lr_grid.sizes);
        model.init(seed);
        std::string stem;
        if (!opt.out_dir.empty())
            stem = opt.out_dir + "/" + std::string(1, variant_tag(v)) + "_seed" +
                   std::to_string(seed);
        train::TrainResult r =
            train::fit(model, data, tc, stem.empty() ? "" : stem + ".ckpt",
                       stem.empty() ? "" : stem + ".history.tsv");
        res.seeds.push_back(seed);
        res.per_seed_eps.push_back(r.best_test_eps);
        epoch_s.push_back(r.t_epoch_s_median);
        if (i == 0) {
            res.param_count = model.param_count();
            const auto& s = data.samples[data.test_idx[0]];
            res.t_infer_ms = measure_infer_ms(model, s.lr_norm, s.t_lr, opt.timing_reps);
        }
    }
    detail::mean_std(res.per_seed_eps, res.mean_eps, res.std_eps);
    res.t_epoch_s = train::detail::median(epoch_s);
    return res;
}

template <typename T>
std::vector<VariantResult> ablate(const std::vector<Variant>& variants,
                                  const train::TrainData<T>& data,
                                  const PhySRConfig& mc, const train::TrainConfig& tc,
                                  const StudyOptions& opt) {
    if (variants.empty()) throw ConfigError("ablation needs at least one variant");
    std::vector<VariantResult> rows;
    for (Variant v : variants) rows.push_back(run_variant(v, data, mc, tc, opt));
    return rows;
}

inline void write_ablate_tsv(const std::vector<VariantResult>& rows,
                             const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open report for writing: " + path);
    f << "variant\tmean_eps_percent\tstd_eps_percent\tper_seed_eps\tparam_count"
         "\tt_epoch_s\tt_infer_ms_per_frame\n";
    for (const VariantResult& r : rows) {
        f << variant_tag(r.variant) << '\t' << r.mean_eps << '\t' << r.std_eps << '\t';
        for (size_t i = 0; i < r.per_seed_eps.size(); ++i)
            f << (i ? ";" : "") << r.per_seed_eps[i];
        f << '\t' << r.param_count << '\t' << r.t_epoch_s << '\t' << r.t_infer_ms
          << '\n';
    }
    if (!rows.empty()) {
        f << "# seeds";
        for (uint64_t s : rows[0].seeds) f << '\t' << s;
        f << '\n';
    }
    if (!f) throw DataError("report write failed: " + path);
}

struct KernelRow {
    int order = 0;
    std::vector<double> per_run_eps;
    std::vector<double> per_run_t_epoch_s;
    double eps = 0.0;        // mean over runs
    double t_epoch_s = 0.0;  // median over runs
};

// Stencil footprint label for a derivative order: order-2k kernels span
// (2k+1) nodes per axis.
inline std::string stencil_name(int order) {
    int w = order + 1;
    return std::to_string(w) + "x" + std::to_string(w);
}

// Repeat the full-model training once per run and FD order; runs differ only
// in seed so the per-order timing medians come from identical workloads.
template <typename T>
std::vector<KernelRow> kernel_order_study(const std::vector<int>& orders,
                                          const train::TrainData<T>& data,
                                          const PhySRConfig& mc,
                                          const train::TrainConfig& tc,
                                          int runs_per_order, const StudyOptions& opt) {
    if (orders.empty()) throw ConfigError("kernel study needs at least one order");
    if (runs_per_order < 1) throw ConfigError("kernel study needs at least one run");
    if (data.test_idx.empty()) throw DataError("studies require a test split");
    std::vector<KernelRow> rows;
    for (int order : orders) {
        train::TrainConfig otc = tc;
        otc.fd_order = order;
        KernelRow row;
        row.order = order;
        for (int r = 0; r < runs_per_order; ++r) {
            uint64_t seed = opt.base_seed + uint64_t(r);
            otc.seed = seed;
            auto model = PhySRModel<T>::make(mc, data.lr_grid.sizes);
            model.init(seed);
            std::string stem;
            if (!opt.out_dir.empty())
                stem = opt.out_dir + "/order" + std::to_string(order) + "_seed" +
                       std::to_string(seed);
            train::TrainResult res =
                train::fit(model, data, otc, "", stem.empty() ? "" : stem + ".history.tsv");
            row.per_run_eps.push_back(res.best_test_eps);
            row.per_run_t_epoch_s.push_back(res.t_epoch_s_median);
        }
        double sd = 0.0;
        detail::mean_std(row.per_run_eps, row.eps, sd);
        row.t_epoch_s = train::detail::median(row.per_run_t_epoch_s);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_kernel_tsv(const std::vector<KernelRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open report for writing: " + path);
    f << "order\tstencil\tt_epoch_s\teps_percent\tper_run_eps\n";
    for (const KernelRow& r : rows) {
        f << r.order << '\t' << stencil_name(r.order) << '\t' << r.t_epoch_s << '\t'
          << r.eps << '\t';
        for (size_t i = 0; i < r.per_run_eps.size(); ++i)
            f << (i ? ";" : "") << r.per_run_eps[i];
        f << '\n';
    }
    if (!f) throw DataError("report write failed: " + path);
}

} // namespace physr::studies
