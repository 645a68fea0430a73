#include "physr/eval.hpp"

#include <cmath>
#include <fstream>

namespace physr::eval {
namespace {

template <typename T>
double norm_ratio(const Tensor<T>& hr_true, const Tensor<T>& hr_hat) {
    if (!hr_true.same_shape(hr_hat))
        throw DataError("relative_error: shape mismatch " + shape_str(hr_true) +
                        " vs " + shape_str(hr_hat));
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < hr_true.numel(); ++i) {
        double t = double(hr_true[i]), h = double(hr_hat[i]);
        num += (t - h) * (t - h);
        den += t * t;
    }
    if (!(den > 0.0))
        throw DataError("relative_error: ground truth has zero norm");
    return std::sqrt(num) / std::sqrt(den);
}

} // namespace

double relative_error(const Tensor<double>& t, const Tensor<double>& h) {
    return std::sqrt(norm_ratio(t, h)) * 100.0;
}
double relative_error(const Tensor<float>& t, const Tensor<float>& h) {
    return std::sqrt(norm_ratio(t, h)) * 100.0;
}
double conventional_rel_l2(const Tensor<double>& t, const Tensor<double>& h) {
    return norm_ratio(t, h) * 100.0;
}
double conventional_rel_l2(const Tensor<float>& t, const Tensor<float>& h) {
    return norm_ratio(t, h) * 100.0;
}

BaselineResult interp_baseline(const FieldSequence& lr, const degrade::DegradeSpec& spec) {
    lr.validate();
    spec.validate();
    const int m = lr.grid.spatial_dims;
    const size_t C = lr.channels();
    const size_t T_lr = lr.frames();
    if (T_lr < 1) throw DataError("interp_baseline: empty sequence");

    GridSpec hr_grid = lr.grid;
    for (int a = 0; a < m; ++a) {
        hr_grid.sizes[size_t(a)] *= size_t(spec.r_s);
        hr_grid.spacing[size_t(a)] /= double(spec.r_s);
    }
    const size_t T_hr = size_t(spec.r_t) * (T_lr - 1) + 1;
    FieldSequence out = FieldSequence::make(T_hr, lr.channel_names, hr_grid,
                                            lr.dt / double(spec.r_t));

    // Per-axis interpolation tables: HR index -> (lo, hi, weight of hi).
    struct Node { size_t lo, hi; double w; bool clamped; };
    auto make_table = [](size_t n_hr, size_t n_lr, size_t r) {
        std::vector<Node> t(n_hr);
        for (size_t i = 0; i < n_hr; ++i) {
            double pos = double(i) / double(r);
            double f = std::floor(pos);
            size_t lo = size_t(f);
            bool clamped = false;
            if (lo >= n_lr - 1) {
                lo = n_lr - 1;
                clamped = pos > double(n_lr - 1);
            }
            size_t hi = std::min(lo + 1, n_lr - 1);
            double w = pos - double(lo);
            if (clamped) w = 0.0;
            t[i] = {lo, hi, w, clamped};
        }
        return t;
    };

    std::vector<std::vector<Node>> sp_tab;
    for (int a = 0; a < m; ++a)
        sp_tab.push_back(make_table(hr_grid.sizes[size_t(a)], lr.grid.sizes[size_t(a)],
                                    size_t(spec.r_s)));
    std::vector<Node> t_tab = make_table(T_hr, T_lr, size_t(spec.r_t));

    const size_t n_hr = hr_grid.num_nodes();
    const auto& ls = lr.grid.sizes;
    size_t clamped = 0;

    std::vector<size_t> hi_idx(size_t(m), 0);
    for (size_t flat = 0; flat < n_hr; ++flat) {
        // Decompose flat HR index into per-axis indices (row-major).
        size_t rem = flat;
        for (int a = m - 1; a >= 0; --a) {
            hi_idx[size_t(a)] = rem % hr_grid.sizes[size_t(a)];
            rem /= hr_grid.sizes[size_t(a)];
        }
        bool any_clamped = false;
        for (int a = 0; a < m; ++a)
            any_clamped |= sp_tab[size_t(a)][hi_idx[size_t(a)]].clamped;
        if (any_clamped) ++clamped;

        for (size_t k = 0; k < T_hr; ++k) {
            const Node& tn = t_tab[k];
            for (size_t c = 0; c < C; ++c) {
                // Sum over the 2^(m+1) corners (time × space), product weights.
                double acc = 0.0;
                const size_t corners = size_t(1) << (m + 1);
                for (size_t mask = 0; mask < corners; ++mask) {
                    double w = (mask & 1) ? tn.w : 1.0 - tn.w;
                    if (w == 0.0) continue;
                    size_t tl = (mask & 1) ? tn.hi : tn.lo;
                    size_t off = 0;
                    for (int a = 0; a < m; ++a) {
                        const Node& sn = sp_tab[size_t(a)][hi_idx[size_t(a)]];
                        bool hi_corner = (mask >> (a + 1)) & 1;
                        w *= hi_corner ? sn.w : 1.0 - sn.w;
                        off = off * ls[size_t(a)] + (hi_corner ? sn.hi : sn.lo);
                    }
                    if (w == 0.0) continue;
                    acc += w * double(lr.values[lr.block_offset(tl, c) + off]);
                }
                out.values[out.block_offset(k, c) + flat] = float(acc);
            }
        }
    }
    BaselineResult res;
    res.hr = std::move(out);
    res.clamped_nodes = clamped;
    return res;
}

void finalize_report(EvalReport& r) {
    double sum = 0.0, n = 0.0;
    for (const SampleScore& s : r.scores)
        if (s.split == "test") {
            sum += s.eps;
            n += 1.0;
        }
    if (n == 0.0) {
        r.mean_test_eps = 0.0;
        r.std_test_eps = 0.0;
        return;
    }
    r.mean_test_eps = sum / n;
    double var = 0.0;
    for (const SampleScore& s : r.scores)
        if (s.split == "test") {
            double d = s.eps - r.mean_test_eps;
            var += d * d;
        }
    r.std_test_eps = std::sqrt(var / n);
}

void write_report_tsv(const EvalReport& r, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open report for writing: " + path);
    f << "# method\t" << r.method << "\n";
    f << "sample\tsplit\teps_percent\teps_conventional_percent\n";
    for (const SampleScore& s : r.scores)
        f << s.index << "\t" << s.split << "\t" << s.eps << "\t" << s.eps_conventional
          << "\n";
    f << "# test_mean_eps\t" << r.mean_test_eps << "\n";
    f << "# test_std_eps\t" << r.std_test_eps << "\n";
    f << "# param_count\t" << r.param_count << "\n";
    f << "# t_train_per_epoch_s\t" << r.t_train_per_epoch_s << "\n";
    f << "# t_infer_ms_per_frame\t" << r.t_infer_ms << "\n";
    f << "# clamped_nodes\t" << r.clamped_nodes << "\n";
    if (!r.seeds.empty()) {
        f << "# seeds";
        for (uint64_t s : r.seeds) f << "\t" << s;
        f << "\n";
    }
    if (!f) throw DataError("report write failed: " + path);
}

} // namespace physr::eval
