#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "physr/studies.hpp"
#include "test_util.hpp"

using namespace physr;

namespace {

// Smooth periodic two-channel corpus, LR normalized, HR physical — a small
// stand-in dataset so study harness runs stay in the millisecond range.
train::TrainData<double> mini_corpus(size_t n_train, size_t n_test, size_t t_lr,
                                     int r_t, int r_s, size_t lr_n) {
    const double dx = 0.5, dt = 0.3;
    train::TrainData<double> d;
    d.r_t = r_t;
    d.r_s = r_s;
    d.lr_grid = testutil::grid2d(lr_n, lr_n, dx * r_s);
    d.hr_grid = testutil::grid2d(lr_n * size_t(r_s), lr_n * size_t(r_s), dx);
    d.dt_hr = dt;
    d.stats.mean = {0.55, 0.30};
    d.stats.stddev = {0.16, 0.13};
    d.gs = GrayScottParams::paper_2d();
    d.channel_names = {"u", "v"};

    const size_t t_hr = size_t(r_t) * (t_lr - 1) + 1;
    const size_t hn = lr_n * size_t(r_s);
    const double lx = double(hn) * dx;
    for (size_t s = 0; s < n_train + n_test; ++s) {
        const double phase = 0.7 * double(s);
        auto u = [&](double x, double y, double tau) {
            return 0.55 + 0.22 * std::sin(2 * M_PI * x / lx + phase) *
                              std::cos(2 * M_PI * y / lx - 0.4 * tau);
        };
        auto v = [&](double x, double y, double tau) {
            return 0.30 + 0.18 * std::cos(2 * M_PI * x / lx - 0.3 * tau + phase) *
                              std::sin(2 * M_PI * y / lx);
        };
        train::TrainSample<double> smp;
        smp.t_lr = t_lr;
        smp.hr_true.resize(t_hr * 2 * hn * hn);
        smp.hr_truth_f = Tensor<float>({t_hr, 2, hn, hn});
        for (size_t t = 0; t < t_hr; ++t)
            for (size_t i = 0; i < hn; ++i)
                for (size_t j = 0; j < hn; ++j) {
                    const double x = double(i) * dx, y = double(j) * dx;
                    const size_t n = (t * 2) * hn * hn + i * hn + j;
                    smp.hr_truth_f[n] = float(u(x, y, double(t) * dt));
                    smp.hr_truth_f[n + hn * hn] = float(v(x, y, double(t) * dt));
                    smp.hr_true[n] = double(smp.hr_truth_f[n]);
                    smp.hr_true[n + hn * hn] = double(smp.hr_truth_f[n + hn * hn]);
                }
        smp.lr_norm.resize(t_lr * 2 * lr_n * lr_n);
        for (size_t t = 0; t < t_lr; ++t)
            for (size_t i = 0; i < lr_n; ++i)
                for (size_t j = 0; j < lr_n; ++j) {
                    const double x = double(i * size_t(r_s)) * dx;
                    const double y = double(j * size_t(r_s)) * dx;
                    const double tau = double(t) * double(r_t) * dt;
                    const size_t n = (t * 2) * lr_n * lr_n + i * lr_n + j;
                    smp.lr_norm[n] = (u(x, y, tau) - d.stats.mean[0]) / d.stats.stddev[0];
                    smp.lr_norm[n + lr_n * lr_n] =
                        (v(x, y, tau) - d.stats.mean[1]) / d.stats.stddev[1];
                }
        d.samples.push_back(std::move(smp));
        if (s < n_train)
            d.train_idx.push_back(s);
        else
            d.test_idx.push_back(s);
    }
    return d;
}

PhySRConfig mini_config() {
    PhySRConfig cfg;
    cfg.n_res_blocks = 1;
    cfg.features = 4;
    cfg.kernel_size = 3;
    cfg.expansion = 2;
    cfg.r_t = 2;
    cfg.r_s = 2;
    return cfg;
}

train::TrainConfig mini_train() {
    train::TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    tc.learning_rate = 1e-3;
    return tc;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("variant knobs move exactly one lever each") {
    const PhySRConfig mc0 = mini_config();
    const train::TrainConfig tc0 = mini_train();

    SUBCASE("A leaves the base configuration untouched") {
        PhySRConfig mc = mc0;
        train::TrainConfig tc = tc0;
        studies::apply_variant(studies::Variant::A, mc, tc);
        CHECK(studies::config_hash(mc, tc) == studies::config_hash(mc0, tc0));
    }
    SUBCASE("B swaps the recurrent cell for a plain convolution") {
        PhySRConfig mc = mc0;
        train::TrainConfig tc = tc0;
        studies::apply_variant(studies::Variant::B, mc, tc);
        CHECK_FALSE(mc.use_convlstm);
        CHECK(tc.beta == tc0.beta);
        CHECK(mc.padding == mc0.padding);
    }
    SUBCASE("C drops the physics loss and nothing else") {
        PhySRConfig mc = mc0;
        train::TrainConfig tc = tc0;
        studies::apply_variant(studies::Variant::C, mc, tc);
        CHECK(tc.beta == 0.0);
        CHECK(mc.use_convlstm);
        CHECK_FALSE(tc.one_sided_residual);
    }
    SUBCASE("D removes boundary knowledge from both model and residual") {
        PhySRConfig mc = mc0;
        train::TrainConfig tc = tc0;
        studies::apply_variant(studies::Variant::D, mc, tc);
        CHECK(mc.padding == nn::Padding::Zero);
        CHECK(tc.one_sided_residual);
        CHECK(mc.use_convlstm);
        CHECK(tc.beta == tc0.beta);
    }
}

TEST_CASE("budget hash is blind to the knobs and sharp to everything else") {
    const PhySRConfig mc0 = mini_config();
    const train::TrainConfig tc0 = mini_train();
    const uint64_t base_budget = studies::budget_hash(mc0, tc0);
    const uint64_t base_full = studies::config_hash(mc0, tc0);

    for (auto v : {studies::Variant::B, studies::Variant::C, studies::Variant::D}) {
        PhySRConfig mc = mc0;
        train::TrainConfig tc = tc0;
        studies::apply_variant(v, mc, tc);
        CHECK(studies::budget_hash(mc, tc) == base_budget);
        CHECK(studies::config_hash(mc, tc) != base_full);
    }

    // Any budget-relevant field must change the hash.
    PhySRConfig mc = mc0;
    train::TrainConfig tc = tc0;
    tc.epochs += 1;
    CHECK(studies::budget_hash(mc, tc) != base_budget);
    tc = tc0;
    tc.learning_rate *= 2;
    CHECK(studies::budget_hash(mc, tc) != base_budget);
    tc = tc0;
    tc.seed += 1;
    CHECK(studies::budget_hash(mc, tc) != base_budget);
    mc.features += 1;
    CHECK(studies::budget_hash(mc, tc0) != base_budget);
}

TEST_CASE("variant tags round-trip and reject junk") {
    for (auto v : {studies::Variant::A, studies::Variant::B, studies::Variant::C,
                   studies::Variant::D})
        CHECK(studies::variant_from_tag(studies::variant_tag(v)) == v);
    CHECK(studies::variant_from_tag('b') == studies::Variant::B);
    CHECK_THROWS_AS(studies::variant_from_tag('E'), ConfigError);
}

TEST_CASE("stencil footprint labels") {
    CHECK(studies::stencil_name(2) == "3x3");
    CHECK(studies::stencil_name(4) == "5x5");
    CHECK(studies::stencil_name(6) == "7x7");
}

TEST_CASE("plain-conv variant is smaller than the full model") {
    PhySRConfig a;  // defaults: F=32, r_s=4
    PhySRConfig b = a;
    train::TrainConfig tc;
    studies::apply_variant(studies::Variant::B, b, tc);
    auto ma = PhySRModel<double>::make(a, {8, 8});
    auto mb = PhySRModel<double>::make(b, {8, 8});
    CHECK(mb.param_count() < ma.param_count());
    // The difference is exactly the recurrent gate stack minus one plain conv.
    const size_t F = 32, K = 9;
    CHECK(ma.param_count() - mb.param_count() ==
          (4 * F * (2 * F) * K + 4 * F) - (F * F * K + F));
}

TEST_CASE("inference timing returns a positive per-frame median") {
    auto data = mini_corpus(1, 1, 3, 2, 2, 6);
    auto model = PhySRModel<double>::make(mini_config(), data.lr_grid.sizes);
    model.init(11);
    const auto& s = data.samples[0];
    double ms = studies::measure_infer_ms(model, s.lr_norm, s.t_lr, 5);
    CHECK(ms > 0.0);
    CHECK(std::isfinite(ms));
    CHECK_THROWS_AS(studies::measure_infer_ms(model, s.lr_norm, s.t_lr, 0), ConfigError);
}

TEST_CASE("ablation harness trains all four variants on shared seeds") {
    testutil::TempDir dir("studies_ablate");
    auto data = mini_corpus(3, 2, 3, 2, 2, 6);
    PhySRConfig mc = mini_config();
    train::TrainConfig tc = mini_train();
    studies::StudyOptions opt;
    opt.n_seeds = 2;
    opt.base_seed = 5;
    opt.timing_reps = 3;
    opt.out_dir = dir.path;

    auto rows = studies::ablate({studies::Variant::A, studies::Variant::B,
                                 studies::Variant::C, studies::Variant::D},
                                data, mc, tc, opt);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
        CHECK(r.seeds == std::vector<uint64_t>{5, 6});
        REQUIRE(r.per_seed_eps.size() == 2);
        for (double e : r.per_seed_eps) {
            CHECK(std::isfinite(e));
            CHECK(e >= 0.0);
        }
        CHECK(std::isfinite(r.mean_eps));
        CHECK(r.std_eps >= 0.0);
        CHECK(r.param_count > 0);
        CHECK(r.t_infer_ms > 0.0);
    }
    CHECK(rows[1].param_count < rows[0].param_count);
    CHECK(rows[2].param_count == rows[0].param_count);

    // Same knob set, same seeds: variants A and C share initial parameters, so
    // their histories exist per seed alongside checkpoints.
    CHECK(std::ifstream(dir.file("A_seed5.history.tsv")).good());
    CHECK(std::ifstream(dir.file("D_seed6.ckpt")).good());

    const std::string rep = dir.file("ablate.tsv");
    studies::write_ablate_tsv(rows, rep);
    std::string text = slurp(rep);
    CHECK(text.find("variant\tmean_eps_percent") != std::string::npos);
    CHECK(text.find("\nA\t") != std::string::npos);
    CHECK(text.find("\nD\t") != std::string::npos);
    CHECK(text.find("# seeds\t5\t6") != std::string::npos);
}

TEST_CASE("ablation requires a test split and at least one seed") {
    auto data = mini_corpus(3, 0, 3, 2, 2, 6);
    PhySRConfig mc = mini_config();
    train::TrainConfig tc = mini_train();
    studies::StudyOptions opt;
    CHECK_THROWS_AS(studies::run_variant(studies::Variant::A, data, mc, tc, opt),
                    DataError);
    auto ok = mini_corpus(2, 1, 3, 2, 2, 6);
    opt.n_seeds = 0;
    CHECK_THROWS_AS(studies::run_variant(studies::Variant::A, ok, mc, tc, opt),
                    ConfigError);
}

TEST_CASE("kernel-order study emits one finite row per order") {
    testutil::TempDir dir("studies_kernels");
    auto data = mini_corpus(3, 2, 3, 2, 2, 6);
    PhySRConfig mc = mini_config();
    train::TrainConfig tc = mini_train();
    studies::StudyOptions opt;
    opt.base_seed = 9;

    auto rows = studies::kernel_order_study({2, 4, 6}, data, mc, tc, 1, opt);
    REQUIRE(rows.size() == 3);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].order == int(2 * (i + 1)));
        REQUIRE(rows[i].per_run_eps.size() == 1);
        CHECK(std::isfinite(rows[i].eps));
        CHECK(rows[i].eps >= 0.0);
        CHECK(rows[i].t_epoch_s >= 0.0);
    }

    const std::string rep = dir.file("kernels.tsv");
    studies::write_kernel_tsv(rows, rep);
    std::string text = slurp(rep);
    CHECK(text.find("order\tstencil") != std::string::npos);
    CHECK(text.find("3x3") != std::string::npos);
    CHECK(text.find("5x5") != std::string::npos);
    CHECK(text.find("7x7") != std::string::npos);
}
