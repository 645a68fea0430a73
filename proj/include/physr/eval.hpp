#pragma once

#include <string>
#include <vector>

#include "physr/degrade.hpp"
#include "physr/grid.hpp"
#include "physr/manifest.hpp"

namespace physr::eval {

// Relative full-field error in percent: ε = sqrt(‖u*−û‖_F / ‖u*‖_F) · 100,
// square root of the global norm ratio, exactly as the paper prints it.
double relative_error(const Tensor<double>& hr_true, const Tensor<double>& hr_hat);
double relative_error(const Tensor<float>& hr_true, const Tensor<float>& hr_hat);

// Conventional relative ℓ2 in percent (the ratio without the outer square
// root), reported alongside for comparability with the wider literature.
double conventional_rel_l2(const Tensor<double>& hr_true, const Tensor<double>& hr_hat);
double conventional_rel_l2(const Tensor<float>& hr_true, const Tensor<float>& hr_hat);

struct BaselineResult {
    FieldSequence hr;
    size_t clamped_nodes = 0;   // HR nodes past the LR hull (edge-clamped)
};

// Separable multilinear interpolation jointly over time and space onto the HR
// lattice implied by the degrade spec (LR node j sits at HR node j·r). Exact
// at LR-coincident nodes; the r−1 trailing HR nodes per spatial axis lie past
// the LR hull and clamp to the edge (counted in the result).
BaselineResult interp_baseline(const FieldSequence& lr, const degrade::DegradeSpec& spec);

struct SampleScore {
    size_t index = 0;
    std::string split;
    double eps = 0.0;               // Eq.-style metric, %
    double eps_conventional = 0.0;  // plain norm ratio, %
};

struct EvalReport {
    std::string method;             // "interp" | "physr" | variant tag
    std::vector<SampleScore> scores;
    double mean_test_eps = 0.0;
    double std_test_eps = 0.0;      // population std over test samples
    uint64_t param_count = 0;
    double t_train_per_epoch_s = 0.0;
    double t_infer_ms = 0.0;        // per reconstructed HR frame
    size_t clamped_nodes = 0;
    std::vector<uint64_t> seeds;
};

// Mean/population-std helper over the test rows of `scores`.
void finalize_report(EvalReport& r);

// Tab-separated report: one row per sample plus a summary block.
void write_report_tsv(const EvalReport& r, const std::string& path);

} // namespace physr::eval
