#pragma once

#include <string>
#include <vector>

#include "physr/degrade.hpp"
#include "physr/normalize.hpp"
#include "physr/pde.hpp"

namespace physr {

struct SampleEntry {
    std::string hr_path;         // relative to the manifest's directory
    std::string lr_path;         // empty until the degrade stage ran
    std::string split = "train"; // "train" | "test"
    uint64_t seed = 0;           // per-sample generation seed
};

// One text file tying a corpus together: the PDE that produced it, how it was
// degraded, the normalization statistics of the HR corpus, and the sample
// paths with their train/test assignment.
struct DatasetManifest {
    PDESystem pde;
    degrade::DegradeSpec degrade_spec;
    NormStats norm_stats;        // empty (0 channels) before degrade ran
    double split_ratio = 0.7;
    uint64_t seed = 0;
    size_t trimmed_frames = 0;   // HR tail frames dropped to satisfy r_t
    std::vector<SampleEntry> samples;

    bool has_lr() const;
    std::vector<size_t> train_indices() const;
    std::vector<size_t> test_indices() const;
};

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Deterministic disjoint-exhaustive split: llround(ratio·N) train samples,
// assignment shuffled by seed.
std::vector<std::string> split_labels(size_t n, double ratio, uint64_t seed);

// Load every referenced pair and check the LR/HR shape relation exactly:
// hr sizes = lr sizes × r_s; hr frames = r_t·(lr frames − 1) + 1; consistent
// channels, dt and spacing relations. Throws DataError naming the sample.
void verify_manifest(const DatasetManifest& m, const std::string& base_dir);

// Join the manifest's directory with a relative sample path.
std::string resolve_path(const std::string& base_dir, const std::string& rel);

} // namespace physr
