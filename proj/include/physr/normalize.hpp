#pragma once

#include <vector>

#include "physr/grid.hpp"

namespace physr {

// Per-channel affine statistics. Computed once over the training-split HR
// corpus and applied to every sequence (LR and HR alike).
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;   // population std

    size_t channels() const { return mean.size(); }
    void validate() const;
};

// Two-pass mean/std in double over all frames and nodes of every sequence,
// one statistic per channel. All sequences must share the channel list.
NormStats compute_norm_stats(const std::vector<const FieldSequence*>& seqs);

// (x - mean) / std per channel; inverse is x * std + mean.
FieldSequence normalize(const FieldSequence& seq, const NormStats& stats);
FieldSequence denormalize(const FieldSequence& seq, const NormStats& stats);

} // namespace physr
