#pragma once

#include "physr/grid.hpp"

namespace physr::degrade {

enum class Blur { None, BlockMean };

// Spatiotemporal downsampling factors. The paper's scenarios are
// (r_t, r_s) = (4, 8) in 2D and (2, 4) in 3D.
struct DegradeSpec {
    int r_t = 1;
    int r_s = 1;
    Blur blur = Blur::BlockMean;

    void validate() const;
};

// LR/HR shape relation. HR frame count must be ≡ 1 (mod r_t); HR spatial
// sizes divisible by r_s. lr.dt = r_t·hr.dt; lr spacing = r_s·hr spacing.
// blur=BlockMean averages non-overlapping r_s^m blocks; blur=None takes the
// block's first (stride-aligned) sample.
FieldSequence apply(const FieldSequence& hr, const DegradeSpec& spec);

// Frames to trim from the tail so the frame-count invariant holds.
size_t trim_for(size_t hr_frames, int r_t);

} // namespace physr::degrade
