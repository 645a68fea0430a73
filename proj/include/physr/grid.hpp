#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "physr/tensor.hpp"

namespace physr {

// Uniform rectilinear grid metadata for a 2-D or 3-D spatial domain.
struct GridSpec {
    int spatial_dims = 0;            // 2 or 3
    std::vector<size_t> sizes;       // node count per axis, length spatial_dims
    std::vector<double> spacing;     // node spacing per axis
    std::vector<double> origin;      // coordinate of node 0 per axis

    void validate() const;
    size_t num_nodes() const;

    bool operator==(const GridSpec& o) const {
        return spatial_dims == o.spatial_dims && sizes == o.sizes &&
               spacing == o.spacing && origin == o.origin;
    }
};

// A time sequence of multi-channel fields on one grid. Values are stored in
// 32-bit floats, layout [frames, channels, space...] C-order.
struct FieldSequence {
    Tensor<float> values;
    double dt = 0.0;                 // time between consecutive frames
    GridSpec grid;
    std::vector<std::string> channel_names;

    size_t frames() const { return values.ndim() ? values.shape()[0] : 0; }
    size_t channels() const { return values.ndim() > 1 ? values.shape()[1] : 0; }

    // Flat offset of (frame, channel) block; the block holds grid.num_nodes()
    // contiguous scalars.
    size_t block_offset(size_t frame, size_t channel) const {
        return (frame * channels() + channel) * grid.num_nodes();
    }

    void validate() const;

    static FieldSequence make(size_t frames, std::vector<std::string> channels,
                              GridSpec grid, double dt);
};

// Copy of the contiguous frame range [first, first + count).
FieldSequence frame_window(const FieldSequence& seq, size_t first, size_t count);

} // namespace physr
