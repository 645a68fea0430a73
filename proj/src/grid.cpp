#include "physr/grid.hpp"

#include <algorithm>
#include <cmath>

namespace physr {

void GridSpec::validate() const {
    if (spatial_dims != 2 && spatial_dims != 3)
        throw DataError("grid spatial_dims must be 2 or 3, got " +
                        std::to_string(spatial_dims));
    if (sizes.size() != size_t(spatial_dims) ||
        spacing.size() != size_t(spatial_dims) ||
        origin.size() != size_t(spatial_dims))
        throw DataError("grid sizes/spacing/origin length must equal spatial_dims");
    for (size_t s : sizes)
        if (s < 5) throw DataError("grid axis needs at least 5 nodes "
                                   "(widest default stencil)");
    for (double h : spacing)
        if (!(h > 0.0) || !std::isfinite(h))
            throw DataError("grid spacing must be positive and finite");
    for (double o : origin)
        if (!std::isfinite(o)) throw DataError("grid origin must be finite");
}

size_t GridSpec::num_nodes() const {
    size_t n = 1;
    for (size_t s : sizes) n *= s;
    return n;
}

void FieldSequence::validate() const {
    grid.validate();
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw DataError("field sequence dt must be positive and finite");
    if (values.ndim() != 2 + size_t(grid.spatial_dims))
        throw DataError("field tensor must have axes [frames, channels, space...]");
    if (values.shape()[1] != channel_names.size())
        throw DataError("channel axis (" + std::to_string(values.shape()[1]) +
                        ") does not match channel_names (" +
                        std::to_string(channel_names.size()) + ")");
    for (int a = 0; a < grid.spatial_dims; ++a)
        if (values.shape()[2 + a] != grid.sizes[a])
            throw DataError("spatial axis " + std::to_string(a) +
                            " does not match grid sizes");
    for (size_t i = 0; i < values.numel(); ++i)
        if (!std::isfinite(double(values[i])))
            throw DataError("non-finite value at flat index " + std::to_string(i));
}

FieldSequence FieldSequence::make(size_t frames, std::vector<std::string> channels,
                                  GridSpec grid, double dt) {
    FieldSequence s;
    std::vector<size_t> shape = {frames, channels.size()};
    for (size_t n : grid.sizes) shape.push_back(n);
    s.values = Tensor<float>(shape);
    s.dt = dt;
    s.grid = std::move(grid);
    s.channel_names = std::move(channels);
    return s;
}

FieldSequence frame_window(const FieldSequence& seq, size_t first, size_t count) {
    if (count < 1) throw DataError("frame window must keep at least one frame");
    if (first + count > seq.frames())
        throw DataError("frame window [" + std::to_string(first) + ", " +
                        std::to_string(first + count) + ") exceeds the " +
                        std::to_string(seq.frames()) + " stored frames");
    FieldSequence out = FieldSequence::make(count, seq.channel_names, seq.grid, seq.dt);
    const size_t per = seq.channels() * seq.grid.num_nodes();
    const float* src = seq.values.data() + first * per;
    std::copy(src, src + count * per, out.values.data());
    return out;
}

} // namespace physr
