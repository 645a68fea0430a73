#include "physr/degrade.hpp"

#include <cmath>

namespace physr::degrade {

void DegradeSpec::validate() const {
    if (r_t < 1 || r_s < 1)
        throw ConfigError("degrade factors must be positive integers");
}

size_t trim_for(size_t hr_frames, int r_t) {
    if (hr_frames == 0) return 0;
    // Largest T' ≤ hr_frames with T' ≡ 1 (mod r_t).
    size_t keep = ((hr_frames - 1) / size_t(r_t)) * size_t(r_t) + 1;
    return hr_frames - keep;
}

FieldSequence apply(const FieldSequence& hr, const DegradeSpec& spec) {
    spec.validate();
    hr.validate();

    const size_t T = hr.frames();
    if ((T - 1) % size_t(spec.r_t) != 0)
        throw DataError("HR frame count " + std::to_string(T) +
                        " is not ≡ 1 (mod r_t=" + std::to_string(spec.r_t) +
                        "); trim " + std::to_string(trim_for(T, spec.r_t)) +
                        " trailing frame(s) first");
    for (size_t s : hr.grid.sizes)
        if (s % size_t(spec.r_s) != 0)
            throw DataError("HR spatial size " + std::to_string(s) +
                            " is not divisible by r_s=" + std::to_string(spec.r_s));

    const int m = hr.grid.spatial_dims;
    GridSpec lr_grid = hr.grid;
    for (int a = 0; a < m; ++a) {
        lr_grid.sizes[size_t(a)] /= size_t(spec.r_s);
        lr_grid.spacing[size_t(a)] *= double(spec.r_s);
    }
    lr_grid.validate();   // LR grid must itself satisfy the size floor
    const size_t T_lr = (T - 1) / size_t(spec.r_t) + 1;
    FieldSequence lr = FieldSequence::make(T_lr, hr.channel_names, lr_grid,
                                           hr.dt * double(spec.r_t));

    const size_t C = hr.channels();
    const size_t rs = size_t(spec.r_s);
    const auto& hs = hr.grid.sizes;
    const auto& ls = lr_grid.sizes;
    const double inv_block = 1.0 / std::pow(double(rs), m);

    for (size_t tl = 0; tl < T_lr; ++tl) {
        const size_t th = tl * size_t(spec.r_t);
        for (size_t c = 0; c < C; ++c) {
            const float* src = hr.values.data() + hr.block_offset(th, c);
            float* dst = lr.values.data() + lr.block_offset(tl, c);
            // Iterate LR nodes; average (or sample) the corresponding HR block.
            std::vector<size_t> li(size_t(m), 0);
            size_t lflat = 0;
            while (true) {
                double acc = 0.0;
                if (spec.blur == Blur::BlockMean) {
                    std::vector<size_t> bi(size_t(m), 0);
                    while (true) {
                        size_t off = 0;
                        for (int a = 0; a < m; ++a)
                            off = off * hs[size_t(a)] + (li[size_t(a)] * rs + bi[size_t(a)]);
                        acc += double(src[off]);
                        int a = m - 1;
                        while (a >= 0 && ++bi[size_t(a)] == rs) {
                            bi[size_t(a)] = 0;
                            --a;
                        }
                        if (a < 0) break;
                    }
                    acc *= inv_block;
                } else {
                    size_t off = 0;
                    for (int a = 0; a < m; ++a)
                        off = off * hs[size_t(a)] + li[size_t(a)] * rs;
                    acc = double(src[off]);
                }
                dst[lflat++] = float(acc);
                int a = m - 1;
                while (a >= 0 && ++li[size_t(a)] == ls[size_t(a)]) {
                    li[size_t(a)] = 0;
                    --a;
                }
                if (a < 0) break;
            }
        }
    }
    return lr;
}

} // namespace physr::degrade
