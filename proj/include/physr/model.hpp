#pragma once

// The super-resolution network: linear temporal interpolation, a ConvLSTM
// scan at low resolution, and a temporally-shared sub-pixel spatial head with
// a parallel global (skip) upsampling path. Templated on the scalar type so
// the exact training code can be gradient-checked in double.

#include <cstring>
#include <string>
#include <vector>

#include "physr/errors.hpp"
#include "physr/grid.hpp"
#include "physr/nn.hpp"
#include "physr/normalize.hpp"
#include "physr/rng.hpp"

namespace physr {

struct PhySRConfig {
    int n_res_blocks = 2;
    int features = 32;
    int kernel_size = 3;
    int expansion = 4;       // width multiplier inside residual blocks
    int r_t = 2;             // temporal upsampling factor
    int r_s = 4;             // spatial upsampling factor per axis
    int spatial_dims = 2;
    int n_channels = 2;
    nn::Padding padding = nn::Padding::Periodic;
    bool use_convlstm = true;   // false: plain convolution instead of the cell

    void validate() const {
        if (n_res_blocks < 0) throw ConfigError("n_res_blocks must be >= 0");
        if (features < 1) throw ConfigError("features must be >= 1");
        if (kernel_size < 1 || kernel_size % 2 == 0)
            throw ConfigError("kernel_size must be odd and >= 1");
        if (expansion < 1) throw ConfigError("expansion must be >= 1");
        if (r_t < 1) throw ConfigError("r_t must be >= 1");
        if (r_s < 1) throw ConfigError("r_s must be >= 1");
        if (spatial_dims != 2 && spatial_dims != 3)
            throw ConfigError("spatial_dims must be 2 or 3");
        if (n_channels < 1) throw ConfigError("n_channels must be >= 1");
    }

    size_t hr_frames(size_t lr_frames) const {
        return lr_frames == 0 ? 0 : size_t(r_t) * (lr_frames - 1) + 1;
    }

    size_t shuffle_taps() const {
        size_t t = 1;
        for (int a = 0; a < spatial_dims; ++a) t *= size_t(r_s);
        return t;
    }
};

// Linear interpolation between consecutive frames: output index a·r_t + j is
// (1 − j/r_t)·frame[a] + (j/r_t)·frame[a+1]. Frames at multiples of r_t are
// byte-for-byte copies of the inputs. lr is [t_lr, elems] contiguous; the
// result is [r_t·(t_lr−1)+1, elems].
template <typename T>
std::vector<T> temporal_interpolate(const T* lr, size_t t_lr, size_t elems, int r_t) {
    if (t_lr < 1) throw DataError("temporal interpolation needs at least one frame");
    if (r_t < 1) throw ConfigError("r_t must be >= 1");
    const size_t t_hr = size_t(r_t) * (t_lr - 1) + 1;
    std::vector<T> out(t_hr * elems);
    for (size_t a = 0; a + 1 < t_lr; ++a) {
        const T* fa = lr + a * elems;
        const T* fb = fa + elems;
        for (int j = 0; j < r_t; ++j) {
            T* dst = out.data() + (a * size_t(r_t) + size_t(j)) * elems;
            if (j == 0) {
                std::memcpy(dst, fa, elems * sizeof(T));
            } else {
                const T w = T(j) / T(r_t);
                const T wl = T(1) - w;
                for (size_t e = 0; e < elems; ++e) dst[e] = wl * fa[e] + w * fb[e];
            }
        }
    }
    std::memcpy(out.data() + (t_hr - 1) * elems, lr + (t_lr - 1) * elems,
                elems * sizeof(T));
    return out;
}

// Parameter group tags: the temporal stage (projection + recurrent cell), the
// shared spatial head, and the global skip path.
enum class ParamGroup { Temporal, Spatial, Global };

inline ParamGroup param_group(const std::string& name) {
    if (name.rfind("global", 0) == 0) return ParamGroup::Global;
    if (name.rfind("proj", 0) == 0 || name.rfind("cell", 0) == 0)
        return ParamGroup::Temporal;
    return ParamGroup::Spatial;
}

template <typename T>
struct PhySRModel {
    PhySRConfig cfg;
    std::vector<size_t> lr_spatial, hr_spatial;
    nn::ConvIndexTable tab_lr, tab_hr;
    size_t S_lr = 0, S_hr = 0;

    nn::ConvLayer<T> proj;                     // n_channels → F
    nn::ConvLSTM<T> cell;                      // F → F (default temporal cell)
    nn::ConvLayer<T> cell_conv;                // F → F (plain-conv variant)
    struct Block {
        nn::ConvLayer<T> expand, contract;
    };
    std::vector<Block> blocks;                 // weight-normed, F → eF → F
    nn::ConvLayer<T> up;                       // F → F·r_s^m, weight-normed
    nn::ConvLayer<T> head;                     // F → n at high res, weight-normed
    nn::ConvLayer<T> global;                   // n → n·r_s^m, weight-normed

    mutable nn::Workspace<T> ws;

    static PhySRModel make(const PhySRConfig& cfg, const std::vector<size_t>& lr_sp) {
        cfg.validate();
        if (int(lr_sp.size()) != cfg.spatial_dims)
            throw ConfigError("model grid rank does not match spatial_dims");
        PhySRModel m;
        m.cfg = cfg;
        m.lr_spatial = lr_sp;
        m.hr_spatial = lr_sp;
        for (auto& s : m.hr_spatial) s *= size_t(cfg.r_s);
        m.tab_lr = nn::ConvIndexTable::make(m.lr_spatial, cfg.kernel_size, cfg.padding);
        m.tab_hr = nn::ConvIndexTable::make(m.hr_spatial, cfg.kernel_size, cfg.padding);
        m.S_lr = m.tab_lr.n_sites;
        m.S_hr = m.tab_hr.n_sites;

        const size_t F = size_t(cfg.features), C = size_t(cfg.n_channels);
        const size_t K = m.tab_lr.n_taps, up_taps = cfg.shuffle_taps();
        m.proj.configure(C, F, K, false);
        if (cfg.use_convlstm)
            m.cell.configure(F, F, K);
        else
            m.cell_conv.configure(F, F, K, false);
        m.blocks.resize(size_t(cfg.n_res_blocks));
        const size_t E = F * size_t(cfg.expansion);
        for (auto& b : m.blocks) {
            b.expand.configure(F, E, K, true);
            b.contract.configure(E, F, K, true);
        }
        m.up.configure(F, F * up_taps, K, true);
        m.head.configure(F, C, K, true);
        m.global.configure(C, C * up_taps, K, true);
        return m;
    }

    // Xavier everywhere, forget-gate bias 1, and an identity global path: the
    // skip starts as an exact nearest-neighbour upsampler so the network's
    // initial output already matches the input's coarse structure.
    void init(uint64_t seed) {
        Rng rng(seed);
        proj.init_xavier(rng);
        if (cfg.use_convlstm)
            cell.init(rng);
        else
            cell_conv.init_xavier(rng);
        for (auto& b : blocks) {
            b.expand.init_xavier(rng);
            b.contract.init_xavier(rng);
        }
        up.init_xavier(rng);
        head.init_xavier(rng);
        init_global_identity();
    }

    void init_global_identity() {
        std::fill(global.V.begin(), global.V.end(), T(0));
        std::fill(global.b.begin(), global.b.end(), T(0));
        const size_t C = size_t(cfg.n_channels), taps = tab_lr.n_taps;
        const size_t row = C * taps, center = taps / 2, up_taps = cfg.shuffle_taps();
        for (size_t c = 0; c < C; ++c)
            for (size_t d = 0; d < up_taps; ++d) {
                size_t o = c * up_taps + d;
                global.V[o * row + c * taps + center] = T(1);
                global.g[o] = T(1);
            }
    }

    std::vector<nn::ParamRef<T>> params() {
        std::vector<nn::ParamRef<T>> out;
        proj.collect("proj", out);
        if (cfg.use_convlstm)
            cell.gates.collect("cell.gates", out);
        else
            cell_conv.collect("cell.conv", out);
        for (size_t i = 0; i < blocks.size(); ++i) {
            const std::string p = "block" + std::to_string(i);
            blocks[i].expand.collect(p + ".expand", out);
            blocks[i].contract.collect(p + ".contract", out);
        }
        up.collect("up", out);
        head.collect("head", out);
        global.collect("global", out);
        return out;
    }

    size_t param_count() const {
        size_t n = proj.param_count();
        n += cfg.use_convlstm ? cell.gates.param_count() : cell_conv.param_count();
        for (const auto& b : blocks) n += b.expand.param_count() + b.contract.param_count();
        return n + up.param_count() + head.param_count() + global.param_count();
    }

    void zero_grad() {
        for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), T(0));
    }

    struct FrameCache {
        std::vector<T> interp;                 // [C, S_lr], proj + global input
        std::vector<T> x;                      // [F, S_lr], cell input
        typename nn::ConvLSTM<T>::StepCache cell;
        std::vector<T> h;                      // [F, S_lr], head input
        std::vector<std::vector<T>> block_out; // per block, post-skip output
        std::vector<std::vector<T>> expand_out;// per block, post-ReLU
        std::vector<T> shuf;                   // [F, S_hr], head conv input
    };
    struct Cache {
        std::vector<FrameCache> frames;
    };

    // lr_norm is [t_lr, C, S_lr] in normalized units; returns the normalized
    // high-resolution prediction [r_t·(t_lr−1)+1, C, S_hr]. Pass a cache to
    // retain activations for backward().
    std::vector<T> forward(const std::vector<T>& lr_norm, size_t t_lr,
                           Cache* cache = nullptr) {
        const size_t C = size_t(cfg.n_channels), F = size_t(cfg.features);
        if (lr_norm.size() != t_lr * C * S_lr)
            throw DataError("model input size does not match [frames, channels, grid]");
        if (t_lr < 1) throw DataError("model input needs at least one frame");
        const size_t t_hr = cfg.hr_frames(t_lr);
        std::vector<T> interp =
            temporal_interpolate(lr_norm.data(), t_lr, C * S_lr, cfg.r_t);
        std::vector<T> out(t_hr * C * S_hr);
        if (cache) cache->frames.assign(t_hr, FrameCache{});

        std::vector<T> h(F * S_lr, T(0)), c(F * S_lr, T(0));
        std::vector<T> x(F * S_lr), z(F * S_lr), e, upv(up.out_ch * S_lr);
        std::vector<T> shuf(F * S_hr), gup(global.out_ch * S_lr), gsh(C * S_hr);
        typename nn::ConvLSTM<T>::StepCache scratch_cc;

        for (size_t t = 0; t < t_hr; ++t) {
            const T* in_t = interp.data() + t * C * S_lr;
            proj.forward(tab_lr, in_t, x.data(), ws);
            auto& cc = cache ? cache->frames[t].cell : scratch_cc;
            if (cfg.use_convlstm)
                cell.step(tab_lr, x.data(), h.data(), c.data(), h.data(), c.data(),
                          cc, ws);
            else
                cell_conv.forward(tab_lr, x.data(), h.data(), ws);

            FrameCache* fc = cache ? &cache->frames[t] : nullptr;
            if (fc) {
                fc->interp.assign(in_t, in_t + C * S_lr);
                fc->x = x;
                fc->h = h;
                fc->block_out.resize(blocks.size());
                fc->expand_out.resize(blocks.size());
            }

            z = h;
            for (size_t bi = 0; bi < blocks.size(); ++bi) {
                auto& blk = blocks[bi];
                e.resize(blk.expand.out_ch * S_lr);
                blk.expand.forward(tab_lr, z.data(), e.data(), ws);
                nn::relu_inplace(e.data(), e.size());
                std::vector<T> zn(F * S_lr);
                blk.contract.forward(tab_lr, e.data(), zn.data(), ws);
                for (size_t n = 0; n < zn.size(); ++n) zn[n] += z[n];
                if (fc) {
                    fc->expand_out[bi] = e;
                    fc->block_out[bi] = zn;
                }
                z.swap(zn);
            }

            up.forward(tab_lr, z.data(), upv.data(), ws);
            nn::pixel_shuffle(upv.data(), shuf.data(), F, cfg.r_s, lr_spatial);
            if (fc) fc->shuf = shuf;
            T* out_t = out.data() + t * C * S_hr;
            head.forward(tab_hr, shuf.data(), out_t, ws);

            global.forward(tab_lr, in_t, gup.data(), ws);
            nn::pixel_shuffle(gup.data(), gsh.data(), C, cfg.r_s, lr_spatial);
            for (size_t n = 0; n < C * S_hr; ++n) out_t[n] += gsh[n];
        }
        return out;
    }

    // Accumulates parameter gradients for d_out (gradient w.r.t. the forward
    // output, same layout). Call zero_grad() first when starting a batch.
    void backward(const Cache& cache, const std::vector<T>& d_out) {
        const size_t C = size_t(cfg.n_channels), F = size_t(cfg.features);
        const size_t t_hr = cache.frames.size();
        if (d_out.size() != t_hr * C * S_hr)
            throw DataError("output gradient size does not match forward output");

        std::vector<T> dh_chain(F * S_lr, T(0)), dc_chain(F * S_lr, T(0));
        std::vector<T> d_shuf(F * S_hr), d_upv(up.out_ch * S_lr), dz(F * S_lr);
        std::vector<T> d_gup(global.out_ch * S_lr), dx(F * S_lr);

        for (size_t t = t_hr; t-- > 0;) {
            const FrameCache& fc = cache.frames[t];
            const T* dy_t = d_out.data() + t * C * S_hr;

            // Global skip: unshuffle the output gradient back to coarse cells.
            nn::pixel_unshuffle(dy_t, d_gup.data(), C, cfg.r_s, lr_spatial);
            global.backward(tab_lr, fc.interp.data(), d_gup.data(), nullptr, ws);

            // Spatial head, mirrored stage by stage.
            std::fill(d_shuf.begin(), d_shuf.end(), T(0));
            head.backward(tab_hr, fc.shuf.data(), dy_t, d_shuf.data(), ws);
            nn::pixel_unshuffle(d_shuf.data(), d_upv.data(), F, cfg.r_s, lr_spatial);
            std::fill(dz.begin(), dz.end(), T(0));
            const std::vector<T>& z_final =
                blocks.empty() ? fc.h : fc.block_out[blocks.size() - 1];
            up.backward(tab_lr, z_final.data(), d_upv.data(), dz.data(), ws);

            for (size_t bi = blocks.size(); bi-- > 0;) {
                auto& blk = blocks[bi];
                const std::vector<T>& z_in = bi == 0 ? fc.h : fc.block_out[bi - 1];
                std::vector<T> de(blk.expand.out_ch * S_lr, T(0));
                blk.contract.backward(tab_lr, fc.expand_out[bi].data(), dz.data(),
                                      de.data(), ws);
                nn::relu_backward(fc.expand_out[bi].data(), de.data(), de.size());
                std::vector<T> dz_in(F * S_lr, T(0));
                blk.expand.backward(tab_lr, z_in.data(), de.data(), dz_in.data(), ws);
                for (size_t n = 0; n < dz.size(); ++n) dz_in[n] += dz[n]; // skip path
                dz.swap(dz_in);
            }

            // dz now holds the head's gradient at h_t; add the recurrent flow.
            for (size_t n = 0; n < dz.size(); ++n) dz[n] += dh_chain[n];

            std::fill(dx.begin(), dx.end(), T(0));
            if (cfg.use_convlstm) {
                std::vector<T> dh_prev(F * S_lr, T(0)), dc_prev(F * S_lr, T(0));
                cell.step_backward(tab_lr, fc.cell, dz.data(), dc_chain.data(),
                                   dx.data(), dh_prev.data(), dc_prev.data(), ws);
                dh_chain.swap(dh_prev);
                dc_chain.swap(dc_prev);
            } else {
                cell_conv.backward(tab_lr, fc.x.data(), dz.data(), dx.data(), ws);
                std::fill(dh_chain.begin(), dh_chain.end(), T(0));
            }
            proj.backward(tab_lr, fc.interp.data(), dx.data(), nullptr, ws);
        }
    }

    // Convenience wrapper in physical units: takes a normalized low-resolution
    // sequence, returns the denormalized high-resolution prediction.
    FieldSequence super_resolve(const FieldSequence& lr_norm, const NormStats& stats) {
        if (lr_norm.channels() != size_t(cfg.n_channels))
            throw DataError("sequence channel count does not match the model");
        if (lr_norm.grid.sizes != lr_spatial)
            throw DataError("sequence grid does not match the model");
        const size_t t_lr = lr_norm.frames();
        std::vector<T> in(lr_norm.values.data(),
                          lr_norm.values.data() + lr_norm.values.numel());
        std::vector<T> out = forward(in, t_lr);

        GridSpec hr = lr_norm.grid;
        for (int a = 0; a < hr.spatial_dims; ++a) {
            hr.sizes[size_t(a)] *= size_t(cfg.r_s);
            hr.spacing[size_t(a)] /= double(cfg.r_s);
        }
        FieldSequence res = FieldSequence::make(cfg.hr_frames(t_lr),
                                                lr_norm.channel_names, hr,
                                                lr_norm.dt / double(cfg.r_t));
        for (size_t i = 0; i < out.size(); ++i) res.values[i] = float(out[i]);
        return denormalize(res, stats);
    }
};

} // namespace physr
