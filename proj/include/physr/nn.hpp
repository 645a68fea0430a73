#pragma once

// Convolutional building blocks: same-size convolutions via im2col + GEMM,
// optional weight-norm parameterization, a ConvLSTM cell, and the sub-pixel
// shuffle. Everything is templated on the scalar so training runs in float
// while gradient checks run the identical code in double.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "physr/errors.hpp"
#include "physr/rng.hpp"

namespace physr::nn {

enum class Padding { Periodic, Zero };

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Gather table for a stride-1 same-size convolution over an m-D grid:
// src[tap·n_sites + site] is the flat source index, or −1 outside the grid
// (zero padding). One table serves every layer with the same spatial shape.
struct ConvIndexTable {
    std::vector<size_t> spatial;
    int k = 3;
    size_t n_sites = 0;
    size_t n_taps = 0;
    std::vector<int32_t> src;

    static ConvIndexTable make(const std::vector<size_t>& spatial, int k, Padding pad) {
        if (k < 1 || k % 2 == 0) throw ConfigError("conv kernel extent must be odd");
        const int m = int(spatial.size());
        if (m != 2 && m != 3) throw ConfigError("conv grids must be 2-D or 3-D");
        ConvIndexTable t;
        t.spatial = spatial;
        t.k = k;
        t.n_sites = 1;
        for (size_t s : spatial) t.n_sites *= s;
        t.n_taps = 1;
        for (int a = 0; a < m; ++a) t.n_taps *= size_t(k);
        t.src.assign(t.n_taps * t.n_sites, -1);

        const int h = k / 2;
        std::vector<long> sz(spatial.begin(), spatial.end());
        std::vector<long> idx(size_t(m), 0);
        for (size_t site = 0; site < t.n_sites; ++site) {
            // idx = multi-index of `site` (row-major).
            size_t rem = site;
            for (int a = m - 1; a >= 0; --a) {
                idx[size_t(a)] = long(rem % size_t(sz[size_t(a)]));
                rem /= size_t(sz[size_t(a)]);
            }
            for (size_t tap = 0; tap < t.n_taps; ++tap) {
                size_t trem = tap;
                long off = 0;
                bool inside = true;
                for (int a = m - 1; a >= 0; --a) {
                    long d = long(trem % size_t(k)) - h;
                    trem /= size_t(k);
                    long p = idx[size_t(a)] + d;
                    if (pad == Padding::Periodic) {
                        p = ((p % sz[size_t(a)]) + sz[size_t(a)]) % sz[size_t(a)];
                    } else if (p < 0 || p >= sz[size_t(a)]) {
                        inside = false;
                        break;
                    }
                    off += p * stride_of(sz, a);
                }
                if (inside) t.src[tap * t.n_sites + site] = int32_t(off);
            }
        }
        return t;
    }

private:
    static long stride_of(const std::vector<long>& sz, int axis) {
        long s = 1;
        for (size_t a = size_t(axis) + 1; a < sz.size(); ++a) s *= sz[a];
        return s;
    }
};

// Scratch buffers shared across layer calls to avoid re-allocation.
template <typename T>
struct Workspace {
    std::vector<T> cols;     // im2col matrix
    std::vector<T> dcols;    // gradient of the im2col matrix
    std::vector<T> w_eff;    // effective (normalized) weights
    std::vector<T> dw_eff;   // gradient w.r.t. effective weights
};

// Named view of one trainable array and its gradient accumulator.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;
};

// Same-size convolution, in_ch → out_ch, kernel k^m. Stateless between calls:
// the caller keeps the input around for the backward pass. With weight_norm
// the stored parameters are the direction tensor V (flattened [out, in·k^m])
// and a per-filter scale g, and the effective kernel is g·V/‖V‖ row-wise.
template <typename T>
struct ConvLayer {
    size_t in_ch = 0, out_ch = 0;
    size_t taps = 0;               // k^m, fixed by the index table
    bool weight_norm = false;

    std::vector<T> V, g, b;        // parameters
    std::vector<T> dV, dg, db;     // gradient accumulators

    void configure(size_t in, size_t out, size_t n_taps, bool wn) {
        in_ch = in;
        out_ch = out;
        taps = n_taps;
        weight_norm = wn;
        V.assign(out * in * n_taps, T(0));
        b.assign(out, T(0));
        dV.assign(V.size(), T(0));
        db.assign(out, T(0));
        if (wn) {
            g.assign(out, T(0));
            dg.assign(out, T(0));
        }
    }

    // Xavier-uniform direction, zero bias; with weight norm, g = ‖V‖ row-wise
    // so the effective kernel equals V at initialization. Draws are made in
    // double so float and double instantiations see identical parameters.
    void init_xavier(Rng& rng) {
        const size_t row = in_ch * taps;
        double limit = std::sqrt(6.0 / (double(in_ch * taps) + double(out_ch * taps)));
        for (size_t i = 0; i < V.size(); ++i) V[i] = T(rng.uniform(-limit, limit));
        std::fill(b.begin(), b.end(), T(0));
        if (weight_norm)
            for (size_t o = 0; o < out_ch; ++o) {
                double n2 = 0.0;
                for (size_t i = 0; i < row; ++i) {
                    double v = double(V[o * row + i]);
                    n2 += v * v;
                }
                g[o] = T(std::sqrt(n2));
            }
    }

    size_t param_count() const { return V.size() + b.size() + g.size(); }

    void zero_grad() {
        std::fill(dV.begin(), dV.end(), T(0));
        std::fill(db.begin(), db.end(), T(0));
        std::fill(dg.begin(), dg.end(), T(0));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".V", &V, &dV});
        out.push_back({prefix + ".b", &b, &db});
        if (weight_norm) out.push_back({prefix + ".g", &g, &dg});
    }

    // y[out_ch, n_sites] = W_eff · im2col(x) + b. x is [in_ch, n_sites].
    void forward(const ConvIndexTable& tab, const T* x, T* y, Workspace<T>& ws) const {
        const size_t S = tab.n_sites, K = tab.n_taps, row = in_ch * K;
        if (K != taps) throw ConfigError("conv layer kernel does not match index table");
        fill_cols(tab, x, ws.cols);
        const T* W = effective_weights(ws);
        Eigen::Map<const Mat<T>> Wm(W, long(out_ch), long(row));
        Eigen::Map<const Mat<T>> Pm(ws.cols.data(), long(row), long(S));
        Eigen::Map<Mat<T>> Ym(y, long(out_ch), long(S));
        Ym.noalias() = Wm * Pm;
        for (size_t o = 0; o < out_ch; ++o) {
            T* yr = y + o * S;
            const T bo = b[o];
            for (size_t s = 0; s < S; ++s) yr[s] += bo;
        }
    }

    // Accumulates parameter gradients from dy and, when dx != nullptr, adds
    // this layer's input gradient into dx (caller zeroes dx when starting).
    void backward(const ConvIndexTable& tab, const T* x, const T* dy, T* dx,
                  Workspace<T>& ws) {
        const size_t S = tab.n_sites, K = tab.n_taps, row = in_ch * K;
        fill_cols(tab, x, ws.cols);
        ws.dw_eff.assign(out_ch * row, T(0));

        Eigen::Map<const Mat<T>> dYm(dy, long(out_ch), long(S));
        Eigen::Map<const Mat<T>> Pm(ws.cols.data(), long(row), long(S));
        Eigen::Map<Mat<T>> dWm(ws.dw_eff.data(), long(out_ch), long(row));
        dWm.noalias() = dYm * Pm.transpose();

        for (size_t o = 0; o < out_ch; ++o) {
            T acc = T(0);
            const T* dyr = dy + o * S;
            for (size_t s = 0; s < S; ++s) acc += dyr[s];
            db[o] += acc;
        }

        accumulate_weight_grads(ws.dw_eff.data());

        if (dx) {
            const T* W = effective_weights(ws);
            ws.dcols.assign(row * S, T(0));
            Eigen::Map<const Mat<T>> Wm(W, long(out_ch), long(row));
            Eigen::Map<Mat<T>> dPm(ws.dcols.data(), long(row), long(S));
            dPm.noalias() = Wm.transpose() * dYm;
            // Scatter-add columns back through the gather table.
            for (size_t c = 0; c < in_ch; ++c) {
                T* dxc = dx + c * S_of(tab);
                for (size_t tap = 0; tap < K; ++tap) {
                    const T* dpr = ws.dcols.data() + (c * K + tap) * S;
                    const int32_t* idx = tab.src.data() + tap * S;
                    for (size_t s = 0; s < S; ++s)
                        if (idx[s] >= 0) dxc[size_t(idx[s])] += dpr[s];
                }
            }
        }
    }

private:
    static size_t S_of(const ConvIndexTable& tab) { return tab.n_sites; }

    void fill_cols(const ConvIndexTable& tab, const T* x, std::vector<T>& cols) const {
        const size_t S = tab.n_sites, K = tab.n_taps;
        cols.resize(in_ch * K * S);
        for (size_t c = 0; c < in_ch; ++c) {
            const T* xc = x + c * S;
            for (size_t tap = 0; tap < K; ++tap) {
                T* dst = cols.data() + (c * K + tap) * S;
                const int32_t* idx = tab.src.data() + tap * S;
                for (size_t s = 0; s < S; ++s)
                    dst[s] = idx[s] >= 0 ? xc[size_t(idx[s])] : T(0);
            }
        }
    }

    // Materializes g·V/‖V‖ (weight norm) or aliases V directly.
    const T* effective_weights(Workspace<T>& ws) const {
        if (!weight_norm) return V.data();
        const size_t row = in_ch * taps;
        ws.w_eff.resize(V.size());
        for (size_t o = 0; o < out_ch; ++o) {
            const T* vr = V.data() + o * row;
            T* wr = ws.w_eff.data() + o * row;
            T n2 = T(0);
            for (size_t i = 0; i < row; ++i) n2 += vr[i] * vr[i];
            T nrm = std::sqrt(n2);
            if (!(nrm > T(0))) throw NumericError("weight-norm direction has zero norm");
            T s = g[o] / nrm;
            for (size_t i = 0; i < row; ++i) wr[i] = s * vr[i];
        }
        return ws.w_eff.data();
    }

    // Chain dW_eff into (dV, dg); the map is linear in dW_eff, so per-call
    // accumulation equals transforming the summed gradient.
    void accumulate_weight_grads(const T* dW) {
        const size_t row = in_ch * taps;
        if (!weight_norm) {
            for (size_t i = 0; i < V.size(); ++i) dV[i] += dW[i];
            return;
        }
        for (size_t o = 0; o < out_ch; ++o) {
            const T* vr = V.data() + o * row;
            const T* dwr = dW + o * row;
            T n2 = T(0), dot = T(0);
            for (size_t i = 0; i < row; ++i) {
                n2 += vr[i] * vr[i];
                dot += dwr[i] * vr[i];
            }
            T nrm = std::sqrt(n2);
            T dgo = dot / nrm;                     // dW_eff · V̂
            dg[o] += dgo;
            T a = g[o] / nrm;
            T bcoef = g[o] * dgo / n2;             // g·(dW_eff·V̂)/‖V‖²
            T* dvr = dV.data() + o * row;
            for (size_t i = 0; i < row; ++i) dvr[i] += a * dwr[i] - bcoef * vr[i];
        }
    }
};

template <typename T>
inline void relu_inplace(T* x, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (x[i] < T(0)) x[i] = T(0);
}

// dy ⊙ 1[y > 0], using the post-activation values.
template <typename T>
inline void relu_backward(const T* y, T* dy, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!(y[i] > T(0))) dy[i] = T(0);
}

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// One ConvLSTM cell: four gates from a single convolution over the channel
// concatenation [x, h], gate order (i, f, c̃, o) along the output channels.
template <typename T>
struct ConvLSTM {
    size_t x_ch = 0, h_ch = 0;
    ConvLayer<T> gates;   // (x_ch + h_ch) → 4·h_ch, never weight-normed

    void configure(size_t x_channels, size_t h_channels, size_t n_taps) {
        x_ch = x_channels;
        h_ch = h_channels;
        gates.configure(x_ch + h_ch, 4 * h_ch, n_taps, false);
    }

    // Forget-gate bias 1 keeps early memory open; the rest stays at zero.
    void init(Rng& rng) {
        gates.init_xavier(rng);
        for (size_t i = 0; i < h_ch; ++i) gates.b[h_ch + i] = T(1);
    }

    struct StepCache {
        std::vector<T> xh;                  // [x_ch + h_ch, S] conv input
        std::vector<T> i, f, ctil, o;       // gate activations, [h_ch, S] each
        std::vector<T> c_prev, c_new, tanh_c;
    };

    // h_out/c_out may alias h_prev/c_prev.
    void step(const ConvIndexTable& tab, const T* x, const T* h_prev, const T* c_prev,
              T* h_out, T* c_out, StepCache& cc, Workspace<T>& ws) const {
        const size_t S = tab.n_sites, F = h_ch;
        cc.xh.resize((x_ch + F) * S);
        std::copy(x, x + x_ch * S, cc.xh.begin());
        std::copy(h_prev, h_prev + F * S, cc.xh.begin() + long(x_ch * S));
        cc.c_prev.assign(c_prev, c_prev + F * S);

        std::vector<T> z(4 * F * S);
        gates.forward(tab, cc.xh.data(), z.data(), ws);

        cc.i.resize(F * S);
        cc.f.resize(F * S);
        cc.ctil.resize(F * S);
        cc.o.resize(F * S);
        cc.c_new.resize(F * S);
        cc.tanh_c.resize(F * S);
        const T* zi = z.data();
        const T* zf = z.data() + F * S;
        const T* zc = z.data() + 2 * F * S;
        const T* zo = z.data() + 3 * F * S;
        for (size_t n = 0; n < F * S; ++n) {
            T iv = sigmoid(zi[n]);
            T fv = sigmoid(zf[n]);
            T cv = std::tanh(zc[n]);
            T ov = sigmoid(zo[n]);
            T cn = fv * cc.c_prev[n] + iv * cv;
            T tc = std::tanh(cn);
            cc.i[n] = iv;
            cc.f[n] = fv;
            cc.ctil[n] = cv;
            cc.o[n] = ov;
            cc.c_new[n] = cn;
            cc.tanh_c[n] = tc;
            c_out[n] = cn;
            h_out[n] = ov * tc;
        }
    }

    // Backward through one step. dh/dc are the gradients w.r.t. this step's
    // outputs; dx_acc/dh_prev_acc/dc_prev_acc are accumulated into (callers
    // zero them at the start of the scan).
    void step_backward(const ConvIndexTable& tab, const StepCache& cc, const T* dh,
                       const T* dc, T* dx_acc, T* dh_prev_acc, T* dc_prev_acc,
                       Workspace<T>& ws) {
        const size_t S = tab.n_sites, F = h_ch;
        std::vector<T> dz(4 * F * S);
        T* dzi = dz.data();
        T* dzf = dz.data() + F * S;
        T* dzc = dz.data() + 2 * F * S;
        T* dzo = dz.data() + 3 * F * S;
        for (size_t n = 0; n < F * S; ++n) {
            T tc = cc.tanh_c[n];
            T dcn = dc[n] + dh[n] * cc.o[n] * (T(1) - tc * tc);
            T dov = dh[n] * tc;
            T div = dcn * cc.ctil[n];
            T dfv = dcn * cc.c_prev[n];
            T dcv = dcn * cc.i[n];
            dc_prev_acc[n] += dcn * cc.f[n];
            dzi[n] = div * cc.i[n] * (T(1) - cc.i[n]);
            dzf[n] = dfv * cc.f[n] * (T(1) - cc.f[n]);
            dzc[n] = dcv * (T(1) - cc.ctil[n] * cc.ctil[n]);
            dzo[n] = dov * cc.o[n] * (T(1) - cc.o[n]);
        }
        std::vector<T> dxh((x_ch + F) * S, T(0));
        gates.backward(tab, cc.xh.data(), dz.data(), dxh.data(), ws);
        for (size_t n = 0; n < x_ch * S; ++n) dx_acc[n] += dxh[n];
        const T* dhp = dxh.data() + x_ch * S;
        for (size_t n = 0; n < F * S; ++n) dh_prev_acc[n] += dhp[n];
    }
};

// Sub-pixel shuffle: input [C·r^m, lr...] → output [C, lr·r ...]. A pure index
// permutation; the offset δ within each r-block enumerates the extra channels
// in row-major order.
template <typename T>
void pixel_shuffle(const T* in, T* out, size_t c_out, int r,
                   const std::vector<size_t>& lr) {
    const int m = int(lr.size());
    if (r < 1) throw ConfigError("pixel shuffle factor must be >= 1");
    if (m == 2) {
        const size_t H = lr[0], W = lr[1], R = size_t(r);
        const size_t Wh = W * R, S = H * W;
        for (size_t c = 0; c < c_out; ++c)
            for (size_t di = 0; di < R; ++di)
                for (size_t dj = 0; dj < R; ++dj) {
                    const T* src = in + ((c * R + di) * R + dj) * S;
                    T* dst = out + c * (H * R) * Wh;
                    for (size_t i = 0; i < H; ++i)
                        for (size_t j = 0; j < W; ++j)
                            dst[(i * R + di) * Wh + (j * R + dj)] = src[i * W + j];
                }
    } else if (m == 3) {
        const size_t A = lr[0], B = lr[1], C = lr[2], R = size_t(r);
        const size_t Bh = B * R, Ch = C * R, S = A * B * C;
        for (size_t c = 0; c < c_out; ++c)
            for (size_t da = 0; da < R; ++da)
                for (size_t db = 0; db < R; ++db)
                    for (size_t dc = 0; dc < R; ++dc) {
                        const T* src = in + (((c * R + da) * R + db) * R + dc) * S;
                        T* dst = out + c * (A * R) * Bh * Ch;
                        for (size_t a = 0; a < A; ++a)
                            for (size_t b2 = 0; b2 < B; ++b2)
                                for (size_t c2 = 0; c2 < C; ++c2)
                                    dst[((a * R + da) * Bh + (b2 * R + db)) * Ch +
                                        (c2 * R + dc)] = src[(a * B + b2) * C + c2];
                    }
    } else {
        throw ConfigError("pixel shuffle supports 2-D and 3-D grids");
    }
}

// Exact inverse permutation: input [C, lr·r ...] → output [C·r^m, lr...].
template <typename T>
void pixel_unshuffle(const T* in, T* out, size_t c_out, int r,
                     const std::vector<size_t>& lr) {
    const int m = int(lr.size());
    if (r < 1) throw ConfigError("pixel shuffle factor must be >= 1");
    if (m == 2) {
        const size_t H = lr[0], W = lr[1], R = size_t(r);
        const size_t Wh = W * R, S = H * W;
        for (size_t c = 0; c < c_out; ++c)
            for (size_t di = 0; di < R; ++di)
                for (size_t dj = 0; dj < R; ++dj) {
                    T* dst = out + ((c * R + di) * R + dj) * S;
                    const T* src = in + c * (H * R) * Wh;
                    for (size_t i = 0; i < H; ++i)
                        for (size_t j = 0; j < W; ++j)
                            dst[i * W + j] = src[(i * R + di) * Wh + (j * R + dj)];
                }
    } else if (m == 3) {
        const size_t A = lr[0], B = lr[1], C = lr[2], R = size_t(r);
        const size_t Bh = B * R, Ch = C * R, S = A * B * C;
        for (size_t c = 0; c < c_out; ++c)
            for (size_t da = 0; da < R; ++da)
                for (size_t db = 0; db < R; ++db)
                    for (size_t dc = 0; dc < R; ++dc) {
                        T* dst = out + (((c * R + da) * R + db) * R + dc) * S;
                        const T* src = in + c * (A * R) * Bh * Ch;
                        for (size_t a = 0; a < A; ++a)
                            for (size_t b2 = 0; b2 < B; ++b2)
                                for (size_t c2 = 0; c2 < C; ++c2)
                                    dst[(a * B + b2) * C + c2] =
                                        src[((a * R + da) * Bh + (b2 * R + db)) * Ch +
                                            (c2 * R + dc)];
                    }
    } else {
        throw ConfigError("pixel shuffle supports 2-D and 3-D grids");
    }
}

} // namespace physr::nn
