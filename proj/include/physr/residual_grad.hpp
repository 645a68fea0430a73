#pragma once

// Differentiable physics residual for training. The evaluation-side residual
// works frame-by-frame in double on padded tensors; training needs the same
// operator as explicit sparse rows so the transpose (backpropagation through
// the residual) is exact by construction. Supported boundary handling:
// periodic wrap, or one-sided stencils of matching order when no boundary
// information is assumed.

#include <cmath>
#include <cstdint>
#include <vector>

#include "physr/errors.hpp"
#include "physr/fd.hpp"
#include "physr/grid.hpp"
#include "physr/pde.hpp"

namespace physr::resid {

// One linear derivative operator along one axis, stored row-wise (CSR).
template <typename T>
struct AxisOp {
    size_t n = 0;
    std::vector<int32_t> row_ptr; // n+1 entries
    std::vector<int32_t> col;
    std::vector<T> w;

    // der = 1 or 2. With one_sided, faces use Fornberg stencils of matching
    // order over the first/last (order + der) nodes, as the evaluation path
    // does for open boundaries; otherwise rows wrap periodically.
    static AxisOp make(size_t n, double dx, const fd::FDKernelSet& k, int der,
                       bool one_sided) {
        const std::vector<int>& num = (der == 1) ? k.s1_num : k.s2_num;
        const int den = (der == 1) ? k.s1_den : k.s2_den;
        const int hw = (int(num.size()) - 1) / 2;
        const double pw = (der == 1) ? dx : dx * dx;
        const double scale = double(den) * pw;

        AxisOp op;
        op.n = n;
        op.row_ptr.assign(n + 1, 0);

        std::vector<double> center(num.size());
        for (size_t q = 0; q < num.size(); ++q) center[q] = double(num[q]) / scale;

        if (!one_sided) {
            if (size_t(hw) > n) throw DataError("axis too short for periodic wrap");
            for (size_t i = 0; i < n; ++i) {
                for (int q = 0; q < int(num.size()); ++q) {
                    long c = (long(i) + q - hw) % long(n);
                    if (c < 0) c += long(n);
                    op.col.push_back(int32_t(c));
                    op.w.push_back(T(center[size_t(q)]));
                }
                op.row_ptr[i + 1] = int32_t(op.col.size());
            }
            return op;
        }

        const int wlen = k.order + ((der == 1) ? 1 : 2);
        if (long(n) < wlen)
            throw DataError("axis too short for one-sided stencil of matching order");
        std::vector<double> nodes(static_cast<size_t>(wlen));
        for (int q = 0; q < wlen; ++q) nodes[size_t(q)] = double(q);

        for (size_t i = 0; i < n; ++i) {
            if (long(i) < hw) {
                auto row = fd::fornberg_weights(double(i), nodes, der);
                for (int q = 0; q < wlen; ++q) {
                    op.col.push_back(int32_t(q));
                    op.w.push_back(T(row[size_t(q)] / pw));
                }
            } else if (long(i) >= long(n) - hw) {
                const long d = long(n) - 1 - long(i); // distance from the high face
                auto row = fd::fornberg_weights(double(wlen - 1 - d), nodes, der);
                for (int q = 0; q < wlen; ++q) {
                    op.col.push_back(int32_t(long(n) - wlen + q));
                    op.w.push_back(T(row[size_t(q)] / pw));
                }
            } else {
                for (int q = 0; q < int(num.size()); ++q) {
                    op.col.push_back(int32_t(long(i) + q - hw));
                    op.w.push_back(T(center[size_t(q)]));
                }
            }
            op.row_ptr[i + 1] = int32_t(op.col.size());
        }
        return op;
    }

    // y[line, i] += Σ_q w·x[line, col] for every line along this axis. The
    // line set is described by (outer, stride): element (o, i, s) lives at
    // o·n·stride + i·stride + s.
    void apply_add(const T* x, T* y, size_t outer, size_t stride) const {
        for (size_t o = 0; o < outer; ++o)
            for (size_t s = 0; s < stride; ++s) {
                const T* xl = x + o * n * stride + s;
                T* yl = y + o * n * stride + s;
                for (size_t i = 0; i < n; ++i) {
                    T acc = T(0);
                    for (int32_t q = row_ptr[i]; q < row_ptr[i + 1]; ++q)
                        acc += w[size_t(q)] * xl[size_t(col[size_t(q)]) * stride];
                    yl[i * stride] += acc;
                }
            }
    }

    // Exact transpose of apply_add: dx[col] += w·dy[row].
    void apply_transpose_add(const T* dy, T* dx, size_t outer, size_t stride) const {
        for (size_t o = 0; o < outer; ++o)
            for (size_t s = 0; s < stride; ++s) {
                const T* dyl = dy + o * n * stride + s;
                T* dxl = dx + o * n * stride + s;
                for (size_t i = 0; i < n; ++i) {
                    const T d = dyl[i * stride];
                    for (int32_t q = row_ptr[i]; q < row_ptr[i + 1]; ++q)
                        dxl[size_t(col[size_t(q)]) * stride] += w[size_t(q)] * d;
                }
            }
    }
};

// The reaction-diffusion residual R = û_t − (γ∇²û + reaction(û)) on a frame
// sequence [frames, 2, space...], with an exact adjoint. Works in physical
// units on the denormalized prediction.
template <typename T>
struct GSResidual {
    GrayScottParams p;
    std::vector<size_t> spatial;
    double dt = 0.0;
    bool flip_sign = false;  // R = û_t + F instead of û_t − F
    std::vector<AxisOp<T>> lap;

    static GSResidual make(const GrayScottParams& params, const GridSpec& grid,
                           double dt, int order, bool one_sided,
                           bool flip_sign = false) {
        params.validate();
        grid.validate();
        if (!(dt > 0.0)) throw ConfigError("residual time step must be positive");
        auto kernels = fd::FDKernelSet::make(order);
        GSResidual r;
        r.p = params;
        r.spatial = grid.sizes;
        r.dt = dt;
        r.flip_sign = flip_sign;
        for (size_t a = 0; a < grid.sizes.size(); ++a)
            r.lap.push_back(AxisOp<T>::make(grid.sizes[a], grid.spacing[a], kernels, 2,
                                            one_sided));
        return r;
    }

    size_t sites() const {
        size_t s = 1;
        for (size_t v : spatial) s *= v;
        return s;
    }

    // Laplacian of one [space...] scalar frame into out (overwritten).
    void laplacian(const T* x, T* out) const {
        const size_t S = sites();
        std::fill(out, out + S, T(0));
        size_t stride = S;
        size_t outer = 1;
        for (size_t a = 0; a < spatial.size(); ++a) {
            stride /= spatial[a];
            lap[a].apply_add(x, out, outer, stride);
            outer *= spatial[a];
        }
    }

    void laplacian_transpose_add(const T* dy, T* dx) const {
        const size_t S = sites();
        size_t stride = S;
        size_t outer = 1;
        for (size_t a = 0; a < spatial.size(); ++a) {
            stride /= spatial[a];
            lap[a].apply_transpose_add(dy, dx, outer, stride);
            outer *= spatial[a];
        }
    }

    // u_hat: [frames, 2, S]; returns R with the same layout.
    std::vector<T> forward(const std::vector<T>& u_hat, size_t frames) const {
        const size_t S = sites(), block = 2 * S;
        if (frames < 3) throw DataError("residual needs at least 3 frames");
        if (u_hat.size() != frames * block)
            throw DataError("residual input size does not match [frames, 2, grid]");
        std::vector<T> R(frames * block);
        std::vector<T> lap_buf(S);
        const T sgn = flip_sign ? T(1) : T(-1);
        const T f = T(p.feed), fk = T(p.feed + p.kill);
        const T gu = T(p.gamma_u), gv = T(p.gamma_v);

        for (size_t t = 0; t < frames; ++t) {
            const T* u = u_hat.data() + t * block;
            const T* v = u + S;
            T* Ru = R.data() + t * block;
            T* Rv = Ru + S;

            time_row(u_hat, frames, t, 0, Ru);
            time_row(u_hat, frames, t, 1, Rv);

            laplacian(u, lap_buf.data());
            for (size_t n = 0; n < S; ++n) {
                T uvv = u[n] * v[n] * v[n];
                Ru[n] += sgn * (gu * lap_buf[n] - uvv + f * (T(1) - u[n]));
            }
            laplacian(v, lap_buf.data());
            for (size_t n = 0; n < S; ++n) {
                T uvv = u[n] * v[n] * v[n];
                Rv[n] += sgn * (gv * lap_buf[n] + uvv - fk * v[n]);
            }
        }
        return R;
    }

    // du_hat += ∂⟨R(û), dR⟩/∂û. du_hat must be sized like u_hat.
    void backward(const std::vector<T>& u_hat, size_t frames, const std::vector<T>& dR,
                  std::vector<T>& du_hat) const {
        const size_t S = sites(), block = 2 * S;
        if (dR.size() != frames * block || du_hat.size() != u_hat.size())
            throw DataError("residual gradient size mismatch");
        const T sgn = flip_sign ? T(1) : T(-1);
        const T f = T(p.feed), fk = T(p.feed + p.kill);
        const T gu = T(p.gamma_u), gv = T(p.gamma_v);
        std::vector<T> scaled(S);

        for (size_t t = 0; t < frames; ++t) {
            const T* u = u_hat.data() + t * block;
            const T* v = u + S;
            const T* dRu = dR.data() + t * block;
            const T* dRv = dRu + S;

            time_row_transpose(dRu, frames, t, 0, du_hat);
            time_row_transpose(dRv, frames, t, 1, du_hat);

            T* du = du_hat.data() + t * block;
            T* dv = du + S;

            for (size_t n = 0; n < S; ++n) scaled[n] = sgn * gu * dRu[n];
            laplacian_transpose_add(scaled.data(), du);
            for (size_t n = 0; n < S; ++n) scaled[n] = sgn * gv * dRv[n];
            laplacian_transpose_add(scaled.data(), dv);

            for (size_t n = 0; n < S; ++n) {
                const T vv = v[n] * v[n], uv2 = T(2) * u[n] * v[n];
                du[n] += sgn * (dRu[n] * (-vv - f) + dRv[n] * vv);
                dv[n] += sgn * (dRu[n] * (-uv2) + dRv[n] * (uv2 - fk));
            }
        }
    }

private:
    // û_t at frame t for channel c: central difference inside, one-sided Euler
    // at the sequence ends. Writes (overwrites) into out[S].
    void time_row(const std::vector<T>& u_hat, size_t frames, size_t t, size_t c,
                  T* out) const {
        const size_t S = sites(), block = 2 * S;
        const T* fm = u_hat.data() + (t == 0 ? 0 : (t - 1) * block) + c * S;
        const T* fp = u_hat.data() + (t + 1 >= frames ? frames - 1 : t + 1) * block +
                      c * S;
        const T inv = (t == 0 || t + 1 >= frames) ? T(1.0 / dt) : T(1.0 / (2.0 * dt));
        for (size_t n = 0; n < S; ++n) out[n] = (fp[n] - fm[n]) * inv;
    }

    void time_row_transpose(const T* d, size_t frames, size_t t, size_t c,
                            std::vector<T>& du_hat) const {
        const size_t S = sites(), block = 2 * S;
        size_t lo = t == 0 ? 0 : t - 1;
        size_t hi = t + 1 >= frames ? frames - 1 : t + 1;
        const T inv = (t == 0 || t + 1 >= frames) ? T(1.0 / dt) : T(1.0 / (2.0 * dt));
        T* dlo = du_hat.data() + lo * block + c * S;
        T* dhi = du_hat.data() + hi * block + c * S;
        for (size_t n = 0; n < S; ++n) {
            dhi[n] += d[n] * inv;
            dlo[n] -= d[n] * inv;
        }
    }
};

// ‖R‖_F/count from a precomputed sum of squares (count excludes channels).
inline double physics_loss_value(double sum_sq, size_t count, bool squared) {
    if (count == 0) throw ConfigError("physics loss count must be positive");
    return squared ? sum_sq / double(count) : std::sqrt(sum_sq) / double(count);
}

} // namespace physr::resid
