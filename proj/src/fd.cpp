#include "physr/fd.hpp"

#include <cmath>
#include <cstring>

namespace physr::fd {
namespace {

std::vector<size_t> strides_of(const std::vector<size_t>& shape) {
    std::vector<size_t> st(shape.size(), 1);
    for (int i = int(shape.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * shape[i + 1];
    return st;
}

// Visit every 1-D line of `shape` along `axis`. fn(base_offset, stride, face_idx)
// where face_idx enumerates the remaining axes in row-major order.
template <typename F>
void for_each_line(const std::vector<size_t>& shape, int axis, F&& fn) {
    const auto st = strides_of(shape);
    std::vector<size_t> idx(shape.size(), 0);
    size_t face = 0;
    while (true) {
        size_t base = 0;
        for (size_t a = 0; a < shape.size(); ++a) base += idx[a] * st[a];
        fn(base, st[size_t(axis)], face);
        ++face;
        int a = int(shape.size()) - 1;
        while (a >= 0) {
            if (a == axis) { --a; continue; }
            if (++idx[size_t(a)] < shape[size_t(a)]) break;
            idx[size_t(a)] = 0;
            --a;
        }
        if (a < 0) break;
    }
}

double face_value(const FaceBC& f, size_t face_idx) {
    return f.values.numel() ? f.values[face_idx] : f.value;
}

} // namespace

std::vector<double> FDKernelSet::s1(double dx) const {
    std::vector<double> t(s1_num.size());
    for (size_t i = 0; i < t.size(); ++i) t[i] = double(s1_num[i]) / (double(s1_den) * dx);
    return t;
}

std::vector<double> FDKernelSet::s2(double dx) const {
    std::vector<double> t(s2_num.size());
    for (size_t i = 0; i < t.size(); ++i)
        t[i] = double(s2_num[i]) / (double(s2_den) * dx * dx);
    return t;
}

FDKernelSet FDKernelSet::make(int order) {
    FDKernelSet k;
    k.order = order;
    switch (order) {
        case 2:
            k.s1_num = {-1, 0, 1};            k.s1_den = 2;
            k.s2_num = {1, -2, 1};            k.s2_den = 1;
            break;
        case 4:
            k.s1_num = {1, -8, 0, 8, -1};     k.s1_den = 12;
            k.s2_num = {-1, 16, -30, 16, -1}; k.s2_den = 12;
            break;
        case 6:
            k.s1_num = {-1, 9, -45, 0, 45, -9, 1};        k.s1_den = 60;
            k.s2_num = {2, -27, 270, -490, 270, -27, 2};  k.s2_den = 180;
            break;
        default:
            throw ConfigError("FD kernel order must be 2, 4 or 6, got " +
                              std::to_string(order));
    }
    return k;
}

std::vector<double> fornberg_weights(double z, const std::vector<double>& nodes,
                                     int der_order) {
    // Fornberg's recursion for FD weights of the der_order-th derivative at z.
    const int n = int(nodes.size());
    const int m = der_order;
    if (n < m + 1) throw ConfigError("fornberg_weights: too few nodes");
    std::vector<std::vector<double>> c(size_t(n), std::vector<double>(size_t(m) + 1, 0.0));
    double c1 = 1.0;
    double c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        int mn = std::min(i, m);
        double c2 = 1.0;
        double c5 = c4;
        c4 = nodes[size_t(i)] - z;
        for (int j = 0; j < i; ++j) {
            double c3 = nodes[size_t(i)] - nodes[size_t(j)];
            c2 *= c3;
            if (j == i - 1) {
                for (int kk = mn; kk >= 1; --kk)
                    c[size_t(i)][size_t(kk)] =
                        c1 * (kk * c[size_t(i - 1)][size_t(kk - 1)] -
                              c5 * c[size_t(i - 1)][size_t(kk)]) / c2;
                c[size_t(i)][0] = -c1 * c5 * c[size_t(i - 1)][0] / c2;
            }
            for (int kk = mn; kk >= 1; --kk)
                c[size_t(j)][size_t(kk)] =
                    (c4 * c[size_t(j)][size_t(kk)] - kk * c[size_t(j)][size_t(kk - 1)]) / c3;
            c[size_t(j)][0] = c4 * c[size_t(j)][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) w[size_t(i)] = c[size_t(i)][size_t(m)];
    return w;
}

BCSpec BCSpec::periodic(int m, int ghost_depth) {
    return uniform(BCKind::Periodic, m, ghost_depth);
}

BCSpec BCSpec::open(int m, int ghost_depth) {
    return uniform(BCKind::Open, m, ghost_depth);
}

BCSpec BCSpec::uniform(BCKind kind, int m, int ghost_depth, double value) {
    BCSpec bc;
    bc.ghost_depth = ghost_depth;
    FaceBC f;
    f.kind = kind;
    f.value = value;
    bc.faces.assign(size_t(2 * m), f);
    return bc;
}

bool BCSpec::axis_periodic(int axis) const {
    return faces[size_t(2 * axis)].kind == BCKind::Periodic &&
           faces[size_t(2 * axis + 1)].kind == BCKind::Periodic;
}

void BCSpec::validate(const std::vector<size_t>& shape) const {
    if (faces.size() != 2 * shape.size())
        throw ConfigError("BC spec needs one entry per boundary face (2 per axis)");
    if (ghost_depth < 1) throw ConfigError("BC ghost_depth must be >= 1");
    for (size_t a = 0; a < shape.size(); ++a) {
        const FaceBC& lo = faces[2 * a];
        const FaceBC& hi = faces[2 * a + 1];
        if ((lo.kind == BCKind::Periodic) != (hi.kind == BCKind::Periodic))
            throw ConfigError("periodic BC must apply to both faces of an axis");
        size_t face_numel = 1;
        for (size_t b = 0; b < shape.size(); ++b)
            if (b != a) face_numel *= shape[b];
        for (const FaceBC* f : {&lo, &hi})
            if (f->values.numel() && f->values.numel() != face_numel)
                throw ConfigError("BC face value array does not match face shape");
    }
}

Tensor<double> pad_with_bcs(const Tensor<double>& field,
                            const std::vector<double>& spacing, const BCSpec& bc) {
    bc.validate(field.shape());
    if (spacing.size() != field.ndim())
        throw ConfigError("pad_with_bcs: spacing length must match field rank");
    const int g = bc.ghost_depth;
    const size_t nd = field.ndim();

    std::vector<size_t> out_shape(nd);
    for (size_t a = 0; a < nd; ++a) out_shape[a] = field.shape()[a] + size_t(2 * g);
    Tensor<double> out(out_shape, 0.0);
    const auto in_st = strides_of(field.shape());
    const auto out_st = strides_of(out_shape);

    // Interior copy (every interior index shifted by +g on all axes).
    {
        std::vector<size_t> idx(nd, 0);
        while (true) {
            size_t src = 0, dst = 0;
            for (size_t a = 0; a < nd; ++a) {
                src += idx[a] * in_st[a];
                dst += (idx[a] + size_t(g)) * out_st[a];
            }
            out[dst] = field[src];
            int a = int(nd) - 1;
            while (a >= 0 && ++idx[size_t(a)] == field.shape()[size_t(a)]) {
                idx[size_t(a)] = 0;
                --a;
            }
            if (a < 0) break;
        }
    }

    // Per axis: optional Dirichlet overwrite of the boundary plane, then ghost
    // slabs. Only pure-axis slabs are written; corner regions stay zero (all
    // stencils here are cross-shaped and never read them).
    for (size_t a = 0; a < nd; ++a) {
        const FaceBC& lo = bc.faces[2 * a];
        const FaceBC& hi = bc.faces[2 * a + 1];
        if (lo.kind == BCKind::Open || hi.kind == BCKind::Open)
            throw ConfigError("pad_with_bcs: open faces cannot be padded "
                              "(no boundary information)");
        const long n = long(field.shape()[a]);
        const double dx = spacing[a];
        for_each_line(field.shape(), int(a), [&](size_t base, size_t, size_t face) {
            // Base offset of this line inside `out`, pointing at interior node 0.
            size_t ob = 0;
            {
                size_t rem = base;
                for (size_t b = 0; b < nd; ++b) {
                    size_t ib = rem / in_st[b];
                    rem %= in_st[b];
                    ob += (ib + size_t(g)) * out_st[b];
                }
            }
            const size_t os = out_st[a];
            auto at = [&](long i) -> double& { return out[ob + size_t(i) * os]; };
            if (lo.kind == BCKind::Dirichlet) at(0) = face_value(lo, face);
            if (hi.kind == BCKind::Dirichlet) at(n - 1) = face_value(hi, face);
            for (long j = 1; j <= g; ++j) {
                double& glo = out[ob - size_t(j) * os];
                double& ghi = out[ob + size_t(n - 1 + j) * os];
                switch (lo.kind) {
                    case BCKind::Periodic: glo = at(((-j) % n + n) % n); break;
                    case BCKind::Dirichlet:
                        if (j >= n) throw ConfigError("ghost depth exceeds axis size");
                        glo = 2.0 * face_value(lo, face) - at(j);
                        break;
                    case BCKind::Neumann:
                        if (j >= n) throw ConfigError("ghost depth exceeds axis size");
                        glo = at(j) - 2.0 * double(j) * dx * face_value(lo, face);
                        break;
                    case BCKind::Open: break;
                }
                switch (hi.kind) {
                    case BCKind::Periodic: ghi = at((n - 1 + j) % n); break;
                    case BCKind::Dirichlet:
                        if (j >= n) throw ConfigError("ghost depth exceeds axis size");
                        ghi = 2.0 * face_value(hi, face) - at(n - 1 - j);
                        break;
                    case BCKind::Neumann:
                        if (j >= n) throw ConfigError("ghost depth exceeds axis size");
                        ghi = at(n - 1 - j) + 2.0 * double(j) * dx * face_value(hi, face);
                        break;
                    case BCKind::Open: break;
                }
            }
        });
    }
    return out;
}

namespace {

// One derivative along one axis, optionally accumulated into `out`.
void apply_axis_derivative(const Tensor<double>& f, int axis, int der,
                           const FDKernelSet& k, double dx,
                           const FaceBC& lo, const FaceBC& hi,
                           Tensor<double>& out, bool add) {
    const std::vector<int>& num = (der == 1) ? k.s1_num : k.s2_num;
    const int den = (der == 1) ? k.s1_den : k.s2_den;
    const int hw = (int(num.size()) - 1) / 2;
    const long n = long(f.shape()[size_t(axis)]);
    const double pw = (der == 1) ? dx : dx * dx;
    // Accumulate with the exact integer numerators and scale once at the end:
    // one rounding per node, and integer cancellation (constant fields, steady
    // states) survives bit-exactly.
    const double scale = double(den) * pw;
    std::vector<double> taps(num.size());
    for (size_t q = 0; q < taps.size(); ++q) taps[q] = double(num[q]);

    if ((lo.kind == BCKind::Dirichlet || lo.kind == BCKind::Neumann ||
         hi.kind == BCKind::Dirichlet || hi.kind == BCKind::Neumann) && hw >= n)
        throw DataError("axis too short for ghost construction at this stencil order");
    if (lo.kind == BCKind::Periodic && hw > n)
        throw DataError("axis too short for periodic wrap at this stencil order");

    // One-sided stencils of matching order for open faces, via Fornberg.
    const int wlen = k.order + ((der == 1) ? 1 : 2);
    std::vector<std::vector<double>> row_lo, row_hi;
    if (lo.kind == BCKind::Open || hi.kind == BCKind::Open) {
        if (n < wlen)
            throw DataError("axis too short for one-sided stencil of matching order");
        std::vector<double> nodes(static_cast<size_t>(wlen));
        for (int q = 0; q < wlen; ++q) nodes[size_t(q)] = double(q);
        for (int i = 0; i < hw; ++i) {
            auto wl = fornberg_weights(double(i), nodes, der);
            auto wh = fornberg_weights(double(wlen - 1 - i), nodes, der);
            for (double& w : wl) w /= pw;
            for (double& w : wh) w /= pw;
            row_lo.push_back(std::move(wl));
            row_hi.push_back(std::move(wh));
        }
    }

    std::vector<double> buf(size_t(n + 2 * hw));
    for_each_line(f.shape(), axis, [&](size_t base, size_t stride, size_t face) {
        const double lov = face_value(lo, face);
        const double hiv = face_value(hi, face);
        // Materialize the line with Dirichlet overwrite + ghost extension.
        for (long i = 0; i < n; ++i) buf[size_t(hw + i)] = f[base + size_t(i) * stride];
        if (lo.kind == BCKind::Dirichlet) buf[size_t(hw)] = lov;
        if (hi.kind == BCKind::Dirichlet) buf[size_t(hw + n - 1)] = hiv;
        for (long j = 1; j <= hw; ++j) {
            double& glo = buf[size_t(hw - j)];
            double& ghi = buf[size_t(hw + n - 1 + j)];
            switch (lo.kind) {
                case BCKind::Periodic: glo = buf[size_t(hw) + size_t(((-j) % n + n) % n)]; break;
                case BCKind::Dirichlet: glo = 2.0 * lov - buf[size_t(hw + j)]; break;
                case BCKind::Neumann: glo = buf[size_t(hw + j)] - 2.0 * double(j) * dx * lov; break;
                case BCKind::Open: glo = 0.0; break;
            }
            switch (hi.kind) {
                case BCKind::Periodic: ghi = buf[size_t(hw) + size_t((n - 1 + j) % n)]; break;
                case BCKind::Dirichlet: ghi = 2.0 * hiv - buf[size_t(hw + n - 1 - j)]; break;
                case BCKind::Neumann: ghi = buf[size_t(hw + n - 1 - j)] + 2.0 * double(j) * dx * hiv; break;
                case BCKind::Open: ghi = 0.0; break;
            }
        }
        const long ilo = (lo.kind == BCKind::Open) ? hw : 0;
        const long ihi = (hi.kind == BCKind::Open) ? n - hw : n;
        for (long i = ilo; i < ihi; ++i) {
            double acc = 0.0;
            for (size_t q = 0; q < taps.size(); ++q) acc += taps[q] * buf[size_t(i) + q];
            acc /= scale;
            double& o = out[base + size_t(i) * stride];
            o = add ? o + acc : acc;
        }
        if (lo.kind == BCKind::Open)
            for (long i = 0; i < hw; ++i) {
                double acc = 0.0;
                for (int q = 0; q < wlen; ++q)
                    acc += row_lo[size_t(i)][size_t(q)] * buf[size_t(hw + q)];
                double& o = out[base + size_t(i) * stride];
                o = add ? o + acc : acc;
            }
        if (hi.kind == BCKind::Open)
            for (long i = 0; i < hw; ++i) {
                double acc = 0.0;
                for (int q = 0; q < wlen; ++q)
                    acc += row_hi[size_t(i)][size_t(q)] * buf[size_t(hw + n - wlen + q)];
                double& o = out[base + size_t(n - 1 - i) * stride];
                o = add ? o + acc : acc;
            }
    });
}

} // namespace

Tensor<double> spatial_derivative(const Tensor<double>& field, int axis, Deriv which,
                                  const std::vector<double>& spacing, const BCSpec& bc,
                                  const FDKernelSet& kernels) {
    bc.validate(field.shape());
    if (spacing.size() != field.ndim())
        throw ConfigError("spatial_derivative: spacing length must match field rank");
    Tensor<double> out(field.shape());
    if (which == Deriv::First) {
        if (axis < 0 || size_t(axis) >= field.ndim())
            throw ConfigError("spatial_derivative: axis " + std::to_string(axis) +
                              " out of range for rank " + std::to_string(field.ndim()));
        apply_axis_derivative(field, axis, 1, kernels, spacing[size_t(axis)],
                              bc.faces[size_t(2 * axis)], bc.faces[size_t(2 * axis + 1)],
                              out, false);
    } else {
        for (size_t a = 0; a < field.ndim(); ++a)
            apply_axis_derivative(field, int(a), 2, kernels, spacing[a],
                                  bc.faces[2 * a], bc.faces[2 * a + 1], out, a != 0);
    }
    return out;
}

Tensor<double> time_derivative(const FieldSequence& seq) {
    seq.validate();
    const size_t T = seq.frames();
    if (T < 3) throw DataError("time derivative needs at least 3 frames");
    Tensor<double> out(seq.values.shape());
    const size_t block = seq.channels() * seq.grid.num_nodes();
    const double dt = seq.dt;
    const float* x = seq.values.data();
    for (size_t k = 0; k < T; ++k)
        for (size_t i = 0; i < block; ++i) {
            size_t o = k * block + i;
            if (k == 0)
                out[o] = (double(x[block + i]) - double(x[i])) / dt;
            else if (k == T - 1)
                out[o] = (double(x[o]) - double(x[o - block])) / dt;
            else
                out[o] = (double(x[o + block]) - double(x[o - block])) / (2.0 * dt);
        }
    return out;
}

namespace {

Tensor<double> frame_channel(const FieldSequence& seq, size_t t, size_t c) {
    Tensor<double> out(std::vector<size_t>(seq.values.shape().begin() + 2,
                                           seq.values.shape().end()));
    const float* p = seq.values.data() + seq.block_offset(t, c);
    for (size_t i = 0; i < out.numel(); ++i) out[i] = double(p[i]);
    return out;
}

} // namespace

Tensor<double> pde_residual(const FieldSequence& hr_hat, const PDESystem& system,
                            const FDKernelSet& kernels, const ResidualOptions& opts) {
    hr_hat.validate();
    system.validate();
    if (hr_hat.channel_names != system.channels)
        throw DataError("sequence channels do not match PDE system");
    if (hr_hat.grid.spatial_dims != system.spatial_dims())
        throw DataError("sequence dimensionality does not match PDE system");

    const int hw = kernels.half_width();
    BCSpec bc;
    if (opts.bc) {
        bc = *opts.bc;
        if (bc.ghost_depth != hw)
            throw ConfigError("BC ghost_depth must equal the stencil half-width");
    } else {
        bc.ghost_depth = hw;
        for (BCKind k : system.bc_kinds) {
            FaceBC f;
            f.kind = k;
            bc.faces.push_back(f);
        }
    }

    const double sgn = opts.flip_sign ? 1.0 : -1.0;   // R = û_t + sgn·F
    const size_t T = hr_hat.frames();
    const size_t n = hr_hat.grid.num_nodes();
    Tensor<double> ut = time_derivative(hr_hat);
    const std::vector<double>& sp = hr_hat.grid.spacing;

    if (system.kind == PDEKind::GS2D || system.kind == PDEKind::GS3D) {
        const GrayScottParams& p = system.gs();
        std::vector<size_t> rshape = {T, 2};
        for (size_t s : hr_hat.grid.sizes) rshape.push_back(s);
        Tensor<double> R(rshape);
        for (size_t t = 0; t < T; ++t) {
            Tensor<double> u = frame_channel(hr_hat, t, 0);
            Tensor<double> v = frame_channel(hr_hat, t, 1);
            Tensor<double> lap_u = spatial_derivative(u, -1, Deriv::Laplacian, sp, bc, kernels);
            Tensor<double> lap_v = spatial_derivative(v, -1, Deriv::Laplacian, sp, bc, kernels);
            auto [ru, rv] = gs_reaction(u, v, p);
            double* Ru = R.data() + (t * 2 + 0) * n;
            double* Rv = R.data() + (t * 2 + 1) * n;
            const double* ut_u = ut.data() + (t * 2 + 0) * n;
            const double* ut_v = ut.data() + (t * 2 + 1) * n;
            for (size_t i = 0; i < n; ++i) {
                Ru[i] = ut_u[i] + sgn * (p.gamma_u * lap_u[i] + ru[i]);
                Rv[i] = ut_v[i] + sgn * (p.gamma_v * lap_v[i] + rv[i]);
            }
        }
        return R;
    }

    // RBC2D: rows (continuity, momentum-u, momentum-v, energy).
    const RBCParams& p = system.rbc();
    std::vector<size_t> rshape = {T, 4};
    for (size_t s : hr_hat.grid.sizes) rshape.push_back(s);
    Tensor<double> R(rshape);
    for (size_t t = 0; t < T; ++t) {
        std::map<std::string, Tensor<double>> fields;
        fields["p"] = frame_channel(hr_hat, t, 0);
        fields["T"] = frame_channel(hr_hat, t, 1);
        fields["u"] = frame_channel(hr_hat, t, 2);
        fields["v"] = frame_channel(hr_hat, t, 3);
        std::map<std::string, Tensor<double>> d;
        for (const char* name : {"p", "T", "u", "v"}) {
            d[std::string(name) + "_x"] =
                spatial_derivative(fields[name], 0, Deriv::First, sp, bc, kernels);
            d[std::string(name) + "_y"] =
                spatial_derivative(fields[name], 1, Deriv::First, sp, bc, kernels);
        }
        for (const char* name : {"T", "u", "v"})
            d[std::string("lap_") + name] =
                spatial_derivative(fields[name], -1, Deriv::Laplacian, sp, bc, kernels);
        RBCRhs rhs = rbc_rhs(fields, d, p, system.buoyancy_axis);

        double* Rc = R.data() + (t * 4 + 0) * n;
        double* Rmu = R.data() + (t * 4 + 1) * n;
        double* Rmv = R.data() + (t * 4 + 2) * n;
        double* Re = R.data() + (t * 4 + 3) * n;
        const double* ut_u = ut.data() + (t * 4 + 2) * n;
        const double* ut_v = ut.data() + (t * 4 + 3) * n;
        const double* ut_T = ut.data() + (t * 4 + 1) * n;
        for (size_t i = 0; i < n; ++i) {
            Rc[i] = rhs.continuity[i];
            Rmu[i] = ut_u[i] + sgn * rhs.momentum_u[i];
            Rmv[i] = ut_v[i] + sgn * rhs.momentum_v[i];
            Re[i] = ut_T[i] + sgn * rhs.energy[i];
        }
    }
    return R;
}

double physics_loss(const Tensor<double>& residual, size_t count_product) {
    if (count_product == 0) throw ConfigError("physics_loss: zero count product");
    double acc = 0.0;
    for (size_t i = 0; i < residual.numel(); ++i) acc += residual[i] * residual[i];
    double l = std::sqrt(acc) / double(count_product);
    if (!std::isfinite(l)) throw NumericError("physics loss is not finite");
    return l;
}

double physics_loss_squared(const Tensor<double>& residual, size_t count_product) {
    if (count_product == 0) throw ConfigError("physics_loss: zero count product");
    double acc = 0.0;
    for (size_t i = 0; i < residual.numel(); ++i) acc += residual[i] * residual[i];
    double l = acc / double(count_product);
    if (!std::isfinite(l)) throw NumericError("physics loss is not finite");
    return l;
}

namespace {

template <typename T>
double mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw DataError("data_loss: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) acc += std::abs(double(a[i]) - double(b[i]));
    return acc / double(a.numel());
}

} // namespace

double data_loss(const Tensor<float>& hr_hat, const Tensor<float>& hr_true) {
    return mean_abs_diff(hr_hat, hr_true);
}

double data_loss(const Tensor<double>& hr_hat, const Tensor<double>& hr_true) {
    return mean_abs_diff(hr_hat, hr_true);
}

double total_loss(double l_data, double l_physics, double beta) {
    return l_data + beta * l_physics;
}

} // namespace physr::fd
