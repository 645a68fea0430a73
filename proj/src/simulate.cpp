#include "physr/simulate.hpp"

#include <cmath>

#include "physr/rng.hpp"

namespace physr::sim {

void SimSpec::validate() const {
    system.validate();
    if (system.kind == PDEKind::RBC2D)
        throw ConfigError("simulate supports Gray-Scott systems only");
    grid.validate();
    if (grid.spatial_dims != system.spatial_dims())
        throw ConfigError("grid dimensionality does not match PDE system");
    if (t_end < 0.0 || !std::isfinite(t_end))
        throw ConfigError("t_end must be non-negative");
    if (!(snapshot_dt > 0.0) || !(internal_dt > 0.0))
        throw ConfigError("snapshot_dt and internal_dt must be positive");
    if (internal_dt > snapshot_dt)
        throw ConfigError("internal_dt must not exceed snapshot_dt");
    double ratio = t_end / snapshot_dt;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9 * std::max(1.0, std::abs(ratio)))
        throw ConfigError("snapshot_dt must divide t_end");
    if (internal_dt > stability_limit())
        throw ConfigError("internal_dt violates the diffusion stability bound (limit " +
                          std::to_string(stability_limit()) + ")");
}

double SimSpec::stability_limit() const {
    const GrayScottParams& p = system.gs();
    double h2 = grid.spacing[0] * grid.spacing[0];
    for (double h : grid.spacing) h2 = std::min(h2, h * h);
    return h2 / (2.0 * double(grid.spatial_dims) * std::max(p.gamma_u, p.gamma_v));
}

std::pair<Tensor<double>, Tensor<double>> default_ic(const GridSpec& grid, uint64_t seed) {
    grid.validate();
    Tensor<double> u(grid.sizes, 1.0);
    Tensor<double> v(grid.sizes, 0.0);

    const int m = grid.spatial_dims;
    std::vector<size_t> start(static_cast<size_t>(m)), len(static_cast<size_t>(m));
    for (int a = 0; a < m; ++a) {
        len[size_t(a)] = std::max<size_t>(1, grid.sizes[size_t(a)] / 8);
        start[size_t(a)] = (grid.sizes[size_t(a)] - len[size_t(a)]) / 2;
    }

    Rng rng(seed);
    std::vector<size_t> idx(static_cast<size_t>(m), 0);
    while (true) {
        size_t off = 0;
        for (int a = 0; a < m; ++a)
            off = off * grid.sizes[size_t(a)] + (start[size_t(a)] + idx[size_t(a)]);
        u[off] = 0.50 + rng.uniform(-0.02, 0.02);
        v[off] = 0.25 + rng.uniform(-0.02, 0.02);
        int a = m - 1;
        while (a >= 0 && ++idx[size_t(a)] == len[size_t(a)]) {
            idx[size_t(a)] = 0;
            --a;
        }
        if (a < 0) break;
    }
    return {std::move(u), std::move(v)};
}

namespace {

struct GSWork {
    fd::FDKernelSet kernels = fd::FDKernelSet::make(4);
    fd::BCSpec bc;

    explicit GSWork(int m) : bc(fd::BCSpec::periodic(m, 2)) {}

    void rhs(const Tensor<double>& u, const Tensor<double>& v, const GrayScottParams& p,
             const GridSpec& grid, Tensor<double>& fu, Tensor<double>& fv) const {
        Tensor<double> lap_u =
            fd::spatial_derivative(u, -1, fd::Deriv::Laplacian, grid.spacing, bc, kernels);
        Tensor<double> lap_v =
            fd::spatial_derivative(v, -1, fd::Deriv::Laplacian, grid.spacing, bc, kernels);
        auto [ru, rv] = gs_reaction(u, v, p);
        for (size_t i = 0; i < u.numel(); ++i) {
            fu[i] = p.gamma_u * lap_u[i] + ru[i];
            fv[i] = p.gamma_v * lap_v[i] + rv[i];
        }
    }
};

void rk4_step(Tensor<double>& u, Tensor<double>& v, const GrayScottParams& p,
              const GridSpec& grid, double dt, const GSWork& work) {
    const size_t n = u.numel();
    Tensor<double> k1u(u.shape()), k1v(u.shape()), k2u(u.shape()), k2v(u.shape());
    Tensor<double> k3u(u.shape()), k3v(u.shape()), k4u(u.shape()), k4v(u.shape());
    Tensor<double> tu(u.shape()), tv(u.shape());

    work.rhs(u, v, p, grid, k1u, k1v);
    for (size_t i = 0; i < n; ++i) {
        tu[i] = u[i] + 0.5 * dt * k1u[i];
        tv[i] = v[i] + 0.5 * dt * k1v[i];
    }
    work.rhs(tu, tv, p, grid, k2u, k2v);
    for (size_t i = 0; i < n; ++i) {
        tu[i] = u[i] + 0.5 * dt * k2u[i];
        tv[i] = v[i] + 0.5 * dt * k2v[i];
    }
    work.rhs(tu, tv, p, grid, k3u, k3v);
    for (size_t i = 0; i < n; ++i) {
        tu[i] = u[i] + dt * k3u[i];
        tv[i] = v[i] + dt * k3v[i];
    }
    work.rhs(tu, tv, p, grid, k4u, k4v);
    for (size_t i = 0; i < n; ++i) {
        u[i] += dt / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
        v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    }
}

} // namespace

void step_gs(Tensor<double>& u, Tensor<double>& v, const GrayScottParams& p,
             const GridSpec& grid, double dt) {
    if (u.shape() != grid.sizes || !u.same_shape(v))
        throw DataError("step_gs: field shapes must match the grid");
    GSWork work(grid.spatial_dims);
    rk4_step(u, v, p, grid, dt, work);
    for (size_t i = 0; i < u.numel(); ++i)
        if (!std::isfinite(u[i]) || !std::isfinite(v[i]))
            throw NumericError("Gray-Scott step produced non-finite values");
}

FieldSequence simulate(const SimSpec& spec) {
    spec.validate();
    const GrayScottParams& p = spec.system.gs();
    const size_t n_frames = size_t(std::llround(spec.t_end / spec.snapshot_dt)) + 1;
    const long n_sub = std::max<long>(1, (long)std::ceil(spec.snapshot_dt / spec.internal_dt - 1e-12));
    const double dt = spec.snapshot_dt / double(n_sub);

    auto [u, v] = default_ic(spec.grid, spec.seed);
    FieldSequence seq = FieldSequence::make(n_frames, spec.system.channels, spec.grid,
                                            spec.snapshot_dt);
    GSWork work(spec.grid.spatial_dims);
    const size_t nn = spec.grid.num_nodes();

    auto store = [&](size_t frame) {
        float* pu = seq.values.data() + seq.block_offset(frame, 0);
        float* pv = seq.values.data() + seq.block_offset(frame, 1);
        for (size_t i = 0; i < nn; ++i) {
            pu[i] = float(u[i]);
            pv[i] = float(v[i]);
        }
    };
    store(0);

    long step_index = 0;
    for (size_t f = 1; f < n_frames; ++f) {
        for (long s = 0; s < n_sub; ++s) {
            rk4_step(u, v, p, spec.grid, dt, work);
            ++step_index;
            for (size_t i = 0; i < nn; ++i) {
                double a = u[i], b = v[i];
                if (!std::isfinite(a) || !std::isfinite(b))
                    throw NumericError("non-finite field at internal step " +
                                       std::to_string(step_index));
                if (a < -0.1 || a > 1.3 || b < -0.1 || b > 1.3)
                    throw NumericError("Gray-Scott bounds check failed at internal step " +
                                       std::to_string(step_index) + " (value outside [-0.1, 1.3])");
            }
        }
        store(f);
    }
    return seq;
}

} // namespace physr::sim
