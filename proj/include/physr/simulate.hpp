#pragma once

#include "physr/fd.hpp"
#include "physr/grid.hpp"
#include "physr/pde.hpp"

namespace physr::sim {

// Specification of one Gray-Scott reference run. snapshot_dt is the storage
// interval; internal_dt the integrator step (the two are deliberately
// separate). If snapshot_dt is not an integer multiple of internal_dt, the
// effective step is snapshot_dt/ceil(snapshot_dt/internal_dt), which can only
// shrink the step and so preserves the stability bound.
struct SimSpec {
    PDESystem system;       // GS2D or GS3D
    GridSpec grid;
    double t_end = 0.0;
    double snapshot_dt = 0.0;
    double internal_dt = 0.0;
    uint64_t seed = 0;

    void validate() const;

    // Diffusion stability bound internal_dt ≤ δx²/(2·m·max(γ_u, γ_v)).
    double stability_limit() const;
};

// Default initial condition: (u,v) = (1,0) everywhere except a centered
// square/cube covering 1/8 of each axis where (u,v) = (0.50, 0.25) plus
// uniform noise in [−0.02, 0.02] on both channels, deterministic in seed.
std::pair<Tensor<double>, Tensor<double>> default_ic(const GridSpec& grid, uint64_t seed);

// One classical RK4 step of u_t = γ∇²u + R(u,v) under periodic wrap, with the
// Laplacian evaluated by the order-4 stencil of the residual module.
// Aborts on emerging NaN/Inf.
void step_gs(Tensor<double>& u, Tensor<double>& v, const GrayScottParams& p,
             const GridSpec& grid, double dt);

// Full run: frames stored at t = 0, snapshot_dt, ..., t_end; channels (u,v);
// metadata dt = snapshot_dt. Enforces the empirical GS boundedness check
// (values within [−0.1, 1.3]) on every stored snapshot path.
FieldSequence simulate(const SimSpec& spec);

} // namespace physr::sim
