#pragma once

#include <cmath>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "physr/tensor.hpp"

namespace physr {

// Gray-Scott reaction-diffusion coefficients.
//   u_t = gamma_u ∇²u − u v² + f (1 − u)
//   v_t = gamma_v ∇²v + u v² − (f + k) v
struct GrayScottParams {
    double gamma_u = 0.0;
    double gamma_v = 0.0;
    double feed = 0.0;   // f
    double kill = 0.0;   // k

    // Diffusivities must be strictly positive; feed/kill may be zero so the
    // same system doubles as a pure-diffusion verification target.
    void validate() const;

    static GrayScottParams paper_2d() { return {0.16, 0.08, 0.06, 0.062}; }
    static GrayScottParams paper_3d() { return {0.2, 0.1, 0.025, 0.055}; }
};

// Rayleigh-Bénard convection constants. The physical constants enter only
// through the two dimensionless numbers.
struct RBCParams {
    double rayleigh = 0.0;
    double prandtl = 0.0;

    double r_star() const { return std::sqrt(prandtl / rayleigh); }
    double p_star() const { return 1.0 / std::sqrt(rayleigh * prandtl); }
    void validate() const;

    static RBCParams paper() { return {1e6, 1.0}; }
};

enum class PDEKind { GS2D, GS3D, RBC2D };

// Boundary treatment per face. Open means "no boundary information": ghost
// padding is impossible and derivatives fall back to one-sided stencils of
// matching order (the right treatment for ingested data with unknown BCs).
enum class BCKind { Periodic, Dirichlet, Neumann, Open };

const char* to_string(PDEKind k);
PDEKind pde_kind_from_string(const std::string& s);

// Declarative PDE system: parameters plus grid/channel/boundary metadata.
struct PDESystem {
    PDEKind kind = PDEKind::GS2D;
    std::variant<GrayScottParams, RBCParams> params;
    std::vector<std::string> channels;
    // One entry per boundary face, ordered [axis0-low, axis0-high, axis1-low, ...].
    std::vector<BCKind> bc_kinds;
    // Axis carrying the buoyancy term T·e for RBC; recorded so ingested data
    // can declare its convention.
    int buoyancy_axis = 0;

    int spatial_dims() const { return kind == PDEKind::GS3D ? 3 : 2; }
    const GrayScottParams& gs() const;
    const RBCParams& rbc() const;
    void validate() const;

    static PDESystem gray_scott_2d(GrayScottParams p = GrayScottParams::paper_2d());
    static PDESystem gray_scott_3d(GrayScottParams p = GrayScottParams::paper_3d());
    static PDESystem rbc_2d(RBCParams p = RBCParams::paper());
};

// Pointwise Gray-Scott reaction terms:
//   du = −u v² + f (1 − u);  dv = u v² − (f + k) v
template <typename T>
std::pair<Tensor<T>, Tensor<T>> gs_reaction(const Tensor<T>& u, const Tensor<T>& v,
                                            const GrayScottParams& p) {
    if (!u.same_shape(v)) throw DataError("gs_reaction: u/v shape mismatch");
    Tensor<T> du(u.shape()), dv(u.shape());
    const T f = T(p.feed), fk = T(p.feed + p.kill);
    for (size_t i = 0; i < u.numel(); ++i) {
        T uvv = u[i] * v[i] * v[i];
        du[i] = -uvv + f * (T(1) - u[i]);
        dv[i] = uvv - fk * v[i];
    }
    return {std::move(du), std::move(dv)};
}

// Right-hand sides of the RBC system, assembled from precomputed spatial
// derivatives. Key naming: "u_x", "u_y", "lap_u", "p_x", "T_x", ...
struct RBCRhs {
    Tensor<double> continuity;  // u_x + v_y
    Tensor<double> momentum_u;  // −(u u_x + v u_y) − p_x + buoyancy_x + R* ∇²u
    Tensor<double> momentum_v;  // −(u v_x + v v_y) − p_y + buoyancy_y + R* ∇²v
    Tensor<double> energy;      // −(u T_x + v T_y) + P* ∇²T
};

RBCRhs rbc_rhs(const std::map<std::string, Tensor<double>>& fields,
               const std::map<std::string, Tensor<double>>& derivs,
               const RBCParams& params, int buoyancy_axis = 0);

} // namespace physr
