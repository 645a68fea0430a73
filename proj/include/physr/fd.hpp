#pragma once

#include <optional>
#include <vector>

#include "physr/grid.hpp"
#include "physr/pde.hpp"

namespace physr::fd {

// Central finite-difference stencils stored as exact integer numerators over
// one integer denominator; physical taps are numerator/(denominator·δx^p).
// Temporal stencil is fixed at second order: [−1, 0, 1]/(2δt) with one-sided
// Euler at the first/last frame.
struct FDKernelSet {
    int order = 4;                // spatial accuracy: 2 | 4 | 6
    std::vector<int> s1_num;      // first-derivative taps
    int s1_den = 1;
    std::vector<int> s2_num;      // second-derivative taps (1-D; Laplacian = axis sum)
    int s2_den = 1;

    int half_width() const { return (int(s1_num.size()) - 1) / 2; }
    std::vector<double> s1(double dx) const;   // taps scaled by 1/(den·δx)
    std::vector<double> s2(double dx) const;   // taps scaled by 1/(den·δx²)

    static FDKernelSet make(int order);
};

// Finite-difference weights for the m-th derivative at evaluation point z
// given arbitrary node locations (Fornberg's recursion). Used to build
// one-sided boundary stencils of matching order.
std::vector<double> fornberg_weights(double z, const std::vector<double>& nodes,
                                     int der_order);

// Per-face boundary data. `value` is the Dirichlet boundary value or the
// Neumann derivative along the positive axis direction; `values` optionally
// carries a face-shaped array instead of the scalar.
struct FaceBC {
    BCKind kind = BCKind::Periodic;
    double value = 0.0;
    Tensor<double> values;   // empty → broadcast scalar
};

struct BCSpec {
    int ghost_depth = 2;
    std::vector<FaceBC> faces;   // [axis0-low, axis0-high, axis1-low, ...]

    static BCSpec periodic(int m, int ghost_depth);
    static BCSpec open(int m, int ghost_depth);
    static BCSpec uniform(BCKind kind, int m, int ghost_depth, double value = 0.0);

    void validate(const std::vector<size_t>& shape) const;
    bool axis_periodic(int axis) const;
};

// Ghost-node padding of a single [space...] frame. Periodic faces wrap;
// Dirichlet faces overwrite the boundary plane then reflect oddly through it;
// Neumann faces set ghosts so the central difference across the boundary node
// equals the prescribed slope. Open faces cannot be padded (error). Corner
// regions (ghost in more than one axis) are left zero: every stencil used here
// is axis-aligned (cross-shaped) and never reads them.
Tensor<double> pad_with_bcs(const Tensor<double>& field,
                            const std::vector<double>& spacing, const BCSpec& bc);

enum class Deriv { First, Laplacian };

// Spatial derivative of one [space...] frame. Interior nodes use the central
// stencils of `kernels`; near-face nodes use wrap (periodic), ghost values
// (dirichlet/neumann), or one-sided stencils of matching order (open).
// axis selects the direction for Deriv::First and is ignored for Laplacian.
Tensor<double> spatial_derivative(const Tensor<double>& field, int axis, Deriv which,
                                  const std::vector<double>& spacing, const BCSpec& bc,
                                  const FDKernelSet& kernels);

// Temporal derivative of a whole sequence: central differences at interior
// frames, forward/backward Euler at the ends. Needs ≥ 3 frames.
Tensor<double> time_derivative(const FieldSequence& seq);

struct ResidualOptions {
    bool flip_sign = false;          // R = û_t + F instead of û_t − F
    std::optional<BCSpec> bc;        // default: from system.bc_kinds, homogeneous
};

// Discrete PDE residual of a (denormalized) sequence. Output layout
// [frames, n_residuals, space...]: GS → (R_u, R_v); RBC2D → (continuity,
// momentum-u, momentum-v, energy), continuity carrying no time derivative.
Tensor<double> pde_residual(const FieldSequence& hr_hat, const PDESystem& system,
                            const FDKernelSet& kernels,
                            const ResidualOptions& opts = {});

// ‖R‖_F / count. The count product is supplied by the caller (the training
// loss uses N_x·N_y(·N_z)·N_t·N_b, channels excluded, as the loss is printed).
double physics_loss(const Tensor<double>& residual, size_t count_product);
// Squared-norm variant for optimization-stability experiments: ‖R‖²_F / count.
double physics_loss_squared(const Tensor<double>& residual, size_t count_product);

// Mean absolute difference over all entries, and the β-weighted combination.
double data_loss(const Tensor<float>& hr_hat, const Tensor<float>& hr_true);
double data_loss(const Tensor<double>& hr_hat, const Tensor<double>& hr_true);
double total_loss(double l_data, double l_physics, double beta);

} // namespace physr::fd
