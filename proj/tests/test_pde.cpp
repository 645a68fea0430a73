#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "physr/pde.hpp"
#include "physr/rng.hpp"

using namespace physr;

TEST_CASE("gs_reaction at the trivial steady state is exactly zero") {
    Tensor<double> u({4, 4}, 1.0), v({4, 4}, 0.0);
    auto [du, dv] = gs_reaction(u, v, GrayScottParams::paper_2d());
    for (size_t i = 0; i < du.numel(); ++i) {
        CHECK(du[i] == 0.0);
        CHECK(dv[i] == 0.0);
    }
}

TEST_CASE("gs_reaction matches the hand-evaluated paper-parameter point") {
    GrayScottParams p = GrayScottParams::paper_2d();
    CHECK(p.gamma_u == 0.16);
    CHECK(p.gamma_v == 0.08);
    CHECK(p.feed == 0.06);
    CHECK(p.kill == 0.062);

    Tensor<double> u({2, 2}, 0.5), v({2, 2}, 0.25);
    auto [du, dv] = gs_reaction(u, v, p);
    // du = −0.5·0.0625 + 0.06·0.5 = −0.00125 ; dv = 0.03125 − 0.122·0.25 = 0.00075
    CHECK(du[0] == doctest::Approx(-0.00125).epsilon(1e-12));
    CHECK(dv[0] == doctest::Approx(0.00075).epsilon(1e-12));
}

TEST_CASE("gs_reaction equals a scalar-loop oracle on random fields") {
    GrayScottParams p{0.11, 0.07, 0.041, 0.0617};
    Rng rng(5);
    Tensor<double> u({8, 8}), v({8, 8});
    for (size_t i = 0; i < u.numel(); ++i) {
        u[i] = rng.uniform(-0.2, 1.2);
        v[i] = rng.uniform(-0.2, 1.2);
    }
    auto [du, dv] = gs_reaction(u, v, p);
    for (size_t i = 0; i < u.numel(); ++i) {
        double uvv = u[i] * v[i] * v[i];
        double edu = -uvv + p.feed * (1.0 - u[i]);
        double edv = uvv - (p.feed + p.kill) * v[i];
        CHECK(std::abs(du[i] - edu) <= 1e-12);
        CHECK(std::abs(dv[i] - edv) <= 1e-12);
    }
}

TEST_CASE("gs_reaction is exact on dyadic rationals") {
    // All inputs are small dyadics, so every product/sum below is exact in
    // binary floating point; the implementation must match bit-for-bit.
    GrayScottParams p{0.25, 0.125, 0.0625, 0.03125};
    Tensor<double> u({2, 2}), v({2, 2});
    u[0] = 0.375;  v[0] = 1.25;
    u[1] = -0.5;   v[1] = 0.75;
    u[2] = 1.0;    v[2] = -0.25;
    u[3] = 0.0625; v[3] = 2.0;
    auto [du, dv] = gs_reaction(u, v, p);
    for (size_t i = 0; i < 4; ++i) {
        double uvv = u[i] * (v[i] * v[i]);
        CHECK(du[i] == -uvv + 0.0625 * (1.0 - u[i]));
        CHECK(dv[i] == uvv - (0.0625 + 0.03125) * v[i]);
    }
    CHECK_THROWS_AS(gs_reaction(u, Tensor<double>({3, 2}), p), DataError);
}

TEST_CASE("gs params validation") {
    CHECK_NOTHROW(GrayScottParams::paper_2d().validate());
    CHECK_NOTHROW(GrayScottParams{0.16, 0.08, 0.0, 0.0}.validate());   // pure diffusion
    CHECK_THROWS_AS((GrayScottParams{0.0, 0.08, 0.06, 0.062}.validate()), ConfigError);
    CHECK_THROWS_AS((GrayScottParams{0.16, 0.08, -0.01, 0.062}.validate()), ConfigError);
}

TEST_CASE("RBC derived constants") {
    RBCParams p = RBCParams::paper();
    CHECK(p.r_star() == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(p.p_star() == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(p.r_star() * p.p_star() == doctest::Approx(1.0 / p.rayleigh).epsilon(1e-12));
    CHECK_NOTHROW(p.validate());
    CHECK_THROWS_AS((RBCParams{-1.0, 1.0}.validate()), ConfigError);
}

TEST_CASE("PDESystem channel invariants") {
    PDESystem gs = PDESystem::gray_scott_2d();
    CHECK(gs.channels == std::vector<std::string>{"u", "v"});
    CHECK(gs.bc_kinds.size() == 4);

    PDESystem gs3 = PDESystem::gray_scott_3d();
    CHECK(gs3.spatial_dims() == 3);
    CHECK(gs3.bc_kinds.size() == 6);

    PDESystem rbc = PDESystem::rbc_2d();
    CHECK(rbc.channels == std::vector<std::string>{"p", "T", "u", "v"});

    PDESystem bad = gs;
    bad.channels = {"v", "u"};
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    CHECK(pde_kind_from_string("gs3d") == PDEKind::GS3D);
    CHECK_THROWS_AS(pde_kind_from_string("heat"), ConfigError);
}

namespace {

std::map<std::string, Tensor<double>> constant_fields(double pv, double tv, double uv,
                                                      double vv, size_t n) {
    std::map<std::string, Tensor<double>> f;
    f["p"] = Tensor<double>({n, n}, pv);
    f["T"] = Tensor<double>({n, n}, tv);
    f["u"] = Tensor<double>({n, n}, uv);
    f["v"] = Tensor<double>({n, n}, vv);
    return f;
}

std::map<std::string, Tensor<double>> zero_derivs(size_t n) {
    std::map<std::string, Tensor<double>> d;
    for (const char* k : {"p_x", "p_y", "T_x", "T_y", "u_x", "u_y", "v_x", "v_y",
                          "lap_u", "lap_v", "lap_T"})
        d[k] = Tensor<double>({n, n}, 0.0);
    return d;
}

} // namespace

TEST_CASE("rbc_rhs on constant fields reduces to the buoyancy term") {
    RBCParams p = RBCParams::paper();
    auto f = constant_fields(0.3, 0.7, 0.1, -0.2, 6);
    auto d = zero_derivs(6);
    RBCRhs r = rbc_rhs(f, d, p, /*buoyancy_axis=*/0);
    for (size_t i = 0; i < r.continuity.numel(); ++i) {
        CHECK(r.continuity[i] == 0.0);
        CHECK(r.momentum_u[i] == 0.7);   // buoyancy on x-momentum
        CHECK(r.momentum_v[i] == 0.0);
        CHECK(r.energy[i] == 0.0);
    }
    RBCRhs ry = rbc_rhs(f, d, p, /*buoyancy_axis=*/1);
    CHECK(ry.momentum_u[0] == 0.0);
    CHECK(ry.momentum_v[0] == 0.7);
}

TEST_CASE("rbc_rhs names a missing derivative") {
    auto f = constant_fields(0.0, 1.0, 0.0, 0.0, 6);
    auto d = zero_derivs(6);
    d.erase("u_x");
    CHECK_THROWS_WITH_AS(rbc_rhs(f, d, RBCParams::paper(), 0),
                         doctest::Contains("u_x"), DataError);
}
