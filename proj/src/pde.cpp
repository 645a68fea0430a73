#include "physr/pde.hpp"

namespace physr {

void GrayScottParams::validate() const {
    if (!(gamma_u > 0.0) || !(gamma_v > 0.0))
        throw ConfigError("Gray-Scott diffusivities must be strictly positive");
    if (feed < 0.0 || kill < 0.0)
        throw ConfigError("Gray-Scott feed/kill rates must be non-negative");
    for (double x : {gamma_u, gamma_v, feed, kill})
        if (!std::isfinite(x)) throw ConfigError("Gray-Scott parameter not finite");
}

void RBCParams::validate() const {
    if (!(rayleigh > 0.0) || !(prandtl > 0.0))
        throw ConfigError("RBC Rayleigh and Prandtl numbers must be positive");
    // Consistency of the derived quantities: R*·P* = 1/Ra.
    double lhs = r_star() * p_star(), rhs = 1.0 / rayleigh;
    if (std::abs(lhs - rhs) > 1e-12 * std::abs(rhs))
        throw NumericError("RBC derived constants violate R*·P* = 1/Ra");
}

const char* to_string(PDEKind k) {
    switch (k) {
        case PDEKind::GS2D: return "gs2d";
        case PDEKind::GS3D: return "gs3d";
        case PDEKind::RBC2D: return "rbc2d";
    }
    return "?";
}

PDEKind pde_kind_from_string(const std::string& s) {
    if (s == "gs2d") return PDEKind::GS2D;
    if (s == "gs3d") return PDEKind::GS3D;
    if (s == "rbc2d") return PDEKind::RBC2D;
    throw ConfigError("unknown pde kind '" + s + "' (expected gs2d|gs3d|rbc2d)");
}

const GrayScottParams& PDESystem::gs() const {
    if (auto* p = std::get_if<GrayScottParams>(&params)) return *p;
    throw ConfigError("PDE system does not hold Gray-Scott parameters");
}

const RBCParams& PDESystem::rbc() const {
    if (auto* p = std::get_if<RBCParams>(&params)) return *p;
    throw ConfigError("PDE system does not hold RBC parameters");
}

void PDESystem::validate() const {
    const std::vector<std::string> want =
        (kind == PDEKind::RBC2D) ? std::vector<std::string>{"p", "T", "u", "v"}
                                 : std::vector<std::string>{"u", "v"};
    if (channels != want)
        throw ConfigError("PDE channel list does not match system kind");
    if (bc_kinds.size() != size_t(2 * spatial_dims()))
        throw ConfigError("PDE bc_kinds must list one entry per boundary face");
    if (kind == PDEKind::RBC2D) {
        rbc().validate();
        if (buoyancy_axis < 0 || buoyancy_axis >= spatial_dims())
            throw ConfigError("buoyancy axis out of range");
    } else {
        gs().validate();
    }
}

static PDESystem make_gs(PDEKind kind, GrayScottParams p) {
    PDESystem s;
    s.kind = kind;
    s.params = p;
    s.channels = {"u", "v"};
    s.bc_kinds.assign(size_t(2 * s.spatial_dims()), BCKind::Periodic);
    s.validate();
    return s;
}

PDESystem PDESystem::gray_scott_2d(GrayScottParams p) { return make_gs(PDEKind::GS2D, p); }
PDESystem PDESystem::gray_scott_3d(GrayScottParams p) { return make_gs(PDEKind::GS3D, p); }

PDESystem PDESystem::rbc_2d(RBCParams p) {
    PDESystem s;
    s.kind = PDEKind::RBC2D;
    s.params = p;
    s.channels = {"p", "T", "u", "v"};
    s.bc_kinds.assign(4, BCKind::Periodic);
    s.buoyancy_axis = 0;
    s.validate();
    return s;
}

namespace {

const Tensor<double>& pick(const std::map<std::string, Tensor<double>>& m,
                           const std::string& key, const char* kind) {
    auto it = m.find(key);
    if (it == m.end())
        throw DataError(std::string("rbc_rhs: missing ") + kind + " '" + key + "'");
    return it->second;
}

} // namespace

RBCRhs rbc_rhs(const std::map<std::string, Tensor<double>>& fields,
               const std::map<std::string, Tensor<double>>& derivs,
               const RBCParams& params, int buoyancy_axis) {
    params.validate();
    const Tensor<double>& u = pick(fields, "u", "field");
    const Tensor<double>& v = pick(fields, "v", "field");
    const Tensor<double>& temp = pick(fields, "T", "field");
    const Tensor<double>& u_x = pick(derivs, "u_x", "derivative");
    const Tensor<double>& u_y = pick(derivs, "u_y", "derivative");
    const Tensor<double>& v_x = pick(derivs, "v_x", "derivative");
    const Tensor<double>& v_y = pick(derivs, "v_y", "derivative");
    const Tensor<double>& p_x = pick(derivs, "p_x", "derivative");
    const Tensor<double>& p_y = pick(derivs, "p_y", "derivative");
    const Tensor<double>& t_x = pick(derivs, "T_x", "derivative");
    const Tensor<double>& t_y = pick(derivs, "T_y", "derivative");
    const Tensor<double>& lap_u = pick(derivs, "lap_u", "derivative");
    const Tensor<double>& lap_v = pick(derivs, "lap_v", "derivative");
    const Tensor<double>& lap_t = pick(derivs, "lap_T", "derivative");

    for (const Tensor<double>* t :
         {&v, &temp, &u_x, &u_y, &v_x, &v_y, &p_x, &p_y, &t_x, &t_y, &lap_u, &lap_v, &lap_t})
        if (!t->same_shape(u)) throw DataError("rbc_rhs: inputs disagree on shape");

    const double rs = params.r_star(), ps = params.p_star();
    RBCRhs out{Tensor<double>(u.shape()), Tensor<double>(u.shape()),
               Tensor<double>(u.shape()), Tensor<double>(u.shape())};
    for (size_t i = 0; i < u.numel(); ++i) {
        out.continuity[i] = u_x[i] + v_y[i];
        double buo_x = (buoyancy_axis == 0) ? temp[i] : 0.0;
        double buo_y = (buoyancy_axis == 1) ? temp[i] : 0.0;
        out.momentum_u[i] = -(u[i] * u_x[i] + v[i] * u_y[i]) - p_x[i] + buo_x + rs * lap_u[i];
        out.momentum_v[i] = -(u[i] * v_x[i] + v[i] * v_y[i]) - p_y[i] + buo_y + rs * lap_v[i];
        out.energy[i] = -(u[i] * t_x[i] + v[i] * t_y[i]) + ps * lap_t[i];
    }
    return out;
}

} // namespace physr
