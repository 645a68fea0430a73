#include "physr/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "physr/field_io.hpp"
#include "physr/rng.hpp"

namespace physr {

using nlohmann::json;

namespace {

const char* bc_to_string(BCKind k) {
    switch (k) {
        case BCKind::Periodic: return "periodic";
        case BCKind::Dirichlet: return "dirichlet";
        case BCKind::Neumann: return "neumann";
        case BCKind::Open: return "open";
    }
    return "?";
}

BCKind bc_from_string(const std::string& s) {
    if (s == "periodic") return BCKind::Periodic;
    if (s == "dirichlet") return BCKind::Dirichlet;
    if (s == "neumann") return BCKind::Neumann;
    if (s == "open") return BCKind::Open;
    throw DataError("unknown bc kind '" + s + "'");
}

json pde_to_json(const PDESystem& p) {
    json j;
    j["kind"] = to_string(p.kind);
    if (p.kind == PDEKind::RBC2D) {
        const RBCParams& r = p.rbc();
        j["params"] = {{"rayleigh", r.rayleigh}, {"prandtl", r.prandtl}};
        j["buoyancy_axis"] = p.buoyancy_axis;
    } else {
        const GrayScottParams& g = p.gs();
        j["params"] = {{"gamma_u", g.gamma_u},
                       {"gamma_v", g.gamma_v},
                       {"feed", g.feed},
                       {"kill", g.kill}};
    }
    json bcs = json::array();
    for (BCKind k : p.bc_kinds) bcs.push_back(bc_to_string(k));
    j["bc_kinds"] = bcs;
    j["channels"] = p.channels;
    return j;
}

PDESystem pde_from_json(const json& j) {
    PDESystem p;
    p.kind = pde_kind_from_string(j.at("kind").get<std::string>());
    const json& pr = j.at("params");
    if (p.kind == PDEKind::RBC2D) {
        RBCParams r;
        r.rayleigh = pr.at("rayleigh").get<double>();
        r.prandtl = pr.at("prandtl").get<double>();
        p.params = r;
        p.buoyancy_axis = j.value("buoyancy_axis", 0);
    } else {
        GrayScottParams g;
        g.gamma_u = pr.at("gamma_u").get<double>();
        g.gamma_v = pr.at("gamma_v").get<double>();
        g.feed = pr.at("feed").get<double>();
        g.kill = pr.at("kill").get<double>();
        p.params = g;
    }
    p.channels = j.at("channels").get<std::vector<std::string>>();
    for (const auto& s : j.at("bc_kinds"))
        p.bc_kinds.push_back(bc_from_string(s.get<std::string>()));
    p.validate();
    return p;
}

} // namespace

bool DatasetManifest::has_lr() const {
    if (samples.empty()) return false;
    for (const SampleEntry& s : samples)
        if (s.lr_path.empty()) return false;
    return true;
}

std::vector<size_t> DatasetManifest::train_indices() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == "train") out.push_back(i);
    return out;
}

std::vector<size_t> DatasetManifest::test_indices() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == "test") out.push_back(i);
    return out;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    json j;
    j["pde"] = pde_to_json(m.pde);
    j["degrade"] = {{"r_t", m.degrade_spec.r_t},
                    {"r_s", m.degrade_spec.r_s},
                    {"blur", m.degrade_spec.blur == degrade::Blur::BlockMean
                                 ? "block_mean"
                                 : "none"}};
    if (m.norm_stats.channels()) {
        j["norm_stats"] = {{"mean", m.norm_stats.mean}, {"stddev", m.norm_stats.stddev}};
    }
    j["split_ratio"] = m.split_ratio;
    j["seed"] = m.seed;
    j["trimmed_frames"] = m.trimmed_frames;
    json samples = json::array();
    for (const SampleEntry& s : m.samples) {
        json e;
        e["hr"] = s.hr_path;
        if (!s.lr_path.empty()) e["lr"] = s.lr_path;
        e["split"] = s.split;
        e["seed"] = s.seed;
        samples.push_back(e);
    }
    j["samples"] = samples;

    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open manifest for writing: " + path);
    f << j.dump(2) << "\n";
    if (!f) throw DataError("manifest write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw DataError("manifest parse error in " + path + ": " + e.what());
    }
    try {
        DatasetManifest m;
        m.pde = pde_from_json(j.at("pde"));
        const json& d = j.at("degrade");
        m.degrade_spec.r_t = d.at("r_t").get<int>();
        m.degrade_spec.r_s = d.at("r_s").get<int>();
        std::string blur = d.at("blur").get<std::string>();
        if (blur == "block_mean") m.degrade_spec.blur = degrade::Blur::BlockMean;
        else if (blur == "none") m.degrade_spec.blur = degrade::Blur::None;
        else throw DataError("unknown blur kind '" + blur + "'");
        m.degrade_spec.validate();
        if (j.contains("norm_stats")) {
            m.norm_stats.mean = j["norm_stats"].at("mean").get<std::vector<double>>();
            m.norm_stats.stddev = j["norm_stats"].at("stddev").get<std::vector<double>>();
            m.norm_stats.validate();
        }
        m.split_ratio = j.at("split_ratio").get<double>();
        m.seed = j.at("seed").get<uint64_t>();
        m.trimmed_frames = j.value("trimmed_frames", size_t(0));
        for (const json& e : j.at("samples")) {
            SampleEntry s;
            s.hr_path = e.at("hr").get<std::string>();
            s.lr_path = e.value("lr", std::string());
            s.split = e.at("split").get<std::string>();
            s.seed = e.value("seed", uint64_t(0));
            if (s.split != "train" && s.split != "test")
                throw DataError("sample split must be 'train' or 'test'");
            m.samples.push_back(s);
        }
        return m;
    } catch (const json::exception& e) {
        throw DataError("manifest field error in " + path + ": " + e.what());
    }
}

std::vector<std::string> split_labels(size_t n, double ratio, uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw ConfigError("split ratio must lie in [0, 1]");
    size_t n_train = size_t(std::llround(ratio * double(n)));
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    shuffle(order, rng);
    std::vector<std::string> labels(n, "test");
    for (size_t i = 0; i < n_train && i < n; ++i) labels[order[i]] = "train";
    return labels;
}

std::string resolve_path(const std::string& base_dir, const std::string& rel) {
    std::filesystem::path p(rel);
    if (p.is_absolute()) return rel;
    return (std::filesystem::path(base_dir) / p).string();
}

void verify_manifest(const DatasetManifest& m, const std::string& base_dir) {
    if (m.samples.empty()) throw DataError("manifest lists no samples");
    for (size_t i = 0; i < m.samples.size(); ++i) {
        const SampleEntry& s = m.samples[i];
        const std::string tag = "sample " + std::to_string(i);
        FieldSequence hr = load_field(resolve_path(base_dir, s.hr_path));
        if (hr.channel_names != m.pde.channels)
            throw DataError(tag + ": HR channels do not match the PDE system");
        if (s.lr_path.empty()) continue;
        FieldSequence lr = load_field(resolve_path(base_dir, s.lr_path));
        const int rt = m.degrade_spec.r_t, rs = m.degrade_spec.r_s;
        if (hr.frames() != size_t(rt) * (lr.frames() - 1) + 1)
            throw DataError(tag + ": frame relation hr = r_t·(lr−1)+1 violated");
        for (int a = 0; a < hr.grid.spatial_dims; ++a) {
            if (hr.grid.sizes[size_t(a)] != lr.grid.sizes[size_t(a)] * size_t(rs))
                throw DataError(tag + ": spatial relation hr = lr·r_s violated on axis " +
                                std::to_string(a));
            if (std::abs(lr.grid.spacing[size_t(a)] -
                         double(rs) * hr.grid.spacing[size_t(a)]) >
                1e-12 * std::abs(lr.grid.spacing[size_t(a)]))
                throw DataError(tag + ": spacing relation violated on axis " +
                                std::to_string(a));
        }
        if (std::abs(lr.dt - double(rt) * hr.dt) > 1e-12 * std::abs(lr.dt))
            throw DataError(tag + ": dt relation lr.dt = r_t·hr.dt violated");
        if (lr.channel_names != hr.channel_names)
            throw DataError(tag + ": LR/HR channel mismatch");
    }
}

} // namespace physr
