// Command-line driver for the full pipeline:
//   generate -> degrade -> train -> eval / ablate / kernels -> plot
// Subcommands read declarative JSON configs (--config); explicit flags
// override file keys. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 numerical failure.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "physr/checkpoint.hpp"
#include "physr/eval.hpp"
#include "physr/field_io.hpp"
#include "physr/manifest.hpp"
#include "physr/plot.hpp"
#include "physr/simulate.hpp"
#include "physr/studies.hpp"
#include "physr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace physr;

namespace {

std::string fmt_num(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

// ---------------------------------------------------------------------------
// Config plumbing: every subcommand declares its keys once; the declaration
// drives the CLI flag, the JSON key, and the printed schema together.

struct Schema {
    std::vector<std::array<std::string, 4>> rows;  // key, type, default, help
    std::set<std::string> keys;
};

template <typename T>
void add_key(CLI::App* cmd, Schema& sc, const std::string& key, T& ref,
             const std::string& type, const std::string& def, const std::string& help) {
    cmd->add_option("--" + key, ref, help);
    sc.rows.push_back({key, type, def, help});
    sc.keys.insert(key);
}

void add_bool_key(CLI::App* cmd, Schema& sc, const std::string& key, bool& ref,
                  const std::string& help) {
    cmd->add_flag("--" + key + ",!--no-" + key, ref, help);
    sc.rows.push_back({key, "bool", ref ? "true" : "false", help});
    sc.keys.insert(key);
}

void print_schema(const std::string& name, const Schema& sc) {
    std::printf("config keys for 'physr %s' (JSON object; explicit flags override):\n",
                name.c_str());
    size_t kw = 3, tw = 4, dw = 7;
    for (const auto& r : sc.rows) {
        kw = std::max(kw, r[0].size());
        tw = std::max(tw, r[1].size());
        dw = std::max(dw, r[2].size());
    }
    std::printf("  %-*s  %-*s  %-*s  %s\n", int(kw), "key", int(tw), "type", int(dw),
                "default", "description");
    for (const auto& r : sc.rows)
        std::printf("  %-*s  %-*s  %-*s  %s\n", int(kw), r[0].c_str(), int(tw),
                    r[1].c_str(), int(dw), r[2].c_str(), r[3].c_str());
}

json read_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    try {
        json j;
        f >> j;
        if (!j.is_object()) throw ConfigError("config must be a JSON object: " + path);
        return j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
}

void check_keys(const json& j, const Schema& sc) {
    std::vector<std::string> unknown;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!sc.keys.count(it.key())) unknown.push_back(it.key());
    if (unknown.empty()) return;
    std::sort(unknown.begin(), unknown.end());
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    msg += " (run with --schema for the accepted keys)";
    throw ConfigError(msg);
}

// File value applies only when the flag was not given explicitly.
struct Conf {
    json j;
    const CLI::App* cmd = nullptr;

    template <typename T>
    void take(const std::string& key, T& dst) const {
        if (!j.contains(key)) return;
        if (cmd->count("--" + key) > 0) return;
        try {
            dst = j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }
};

Conf merge_config(const CLI::App* cmd, const std::string& path, const Schema& sc) {
    Conf c;
    c.cmd = cmd;
    if (!path.empty()) {
        c.j = read_config(path);
        check_keys(c.j, sc);
    }
    return c;
}

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::future<void>> workers;
    const size_t k = std::min(size_t(jobs), n);
    for (size_t t = 0; t < k; ++t)
        workers.push_back(std::async(std::launch::async, [&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        }));
    for (auto& w : workers) w.get();
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string manifest_dir(const std::string& manifest_path) {
    fs::path p(manifest_path);
    auto d = p.parent_path();
    return d.empty() ? std::string(".") : d.string();
}

// ---------------------------------------------------------------------------
// Shared model / training key bundles.

struct ModelKeys {
    int features = 16;
    int blocks = 2;
    int kernel_size = 3;
    int expansion = 4;
    std::string padding = "periodic";
};

enum : unsigned {
    KEYS_PADDING = 1u << 0,
    KEYS_RESIDUAL = 1u << 1,  // one-sided / sign / squared residual knobs
    KEYS_FD_ORDER = 1u << 2,
    KEYS_FREEZE = 1u << 3,
    KEYS_SEED = 1u << 4,
};

void add_model_keys(CLI::App* cmd, Schema& sc, ModelKeys& m, unsigned mask) {
    add_key(cmd, sc, "features", m.features, "int", "16", "hidden channels per layer");
    add_key(cmd, sc, "blocks", m.blocks, "int", "2", "residual blocks in the spatial head");
    add_key(cmd, sc, "kernel_size", m.kernel_size, "int", "3", "conv kernel size (odd)");
    add_key(cmd, sc, "expansion", m.expansion, "int", "4",
            "channel expansion inside residual blocks");
    if (mask & KEYS_PADDING)
        add_key(cmd, sc, "padding", m.padding, "string", "periodic",
                "conv padding: periodic | zero");
}

struct FitKeys {
    int epochs = 120;
    double learning_rate = 1e-3;
    double weight_decay = 1e-6;
    double beta = 0.025;
    uint64_t batch_size = 8;
    int eval_every = 5;
    int fd_order = 4;
    bool deterministic = true;
    bool decoupled_wd = false;
    bool squared_physics = false;
    bool flip_residual_sign = false;
    bool one_sided_residual = false;
    bool freeze_temporal = false, freeze_spatial = false, freeze_global = false;
    uint64_t seed = 1;
    std::string precision = "float";
};

void add_fit_keys(CLI::App* cmd, Schema& sc, FitKeys& f, unsigned mask) {
    add_key(cmd, sc, "epochs", f.epochs, "int", "120", "training epochs");
    add_key(cmd, sc, "learning_rate", f.learning_rate, "float", "0.001", "Adam step size");
    add_key(cmd, sc, "weight_decay", f.weight_decay, "float", "1e-06", "L2 weight decay");
    add_key(cmd, sc, "beta", f.beta, "float", "0.025", "physics-loss weight");
    add_key(cmd, sc, "batch_size", f.batch_size, "int", "8", "samples per optimizer step");
    add_key(cmd, sc, "eval_every", f.eval_every, "int", "5",
            "epochs between test evaluations");
    if (mask & KEYS_FD_ORDER)
        add_key(cmd, sc, "fd_order", f.fd_order, "int", "4",
                "residual stencil order: 2 | 4 | 6");
    if (mask & KEYS_SEED)
        add_key(cmd, sc, "seed", f.seed, "int", "1", "training seed (shuffle + init)");
    add_key(cmd, sc, "precision", f.precision, "string", "float",
            "training scalar type: float | double");
    add_bool_key(cmd, sc, "deterministic", f.deterministic,
                 "zero the wall-time column so history files are bit-stable");
    add_bool_key(cmd, sc, "decoupled_wd", f.decoupled_wd,
                 "apply weight decay outside the Adam moments");
    if (mask & KEYS_RESIDUAL) {
        add_bool_key(cmd, sc, "squared_physics", f.squared_physics,
                     "use the squared residual norm");
        add_bool_key(cmd, sc, "flip_residual_sign", f.flip_residual_sign,
                     "flip the sign convention of the PDE residual");
        add_bool_key(cmd, sc, "one_sided_residual", f.one_sided_residual,
                     "one-sided face stencils instead of periodic wrap");
    }
    if (mask & KEYS_FREEZE) {
        add_bool_key(cmd, sc, "freeze_temporal", f.freeze_temporal,
                     "freeze projection + recurrent cell parameters");
        add_bool_key(cmd, sc, "freeze_spatial", f.freeze_spatial,
                     "freeze spatial reconstruction parameters");
        add_bool_key(cmd, sc, "freeze_global", f.freeze_global,
                     "freeze the global skip path");
    }
}

void take_model_keys(const Conf& c, ModelKeys& m, unsigned mask) {
    c.take("features", m.features);
    c.take("blocks", m.blocks);
    c.take("kernel_size", m.kernel_size);
    c.take("expansion", m.expansion);
    if (mask & KEYS_PADDING) c.take("padding", m.padding);
}

void take_fit_keys(const Conf& c, FitKeys& f, unsigned mask) {
    c.take("epochs", f.epochs);
    c.take("learning_rate", f.learning_rate);
    c.take("weight_decay", f.weight_decay);
    c.take("beta", f.beta);
    c.take("batch_size", f.batch_size);
    c.take("eval_every", f.eval_every);
    if (mask & KEYS_FD_ORDER) c.take("fd_order", f.fd_order);
    if (mask & KEYS_SEED) c.take("seed", f.seed);
    c.take("precision", f.precision);
    c.take("deterministic", f.deterministic);
    c.take("decoupled_wd", f.decoupled_wd);
    if (mask & KEYS_RESIDUAL) {
        c.take("squared_physics", f.squared_physics);
        c.take("flip_residual_sign", f.flip_residual_sign);
        c.take("one_sided_residual", f.one_sided_residual);
    }
    if (mask & KEYS_FREEZE) {
        c.take("freeze_temporal", f.freeze_temporal);
        c.take("freeze_spatial", f.freeze_spatial);
        c.take("freeze_global", f.freeze_global);
    }
}

nn::Padding parse_padding(const std::string& s) {
    if (s == "periodic") return nn::Padding::Periodic;
    if (s == "zero") return nn::Padding::Zero;
    throw ConfigError("padding must be 'periodic' or 'zero', got '" + s + "'");
}

void check_precision(const std::string& s) {
    if (s != "float" && s != "double")
        throw ConfigError("precision must be 'float' or 'double', got '" + s + "'");
}

PhySRConfig model_config(const ModelKeys& mk, const DatasetManifest& m) {
    PhySRConfig mc;
    mc.n_res_blocks = mk.blocks;
    mc.features = mk.features;
    mc.kernel_size = mk.kernel_size;
    mc.expansion = mk.expansion;
    mc.r_t = m.degrade_spec.r_t;
    mc.r_s = m.degrade_spec.r_s;
    mc.spatial_dims = m.pde.spatial_dims();
    mc.n_channels = int(m.pde.channels.size());
    mc.padding = parse_padding(mk.padding);
    mc.validate();
    return mc;
}

train::TrainConfig train_config(const FitKeys& fk) {
    train::TrainConfig tc;
    tc.learning_rate = fk.learning_rate;
    tc.weight_decay = fk.weight_decay;
    tc.decoupled_wd = fk.decoupled_wd;
    tc.batch_size = fk.batch_size;
    tc.epochs = fk.epochs;
    tc.beta = fk.beta;
    tc.seed = fk.seed;
    tc.eval_every = fk.eval_every;
    tc.deterministic = fk.deterministic;
    tc.squared_physics = fk.squared_physics;
    tc.flip_residual_sign = fk.flip_residual_sign;
    tc.one_sided_residual = fk.one_sided_residual;
    tc.fd_order = fk.fd_order;
    tc.freeze_temporal = fk.freeze_temporal;
    tc.freeze_spatial = fk.freeze_spatial;
    tc.freeze_global = fk.freeze_global;
    tc.validate();
    return tc;
}

json train_config_to_json(const train::TrainConfig& t) {
    return json{{"learning_rate", t.learning_rate},
                {"weight_decay", t.weight_decay},
                {"decoupled_wd", t.decoupled_wd},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"beta", t.beta},
                {"seed", t.seed},
                {"eval_every", t.eval_every},
                {"deterministic", t.deterministic},
                {"squared_physics", t.squared_physics},
                {"flip_residual_sign", t.flip_residual_sign},
                {"one_sided_residual", t.one_sided_residual},
                {"fd_order", t.fd_order}};
}

void write_resolved_config(const std::string& path, const std::string& manifest,
                           const PhySRConfig& mc, const train::TrainConfig& tc,
                           const json& extra = json::object()) {
    json j;
    j["manifest"] = manifest;
    j["model"] = config_to_json(mc);
    j["train"] = train_config_to_json(tc);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write resolved config: " + path);
    f << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
    std::string config, out;
    std::string system = "gs2d";
    int grid = 64;
    double spacing = 1.0;
    int samples = 11, frames = 9;
    double snapshot_dt = 5.0, warmup = 1000.0, internal_dt = 0.5, split_ratio = 0.7;
    uint64_t seed = 7;
    int jobs = 1;
    bool confirm_large = false, schema = false;
    Schema sc;
    CLI::App* cmd = nullptr;
};

void add_generate(CLI::App& app, GenerateOpts& o) {
    o.cmd = app.add_subcommand("generate", "simulate a reference corpus to disk");
    o.cmd->add_option("--config", o.config, "JSON config file (flags override)");
    o.cmd->add_flag("--schema", o.schema, "print the config schema and exit");
    o.cmd->add_flag("--confirm-large", o.confirm_large,
                    "allow paper-scale workloads (large grids / many samples)");
    add_key(o.cmd, o.sc, "out", o.out, "string", "", "output corpus directory");
    add_key(o.cmd, o.sc, "system", o.system, "string", "gs2d",
            "reference system: gs2d | gs3d");
    add_key(o.cmd, o.sc, "grid", o.grid, "int", "64", "nodes per spatial axis");
    add_key(o.cmd, o.sc, "spacing", o.spacing, "float", "1", "grid spacing per axis");
    add_key(o.cmd, o.sc, "samples", o.samples, "int", "11", "number of samples");
    add_key(o.cmd, o.sc, "frames", o.frames, "int", "9", "stored frames per sample");
    add_key(o.cmd, o.sc, "snapshot_dt", o.snapshot_dt, "float", "5",
            "time between stored frames");
    add_key(o.cmd, o.sc, "warmup", o.warmup, "float", "1000",
            "simulated time discarded before the first stored frame");
    add_key(o.cmd, o.sc, "internal_dt", o.internal_dt, "float", "0.5",
            "integrator step");
    add_key(o.cmd, o.sc, "split_ratio", o.split_ratio, "float", "0.7",
            "train fraction of the samples");
    add_key(o.cmd, o.sc, "seed", o.seed, "int", "7", "corpus seed");
    add_key(o.cmd, o.sc, "jobs", o.jobs, "int", "1", "samples simulated in parallel");
}

void run_generate(GenerateOpts& o) {
    if (o.schema) {
        print_schema("generate", o.sc);
        return;
    }
    Conf c = merge_config(o.cmd, o.config, o.sc);
    c.take("out", o.out);
    c.take("system", o.system);
    c.take("grid", o.grid);
    c.take("spacing", o.spacing);
    c.take("samples", o.samples);
    c.take("frames", o.frames);
    c.take("snapshot_dt", o.snapshot_dt);
    c.take("warmup", o.warmup);
    c.take("internal_dt", o.internal_dt);
    c.take("split_ratio", o.split_ratio);
    c.take("seed", o.seed);
    c.take("jobs", o.jobs);

    if (o.out.empty()) throw ConfigError("--out is required (or 'out' in --config)");
    PDESystem system;
    if (o.system == "gs2d")
        system = PDESystem::gray_scott_2d();
    else if (o.system == "gs3d")
        system = PDESystem::gray_scott_3d();
    else
        throw ConfigError("system must be 'gs2d' or 'gs3d', got '" + o.system + "'");
    const int dims = system.spatial_dims();
    if (o.samples < 1) throw ConfigError("samples must be >= 1");
    if (o.frames < 1) throw ConfigError("frames must be >= 1");
    if (!(o.snapshot_dt > 0)) throw ConfigError("snapshot_dt must be positive");
    if (o.warmup < 0) throw ConfigError("warmup must be >= 0");
    const double chunks = o.warmup / o.snapshot_dt;
    if (std::abs(chunks - std::round(chunks)) > 1e-9)
        throw ConfigError("warmup must be a multiple of snapshot_dt so stored "
                          "snapshots stay aligned");

    GridSpec grid;
    grid.spatial_dims = dims;
    grid.sizes.assign(size_t(dims), size_t(o.grid));
    grid.spacing.assign(size_t(dims), o.spacing);
    grid.origin.assign(size_t(dims), 0.0);
    grid.validate();

    const double bytes = double(o.samples) * double(o.frames) * 2.0 *
                         double(grid.num_nodes()) * 4.0;
    const bool large = bytes > 256.0 * (1 << 20) || o.samples > 64 ||
                       (dims == 2 && o.grid > 128) || (dims == 3 && o.grid > 64);
    if (large && !o.confirm_large)
        throw ConfigError(
            "paper-scale workload (" + std::to_string(o.samples) + " samples of " +
            std::to_string(o.grid) + "^" + std::to_string(dims) +
            " nodes); pass --confirm-large to proceed");

    fs::create_directories(o.out);
    const size_t warm_frames = size_t(std::llround(chunks));
    const size_t total_frames = warm_frames + size_t(o.frames);

    DatasetManifest m;
    m.pde = system;
    m.split_ratio = o.split_ratio;
    m.seed = o.seed;
    std::vector<std::string> labels = split_labels(size_t(o.samples), o.split_ratio, o.seed);
    m.samples.resize(size_t(o.samples));

    parallel_for(size_t(o.samples), o.jobs, [&](size_t i) {
        sim::SimSpec spec;
        spec.system = system;
        spec.grid = grid;
        spec.t_end = o.warmup + o.snapshot_dt * double(o.frames - 1);
        spec.snapshot_dt = o.snapshot_dt;
        spec.internal_dt = o.internal_dt;
        spec.seed = Rng::spawn(o.seed, i);
        FieldSequence full = sim::simulate(spec);
        if (full.frames() != total_frames)
            throw NumericError("unexpected stored frame count " +
                               std::to_string(full.frames()));
        FieldSequence hr = frame_window(full, warm_frames, size_t(o.frames));
        char name[64];
        std::snprintf(name, sizeof(name), "sample_%03zu.hr.field", i);
        save_field(hr, (fs::path(o.out) / name).string());
        m.samples[i] = SampleEntry{name, "", labels[i], spec.seed};
    });

    save_manifest(m, (fs::path(o.out) / "manifest.json").string());
    std::printf("generate: %d samples of %d frames on a %d^%d grid -> %s\n", o.samples,
                o.frames, o.grid, dims, o.out.c_str());
}

// ---------------------------------------------------------------------------
// degrade

struct DegradeOpts {
    std::string config, manifest;
    int r_t = 2, r_s = 4;
    std::string blur = "block_mean";
    bool schema = false;
    Schema sc;
    CLI::App* cmd = nullptr;
};

void add_degrade(CLI::App& app, DegradeOpts& o) {
    o.cmd = app.add_subcommand("degrade", "derive LR inputs from the HR corpus");
    o.cmd->add_option("--config", o.config, "JSON config file (flags override)");
    o.cmd->add_flag("--schema", o.schema, "print the config schema and exit");
    add_key(o.cmd, o.sc, "manifest", o.manifest, "string", "", "corpus manifest path");
    add_key(o.cmd, o.sc, "r_t", o.r_t, "int", "2", "temporal downsampling factor");
    add_key(o.cmd, o.sc, "r_s", o.r_s, "int", "4", "spatial downsampling factor");
    add_key(o.cmd, o.sc, "blur", o.blur, "string", "block_mean",
            "spatial reduction: block_mean | none");
}

void run_degrade(DegradeOpts& o) {
    if (o.schema) {
        print_schema("degrade", o.sc);
        return;
    }
    Conf c = merge_config(o.cmd, o.config, o.sc);
    c.take("manifest", o.manifest);
    c.take("r_t", o.r_t);
    c.take("r_s", o.r_s);
    c.take("blur", o.blur);
    if (o.manifest.empty())
        throw ConfigError("--manifest is required (or 'manifest' in --config)");

    degrade::DegradeSpec spec;
    spec.r_t = o.r_t;
    spec.r_s = o.r_s;
    if (o.blur == "block_mean")
        spec.blur = degrade::Blur::BlockMean;
    else if (o.blur == "none")
        spec.blur = degrade::Blur::None;
    else
        throw ConfigError("blur must be 'block_mean' or 'none', got '" + o.blur + "'");
    spec.validate();

    const std::string dir = manifest_dir(o.manifest);
    DatasetManifest m = load_manifest(o.manifest);
    if (m.samples.empty()) throw DataError("manifest lists no samples");

    std::vector<FieldSequence> hrs;
    size_t trimmed = 0;
    for (SampleEntry& e : m.samples) {
        const std::string hr_path = resolve_path(dir, e.hr_path);
        FieldSequence hr = load_field(hr_path);
        const size_t trim = degrade::trim_for(hr.frames(), spec.r_t);
        if (trim) {
            hr = frame_window(hr, 0, hr.frames() - trim);
            save_field(hr, hr_path);
            trimmed = std::max(trimmed, trim);
        }
        FieldSequence lr = degrade::apply(hr, spec);
        std::string lr_name = e.hr_path;
        const size_t pos = lr_name.rfind(".hr.");
        if (pos != std::string::npos)
            lr_name.replace(pos, 4, ".lr.");
        else
            lr_name += ".lr";
        save_field(lr, resolve_path(dir, lr_name));
        e.lr_path = lr_name;
        hrs.push_back(std::move(hr));
    }

    std::vector<const FieldSequence*> ptrs;
    for (const auto& h : hrs) ptrs.push_back(&h);
    m.norm_stats = compute_norm_stats(ptrs);
    m.degrade_spec = spec;
    m.trimmed_frames = trimmed;
    save_manifest(m, o.manifest);
    verify_manifest(m, dir);
    std::printf("degrade: %zu samples at r_t=%d r_s=%d (%s), %zu tail frames trimmed\n",
                m.samples.size(), spec.r_t, spec.r_s, o.blur.c_str(), trimmed);
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string config, manifest, out;
    ModelKeys mk;
    FitKeys fk;
    bool schema = false;
    Schema sc;
    CLI::App* cmd = nullptr;
};

void add_train(CLI::App& app, TrainOpts& o) {
    o.cmd = app.add_subcommand("train", "fit the super-resolution model");
    o.cmd->add_option("--config", o.config, "JSON config file (flags override)");
    o.cmd->add_flag("--schema", o.schema, "print the config schema and exit");
    add_key(o.cmd, o.sc, "manifest", o.manifest, "string", "", "degraded corpus manifest");
    add_key(o.cmd, o.sc, "out", o.out, "string", "", "output directory");
    add_model_keys(o.cmd, o.sc, o.mk, KEYS_PADDING);
    add_fit_keys(o.cmd, o.sc, o.fk,
                 KEYS_RESIDUAL | KEYS_FD_ORDER | KEYS_FREEZE | KEYS_SEED);
}

template <typename T>
void train_run(const DatasetManifest& m, const std::string& dir, const std::string& out,
               const std::string& manifest, const PhySRConfig& mc,
               const train::TrainConfig& tc) {
    auto data = train::TrainData<T>::load(m, dir);
    auto model = PhySRModel<T>::make(mc, data.lr_grid.sizes);
    model.init(tc.seed);
    const std::string ckpt = (fs::path(out) / "checkpoint.ckpt").string();
    const std::string hist = (fs::path(out) / "history.tsv").string();
    write_resolved_config((fs::path(out) / "config.json").string(), manifest, mc, tc);
    train::TrainResult res = train::fit(model, data, tc, ckpt, hist);
    std::printf("train: %d epochs, %zu params, median %.3g s/epoch\n", tc.epochs,
                model.param_count(), res.t_epoch_s_median);
    if (std::isfinite(res.best_test_eps))
        std::printf("train: best test eps %.4f%% at epoch %d -> %s\n", res.best_test_eps,
                    res.best_epoch, ckpt.c_str());
    else
        std::printf("train: no test split; final parameters -> %s\n", ckpt.c_str());
}

void run_train(TrainOpts& o) {
    if (o.schema) {
        print_schema("train", o.sc);
        return;
    }
    Conf c = merge_config(o.cmd, o.config, o.sc);
    c.take("manifest", o.manifest);
    c.take("out", o.out);
    take_model_keys(c, o.mk, KEYS_PADDING);
    take_fit_keys(c, o.fk, KEYS_RESIDUAL | KEYS_FD_ORDER | KEYS_FREEZE | KEYS_SEED);
    if (o.manifest.empty())
        throw ConfigError("--manifest is required (or 'manifest' in --config)");
    if (o.out.empty()) throw ConfigError("--out is required (or 'out' in --config)");
    check_precision(o.fk.precision);

    const std::string dir = manifest_dir(o.manifest);
    DatasetManifest m = load_manifest(o.manifest);
    PhySRConfig mc = model_config(o.mk, m);
    train::TrainConfig tc = train_config(o.fk);
    fs::create_directories(o.out);
    if (o.fk.precision == "double")
        train_run<double>(m, dir, o.out, o.manifest, mc, tc);
    else
        train_run<float>(m, dir, o.out, o.manifest, mc, tc);
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    std::string config, manifest, model, baseline, out;
    int timing_reps = 0, jobs = 1;
    bool schema = false;
    Schema sc;
    CLI::App* cmd = nullptr;
};

void add_eval(CLI::App& app, EvalOpts& o) {
    o.cmd = app.add_subcommand("eval", "score a trained model or the interpolation baseline");
    o.cmd->add_option("--config", o.config, "JSON config file (flags override)");
    o.cmd->add_flag("--schema", o.schema, "print the config schema and exit");
    add_key(o.cmd, o.sc, "manifest", o.manifest, "string", "", "degraded corpus manifest");
    add_key(o.cmd, o.sc, "model", o.model, "string", "", "checkpoint to score");
    add_key(o.cmd, o.sc, "baseline", o.baseline, "string", "",
            "baseline to score instead of a model: interp");
    add_key(o.cmd, o.sc, "out", o.out, "string", "", "report path (default beside manifest)");
    add_key(o.cmd, o.sc, "timing_reps", o.timing_reps, "int", "0",
            "inference timing repetitions (0 keeps the report byte-stable)");
    add_key(o.cmd, o.sc, "jobs", o.jobs, "int", "1", "samples scored in parallel");
}

void run_eval(EvalOpts& o) {
    if (o.schema) {
        print_schema("eval", o.sc);
        return;
    }
    Conf c = merge_config(o.cmd, o.config, o.sc);
    c.take("manifest", o.manifest);
    c.take("model", o.model);
    c.take("baseline", o.baseline);
    c.take("out", o.out);
    c.take("timing_reps", o.timing_reps);
    c.take("jobs", o.jobs);
    if (o.manifest.empty())
        throw ConfigError("--manifest is required (or 'manifest' in --config)");
    if (o.model.empty() == o.baseline.empty())
        throw ConfigError("pass exactly one of --model <ckpt> or --baseline interp");
    if (!o.baseline.empty() && o.baseline != "interp")
        throw ConfigError("unknown baseline '" + o.baseline + "' (expected 'interp')");

    const std::string dir = manifest_dir(o.manifest);
    DatasetManifest m = load_manifest(o.manifest);
    if (!m.has_lr())
        throw DataError("manifest has no LR inputs; run the degrade stage on " +
                        o.manifest + " first");

    eval::EvalReport rep;
    rep.method = o.baseline.empty() ? "physr" : "interp";
    rep.scores.resize(m.samples.size());
    std::vector<size_t> clamped(m.samples.size(), 0);

    parallel_for(m.samples.size(), o.jobs, [&](size_t i) {
        FieldSequence lr = load_field(resolve_path(dir, m.samples[i].lr_path));
        FieldSequence hr = load_field(resolve_path(dir, m.samples[i].hr_path));
        FieldSequence hat;
        if (o.baseline.empty()) {
            auto model = load_checkpoint<float>(o.model);
            FieldSequence lrn = normalize(lr, m.norm_stats);
            hat = model.super_resolve(lrn, m.norm_stats);
        } else {
            eval::BaselineResult b = eval::interp_baseline(lr, m.degrade_spec);
            hat = std::move(b.hr);
            clamped[i] = b.clamped_nodes;
        }
        eval::SampleScore s;
        s.index = i;
        s.split = m.samples[i].split;
        s.eps = eval::relative_error(hr.values, hat.values);
        s.eps_conventional = eval::conventional_rel_l2(hr.values, hat.values);
        rep.scores[i] = s;
    });
    for (size_t n : clamped) rep.clamped_nodes += n;
    eval::finalize_report(rep);

    if (!o.model.empty()) {
        auto model = load_checkpoint<float>(o.model);
        rep.param_count = model.param_count();
        if (o.timing_reps > 0) {
            const auto test = m.test_indices();
            const size_t pick = test.empty() ? 0 : test[0];
            FieldSequence lr = load_field(resolve_path(dir, m.samples[pick].lr_path));
            FieldSequence lrn = normalize(lr, m.norm_stats);
            std::vector<float> in(lrn.values.data(),
                                  lrn.values.data() + lrn.values.numel());
            rep.t_infer_ms = studies::measure_infer_ms(model, in, lrn.frames(),
                                                       o.timing_reps);
        }
    }

    if (o.out.empty())
        o.out = (fs::path(dir) / ("eval_" + rep.method + ".tsv")).string();
    eval::write_report_tsv(rep, o.out);
    std::printf("eval[%s]: test eps %.4f%% +- %.4f%% over %zu samples -> %s\n",
                rep.method.c_str(), rep.mean_test_eps, rep.std_test_eps,
                m.test_indices().size(), o.out.c_str());
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOpts {
    std::string config, manifest, out;
    std::string variants = "A,B,C,D";
    int seeds = 3;
    uint64_t base_seed = 1;
    int timing_reps = 21;
    ModelKeys mk;
    FitKeys fk;
    bool schema = false;
    Schema sc;
    CLI::App* cmd = nullptr;
};

void add_ablate(CLI::App& app, AblateOpts& o) {
    o.cmd = app.add_subcommand("ablate", "train model variants A-D under a shared budget");
    o.cmd->add_option("--config", o.config, "JSON config file (flags override)");
    o.cmd->add_flag("--schema", o.schema, "print the config schema and exit");
    add_key(o.cmd, o.sc, "manifest", o.manifest, "string", "", "degraded corpus manifest");
    add_key(o.cmd, o.sc, "out", o.out, "string", "", "output directory");
    add_key(o.cmd, o.sc, "variants", o.variants, "string", "A,B,C,D",
            "comma-separated variant tags");
    add_key(o.cmd, o.sc, "seeds", o.seeds, "int", "3", "seeds per variant");
    add_key(o.cmd, o.sc, "base_seed", o.base_seed, "int", "1",
            "first seed; runs use base_seed .. base_seed+seeds-1");
    add_key(o.cmd, o.sc, "timing_reps", o.timing_reps, "int", "21",
            "inference timing repetitions");
    add_model_keys(o.cmd, o.sc, o.mk, 0);
    add_fit_keys(o.cmd, o.sc, o.fk, KEYS_FD_ORDER);
}

std::vector<studies::Variant> parse_variants(const std::string& s) {
    std::vector<studies::Variant> out;
    for (const std::string& tok : split_csv(s)) {
        if (tok.size() != 1)
            throw ConfigError("bad variant token '" + tok + "' (expected A, B, C, or D)");
        out.push_back(studies::variant_from_tag(tok[0]));
    }
    return out;
}

template <typename T>
void ablate_run(const DatasetManifest& m, const std::string& dir, AblateOpts& o,
                const PhySRConfig& mc, const train::TrainConfig& tc,
                const std::vector<studies::Variant>& variants) {
    auto data = train::TrainData<T>::load(m, dir);
    studies::StudyOptions opt;
    opt.n_seeds = o.seeds;
    opt.base_seed = o.base_seed;
    opt.timing_reps = o.timing_reps;
    opt.out_dir = o.out;
    auto rows = studies::ablate(variants, data, mc, tc, opt);
    const std::string rep = (fs::path(o.out) / "ablate.tsv").string();
    studies::write_ablate_tsv(rows, rep);
    std::printf("variant  mean_eps%%  std_eps%%   params  t_epoch_s  t_infer_ms\n");
    for (const auto& r : rows)
        std::printf("%-7c  %9.4f  %8.4f  %7llu  %9.3g  %10.3g\n",
                    studies::variant_tag(r.variant), r.mean_eps, r.std_eps,
                    static_cast<unsigned long long>(r.param_count), r.t_epoch_s,
                    r.t_infer_ms);
    std::printf("ablate: %zu variants x %d seeds -> %s\n", rows.size(), o.seeds,
                rep.c_str());
}

void run_ablate(AblateOpts& o) {
    if (o.schema) {
        print_schema("ablate", o.sc);
        return;
    }
    Conf c = merge_config(o.cmd, o.config, o.sc);
    c.take("manifest", o.manifest);
    c.take("out", o.out);
    c.take("variants", o.variants);
    c.take("seeds", o.seeds);
    c.take("base_seed", o.base_seed);
    c.take("timing_reps", o.timing_reps);
    take_model_keys(c, o.mk, 0);
    take_fit_keys(c, o.fk, KEYS_FD_ORDER);
    if (o.manifest.empty())
        throw ConfigError("--manifest is required (or 'manifest' in --config)");
    if (o.out.empty()) throw ConfigError("--out is required (or 'out' in --config)");
    check_precision(o.fk.precision);
    std::vector<studies::Variant> variants = parse_variants(o.variants);

    const std::string dir = manifest_dir(o.manifest);
    DatasetManifest m = load_manifest(o.manifest);
    PhySRConfig mc = model_config(o.mk, m);
    o.fk.seed = o.base_seed;
    train::TrainConfig tc = train_config(o.fk);
    fs::create_directories(o.out);
    write_resolved_config((fs::path(o.out) / "config.json").string(), o.manifest, mc, tc,
                          json{{"variants", o.variants}, {"seeds", o.seeds}});
    if (o.fk.precision == "double")
        ablate_run<double>(m, dir, o, mc, tc, variants);
    else
        ablate_run<float>(m, dir, o, mc, tc, variants);
}

// ---------------------------------------------------------------------------
// kernels

struct KernelOpts {
    std::string config, manifest, out;
    std::string orders = "2,4,6";
    int runs = 3;
    uint64_t base_seed = 1;
    ModelKeys mk;
    FitKeys fk;
    bool schema = false;
    Schema sc;
    CLI::App* cmd = nullptr;
};

void add_kernels(CLI::App& app, KernelOpts& o) {
    o.cmd = app.add_subcommand("kernels", "study the FD stencil order of the physics loss");
    o.cmd->add_option("--config", o.config, "JSON config file (flags override)");
    o.cmd->add_flag("--schema", o.schema, "print the config schema and exit");
    add_key(o.cmd, o.sc, "manifest", o.manifest, "string", "", "degraded corpus manifest");
    add_key(o.cmd, o.sc, "out", o.out, "string", "", "output directory");
    add_key(o.cmd, o.sc, "orders", o.orders, "string", "2,4,6",
            "comma-separated stencil orders");
    add_key(o.cmd, o.sc, "runs", o.runs, "int", "3", "repeated runs per order");
    add_key(o.cmd, o.sc, "base_seed", o.base_seed, "int", "1", "first run seed");
    add_model_keys(o.cmd, o.sc, o.mk, 0);
    add_fit_keys(o.cmd, o.sc, o.fk, 0);
}

template <typename T>
void kernels_run(const DatasetManifest& m, const std::string& dir, KernelOpts& o,
                 const PhySRConfig& mc, const train::TrainConfig& tc,
                 const std::vector<int>& orders) {
    auto data = train::TrainData<T>::load(m, dir);
    studies::StudyOptions opt;
    opt.n_seeds = 1;
    opt.base_seed = o.base_seed;
    opt.out_dir = o.out;
    auto rows = studies::kernel_order_study(orders, data, mc, tc, o.runs, opt);
    const std::string rep = (fs::path(o.out) / "kernels.tsv").string();
    studies::write_kernel_tsv(rows, rep);
    std::printf("order  stencil  t_epoch_s  eps%%\n");
    for (const auto& r : rows)
        std::printf("%-5d  %-7s  %9.3g  %.4f\n", r.order,
                    studies::stencil_name(r.order).c_str(), r.t_epoch_s, r.eps);
    std::printf("kernels: %zu orders x %d runs -> %s\n", rows.size(), o.runs, rep.c_str());
}

void run_kernels(KernelOpts& o) {
    if (o.schema) {
        print_schema("kernels", o.sc);
        return;
    }
    Conf c = merge_config(o.cmd, o.config, o.sc);
    c.take("manifest", o.manifest);
    c.take("out", o.out);
    c.take("orders", o.orders);
    c.take("runs", o.runs);
    c.take("base_seed", o.base_seed);
    take_model_keys(c, o.mk, 0);
    take_fit_keys(c, o.fk, 0);
    if (o.manifest.empty())
        throw ConfigError("--manifest is required (or 'manifest' in --config)");
    if (o.out.empty()) throw ConfigError("--out is required (or 'out' in --config)");
    check_precision(o.fk.precision);

    std::vector<int> orders;
    for (const std::string& tok : split_csv(o.orders)) {
        int v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
            throw ConfigError("bad order token '" + tok + "'");
        if (v != 2 && v != 4 && v != 6)
            throw ConfigError("orders must be drawn from {2, 4, 6}, got " + tok);
        orders.push_back(v);
    }

    const std::string dir = manifest_dir(o.manifest);
    DatasetManifest m = load_manifest(o.manifest);
    PhySRConfig mc = model_config(o.mk, m);
    o.fk.seed = o.base_seed;
    train::TrainConfig tc = train_config(o.fk);
    fs::create_directories(o.out);
    write_resolved_config((fs::path(o.out) / "config.json").string(), o.manifest, mc, tc,
                          json{{"orders", o.orders}, {"runs", o.runs}});
    if (o.fk.precision == "double")
        kernels_run<double>(m, dir, o, mc, tc, orders);
    else
        kernels_run<float>(m, dir, o, mc, tc, orders);
}

// ---------------------------------------------------------------------------
// plot

struct PlotOpts {
    std::string config, manifest, model, history, out = ".";
    int sample = 0;
    std::string frame = "mid";
    int scale = 0;
    bool schema = false;
    Schema sc;
    CLI::App* cmd = nullptr;
};

void add_plot(CLI::App& app, PlotOpts& o) {
    o.cmd = app.add_subcommand("plot", "render heatmap panels and training curves");
    o.cmd->add_option("--config", o.config, "JSON config file (flags override)");
    o.cmd->add_flag("--schema", o.schema, "print the config schema and exit");
    add_key(o.cmd, o.sc, "manifest", o.manifest, "string", "",
            "degraded corpus manifest (enables snapshot panels)");
    add_key(o.cmd, o.sc, "model", o.model, "string", "",
            "checkpoint for a reconstruction panel");
    add_key(o.cmd, o.sc, "history", o.history, "string", "",
            "history.tsv for loss / error curves");
    add_key(o.cmd, o.sc, "out", o.out, "string", ".", "output directory");
    add_key(o.cmd, o.sc, "sample", o.sample, "int", "0", "sample index");
    add_key(o.cmd, o.sc, "frame", o.frame, "string", "mid",
            "HR frame index or 'mid'");
    add_key(o.cmd, o.sc, "scale", o.scale, "int", "0",
            "screen pixels per HR node (0 = auto)");
}

void plot_history(const std::string& history, const std::string& out) {
    std::ifstream f(history);
    if (!f) throw DataError("cannot open history file: " + history);
    std::string line;
    if (!std::getline(f, line) || line.rfind("epoch\t", 0) != 0)
        throw DataError("not a history file (missing header): " + history);
    plot::Series loss{"loss", {}, 31, 119, 180};
    plot::Series ldata{"data", {}, 255, 127, 14};
    plot::Series lphys{"physics", {}, 44, 160, 44};
    plot::Series eps{"test_eps", {}, 214, 39, 40};
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        double ep, l, ld, lp, te, w;
        if (!(ss >> ep >> l >> ld >> lp >> te >> w)) continue;
        loss.y.push_back(l);
        ldata.y.push_back(ld);
        lphys.y.push_back(lp);
        if (std::isfinite(te)) eps.y.push_back(te);
    }
    if (loss.y.empty()) throw DataError("history has no rows: " + history);
    plot::Image img = plot::render_curves({loss, ldata, lphys});
    const std::string p1 = (fs::path(out) / "history_loss.ppm").string();
    plot::write_ppm(img, p1);
    std::printf("plot: %s\n", p1.c_str());
    if (!eps.y.empty()) {
        const std::string p2 = (fs::path(out) / "history_eps.ppm").string();
        plot::write_ppm(plot::render_curves({eps}), p2);
        std::printf("plot: %s\n", p2.c_str());
    }
}

void plot_panels(PlotOpts& o) {
    const std::string dir = manifest_dir(o.manifest);
    DatasetManifest m = load_manifest(o.manifest);
    if (o.sample < 0 || size_t(o.sample) >= m.samples.size())
        throw DataError("sample index " + std::to_string(o.sample) + " out of range (" +
                        std::to_string(m.samples.size()) + " samples)");
    if (!m.has_lr())
        throw DataError("manifest has no LR inputs; run the degrade stage on " +
                        o.manifest + " first");
    const SampleEntry& entry = m.samples[size_t(o.sample)];
    FieldSequence hr = load_field(resolve_path(dir, entry.hr_path));
    FieldSequence lr = load_field(resolve_path(dir, entry.lr_path));

    size_t frame = 0;
    if (o.frame == "mid") {
        frame = hr.frames() / 2;
    } else {
        auto [p, ec] = std::from_chars(o.frame.data(), o.frame.data() + o.frame.size(),
                                       frame);
        if (ec != std::errc() || p != o.frame.data() + o.frame.size())
            throw ConfigError("frame must be an index or 'mid', got '" + o.frame + "'");
        if (frame >= hr.frames())
            throw DataError("frame " + std::to_string(frame) + " out of range (" +
                            std::to_string(hr.frames()) + " HR frames)");
    }

    eval::BaselineResult base = eval::interp_baseline(lr, m.degrade_spec);
    FieldSequence recon;
    bool have_model = !o.model.empty();
    if (have_model) {
        auto model = load_checkpoint<float>(o.model);
        FieldSequence lrn = normalize(lr, m.norm_stats);
        recon = model.super_resolve(lrn, m.norm_stats);
    }

    const size_t r_t = size_t(m.degrade_spec.r_t);
    const size_t lr_frame =
        std::min((frame + r_t / 2) / r_t, lr.frames() - 1);
    const size_t hr_n = hr.grid.sizes[0];
    const int hs = o.scale > 0 ? o.scale : std::max(1, int((255 + hr_n) / hr_n));

    fs::create_directories(o.out);
    for (size_t c = 0; c < hr.channels(); ++c) {
        Tensor<double> truth = plot::slice_frame(hr, frame, c);
        double vmin = truth[0], vmax = truth[0];
        for (size_t i = 0; i < truth.numel(); ++i) {
            vmin = std::min(vmin, truth[i]);
            vmax = std::max(vmax, truth[i]);
        }
        std::vector<plot::Image> panels;
        panels.push_back(plot::render_heatmap(plot::slice_frame(lr, lr_frame, c), vmin,
                                              vmax, hs * m.degrade_spec.r_s));
        panels.push_back(plot::render_heatmap(plot::slice_frame(base.hr, frame, c), vmin,
                                              vmax, hs));
        if (have_model)
            panels.push_back(plot::render_heatmap(plot::slice_frame(recon, frame, c),
                                                  vmin, vmax, hs));
        panels.push_back(plot::render_heatmap(truth, vmin, vmax, hs));

        char name[128];
        std::snprintf(name, sizeof(name), "sample%03d_frame%03zu_%s.ppm", o.sample,
                      frame, hr.channel_names[c].c_str());
        const std::string path = (fs::path(o.out) / name).string();
        plot::write_ppm(plot::hstack(panels), path);
        std::printf("plot: %s (%s)\n", path.c_str(),
                    have_model ? "LR | interp | reconstruction | truth"
                               : "LR | interp | truth");
    }
}

void run_plot(PlotOpts& o) {
    if (o.schema) {
        print_schema("plot", o.sc);
        return;
    }
    Conf c = merge_config(o.cmd, o.config, o.sc);
    c.take("manifest", o.manifest);
    c.take("model", o.model);
    c.take("history", o.history);
    c.take("out", o.out);
    c.take("sample", o.sample);
    c.take("frame", o.frame);
    c.take("scale", o.scale);
    if (o.manifest.empty() && o.history.empty())
        throw ConfigError("plot needs --manifest (panels) and/or --history (curves)");
    fs::create_directories(o.out);
    if (!o.history.empty()) plot_history(o.history, o.out);
    if (!o.manifest.empty()) plot_panels(o);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"physics-informed spatiotemporal super-resolution pipeline"};
    app.require_subcommand(1);

    GenerateOpts gen;
    DegradeOpts deg;
    TrainOpts trn;
    EvalOpts evl;
    AblateOpts abl;
    KernelOpts krn;
    PlotOpts plt;
    add_generate(app, gen);
    add_degrade(app, deg);
    add_train(app, trn);
    add_eval(app, evl);
    add_ablate(app, abl);
    add_kernels(app, krn);
    add_plot(app, plt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(gen.cmd)) run_generate(gen);
        if (app.got_subcommand(deg.cmd)) run_degrade(deg);
        if (app.got_subcommand(trn.cmd)) run_train(trn);
        if (app.got_subcommand(evl.cmd)) run_eval(evl);
        if (app.got_subcommand(abl.cmd)) run_ablate(abl);
        if (app.got_subcommand(krn.cmd)) run_kernels(krn);
        if (app.got_subcommand(plt.cmd)) run_plot(plt);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    }
    return 0;
}
