#pragma once

// Model serialization: a small binary container holding the model config, the
// low-res grid shape, and every named parameter array in 64-bit floats, so a
// float model round-trips without additional loss.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "physr/model.hpp"

namespace physr {

inline nlohmann::json config_to_json(const PhySRConfig& c) {
    return nlohmann::json{
        {"n_res_blocks", c.n_res_blocks},
        {"features", c.features},
        {"kernel_size", c.kernel_size},
        {"expansion", c.expansion},
        {"r_t", c.r_t},
        {"r_s", c.r_s},
        {"spatial_dims", c.spatial_dims},
        {"n_channels", c.n_channels},
        {"padding", c.padding == nn::Padding::Periodic ? "periodic" : "zero"},
        {"temporal_cell", c.use_convlstm ? "convlstm" : "conv"},
    };
}

inline PhySRConfig config_from_json(const nlohmann::json& j) {
    PhySRConfig c;
    c.n_res_blocks = j.at("n_res_blocks").get<int>();
    c.features = j.at("features").get<int>();
    c.kernel_size = j.at("kernel_size").get<int>();
    c.expansion = j.at("expansion").get<int>();
    c.r_t = j.at("r_t").get<int>();
    c.r_s = j.at("r_s").get<int>();
    c.spatial_dims = j.at("spatial_dims").get<int>();
    c.n_channels = j.at("n_channels").get<int>();
    const std::string pad = j.at("padding").get<std::string>();
    if (pad == "periodic")
        c.padding = nn::Padding::Periodic;
    else if (pad == "zero")
        c.padding = nn::Padding::Zero;
    else
        throw ConfigError("padding must be 'periodic' or 'zero'");
    const std::string cellkind = j.at("temporal_cell").get<std::string>();
    if (cellkind == "convlstm")
        c.use_convlstm = true;
    else if (cellkind == "conv")
        c.use_convlstm = false;
    else
        throw ConfigError("temporal_cell must be 'convlstm' or 'conv'");
    c.validate();
    return c;
}

namespace detail {
constexpr char kCheckpointMagic[8] = {'P', 'H', 'Y', 'S', 'R', 'C', 'K', '1'};
}

template <typename T>
void save_checkpoint(const std::string& path, PhySRModel<T>& model) {
    auto refs = model.params();
    nlohmann::json header;
    header["config"] = config_to_json(model.cfg);
    header["lr_spatial"] = model.lr_spatial;
    nlohmann::json arrays = nlohmann::json::array();
    for (const auto& r : refs)
        arrays.push_back({{"name", r.name}, {"len", r.value->size()}});
    header["arrays"] = arrays;
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(detail::kCheckpointMagic, 8);
    uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), std::streamsize(htext.size()));
    std::vector<double> buf;
    for (const auto& r : refs) {
        buf.resize(r.value->size());
        for (size_t i = 0; i < buf.size(); ++i) buf[i] = double((*r.value)[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  std::streamsize(buf.size() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

template <typename T>
PhySRModel<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
        throw DataError("not a checkpoint file: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || hlen > (1ull << 20)) throw DataError("corrupt checkpoint header");
    std::string htext(hlen, '\0');
    in.read(htext.data(), std::streamsize(hlen));
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt checkpoint header: ") + e.what());
    }

    PhySRConfig cfg = config_from_json(header.at("config"));
    std::vector<size_t> lr_sp = header.at("lr_spatial").get<std::vector<size_t>>();
    PhySRModel<T> model = PhySRModel<T>::make(cfg, lr_sp);
    auto refs = model.params();

    const auto& arrays = header.at("arrays");
    if (arrays.size() != refs.size())
        throw DataError("checkpoint parameter list does not match the model");
    std::vector<double> buf;
    for (size_t i = 0; i < refs.size(); ++i) {
        const std::string name = arrays[i].at("name").get<std::string>();
        const size_t len = arrays[i].at("len").get<size_t>();
        if (name != refs[i].name || len != refs[i].value->size())
            throw DataError("checkpoint array '" + name + "' does not match model '" +
                            refs[i].name + "'");
        buf.resize(len);
        in.read(reinterpret_cast<char*>(buf.data()),
                std::streamsize(len * sizeof(double)));
        if (!in) throw DataError("checkpoint truncated at array " + name);
        for (size_t k = 0; k < len; ++k) (*refs[i].value)[k] = T(buf[k]);
    }
    return model;
}

} // namespace physr
