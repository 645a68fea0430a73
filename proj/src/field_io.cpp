#include "physr/field_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace physr {
namespace {

constexpr char kMagic[8] = {'P', 'H', 'Y', 'S', 'R', 'F', 'L', 'D'};
constexpr uint8_t kVersion = 1;

template <typename U>
void put_le(std::string& out, U v) {
    for (size_t i = 0; i < sizeof(U); ++i)
        out.push_back(char(uint8_t(v >> (8 * i))));
}

void put_f32(std::string& out, float v) { put_le(out, std::bit_cast<uint32_t>(v)); }
void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<uint64_t>(v)); }

struct Reader {
    std::string buf;
    size_t pos = 0;
    std::string path;

    void need(size_t n, const char* what) {
        if (pos + n > buf.size())
            throw DataError(path + ": truncated while reading " + what);
    }
    template <typename U>
    U get_le(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (size_t i = 0; i < sizeof(U); ++i)
            v |= U(uint8_t(buf[pos + i])) << (8 * i);
        pos += sizeof(U);
        return v;
    }
    float get_f32(const char* what) { return std::bit_cast<float>(get_le<uint32_t>(what)); }
    double get_f64(const char* what) { return std::bit_cast<double>(get_le<uint64_t>(what)); }
};

} // namespace

void save_field(const FieldSequence& seq, const std::string& path) {
    seq.validate();
    if (seq.frames() > std::numeric_limits<uint32_t>::max() ||
        seq.channels() > std::numeric_limits<uint16_t>::max())
        throw DataError("field sequence too large for container header");

    std::string out;
    out.reserve(256 + seq.values.numel() * 4);
    out.append(kMagic, sizeof(kMagic));
    put_le<uint8_t>(out, kVersion);
    put_le<uint8_t>(out, uint8_t(seq.grid.spatial_dims));
    put_le<uint32_t>(out, uint32_t(seq.frames()));
    put_le<uint16_t>(out, uint16_t(seq.channels()));
    for (size_t s : seq.grid.sizes) put_le<uint32_t>(out, uint32_t(s));
    put_f64(out, seq.dt);
    for (double h : seq.grid.spacing) put_f64(out, h);
    for (double o : seq.grid.origin) put_f64(out, o);
    for (const std::string& name : seq.channel_names) {
        if (name.size() > std::numeric_limits<uint16_t>::max())
            throw DataError("channel label too long");
        put_le<uint16_t>(out, uint16_t(name.size()));
        out.append(name);
    }
    for (size_t i = 0; i < seq.values.numel(); ++i) put_f32(out, seq.values[i]);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw DataError("write failed: " + path);
}

FieldSequence load_field(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    Reader r;
    r.path = path;
    r.buf.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());

    r.need(sizeof(kMagic), "magic");
    if (std::memcmp(r.buf.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError(path + ": bad magic, not a field container");
    r.pos = sizeof(kMagic);

    uint8_t version = r.get_le<uint8_t>("version");
    if (version != kVersion)
        throw DataError(path + ": unsupported container version " +
                        std::to_string(int(version)));

    FieldSequence seq;
    uint8_t m = r.get_le<uint8_t>("spatial_dims");
    uint32_t frames = r.get_le<uint32_t>("frames");
    uint16_t chans = r.get_le<uint16_t>("channels");
    if (m != 2 && m != 3)
        throw DataError(path + ": spatial_dims must be 2 or 3, got " +
                        std::to_string(int(m)));
    if (frames == 0 || chans == 0)
        throw DataError(path + ": frames and channels must be positive");

    seq.grid.spatial_dims = m;
    for (int a = 0; a < m; ++a)
        seq.grid.sizes.push_back(r.get_le<uint32_t>("sizes"));
    seq.dt = r.get_f64("dt");
    for (int a = 0; a < m; ++a)
        seq.grid.spacing.push_back(r.get_f64("spacing"));
    for (int a = 0; a < m; ++a)
        seq.grid.origin.push_back(r.get_f64("origin"));
    for (uint16_t c = 0; c < chans; ++c) {
        uint16_t len = r.get_le<uint16_t>("label length");
        r.need(len, "channel label");
        seq.channel_names.emplace_back(r.buf.data() + r.pos, len);
        r.pos += len;
    }

    std::vector<size_t> shape = {frames, chans};
    for (size_t s : seq.grid.sizes) shape.push_back(s);
    seq.values = Tensor<float>(shape);
    r.need(seq.values.numel() * 4, "payload");
    for (size_t i = 0; i < seq.values.numel(); ++i) {
        float v = r.get_f32("payload");
        if (!std::isfinite(v))
            throw DataError(path + ": non-finite payload value at flat index " +
                            std::to_string(i));
        seq.values[i] = v;
    }
    if (r.pos != r.buf.size())
        throw DataError(path + ": trailing bytes after payload");

    seq.validate();
    return seq;
}

} // namespace physr
