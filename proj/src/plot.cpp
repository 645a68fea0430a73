#include "physr/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace physr::plot {

Image Image::solid(size_t w, size_t h, uint8_t r, uint8_t g, uint8_t b) {
    Image img;
    img.w = w;
    img.h = h;
    img.rgb.resize(w * h * 3);
    for (size_t i = 0; i < w * h; ++i) {
        img.rgb[3 * i] = r;
        img.rgb[3 * i + 1] = g;
        img.rgb[3 * i + 2] = b;
    }
    return img;
}

void Image::set(size_t x, size_t y, uint8_t r, uint8_t g, uint8_t b) {
    if (x >= w || y >= h) return;
    size_t i = 3 * (y * w + x);
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
}

void write_ppm(const Image& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open image for writing: " + path);
    f << "P6\n" << img.w << " " << img.h << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.rgb.data()),
            std::streamsize(img.rgb.size()));
    if (!f) throw DataError("image write failed: " + path);
}

void viridis(double t, uint8_t& r, uint8_t& g, uint8_t& b) {
    static const uint8_t anchors[11][3] = {
        {68, 1, 84},    {72, 36, 117},  {65, 68, 135},  {53, 95, 141},
        {42, 120, 142}, {33, 145, 140}, {34, 168, 132}, {68, 190, 112},
        {122, 209, 81}, {189, 223, 38}, {253, 231, 37}};
    t = std::clamp(t, 0.0, 1.0);
    double pos = t * 10.0;
    size_t i = std::min<size_t>(9, size_t(pos));
    double f = pos - double(i);
    r = uint8_t(std::lround(anchors[i][0] + f * (anchors[i + 1][0] - anchors[i][0])));
    g = uint8_t(std::lround(anchors[i][1] + f * (anchors[i + 1][1] - anchors[i][1])));
    b = uint8_t(std::lround(anchors[i][2] + f * (anchors[i + 1][2] - anchors[i][2])));
}

Image render_heatmap(const Tensor<double>& slice, double vmin, double vmax, int scale) {
    if (slice.ndim() != 2) throw DataError("heatmap expects a 2-D slice");
    if (scale < 1) throw ConfigError("heatmap scale must be >= 1");
    const size_t H = slice.shape()[0], W = slice.shape()[1];
    Image img = Image::solid(W * size_t(scale), H * size_t(scale), 0, 0, 0);
    const double span = vmax - vmin;
    for (size_t y = 0; y < H; ++y)
        for (size_t x = 0; x < W; ++x) {
            double t = span > 0.0 ? (slice[y * W + x] - vmin) / span : 0.5;
            uint8_t r, g, b;
            viridis(t, r, g, b);
            for (int dy = 0; dy < scale; ++dy)
                for (int dx = 0; dx < scale; ++dx)
                    img.set(x * size_t(scale) + size_t(dx), y * size_t(scale) + size_t(dy),
                            r, g, b);
        }
    return img;
}

Tensor<double> slice_frame(const FieldSequence& seq, size_t frame, size_t channel) {
    if (frame >= seq.frames() || channel >= seq.channels())
        throw DataError("slice_frame: frame/channel out of range");
    const auto& sz = seq.grid.sizes;
    const float* p = seq.values.data() + seq.block_offset(frame, channel);
    if (seq.grid.spatial_dims == 2) {
        Tensor<double> out({sz[0], sz[1]});
        for (size_t i = 0; i < out.numel(); ++i) out[i] = double(p[i]);
        return out;
    }
    // 3-D: middle plane of the first spatial axis.
    const size_t plane = sz[1] * sz[2];
    const float* q = p + (sz[0] / 2) * plane;
    Tensor<double> out({sz[1], sz[2]});
    for (size_t i = 0; i < plane; ++i) out[i] = double(q[i]);
    return out;
}

Image hstack(const std::vector<Image>& panels, int gap) {
    if (panels.empty()) throw DataError("hstack: no panels");
    size_t h = 0, w = 0;
    for (const Image& p : panels) {
        h = std::max(h, p.h);
        w += p.w;
    }
    w += size_t(gap) * (panels.size() - 1);
    Image out = Image::solid(w, h, 255, 255, 255);
    size_t x0 = 0;
    for (const Image& p : panels) {
        for (size_t y = 0; y < p.h; ++y)
            for (size_t x = 0; x < p.w; ++x) {
                size_t i = 3 * (y * p.w + x);
                out.set(x0 + x, y, p.rgb[i], p.rgb[i + 1], p.rgb[i + 2]);
            }
        x0 += p.w + size_t(gap);
    }
    return out;
}

Image render_curves(const std::vector<Series>& series, size_t w, size_t h) {
    Image img = Image::solid(w, h, 255, 255, 255);
    if (series.empty()) return img;
    const size_t ml = 8, mr = 8, mt = 8, mb = 8;   // margins
    double ymin = 0.0, ymax = 1.0;
    size_t n = 0;
    bool first = true;
    for (const Series& s : series) {
        n = std::max(n, s.y.size());
        for (double v : s.y) {
            if (!std::isfinite(v)) continue;
            if (first) {
                ymin = ymax = v;
                first = false;
            } else {
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
        }
    }
    if (n < 2) return img;
    if (!(ymax > ymin)) ymax = ymin + 1.0;

    // Axes box.
    for (size_t x = ml; x < w - mr; ++x) {
        img.set(x, mt, 120, 120, 120);
        img.set(x, h - mb - 1, 120, 120, 120);
    }
    for (size_t y = mt; y < h - mb; ++y) {
        img.set(ml, y, 120, 120, 120);
        img.set(w - mr - 1, y, 120, 120, 120);
    }

    auto px = [&](size_t i) {
        return ml + size_t(double(w - ml - mr - 1) * double(i) / double(n - 1));
    };
    auto py = [&](double v) {
        double t = (v - ymin) / (ymax - ymin);
        return size_t(double(h - mb - 1) - t * double(h - mt - mb - 1));
    };
    for (const Series& s : series) {
        for (size_t i = 0; i + 1 < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i]) || !std::isfinite(s.y[i + 1])) continue;
            // Bresenham-ish segment.
            long x0 = long(px(i)), y0 = long(py(s.y[i]));
            long x1 = long(px(i + 1)), y1 = long(py(s.y[i + 1]));
            long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
            long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1, err = dx + dy;
            while (true) {
                img.set(size_t(x0), size_t(y0), s.r, s.g, s.b);
                if (x0 == x1 && y0 == y1) break;
                long e2 = 2 * err;
                if (e2 >= dy) {
                    err += dy;
                    x0 += sx;
                }
                if (e2 <= dx) {
                    err += dx;
                    y0 += sy;
                }
            }
        }
    }
    return img;
}

} // namespace physr::plot
