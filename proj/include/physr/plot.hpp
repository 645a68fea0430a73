#pragma once

#include <string>
#include <vector>

#include "physr/grid.hpp"

namespace physr::plot {

struct Image {
    size_t w = 0, h = 0;
    std::vector<uint8_t> rgb;   // 3 bytes per pixel, row-major

    static Image solid(size_t w, size_t h, uint8_t r, uint8_t g, uint8_t b);
    void set(size_t x, size_t y, uint8_t r, uint8_t g, uint8_t b);
};

// Binary PPM (P6) writer — dependency-free raster output.
void write_ppm(const Image& img, const std::string& path);

// Perceptually uniform colormap value in [0,1] -> RGB.
void viridis(double t, uint8_t& r, uint8_t& g, uint8_t& b);

// Render a 2-D slice [H, W] as a heatmap, `scale` screen pixels per node.
// vmin == vmax degenerates to the mid color.
Image render_heatmap(const Tensor<double>& slice, double vmin, double vmax, int scale = 1);

// Extract frame/channel of a sequence as a 2-D slice; 3-D grids take the
// middle plane of the leading spatial axis.
Tensor<double> slice_frame(const FieldSequence& seq, size_t frame, size_t channel);

// Concatenate images horizontally with a light separator column.
Image hstack(const std::vector<Image>& panels, int gap = 2);

// Simple line chart of one or more named series on a white canvas.
struct Series {
    std::string name;
    std::vector<double> y;     // x is the index
    uint8_t r = 31, g = 119, b = 180;
};
Image render_curves(const std::vector<Series>& series, size_t w = 640, size_t h = 400);

} // namespace physr::plot
