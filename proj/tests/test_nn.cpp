#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "physr/model.hpp"
#include "physr/nn.hpp"
#include "physr/rng.hpp"

using namespace physr;
using namespace physr::nn;

namespace {

// Reference convolution written as plain nested loops, independent of the
// gather-table/GEMM machinery under test.
template <typename T>
std::vector<T> naive_conv2d(const std::vector<T>& x, size_t in_ch, size_t out_ch,
                            size_t H, size_t W, int k, Padding pad,
                            const std::vector<T>& kernel, const std::vector<T>& bias) {
    const int h = k / 2;
    const size_t S = H * W;
    std::vector<T> y(out_ch * S);
    for (size_t o = 0; o < out_ch; ++o)
        for (size_t i = 0; i < H; ++i)
            for (size_t j = 0; j < W; ++j) {
                double acc = double(bias[o]);
                for (size_t c = 0; c < in_ch; ++c)
                    for (int di = -h; di <= h; ++di)
                        for (int dj = -h; dj <= h; ++dj) {
                            long pi = long(i) + di, pj = long(j) + dj;
                            if (pad == Padding::Periodic) {
                                pi = (pi % long(H) + long(H)) % long(H);
                                pj = (pj % long(W) + long(W)) % long(W);
                            } else if (pi < 0 || pi >= long(H) || pj < 0 ||
                                       pj >= long(W)) {
                                continue;
                            }
                            size_t tap = size_t(di + h) * size_t(k) + size_t(dj + h);
                            acc += double(kernel[(o * in_ch + c) * size_t(k * k) + tap]) *
                                   double(x[c * S + size_t(pi) * W + size_t(pj)]);
                        }
                y[o * S + i * W + j] = T(acc);
            }
    return y;
}

std::vector<double> randv(size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

} // namespace

TEST_CASE("conv index table maps center tap to the site itself") {
    for (Padding pad : {Padding::Periodic, Padding::Zero}) {
        auto tab = ConvIndexTable::make({4, 5}, 3, pad);
        CHECK(tab.n_sites == 20);
        CHECK(tab.n_taps == 9);
        const int32_t* center = tab.src.data() + 4 * tab.n_sites;
        for (size_t s = 0; s < tab.n_sites; ++s) CHECK(center[s] == int32_t(s));
    }

    auto per = ConvIndexTable::make({4, 4}, 3, Padding::Periodic);
    CHECK(std::count(per.src.begin(), per.src.end(), -1) == 0);

    // Zero padding: the (0,0) corner keeps only the 4 taps pointing inward.
    auto zp = ConvIndexTable::make({4, 4}, 3, Padding::Zero);
    int outside = 0;
    for (size_t tap = 0; tap < 9; ++tap)
        if (zp.src[tap * zp.n_sites + 0] < 0) ++outside;
    CHECK(outside == 5);

    CHECK_THROWS_AS(ConvIndexTable::make({4, 4}, 4, Padding::Zero), ConfigError);
    CHECK_THROWS_AS(ConvIndexTable::make({4}, 3, Padding::Zero), ConfigError);
}

TEST_CASE("convolution matches a scalar-loop reference") {
    Rng rng(11);
    const size_t H = 5, W = 6, in_ch = 2, out_ch = 3;
    auto x = randv(in_ch * H * W, rng);

    for (Padding pad : {Padding::Periodic, Padding::Zero}) {
        auto tab = ConvIndexTable::make({H, W}, 3, pad);
        ConvLayer<double> conv;
        conv.configure(in_ch, out_ch, tab.n_taps, false);
        conv.V = randv(conv.V.size(), rng);
        conv.b = randv(conv.b.size(), rng);

        std::vector<double> y(out_ch * H * W);
        Workspace<double> ws;
        conv.forward(tab, x.data(), y.data(), ws);

        auto ref = naive_conv2d(x, in_ch, out_ch, H, W, 3, pad, conv.V, conv.b);
        for (size_t i = 0; i < y.size(); ++i)
            CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("3-D convolution matches the reference on a constant field") {
    // Constant input ⊙ periodic wrap: every output equals bias + sum of taps.
    auto tab = ConvIndexTable::make({5, 5, 5}, 3, Padding::Periodic);
    ConvLayer<double> conv;
    conv.configure(1, 1, tab.n_taps, false);
    Rng rng(4);
    conv.V = randv(conv.V.size(), rng);
    conv.b[0] = 0.25;
    double tap_sum = 0.0;
    for (double v : conv.V) tap_sum += v;

    std::vector<double> x(125, 2.0), y(125);
    Workspace<double> ws;
    conv.forward(tab, x.data(), y.data(), ws);
    for (double v : y) CHECK(v == doctest::Approx(0.25 + 2.0 * tap_sum).epsilon(1e-12));
}

TEST_CASE("weight normalization leaves the effective kernel scale-invariant") {
    Rng rng(7);
    const size_t H = 5, W = 5;
    auto tab = ConvIndexTable::make({H, W}, 3, Padding::Periodic);
    auto x = randv(2 * H * W, rng);

    ConvLayer<double> a;
    a.configure(2, 2, tab.n_taps, true);
    a.V = randv(a.V.size(), rng);
    a.g = randv(a.g.size(), rng, 0.5, 2.0);
    a.b = randv(a.b.size(), rng);

    ConvLayer<double> b = a;
    for (auto& v : b.V) v *= 7.5; // same direction, different magnitude

    std::vector<double> ya(2 * H * W), yb(2 * H * W);
    Workspace<double> ws;
    a.forward(tab, x.data(), ya.data(), ws);
    b.forward(tab, x.data(), yb.data(), ws);
    for (size_t i = 0; i < ya.size(); ++i)
        CHECK(ya[i] == doctest::Approx(yb[i]).epsilon(1e-12));
}

TEST_CASE("convolution gradients match central finite differences") {
    Rng rng(23);
    const size_t H = 4, W = 5, in_ch = 2, out_ch = 3;
    auto tab = ConvIndexTable::make({H, W}, 3, Padding::Zero);
    const size_t S = H * W;

    for (bool wn : {false, true}) {
        ConvLayer<double> conv;
        conv.configure(in_ch, out_ch, tab.n_taps, wn);
        conv.V = randv(conv.V.size(), rng);
        conv.b = randv(conv.b.size(), rng);
        if (wn) conv.g = randv(conv.g.size(), rng, 0.5, 2.0);

        auto x = randv(in_ch * S, rng);
        auto r = randv(out_ch * S, rng); // L = Σ y ⊙ r

        Workspace<double> ws;
        std::vector<double> dx(in_ch * S, 0.0);
        conv.zero_grad();
        conv.backward(tab, x.data(), r.data(), dx.data(), ws);

        auto loss = [&](const std::vector<double>& xin) {
            std::vector<double> y(out_ch * S);
            conv.forward(tab, xin.data(), y.data(), ws);
            double L = 0.0;
            for (size_t i = 0; i < y.size(); ++i) L += y[i] * r[i];
            return L;
        };

        const double eps = 1e-6;
        auto fd_param = [&](std::vector<double>& p, size_t i) {
            double keep = p[i];
            p[i] = keep + eps;
            double lp = loss(x);
            p[i] = keep - eps;
            double lm = loss(x);
            p[i] = keep;
            return (lp - lm) / (2 * eps);
        };

        for (size_t i = 0; i < conv.V.size(); i += 7)
            CHECK(conv.dV[i] == doctest::Approx(fd_param(conv.V, i)).epsilon(1e-6));
        for (size_t i = 0; i < conv.b.size(); ++i)
            CHECK(conv.db[i] == doctest::Approx(fd_param(conv.b, i)).epsilon(1e-6));
        if (wn)
            for (size_t i = 0; i < conv.g.size(); ++i)
                CHECK(conv.dg[i] == doctest::Approx(fd_param(conv.g, i)).epsilon(1e-6));

        for (size_t i = 0; i < dx.size(); i += 5) {
            auto xp = x;
            xp[i] += eps;
            double lp = loss(xp);
            xp[i] = x[i] - eps;
            double lm = loss(xp);
            CHECK(dx[i] == doctest::Approx((lp - lm) / (2 * eps)).epsilon(1e-6));
        }
    }
}

TEST_CASE("gradients accumulate across repeated backward calls") {
    Rng rng(5);
    auto tab = ConvIndexTable::make({5, 5}, 3, Padding::Periodic);
    ConvLayer<double> conv;
    conv.configure(1, 1, tab.n_taps, true);
    conv.V = randv(conv.V.size(), rng);
    conv.g = {1.5};
    auto x = randv(25, rng);
    auto r = randv(25, rng);

    Workspace<double> ws;
    conv.zero_grad();
    conv.backward(tab, x.data(), r.data(), nullptr, ws);
    auto once = conv.dV;
    conv.backward(tab, x.data(), r.data(), nullptr, ws);
    for (size_t i = 0; i < once.size(); ++i)
        CHECK(conv.dV[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}

TEST_CASE("lstm cell with zero parameters and zero state") {
    Rng rng(9);
    auto tab = ConvIndexTable::make({4, 4}, 3, Padding::Periodic);
    ConvLSTM<double> cell;
    cell.configure(2, 3, tab.n_taps); // parameters stay zero
    const size_t S = 16;

    auto x = randv(2 * S, rng);
    auto h0 = randv(3 * S, rng);
    std::vector<double> c0(3 * S, 0.0), h(3 * S), c(3 * S);
    ConvLSTM<double>::StepCache cc;
    Workspace<double> ws;
    cell.step(tab, x.data(), h0.data(), c0.data(), h.data(), c.data(), cc, ws);

    for (size_t n = 0; n < 3 * S; ++n) {
        CHECK(cc.i[n] == 0.5);
        CHECK(cc.f[n] == 0.5);
        CHECK(cc.o[n] == 0.5);
        CHECK(cc.ctil[n] == 0.0);
        CHECK(c[n] == 0.0);
        CHECK(h[n] == 0.0);
    }
}

TEST_CASE("saturated forget gate preserves the cell state") {
    Rng rng(13);
    auto tab = ConvIndexTable::make({4, 4}, 3, Padding::Periodic);
    ConvLSTM<double> cell;
    cell.configure(1, 1, tab.n_taps);
    cell.gates.b[1] = 20.0; // forget-gate bias; all weights stay zero
    const size_t S = 16;

    auto x = randv(S, rng);
    auto h0 = randv(S, rng);
    auto c0 = randv(S, rng);
    std::vector<double> h(S), c(S);
    ConvLSTM<double>::StepCache cc;
    Workspace<double> ws;
    cell.step(tab, x.data(), h0.data(), c0.data(), h.data(), c.data(), cc, ws);
    for (size_t n = 0; n < S; ++n) CHECK(std::abs(c[n] - c0[n]) <= 1e-8);
}

TEST_CASE("lstm step matches a scalar recurrence oracle") {
    // Single channel on a 4×4 periodic grid, float production arithmetic vs a
    // double scalar-loop oracle of the same equations.
    Rng rng(31);
    const size_t H = 4, W = 4, S = 16;
    auto tab = ConvIndexTable::make({H, W}, 3, Padding::Periodic);

    for (int inst = 0; inst < 5; ++inst) {
        ConvLSTM<float> cell;
        cell.configure(1, 1, tab.n_taps);
        auto wdraw = randv(cell.gates.V.size(), rng);
        for (size_t i = 0; i < cell.gates.V.size(); ++i)
            cell.gates.V[i] = float(wdraw[i]);
        auto bb = randv(4, rng);
        for (size_t i = 0; i < 4; ++i) cell.gates.b[i] = float(bb[i]);

        auto xv = randv(S, rng);
        auto hv = randv(S, rng);
        auto cv = randv(S, rng);
        std::vector<float> x(S), h0(S), c0(S), h(S), c(S);
        for (size_t n = 0; n < S; ++n) {
            x[n] = float(xv[n]);
            h0[n] = float(hv[n]);
            c0[n] = float(cv[n]);
        }
        ConvLSTM<float>::StepCache cc;
        Workspace<float> ws;
        cell.step(tab, x.data(), h0.data(), c0.data(), h.data(), c.data(), cc, ws);

        // Oracle: z_g(i,j) = b_g + Σ_tap W[g, xh, tap]·[x,h](wrapped), then the
        // gate recurrences, all in double from the float inputs.
        auto wrap = [&](long a, long n) { return size_t(((a % n) + n) % n); };
        for (size_t i = 0; i < H; ++i)
            for (size_t j = 0; j < W; ++j) {
                double z[4];
                for (int gidx = 0; gidx < 4; ++gidx) {
                    double acc = double(cell.gates.b[size_t(gidx)]);
                    for (int cin = 0; cin < 2; ++cin)
                        for (int di = -1; di <= 1; ++di)
                            for (int dj = -1; dj <= 1; ++dj) {
                                size_t tap = size_t(di + 1) * 3 + size_t(dj + 1);
                                size_t src = wrap(long(i) + di, 4) * W +
                                             wrap(long(j) + dj, 4);
                                double val = cin == 0 ? double(x[src]) : double(h0[src]);
                                acc += double(cell.gates.V[(size_t(gidx) * 2 +
                                                            size_t(cin)) *
                                                               9 +
                                                           tap]) *
                                       val;
                            }
                    z[gidx] = acc;
                }
                double ig = 1.0 / (1.0 + std::exp(-z[0]));
                double fg = 1.0 / (1.0 + std::exp(-z[1]));
                double ct = std::tanh(z[2]);
                double og = 1.0 / (1.0 + std::exp(-z[3]));
                double cn = fg * double(c0[i * W + j]) + ig * ct;
                double hn = og * std::tanh(cn);
                CHECK(std::abs(double(c[i * W + j]) - cn) <= 1e-6);
                CHECK(std::abs(double(h[i * W + j]) - hn) <= 1e-6);
            }

        // Range properties: gates strictly inside (0,1), h inside (−1,1).
        for (size_t n = 0; n < S; ++n) {
            CHECK(cc.i[n] > 0.0f);
            CHECK(cc.i[n] < 1.0f);
            CHECK(cc.f[n] > 0.0f);
            CHECK(cc.f[n] < 1.0f);
            CHECK(cc.o[n] > 0.0f);
            CHECK(cc.o[n] < 1.0f);
            CHECK(h[n] > -1.0f);
            CHECK(h[n] < 1.0f);
        }
    }
}

TEST_CASE("lstm step backward matches finite differences") {
    Rng rng(41);
    const size_t S = 16;
    auto tab = ConvIndexTable::make({4, 4}, 3, Padding::Periodic);
    ConvLSTM<double> cell;
    cell.configure(1, 2, tab.n_taps);
    auto vv = randv(cell.gates.V.size(), rng, -0.3, 0.3);
    cell.gates.V = vv;
    cell.gates.b = randv(cell.gates.b.size(), rng, -0.1, 0.1);

    auto x = randv(S, rng);
    auto h0 = randv(2 * S, rng);
    auto c0 = randv(2 * S, rng);
    auto rh = randv(2 * S, rng);
    auto rc = randv(2 * S, rng); // L = Σ h⊙rh + Σ c⊙rc

    auto loss = [&]() {
        std::vector<double> h(2 * S), c(2 * S);
        ConvLSTM<double>::StepCache cc;
        Workspace<double> ws;
        cell.step(tab, x.data(), h0.data(), c0.data(), h.data(), c.data(), cc, ws);
        double L = 0.0;
        for (size_t n = 0; n < 2 * S; ++n) L += h[n] * rh[n] + c[n] * rc[n];
        return L;
    };

    std::vector<double> h(2 * S), c(2 * S);
    ConvLSTM<double>::StepCache cc;
    Workspace<double> ws;
    cell.step(tab, x.data(), h0.data(), c0.data(), h.data(), c.data(), cc, ws);
    std::vector<double> dx(S, 0.0), dh0(2 * S, 0.0), dc0(2 * S, 0.0);
    cell.gates.zero_grad();
    cell.step_backward(tab, cc, rh.data(), rc.data(), dx.data(), dh0.data(),
                       dc0.data(), ws);

    const double eps = 1e-6;
    auto fd = [&](double& slot) {
        double keep = slot;
        slot = keep + eps;
        double lp = loss();
        slot = keep - eps;
        double lm = loss();
        slot = keep;
        return (lp - lm) / (2 * eps);
    };

    for (size_t i = 0; i < cell.gates.V.size(); i += 11)
        CHECK(cell.gates.dV[i] == doctest::Approx(fd(cell.gates.V[i])).epsilon(1e-6));
    for (size_t i = 0; i < cell.gates.b.size(); ++i)
        CHECK(cell.gates.db[i] == doctest::Approx(fd(cell.gates.b[i])).epsilon(1e-6));
    for (size_t i = 0; i < S; i += 3)
        CHECK(dx[i] == doctest::Approx(fd(x[i])).epsilon(1e-6));
    for (size_t i = 0; i < 2 * S; i += 5)
        CHECK(dh0[i] == doctest::Approx(fd(h0[i])).epsilon(1e-6));
    for (size_t i = 0; i < 2 * S; i += 7)
        CHECK(dc0[i] == doctest::Approx(fd(c0[i])).epsilon(1e-6));
}

TEST_CASE("pixel shuffle on the (4,2,2) example") {
    // Channel value = channel index; the offset within each 2×2 output block
    // selects the channel in row-major order.
    std::vector<float> in(4 * 4);
    for (size_t c = 0; c < 4; ++c)
        for (size_t s = 0; s < 4; ++s) in[c * 4 + s] = float(c);
    std::vector<float> out(16);
    pixel_shuffle(in.data(), out.data(), 1, 2, {2, 2});

    const float expect[16] = {0, 1, 0, 1, 2, 3, 2, 3, 0, 1, 0, 1, 2, 3, 2, 3};
    for (size_t i = 0; i < 16; ++i) CHECK(out[i] == expect[i]);

    // Multiset of values preserved under the permutation.
    auto a = in, b = out;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

TEST_CASE("pixel shuffle with factor 1 is the identity") {
    Rng rng(3);
    auto x = randv(3 * 5 * 6, rng);
    std::vector<double> y(x.size());
    pixel_shuffle(x.data(), y.data(), 3, 1, {5, 6});
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
}

TEST_CASE("pixel unshuffle inverts pixel shuffle bitwise") {
    Rng rng(17);
    struct Case {
        size_t c;
        int r;
        std::vector<size_t> lr;
    };
    for (const Case& cs : {Case{3, 2, {4, 5}}, Case{1, 4, {3, 3}}, Case{2, 2, {2, 3, 4}},
                           Case{1, 3, {2, 2, 2}}}) {
        size_t taps = 1;
        for (size_t a = 0; a < cs.lr.size(); ++a) taps *= size_t(cs.r);
        size_t S = 1;
        for (size_t s : cs.lr) S *= s;
        auto x = randv(cs.c * taps * S, rng);
        std::vector<double> hr(x.size()), back(x.size());
        pixel_shuffle(x.data(), hr.data(), cs.c, cs.r, cs.lr);
        pixel_unshuffle(hr.data(), back.data(), cs.c, cs.r, cs.lr);
        CHECK(std::memcmp(x.data(), back.data(), x.size() * sizeof(double)) == 0);

        auto a = x, b = hr;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("3-D pixel shuffle places the first offset channel at block corners") {
    // (8,2,2,2) → (1,4,4,4): channel δ lands at output offset (δa, δb, δc).
    std::vector<float> in(8 * 8);
    for (size_t c = 0; c < 8; ++c)
        for (size_t s = 0; s < 8; ++s) in[c * 8 + s] = float(10 * c + s);
    std::vector<float> out(64);
    pixel_shuffle(in.data(), out.data(), 1, 2, {2, 2, 2});
    // LR site (a,b,c) = flat a·4+b·2+c; output (2a+da, 2b+db, 2c+dc).
    for (size_t da = 0; da < 2; ++da)
        for (size_t db = 0; db < 2; ++db)
            for (size_t dc = 0; dc < 2; ++dc)
                for (size_t a = 0; a < 2; ++a)
                    for (size_t b = 0; b < 2; ++b)
                        for (size_t c = 0; c < 2; ++c) {
                            size_t ch = da * 4 + db * 2 + dc;
                            size_t site = a * 4 + b * 2 + c;
                            size_t o = (2 * a + da) * 16 + (2 * b + db) * 4 +
                                       (2 * c + dc);
                            CHECK(out[o] == float(10 * ch + site));
                        }
}

TEST_CASE("temporal interpolation hits inputs exactly and averages between") {
    // Three scalar frames, r_t = 4.
    std::vector<double> lr = {1.0, 3.0, -2.0};
    auto out = temporal_interpolate(lr.data(), 3, 1, 4);
    REQUIRE(out.size() == 9);
    CHECK(out[0] == 1.0);
    CHECK(out[4] == 3.0);
    CHECK(out[8] == -2.0);
    CHECK(out[1] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(out[2] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out[3] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(out[6] == doctest::Approx(0.5).epsilon(1e-12)); // midpoint of 3, −2

    // Frames at multiples of r_t are byte-for-byte copies.
    Rng rng(2);
    auto seq = randv(4 * 10, rng);
    auto up = temporal_interpolate(seq.data(), 4, 10, 3);
    REQUIRE(up.size() == 10 * 10);
    for (size_t a = 0; a < 4; ++a)
        CHECK(std::memcmp(up.data() + a * 3 * 10, seq.data() + a * 10,
                          10 * sizeof(double)) == 0);
}

TEST_CASE("temporal interpolation commutes with affine maps") {
    Rng rng(6);
    auto seq = randv(3 * 8, rng);
    auto mapped = seq;
    for (auto& v : mapped) v = 2.5 * v - 0.75;

    auto a = temporal_interpolate(seq.data(), 3, 8, 2);
    auto b = temporal_interpolate(mapped.data(), 3, 8, 2);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(b[i] == doctest::Approx(2.5 * a[i] - 0.75).epsilon(1e-12));

    CHECK_THROWS_AS(temporal_interpolate(seq.data(), 0, 8, 2), DataError);
    CHECK_THROWS_AS(temporal_interpolate(seq.data(), 3, 8, 0), ConfigError);
}

TEST_CASE("xavier initialization is bounded and weight-norm scales match") {
    auto tab = ConvIndexTable::make({5, 5}, 3, Padding::Periodic);
    ConvLayer<double> conv;
    conv.configure(4, 6, tab.n_taps, true);
    Rng rng(99);
    conv.init_xavier(rng);

    const double limit = std::sqrt(6.0 / (4.0 * 9 + 6.0 * 9));
    for (double v : conv.V) {
        CHECK(v <= limit);
        CHECK(v >= -limit);
    }
    for (double v : conv.b) CHECK(v == 0.0);
    const size_t row = 4 * 9;
    for (size_t o = 0; o < 6; ++o) {
        double n2 = 0.0;
        for (size_t i = 0; i < row; ++i) n2 += conv.V[o * row + i] * conv.V[o * row + i];
        CHECK(conv.g[o] == doctest::Approx(std::sqrt(n2)).epsilon(1e-12));
    }
}
