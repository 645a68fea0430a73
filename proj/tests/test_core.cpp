#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <fstream>

#include "physr/field_io.hpp"
#include "physr/normalize.hpp"
#include "test_util.hpp"

using namespace physr;
using testutil::TempDir;

TEST_CASE("tensor basics") {
    Tensor<double> t({2, 3}, 1.5);
    CHECK(t.numel() == 6);
    CHECK(t[5] == 1.5);
    CHECK_THROWS_AS(Tensor<double>({2, 0}), DataError);
    t.reshape({3, 2});
    CHECK(t.shape()[0] == 3);
    CHECK_THROWS_AS(t.reshape({4, 2}), DataError);
    Tensor<float> f = cast<float>(t);
    CHECK(f.numel() == 6);
    CHECK(f[0] == 1.5f);
}

TEST_CASE("grid and sequence validation") {
    GridSpec g = testutil::grid2d(8, 8);
    CHECK_NOTHROW(g.validate());
    CHECK(g.num_nodes() == 64);

    GridSpec bad = g;
    bad.sizes[0] = 4;   // below the widest-stencil minimum
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = g;
    bad.spacing[1] = 0.0;
    CHECK_THROWS_AS(bad.validate(), DataError);
    bad = g;
    bad.spatial_dims = 4;
    CHECK_THROWS_AS(bad.validate(), DataError);

    FieldSequence s = FieldSequence::make(3, {"u", "v"}, g, 0.5);
    CHECK(s.frames() == 3);
    CHECK(s.channels() == 2);
    CHECK_NOTHROW(s.validate());

    s.values[7] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(s.validate(), DataError);
    s.values[7] = 0.0f;
    s.dt = 0.0;
    CHECK_THROWS_AS(s.validate(), DataError);
    s.dt = 0.5;
    s.channel_names = {"u"};
    CHECK_THROWS_AS(s.validate(), DataError);
}

TEST_CASE("container round trip is bit-exact over random shapes") {
    TempDir dir("roundtrip");
    Rng rng(1234);
    for (int it = 0; it < 20; ++it) {
        int m = (it % 2) ? 3 : 2;
        GridSpec g;
        g.spatial_dims = m;
        for (int a = 0; a < m; ++a) {
            g.sizes.push_back(5 + rng.below(m == 3 ? 8 : 28));   // 5..32 (small in 3D)
            g.spacing.push_back(rng.uniform(0.1, 3.0));
            g.origin.push_back(rng.uniform(-5.0, 5.0));
        }
        size_t frames = 1 + rng.below(4);
        size_t channels = 1 + rng.below(3);
        std::vector<std::string> names;
        for (size_t c = 0; c < channels; ++c) names.push_back("ch" + std::to_string(c));
        FieldSequence s = FieldSequence::make(frames, names, g, rng.uniform(0.01, 2.0));
        for (size_t i = 0; i < s.values.numel(); ++i)
            s.values[i] = float(rng.uniform(-1e3, 1e3));

        std::string path = dir.file("f" + std::to_string(it) + ".field");
        save_field(s, path);
        FieldSequence r = load_field(path);

        REQUIRE(r.values.numel() == s.values.numel());
        CHECK(std::memcmp(r.values.data(), s.values.data(),
                          s.values.numel() * sizeof(float)) == 0);
        CHECK(r.grid == s.grid);
        CHECK(r.dt == s.dt);
        CHECK(r.channel_names == s.channel_names);
    }
}

TEST_CASE("container rejects malformed files") {
    TempDir dir("malformed");
    FieldSequence s = testutil::random_sequence(2, 1, testutil::grid2d(6, 5), 7);
    std::string path = dir.file("ok.field");
    save_field(s, path);

    SUBCASE("bad magic") {
        std::string p2 = dir.file("magic.field");
        std::ifstream in(path, std::ios::binary);
        std::string buf((std::istreambuf_iterator<char>(in)), {});
        buf[0] = 'X';
        std::ofstream(p2, std::ios::binary) << buf;
        CHECK_THROWS_WITH_AS(load_field(p2), doctest::Contains("magic"), DataError);
    }
    SUBCASE("truncated payload") {
        std::string p2 = dir.file("trunc.field");
        std::ifstream in(path, std::ios::binary);
        std::string buf((std::istreambuf_iterator<char>(in)), {});
        buf.resize(buf.size() - 7);
        std::ofstream(p2, std::ios::binary) << buf;
        CHECK_THROWS_WITH_AS(load_field(p2), doctest::Contains("truncated"), DataError);
    }
    SUBCASE("trailing bytes") {
        std::string p2 = dir.file("trail.field");
        std::ifstream in(path, std::ios::binary);
        std::string buf((std::istreambuf_iterator<char>(in)), {});
        buf += "junk";
        std::ofstream(p2, std::ios::binary) << buf;
        CHECK_THROWS_WITH_AS(load_field(p2), doctest::Contains("trailing"), DataError);
    }
    SUBCASE("non-finite payload rejected on save") {
        FieldSequence bad = s;
        bad.values[3] = std::numeric_limits<float>::infinity();
        CHECK_THROWS_AS(save_field(bad, dir.file("inf.field")), DataError);
    }
    SUBCASE("non-finite payload rejected on load") {
        // Patch a payload float to NaN directly in the file bytes.
        std::ifstream in(path, std::ios::binary);
        std::string buf((std::istreambuf_iterator<char>(in)), {});
        uint32_t nan_bits = 0x7fc00000u;
        std::memcpy(buf.data() + buf.size() - 4, &nan_bits, 4);
        std::string p2 = dir.file("nan.field");
        std::ofstream(p2, std::ios::binary) << buf;
        CHECK_THROWS_WITH_AS(load_field(p2), doctest::Contains("non-finite"), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_field(dir.file("nope.field")), DataError);
    }
}

TEST_CASE("norm stats match a long-double two-pass oracle") {
    GridSpec g = testutil::grid2d(9, 7);
    FieldSequence a = testutil::random_sequence(3, 2, g, 11, -2.0, 5.0);
    FieldSequence b = testutil::random_sequence(2, 2, g, 12, -2.0, 5.0);

    NormStats st = compute_norm_stats({&a, &b});
    REQUIRE(st.channels() == 2);

    for (size_t c = 0; c < 2; ++c) {
        long double sum = 0.0L;
        long double n = 0.0L;
        for (const FieldSequence* s : {&a, &b})
            for (size_t t = 0; t < s->frames(); ++t) {
                const float* p = s->values.data() + s->block_offset(t, c);
                for (size_t i = 0; i < s->grid.num_nodes(); ++i) {
                    sum += (long double)p[i];
                    n += 1.0L;
                }
            }
        long double mean = sum / n;
        long double var = 0.0L;
        for (const FieldSequence* s : {&a, &b})
            for (size_t t = 0; t < s->frames(); ++t) {
                const float* p = s->values.data() + s->block_offset(t, c);
                for (size_t i = 0; i < s->grid.num_nodes(); ++i) {
                    long double d = (long double)p[i] - mean;
                    var += d * d;
                }
            }
        long double sd = sqrtl(var / n);
        CHECK(st.mean[c] == doctest::Approx(double(mean)).epsilon(1e-12));
        CHECK(st.stddev[c] == doctest::Approx(double(sd)).epsilon(1e-12));
    }
}

TEST_CASE("norm stats reject degenerate inputs") {
    GridSpec g = testutil::grid2d(6, 6);
    FieldSequence flat = FieldSequence::make(2, {"u", "v"}, g, 1.0);
    flat.values.fill(3.0f);
    CHECK_THROWS_WITH_AS(compute_norm_stats({&flat}),
                         doctest::Contains("zero variance"), DataError);
    CHECK_THROWS_AS(compute_norm_stats({}), DataError);

    FieldSequence other = testutil::random_sequence(2, 1, g, 3);
    FieldSequence ok = testutil::random_sequence(2, 2, g, 4);
    // Rename so channel lists are legitimately different.
    CHECK_THROWS_AS(compute_norm_stats({&ok, &other}), DataError);
}

TEST_CASE("normalize/denormalize compose to identity within f32 rounding") {
    GridSpec g = testutil::grid2d(12, 10);
    FieldSequence s = testutil::random_sequence(4, 2, g, 99, -3.0, 9.0);
    NormStats st = compute_norm_stats({&s});

    FieldSequence n = normalize(s, st);
    // Normalized corpus has mean ~0 and std ~1 per channel.
    NormStats check = compute_norm_stats({&n});
    for (size_t c = 0; c < 2; ++c) {
        CHECK(std::abs(check.mean[c]) < 1e-6);
        CHECK(check.stddev[c] == doctest::Approx(1.0).epsilon(1e-5));
    }

    FieldSequence back = denormalize(n, st);
    const size_t nodes = s.grid.num_nodes();
    for (size_t i = 0; i < s.values.numel(); ++i) {
        size_t channel = (i / nodes) % 2;
        CHECK(std::abs(double(back.values[i]) - double(s.values[i])) <=
              1e-6 * st.stddev[channel]);
    }

    NormStats wrong = st;
    wrong.mean.push_back(0.0);
    wrong.stddev.push_back(1.0);
    CHECK_THROWS_AS(normalize(s, wrong), DataError);
}
