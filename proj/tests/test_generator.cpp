#include "support.hpp"

#include "logan/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace logan;

TEST_CASE("toy resolution schedule doubles every two layers") {
    const int expected[] = {4, 4, 8, 8, 16, 16, 32, 32, 64, 64, 128, 128, 256, 256, 256};
    for (int l = 1; l <= 15; ++l) CHECK(toy_resolution(l) == expected[l - 1]);
    CHECK(toy_resolution(9, 32) == 32);
}

TEST_CASE("toy model shapes and validation") {
    const GeneratorModel m = instantiate_model(ToyConfig{.seed = 3});
    CHECK(m.layer_count() == 14);
    CHECK(m.spec(1) == LayerSpec{16, 4, 4, 32});
    CHECK(m.spec(15).height == 256);
    CHECK(m.output_height() == 256);
    CHECK_THROWS_AS(m.spec(16), Error);

    ToyConfig bad;
    bad.layer_count = 1;
    try {
        instantiate_model(bad);
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
}

TEST_CASE("toy weights depend only on the seed") {
    const auto a = test::small_model(5);
    const auto b = test::small_model(5);
    const auto c = test::small_model(6);
    CHECK(a.weight_digest() == b.weight_digest());
    CHECK(a.weight_digest() != c.weight_digest());
    CHECK(synthesize(a, sample_codes(a, 1)) == synthesize(b, sample_codes(b, 1)));
}

TEST_CASE("zero features render mid grey") {
    const auto m = test::small_model(2);
    const LayerSpec& s = m.spec(m.layer_count() + 1);
    const Image im = render_rgb(m, FeatureMap(m.layer_count() + 1, s.channels, s.height, s.width));
    for (float v : im.data) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("style parameters follow the affine map") {
    const auto m = test::small_model(8);
    std::mt19937_64 rng(1);
    const LatentCode w = test::random_code(rng, 2, m.spec(2).style_dim);
    const StyleParams p = m.style_params(w);
    const auto want = test::oracle_style(m, w);
    const int c = m.spec(2).channels;
    for (int i = 0; i < c; ++i) {
        CHECK(p.scale[i] == doctest::Approx(want[i]).epsilon(1e-6));
        CHECK(p.bias[i] == doctest::Approx(want[c + i]).epsilon(1e-6));
    }
}

TEST_CASE("trace and synthesize agree") {
    const auto m = test::small_model(4);
    const auto codes = sample_codes(m, 9);
    const auto trace = trace_features(m, codes, m.layer_count() + 1);
    CHECK(trace.size() == static_cast<std::size_t>(m.layer_count() + 1));
    for (int l = 1; l <= m.layer_count() + 1; ++l) {
        CHECK(trace[l - 1].layer == l);
        CHECK(trace[l - 1].height == m.spec(l).height);
    }
    CHECK(render_rgb(m, trace.back()) == synthesize(m, codes));
}

TEST_CASE("sampled codes repeat one vector across layers") {
    const auto m = test::small_model(4);
    const auto codes = sample_codes(m, 77);
    for (const auto& c : codes) CHECK(c.values == codes.front().values);
    CHECK(sample_codes(m, 78).front().values != codes.front().values);
}

TEST_CASE("code validation") {
    const auto m = test::small_model(4);
    auto codes = sample_codes(m, 1);
    codes.pop_back();
    CHECK_THROWS_AS(validate_codes(m, codes), Error);
    codes = sample_codes(m, 1);
    codes[1].values.push_back(0.0);
    CHECK_THROWS_AS(synthesize(m, codes), Error);
    codes = sample_codes(m, 1);
    codes[0].values[0] = std::nan("");
    try {
        synthesize(m, codes);
        FAIL("expected a numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
    }
}

TEST_CASE("AdaIN of a constant channel collapses to the bias") {
    FeatureMap f(1, 1, 3, 3, 4.0f);
    const FeatureMap g = apply_style(f, StyleParams{1, {2.0f}, {0.25f}});
    for (float v : g.data) CHECK(v == doctest::Approx(0.25));
}
