#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hsi/denoise.hpp"
#include "hsi/rng.hpp"
#include "helpers.hpp"

using namespace hsi;
using denoise::DenoiseConfig;
using testutil::random_plane;
using testutil::smooth_plane;

static double energy(const Plane& p) {
    double e = 0.0;
    for (float v : p.data) e += double(v) * v;
    return e;
}

TEST_CASE("constant plane passes through; residual is zero") {
    Plane c(33, 47, 77.5f);
    Plane d = denoise::denoise(c);
    for (size_t i = 0; i < d.size(); ++i) CHECK(d.data[i] == doctest::Approx(77.5).epsilon(1e-9));
    Plane r = denoise::noise_residual(c);
    for (float v : r.data) CHECK(std::fabs(v) < 1e-6);
}

TEST_CASE("residual + denoised reconstructs the input exactly") {
    Plane img = random_plane(48, 40, 5, 128.0, 11.0);
    Plane d = denoise::denoise(img);
    Plane r = denoise::noise_residual(img);
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(float(r.data[i] + d.data[i]) == img.data[i]); // exact by definition
}

TEST_CASE("white noise at the assumed power: residual keeps most of the energy") {
    Rng rng(17);
    Plane img(64, 64);
    for (auto& v : img.data) v = float(128.0 + 3.0 * rng.gaussian()); // sigma^2 = 9
    DenoiseConfig cfg; // sigma0_sq = 9
    Plane res = denoise::noise_residual(img, cfg);
    Plane centered = img;
    double m = plane_mean(img);
    for (auto& v : centered.data) v = float(v - m);
    double ratio = energy(res) / energy(centered);
    CHECK(ratio > 0.8);
    // denoised plane is nearly flat
    Plane den = denoise::denoise(img, cfg);
    CHECK(plane_variance(den) < 0.3 * plane_variance(img));
}

TEST_CASE("smooth gradient: residual energy below 1% of plane energy") {
    Plane img(64, 80);
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 80; ++c) img.at(r, c) = float(40.0 + r * 1.5 + c * 0.8);
    Plane res = denoise::noise_residual(img);
    Plane centered = img;
    double m = plane_mean(img);
    for (auto& v : centered.data) v = float(v - m);
    CHECK(energy(res) < 0.01 * energy(centered));
}

TEST_CASE("injected additive pattern is recovered in the residual") {
    // img = denoise(img0) + r would be circular; instead check that a seeded
    // high-frequency pattern on a flat field shows up in the residual.
    Rng rng(23);
    Plane pattern(64, 64);
    for (auto& v : pattern.data) v = float(rng.gaussian());
    Plane img(64, 64);
    for (size_t i = 0; i < img.size(); ++i)
        img.data[i] = float(128.0 + 4.0 * pattern.data[i]);
    Plane res = denoise::noise_residual(img);
    CHECK(plane_corr(res, pattern) > 0.5);
}

TEST_CASE("shift covariance on the dyadic grid") {
    // Two windows of a master plane offset by multiples of 2^levels see the
    // same samples; away from the borders the transforms align coefficient
    // for coefficient. The symmetric extension reaches (taps-1)(2^levels - 1)
    // = 105 px inward for the 8-tap 4-level bank, so the comparable interior
    // starts past that, not at 2^levels.
    Plane master = random_plane(440, 440, 31, 128.0, 6.0);
    for (int r = 0; r < 440; ++r)
        for (int c = 0; c < 440; ++c)
            master.at(r, c) += float(30.0 * std::sin(r * 0.05) * std::cos(c * 0.04));
    const int W = 360;
    auto window = [&](int r0, int c0) {
        Plane w(W, W);
        for (int r = 0; r < W; ++r)
            for (int c = 0; c < W; ++c) w.at(r, c) = master.at(r0 + r, c0 + c);
        return w;
    };
    Plane a = denoise::denoise(window(40, 40));
    Plane b = denoise::denoise(window(56, 72)); // shifted by (16, 32)
    int margin = 128;
    double maxerr = 0.0;
    int cells = 0;
    for (int r = margin; r < W - margin - 16; ++r)
        for (int c = margin; c < W - margin - 32; ++c) {
            maxerr = std::max(maxerr, std::fabs(double(a.at(r + 16, c + 32)) - b.at(r, c)));
            ++cells;
        }
    REQUIRE(cells > 1000);
    CHECK(maxerr < 1e-3);
}

TEST_CASE("too-small image raises invalid-input") {
    Plane tiny(8, 8, 100.0f);
    CHECK_THROWS_AS(denoise::denoise(tiny), Error); // 4 levels need >= 16
    DenoiseConfig cfg;
    cfg.levels = 2;
    CHECK_NOTHROW(denoise::denoise(tiny, cfg));
}

TEST_CASE("config validation") {
    DenoiseConfig cfg;
    cfg.levels = 0;
    CHECK_THROWS_AS(denoise::denoise(Plane(32, 32, 1.0f), cfg), Error);
    cfg = DenoiseConfig{};
    cfg.sigma0_sq = 0.0;
    CHECK_THROWS_AS(denoise::denoise(Plane(32, 32, 1.0f), cfg), Error);
    cfg = DenoiseConfig{};
    cfg.window_sizes = {4};
    CHECK_THROWS_AS(denoise::denoise(Plane(32, 32, 1.0f), cfg), Error);
}

TEST_CASE("gaussian-highpass filter variant") {
    DenoiseConfig cfg;
    cfg.filter_kind = denoise::FilterKind::gaussian_highpass;
    Plane c(20, 20, 55.0f);
    Plane d = denoise::denoise(c, cfg);
    for (float v : d.data) CHECK(v == doctest::Approx(55.0).epsilon(1e-6));
    Plane img = random_plane(20, 20, 9, 128.0, 8.0);
    Plane res = denoise::noise_residual(img, cfg);
    CHECK(plane_variance(res) > 0.0);
    CHECK(plane_variance(denoise::denoise(img, cfg)) < plane_variance(img));
}

TEST_CASE("per-channel residual combination matches 601 weights") {
    Plane r = random_plane(32, 32, 41, 120.0, 5.0);
    Plane g = random_plane(32, 32, 42, 120.0, 5.0);
    Plane b = random_plane(32, 32, 43, 120.0, 5.0);
    Plane combined = denoise::noise_residual_multi({r, g, b});
    Plane rr = denoise::noise_residual(r);
    Plane rg = denoise::noise_residual(g);
    Plane rb = denoise::noise_residual(b);
    for (size_t i = 0; i < combined.size(); ++i) {
        double want = 0.299 * rr.data[i] + 0.587 * rg.data[i] + 0.114 * rb.data[i];
        CHECK(combined.data[i] == doctest::Approx(want).epsilon(1e-5));
    }
    Plane single = denoise::noise_residual_multi({r});
    for (size_t i = 0; i < single.size(); ++i) CHECK(single.data[i] == rr.data[i]);
}
