#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "hsi/geometry.hpp"
#include "helpers.hpp"

using namespace hsi;
using namespace hsi::geometry;
using testutil::smooth_plane;
using testutil::TempDir;

TEST_CASE("resample at scale 1 is the identity") {
    Plane p = testutil::random_plane(20, 30, 2, 100.0, 20.0);
    Plane q = resample(p, 1.0);
    for (size_t i = 0; i < p.size(); ++i) CHECK(q.data[i] == doctest::Approx(p.data[i]).epsilon(1e-6));
}

TEST_CASE("half-scale of a constant plane stays constant at half dims") {
    Plane p(40, 60, 33.0f);
    Plane q = resample(p, 0.5);
    CHECK(q.rows == 20);
    CHECK(q.cols == 30);
    for (float v : q.data) CHECK(v == doctest::Approx(33.0).epsilon(1e-6));
}

TEST_CASE("output dims are round(dims * scale)") {
    Plane p(100, 151, 1.0f);
    Plane q = resample(p, 0.59);
    CHECK(q.rows == 59);
    CHECK(q.cols == 89); // round(151*0.59) = round(89.09)
}

TEST_CASE("scale round trip on a smooth plane: interior error < 2% RMS") {
    Plane p = smooth_plane(80, 96);
    Plane down = resample(p, 0.59);
    Plane up = resample_to(down, 80, 96);
    double rms = 0.0;
    int cnt = 0;
    for (int r = 8; r < 72; ++r)
        for (int c = 8; c < 88; ++c) {
            double d = double(up.at(r, c)) - p.at(r, c);
            rms += d * d;
            ++cnt;
        }
    rms = std::sqrt(rms / cnt);
    CHECK(rms < 0.02 * 100.0); // dynamic range of smooth_plane is ~100
}

TEST_CASE("resample rejects out-of-range scales and tiny outputs") {
    Plane p(10, 10, 1.0f);
    CHECK_THROWS_AS(resample(p, 0.0), Error);
    CHECK_THROWS_AS(resample(p, 4.5), Error);
    CHECK_THROWS_AS(resample(p, 0.05), Error); // 0.5 px output
}

TEST_CASE("rotate 0 degrees is the identity with full mask") {
    Plane p = testutil::random_plane(15, 17, 3);
    Plane mask;
    Plane q = rotate(p, 0.0, &mask);
    CHECK(q.data == p.data);
    for (float v : mask.data) CHECK(v == 1.0f);
}

TEST_CASE("rotation is CCW on screen and bounded at 45 degrees") {
    Plane p(41, 41, 0.0f);
    p.at(20, 30) = 100.0f; // right of center
    Plane r = rotate(p, 10.0);
    int br = 0, bc = 0;
    float bv = -1.0f;
    for (int rr = 0; rr < 41; ++rr)
        for (int cc = 0; cc < 41; ++cc)
            if (r.at(rr, cc) > bv) {
                bv = r.at(rr, cc);
                br = rr;
                bc = cc;
            }
    CHECK(br < 20); // marker moved up
    CHECK(bc <= 30);
    CHECK_THROWS_AS(rotate(p, 90.0), Error);
    CHECK_THROWS_AS(rotate(p, -46.0), Error);
}

TEST_CASE("small rotation round trip: interior RMS < 1% of range") {
    Plane p = smooth_plane(64, 64);
    Plane a = rotate(p, 0.2);
    Plane b = rotate(a, -0.2);
    double rms = 0.0;
    int cnt = 0;
    for (int r = 6; r < 58; ++r)
        for (int c = 6; c < 58; ++c) {
            double d = double(b.at(r, c)) - p.at(r, c);
            rms += d * d;
            ++cnt;
        }
    CHECK(std::sqrt(rms / cnt) < 1.0);
}

TEST_CASE("rotation validity mask covers most of the plane for small angles") {
    Plane p(100, 100, 1.0f);
    Plane mask;
    rotate(p, 1.0, &mask);
    double frac = plane_mean(mask);
    double theta = 1.0 * 3.14159265358979 / 180.0;
    CHECK(frac >= 1.0 - 4.0 * std::tan(theta));
}

TEST_CASE("apply_crop identity and zero-filled overhang") {
    Plane p = testutil::random_plane(12, 16, 8);
    Plane q = apply_crop(p, 0, 0, 12, 16);
    CHECK(q.data == p.data);

    // C9-style: negative x offset pads left and right
    Plane src(720 / 4, 960 / 4, 5.0f); // quarter-size stand-in
    Plane mask;
    Plane out = apply_crop(src, -40, 0, 180, 320, &mask);
    CHECK(out.rows == 180);
    CHECK(out.cols == 320);
    for (int r = 0; r < 180; ++r) {
        for (int c = 0; c < 40; ++c) {
            CHECK(out.at(r, c) == 0.0f);
            CHECK(mask.at(r, c) == 0.0f);
        }
        for (int c = 40; c < 280; ++c) CHECK(out.at(r, c) == 5.0f);
        for (int c = 280; c < 320; ++c) CHECK(out.at(r, c) == 0.0f);
    }
    CHECK_THROWS_AS(apply_crop(p, 100, 0, 4, 4), Error); // empty intersection
}

TEST_CASE("C1 preset transform yields exactly the video dims") {
    const DeviceProfile* c1 = find_profile("C1");
    REQUIRE(c1 != nullptr);
    Plane img(c1->image_h / 4, c1->image_w / 4, 7.0f); // quarter size keeps it fast
    SimilarityTransform t = c1->nominal;
    t.crop_y = c1->nominal.crop_y / 4;
    Plane out = apply_transform(img, t, c1->video_h / 4, c1->video_w / 4);
    CHECK(out.rows == 270);
    CHECK(out.cols == 480);
}

TEST_CASE("built-in profiles carry the published values") {
    const auto& all = builtin_profiles();
    CHECK(all.size() == 18);

    const DeviceProfile* c5 = find_profile("C5");
    REQUIRE(c5 != nullptr);
    CHECK(c5->nominal.scale == 1.0);
    CHECK(c5->nominal.crop_x == 408);
    CHECK(c5->nominal.crop_y == 354);
    CHECK_FALSE(c5->stabilized);

    const DeviceProfile* c11 = find_profile("C11");
    REQUIRE(c11 != nullptr);
    CHECK(c11->stabilized);
    CHECK(c11->scale_range.lo == doctest::Approx(0.748));
    CHECK(c11->scale_range.hi == doctest::Approx(0.753));
    CHECK(c11->rotation_range.lo == doctest::Approx(-0.2));
    CHECK(c11->rotation_range.hi == doctest::Approx(0.2));
    CHECK(c11->nominal.scale == doctest::Approx(0.750));

    const DeviceProfile* c2 = find_profile("C2");
    const DeviceProfile* c3 = find_profile("C3");
    REQUIRE(c2 != nullptr);
    REQUIRE(c3 != nullptr);
    CHECK(c2->nominal.scale == c3->nominal.scale);
    CHECK(c2->nominal.crop_x == c3->nominal.crop_x);
    CHECK(c2->nominal.crop_y == c3->nominal.crop_y);
    CHECK(c2->model == c3->model);

    const DeviceProfile* c9 = find_profile("C9");
    REQUIRE(c9 != nullptr);
    CHECK(c9->nominal.crop_x == -160);
}

TEST_CASE("profile invariants hold for every preset") {
    for (const auto& p : builtin_profiles()) {
        CHECK(p.scale_range.contains(p.nominal.scale));
        CHECK(p.rotation_range.contains(p.nominal.rotation_deg));
        CHECK(p.crop_x_range.contains(p.nominal.crop_x));
        CHECK(p.crop_y_range.contains(p.nominal.crop_y));
        if (!p.stabilized) {
            CHECK(p.rotation_range.lo == 0.0);
            CHECK(p.rotation_range.hi == 0.0);
        }
        // nominal transform applied to image dims lands exactly on video dims
        // (by the apply_crop contract; overhang is zero-filled)
        int sr = int(std::lround(p.image_h * p.nominal.scale));
        int sc = int(std::lround(p.image_w * p.nominal.scale));
        CHECK(sr >= 2);
        CHECK(sc >= 2);
        // crop window must intersect the scaled plane
        CHECK(p.nominal.crop_y < sr);
        CHECK(p.nominal.crop_y + p.video_h > 0);
        CHECK(p.nominal.crop_x < sc);
        CHECK(p.nominal.crop_x + p.video_w > 0);
    }
}

TEST_CASE("profiles round-trip through JSON") {
    TempDir td("profiles");
    std::string text = profiles_to_json(builtin_profiles());
    std::ofstream(td / "p.json") << text;
    auto loaded = profiles_from_json(td / "p.json");
    REQUIRE(loaded.size() == builtin_profiles().size());
    for (size_t i = 0; i < loaded.size(); ++i) {
        const auto& a = builtin_profiles()[i];
        const auto& b = loaded[i];
        CHECK(a.id == b.id);
        CHECK(a.image_w == b.image_w);
        CHECK(a.video_h == b.video_h);
        CHECK(a.stabilized == b.stabilized);
        CHECK(a.nominal.scale == b.nominal.scale);
        CHECK(a.nominal.crop_x == b.nominal.crop_x);
        CHECK(a.scale_range.lo == b.scale_range.lo);
        CHECK(a.rotation_range.hi == b.rotation_range.hi);
    }
}

TEST_CASE("warp_to_reference inverts apply_transform on the valid interior") {
    Plane ref = smooth_plane(120, 160);
    SimilarityTransform t{0.75, 0.3, 14, 9};
    Plane frame = apply_transform(ref, t, 70, 100);
    Plane mask;
    Plane back = warp_to_reference(frame, t, 120, 160, &mask);
    double rms = 0.0;
    int cnt = 0;
    for (int r = 2; r < 118; ++r)
        for (int c = 2; c < 158; ++c) {
            if (mask.at(r, c) < 0.5f) continue;
            bool interior = mask.at(r - 2, c - 2) > 0.5f && mask.at(r + 2, c + 2) > 0.5f &&
                            mask.at(r - 2, c + 2) > 0.5f && mask.at(r + 2, c - 2) > 0.5f;
            if (!interior) continue;
            double d = double(back.at(r, c)) - ref.at(r, c);
            rms += d * d;
            ++cnt;
        }
    REQUIRE(cnt > 1000);
    CHECK(std::sqrt(rms / cnt) < 2.0); // 2% of the 100-unit range
}
