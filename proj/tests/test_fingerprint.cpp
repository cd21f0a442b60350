#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "hsi/fingerprint.hpp"
#include "helpers.hpp"

using namespace hsi;
using namespace hsi::fingerprint;
using testutil::random_plane;
using testutil::TempDir;

TEST_CASE("single accumulation matches the closed form") {
    Plane img(4, 4, 3.0f);
    Plane res(4, 4, 0.5f);
    Accumulator acc;
    accumulate(acc, img, res);
    CHECK(acc.count == 1);
    for (size_t i = 0; i < acc.numerator.size(); ++i) {
        CHECK(acc.numerator[i] == doctest::Approx(1.5));
        CHECK(acc.denominator[i] == doctest::Approx(9.0));
    }
    Fingerprint fp = finalize(acc, 1.0);
    for (float v : fp.plane.data) CHECK(v == doctest::Approx(1.5 / 10.0));
}

TEST_CASE("masked pixels do not contribute") {
    Plane img(2, 2, 10.0f), res(2, 2, 1.0f), mask(2, 2, 1.0f);
    mask.at(0, 0) = 0.0f;
    Accumulator acc;
    accumulate(acc, img, res, &mask);
    CHECK(acc.numerator[0] == 0.0);
    CHECK(acc.denominator[0] == 0.0);
    CHECK(acc.numerator[1] == doctest::Approx(10.0));
}

TEST_CASE("two identical accumulations double the sums") {
    Plane img = random_plane(8, 8, 4, 100.0, 10.0);
    Plane res = random_plane(8, 8, 5, 0.0, 1.0);
    Accumulator once, twice;
    accumulate(once, img, res);
    accumulate(twice, img, res);
    accumulate(twice, img, res);
    for (size_t i = 0; i < once.numerator.size(); ++i)
        CHECK(twice.numerator[i] == doctest::Approx(2.0 * once.numerator[i]));
    CHECK(twice.count == 2);
}

TEST_CASE("dimension mismatch raises invalid-input") {
    Accumulator acc;
    accumulate(acc, Plane(4, 4, 1.0f), Plane(4, 4, 0.1f));
    CHECK_THROWS_AS(accumulate(acc, Plane(4, 5, 1.0f), Plane(4, 5, 0.1f)), Error);
    CHECK_THROWS_AS(accumulate(acc, Plane(4, 4, 1.0f), Plane(5, 4, 0.1f)), Error);
}

TEST_CASE("finalize of empty accumulator raises empty-accumulator") {
    Accumulator acc;
    CHECK_THROWS_AS(finalize(acc), Error);
    try {
        finalize(acc);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::empty_accumulator);
    }
}

TEST_CASE("always-dark pixel yields zero fingerprint there") {
    Plane img(4, 4, 100.0f), res(4, 4, 0.5f);
    img.at(2, 2) = 0.0f;
    res.at(2, 2) = 0.0f; // dark pixel has no residual either
    Accumulator acc;
    accumulate(acc, img, res);
    Fingerprint fp = finalize(acc, 1.0);
    CHECK(fp.plane.at(2, 2) == 0.0f);
}

TEST_CASE("order invariance: permuted accumulation gives identical sums") {
    std::vector<Plane> imgs, ress;
    for (int i = 0; i < 6; ++i) {
        imgs.push_back(random_plane(8, 8, 10 + i, 120.0, 8.0));
        ress.push_back(random_plane(8, 8, 20 + i, 0.0, 1.0));
    }
    // merge of per-frame accumulators in fixed order is what the estimator
    // does; summing each frame alone then merging in index order must be
    // independent of which worker computed what.
    Accumulator a;
    for (int i = 0; i < 6; ++i) accumulate(a, imgs[size_t(i)], ress[size_t(i)]);
    std::vector<Accumulator> parts(6);
    for (int i : {3, 1, 5, 0, 4, 2}) // "workers" finish out of order
        accumulate(parts[size_t(i)], imgs[size_t(i)], ress[size_t(i)]);
    Accumulator b;
    for (int i = 0; i < 6; ++i) merge(b, parts[size_t(i)]);
    CHECK(a.count == b.count);
    for (size_t i = 0; i < a.numerator.size(); ++i) {
        CHECK(a.numerator[i] == doctest::Approx(b.numerator[i]).epsilon(1e-15));
        CHECK(a.denominator[i] == doctest::Approx(b.denominator[i]).epsilon(1e-15));
    }
}

TEST_CASE("save/load round trip is bitwise identical") {
    TempDir td("fp_io");
    Fingerprint fp;
    fp.plane = random_plane(24, 31, 7);
    fp.num_inputs = 42;
    fp.source_kind = SourceKind::video_frames;
    fp.postprocess = kPostWhitened;
    fp.geometry_note = geometry::SimilarityTransform{0.59, 0.0, 0, 307};
    save(fp, td / "a.hsifp");
    Fingerprint back = load(td / "a.hsifp");
    CHECK(back.plane.rows == fp.plane.rows);
    CHECK(back.plane.cols == fp.plane.cols);
    CHECK(back.plane.data == fp.plane.data); // bitwise
    CHECK(back.num_inputs == 42);
    CHECK(back.source_kind == SourceKind::video_frames);
    CHECK(back.postprocess == kPostWhitened);
    REQUIRE(back.geometry_note.has_value());
    CHECK(back.geometry_note->scale == 0.59);
    CHECK(back.geometry_note->crop_y == 307);

    // save again: byte-identical files
    save(back, td / "b.hsifp");
    std::ifstream fa(td / "a.hsifp", std::ios::binary), fb(td / "b.hsifp", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), {});
    std::string sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
}

TEST_CASE("file format begins with the magic HSIFP\\x01") {
    TempDir td("fp_magic");
    Fingerprint fp;
    fp.plane = Plane(4, 4, 0.5f);
    fp.num_inputs = 1;
    save(fp, td / "m.hsifp");
    std::ifstream f(td / "m.hsifp", std::ios::binary);
    char head[6];
    f.read(head, 6);
    CHECK(head[0] == 'H');
    CHECK(head[1] == 'S');
    CHECK(head[2] == 'I');
    CHECK(head[3] == 'F');
    CHECK(head[4] == 'P');
    CHECK(head[5] == 1);
}

TEST_CASE("truncated and corrupted files raise format errors") {
    TempDir td("fp_bad");
    Fingerprint fp;
    fp.plane = random_plane(8, 8, 9);
    fp.num_inputs = 3;
    save(fp, td / "x.hsifp");

    std::ifstream f(td / "x.hsifp", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(f)), {});
    f.close();

    // truncation at various points
    for (size_t cut : {size_t(3), size_t(10), bytes.size() - 7}) {
        std::ofstream t(td / "t.hsifp", std::ios::binary);
        t.write(bytes.data(), std::streamsize(cut));
        t.close();
        try {
            load(td / "t.hsifp");
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::format);
            CHECK(std::string(e.what()).find("byte") != std::string::npos);
        }
    }

    // bad magic
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream(td / "bm.hsifp", std::ios::binary).write(bad.data(), std::streamsize(bad.size()));
    try {
        load(td / "bm.hsifp");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::format);
    }

    // version byte != 1
    std::string v2 = bytes;
    v2[5] = 2;
    std::ofstream(td / "v2.hsifp", std::ios::binary).write(v2.data(), std::streamsize(v2.size()));
    try {
        load(td / "v2.hsifp");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::unsupported_version);
    }
}

TEST_CASE("whiten removes row and column means") {
    Plane p = random_plane(32, 48, 13);
    // add per-row and per-column offsets
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 48; ++c) p.at(r, c) += float(0.5 * r - 0.3 * c);
    Fingerprint fp;
    fp.plane = p;
    fp.num_inputs = 1;
    Fingerprint w = whiten(fp);
    CHECK(w.whitened());
    for (int r = 0; r < 32; ++r) {
        double m = 0.0;
        for (int c = 0; c < 48; ++c) m += w.plane.at(r, c);
        CHECK(std::fabs(m / 48) < 1e-6);
    }
    for (int c = 0; c < 48; ++c) {
        double m = 0.0;
        for (int r = 0; r < 32; ++r) m += w.plane.at(r, c);
        CHECK(std::fabs(m / 32) < 1e-6);
    }
    // unit variance
    CHECK(plane_variance(w.plane) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("whiten keeps white noise nearly intact") {
    Fingerprint fp;
    fp.plane = random_plane(64, 64, 15);
    fp.num_inputs = 1;
    Fingerprint w = whiten(fp);
    CHECK(plane_corr(w.plane, fp.plane) > 0.95);
}

TEST_CASE("whiten of an all-zero plane returns zeros with the warning flag") {
    Fingerprint fp;
    fp.plane = Plane(16, 16, 0.0f);
    fp.num_inputs = 1;
    Fingerprint w = whiten(fp);
    CHECK((w.postprocess & kPostDegenerate) != 0);
    for (float v : w.plane.data) CHECK(v == 0.0f);
    Fingerprint small;
    small.plane = Plane(8, 8, 1.0f);
    small.num_inputs = 1;
    CHECK_THROWS_AS(whiten(small), Error);
}

TEST_CASE("estimate_from_frames is identical across thread counts") {
    std::vector<Plane> frames;
    for (int i = 0; i < 20; ++i) {
        Plane f = random_plane(32, 32, 100 + i, 128.0, 4.0);
        for (auto& v : f.data) v = std::min(255.0f, std::max(0.0f, v));
        frames.push_back(std::move(f));
    }
    auto seq = imagery::FrameSequence::from_planes(frames);
    EstimateOptions o1, o4;
    o1.threads = 1;
    o4.threads = 4;
    Fingerprint a = estimate_from_frames(seq, {}, o1);
    Fingerprint b = estimate_from_frames(seq, {}, o4);
    CHECK(a.plane.data == b.plane.data); // bitwise
    CHECK(a.num_inputs == 20);
}
