#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hsi/search.hpp"
#include "hsi/simulator.hpp"
#include "helpers.hpp"

using namespace hsi;
using namespace hsi::search;
using fingerprint::Fingerprint;
using testutil::random_plane;

namespace {

Fingerprint wrap_fp(Plane p) {
    Fingerprint fp;
    fp.plane = std::move(p);
    fp.num_inputs = 1;
    return fp;
}

} // namespace

TEST_CASE("far bound closed forms") {
    CHECK(far_bound(0.0, 1) == 0.5); // Q(0) = 0.5 exactly
    CHECK(far_bound(2.7, 1) == doctest::Approx(0.0502).epsilon(1e-2));
    // monotone increasing in k, bounded by 1
    double prev = 0.0;
    for (long long k : {1LL, 10LL, 1000LL, 100000LL, 10000000LL}) {
        double f = far_bound(10.0, k);
        CHECK(f >= prev);
        CHECK(f <= 1.0);
        prev = f;
    }
    CHECK(far_bound(0.0, 1000000) == doctest::Approx(1.0));
    CHECK_THROWS_AS(far_bound(-1.0, 1), Error);
    CHECK_THROWS_AS(far_bound(1.0, 0), Error);
}

TEST_CASE("scale grid construction and validation") {
    auto g = ScaleGrid::range(0.5, 0.7, 0.05);
    CHECK(g.values.size() == 5);
    CHECK(g.values.front() == doctest::Approx(0.5));
    CHECK(g.values.back() == doctest::Approx(0.7));
    auto t = ScaleGrid::two_stage(0.4, 0.8);
    CHECK(t.refinement.has_value());
    CHECK_THROWS_AS(ScaleGrid::range(0.7, 0.5, 0.05), Error);
    CHECK_THROWS_AS(ScaleGrid::single(5.0), Error);
    ScaleGrid empty;
    CHECK_THROWS_AS(empty.validate(), Error);
}

TEST_CASE("self match with singleton grid and region is an infinite-PCE match") {
    Fingerprint fp = wrap_fp(random_plane(32, 32, 3));
    auto m = match_search(fp, fp, ScaleGrid::single(1.0),
                          CropSearch::fixed(correlate::ShiftRegion::single(0, 0)), 50.0, {});
    CHECK(m.infinite);
    CHECK(std::isinf(m.p_stat));
    CHECK(m.r_peak == 1.0);
    CHECK(m.s1_peak == 0);
    CHECK(m.s2_peak == 0);
    CHECK(m.decision);
    CHECK(m.k_tested == 1);
}

TEST_CASE("degenerate fingerprints are rejected") {
    Fingerprint flat = wrap_fp(Plane(16, 16, 1.0f));
    Fingerprint ok = wrap_fp(random_plane(16, 16, 4));
    CHECK_THROWS_AS(match_search(flat, ok, ScaleGrid::single(1.0),
                                 CropSearch::central(), 50.0, {}),
                    Error);
}

TEST_CASE("P is invariant under scale-grid reordering (same value set)") {
    // the grid type enforces increasing order; equivalently, P equals the max
    // over singleton searches, whatever order they are run in
    Plane base = random_plane(48, 48, 7);
    Fingerprint ref = wrap_fp(base);
    Plane shifted(40, 40);
    for (int r = 0; r < 40; ++r)
        for (int c = 0; c < 40; ++c) shifted.at(r, c) = base.at(r + 5, c + 3);
    Fingerprint qry = wrap_fp(shifted);
    auto crop = CropSearch::fixed({0, 10, 0, 10});
    auto grid = ScaleGrid::range(0.9, 1.1, 0.05);
    auto m = match_search(ref, qry, grid, crop, 50.0, {});
    double best = -1.0;
    for (double r : grid.values) {
        auto s = match_search(ref, qry, ScaleGrid::single(r), crop, 50.0, {});
        best = std::max(best, s.p_stat);
    }
    CHECK(m.p_stat == doctest::Approx(best).epsilon(1e-12));
    CHECK(m.s1_peak == 5);
    CHECK(m.s2_peak == 3);
    CHECK(m.r_peak == doctest::Approx(1.0));
}

TEST_CASE("match decision is invariant to positive scaling of either plane") {
    Plane base = random_plane(40, 40, 17);
    Fingerprint ref = wrap_fp(base);
    Plane crop_plane(32, 32);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) crop_plane.at(r, c) = base.at(r + 4, c + 4);
    Fingerprint qry = wrap_fp(crop_plane);
    auto crop = CropSearch::fixed({0, 8, 0, 8});
    SearchOptions so;
    so.nbhd = 3; // keep a real background inside the 9x9 region
    auto m0 = match_search(ref, qry, ScaleGrid::single(1.0), crop, 50.0, so);
    Fingerprint ref2 = ref;
    for (auto& v : ref2.plane.data) v *= 8.0f; // exact power of two
    Fingerprint qry2 = qry;
    for (auto& v : qry2.plane.data) v *= 0.25f;
    auto m1 = match_search(ref2, qry2, ScaleGrid::single(1.0), crop, 50.0, so);
    REQUIRE_FALSE(m0.infinite);
    CHECK(m0.p_stat == doctest::Approx(m1.p_stat).epsilon(1e-9));
    CHECK(m0.decision == m1.decision);
    CHECK(m0.s1_peak == m1.s1_peak);
}

TEST_CASE("k_tested counts every evaluated cell") {
    Fingerprint ref = wrap_fp(random_plane(40, 40, 5));
    Fingerprint qry = wrap_fp(random_plane(32, 32, 6));
    auto m = match_search(ref, qry, ScaleGrid::range(0.9, 1.1, 0.1),
                          CropSearch::fixed({0, 4, 0, 10}), 50.0, {});
    CHECK(m.k_tested == 3LL * 5 * 11);
    CHECK(m.per_scale.size() == 3);
    CHECK(m.far_bound == doctest::Approx(far_bound(50.0, m.k_tested)));
}

TEST_CASE("two-stage refinement evaluates fine scales around the coarse argmax") {
    geometry::SimilarityTransform vg{0.59, 0.0, 4, 6};
    auto dev = sim::make_device("T1", 5, 128, 96, 64, 48, vg);
    std::vector<Plane> refs, frames;
    for (int i = 0; i < 6; ++i) refs.push_back(sim::synth_image(dev, sim::Scene::flat, i));
    for (int i = 0; i < 6; ++i)
        frames.push_back(sim::synth_video(dev, 1, sim::Scene::flat, 50 + i)[0]);
    auto kI = fingerprint::estimate_from_frames(imagery::FrameSequence::from_planes(refs), {}, {});
    fingerprint::EstimateOptions vo;
    vo.kind = fingerprint::SourceKind::video_frames;
    auto kV = fingerprint::estimate_from_frames(imagery::FrameSequence::from_planes(frames), {}, vo);
    // at 128x96 sensor scale the 0.05 coarse lattice still sees the peak, so
    // the staged default can prove out the mechanics end to end
    auto m = match_search(kI, kV, ScaleGrid::two_stage(0.45, 0.75), CropSearch::central(0.3),
                          50.0, {});
    CHECK(m.decision);
    CHECK(m.r_peak == doctest::Approx(0.59).epsilon(1e-9));
    CHECK(m.s1_peak == 6);
    CHECK(m.s2_peak == 4);
    bool has_fine = false;
    for (const auto& s : m.per_scale)
        if (std::fabs(s.scale - 0.59) < 1e-9) has_fine = true;
    CHECK(has_fine);
}

TEST_CASE("detect_stabilization needs at least two frames") {
    std::vector<Plane> one{random_plane(32, 32, 3, 128.0, 5.0)};
    StabDetectConfig cfg;
    CHECK_THROWS_AS(detect_stabilization(imagery::FrameSequence::from_planes(one), cfg), Error);
    try {
        detect_stabilization(imagery::FrameSequence::from_planes(one), cfg);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::insufficient_frames);
    }
}

TEST_CASE("rigid vs jittered synthetic videos classify correctly") {
    geometry::SimilarityTransform vg{0.75, 0.0, 20, 14};
    auto rigid = sim::make_device("R", 13, 320, 240, 160, 96, vg);
    sim::JitterSpec jit{6, 0.4, 0.01};
    auto wobbly = sim::make_device("W", 14, 320, 240, 160, 96, vg, jit);

    StabDetectConfig cfg;
    cfg.region_half = 16;
    auto rigid_frames = sim::synth_video(rigid, 10, sim::Scene::flat, 1);
    auto rep_r = detect_stabilization(imagery::FrameSequence::from_planes(rigid_frames), cfg);
    CHECK_FALSE(rep_r.stabilized);
    CHECK(rep_r.split_pce > cfg.tau_stab);
    CHECK(rep_r.half_n1 == 5);
    CHECK(rep_r.half_n2 == 5);

    auto jit_frames = sim::synth_video(wobbly, 10, sim::Scene::flat, 1);
    auto rep_j = detect_stabilization(imagery::FrameSequence::from_planes(jit_frames), cfg);
    CHECK(rep_j.stabilized);
    CHECK(rep_j.split_pce < cfg.tau_stab);
}

TEST_CASE("ranges_from_profile widens printed ranges by 20%") {
    const geometry::DeviceProfile* c11 = geometry::find_profile("C11");
    REQUIRE(c11 != nullptr);
    auto r = ranges_from_profile(*c11, 0.2, 4);
    double w = 0.753 - 0.748;
    CHECK(r.scale_lo == doctest::Approx(0.748 - 0.2 * w));
    CHECK(r.scale_hi == doctest::Approx(0.753 + 0.2 * w));
    CHECK(r.rot_lo == doctest::Approx(-0.2 - 0.2 * 0.4));
    CHECK(r.crop.s2_min <= 380 - 4);
    CHECK(r.crop.s2_max >= 392 + 4);
}

TEST_CASE("register_frame with degenerate ranges equals match_search at that point") {
    geometry::SimilarityTransform vg{0.8, 0.0, 10, 8};
    auto dev = sim::make_device("G", 19, 200, 160, 120, 80, vg);
    std::vector<Plane> refs;
    for (int i = 0; i < 5; ++i) refs.push_back(sim::synth_image(dev, sim::Scene::flat, i));
    auto kI = fingerprint::estimate_from_frames(imagery::FrameSequence::from_planes(refs), {}, {});
    auto frame = sim::synth_video(dev, 1, sim::Scene::flat, 9)[0];
    auto residual = denoise::noise_residual(frame, {});

    ParamRanges ranges;
    ranges.scale_lo = ranges.scale_hi = 0.8;
    ranges.rot_lo = ranges.rot_hi = 0.0;
    ranges.crop = correlate::ShiftRegion::centered(8, 10, 6, 6);
    auto reg = register_frame(residual, kI, ranges, 38.0, {});

    Fingerprint q = wrap_fp(residual);
    auto m = match_search(kI, q, ScaleGrid::single(0.8),
                          CropSearch::fixed(ranges.crop), 38.0, {});
    CHECK(reg.pce == doctest::Approx(m.p_stat).epsilon(1e-12));
    CHECK(reg.transform.crop_y == m.s1_peak);
    CHECK(reg.transform.crop_x == m.s2_peak);
    CHECK(reg.transform.scale == 0.8);
    CHECK(reg.accepted);
}

TEST_CASE("register_frame on an unjittered frame returns the nominal transform") {
    geometry::SimilarityTransform vg{0.75, 0.0, 24, 18};
    auto dev = sim::make_device("N", 27, 320, 240, 160, 96, vg);
    std::vector<Plane> refs;
    for (int i = 0; i < 6; ++i) refs.push_back(sim::synth_image(dev, sim::Scene::flat, i));
    auto kI = fingerprint::estimate_from_frames(imagery::FrameSequence::from_planes(refs), {}, {});
    auto frame = sim::synth_video(dev, 1, sim::Scene::flat, 4)[0];
    auto residual = denoise::noise_residual(frame, {});
    ParamRanges ranges;
    ranges.scale_lo = 0.74;
    ranges.scale_hi = 0.76;
    ranges.rot_lo = -0.4;
    ranges.rot_hi = 0.4;
    ranges.rot_step = 0.2;
    ranges.crop = correlate::ShiftRegion::centered(18, 24, 8, 8);
    auto reg = register_frame(residual, kI, ranges, 38.0, {});
    CHECK(reg.accepted);
    CHECK(std::fabs(reg.transform.scale - 0.75) <= 0.005 + 1e-9);
    CHECK(std::fabs(reg.transform.rotation_deg) <= 0.2 + 1e-9);
    CHECK(reg.transform.crop_x == 24);
    CHECK(reg.transform.crop_y == 18);
}

TEST_CASE("surface values stay within |rho| <= 1 + 1e-6") {
    Plane base = random_plane(40, 40, 71);
    Plane crop_plane(30, 30);
    for (int r = 0; r < 30; ++r)
        for (int c = 0; c < 30; ++c) crop_plane.at(r, c) = base.at(r + 5, c + 5);
    auto surf = correlate::ncc_surface(crop_plane, base, {-20, 20, -20, 20});
    for (float v : surf.plane.data) CHECK(std::fabs(v) <= 1.0 + 1e-6);
}

TEST_CASE("aggregate_registered accepts jittered matching frames and rejects imposters") {
    geometry::SimilarityTransform vg{0.75, 0.0, 24, 18};
    sim::JitterSpec jit{6, 0.4, 0.01};
    auto dev = sim::make_device("A", 23, 320, 240, 160, 96, vg, jit);
    auto imp = sim::make_device("B", 24, 320, 240, 160, 96, vg, jit);

    std::vector<Plane> refs;
    for (int i = 0; i < 8; ++i) refs.push_back(sim::synth_image(dev, sim::Scene::flat, i));
    auto kI = fingerprint::estimate_from_frames(imagery::FrameSequence::from_planes(refs), {}, {});

    auto ranges = ranges_from_profile(sim::device_profile(dev));
    std::vector<geometry::SimilarityTransform> truth;
    auto frames = sim::synth_video(dev, 5, sim::Scene::flat, 2, &truth);
    AggregateConfig cfg;
    auto out = aggregate_registered(imagery::FrameSequence::from_planes(frames), kI, ranges, cfg);
    CHECK(out.accepted >= 4);
    CHECK(out.fingerprint.source_kind == fingerprint::SourceKind::registered_frames);
    CHECK(out.fingerprint.plane.rows == 240);
    CHECK(out.fingerprint.plane.cols == 320);
    // the 5-frame aggregate beats a 1-frame aggregate at identical settings
    SearchOptions so;
    so.nbhd = 11;
    auto final_crop = CropSearch::around(0, 0, 8, 8);
    auto fin = match_search(kI, out.fingerprint, ScaleGrid::single(1.0), final_crop, 50.0, so);
    CHECK(fin.decision);
    auto single = aggregate_registered(
        imagery::FrameSequence::from_planes({frames[0]}), kI, ranges, cfg);
    auto fin1 = match_search(kI, single.fingerprint, ScaleGrid::single(1.0), final_crop, 50.0, so);
    CHECK(fin.p_stat > fin1.p_stat);

    // per-frame transforms recover the ground truth
    for (size_t i = 0; i < out.per_frame.size(); ++i) {
        if (!out.per_frame[i].accepted) continue;
        CHECK(std::fabs(out.per_frame[i].transform.scale - truth[i].scale) <= 0.005 + 1e-9);
        CHECK(std::fabs(out.per_frame[i].transform.rotation_deg - truth[i].rotation_deg) <=
              0.2 + 1e-9);
        CHECK(out.per_frame[i].transform.crop_x == truth[i].crop_x);
        CHECK(out.per_frame[i].transform.crop_y == truth[i].crop_y);
    }

    // imposter video: nothing registers
    auto bad = sim::synth_video(imp, 5, sim::Scene::flat, 2);
    CHECK_THROWS_AS(
        aggregate_registered(imagery::FrameSequence::from_planes(bad), kI, ranges, cfg), Error);

    // tau_agg = 0 accepts everything
    AggregateConfig all;
    all.tau_agg = 0.0;
    auto loose = aggregate_registered(imagery::FrameSequence::from_planes(bad), kI, ranges, all);
    CHECK(loose.accepted == 5);
}
