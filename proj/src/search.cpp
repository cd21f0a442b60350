#include "hsi/search.hpp"

#include <algorithm>
#include <cmath>

#include "hsi/parallel.hpp"

namespace hsi::search {

using correlate::CorrelationSurface;
using correlate::ncc_surface;
using correlate::PceResult;
using correlate::ShiftRegion;
using fingerprint::Fingerprint;
using geometry::SimilarityTransform;

ScaleGrid ScaleGrid::single(double r) {
    ScaleGrid g;
    g.values = {r};
    g.validate();
    return g;
}

ScaleGrid ScaleGrid::range(double lo, double hi, double step) {
    ScaleGrid g;
    if (step <= 0.0) raise(ErrorKind::invalid_input, "scale step must be positive");
    for (double v = lo; v <= hi + 1e-9; v += step) g.values.push_back(v);
    g.validate();
    return g;
}

ScaleGrid ScaleGrid::two_stage(double lo, double hi, double coarse_step, double fine_step,
                               double half_width) {
    ScaleGrid g = range(lo, hi, coarse_step);
    g.refinement = Refinement{fine_step, half_width};
    return g;
}

void ScaleGrid::validate() const {
    if (values.empty()) raise(ErrorKind::invalid_input, "scale grid is empty");
    for (size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0 && values[i] <= 4.0))
            raise(ErrorKind::invalid_input, "scale grid values must lie in (0,4]");
        if (i && values[i] <= values[i - 1])
            raise(ErrorKind::invalid_input, "scale grid must be strictly increasing");
    }
    if (refinement && (refinement->fine_step <= 0.0 || refinement->half_width <= 0.0))
        raise(ErrorKind::invalid_input, "invalid scale refinement parameters");
}

CropSearch CropSearch::central(double frac) {
    CropSearch c;
    c.mode = Mode::central;
    c.central_frac = frac;
    return c;
}

CropSearch CropSearch::around(int crop_x, int crop_y, int half_x, int half_y) {
    CropSearch c;
    c.mode = Mode::around;
    c.cx = crop_x;
    c.cy = crop_y;
    c.half_x = half_x;
    c.half_y = half_y;
    return c;
}

CropSearch CropSearch::fixed(const ShiftRegion& r) {
    CropSearch c;
    c.mode = Mode::fixed;
    c.fixed_region = r;
    return c;
}

ShiftRegion CropSearch::resolve(int qry_rows, int qry_cols, int ref_rows, int ref_cols) const {
    switch (mode) {
    case Mode::central:
        return correlate::central_crop_region(qry_rows, qry_cols, ref_rows, ref_cols,
                                              central_frac);
    case Mode::around:
        return ShiftRegion::centered(cy, cx, half_y, half_x);
    case Mode::fixed:
    default:
        return fixed_region;
    }
}

namespace {

// Preference order for equal PCE: smaller scale, smaller |rotation|, then
// lexicographic shift. Keeps parallel grid evaluation deterministic.
struct GridSample {
    double pce = -1.0;
    double scale = 0.0;
    double rot = 0.0;
    int s1 = 0, s2 = 0;
    double rho = 0.0;
    bool infinite = false;
    long long cells = 0;
};

bool better(const GridSample& a, const GridSample& b) {
    if (a.pce != b.pce) return a.pce > b.pce;
    if (a.scale != b.scale) return a.scale < b.scale;
    double ar = std::fabs(a.rot), br = std::fabs(b.rot);
    if (ar != br) return ar < br;
    if (a.rot != b.rot) return a.rot < b.rot;
    if (a.s1 != b.s1) return a.s1 < b.s1;
    return a.s2 < b.s2;
}

GridSample eval_scale(const Plane& qry, const Plane& scaled_ref, double scale, double rot,
                      const ShiftRegion& region, const SearchOptions& opt) {
    CorrelationSurface surf = ncc_surface(qry, scaled_ref, region);
    PceResult pr = correlate::pce(surf, opt.nbhd, opt.squared_pce);
    GridSample s;
    s.pce = pr.pce;
    s.scale = scale;
    s.rot = rot;
    s.s1 = pr.peak_s1;
    s.s2 = pr.peak_s2;
    s.rho = pr.peak_rho;
    s.infinite = pr.infinite;
    s.cells = region.cells();
    return s;
}

std::vector<GridSample> eval_scales(const Plane& ref_plane, const Plane& qry_plane,
                                    const std::vector<double>& scales, const CropSearch& crop,
                                    const SearchOptions& opt) {
    std::vector<GridSample> out(scales.size());
    parallel_for(int(scales.size()), opt.threads, [&](int i) {
        double r = scales[size_t(i)];
        Plane scaled = geometry::resample(ref_plane, r);
        ShiftRegion region = crop.resolve(qry_plane.rows, qry_plane.cols, scaled.rows,
                                          scaled.cols);
        out[size_t(i)] = eval_scale(qry_plane, scaled, r, 0.0, region, opt);
    });
    return out;
}

} // namespace

MatchResult match_search(const Fingerprint& ref, const Fingerprint& qry,
                         const ScaleGrid& grid, const CropSearch& crop, double tau,
                         const SearchOptions& opt) {
    grid.validate();
    if (plane_variance(ref.plane) == 0.0 || plane_variance(qry.plane) == 0.0)
        raise(ErrorKind::degenerate_input, "match_search: degenerate fingerprint");

    std::vector<GridSample> samples = eval_scales(ref.plane, qry.plane, grid.values, crop, opt);

    if (grid.refinement) {
        const GridSample* coarse_best = &samples[0];
        for (const auto& s : samples)
            if (better(s, *coarse_best)) coarse_best = &s;
        double lo = std::max(1e-6, coarse_best->scale - grid.refinement->half_width);
        double hi = std::min(4.0, coarse_best->scale + grid.refinement->half_width);
        std::vector<double> fine;
        for (double v = lo; v <= hi + 1e-9; v += grid.refinement->fine_step) {
            bool dup = false;
            for (double c : grid.values)
                if (std::fabs(c - v) < 1e-9) { dup = true; break; }
            if (!dup) fine.push_back(v);
        }
        std::vector<GridSample> fs = eval_scales(ref.plane, qry.plane, fine, crop, opt);
        samples.insert(samples.end(), fs.begin(), fs.end());
        std::sort(samples.begin(), samples.end(),
                  [](const GridSample& a, const GridSample& b) { return a.scale < b.scale; });
    }

    MatchResult res;
    res.threshold_used = tau;
    const GridSample* best = &samples[0];
    for (const auto& s : samples) {
        res.k_tested += s.cells;
        if (better(s, *best)) best = &s;
    }
    res.per_scale.reserve(samples.size());
    for (const auto& s : samples)
        res.per_scale.push_back({s.scale, s.pce, s.rho, s.s1, s.s2, s.infinite});
    res.p_stat = best->pce;
    res.r_peak = best->scale;
    res.s1_peak = best->s1;
    res.s2_peak = best->s2;
    res.peak_rho = best->rho;
    res.infinite = best->infinite;
    res.decision = (res.p_stat > tau) && (res.peak_rho > 0.0);
    res.far_bound = far_bound(tau, res.k_tested);
    return res;
}

double far_bound(double tau, long long k) {
    if (tau < 0.0 || k < 1) raise(ErrorKind::invalid_input, "far_bound: tau >= 0, k >= 1");
    double q = 0.5 * std::erfc(std::sqrt(tau) / std::sqrt(2.0));
    if (k == 1) return q;
    if (q >= 1.0) return 1.0;
    return -std::expm1(double(k) * std::log1p(-q));
}

StabilizationReport detect_stabilization(const imagery::FrameSequence& frames,
                                         const StabDetectConfig& cfg) {
    int n = frames.count();
    if (cfg.max_frames > 0) n = std::min(n, cfg.max_frames);
    if (n < 2)
        raise(ErrorKind::insufficient_frames,
              "stabilization detection needs at least 2 frames");

    // even/odd split by frame index
    std::vector<int> half[2];
    for (int i = 0; i < n; ++i) half[i % 2].push_back(i);

    fingerprint::Accumulator acc[2];
    constexpr int kChunk = 16;
    int nch0 = (int(half[0].size()) + kChunk - 1) / kChunk;
    int nch1 = (int(half[1].size()) + kChunk - 1) / kChunk;
    std::vector<fingerprint::Accumulator> parts(static_cast<size_t>(nch0 + nch1));
    parallel_for(nch0 + nch1, cfg.threads, [&](int ci) {
        int h = ci < nch0 ? 0 : 1;
        int base = (h == 0 ? ci : ci - nch0) * kChunk;
        const auto& idx = half[h];
        fingerprint::Accumulator a;
        for (int j = base; j < std::min(int(idx.size()), base + kChunk); ++j) {
            Plane img = frames.frame(idx[size_t(j)]);
            Plane residual = denoise::noise_residual(img, cfg.denoise);
            Plane mask = imagery::saturation_mask(img);
            fingerprint::accumulate(a, img, residual, &mask);
        }
        parts[size_t(ci)] = std::move(a);
    });
    for (int ci = 0; ci < nch0 + nch1; ++ci)
        fingerprint::merge(acc[ci < nch0 ? 0 : 1], parts[size_t(ci)]);

    Fingerprint f0 = fingerprint::finalize(acc[0], 1.0, fingerprint::SourceKind::video_frames,
                                           cfg.denoise);
    Fingerprint f1 = fingerprint::finalize(acc[1], 1.0, fingerprint::SourceKind::video_frames,
                                           cfg.denoise);

    ShiftRegion region = ShiftRegion::centered(0, 0, cfg.region_half, cfg.region_half);
    CorrelationSurface surf = ncc_surface(f0.plane, f1.plane, region);
    PceResult pr = correlate::pce_at(surf, 0, 0, cfg.nbhd);

    StabilizationReport rep;
    rep.split_pce = pr.infinite ? correlate::pce_infinity() : pr.pce;
    rep.stabilized = rep.split_pce < cfg.tau_stab;
    rep.half_n1 = int(half[0].size());
    rep.half_n2 = int(half[1].size());
    return rep;
}

std::vector<double> ParamRanges::scale_values() const {
    std::vector<double> v;
    if (scale_hi - scale_lo < 1e-12) {
        v.push_back(scale_lo);
        return v;
    }
    for (double s = scale_lo; s <= scale_hi + 1e-9; s += scale_step) v.push_back(s);
    return v;
}

std::vector<double> ParamRanges::rotation_values() const {
    std::vector<double> v;
    if (rot_hi - rot_lo < 1e-12) {
        v.push_back(rot_lo);
        return v;
    }
    for (double r = rot_lo; r <= rot_hi + 1e-9; r += rot_step) v.push_back(r);
    return v;
}

void ParamRanges::validate() const {
    if (!(scale_lo > 0.0 && scale_hi <= 4.0 && scale_lo <= scale_hi))
        raise(ErrorKind::invalid_input, "scale range must lie in (0,4]");
    if (std::fabs(rot_lo) > 45.0 || std::fabs(rot_hi) > 45.0 || rot_lo > rot_hi)
        raise(ErrorKind::invalid_input, "rotation range must lie in [-45,45]");
    if (scale_step <= 0.0 || rot_step <= 0.0)
        raise(ErrorKind::invalid_input, "grid steps must be positive");
    if (crop.rows() <= 0 || crop.cols() <= 0)
        raise(ErrorKind::invalid_input, "empty crop window");
}

ParamRanges ranges_from_profile(const geometry::DeviceProfile& p, double widen_frac,
                                int crop_margin) {
    ParamRanges r;
    geometry::ParamRange sc = p.scale_range.widened(widen_frac);
    geometry::ParamRange ro = p.rotation_range.widened(widen_frac);
    geometry::ParamRange cx = p.crop_x_range.widened(widen_frac);
    geometry::ParamRange cy = p.crop_y_range.widened(widen_frac);
    r.scale_lo = std::max(1e-3, sc.lo);
    r.scale_hi = std::min(4.0, sc.hi);
    r.rot_lo = std::max(-45.0, ro.lo);
    r.rot_hi = std::min(45.0, ro.hi);
    r.crop = {int(std::floor(cy.lo)) - crop_margin, int(std::ceil(cy.hi)) + crop_margin,
              int(std::floor(cx.lo)) - crop_margin, int(std::ceil(cx.hi)) + crop_margin};
    return r;
}

namespace {

struct WarpedRef {
    double scale = 0.0;
    double rot = 0.0;
    Plane plane;
};

std::vector<WarpedRef> build_bank(const Plane& ref, const ParamRanges& ranges, int threads) {
    std::vector<double> scales = ranges.scale_values();
    std::vector<double> rots = ranges.rotation_values();
    std::vector<WarpedRef> bank(scales.size() * rots.size());
    parallel_for(int(scales.size()), threads, [&](int i) {
        Plane scaled = geometry::resample(ref, scales[size_t(i)]);
        for (size_t j = 0; j < rots.size(); ++j) {
            WarpedRef& w = bank[size_t(i) * rots.size() + j];
            w.scale = scales[size_t(i)];
            w.rot = rots[size_t(j)];
            w.plane = geometry::rotate(scaled, rots[size_t(j)]);
        }
    });
    return bank;
}

GridSample register_against_bank(const Plane& residual, const std::vector<WarpedRef>& bank,
                                 const ShiftRegion& crop, const SearchOptions& opt) {
    std::vector<GridSample> samples(bank.size());
    parallel_for(int(bank.size()), opt.threads, [&](int i) {
        const WarpedRef& w = bank[size_t(i)];
        samples[size_t(i)] = eval_scale(residual, w.plane, w.scale, w.rot, crop, opt);
    });
    GridSample best = samples[0];
    for (const auto& s : samples)
        if (better(s, best)) best = s;
    return best;
}

} // namespace

RegistrationResult register_frame(const Plane& residual, const Fingerprint& ref,
                                  const ParamRanges& ranges, double tau_agg,
                                  const SearchOptions& opt) {
    ranges.validate();
    if (plane_variance(residual) == 0.0 || plane_variance(ref.plane) == 0.0)
        raise(ErrorKind::degenerate_input, "register_frame: degenerate input");
    std::vector<WarpedRef> bank = build_bank(ref.plane, ranges, opt.threads);
    GridSample best = register_against_bank(residual, bank, ranges.crop, opt);
    RegistrationResult res;
    res.transform = {best.scale, best.rot, best.s2, best.s1};
    res.pce = best.pce;
    res.peak_rho = best.rho;
    // a degenerate background (infinite sentinel) carries no evidence here
    res.accepted = best.pce > tau_agg && best.rho > 0.0 && !best.infinite;
    return res;
}

AggregateOutcome aggregate_registered(const imagery::FrameSequence& frames,
                                      const Fingerprint& ref, const ParamRanges& ranges,
                                      const AggregateConfig& cfg) {
    ranges.validate();
    int n = frames.count();
    if (cfg.max_frames > 0) n = std::min(n, cfg.max_frames);
    if (n < 1) raise(ErrorKind::no_frames, "no frames to aggregate");

    std::vector<WarpedRef> bank = build_bank(ref.plane, ranges, cfg.threads);

    struct FrameWork {
        RegistrationResult reg;
        Plane residual, img; // retained only when accepted
    };
    std::vector<FrameWork> work(static_cast<size_t>(n));
    parallel_for(n, cfg.threads, [&](int i) {
        FrameWork& fw = work[size_t(i)];
        Plane img = frames.frame(i);
        Plane residual = denoise::noise_residual(img, cfg.denoise);
        GridSample best = register_against_bank(residual, bank, ranges.crop, cfg.search);
        fw.reg.transform = {best.scale, best.rot, best.s2, best.s1};
        fw.reg.pce = best.pce;
        fw.reg.peak_rho = best.rho;
        fw.reg.accepted = best.pce > cfg.tau_agg && best.rho > 0.0 && !best.infinite;
        if (fw.reg.accepted) {
            fw.residual = std::move(residual);
            fw.img = std::move(img);
        }
    });

    AggregateOutcome out;
    fingerprint::Accumulator acc;
    std::vector<double> med_scale, med_rot, med_x, med_y;
    for (int i = 0; i < n; ++i) {
        const FrameWork& fw = work[size_t(i)];
        out.per_frame.push_back(fw.reg);
        if (!fw.reg.accepted) continue;
        ++out.accepted;
        Plane mask;
        Plane w_res = geometry::warp_to_reference(fw.residual, fw.reg.transform,
                                                  ref.plane.rows, ref.plane.cols, &mask);
        Plane w_img = geometry::warp_to_reference(fw.img, fw.reg.transform, ref.plane.rows,
                                                  ref.plane.cols, nullptr);
        if (cfg.mask_saturation) {
            for (size_t k = 0; k < mask.size(); ++k)
                if (w_img.data[k] >= float(cfg.saturation_threshold)) mask.data[k] = 0.0f;
        }
        fingerprint::accumulate(acc, w_img, w_res, &mask);
        med_scale.push_back(fw.reg.transform.scale);
        med_rot.push_back(fw.reg.transform.rotation_deg);
        med_x.push_back(fw.reg.transform.crop_x);
        med_y.push_back(fw.reg.transform.crop_y);
    }
    if (out.accepted == 0)
        raise(ErrorKind::no_registrable_frames,
              "no frame registration exceeded the aggregation threshold");

    auto median = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    out.fingerprint = fingerprint::finalize(acc, cfg.eps,
                                            fingerprint::SourceKind::registered_frames,
                                            cfg.denoise);
    out.fingerprint.geometry_note = SimilarityTransform{
        median(med_scale), median(med_rot), int(std::lround(median(med_x))),
        int(std::lround(median(med_y)))};
    return out;
}

} // namespace hsi::search
