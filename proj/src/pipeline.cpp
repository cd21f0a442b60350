#include "hsi/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>

namespace hsi::pipeline {

using fingerprint::Fingerprint;
using nlohmann::json;
using search::CropSearch;
using search::MatchResult;
using search::ParamRanges;
using search::ScaleGrid;

namespace {

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

json float6(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    if (std::isnan(v)) return json("nan");
    return json(round6(v));
}

ScaleGrid informed_grid(const geometry::DeviceProfile& p, double fine_step) {
    geometry::ParamRange r = p.scale_range.widened(0.2);
    double lo = std::max(1e-3, r.lo - 2 * fine_step);
    double hi = std::min(4.0, r.hi + 2 * fine_step);
    return ScaleGrid::range(lo, hi, fine_step);
}

// Search setup shared by both branches.
struct SearchPlan {
    ScaleGrid grid = ScaleGrid::single(1.0);
    CropSearch crop = CropSearch::central();
    ParamRanges ranges; // registered branch
};

SearchPlan make_plan(const PipelineConfig& cfg, int ref_rows, int ref_cols, int qry_rows,
                     int qry_cols) {
    SearchPlan plan;
    if (cfg.profile) {
        const geometry::DeviceProfile& p = *cfg.profile;
        plan.grid = informed_grid(p, 0.005);
        plan.crop = CropSearch::around(p.nominal.crop_x, p.nominal.crop_y, cfg.crop_half,
                                       cfg.crop_half);
        plan.ranges = search::ranges_from_profile(p);
        plan.ranges.scale_step = 0.005;
        plan.ranges.rot_step = 0.2;
        // The registered branch needs real spans even for a rigid preset:
        // landing there means the detector saw per-frame motion the preset
        // does not carry.
        plan.ranges.scale_lo = std::min(plan.ranges.scale_lo, p.nominal.scale - 0.01);
        plan.ranges.scale_hi = std::max(plan.ranges.scale_hi, p.nominal.scale + 0.01);
        plan.ranges.rot_lo = std::min(plan.ranges.rot_lo, p.nominal.rotation_deg - 0.4);
        plan.ranges.rot_hi = std::max(plan.ranges.rot_hi, p.nominal.rotation_deg + 0.4);
        correlate::ShiftRegion min_crop = correlate::ShiftRegion::centered(
            p.nominal.crop_y, p.nominal.crop_x, 12, 12);
        plan.ranges.crop.s1_min = std::min(plan.ranges.crop.s1_min, min_crop.s1_min);
        plan.ranges.crop.s1_max = std::max(plan.ranges.crop.s1_max, min_crop.s1_max);
        plan.ranges.crop.s2_min = std::min(plan.ranges.crop.s2_min, min_crop.s2_min);
        plan.ranges.crop.s2_max = std::max(plan.ranges.crop.s2_max, min_crop.s2_max);
    } else {
        plan.grid = ScaleGrid::range(cfg.blind.scale_lo, cfg.blind.scale_hi,
                                     cfg.blind.scale_step);
        plan.crop = CropSearch::central(cfg.blind.central_frac);
        plan.ranges.scale_lo = cfg.blind.scale_lo;
        plan.ranges.scale_hi = cfg.blind.scale_hi;
        plan.ranges.scale_step = cfg.blind.scale_step;
        plan.ranges.rot_lo = cfg.blind.rot_lo;
        plan.ranges.rot_hi = cfg.blind.rot_hi;
        plan.ranges.rot_step = cfg.blind.rot_step;
        double mid = 0.5 * (cfg.blind.scale_lo + cfg.blind.scale_hi);
        plan.ranges.crop = correlate::central_crop_region(
            qry_rows, qry_cols, int(std::lround(ref_rows * mid)),
            int(std::lround(ref_cols * mid)), cfg.blind.central_frac);
    }
    return plan;
}

HsiReport run_common(const imagery::FrameSequence& ref_images,
                     const imagery::FrameSequence& query_frames, const PipelineConfig& cfg) {
    if (query_frames.count() < 2)
        raise(ErrorKind::insufficient_frames, "need at least 2 query frames");
    HsiReport rep;
    rep.config_echo = cfg.echo();

    double t0 = now_ms();
    fingerprint::EstimateOptions ref_opt;
    ref_opt.kind = fingerprint::SourceKind::still_images;
    ref_opt.whiten = cfg.whiten_ref;
    ref_opt.max_frames = cfg.ref_budget;
    ref_opt.threads = cfg.threads;
    ref_opt.mask_saturation = cfg.mask_saturation;
    ref_opt.saturation_threshold = cfg.saturation_threshold;
    Fingerprint ref_fp = fingerprint::estimate_from_frames(ref_images, cfg.denoise, ref_opt);
    rep.ref_images_used = int(ref_fp.num_inputs);
    double t1 = now_ms();
    rep.timing_ms["ref_fingerprint"] = t1 - t0;

    search::StabDetectConfig sdc;
    sdc.denoise = cfg.denoise;
    sdc.tau_stab = cfg.tau_stab;
    sdc.region_half = cfg.stab_region_half;
    sdc.nbhd = cfg.nbhd;
    sdc.max_frames = cfg.frame_budget;
    sdc.threads = cfg.threads;
    rep.stabilization = search::detect_stabilization(query_frames, sdc);
    double t2 = now_ms();
    rep.timing_ms["stabilization_check"] = t2 - t1;

    SearchPlan plan = make_plan(cfg, ref_fp.plane.rows, ref_fp.plane.cols,
                                query_frames.rows(), query_frames.cols());
    search::SearchOptions sopt;
    sopt.nbhd = cfg.nbhd;
    sopt.squared_pce = cfg.squared_pce;
    sopt.threads = cfg.threads;

    rep.frames_used = std::min(query_frames.count(),
                               cfg.frame_budget > 0 ? cfg.frame_budget : query_frames.count());

    if (!rep.stabilization.stabilized) {
        rep.branch = "direct";
        fingerprint::EstimateOptions qopt = ref_opt;
        qopt.kind = fingerprint::SourceKind::video_frames;
        qopt.whiten = cfg.whiten_query;
        qopt.max_frames = cfg.frame_budget;
        Fingerprint qry_fp = fingerprint::estimate_from_frames(query_frames, cfg.denoise, qopt);
        double t3 = now_ms();
        rep.timing_ms["query_fingerprint"] = t3 - t2;
        rep.match = search::match_search(ref_fp, qry_fp, plan.grid, plan.crop, cfg.tau_match,
                                         sopt);
        rep.timing_ms["match_search"] = now_ms() - t3;
    } else {
        rep.branch = "registered";
        search::AggregateConfig agg;
        agg.denoise = cfg.denoise;
        agg.tau_agg = cfg.tau_agg;
        agg.mask_saturation = cfg.mask_saturation;
        agg.saturation_threshold = cfg.saturation_threshold;
        agg.max_frames = cfg.frame_budget;
        agg.threads = cfg.threads;
        agg.search = sopt;
        try {
            search::AggregateOutcome out =
                search::aggregate_registered(query_frames, ref_fp, plan.ranges, agg);
            rep.registration = out.per_frame;
            double t3 = now_ms();
            rep.timing_ms["registration"] = t3 - t2;
            Fingerprint qry_fp = out.fingerprint;
            if (cfg.whiten_query) qry_fp = fingerprint::whiten(qry_fp);
            // aggregated fingerprint lives in the reference geometry already
            rep.match = search::match_search(ref_fp, qry_fp, ScaleGrid::single(1.0),
                                             CropSearch::around(0, 0, 8, 8), cfg.tau_match,
                                             sopt);
            rep.timing_ms["match_search"] = now_ms() - t3;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::no_registrable_frames) throw;
            rep.no_registrable = true;
            rep.match.decision = false;
            rep.match.threshold_used = cfg.tau_match;
            rep.timing_ms["registration"] = now_ms() - t2;
        }
    }
    rep.timing_ms["total"] = now_ms() - t0;
    return rep;
}

} // namespace

json PipelineConfig::echo() const {
    json j;
    j["denoise"] = {{"levels", denoise.levels},
                    {"sigma0_sq", denoise.sigma0_sq},
                    {"window_sizes", denoise.window_sizes},
                    {"filter_kind", denoise::filter_kind_name(denoise.filter_kind)}};
    j["profile"] = profile ? json::parse(geometry::profile_to_json_string(*profile))
                           : json(nullptr);
    j["blind"] = {{"scale", {blind.scale_lo, blind.scale_hi, blind.scale_step}},
                  {"rotation", {blind.rot_lo, blind.rot_hi, blind.rot_step}},
                  {"central_frac", blind.central_frac}};
    j["frame_budget"] = frame_budget;
    j["ref_budget"] = ref_budget;
    j["tau_match"] = tau_match;
    j["tau_agg"] = tau_agg;
    j["tau_stab"] = tau_stab;
    j["whiten_ref"] = whiten_ref;
    j["whiten_query"] = whiten_query;
    j["nbhd"] = nbhd;
    j["squared_pce"] = squared_pce;
    j["crop_half"] = crop_half;
    j["mask_saturation"] = mask_saturation;
    j["saturation_threshold"] = saturation_threshold;
    j["threads"] = threads;
    return j;
}

HsiReport run_hsi(const imagery::FrameSequence& ref_images,
                  const imagery::FrameSequence& query_frames, const PipelineConfig& cfg) {
    return run_common(ref_images, query_frames, cfg);
}

HsiReport run_linkage(const imagery::FrameSequence& ref_images,
                      const imagery::FrameSequence& query_frames, const PipelineConfig& cfg) {
    PipelineConfig c = cfg;
    c.profile.reset(); // both sides re-encoded: nominal geometry no longer applies
    c.whiten_ref = true;
    c.whiten_query = true;
    c.blind.scale_lo = std::max(0.05, cfg.blind.scale_lo - 0.10);
    c.blind.scale_hi = std::min(4.0, cfg.blind.scale_hi + 0.10);
    c.blind.central_frac = std::max(cfg.blind.central_frac, 0.35);
    return run_common(ref_images, query_frames, c);
}

PipelineConfig config_from_json(const json& j, PipelineConfig base) {
    PipelineConfig c = std::move(base);
    try {
        if (j.contains("denoise")) {
            const json& d = j.at("denoise");
            c.denoise.levels = d.value("levels", c.denoise.levels);
            c.denoise.sigma0_sq = d.value("sigma0_sq", c.denoise.sigma0_sq);
            if (d.contains("window_sizes"))
                c.denoise.window_sizes = d.at("window_sizes").get<std::vector<int>>();
            if (d.contains("filter_kind"))
                c.denoise.filter_kind =
                    denoise::filter_kind_from_name(d.at("filter_kind").get<std::string>());
        }
        if (j.contains("blind")) {
            const json& b = j.at("blind");
            if (b.contains("scale")) {
                c.blind.scale_lo = b.at("scale").at(0).get<double>();
                c.blind.scale_hi = b.at("scale").at(1).get<double>();
                if (b.at("scale").size() > 2) c.blind.scale_step = b.at("scale").at(2).get<double>();
            }
            if (b.contains("rotation")) {
                c.blind.rot_lo = b.at("rotation").at(0).get<double>();
                c.blind.rot_hi = b.at("rotation").at(1).get<double>();
                if (b.at("rotation").size() > 2) c.blind.rot_step = b.at("rotation").at(2).get<double>();
            }
            c.blind.central_frac = b.value("central_frac", c.blind.central_frac);
        }
        c.frame_budget = j.value("frame_budget", c.frame_budget);
        c.ref_budget = j.value("ref_budget", c.ref_budget);
        c.tau_match = j.value("tau_match", c.tau_match);
        c.tau_agg = j.value("tau_agg", c.tau_agg);
        c.tau_stab = j.value("tau_stab", c.tau_stab);
        c.whiten_ref = j.value("whiten_ref", c.whiten_ref);
        c.whiten_query = j.value("whiten_query", c.whiten_query);
        c.nbhd = j.value("nbhd", c.nbhd);
        c.squared_pce = j.value("squared_pce", c.squared_pce);
        c.crop_half = j.value("crop_half", c.crop_half);
        c.stab_region_half = j.value("stab_region_half", c.stab_region_half);
        c.mask_saturation = j.value("mask_saturation", c.mask_saturation);
        c.saturation_threshold = j.value("saturation_threshold", c.saturation_threshold);
        c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
        raise(ErrorKind::invalid_input, "config JSON error: " + std::string(e.what()));
    }
    if (c.frame_budget < 1) raise(ErrorKind::invalid_input, "frame_budget must be >= 1");
    if (c.tau_match <= 0 || c.tau_agg <= 0 || c.tau_stab <= 0)
        raise(ErrorKind::invalid_input, "thresholds must be positive");
    return c;
}

PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base) {
    std::ifstream f(path);
    if (!f) raise(ErrorKind::io, "cannot read config " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        raise(ErrorKind::invalid_input, "config JSON parse error: " + std::string(e.what()));
    }
    return config_from_json(j, std::move(base));
}

double round6(double v) {
    if (!std::isfinite(v)) return v;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::strtod(buf, nullptr);
}

json match_to_json(const MatchResult& m) {
    json j;
    j["p_stat"] = float6(m.infinite ? std::numeric_limits<double>::infinity() : m.p_stat);
    j["r_peak"] = float6(m.r_peak);
    j["s_peak"] = {m.s1_peak, m.s2_peak};
    j["crop_peak"] = {{"crop_x", m.s2_peak}, {"crop_y", m.s1_peak}};
    j["peak_rho"] = float6(m.peak_rho);
    j["infinite"] = m.infinite;
    j["decision"] = m.decision ? "match" : "no-match";
    j["threshold_used"] = float6(m.threshold_used);
    j["far_bound"] = float6(m.far_bound);
    j["k_tested"] = m.k_tested;
    json per = json::array();
    for (const auto& s : m.per_scale)
        per.push_back({{"r", float6(s.scale)},
                       {"pce", s.infinite ? json("inf") : float6(s.pce)},
                       {"shift", {s.s1, s.s2}}});
    j["per_scale"] = std::move(per);
    return j;
}

json stab_to_json(const search::StabilizationReport& s) {
    return {{"split_pce", float6(s.split_pce)},
            {"stabilized", s.stabilized},
            {"half_sizes", {s.half_n1, s.half_n2}}};
}

json registration_to_json(const search::RegistrationResult& r) {
    return {{"transform",
             {{"scale", float6(r.transform.scale)},
              {"rotation_deg", float6(r.transform.rotation_deg)},
              {"crop_x", r.transform.crop_x},
              {"crop_y", r.transform.crop_y}}},
            {"pce", float6(r.pce)},
            {"accepted", r.accepted}};
}

json report_to_json(const HsiReport& r) {
    json j;
    j["stabilization"] = stab_to_json(r.stabilization);
    j["branch"] = r.branch;
    j["match"] = match_to_json(r.match);
    j["frames_used"] = r.frames_used;
    j["ref_images_used"] = r.ref_images_used;
    if (!r.registration.empty()) {
        json arr = json::array();
        for (const auto& reg : r.registration) arr.push_back(registration_to_json(reg));
        j["registration"] = std::move(arr);
    }
    j["no_registrable_frames"] = r.no_registrable;
    json t;
    for (const auto& [k, v] : r.timing_ms) t[k] = v;
    j["timing"] = std::move(t);
    j["config_echo"] = r.config_echo;
    return j;
}

} // namespace hsi::pipeline
