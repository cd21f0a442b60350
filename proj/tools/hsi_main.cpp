// hsi - hybrid sensor-pattern-noise source identification CLI.
//
// Exit codes: 0 match/success, 1 principled negative (no-match, not
// registrable), 2 usage or input error, 3 internal error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsi/pipeline.hpp"
#include "hsi/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_report(const json& j, const std::string& path) {
    std::string text = j.dump(2) + "\n";
    if (path.empty() || path == "-") {
        std::fputs(text.c_str(), stdout);
        return;
    }
    std::ofstream f(path);
    if (!f) hsi::raise(hsi::ErrorKind::io, "cannot write report to " + path);
    f << text;
}

hsi::geometry::DeviceProfile resolve_profile(const std::string& id,
                                             const std::string& file) {
    if (!file.empty()) {
        auto profiles = hsi::geometry::profiles_from_json(file);
        if (id.empty()) {
            if (profiles.size() != 1)
                hsi::raise(hsi::ErrorKind::invalid_input,
                           "profile file holds several profiles; pass --profile ID");
            return profiles[0];
        }
        for (const auto& p : profiles)
            if (p.id == id) return p;
        hsi::raise(hsi::ErrorKind::invalid_input,
                   "profile '" + id + "' not found in " + file);
    }
    const hsi::geometry::DeviceProfile* p = hsi::geometry::find_profile(id);
    if (!p) {
        std::string known;
        for (const auto& bp : hsi::geometry::builtin_profiles())
            known += (known.empty() ? "" : ", ") + bp.id;
        hsi::raise(hsi::ErrorKind::invalid_input,
                   "unknown profile id '" + id + "' (known: " + known + ")");
    }
    return *p;
}

// Pre-decoded frames are the normal input; --decode-cmd is a convenience that
// shells out to a user-supplied decoder template when the query is a file.
fs::path maybe_decode(const fs::path& input, const std::string& decode_cmd,
                      const fs::path& workdir) {
    if (fs::is_directory(input) || decode_cmd.empty()) return input;
    fs::path outdir = workdir / "decoded_frames";
    fs::create_directories(outdir);
    std::string cmd = decode_cmd;
    auto replace_all = [&](const std::string& from, const std::string& to) {
        for (size_t pos = 0; (pos = cmd.find(from, pos)) != std::string::npos; pos += to.size())
            cmd.replace(pos, from.size(), to);
    };
    replace_all("{input}", input.string());
    replace_all("{outdir}", outdir.string());
    int rc = std::system(cmd.c_str());
    if (rc != 0)
        hsi::raise(hsi::ErrorKind::decode,
                   "decoder command failed (" + std::to_string(rc) + "): " + cmd);
    return outdir;
}

json fingerprint_summary(const hsi::fingerprint::Fingerprint& fp) {
    return {{"rows", fp.plane.rows},
            {"cols", fp.plane.cols},
            {"num_inputs", fp.num_inputs},
            {"source_kind", hsi::fingerprint::source_kind_name(fp.source_kind)},
            {"whitened", fp.whitened()}};
}

struct CommonArgs {
    int threads = 0;
    std::string report_path;
    std::string config_path;
};

hsi::pipeline::PipelineConfig make_config(const CommonArgs& args) {
    hsi::pipeline::PipelineConfig cfg;
    if (!args.config_path.empty()) cfg = hsi::pipeline::load_config_file(args.config_path, cfg);
    cfg.threads = args.threads;
    return cfg;
}

int cmd_fingerprint(const CommonArgs& common, const std::string& images_dir,
                    const std::string& out_path, bool video, bool whiten_flag, int frames) {
    auto t0 = std::chrono::steady_clock::now();
    hsi::pipeline::PipelineConfig cfg = make_config(common);
    auto seq = hsi::imagery::open_sequence(images_dir);
    hsi::fingerprint::EstimateOptions opt;
    opt.kind = video ? hsi::fingerprint::SourceKind::video_frames
                     : hsi::fingerprint::SourceKind::still_images;
    opt.whiten = whiten_flag;
    opt.max_frames = frames;
    opt.threads = cfg.threads;
    opt.mask_saturation = cfg.mask_saturation;
    opt.saturation_threshold = cfg.saturation_threshold;
    auto fp = hsi::fingerprint::estimate_from_frames(seq, cfg.denoise, opt);
    hsi::fingerprint::save(fp, out_path);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    json rep;
    rep["command"] = "fingerprint";
    rep["images"] = images_dir;
    rep["out"] = out_path;
    rep["fingerprint"] = fingerprint_summary(fp);
    rep["timing"] = {{"total", ms}};
    rep["config_echo"] = cfg.echo();
    write_report(rep, common.report_path);
    return 0;
}

int cmd_match(const CommonArgs& common, const std::string& ref_path,
              const std::string& qry_path, const std::string& profile_id,
              const std::string& profile_file, double tau, const std::string& scale_spec,
              double central_frac, bool unsquared, const std::string& dump_surface) {
    hsi::pipeline::PipelineConfig cfg = make_config(common);
    auto ref = hsi::fingerprint::load(ref_path);
    auto qry = hsi::fingerprint::load(qry_path);

    hsi::search::ScaleGrid grid = hsi::search::ScaleGrid::single(1.0);
    hsi::search::CropSearch crop = hsi::search::CropSearch::central(central_frac);
    if (!profile_id.empty() || !profile_file.empty()) {
        auto prof = resolve_profile(profile_id, profile_file);
        auto r = prof.scale_range.widened(0.2);
        grid = hsi::search::ScaleGrid::range(std::max(1e-3, r.lo - 0.01),
                                             std::min(4.0, r.hi + 0.01), 0.005);
        crop = hsi::search::CropSearch::around(prof.nominal.crop_x, prof.nominal.crop_y,
                                               cfg.crop_half, cfg.crop_half);
    } else if (!scale_spec.empty()) {
        double lo = 0, hi = 0, step = cfg.blind.scale_step;
        int n = std::sscanf(scale_spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step);
        if (n == 1)
            grid = hsi::search::ScaleGrid::single(lo);
        else if (n >= 2)
            grid = hsi::search::ScaleGrid::range(lo, hi, step);
        else
            hsi::raise(hsi::ErrorKind::invalid_input,
                       "bad --scale spec (expected R or LO:HI[:STEP]): " + scale_spec);
    } else {
        grid = hsi::search::ScaleGrid::range(cfg.blind.scale_lo, cfg.blind.scale_hi,
                                             cfg.blind.scale_step);
    }

    hsi::search::SearchOptions sopt;
    sopt.nbhd = cfg.nbhd;
    sopt.squared_pce = !unsquared;
    sopt.threads = cfg.threads;
    auto t0 = std::chrono::steady_clock::now();
    auto m = hsi::search::match_search(ref, qry, grid, crop, tau, sopt);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();

    if (!dump_surface.empty()) {
        // best-scale surface as an 8-bit heatmap, rho in [-1,1] -> [0,255]
        hsi::Plane scaled = hsi::geometry::resample(ref.plane, m.r_peak);
        auto region = crop.resolve(qry.plane.rows, qry.plane.cols, scaled.rows, scaled.cols);
        auto surf = hsi::correlate::ncc_surface(qry.plane, scaled, region);
        hsi::Plane img(surf.plane.rows, surf.plane.cols);
        for (size_t i = 0; i < img.size(); ++i)
            img.data[i] = float(127.5 + 127.5 * std::clamp(double(surf.plane.data[i]), -1.0, 1.0));
        hsi::imagery::save_pgm8(img, dump_surface);
    }

    json rep;
    rep["command"] = "match";
    rep["ref"] = ref_path;
    rep["query"] = qry_path;
    rep["match"] = hsi::pipeline::match_to_json(m);
    rep["timing"] = {{"total", ms}};
    rep["config_echo"] = cfg.echo();
    write_report(rep, common.report_path);
    return m.decision ? 0 : 1;
}

int cmd_detect_stab(const CommonArgs& common, const std::string& frames_dir, double tau,
                    int budget, const std::string& decode_cmd) {
    hsi::pipeline::PipelineConfig cfg = make_config(common);
    fs::path dir = maybe_decode(frames_dir, decode_cmd, fs::temp_directory_path());
    auto seq = hsi::imagery::open_sequence(dir);
    hsi::search::StabDetectConfig sdc;
    sdc.denoise = cfg.denoise;
    sdc.tau_stab = tau;
    sdc.region_half = cfg.stab_region_half;
    sdc.nbhd = cfg.nbhd;
    sdc.max_frames = budget;
    sdc.threads = cfg.threads;
    auto rep = hsi::search::detect_stabilization(seq, sdc);
    json out;
    out["command"] = "detect-stab";
    out["frames"] = frames_dir;
    out["stabilization"] = hsi::pipeline::stab_to_json(rep);
    out["config_echo"] = cfg.echo();
    write_report(out, common.report_path);
    return 0;
}

int cmd_register(const CommonArgs& common, const std::string& frame_path,
                 const std::string& ref_path, const std::string& profile_id,
                 const std::string& profile_file, double tau_agg) {
    hsi::pipeline::PipelineConfig cfg = make_config(common);
    auto ref = hsi::fingerprint::load(ref_path);
    auto prof = resolve_profile(profile_id, profile_file);
    auto ranges = hsi::search::ranges_from_profile(prof);
    auto img = hsi::imagery::load_luma(frame_path);
    auto residual = hsi::denoise::noise_residual(img, cfg.denoise);
    hsi::search::SearchOptions sopt;
    sopt.nbhd = cfg.nbhd;
    sopt.threads = cfg.threads;
    auto reg = hsi::search::register_frame(residual, ref, ranges, tau_agg, sopt);
    json out;
    out["command"] = "register";
    out["frame"] = frame_path;
    out["ref"] = ref_path;
    out["registration"] = hsi::pipeline::registration_to_json(reg);
    out["config_echo"] = cfg.echo();
    write_report(out, common.report_path);
    return reg.accepted ? 0 : 1;
}

int cmd_pipeline(const CommonArgs& common, bool linkage, const std::string& ref_dir,
                 const std::string& qry_dir, const std::string& profile_id,
                 const std::string& profile_file, double tau, int frames, int ref_budget,
                 bool whiten_ref, bool whiten_query, const std::string& decode_cmd) {
    hsi::pipeline::PipelineConfig cfg = make_config(common);
    if (tau > 0) cfg.tau_match = tau;
    if (frames > 0) cfg.frame_budget = frames;
    if (ref_budget > 0) cfg.ref_budget = ref_budget;
    if (whiten_ref) cfg.whiten_ref = true;
    if (whiten_query) cfg.whiten_query = true;
    if (!profile_id.empty() || !profile_file.empty())
        cfg.profile = resolve_profile(profile_id, profile_file);

    auto ref_seq = hsi::imagery::open_sequence(ref_dir);
    fs::path qdir = maybe_decode(qry_dir, decode_cmd, fs::temp_directory_path());
    auto qry_seq = hsi::imagery::open_sequence(qdir);

    auto rep = linkage ? hsi::pipeline::run_linkage(ref_seq, qry_seq, cfg)
                       : hsi::pipeline::run_hsi(ref_seq, qry_seq, cfg);
    json out;
    out["command"] = linkage ? "link" : "hsi";
    out["ref_images"] = ref_dir;
    out["query_frames"] = qry_dir;
    out.update(hsi::pipeline::report_to_json(rep));
    write_report(out, common.report_path);
    return rep.match.decision ? 0 : 1;
}

int cmd_simulate(const CommonArgs& common, const std::string& spec_path,
                 const std::string& out_dir) {
    json manifest = hsi::sim::generate_dataset_file(spec_path, out_dir);
    json rep;
    rep["command"] = "simulate";
    rep["spec"] = spec_path;
    rep["out"] = out_dir;
    rep["devices"] = manifest.at("devices").size();
    rep["manifest"] = (fs::path(out_dir) / "manifest.json").string();
    write_report(rep, common.report_path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid sensor-pattern-noise source identification toolkit"};
    app.require_subcommand(1);

    CommonArgs common;
    app.add_option("--threads", common.threads, "worker threads (0 = all cores)");

    // fingerprint
    auto* sc_fp = app.add_subcommand("fingerprint", "estimate a fingerprint from a directory");
    std::string fp_images, fp_out;
    bool fp_video = false, fp_whiten = false;
    int fp_frames = 0;
    sc_fp->add_option("--images", fp_images, "directory of images/frames")->required();
    sc_fp->add_option("--out", fp_out, "output fingerprint file")->required();
    sc_fp->add_flag("--video", fp_video, "inputs are video frames");
    sc_fp->add_flag("--whiten", fp_whiten, "whiten the fingerprint");
    sc_fp->add_option("--frames", fp_frames, "use at most N inputs");
    sc_fp->add_option("--report", common.report_path, "report JSON path (default stdout)");
    sc_fp->add_option("--config", common.config_path, "pipeline config JSON");

    // match
    auto* sc_match = app.add_subcommand("match", "match two fingerprint files");
    std::string m_ref, m_qry, m_profile, m_profile_file, m_scale, m_dump;
    double m_tau = 50.0, m_frac = 0.25;
    bool m_unsq = false;
    sc_match->add_option("--ref", m_ref, "reference fingerprint")->required();
    sc_match->add_option("--query", m_qry, "query fingerprint")->required();
    sc_match->add_option("--profile", m_profile, "built-in device profile id");
    sc_match->add_option("--profile-file", m_profile_file, "profile JSON file");
    sc_match->add_option("--tau", m_tau, "decision threshold");
    sc_match->add_option("--scale", m_scale, "scale grid: R or LO:HI[:STEP]");
    sc_match->add_option("--central-frac", m_frac, "central crop window fraction");
    sc_match->add_flag("--pce-unsquared", m_unsq, "literal unsquared PCE variant");
    sc_match->add_option("--dump-surface", m_dump, "write best-scale NCC surface as PGM");
    sc_match->add_option("--report", common.report_path, "report JSON path");
    sc_match->add_option("--config", common.config_path, "pipeline config JSON");

    // detect-stab
    auto* sc_stab = app.add_subcommand("detect-stab", "detect in-camera stabilization");
    std::string s_frames, s_decode;
    double s_tau = 50.0;
    int s_budget = 0;
    sc_stab->add_option("--frames", s_frames, "directory of decoded frames")->required();
    sc_stab->add_option("--tau", s_tau, "stabilization PCE threshold");
    sc_stab->add_option("--budget", s_budget, "use at most N frames");
    sc_stab->add_option("--decode-cmd", s_decode,
                        "external decoder template with {input} {outdir}");
    sc_stab->add_option("--report", common.report_path, "report JSON path");
    sc_stab->add_option("--config", common.config_path, "pipeline config JSON");

    // register
    auto* sc_reg = app.add_subcommand("register", "register one frame on a reference");
    std::string r_frame, r_ref, r_profile, r_profile_file;
    double r_tau = 38.0;
    sc_reg->add_option("--frame", r_frame, "frame image")->required();
    sc_reg->add_option("--ref", r_ref, "reference fingerprint")->required();
    sc_reg->add_option("--profile", r_profile, "device profile id");
    sc_reg->add_option("--profile-file", r_profile_file, "profile JSON file");
    sc_reg->add_option("--tau", r_tau, "acceptance threshold");
    sc_reg->add_option("--report", common.report_path, "report JSON path");
    sc_reg->add_option("--config", common.config_path, "pipeline config JSON");

    // hsi / link
    std::string h_ref, h_qry, h_profile, h_profile_file, h_decode;
    double h_tau = 0.0;
    int h_frames = 0, h_refb = 0;
    bool h_wref = false, h_wqry = false;
    auto add_pipeline_opts = [&](CLI::App* sc) {
        sc->add_option("--ref-images", h_ref, "directory of reference images")->required();
        sc->add_option("--query-frames", h_qry, "directory of query frames")->required();
        sc->add_option("--profile", h_profile, "device profile id");
        sc->add_option("--profile-file", h_profile_file, "profile JSON file");
        sc->add_option("--tau", h_tau, "match threshold (default 50)");
        sc->add_option("--frames", h_frames, "query frame budget");
        sc->add_option("--ref-budget", h_refb, "reference image budget");
        sc->add_flag("--whiten-ref", h_wref, "whiten the reference fingerprint");
        sc->add_flag("--whiten-query", h_wqry, "whiten the query fingerprint");
        sc->add_option("--decode-cmd", h_decode,
                       "external decoder template with {input} {outdir}");
        sc->add_option("--report", common.report_path, "report JSON path");
        sc->add_option("--config", common.config_path, "pipeline config JSON");
    };
    auto* sc_hsi = app.add_subcommand("hsi", "full hybrid source identification run");
    add_pipeline_opts(sc_hsi);
    auto* sc_link = app.add_subcommand("link", "profile linking for re-encoded content");
    add_pipeline_opts(sc_link);

    // simulate
    auto* sc_sim = app.add_subcommand("simulate", "render a synthetic dataset");
    std::string sim_spec, sim_out;
    sc_sim->add_option("--spec", sim_spec, "dataset spec JSON")->required();
    sc_sim->add_option("--out", sim_out, "output directory")->required();
    sc_sim->add_option("--report", common.report_path, "report JSON path");

    // profiles
    auto* sc_prof = app.add_subcommand("profiles", "dump the built-in device presets");
    std::string prof_out;
    sc_prof->add_option("--out", prof_out, "write to file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sc_fp->parsed())
            return cmd_fingerprint(common, fp_images, fp_out, fp_video, fp_whiten, fp_frames);
        if (sc_match->parsed())
            return cmd_match(common, m_ref, m_qry, m_profile, m_profile_file, m_tau, m_scale,
                             m_frac, m_unsq, m_dump);
        if (sc_stab->parsed())
            return cmd_detect_stab(common, s_frames, s_tau, s_budget, s_decode);
        if (sc_reg->parsed())
            return cmd_register(common, r_frame, r_ref, r_profile, r_profile_file, r_tau);
        if (sc_hsi->parsed())
            return cmd_pipeline(common, false, h_ref, h_qry, h_profile, h_profile_file, h_tau,
                                h_frames, h_refb, h_wref, h_wqry, h_decode);
        if (sc_link->parsed())
            return cmd_pipeline(common, true, h_ref, h_qry, h_profile, h_profile_file, h_tau,
                                h_frames, h_refb, h_wref, h_wqry, h_decode);
        if (sc_sim->parsed()) return cmd_simulate(common, sim_spec, sim_out);
        if (sc_prof->parsed()) {
            std::string text = hsi::geometry::profiles_to_json(hsi::geometry::builtin_profiles());
            if (prof_out.empty()) {
                std::fputs((text + "\n").c_str(), stdout);
            } else {
                std::ofstream f(prof_out);
                f << text << "\n";
            }
            return 0;
        }
    } catch (const hsi::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.is_input_error() ? 2 : 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    }
    return 2;
}
