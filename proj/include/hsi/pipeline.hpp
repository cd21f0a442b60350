#ifndef HSI_PIPELINE_HPP
#define HSI_PIPELINE_HPP

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "hsi/search.hpp"

namespace hsi::pipeline {

// Fallback parameter intervals when no device profile is supplied.
// The scale span covers the 0.38..1.0 range measured across the built-in
// presets; blind searches walk it at the fine step directly (a 0.05 coarse
// pass cannot see a PRNU peak at video resolutions).
struct BlindRanges {
    double scale_lo = 0.35, scale_hi = 1.05, scale_step = 0.005;
    double rot_lo = -2.0, rot_hi = 2.0, rot_step = 0.2;
    double central_frac = 0.25;
};

struct PipelineConfig {
    denoise::DenoiseConfig denoise;
    std::optional<geometry::DeviceProfile> profile;
    BlindRanges blind;
    int frame_budget = 100; // query frames used
    int ref_budget = 0;     // reference images used; 0 = all
    double tau_match = 50.0;
    double tau_agg = 38.0;
    double tau_stab = 50.0;
    bool whiten_ref = false;
    bool whiten_query = false;
    int nbhd = 11;
    bool squared_pce = true;
    int crop_half = 16;       // shift window half-size around a profile's crop
    int stab_region_half = 24;
    bool mask_saturation = true;
    double saturation_threshold = 250.0;
    int threads = 0;

    nlohmann::json echo() const;
};

struct HsiReport {
    search::StabilizationReport stabilization;
    std::string branch; // "direct" | "registered"
    search::MatchResult match;
    int frames_used = 0;
    int ref_images_used = 0;
    std::vector<search::RegistrationResult> registration; // registered branch
    bool no_registrable = false;
    std::map<std::string, double> timing_ms;
    nlohmann::json config_echo;
};

// Full hybrid flow: image reference -> stabilization check -> direct
// estimation or registration+aggregation -> match decision.
HsiReport run_hsi(const imagery::FrameSequence& ref_images,
                  const imagery::FrameSequence& query_frames, const PipelineConfig& cfg);

// Profile-linking variant for re-encoded content: blind ranges widened,
// whitening forced on both fingerprints, any profile ignored.
HsiReport run_linkage(const imagery::FrameSequence& ref_images,
                      const imagery::FrameSequence& query_frames, const PipelineConfig& cfg);

// PipelineConfig from its JSON representation (same field names as echo()).
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});
PipelineConfig load_config_file(const std::filesystem::path& path, PipelineConfig base = {});

// 6-significant-digit float for stable report bytes.
double round6(double v);

nlohmann::json match_to_json(const search::MatchResult& m);
nlohmann::json stab_to_json(const search::StabilizationReport& s);
nlohmann::json registration_to_json(const search::RegistrationResult& r);
nlohmann::json report_to_json(const HsiReport& r);

} // namespace hsi::pipeline

#endif
