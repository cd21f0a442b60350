#ifndef HSI_SEARCH_HPP
#define HSI_SEARCH_HPP

#include <optional>
#include <string>
#include <vector>

#include "hsi/correlate.hpp"
#include "hsi/fingerprint.hpp"
#include "hsi/geometry.hpp"
#include "hsi/imagery.hpp"

namespace hsi::search {

// Ordered candidate scaling factors, optionally refined by a second stage
// around the first-stage argmax.
struct ScaleGrid {
    std::vector<double> values; // strictly increasing, in (0,4]
    struct Refinement {
        double fine_step = 0.005;
        double half_width = 0.05;
    };
    std::optional<Refinement> refinement;

    static ScaleGrid single(double r);
    static ScaleGrid range(double lo, double hi, double step);
    // coarse pass over [lo,hi] at coarse_step, then fine_step within
    // +-half_width of the coarse argmax
    static ScaleGrid two_stage(double lo, double hi, double coarse_step = 0.05,
                               double fine_step = 0.005, double half_width = 0.05);
    void validate() const;
};

// How the admissible crop-shift set is derived for each candidate scale.
struct CropSearch {
    enum class Mode { central, around, fixed };
    Mode mode = Mode::central;
    double central_frac = 0.25;          // central mode
    int cx = 0, cy = 0, half_x = 8, half_y = 8; // around mode
    correlate::ShiftRegion fixed_region; // fixed mode

    static CropSearch central(double frac = 0.25);
    static CropSearch around(int crop_x, int crop_y, int half_x, int half_y);
    static CropSearch fixed(const correlate::ShiftRegion& r);

    correlate::ShiftRegion resolve(int qry_rows, int qry_cols, int ref_rows,
                                   int ref_cols) const;
};

struct SearchOptions {
    int nbhd = 11;
    bool squared_pce = true;
    int threads = 0;
};

struct ScaleSample {
    double scale = 0.0;
    double pce = 0.0;
    double peak_rho = 0.0;
    int s1 = 0, s2 = 0;
    bool infinite = false;
};

struct MatchResult {
    double p_stat = 0.0;           // max PCE over the grid
    double r_peak = 1.0;           // argmax scale
    int s1_peak = 0, s2_peak = 0;  // peak shift (row, col) = (crop_y, crop_x)
    double peak_rho = 0.0;
    bool infinite = false;
    std::vector<ScaleSample> per_scale;
    bool decision = false; // match iff p_stat > tau and peak_rho > 0
    double threshold_used = 0.0;
    double far_bound = 1.0;
    long long k_tested = 0;
};

// PCE-maximizing search over candidate scales of the reference against the
// query; the crop offset is read off the NCC peak at each scale.
MatchResult match_search(const fingerprint::Fingerprint& ref,
                         const fingerprint::Fingerprint& qry, const ScaleGrid& grid,
                         const CropSearch& crop, double tau,
                         const SearchOptions& opt = {});

// Analytic false-alarm upper bound 1 - (1 - Q(sqrt(tau)))^k for a search over
// k parameter cells; Q is the upper tail of N(0,1).
double far_bound(double tau, long long k);

struct StabDetectConfig {
    denoise::DenoiseConfig denoise;
    double tau_stab = 50.0;
    int region_half = 24; // shift window for background energy
    int nbhd = 11;
    int max_frames = 0;
    int threads = 0;
};

struct StabilizationReport {
    double split_pce = 0.0;
    bool stabilized = false;
    int half_n1 = 0, half_n2 = 0;
};

// Even/odd frame split; fingerprints of the halves compared by PCE at the
// forced shift (0,0) (no geometric search). Low PCE exposes stabilization.
StabilizationReport detect_stabilization(const imagery::FrameSequence& frames,
                                         const StabDetectConfig& cfg);

// Per-parameter search intervals for registering one frame on the reference.
struct ParamRanges {
    double scale_lo = 1.0, scale_hi = 1.0, scale_step = 0.005;
    double rot_lo = 0.0, rot_hi = 0.0, rot_step = 0.2;
    correlate::ShiftRegion crop;

    std::vector<double> scale_values() const;
    std::vector<double> rotation_values() const;
    void validate() const;
};

// Search defaults for a device profile: printed ranges widened by 20% of
// their width, crop window padded by `crop_margin` pixels.
ParamRanges ranges_from_profile(const geometry::DeviceProfile& p, double widen_frac = 0.2,
                                int crop_margin = 4);

struct RegistrationResult {
    geometry::SimilarityTransform transform;
    double pce = 0.0;
    double peak_rho = 0.0;
    bool accepted = false; // pce > tau_agg
};

// Grid search over (scale, rotation); translation resolved by the NCC peak.
// Ties break to smaller scale, then smaller |rotation|, then lexicographic
// shift.
RegistrationResult register_frame(const Plane& residual, const fingerprint::Fingerprint& ref,
                                  const ParamRanges& ranges, double tau_agg,
                                  const SearchOptions& opt = {});

struct AggregateConfig {
    denoise::DenoiseConfig denoise;
    double tau_agg = 38.0;
    double eps = 1.0;
    bool mask_saturation = true;
    double saturation_threshold = 250.0;
    int max_frames = 0;
    int threads = 0;
    SearchOptions search;
};

struct AggregateOutcome {
    fingerprint::Fingerprint fingerprint; // in the reference geometry
    std::vector<RegistrationResult> per_frame;
    int accepted = 0;
};

// Registers every frame on the reference, warps accepted residuals (and
// intensities) back into the reference geometry with validity masks, and
// accumulates them per the MLE. Throws no_registrable_frames if nothing
// passes tau_agg.
AggregateOutcome aggregate_registered(const imagery::FrameSequence& frames,
                                      const fingerprint::Fingerprint& ref,
                                      const ParamRanges& ranges,
                                      const AggregateConfig& cfg);

} // namespace hsi::search

#endif
