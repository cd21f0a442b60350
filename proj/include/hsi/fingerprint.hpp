#ifndef HSI_FINGERPRINT_HPP
#define HSI_FINGERPRINT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hsi/denoise.hpp"
#include "hsi/geometry.hpp"
#include "hsi/imagery.hpp"
#include "hsi/plane.hpp"

namespace hsi::fingerprint {

enum class SourceKind : uint8_t {
    still_images = 0,
    video_frames = 1,
    registered_frames = 2,
};

std::string source_kind_name(SourceKind k);

// Postprocess flag bits persisted in the fingerprint file.
constexpr uint8_t kPostWhitened = 0x01;
constexpr uint8_t kPostDegenerate = 0x02; // whiten hit an all-zero plane

// Sensor-pattern estimate with provenance. The plane is the dimensionless
// multiplicative noise term; values are stored as f32.
struct Fingerprint {
    Plane plane;
    uint32_t num_inputs = 0;
    SourceKind source_kind = SourceKind::still_images;
    denoise::DenoiseConfig denoise_cfg;
    uint8_t postprocess = 0;
    std::optional<geometry::SimilarityTransform> geometry_note;

    bool whitened() const { return postprocess & kPostWhitened; }
};

// Running sums of the maximum-likelihood estimator:
// numerator = sum W*I, denominator = sum I^2 (optionally masked per pixel).
struct Accumulator {
    int rows = 0, cols = 0;
    std::vector<double> numerator;
    std::vector<double> denominator;
    uint32_t count = 0;

    Accumulator() = default;
    Accumulator(int r, int c)
        : rows(r), cols(c), numerator(size_t(r) * c, 0.0), denominator(size_t(r) * c, 0.0) {}
    bool empty() const { return count == 0; }
};

void accumulate(Accumulator& acc, const Plane& img, const Plane& residual,
                const Plane* mask = nullptr);

// Pairwise combination of disjoint accumulations; commutative sums, so the
// fixed chunk order below keeps results bit-reproducible under parallelism.
void merge(Accumulator& into, const Accumulator& other);

Fingerprint finalize(const Accumulator& acc, double eps = 1.0,
                     SourceKind kind = SourceKind::still_images,
                     const denoise::DenoiseConfig& cfg = {});

// Zero-means rows and columns, flattens the spectrum magnitude, and
// normalizes to unit variance. Suppresses non-PRNU periodic artifacts.
Fingerprint whiten(const Fingerprint& fp);

void save(const Fingerprint& fp, const std::filesystem::path& path);
Fingerprint load(const std::filesystem::path& path);

struct EstimateOptions {
    double eps = 1.0;
    bool mask_saturation = true;
    double saturation_threshold = 250.0;
    bool whiten = false;
    SourceKind kind = SourceKind::still_images;
    int max_frames = 0; // 0 = all
    int threads = 0;    // 0 = hardware
};

// Residual extraction + MLE accumulation over a frame sequence. Frames are
// denoised in parallel but reduced in fixed 16-frame chunks, so the result is
// identical for any thread count.
Fingerprint estimate_from_frames(const imagery::FrameSequence& frames,
                                 const denoise::DenoiseConfig& cfg,
                                 const EstimateOptions& opt = {});

} // namespace hsi::fingerprint

#endif
