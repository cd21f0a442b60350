#ifndef HSI_SIMULATOR_HPP
#define HSI_SIMULATOR_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsi/geometry.hpp"
#include "hsi/plane.hpp"

namespace hsi::sim {

// Per-frame stabilization jitter bounds. Crop offsets are drawn as integer
// pixels; rotation and scale deviation are continuous uniform.
struct JitterSpec {
    int max_shift_px = 8;
    double max_rot_deg = 0.5;
    double max_scale_dev = 0.01;
};

// Social-platform emulation: extra downscale followed by recompression.
struct SmpSpec {
    double scale = 0.5;
    int quality = 65;
};

enum class Scene { flat, texture, ramp };

// Scene behavior over a video: static content, or a slow pan across the
// sensor (content drifts a few pixels per frame, like a moving camera).
enum class SceneMotion { still, pan };

Scene scene_from_name(const std::string& name);
std::string scene_name(Scene s);
SceneMotion motion_from_name(const std::string& name);
std::string motion_name(SceneMotion m);

// A synthetic camera with known multiplicative pattern k_true and known
// image/video acquisition geometry.
struct SyntheticDevice {
    std::string id = "dev";
    uint64_t seed = 1;
    int sensor_w = 0, sensor_h = 0;
    double alpha = 0.05;          // PRNU strength
    double readout_sigma = 2.0;   // additive sensor noise, luminance units
    geometry::SimilarityTransform image_geometry; // identity: images = sensor
    int image_w = 0, image_h = 0;
    geometry::SimilarityTransform video_geometry;
    int video_w = 0, video_h = 0;
    std::optional<JitterSpec> jitter;
    std::optional<int> compression_quality; // 8x8 DCT quantizer, 1..100
    std::optional<SmpSpec> image_smp, video_smp;
    Plane k_true; // sensor_h x sensor_w, zero-mean unit-variance Gaussian
};

SyntheticDevice make_device(const std::string& id, uint64_t seed, int sensor_w, int sensor_h,
                            int video_w, int video_h,
                            const geometry::SimilarityTransform& video_geometry,
                            std::optional<JitterSpec> jitter = std::nullopt,
                            double alpha = 0.05, double readout_sigma = 2.0);

// Informed-search preset equivalent to this device's geometry.
geometry::DeviceProfile device_profile(const SyntheticDevice& dev);

// Deterministic scene generator (pure function of the rng stream).
Plane scene_plane(Scene scene, int rows, int cols, uint64_t seed);

// One still image: clip(scene * (1 + alpha K) + readout), image geometry,
// optional compression, optional SMP re-encode.
Plane synth_image(const SyntheticDevice& dev, Scene scene, uint64_t image_seed);

// Video frames plus the ground-truth per-frame sensor->frame transforms.
std::vector<Plane> synth_video(const SyntheticDevice& dev, int n_frames, Scene scene,
                               uint64_t video_seed,
                               std::vector<geometry::SimilarityTransform>* truths = nullptr,
                               SceneMotion motion = SceneMotion::still);

// Simple 8x8 DCT quantization (JPEG-style luminance table at `quality`);
// reproduces compression damage to the pattern without a codec.
Plane dct_quantize(const Plane& p, int quality);

// Renders the dataset described by a spec JSON into out_dir and returns the
// manifest (also written to out_dir/manifest.json). Deterministic.
nlohmann::json generate_dataset(const nlohmann::json& spec,
                                const std::filesystem::path& out_dir);
nlohmann::json generate_dataset_file(const std::filesystem::path& spec_file,
                                     const std::filesystem::path& out_dir);

} // namespace hsi::sim

#endif
