#ifndef HSI_IMAGERY_HPP
#define HSI_IMAGERY_HPP

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hsi/plane.hpp"

namespace hsi::imagery {

// Supported raster formats: PNG, JPEG, PGM/PPM (8- and 16-bit).
bool is_supported_raster(const std::filesystem::path& p);

// Luminance plane in [0,255]. Color inputs use ITU-R 601 weights
// (0.299 R + 0.587 G + 0.114 B), grayscale passes through, 16-bit samples
// are rescaled by 255/65535.
Plane load_luma(const std::filesystem::path& path);

// All channels in [0,255]: size 1 (grayscale) or 3 (R,G,B). Used by the
// per-channel residual path; load_luma is the weighted combination of these.
std::vector<Plane> load_channels(const std::filesystem::path& path);

// Header-only dimension probe (no full decode). Returns {rows, cols}.
std::pair<int, int> peek_dims(const std::filesystem::path& path);

// mask = 0 where img >= threshold, else 1. threshold in (0,255].
Plane saturation_mask(const Plane& img, double threshold = 250.0);

// Writers (used by the simulator/dataset tooling and tests).
void save_pgm16(const Plane& p, const std::filesystem::path& path); // 0..255 -> u16 be
void save_pgm8(const Plane& p, const std::filesystem::path& path);  // rounded/clipped u8
void save_png_gray8(const Plane& p, const std::filesystem::path& path);
void save_png_rgb8(const Plane& r, const Plane& g, const Plane& b,
                   const std::filesystem::path& path);

// Directory of decoded frames, ordered lexicographically by filename.
// All frames must share dimensions (validated from headers at open time).
class FrameSequence {
public:
    static FrameSequence from_directory(const std::filesystem::path& dir);
    static FrameSequence from_planes(std::vector<Plane> planes);

    int count() const;
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    Plane frame(int index) const; // decoded on demand for directory sources
    std::string frame_name(int index) const;
    const std::filesystem::path& source() const { return dir_; }

private:
    FrameSequence() = default;
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> files_;
    std::shared_ptr<const std::vector<Plane>> planes_; // in-memory source
    int rows_ = 0, cols_ = 0;
};

inline FrameSequence open_sequence(const std::filesystem::path& dir) {
    return FrameSequence::from_directory(dir);
}

} // namespace hsi::imagery

#endif
