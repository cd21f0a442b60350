#ifndef HSI_GEOMETRY_HPP
#define HSI_GEOMETRY_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "hsi/plane.hpp"

namespace hsi::geometry {

// Similarity transform linking two sensor-pattern geometries, applied in the
// fixed order: scale, then rotate (CCW degrees), then crop at (crop_x, crop_y)
// = (column, row) offsets of the output window's upper-left corner. Negative
// offsets place the window partly outside the source (zero-filled).
struct SimilarityTransform {
    double scale = 1.0;
    double rotation_deg = 0.0;
    int crop_x = 0;
    int crop_y = 0;

    bool identity() const {
        return scale == 1.0 && rotation_deg == 0.0 && crop_x == 0 && crop_y == 0;
    }
    void validate() const;
};

struct ParamRange {
    double lo = 0.0, hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
    double width() const { return hi - lo; }
    ParamRange widened(double frac) const {
        double w = width() * frac;
        return {lo - w, hi + w};
    }
};

// Per-model geometry preset: default image/video resolutions and the
// transform parameters linking the image-domain pattern to the video domain.
struct DeviceProfile {
    std::string id;
    std::string model;
    int image_w = 0, image_h = 0;
    int video_w = 0, video_h = 0;
    bool stabilized = false;
    SimilarityTransform nominal;
    ParamRange scale_range, rotation_range;
    ParamRange crop_x_range, crop_y_range;
};

// Bicubic resampling; output dims = round(input dims * scale), scale in (0,4].
Plane resample(const Plane& p, double scale);

// Bicubic resampling to explicit output dimensions.
Plane resample_to(const Plane& p, int out_rows, int out_cols);

// Bilinear rotation about the plane center, same dims; pixels that sample
// outside the source are 0 and flagged 0 in *mask. |deg| <= 45.
Plane rotate(const Plane& p, double deg, Plane* mask = nullptr);

// Window extraction at column offset crop_x, row offset crop_y; out-of-source
// regions are zero-filled and flagged 0 in *mask.
Plane apply_crop(const Plane& p, int crop_x, int crop_y, int out_rows, int out_cols,
                 Plane* mask = nullptr);

// scale -> rotate -> crop composition with a combined validity mask.
Plane apply_transform(const Plane& p, const SimilarityTransform& t, int out_rows,
                      int out_cols, Plane* mask = nullptr);

// Inverse warp: resamples a frame-geometry plane back onto the reference
// geometry that `t` maps into frame space (single-pass bilinear, so no
// compounded interpolation). mask = 1 where the sample came from inside the
// frame.
Plane warp_to_reference(const Plane& frame, const SimilarityTransform& t, int ref_rows,
                        int ref_cols, Plane* mask = nullptr);

// The 18 built-in device presets.
const std::vector<DeviceProfile>& builtin_profiles();

const DeviceProfile* find_profile(const std::string& id);

std::vector<DeviceProfile> profiles_from_json(const std::filesystem::path& path);
std::string profiles_to_json(const std::vector<DeviceProfile>& profiles);
std::string profile_to_json_string(const DeviceProfile& profile);

} // namespace hsi::geometry

#endif
