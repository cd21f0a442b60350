#ifndef HSI_CORRELATE_HPP
#define HSI_CORRELATE_HPP

#include <limits>

#include "hsi/plane.hpp"

namespace hsi::correlate {

// Inclusive rectangular set of spatial shifts (s1 = row shift, s2 = col
// shift). A positive peak at (s1,s2) means X matches the content of Y at
// offset (s1,s2), i.e. X is the crop of Y whose upper-left corner sits at
// row s1, column s2 of Y. Negative shifts are legal (video FOV wider than
// the image, e.g. the -160 px crop of the C9 preset).
struct ShiftRegion {
    int s1_min = 0, s1_max = 0;
    int s2_min = 0, s2_max = 0;

    int rows() const { return s1_max - s1_min + 1; }
    int cols() const { return s2_max - s2_min + 1; }
    long long cells() const { return (long long)rows() * cols(); }
    bool contains(int s1, int s2) const {
        return s1 >= s1_min && s1 <= s1_max && s2 >= s2_min && s2 <= s2_max;
    }
    static ShiftRegion single(int s1, int s2) { return {s1, s1, s2, s2}; }
    static ShiftRegion centered(int c1, int c2, int half1, int half2) {
        return {c1 - half1, c1 + half1, c2 - half2, c2 + half2};
    }
};

// Central-or-near-central crop window: centered on the offset that would make
// X a centered crop of Y, extended by frac of Y's size in each direction.
ShiftRegion central_crop_region(int x_rows, int x_cols, int y_rows, int y_cols,
                                double frac = 0.25);

struct CorrelationSurface {
    Plane plane;        // rho values, row (s1 - region.s1_min), col (s2 - region.s2_min)
    ShiftRegion region;

    double rho(int s1, int s2) const {
        return plane.at(s1 - region.s1_min, s2 - region.s2_min);
    }
};

// Normalized cross-correlation over the given shifts. Global means are
// subtracted and global norms divide; dimension mismatches are handled by
// zero padding the smaller plane down-right. FFT-evaluated; agrees with the
// direct double-loop formula to better than 1e-6 absolute.
CorrelationSurface ncc_surface(const Plane& x, const Plane& y, const ShiftRegion& region);

struct PceResult {
    double pce = 0.0;
    int peak_s1 = 0, peak_s2 = 0;
    double peak_rho = 0.0;
    int neighborhood_excluded = 0;
    bool infinite = false; // zero background energy; pce holds +inf sentinel
};

// Peak-to-correlation-energy of a surface: peak = argmax rho (signed, first
// in row-major order on ties); PCE = rho_peak^2 / mean(rho^2 outside the
// nbhd x nbhd square centered on the peak, clipped to the surface).
// squared=false evaluates the unsquared variant (sign-sensitive) instead.
PceResult pce(const CorrelationSurface& s, int nbhd = 11, bool squared = true);

// Same statistic with the peak location forced (no argmax); used by the
// stabilization detector at shift (0,0).
PceResult pce_at(const CorrelationSurface& s, int s1, int s2, int nbhd = 11,
                 bool squared = true);

inline double pce_infinity() { return std::numeric_limits<double>::infinity(); }

} // namespace hsi::correlate

#endif
