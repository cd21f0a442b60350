#ifndef HSI_PLANE_HPP
#define HSI_PLANE_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "hsi/error.hpp"

namespace hsi {

// 2-D single-channel raster, row-major float32. Images, residuals,
// fingerprints and correlation surfaces all use this one type.
struct Plane {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Plane() = default;
    Plane(int r, int c, float fill = 0.0f) : rows(r), cols(c), data(size_t(r) * c, fill) {
        if (r <= 0 || c <= 0)
            raise(ErrorKind::invalid_input, "plane dimensions must be positive");
    }

    float& at(int r, int c) { return data[size_t(r) * cols + c]; }
    float at(int r, int c) const { return data[size_t(r) * cols + c]; }

    size_t size() const { return data.size(); }
    bool same_dims(const Plane& o) const { return rows == o.rows && cols == o.cols; }
};

inline double plane_sum(const Plane& p) {
    double s = 0.0;
    for (float v : p.data) s += v;
    return s;
}

inline double plane_mean(const Plane& p) {
    return p.size() ? plane_sum(p) / double(p.size()) : 0.0;
}

inline double plane_variance(const Plane& p) {
    if (p.size() < 2) return 0.0;
    double m = plane_mean(p), s = 0.0;
    for (float v : p.data) { double d = v - m; s += d * d; }
    return s / double(p.size());
}

inline bool plane_finite(const Plane& p) {
    for (float v : p.data)
        if (!std::isfinite(v)) return false;
    return true;
}

// Pearson correlation at zero shift; both planes must share dimensions.
inline double plane_corr(const Plane& a, const Plane& b) {
    if (!a.same_dims(b))
        raise(ErrorKind::invalid_input, "plane_corr: dimension mismatch");
    double ma = plane_mean(a), mb = plane_mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double da = a.data[i] - ma, db = b.data[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        raise(ErrorKind::degenerate_input, "plane_corr: constant input");
    return sab / std::sqrt(saa * sbb);
}

inline Plane plane_sub(const Plane& a, const Plane& b) {
    if (!a.same_dims(b))
        raise(ErrorKind::invalid_input, "plane_sub: dimension mismatch");
    Plane out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i)
        out.data[i] = a.data[i] - b.data[i];
    return out;
}

} // namespace hsi

#endif
