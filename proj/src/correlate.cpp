#include "hsi/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "hsi/fft.hpp"

namespace hsi::correlate {

namespace {

// Modular index for reading a linear-correlation lag out of the circular
// FFT result.
inline int wrap(int s, int p) { return ((s % p) + p) % p; }

} // namespace

ShiftRegion central_crop_region(int x_rows, int x_cols, int y_rows, int y_cols, double frac) {
    int c1 = (y_rows - x_rows) / 2;
    int c2 = (y_cols - x_cols) / 2;
    int half1 = std::max(4, int(std::lround(frac * std::max(x_rows, y_rows))));
    int half2 = std::max(4, int(std::lround(frac * std::max(x_cols, y_cols))));
    return ShiftRegion::centered(c1, c2, half1, half2);
}

CorrelationSurface ncc_surface(const Plane& x, const Plane& y, const ShiftRegion& region) {
    if (region.rows() <= 0 || region.cols() <= 0)
        raise(ErrorKind::invalid_input, "empty shift region");
    double vx = plane_variance(x), vy = plane_variance(y);
    if (vx == 0.0 || vy == 0.0)
        raise(ErrorKind::degenerate_input, "ncc_surface: constant input plane");

    // Common canvas (zero down-right padding of the smaller plane).
    int m = std::max(x.rows, y.rows);
    int n = std::max(x.cols, y.cols);
    int span1 = std::max(std::abs(region.s1_min), std::abs(region.s1_max));
    int span2 = std::max(std::abs(region.s2_min), std::abs(region.s2_max));
    int p = fft::next_pow2(m + std::min(span1, m)); // lags beyond +-m are exactly 0
    int q = fft::next_pow2(n + std::min(span2, n));

    double mx = plane_mean(x), my = plane_mean(y);

    // Pack (x - mean) + i*(y - mean) into one transform.
    std::vector<std::complex<double>> buf(size_t(p) * q, {0.0, 0.0});
    double nx2 = 0.0, ny2 = 0.0;
    for (int r = 0; r < x.rows; ++r)
        for (int c = 0; c < x.cols; ++c) {
            double v = double(x.at(r, c)) - mx;
            buf[size_t(r) * q + c].real(v);
            nx2 += v * v;
        }
    for (int r = 0; r < y.rows; ++r)
        for (int c = 0; c < y.cols; ++c) {
            double v = double(y.at(r, c)) - my;
            buf[size_t(r) * q + c].imag(v);
            ny2 += v * v;
        }
    double denom = std::sqrt(nx2) * std::sqrt(ny2);

    fft::dft2d(buf, p, q, false);

    // Unpack spectra of the two real inputs and form conj(Fx) * Fy.
    std::vector<std::complex<double>> g(size_t(p) * q);
    for (int u = 0; u < p; ++u) {
        int un = (p - u) % p;
        for (int v = 0; v < q; ++v) {
            int vn = (q - v) % q;
            std::complex<double> z = buf[size_t(u) * q + v];
            std::complex<double> zc = std::conj(buf[size_t(un) * q + vn]);
            std::complex<double> fx = 0.5 * (z + zc);
            std::complex<double> fy = std::complex<double>(0.0, -0.5) * (z - zc);
            g[size_t(u) * q + v] = std::conj(fx) * fy;
        }
    }
    fft::dft2d(g, p, q, true);

    CorrelationSurface out;
    out.region = region;
    out.plane = Plane(region.rows(), region.cols());
    for (int s1 = region.s1_min; s1 <= region.s1_max; ++s1) {
        int ri = s1 - region.s1_min;
        bool row_dead = s1 <= -x.rows || s1 >= y.rows; // no overlap at this lag
        for (int s2 = region.s2_min; s2 <= region.s2_max; ++s2) {
            int ci = s2 - region.s2_min;
            double rho = 0.0;
            if (!row_dead && s2 > -x.cols && s2 < y.cols)
                rho = g[size_t(wrap(s1, p)) * q + wrap(s2, q)].real() / denom;
            out.plane.at(ri, ci) = float(rho);
        }
    }
    return out;
}

namespace {

PceResult pce_impl(const CorrelationSurface& s, int peak_s1, int peak_s2, int nbhd,
                   bool squared) {
    if (nbhd < 1 || nbhd % 2 == 0)
        raise(ErrorKind::invalid_input, "pce neighborhood must be odd and >= 1");
    const ShiftRegion& rg = s.region;
    int half = nbhd / 2;
    PceResult res;
    res.peak_s1 = peak_s1;
    res.peak_s2 = peak_s2;
    res.peak_rho = s.rho(peak_s1, peak_s2);

    std::vector<double> background;
    background.reserve(size_t(rg.cells()));
    int excluded = 0;
    for (int s1 = rg.s1_min; s1 <= rg.s1_max; ++s1)
        for (int s2 = rg.s2_min; s2 <= rg.s2_max; ++s2) {
            if (std::abs(s1 - peak_s1) <= half && std::abs(s2 - peak_s2) <= half) {
                ++excluded;
                continue;
            }
            double r = s.rho(s1, s2);
            background.push_back(squared ? r * r : r);
        }
    res.neighborhood_excluded = excluded;

    // Value-sorted reduction: the background energy is a function of the
    // multiset of values, so translations of the surface pattern leave the
    // statistic bit-identical.
    std::sort(background.begin(), background.end());
    double sum = 0.0;
    for (double v : background) sum += v;

    double num = squared ? res.peak_rho * res.peak_rho : res.peak_rho;
    if (background.empty() || sum == 0.0) {
        res.infinite = true;
        res.pce = pce_infinity();
        return res;
    }
    res.pce = num / (sum / double(background.size()));
    return res;
}

} // namespace

PceResult pce(const CorrelationSurface& s, int nbhd, bool squared) {
    const ShiftRegion& rg = s.region;
    int best_s1 = rg.s1_min, best_s2 = rg.s2_min;
    double best = -std::numeric_limits<double>::infinity();
    for (int s1 = rg.s1_min; s1 <= rg.s1_max; ++s1)
        for (int s2 = rg.s2_min; s2 <= rg.s2_max; ++s2) {
            double r = s.rho(s1, s2);
            if (r > best) { // strict: ties resolve to the first in row-major order
                best = r;
                best_s1 = s1;
                best_s2 = s2;
            }
        }
    return pce_impl(s, best_s1, best_s2, nbhd, squared);
}

PceResult pce_at(const CorrelationSurface& s, int s1, int s2, int nbhd, bool squared) {
    if (!s.region.contains(s1, s2))
        raise(ErrorKind::invalid_input, "forced peak outside surface region");
    return pce_impl(s, s1, s2, nbhd, squared);
}

} // namespace hsi::correlate
