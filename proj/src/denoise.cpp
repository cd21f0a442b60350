#include "hsi/denoise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace hsi::denoise {

namespace {

// 8-tap Daubechies orthonormal scaling filter (sum = sqrt(2)).
constexpr int kTaps = 8;
constexpr std::array<double, kTaps> kDb8 = {
    0.23037781330885523, 0.71484657055254153, 0.63088076792959036,
    -0.02798376941698385, -0.18703481171888114, 0.03084138183598697,
    0.03288301166698295, -0.01059740178499728,
};

struct FilterBank {
    std::array<double, kTaps> lo_d, hi_d, lo_r, hi_r;
};

FilterBank make_bank() {
    FilterBank b{};
    for (int k = 0; k < kTaps; ++k) {
        b.lo_r[k] = kDb8[k];
        b.lo_d[k] = kDb8[kTaps - 1 - k];
        b.hi_r[k] = (k % 2 == 0 ? 1.0 : -1.0) * kDb8[kTaps - 1 - k];
    }
    for (int k = 0; k < kTaps; ++k) b.hi_d[k] = b.hi_r[kTaps - 1 - k];
    return b;
}

const FilterBank& bank() {
    static const FilterBank b = make_bank();
    return b;
}

// Half-point symmetric index (period 2n): x[-1] = x[0], x[n] = x[n-1].
inline int sym_index(int i, int n) {
    if (n == 1) return 0;
    int p = 2 * n;
    int m = ((i % p) + p) % p;
    return m < n ? m : p - 1 - m;
}

// One analysis step: symmetric extension by kTaps-1, valid convolution,
// downsample keeping odd samples. Output length floor((n + kTaps - 1) / 2).
void analyze1d(const double* x, int n, const std::array<double, kTaps>& f,
               std::vector<double>& out) {
    int zlen = n + kTaps - 1;
    int olen = zlen / 2;
    out.resize(size_t(olen));
    for (int j = 0; j < olen; ++j) {
        int t = 2 * j + 1;
        double s = 0.0;
        for (int m = 0; m < kTaps; ++m)
            s += f[m] * x[sym_index(t - m, n)];
        out[size_t(j)] = s;
    }
}

// One synthesis step: upsample (zeros at odd slots), full convolution, keep
// the n center samples. Sums of the lo/hi branch reconstruct exactly.
void synth_accum(const std::vector<double>& y, int n, const std::array<double, kTaps>& f,
                 std::vector<double>& acc) {
    int ly = int(y.size());
    int ulen = 2 * ly - 1;
    int wlen = ulen + kTaps - 1;
    int start = (wlen - n) / 2;
    for (int i = 0; i < n; ++i) {
        int t = start + i;
        double s = 0.0;
        // u[2j] = y[j]; w[t] = sum_m f[m] u[t-m] -> only even t-m contribute
        int m0 = t % 2;
        for (int m = m0; m < kTaps; m += 2) {
            int j = (t - m) / 2;
            if (j >= 0 && j < ly) s += f[m] * y[size_t(j)];
        }
        acc[size_t(i)] += s;
    }
}

struct Subbands {
    int rows = 0, cols = 0; // dims of the level input (for reconstruction)
    std::vector<double> lh, hl, hh;
    int drows = 0, dcols = 0; // detail subband dims
};

struct Decomposition {
    std::vector<Subbands> levels; // fine to coarse
    std::vector<double> approx;
    int arows = 0, acols = 0;
};

void transform_rows(const std::vector<double>& in, int rows, int cols,
                    std::vector<double>& lo, std::vector<double>& hi, int& out_cols) {
    out_cols = (cols + kTaps - 1) / 2;
    lo.assign(size_t(rows) * out_cols, 0.0);
    hi.assign(size_t(rows) * out_cols, 0.0);
    std::vector<double> tmp;
    for (int r = 0; r < rows; ++r) {
        const double* x = in.data() + size_t(r) * cols;
        analyze1d(x, cols, bank().lo_d, tmp);
        std::copy(tmp.begin(), tmp.end(), lo.begin() + size_t(r) * out_cols);
        analyze1d(x, cols, bank().hi_d, tmp);
        std::copy(tmp.begin(), tmp.end(), hi.begin() + size_t(r) * out_cols);
    }
}

void transform_cols(const std::vector<double>& in, int rows, int cols,
                    std::vector<double>& lo, std::vector<double>& hi, int& out_rows) {
    out_rows = (rows + kTaps - 1) / 2;
    lo.assign(size_t(out_rows) * cols, 0.0);
    hi.assign(size_t(out_rows) * cols, 0.0);
    std::vector<double> col(static_cast<size_t>(rows)), tmp;
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) col[size_t(r)] = in[size_t(r) * cols + c];
        analyze1d(col.data(), rows, bank().lo_d, tmp);
        for (int r = 0; r < out_rows; ++r) lo[size_t(r) * cols + c] = tmp[size_t(r)];
        analyze1d(col.data(), rows, bank().hi_d, tmp);
        for (int r = 0; r < out_rows; ++r) hi[size_t(r) * cols + c] = tmp[size_t(r)];
    }
}

void inverse_rows(const std::vector<double>& lo, const std::vector<double>& hi,
                  int rows, int in_cols, int out_cols, std::vector<double>& out) {
    out.assign(size_t(rows) * out_cols, 0.0);
    std::vector<double> acc(static_cast<size_t>(out_cols)), ylo(static_cast<size_t>(in_cols)), yhi(static_cast<size_t>(in_cols));
    for (int r = 0; r < rows; ++r) {
        std::fill(acc.begin(), acc.end(), 0.0);
        std::copy(lo.begin() + size_t(r) * in_cols, lo.begin() + size_t(r + 1) * in_cols, ylo.begin());
        std::copy(hi.begin() + size_t(r) * in_cols, hi.begin() + size_t(r + 1) * in_cols, yhi.begin());
        synth_accum(ylo, out_cols, bank().lo_r, acc);
        synth_accum(yhi, out_cols, bank().hi_r, acc);
        std::copy(acc.begin(), acc.end(), out.begin() + size_t(r) * out_cols);
    }
}

void inverse_cols(const std::vector<double>& lo, const std::vector<double>& hi,
                  int in_rows, int cols, int out_rows, std::vector<double>& out) {
    out.assign(size_t(out_rows) * cols, 0.0);
    std::vector<double> acc(static_cast<size_t>(out_rows)), ylo(static_cast<size_t>(in_rows)), yhi(static_cast<size_t>(in_rows));
    for (int c = 0; c < cols; ++c) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int r = 0; r < in_rows; ++r) {
            ylo[size_t(r)] = lo[size_t(r) * cols + c];
            yhi[size_t(r)] = hi[size_t(r) * cols + c];
        }
        synth_accum(ylo, out_rows, bank().lo_r, acc);
        synth_accum(yhi, out_rows, bank().hi_r, acc);
        for (int r = 0; r < out_rows; ++r) out[size_t(r) * cols + c] = acc[size_t(r)];
    }
}

Decomposition decompose(const Plane& img, int levels) {
    Decomposition d;
    std::vector<double> cur(img.size());
    for (size_t i = 0; i < img.size(); ++i) cur[i] = img.data[i];
    int rows = img.rows, cols = img.cols;
    for (int lv = 0; lv < levels; ++lv) {
        Subbands sb;
        sb.rows = rows;
        sb.cols = cols;
        std::vector<double> rlo, rhi;
        int wcols;
        transform_rows(cur, rows, cols, rlo, rhi, wcols);
        std::vector<double> ll, lh, hl, hh;
        int wrows;
        transform_cols(rlo, rows, wcols, ll, lh, wrows);
        transform_cols(rhi, rows, wcols, hl, hh, wrows);
        sb.lh = std::move(lh);
        sb.hl = std::move(hl);
        sb.hh = std::move(hh);
        sb.drows = wrows;
        sb.dcols = wcols;
        d.levels.push_back(std::move(sb));
        cur = std::move(ll);
        rows = wrows;
        cols = wcols;
    }
    d.approx = std::move(cur);
    d.arows = rows;
    d.acols = cols;
    return d;
}

Plane reconstruct(const Decomposition& d) {
    std::vector<double> cur = d.approx;
    int rows = d.arows, cols = d.acols;
    for (int lv = int(d.levels.size()) - 1; lv >= 0; --lv) {
        const Subbands& sb = d.levels[size_t(lv)];
        std::vector<double> rlo, rhi;
        inverse_cols(cur, sb.lh, rows, cols, sb.rows, rlo);
        inverse_cols(sb.hl, sb.hh, rows, cols, sb.rows, rhi);
        std::vector<double> next;
        inverse_rows(rlo, rhi, sb.rows, cols, sb.cols, next);
        cur = std::move(next);
        rows = sb.rows;
        cols = sb.cols;
    }
    Plane out(rows, cols);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = float(cur[i]);
    return out;
}

// Local mean over a w x w window, symmetric borders, separable.
void box_mean(const std::vector<double>& in, int rows, int cols, int w,
              std::vector<double>& tmp, std::vector<double>& out) {
    int half = w / 2;
    double inv = 1.0 / w;
    tmp.resize(in.size());
    out.resize(in.size());
    for (int r = 0; r < rows; ++r) {
        const double* src = in.data() + size_t(r) * cols;
        double* dst = tmp.data() + size_t(r) * cols;
        for (int c = 0; c < cols; ++c) {
            double s = 0.0;
            for (int k = -half; k <= half; ++k) s += src[sym_index(c + k, cols)];
            dst[c] = s * inv;
        }
    }
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            double s = 0.0;
            for (int k = -half; k <= half; ++k)
                s += tmp[size_t(sym_index(r + k, rows)) * cols + c];
            out[size_t(r) * cols + c] = s * inv;
        }
    }
}

// Minimum-variance local Wiener attenuation of one detail subband.
void wiener_subband(std::vector<double>& d, int rows, int cols, const DenoiseConfig& cfg) {
    std::vector<double> energy(d.size());
    for (size_t i = 0; i < d.size(); ++i) energy[i] = d[i] * d[i];
    std::vector<double> best(d.size(), std::numeric_limits<double>::infinity());
    std::vector<double> tmp, mean;
    for (int w : cfg.window_sizes) {
        box_mean(energy, rows, cols, w, tmp, mean);
        for (size_t i = 0; i < d.size(); ++i) {
            double s2 = std::max(0.0, mean[i] - cfg.sigma0_sq);
            best[i] = std::min(best[i], s2);
        }
    }
    for (size_t i = 0; i < d.size(); ++i)
        d[i] *= best[i] / (best[i] + cfg.sigma0_sq);
}

Plane denoise_wavelet(const Plane& img, const DenoiseConfig& cfg) {
    int min_dim = 1 << cfg.levels;
    if (img.rows < min_dim || img.cols < min_dim)
        raise(ErrorKind::invalid_input,
              "image too small for " + std::to_string(cfg.levels) + "-level decomposition");
    Decomposition d = decompose(img, cfg.levels);
    for (auto& sb : d.levels) {
        wiener_subband(sb.lh, sb.drows, sb.dcols, cfg);
        wiener_subband(sb.hl, sb.drows, sb.dcols, cfg);
        wiener_subband(sb.hh, sb.drows, sb.dcols, cfg);
    }
    return reconstruct(d);
}

Plane denoise_highpass(const Plane& img) {
    // 3x3 binomial blur, symmetric borders.
    static constexpr double k3[3] = {0.25, 0.5, 0.25};
    Plane tmp(img.rows, img.cols), out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            double s = 0.0;
            for (int k = -1; k <= 1; ++k)
                s += k3[k + 1] * img.at(r, sym_index(c + k, img.cols));
            tmp.at(r, c) = float(s);
        }
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            double s = 0.0;
            for (int k = -1; k <= 1; ++k)
                s += k3[k + 1] * tmp.at(sym_index(r + k, img.rows), c);
            out.at(r, c) = float(s);
        }
    return out;
}

} // namespace

void DenoiseConfig::validate() const {
    if (levels < 1)
        raise(ErrorKind::invalid_input, "denoise levels must be >= 1");
    if (!(sigma0_sq > 0.0))
        raise(ErrorKind::invalid_input, "sigma0_sq must be positive");
    if (window_sizes.empty())
        raise(ErrorKind::invalid_input, "window_sizes must be nonempty");
    for (int w : window_sizes)
        if (w < 3 || w % 2 == 0)
            raise(ErrorKind::invalid_input, "window sizes must be odd and >= 3");
}

std::string filter_kind_name(FilterKind k) {
    return k == FilterKind::wavelet_wiener ? "wavelet-wiener" : "gaussian-highpass";
}

FilterKind filter_kind_from_name(const std::string& name) {
    if (name == "wavelet-wiener") return FilterKind::wavelet_wiener;
    if (name == "gaussian-highpass") return FilterKind::gaussian_highpass;
    raise(ErrorKind::invalid_input, "unknown filter kind: " + name);
}

Plane denoise(const Plane& img, const DenoiseConfig& cfg) {
    cfg.validate();
    if (cfg.filter_kind == FilterKind::gaussian_highpass)
        return denoise_highpass(img);
    return denoise_wavelet(img, cfg);
}

Plane noise_residual(const Plane& img, const DenoiseConfig& cfg) {
    return plane_sub(img, denoise(img, cfg));
}

Plane noise_residual_multi(const std::vector<Plane>& channels, const DenoiseConfig& cfg) {
    if (channels.empty())
        raise(ErrorKind::invalid_input, "no channels given");
    if (channels.size() == 1)
        return noise_residual(channels[0], cfg);
    if (channels.size() != 3)
        raise(ErrorKind::invalid_input, "expected 1 or 3 channels");
    static constexpr double w601[3] = {0.299, 0.587, 0.114};
    Plane out(channels[0].rows, channels[0].cols);
    for (int c = 0; c < 3; ++c) {
        Plane r = noise_residual(channels[size_t(c)], cfg);
        for (size_t i = 0; i < out.size(); ++i)
            out.data[i] += float(w601[c] * r.data[i]);
    }
    return out;
}

} // namespace hsi::denoise
