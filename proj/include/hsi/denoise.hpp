#ifndef HSI_DENOISE_HPP
#define HSI_DENOISE_HPP

#include <string>
#include <vector>

#include "hsi/plane.hpp"

namespace hsi::denoise {

enum class FilterKind { wavelet_wiener, gaussian_highpass };

// Parameters of the content-suppression filter used for residual extraction.
// Defaults: 4-level 8-tap Daubechies decomposition, per-subband local Wiener
// attenuation with the local variance taken as the minimum over window sizes
// {3,5,7,9}, assumed noise power sigma0^2 = 9 on the 0..255 luminance scale.
struct DenoiseConfig {
    int levels = 4;
    double sigma0_sq = 9.0;
    std::vector<int> window_sizes = {3, 5, 7, 9};
    FilterKind filter_kind = FilterKind::wavelet_wiener;

    void validate() const;
};

std::string filter_kind_name(FilterKind k);
FilterKind filter_kind_from_name(const std::string& name);

// Denoised image, same dimensions. Wavelet mode requires dims >= 2^levels.
Plane denoise(const Plane& img, const DenoiseConfig& cfg = {});

// img - denoise(img), elementwise.
Plane noise_residual(const Plane& img, const DenoiseConfig& cfg = {});

// Per-channel residuals combined with ITU-R 601 weights; a single channel
// passes straight through noise_residual.
Plane noise_residual_multi(const std::vector<Plane>& channels, const DenoiseConfig& cfg = {});

} // namespace hsi::denoise

#endif
