#ifndef HSI_FFT_HPP
#define HSI_FFT_HPP

#include <complex>
#include <vector>

namespace hsi::fft {

// In-place 2-D complex DFT, double precision. Plans are cached per
// (rows, cols, direction) and created with FFTW_ESTIMATE so the algorithm
// choice (and therefore every output bit) is reproducible run to run.
// Inverse is normalized by 1/(rows*cols). Thread-safe.
void dft2d(std::complex<double>* data, int rows, int cols, bool inverse);

inline void dft2d(std::vector<std::complex<double>>& data, int rows, int cols, bool inverse) {
    dft2d(data.data(), rows, cols, inverse);
}

int next_pow2(int n);

} // namespace hsi::fft

#endif
