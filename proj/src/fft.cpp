#include "hsi/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace hsi::fft {

namespace {

std::mutex plan_mu;
std::map<std::tuple<int, int, int>, fftw_plan> plan_cache;

// fftw_execute_dft on a shared plan is thread-safe; plan creation is not.
fftw_plan get_plan(int rows, int cols, int sign) {
    std::lock_guard<std::mutex> lk(plan_mu);
    auto key = std::make_tuple(rows, cols, sign);
    auto it = plan_cache.find(key);
    if (it != plan_cache.end()) return it->second;
    std::vector<std::complex<double>> tmp(size_t(rows) * cols);
    fftw_plan p = fftw_plan_dft_2d(rows, cols,
                                   reinterpret_cast<fftw_complex*>(tmp.data()),
                                   reinterpret_cast<fftw_complex*>(tmp.data()),
                                   sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plan_cache.emplace(key, p);
    return p;
}

} // namespace

void dft2d(std::complex<double>* data, int rows, int cols, bool inverse) {
    fftw_plan p = get_plan(rows, cols, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
    if (inverse) {
        double norm = 1.0 / (double(rows) * double(cols));
        size_t n = size_t(rows) * cols;
        for (size_t i = 0; i < n; ++i) data[i] *= norm;
    }
}

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace hsi::fft
