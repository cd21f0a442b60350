#ifndef HSI_TESTS_HELPERS_HPP
#define HSI_TESTS_HELPERS_HPP

#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "hsi/plane.hpp"
#include "hsi/rng.hpp"

namespace testutil {

inline hsi::Plane random_plane(int rows, int cols, uint64_t seed, double mean = 0.0,
                               double sd = 1.0) {
    hsi::Rng rng(seed);
    hsi::Plane p(rows, cols);
    for (auto& v : p.data) v = float(mean + sd * rng.gaussian());
    return p;
}

inline hsi::Plane smooth_plane(int rows, int cols, double base = 100.0, double amp = 50.0) {
    hsi::Plane p(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            p.at(r, c) = float(base + amp * std::sin(r * 0.11) * std::cos(c * 0.07));
    return p;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        root_ = std::filesystem::temp_directory_path() /
                ("hsi_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(root_);
        std::filesystem::create_directories(root_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(root_, ec);
    }
    const std::filesystem::path& path() const { return root_; }
    std::filesystem::path operator/(const std::string& s) const { return root_ / s; }

private:
    std::filesystem::path root_;
};

} // namespace testutil

#endif
