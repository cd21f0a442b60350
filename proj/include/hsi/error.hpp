#ifndef HSI_ERROR_HPP
#define HSI_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hsi {

// Error taxonomy used across the library. CLI maps kinds onto exit codes:
// input-ish kinds -> 2, anything else -> 3.
enum class ErrorKind {
    decode,                // unreadable or malformed raster file
    invalid_input,         // precondition violation on values/dimensions
    no_frames,             // empty frame directory
    inconsistent_sequence, // mixed frame dimensions
    format,                // bad fingerprint file magic/truncation
    unsupported_version,   // fingerprint file version != 1
    empty_accumulator,     // finalize() before any accumulate()
    degenerate_input,      // constant plane where variance is required
    insufficient_frames,   // stabilization split needs >= 2 frames
    no_registrable_frames, // no frame passed the aggregation threshold
    io,                    // filesystem failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg)
        : std::runtime_error(std::move(msg)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    bool is_input_error() const noexcept {
        switch (kind_) {
        case ErrorKind::decode:
        case ErrorKind::invalid_input:
        case ErrorKind::no_frames:
        case ErrorKind::inconsistent_sequence:
        case ErrorKind::format:
        case ErrorKind::unsupported_version:
        case ErrorKind::io:
            return true;
        default:
            return false;
        }
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

} // namespace hsi

#endif
