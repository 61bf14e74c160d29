#pragma once

#include <stdexcept>
#include <string>

namespace securetag {

// Bad scenario/link/pipeline parameters. CLI exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem / format failures, always carrying the offending path. Exit code 3.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// A segment with zero variance cannot be decomposed; callers map this to a
// flagged decision instead of propagating.
struct silent_segment : std::runtime_error {
    explicit silent_segment(const std::string& what) : std::runtime_error(what) {}
};

// Calibration classes are statistically indistinguishable. Exit code 4.
struct calibration_degenerate : std::runtime_error {
    explicit calibration_degenerate(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace securetag
