#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cardioforge {

/// Malformed user-supplied input (files, flags, config values).
/// The CLI maps this to exit code 2; everything else maps to 1.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Euler integration produced a non-finite state.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& msg, std::size_t step_index)
        : std::runtime_error(msg), step(step_index) {}
    std::size_t step;
};

/// Derivative-free search hit a non-finite objective value.
struct FitDivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A training loop hit a non-finite loss and stopped.
struct TrainAbortError : std::runtime_error {
    TrainAbortError(const std::string& msg, std::size_t at_iteration)
        : std::runtime_error(msg), iteration(at_iteration) {}
    std::size_t iteration;
};

}  // namespace cardioforge
