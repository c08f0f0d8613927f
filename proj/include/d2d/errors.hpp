#pragma once

#include <stdexcept>
#include <string>

namespace d2d {

// Bad experiment input: unreadable config, schema violation, parameter out of
// its documented domain. CLI exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unbiased solver invoked on a config whose biases differ.
struct bias_mismatch_error : config_error {
    using config_error::config_error;
};

// Iterative solver hit its iteration cap before meeting its tolerance.
// CLI exit code 3.
struct non_convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Monte-Carlo estimate conditioned on an event that never occurred.
// CLI exit code 4.
struct degenerate_estimate_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A computed probability left [0,1] by more than the documented slack.
// Always a bug, never corrected silently.
struct internal_consistency_error : std::logic_error {
    using std::logic_error::logic_error;
};

// Equality-constraint projection matrix not invertible and not reducible to
// the single-constraint fallback.
struct singular_projection_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace d2d
