#pragma once

#include <functional>
#include <optional>

namespace fhmp {

struct MaximizeOptions {
    double lower = 1e-8;
    double upper = 1.0;
    bool lower_admissible = false;  // the lower end itself may be the maximizer
    int scan_points = 48;
    double xtol = 1e-10;
    int max_iterations = 200;
    int max_expansions = 60;
    double expansion_factor = 4.0;
};

struct MaximizeResult {
    double x = 0.0;
    std::optional<double> value;
    bool at_lower = false;
    bool converged = false;
    int iterations = 0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
};

/// Maximizes a smooth function on [lower, upper] through its derivative.
/// A logarithmic scan locates sign changes of the derivative, each is
/// refined by a bracketed root finder, and when several local maxima exist
/// they are ranked with `value` (required in that case). The upper end is
/// expanded geometrically while the derivative stays positive there.
/// Throws ConvergenceError when no finite maximizer is found.
MaximizeResult maximize_by_derivative(const std::function<double(double)>& derivative,
                                      const std::function<double(double)>& value,
                                      const MaximizeOptions& opts);

}  // namespace fhmp
