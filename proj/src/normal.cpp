#include "fhmp/normal.hpp"

#include "fhmp/errors.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace fhmp {

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_critical_value(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
    if (alpha == 1.0) return 0.0;
    // Phi(z) = 1 - alpha/2  <=>  erfc(z / sqrt2) = alpha
    return std::numbers::sqrt2 * boost::math::erfc_inv(alpha);
}

double normal_interval_prob(double a, double b) {
    if (!(b > a)) return 0.0;
    if (a >= 0.0) {
        // both in the upper tail: use survival functions
        return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
    }
    if (b <= 0.0) {
        return 0.5 * (std::erfc(-b / std::numbers::sqrt2) - std::erfc(-a / std::numbers::sqrt2));
    }
    return 1.0 - 0.5 * (std::erfc(-a / std::numbers::sqrt2) + std::erfc(b / std::numbers::sqrt2));
}

}  // namespace fhmp
