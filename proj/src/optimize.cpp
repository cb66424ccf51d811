#include "fhmp/optimize.hpp"

#include "fhmp/errors.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

namespace fhmp {

namespace {

std::vector<double> scan_grid(const MaximizeOptions& o, double hi) {
    std::vector<double> g;
    const int n = std::max(o.scan_points, 4);
    const double lo = o.lower > 0.0 ? o.lower : std::min(1e-8, hi * 1e-12);
    if (o.lower <= 0.0) g.push_back(0.0);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int k = 0; k < n; ++k) g.push_back(std::exp(llo + (lhi - llo) * k / (n - 1)));
    g.back() = hi;
    return g;
}

[[noreturn]] void fail(const std::string& what, const MaximizeOptions& o, double hi, double last) {
    std::ostringstream msg;
    msg << what << " (bracket [" << o.lower << ", " << hi << "], last iterate " << last << ")";
    throw ConvergenceError(msg.str());
}

}  // namespace

MaximizeResult maximize_by_derivative(const std::function<double(double)>& derivative,
                                      const std::function<double(double)>& value,
                                      const MaximizeOptions& opts) {
    if (!(opts.upper > opts.lower) || opts.lower < 0.0) throw DomainError("invalid maximization bracket");
    MaximizeResult res;
    double hi = opts.upper;
    std::vector<double> grid = scan_grid(opts, hi);
    std::vector<double> d(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) d[k] = derivative(grid[k]);

    int expansions = 0;
    while (d.back() > 0.0) {
        if (expansions++ >= opts.max_expansions) fail("no finite maximizer: derivative positive at the upper end", opts, hi, hi);
        const double next = hi * opts.expansion_factor;
        for (int k = 1; k <= 4; ++k) {
            grid.push_back(hi * std::pow(opts.expansion_factor, k / 4.0));
            d.push_back(derivative(grid.back()));
        }
        hi = next;
    }
    res.bracket_lo = opts.lower;
    res.bracket_hi = hi;

    for (double v : d)
        if (!std::isfinite(v)) fail("non-finite derivative during scan", opts, hi, grid[&v - d.data()]);

    std::vector<double> candidates;
    bool lower_candidate = opts.lower_admissible && d.front() <= 0.0;
    if (lower_candidate) candidates.push_back(grid.front());

    int iterations = 0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        if (!(d[k] > 0.0 && d[k + 1] <= 0.0)) continue;
        if (d[k + 1] == 0.0) {
            candidates.push_back(grid[k + 1]);
            continue;
        }
        std::uintmax_t max_iter = static_cast<std::uintmax_t>(opts.max_iterations);
        const double xtol = opts.xtol;
        const auto tol = [xtol](double a, double b) {
            return std::abs(b - a) <= std::max(xtol, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(b));
        };
        const auto [a, b] = boost::math::tools::toms748_solve(derivative, grid[k], grid[k + 1], d[k], d[k + 1], tol, max_iter);
        iterations += static_cast<int>(max_iter);
        if (max_iter >= static_cast<std::uintmax_t>(opts.max_iterations))
            fail("root refinement did not converge", opts, hi, 0.5 * (a + b));
        candidates.push_back(0.5 * (a + b));
    }
    res.iterations = iterations;

    if (candidates.empty()) fail("no stationary maximum located", opts, hi, grid.front());

    std::size_t best = 0;
    if (candidates.size() > 1) {
        if (!value) throw DomainError("several local maxima but no objective supplied to rank them");
        double best_val = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const double v = value(candidates[c]);
            if (v > best_val) {
                best_val = v;
                best = c;
            }
        }
        res.value = best_val;
    } else if (value) {
        res.value = value(candidates.front());
    }
    res.x = candidates[best];
    res.at_lower = lower_candidate && best == 0;
    res.converged = true;
    return res;
}

}  // namespace fhmp
