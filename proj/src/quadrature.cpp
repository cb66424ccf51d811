#include "fhmp/quadrature.hpp"

#include "fhmp/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fhmp {

double integrate_adaptive(const Integrand& f, double a, double b, double abs_tol, double rel_tol) {
    if (a == b) return 0.0;
    double err = 0.0;
    double l1 = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 30, rel_tol, &err, &l1);
    if (!std::isfinite(value) || err > std::max(abs_tol, 1e3 * rel_tol * std::abs(value))) {
        std::ostringstream msg;
        msg << "adaptive quadrature failed on [" << a << ", " << b << "]: estimate " << value
            << ", error " << err;
        throw IntegrationError(msg.str());
    }
    return value;
}

const std::array<double, 8>& GaussLegendre8::nodes() {
    static const std::array<double, 8> x = [] {
        std::array<double, 8> out{};
        const auto& half = boost::math::quadrature::gauss<double, 8>::abscissa();
        for (std::size_t k = 0; k < 4; ++k) {
            out[3 - k] = -half[k];
            out[4 + k] = half[k];
        }
        return out;
    }();
    return x;
}

const std::array<double, 8>& GaussLegendre8::weights() {
    static const std::array<double, 8> w = [] {
        std::array<double, 8> out{};
        const auto& half = boost::math::quadrature::gauss<double, 8>::weights();
        for (std::size_t k = 0; k < 4; ++k) {
            out[3 - k] = half[k];
            out[4 + k] = half[k];
        }
        return out;
    }();
    return w;
}

std::vector<double> cumulative_integral(const Integrand& f, std::span<const double> sorted_points, double abs_tol) {
    std::vector<double> out(sorted_points.size());
    double acc = 0.0;
    double prev = 0.0;
    for (std::size_t k = 0; k < sorted_points.size(); ++k) {
        const double x = sorted_points[k];
        if (x < prev) throw DomainError("cumulative_integral needs sorted points >= 0");
        acc += integrate_adaptive(f, prev, x, abs_tol);
        out[k] = acc;
        prev = x;
    }
    return out;
}

namespace {

// One Gauss-Kronrod (7, 15) panel; returns the Kronrod estimate and
// stores the largest component of |Kronrod - Gauss| in err.
Eigen::VectorXd gk15_panel(const VectorIntegrand& f, double a, double b, Eigen::Index dim, double& err) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G = boost::math::quadrature::gauss<double, 7>;
    const auto& x = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = G::weights();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    Eigen::VectorXd kron = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd gauss = Eigen::VectorXd::Zero(dim);
    for (std::size_t j = 0; j < x.size(); ++j) {
        const bool is_gauss = j % 2 == 0;
        const double w_g = is_gauss ? wg[j / 2] : 0.0;
        if (j == 0) {
            const Eigen::VectorXd v = f(c);
            kron += wk[0] * v;
            gauss += w_g * v;
            continue;
        }
        const Eigen::VectorXd v = f(c - h * x[j]) + f(c + h * x[j]);
        kron += wk[j] * v;
        if (is_gauss) gauss += w_g * v;
    }
    kron *= h;
    gauss *= h;
    err = (kron - gauss).cwiseAbs().maxCoeff();
    return kron;
}

Eigen::VectorXd gk15_adaptive(const VectorIntegrand& f, double a, double b, Eigen::Index dim, double tol, int depth) {
    double err = 0.0;
    Eigen::VectorXd v = gk15_panel(f, a, b, dim, err);
    if (!v.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite integrand on [" << a << ", " << b << "]";
        throw IntegrationError(msg.str());
    }
    if (err <= tol) return v;
    if (depth >= 50) {
        std::ostringstream msg;
        msg << "adaptive quadrature failed on [" << a << ", " << b << "]: error " << err;
        throw IntegrationError(msg.str());
    }
    const double mid = 0.5 * (a + b);
    return gk15_adaptive(f, a, mid, dim, tol, depth + 1) + gk15_adaptive(f, mid, b, dim, tol, depth + 1);
}

}  // namespace

Eigen::MatrixXd cumulative_integral(const VectorIntegrand& f, std::span<const double> sorted_points, Eigen::Index dim,
                                    double abs_tol) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(sorted_points.size()), dim);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    double prev = 0.0;
    for (std::size_t k = 0; k < sorted_points.size(); ++k) {
        const double x = sorted_points[k];
        if (x < prev) throw DomainError("cumulative_integral needs sorted points >= 0");
        if (x > prev) acc += gk15_adaptive(f, prev, x, dim, abs_tol, 0);
        out.row(static_cast<Eigen::Index>(k)) = acc.transpose();
        prev = x;
    }
    return out;
}

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double mx = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace fhmp
