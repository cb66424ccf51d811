#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <span>
#include <vector>

namespace fhmp {

using Integrand = std::function<double(double)>;

/// Adaptive Gauss-Kronrod (15-point) integral over [a, b]. Throws
/// IntegrationError naming the interval when the error estimate exceeds
/// max(abs_tol, rel_tol * |integral|).
double integrate_adaptive(const Integrand& f, double a, double b, double abs_tol = 1e-10, double rel_tol = 1e-11);

/// Fixed 8-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre8 {
    static const std::array<double, 8>& nodes();
    static const std::array<double, 8>& weights();
};

/// Integral from 0 to each of a sorted list of points, accumulated segment
/// by segment so each integrand evaluation is spent once.
std::vector<double> cumulative_integral(const Integrand& f, std::span<const double> sorted_points,
                                        double abs_tol = 1e-10);

using VectorIntegrand = std::function<Eigen::VectorXd(double)>;

/// Vector-valued version: row k holds the integral from 0 to sorted_points[k]
/// of each of the `dim` components. Each segment uses Gauss-Kronrod (7, 15)
/// with bisection until the embedded error estimate is below abs_tol.
Eigen::MatrixXd cumulative_integral(const VectorIntegrand& f, std::span<const double> sorted_points, Eigen::Index dim,
                                    double abs_tol = 1e-10);

/// log(sum(exp(v))) with max shift.
double log_sum_exp(std::span<const double> v);

}  // namespace fhmp
