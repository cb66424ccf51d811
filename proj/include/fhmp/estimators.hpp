#pragma once

#include "fhmp/core.hpp"

#include <optional>
#include <string>

namespace fhmp {

enum class VarianceMethod { Reml, Hirose, YL, AnovaLiteral, AnovaCorrected };

std::string to_string(VarianceMethod m);
VarianceMethod parse_variance_method(const std::string& s);

struct VarianceFit {
    double A_hat = 0.0;
    VarianceMethod method = VarianceMethod::Reml;
    std::optional<Index> area;     // AML estimators are area-specific
    double z = 0.0;
    bool converged = false;
    bool truncated = false;        // REML / ANOVA hit the boundary at 0
    int iterations = 0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    std::optional<double> objective;  // log adjusted likelihood at A_hat
};

/// log h_i(A) = (1+z^2)/4 log A + (7-z^2)/4 log(A+D_i).
double log_h_hirose(double A, double D_i, double z);
/// l_i^(1) = 2/(A+D_i) + (1+z^2) D_i / (4A(A+D_i)).
double log_h_hirose_prime(double A, double D_i, double z);

/// log h_i plus the leverage term integral_0^A r_i(s) tr[V(s)^-2] / 2 ds.
double log_h_yl(const FHDataset& data, double A, Index i, double z);
/// l_{i;YL}^(1) = l_i^(1) + r_i(A) tr[V^-2] / 2.
double log_h_yl_prime(const FHDataset& data, double A, Index i, double z);

/// max{ sum (y - ybar)^2 / (m-1), 0 }, or with D subtracted when corrected.
/// Requires balanced, intercept-only data.
double anova_estimate(const FHDataset& data, bool corrected);

/// Upper end of the initial search bracket: max(10 y'y/m, 100 max D).
double default_upper_bracket(const FHDataset& data);

/// Maximizes log L_RE(A) + log h(A). REML is truncated at 0; the AML
/// methods require an area index and return an interior maximizer.
VarianceFit estimate_variance(const FHDataset& data, VarianceMethod method, std::optional<Index> area = std::nullopt,
                              double z = 1.959963984540054);

struct AmlRemlGap {
    double A_reml = 0.0;
    double A_aml = 0.0;
    double gap = 0.0;          // A_aml - A_reml
    double prediction = 0.0;   // 2 l^(1)(A) / tr[V(A)^-2] at A = A_reml (or the floor)
    double A_eval = 0.0;
    bool floored = false;      // A_reml == 0, prediction evaluated at the floor
};

inline constexpr double kGapFloor = 1e-4;

/// Hirose AML minus REML together with its leading-order prediction.
AmlRemlGap aml_reml_gap(const FHDataset& data, Index i, double z = 1.959963984540054);

}  // namespace fhmp
