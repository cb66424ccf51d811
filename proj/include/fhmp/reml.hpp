#pragma once

#include "fhmp/core.hpp"

#include <optional>

namespace fhmp {

/// Restricted log-likelihood of A and its scaled negative k(A) = -log L_RE / m.
/// The additive constant of log L_RE is fixed to zero.
struct RemlEval {
    double A = 0.0;
    double log_lre = 0.0;
    double k = 0.0;
    std::optional<double> k1;
    std::optional<double> k2;
    std::optional<double> k3;
    double trV2 = 0.0;        // sum (A + D_u)^{-2}
    double trV3 = 0.0;        // sum (A + D_u)^{-3}
    double quad_form = 0.0;   // y' P(A) y
};

/// log L_RE(A) = -1/2 log|V| - 1/2 log|X'V^{-1}X| - 1/2 y'P y; for p == 0 the
/// marginal likelihood of the zero-mean model. P is never formed.
RemlEval reml_log_likelihood(const FHDataset& data, double A);
RemlEval reml_log_likelihood(const FHDataset& data, const GlsFit& fit);

/// d/dA log L_RE = -tr(P)/2 + y'P^2 y / 2.
double reml_score(const FHDataset& data, const GlsFit& fit);
double reml_score(const FHDataset& data, double A);

/// d^2/dA^2 log L_RE = tr(P^2)/2 - y'P^3 y.
double reml_hessian(const FHDataset& data, const GlsFit& fit);

struct RemlDerivatives {
    double A = 0.0;
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;
    bool k3_analytic = false;
    // leading-order forms: k2 ~ tr[V^-2]/(2m), k3 ~ -2 tr[V^-3]/m
    double k2_leading = 0.0;
    double k3_leading = 0.0;
};

/// Analytic k1, k2; k3 analytic in the balanced case, otherwise a central
/// difference of the analytic k2 with step max(1e-4, 1e-4 A). order in 1..3.
RemlDerivatives reml_derivatives(const FHDataset& data, double A, int order = 3);

}  // namespace fhmp
