#pragma once

#include "fhmp/core.hpp"
#include "fhmp/estimators.hpp"

#include <optional>
#include <string>

namespace fhmp {

enum class IntervalMethod { Direct, Cox, YL, N };

std::string to_string(IntervalMethod m);
IntervalMethod parse_interval_method(const std::string& s);

struct EbInterval {
    Index area = 0;
    IntervalMethod method = IntervalMethod::Direct;
    double center = 0.0;
    double half_width = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    double A_used = 0.0;
    std::optional<VectorXd> beta_used;

    double length() const { return upper - lower; }
    bool contains(double v) const { return lower <= v && v <= upper; }
};

enum class AnovaVariant { Literal, Corrected };

/// y_i +/- z sqrt(D_i).
EbInterval interval_direct(const FHDataset& data, Index i, double alpha);

/// EB center at the YL estimate of A with half-width z sigma_i. For p == 0
/// the center is the best predictor (1 - B_i) y_i.
EbInterval interval_yl(const FHDataset& data, Index i, double alpha);
/// Same, reusing an already computed fit of the YL estimator for area i.
EbInterval interval_yl(const FHDataset& data, Index i, double alpha, const VarianceFit& fit);

/// EB center at the Hirose estimate with half-width z delta_i.
EbInterval interval_n(const FHDataset& data, Index i, double alpha);
EbInterval interval_n(const FHDataset& data, Index i, double alpha, const VarianceFit& fit);

/// Balanced intercept-only model with an ANOVA estimate of A.
EbInterval interval_cox(const FHDataset& data, Index i, double alpha, AnovaVariant variant = AnovaVariant::Literal);

EbInterval make_interval(const FHDataset& data, Index i, double alpha, IntervalMethod method);

}  // namespace fhmp
