#include "fhmp/estimators.hpp"

#include "fhmp/errors.hpp"
#include "fhmp/optimize.hpp"
#include "fhmp/quadrature.hpp"
#include "fhmp/reml.hpp"

#include <algorithm>
#include <cmath>

namespace fhmp {

namespace {

void require_positive(double A, const char* who) {
    if (!(A > 0.0) || !std::isfinite(A)) throw DomainError(std::string(who) + " requires finite A > 0");
}

double leverage(const FHDataset& data, const GlsFit& fit, Index i) {
    if (data.p() == 0) return 0.0;
    const VectorXd xi = data.X.row(i).transpose();
    return xi.dot(fit.info_inv * xi);
}

// d/dA log L_RE without the second-order terms of the full projection.
double score_only(const FHDataset& data, const GlsFit& fit) {
    const VectorXd W = (data.D.array() + fit.A).inverse();
    double trP = W.sum();
    if (data.p() > 0) {
        const MatrixXd G2 = data.X.transpose() * W.cwiseAbs2().asDiagonal() * data.X;
        trP -= (fit.info_inv * G2).trace();
    }
    const double yP2y = W.cwiseProduct(fit.residual).squaredNorm();
    return -0.5 * trP + 0.5 * yP2y;
}

double yl_integrand(const FHDataset& data, double s, Index i) {
    const GlsFit fit = gls_fit(data, s);
    return 0.5 * leverage(data, fit, i) * trace_inv_power(data.D, s, 2);
}

void check_area(const FHDataset& data, std::optional<Index> area, VarianceMethod m) {
    if (!area) throw DomainError(to_string(m) + " estimator is area-specific; an area index is required");
    if (*area < 0 || *area >= data.m()) throw DomainError("area index out of range");
}

}  // namespace

std::string to_string(VarianceMethod m) {
    switch (m) {
        case VarianceMethod::Reml: return "REML";
        case VarianceMethod::Hirose: return "AML-Hirose";
        case VarianceMethod::YL: return "AML-YL";
        case VarianceMethod::AnovaLiteral: return "ANOVA";
        case VarianceMethod::AnovaCorrected: return "ANOVA-corrected";
    }
    return "?";
}

VarianceMethod parse_variance_method(const std::string& s) {
    if (s == "REML" || s == "reml") return VarianceMethod::Reml;
    if (s == "AML-Hirose" || s == "hirose" || s == "N") return VarianceMethod::Hirose;
    if (s == "AML-YL" || s == "yl" || s == "YL") return VarianceMethod::YL;
    if (s == "ANOVA" || s == "anova") return VarianceMethod::AnovaLiteral;
    if (s == "ANOVA-corrected" || s == "anova-corrected") return VarianceMethod::AnovaCorrected;
    throw DomainError("unknown variance method '" + s + "'");
}

double log_h_hirose(double A, double D_i, double z) {
    require_positive(A, "log_h_hirose");
    const double z2 = z * z;
    return (1.0 + z2) / 4.0 * std::log(A) + (7.0 - z2) / 4.0 * std::log(A + D_i);
}

double log_h_hirose_prime(double A, double D_i, double z) {
    require_positive(A, "log_h_hirose_prime");
    return 2.0 / (A + D_i) + (1.0 + z * z) * D_i / (4.0 * A * (A + D_i));
}

double log_h_yl(const FHDataset& data, double A, Index i, double z) {
    require_positive(A, "log_h_yl");
    double extra = 0.0;
    if (data.p() > 0) extra = integrate_adaptive([&](double s) { return yl_integrand(data, s, i); }, 0.0, A);
    return log_h_hirose(A, data.D(i), z) + extra;
}

double log_h_yl_prime(const FHDataset& data, double A, Index i, double z) {
    require_positive(A, "log_h_yl_prime");
    return log_h_hirose_prime(A, data.D(i), z) + (data.p() > 0 ? yl_integrand(data, A, i) : 0.0);
}

double anova_estimate(const FHDataset& data, bool corrected) {
    if (!data.is_balanced()) throw DataError("ANOVA estimator requires balanced data (all D equal)");
    if (data.p() != 1 || !(data.X.array() == 1.0).all())
        throw DataError("ANOVA estimator requires the intercept-only model");
    if (data.m() < 2) throw DataError("ANOVA estimator requires m >= 2");
    const double ybar = data.y.mean();
    const double s2 = (data.y.array() - ybar).square().sum() / static_cast<double>(data.m() - 1);
    return std::max(0.0, corrected ? s2 - data.D(0) : s2);
}

double default_upper_bracket(const FHDataset& data) {
    const double yy = data.y.squaredNorm() / static_cast<double>(data.m());
    return std::max(10.0 * yy, 100.0 * data.D.maxCoeff());
}

VarianceFit estimate_variance(const FHDataset& data, VarianceMethod method, std::optional<Index> area, double z) {
    VarianceFit out;
    out.method = method;
    out.z = z;
    if (method == VarianceMethod::AnovaLiteral || method == VarianceMethod::AnovaCorrected) {
        out.A_hat = anova_estimate(data, method == VarianceMethod::AnovaCorrected);
        out.truncated = out.A_hat == 0.0;
        out.converged = true;
        return out;
    }
    if (data.m() <= data.p()) throw DataError("need m > p");

    MaximizeOptions opts;
    opts.upper = default_upper_bracket(data);
    std::function<double(double)> deriv;
    std::function<double(double)> value;

    switch (method) {
        case VarianceMethod::Reml:
            opts.lower = 0.0;
            opts.lower_admissible = true;
            deriv = [&](double A) { return score_only(data, gls_fit(data, A)); };
            value = [&](double A) { return reml_log_likelihood(data, A).log_lre; };
            break;
        case VarianceMethod::Hirose: {
            check_area(data, area, method);
            const double Di = data.D(*area);
            deriv = [&, Di](double A) { return score_only(data, gls_fit(data, A)) + log_h_hirose_prime(A, Di, z); };
            value = [&, Di](double A) { return reml_log_likelihood(data, A).log_lre + log_h_hirose(A, Di, z); };
            out.area = area;
            break;
        }
        case VarianceMethod::YL: {
            check_area(data, area, method);
            const Index i = *area;
            deriv = [&, i](double A) {
                const GlsFit fit = gls_fit(data, A);
                return score_only(data, fit) + log_h_hirose_prime(A, data.D(i), z) +
                       0.5 * leverage(data, fit, i) * trace_inv_power(data.D, A, 2);
            };
            value = [&, i](double A) { return reml_log_likelihood(data, A).log_lre + log_h_yl(data, A, i, z); };
            out.area = area;
            break;
        }
        default: break;
    }

    // The objective is only needed to rank several local maxima.
    const MaximizeResult r = maximize_by_derivative(deriv, value, opts);
    out.A_hat = r.at_lower ? 0.0 : r.x;
    out.truncated = method == VarianceMethod::Reml && out.A_hat == 0.0;
    out.converged = r.converged;
    out.iterations = r.iterations;
    out.bracket_lo = r.bracket_lo;
    out.bracket_hi = r.bracket_hi;
    out.objective = r.value;
    return out;
}

AmlRemlGap aml_reml_gap(const FHDataset& data, Index i, double z) {
    AmlRemlGap g;
    g.A_reml = estimate_variance(data, VarianceMethod::Reml).A_hat;
    g.A_aml = estimate_variance(data, VarianceMethod::Hirose, i, z).A_hat;
    g.gap = g.A_aml - g.A_reml;
    g.floored = g.A_reml <= 0.0;
    g.A_eval = g.floored ? kGapFloor : g.A_reml;
    g.prediction = 2.0 * log_h_hirose_prime(g.A_eval, data.D(i), z) / trace_inv_power(data.D, g.A_eval, 2);
    return g;
}

}  // namespace fhmp
