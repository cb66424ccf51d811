#include "fhmp/priors.hpp"

#include "fhmp/errors.hpp"
#include "fhmp/estimators.hpp"
#include "fhmp/normal.hpp"
#include "fhmp/quadrature.hpp"
#include "fhmp/reml.hpp"

#include <algorithm>
#include <cmath>

namespace fhmp {

namespace {

constexpr double kExponentTol = 1e-10;

void check_area(const FHDataset& data, Index i) {
    if (i < 0 || i >= data.m()) throw DomainError("area index out of range");
}

void require_positive(double A) {
    if (!(A > 0.0) || !std::isfinite(A)) throw DomainError("prior evaluated at A <= 0");
}

double log_trV2(const VectorXd& D, double A) { return std::log(trace_inv_power(D, A, 2)); }

double ols_residual(const FHDataset& data, Index i) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(data.X);
    const VectorXd beta = qr.solve(data.y);
    return data.y(i) - data.X.row(i).dot(beta);
}

}  // namespace

std::string to_string(PriorKind k) {
    switch (k) {
        case PriorKind::MatchingGeneral: return "matching";
        case PriorKind::MatchingNoCovariate: return "matching-nocov";
        case PriorKind::MatchingBalanced: return "matching-balanced";
        case PriorKind::Drs: return "drs";
        case PriorKind::CustomTable: return "table";
    }
    return "?";
}

PriorSpec PriorSpec::matching_general(const FHDataset& data, Index i) {
    check_area(data, i);
    if (data.p() == 0) throw DomainError("general matching prior needs covariates; use the no-covariate form");
    PriorSpec s;
    s.kind_ = PriorKind::MatchingGeneral;
    s.area_ = i;
    s.label_ = "matching";
    s.data_ = std::make_shared<const FHDataset>(data);
    return s;
}

PriorSpec PriorSpec::matching_no_covariate(const FHDataset& data, Index i) {
    check_area(data, i);
    if (data.p() != 0) throw DomainError("no-covariate matching prior requires p = 0");
    PriorSpec s;
    s.kind_ = PriorKind::MatchingNoCovariate;
    s.area_ = i;
    s.label_ = "matching-nocov";
    s.data_ = std::make_shared<const FHDataset>(data);
    return s;
}

PriorSpec PriorSpec::matching_balanced(const FHDataset& data, Index i) {
    check_area(data, i);
    if (!data.is_balanced()) throw DataError("balanced matching prior requires equal sampling variances");
    if (data.p() == 0) throw DomainError("balanced matching prior needs covariates");
    PriorSpec s;
    s.kind_ = PriorKind::MatchingBalanced;
    s.area_ = i;
    s.label_ = "matching-balanced";
    s.data_ = std::make_shared<const FHDataset>(data);
    s.balanced_resid_ = ols_residual(data, i);
    return s;
}

PriorSpec PriorSpec::matching(const FHDataset& data, Index i) {
    if (data.p() == 0) return matching_no_covariate(data, i);
    if (data.is_balanced()) return matching_balanced(data, i);
    return matching_general(data, i);
}

PriorSpec PriorSpec::drs(const FHDataset& data, Index i) {
    check_area(data, i);
    PriorSpec s;
    s.kind_ = PriorKind::Drs;
    s.area_ = i;
    s.label_ = "drs";
    s.data_ = std::make_shared<const FHDataset>(data);
    return s;
}

PriorSpec PriorSpec::custom_table(std::vector<double> A, std::vector<double> log_pi, std::string label) {
    if (A.empty() || A.size() != log_pi.size()) throw DataError("prior table needs equally long, non-empty columns");
    for (std::size_t k = 0; k < A.size(); ++k) {
        if (!std::isfinite(A[k]) || !std::isfinite(log_pi[k])) throw DataError("prior table has non-finite values");
        if (k > 0 && !(A[k] > A[k - 1])) throw DataError("prior table A column must be strictly increasing");
    }
    PriorSpec s;
    s.kind_ = PriorKind::CustomTable;
    s.label_ = std::move(label);
    s.table_A_ = std::move(A);
    s.table_log_pi_ = std::move(log_pi);
    return s;
}

PriorSpec PriorSpec::flat() { return custom_table({1.0}, {0.0}, "flat"); }

bool PriorSpec::is_matching() const {
    return kind_ == PriorKind::MatchingGeneral || kind_ == PriorKind::MatchingNoCovariate ||
           kind_ == PriorKind::MatchingBalanced;
}

double PriorSpec::table_value(double A) const {
    if (A <= table_A_.front()) return table_log_pi_.front();
    if (A >= table_A_.back()) return table_log_pi_.back();
    const auto it = std::upper_bound(table_A_.begin(), table_A_.end(), A);
    const std::size_t k = static_cast<std::size_t>(it - table_A_.begin());
    const double t = (A - table_A_[k - 1]) / (table_A_[k] - table_A_[k - 1]);
    return (1.0 - t) * table_log_pi_[k - 1] + t * table_log_pi_[k];
}

double PriorSpec::log_pi(double A) const {
    const double a[1] = {A};
    return log_pi_sorted(a).front();
}

std::vector<double> PriorSpec::log_pi_sorted(std::span<const double> A, const MatrixXd* exponents) const {
    std::vector<double> out(A.size());
    if (kind_ == PriorKind::CustomTable) {
        for (std::size_t k = 0; k < A.size(); ++k) out[k] = table_value(A[k]);
        return out;
    }
    for (double a : A) require_positive(a);
    const FHDataset& d = *data_;
    const Index i = *area_;
    const double Di = d.D(i);
    MatrixXd local;
    if (kind_ == PriorKind::MatchingGeneral && exponents == nullptr) {
        local = matching_exponents(d, A);
        exponents = &local;
    }
    for (std::size_t k = 0; k < A.size(); ++k) {
        const double a = A[k];
        switch (kind_) {
            case PriorKind::MatchingGeneral:
                out[k] = log_trV2(d.D, a) + 2.0 * std::log(a + Di) + std::log(a) +
                         (*exponents)(static_cast<Index>(k), i);
                break;
            case PriorKind::MatchingNoCovariate:
                out[k] = log_trV2(d.D, a) + 2.0 * std::log(a + Di) + std::log(a) + d.y(i) * d.y(i) / (a + Di);
                break;
            case PriorKind::MatchingBalanced:
                out[k] = std::log(a) + balanced_resid_ * balanced_resid_ / (a + Di);
                break;
            case PriorKind::Drs:
                out[k] = 2.0 * std::log(a + Di) + log_trV2(d.D, a);
                break;
            case PriorKind::CustomTable: break;
        }
    }
    return out;
}

double PriorSpec::rho1_finite_difference(double A) const {
    require_positive(A);
    double h = std::max(1e-5, 1e-5 * A);
    if (A - h <= 0.0) h = 0.5 * A;
    const double pts[2] = {A - h, A + h};
    const std::vector<double> v = log_pi_sorted(pts);
    return (v[1] - v[0]) / (2.0 * h);
}

double PriorSpec::rho1(double A) const {
    require_positive(A);
    if (kind_ == PriorKind::CustomTable) return rho1_finite_difference(A);
    const FHDataset& d = *data_;
    const Index i = *area_;
    const double Di = d.D(i);
    const double trv2 = trace_inv_power(d.D, A, 2);
    const double trv3 = trace_inv_power(d.D, A, 3);
    switch (kind_) {
        case PriorKind::MatchingGeneral: return matching_rho1_closed_form(d, i, A);
        case PriorKind::MatchingNoCovariate: {
            const double e = d.y(i) / (A + Di);
            return -2.0 * trv3 / trv2 + 2.0 / (A + Di) + 1.0 / A - e * e;
        }
        case PriorKind::MatchingBalanced: {
            const double e = balanced_resid_ / (A + Di);
            return 1.0 / A - e * e;
        }
        case PriorKind::Drs: return -2.0 * trv3 / trv2 + 2.0 / (A + Di);
        case PriorKind::CustomTable: break;
    }
    return rho1_finite_difference(A);
}

double PriorSpec::tail_power() const { return is_matching() ? 1.0 : 0.0; }

MatrixXd matching_exponents(const FHDataset& data, std::span<const double> sorted_A) {
    const Index m = data.m();
    const Index n = static_cast<Index>(sorted_A.size());
    if (data.p() == 0) {
        MatrixXd out(n, m);
        for (Index k = 0; k < n; ++k) {
            const double a = sorted_A[static_cast<std::size_t>(k)];
            out.row(k) = (data.y.array().square() / (a + data.D.array()) - data.y.array().square() / data.D.array())
                             .transpose();
        }
        return out;
    }
    const auto integrand = [&data](double s) -> VectorXd {
        const GlsFit fit = gls_fit(data, s);
        return (fit.residual.array() / (s + data.D.array())).square().matrix();
    };
    return -cumulative_integral(integrand, sorted_A, m, kExponentTol);
}

double matching_rho1_closed_form(const FHDataset& data, Index i, double A) {
    check_area(data, i);
    require_positive(A);
    const double Di = data.D(i);
    const double trv2 = trace_inv_power(data.D, A, 2);
    const double trv3 = trace_inv_power(data.D, A, 3);
    const double resid = data.p() > 0 ? gls_fit(data, A).residual(i) : data.y(i);
    const double e = resid / (A + Di);
    return -2.0 * trv3 / trv2 + 2.0 / (A + Di) + 1.0 / A - e * e;
}

double coverage_defect_ci(const FHDataset& data, Index i, const PriorSpec& prior, double alpha, IntervalMethod method) {
    check_area(data, i);
    if (method != IntervalMethod::N && method != IntervalMethod::YL)
        throw DomainError("coverage defect is defined for the N and YL intervals");
    const double A = estimate_variance(data, VarianceMethod::Reml).A_hat;
    if (!(A > 0.0)) throw TruncationError("REML estimate is 0; the coverage defect is undefined");
    const double z = normal_critical_value(alpha);
    const double Di = data.D(i);
    const double B = Di / (A + Di);
    const double trv2 = trace_inv_power(data.D, A, 2);
    const double trv3 = trace_inv_power(data.D, A, 3);
    const GlsFit fit = gls_fit(data, A);
    const double r = data.p() > 0 ? gls_leverages(data, fit)(i) : 0.0;
    const double e = fit.residual(i) / (A + Di);

    double l1 = log_h_hirose_prime(A, Di, z);
    if (method == IntervalMethod::YL) l1 += trv2 * r / 2.0;
    const double bracket = l1 - 0.5 * ((B / 2.0 - 2.0) / A + 4.0 * trv3 / trv2) - prior.rho1(A) - e * e -
                           z * z * B / (4.0 * A);
    double c = 2.0 * z * B / (A * trv2) * bracket;
    if (method == IntervalMethod::YL) c -= z * B * r / A;
    return c;
}

ProprietyReport check_propriety(const FHDataset& data, Index i, const PriorSpec& prior) {
    check_area(data, i);
    ProprietyReport rep;
    const double m = static_cast<double>(data.m());
    const double p = static_cast<double>(data.p());
    rep.condition_holds = data.m() > data.p() + 4;
    const double a = prior.tail_power();
    rep.tail_exponent = (m - p) / 2.0 - a;

    constexpr int kPoints = 25;
    const double scale = data.D.maxCoeff();
    std::vector<double> grid(kPoints);
    for (int k = 0; k < kPoints; ++k) grid[static_cast<std::size_t>(k)] = scale * std::pow(10.0, 2.0 + 6.0 * k / (kPoints - 1));
    const std::vector<double> lp = prior.log_pi_sorted(grid);
    std::vector<double> g(kPoints);
    for (int k = 0; k < kPoints; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        g[ku] = lp[ku] + reml_log_likelihood(data, grid[ku]).log_lre + rep.tail_exponent * std::log(grid[ku]);
    }
    // least-squares slope over the upper half of the grid in log A
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int k = kPoints / 2; k < kPoints; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const double x = std::log(grid[ku]);
        sx += x;
        sy += g[ku];
        sxx += x * x;
        sxy += x * g[ku];
        ++n;
    }
    rep.empirical_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.bounded = rep.empirical_slope <= 1e-2;
    rep.proper = rep.condition_holds && rep.bounded && rep.tail_exponent > 1.0;
    if (!rep.condition_holds)
        rep.verdict = "sufficient condition m > p + 4 fails; propriety not established";
    else if (rep.proper)
        rep.verdict = "proper: m > p + 4 and the tail check passes";
    else
        rep.verdict = "condition holds but the numerical tail check did not confirm integrability";
    return rep;
}

}  // namespace fhmp
