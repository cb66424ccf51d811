#pragma once

#include "fhmp/core.hpp"
#include "fhmp/intervals.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fhmp {

enum class PriorKind { MatchingGeneral, MatchingNoCovariate, MatchingBalanced, Drs, CustomTable };

std::string to_string(PriorKind k);

/// Unnormalized log-density of A, bound to a dataset and (except for
/// tables) to one area. Copies share the immutable dataset.
class PriorSpec {
public:
    static PriorSpec matching_general(const FHDataset& data, Index i);
    static PriorSpec matching_no_covariate(const FHDataset& data, Index i);
    static PriorSpec matching_balanced(const FHDataset& data, Index i);
    /// The matching prior in its simplest valid form for the data.
    static PriorSpec matching(const FHDataset& data, Index i);
    static PriorSpec drs(const FHDataset& data, Index i);
    /// log pi linear between table points, held constant outside.
    static PriorSpec custom_table(std::vector<double> A, std::vector<double> log_pi, std::string label = "custom");
    static PriorSpec flat();

    PriorKind kind() const { return kind_; }
    std::optional<Index> area() const { return area_; }
    const std::string& label() const { return label_; }
    bool is_matching() const;

    double log_pi(double A) const;
    /// Values at increasing A. `exponents` may carry precomputed
    /// matching_exponents(data, A) to avoid repeating the quadrature.
    std::vector<double> log_pi_sorted(std::span<const double> A, const MatrixXd* exponents = nullptr) const;

    /// d/dA log pi: analytic where available, else central differences.
    double rho1(double A) const;
    double rho1_finite_difference(double A) const;
    bool rho1_is_analytic() const { return kind_ != PriorKind::CustomTable; }

    /// a such that pi(A) ~ A^a as A -> infinity.
    double tail_power() const;

private:
    PriorKind kind_ = PriorKind::CustomTable;
    std::optional<Index> area_;
    std::string label_;
    std::shared_ptr<const FHDataset> data_;
    std::vector<double> table_A_;
    std::vector<double> table_log_pi_;
    double balanced_resid_ = 0.0;   // y_i - x_i' beta_ols

    double table_value(double A) const;
};

/// -integral_0^A ((y_j - x_j' beta(s)) / (s + D_j))^2 ds for every area j
/// (columns) at each increasing A (rows). For p == 0 the closed form
/// y_j^2/(A + D_j) - y_j^2/D_j is used.
MatrixXd matching_exponents(const FHDataset& data, std::span<const double> sorted_A);

/// Closed form of d/dA log pi for the general matching prior:
/// -2 tr[V^-3]/tr[V^-2] + 2/(A+D_i) + 1/A - ((y_i - x_i'beta(A))/(A+D_i))^2.
double matching_rho1_closed_form(const FHDataset& data, Index i, double A);

/// Coverage-defect term of the posterior coverage expansion at the REML
/// estimate; throws TruncationError when that estimate is 0.
double coverage_defect_ci(const FHDataset& data, Index i, const PriorSpec& prior, double alpha, IntervalMethod method);

struct ProprietyReport {
    bool condition_holds = false;   // m > p + 4
    double tail_exponent = 0.0;     // posterior density ~ A^{-tail_exponent}
    double empirical_slope = 0.0;   // slope of log(kernel * A^{(m-p)/2 - 1 - a}) on the far grid
    bool bounded = false;
    bool proper = false;            // only claimed when both checks pass
    std::string verdict;
};

ProprietyReport check_propriety(const FHDataset& data, Index i, const PriorSpec& prior);

}  // namespace fhmp
