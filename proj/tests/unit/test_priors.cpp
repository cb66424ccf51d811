#include "doctest.h"
#include "oracles.hpp"

#include "fhmp/errors.hpp"
#include "fhmp/estimators.hpp"
#include "fhmp/priors.hpp"

#include <random>

using namespace fhmp;

namespace {
constexpr double z = 1.959963984540054;

double trV(const FHDataset& d, double A, int k) { return (d.D.array() + A).pow(-k).sum(); }

// The general matching prior from its definition, with the exponent
// integrated by Simpson's rule on the dense GLS fit.
double log_pi_general(const FHDataset& d, int i, double A) {
    const double f = oracle::simpson(
        [&](double s) {
            const double e = (d.y(i) - d.X.row(i).dot(oracle::beta(d, s))) / (s + d.D(i));
            return e * e;
        },
        0.0, A, 2000);
    return std::log(trV(d, A, 2)) + 2 * std::log(A + d.D(i)) + std::log(A) - f;
}

double oracle_defect(const FHDataset& d, int i, double rho1, bool yl) {
    const double A = oracle::grid_argmax([&](double a) { return oracle::log_lre(d, a); }, 1e-8, 1e4);
    const double D = d.D(i), B = D / (A + D);
    const double t2 = trV(d, A, 2), t3 = trV(d, A, 3);
    const double e = (d.y(i) - (d.p() ? d.X.row(i).dot(oracle::beta(d, A)) : 0.0)) / (A + D);
    const double r = oracle::gls_leverage(d, A, i);
    double l1 = 2 / (A + D) + (1 + z * z) * D / (4 * A * (A + D));
    if (yl) l1 += r * t2 / 2;
    double c = 2 * z * B / (A * t2) *
               (l1 - 0.5 * ((B / 2 - 2) / A + 4 * t3 / t2) - rho1 - e * e - z * z * B / (4 * A));
    if (yl) c -= z * B * r / A;
    return c;
}
}  // namespace

TEST_CASE("general matching prior against its definition") {
    const auto d = oracle::random_dataset(10, 2, 11);
    const PriorSpec p = PriorSpec::matching_general(d, 3);
    const double off = p.log_pi(1.0) - log_pi_general(d, 3, 1.0);
    for (double A : {0.05, 0.4, 2.0, 9.0}) CHECK(p.log_pi(A) - log_pi_general(d, 3, A) == doctest::Approx(off).epsilon(1e-7).scale(1.0));
    CHECK(std::abs(off) < 1e-7);
    const std::vector<double> grid{0.1, 0.5, 1.0, 4.0};
    const auto sorted = p.log_pi_sorted(grid);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(sorted[k] == doctest::Approx(p.log_pi(grid[k])).epsilon(1e-9));
    CHECK(p.log_pi(1e-12) < p.log_pi(1e-6));
}

TEST_CASE("exponent term is non-increasing") {
    const auto d = oracle::random_dataset(12, 3, 12);
    std::vector<double> A;
    for (int k = 0; k < 40; ++k) A.push_back(0.01 * std::pow(1.3, k));
    const MatrixXd E = matching_exponents(d, A);
    for (Index j = 0; j < d.m(); ++j)
        for (Index k = 1; k < E.rows(); ++k) CHECK(E(k, j) <= E(k - 1, j) + 1e-14);
}

TEST_CASE("balanced data: general and balanced priors differ by a constant") {
    auto d = oracle::random_dataset(12, 3, 13);
    d.D.setConstant(0.7);
    const PriorSpec g = PriorSpec::matching_general(d, 5);
    const PriorSpec b = PriorSpec::matching_balanced(d, 5);
    const double c0 = g.log_pi(1.0) - b.log_pi(1.0);
    for (double A : {0.01, 0.3, 3.0, 30.0}) CHECK(g.log_pi(A) - b.log_pi(A) == doctest::Approx(c0).epsilon(1e-8));
    CHECK_THROWS_AS(PriorSpec::matching_balanced(oracle::random_dataset(12, 3, 1), 0), DataError);
    CHECK(PriorSpec::matching(d, 0).kind() == PriorKind::MatchingBalanced);
}

TEST_CASE("no-covariate matching prior") {
    VectorXd y = VectorXd::Constant(5, 2.0), D = VectorXd::Ones(5);
    const auto d = FHDataset::make_no_covariates(y, D);
    const PriorSpec p = PriorSpec::matching_no_covariate(d, 0);
    CHECK(p.log_pi(1.0) == doctest::Approx(std::log(5.0 / 4) + 2 * std::log(2.0) + 0.0 + 2.0).epsilon(1e-14));
    const auto zero = FHDataset::make_no_covariates(VectorXd::Zero(5), D);
    const PriorSpec p0 = PriorSpec::matching_no_covariate(zero, 2);
    CHECK(p0.log_pi(3.0) == doctest::Approx(std::log(5.0 / 16) + 2 * std::log(4.0) + std::log(3.0)));
    CHECK(PriorSpec::matching(d, 1).kind() == PriorKind::MatchingNoCovariate);
}

TEST_CASE("DRS prior") {
    auto d = oracle::random_dataset(8, 1, 14);
    const PriorSpec p = PriorSpec::drs(d, 2);
    CHECK(p.log_pi(1.5) == doctest::Approx(2 * std::log(1.5 + d.D(2)) + std::log(trV(d, 1.5, 2))));
    d.D.setConstant(0.4);
    const PriorSpec b = PriorSpec::drs(d, 2);
    CHECK(b.log_pi(0.1) == doctest::Approx(b.log_pi(50.0)).epsilon(1e-12));
}

TEST_CASE("rho1: analytic against finite differences") {
    std::mt19937 rng(15);
    std::uniform_real_distribution<double> la(std::log(0.05), std::log(20.0));
    for (unsigned seed = 0; seed < 4; ++seed) {
        const auto d = oracle::random_dataset(15, 3, 150 + seed);
        const PriorSpec p = PriorSpec::matching_general(d, 1);
        for (int k = 0; k < 5; ++k) {
            const double A = std::exp(la(rng));
            CHECK(p.rho1(A) == doctest::Approx(p.rho1_finite_difference(A)).epsilon(1e-4));
            CHECK(p.rho1(A) == doctest::Approx(matching_rho1_closed_form(d, 1, A)).epsilon(1e-10));
            const double fd = oracle::central_diff([&](double a) { return log_pi_general(d, 1, a); }, A, 1e-4 * A);
            CHECK(p.rho1(A) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("table and flat priors") {
    const PriorSpec t = PriorSpec::custom_table({1.0, 2.0, 4.0}, {0.0, 1.0, 3.0});
    CHECK(t.log_pi(0.5) == 0.0);
    CHECK(t.log_pi(1.5) == doctest::Approx(0.5));
    CHECK(t.log_pi(3.0) == doctest::Approx(2.0));
    CHECK(t.log_pi(10.0) == 3.0);
    CHECK_FALSE(t.rho1_is_analytic());
    CHECK(t.rho1(3.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS(PriorSpec::custom_table({1.0, 1.0}, {0.0, 0.0}));
    CHECK(PriorSpec::flat().log_pi(123.0) == PriorSpec::flat().log_pi(0.01));
}

TEST_CASE("coverage defect") {
    for (unsigned seed = 0; seed < 6; ++seed) {
        const auto d = oracle::random_dataset(15, 3, 170 + seed, 2.0);
        const int i = static_cast<int>(seed % 15);
        for (IntervalMethod m : {IntervalMethod::N, IntervalMethod::YL}) {
            CHECK(std::abs(coverage_defect_ci(d, i, PriorSpec::matching(d, i), 0.05, m)) < 1e-8);
            const PriorSpec drs = PriorSpec::drs(d, i);
            const double A = estimate_variance(d, VarianceMethod::Reml).A_hat;
            const double ref = oracle_defect(d, i, drs.rho1(A), m == IntervalMethod::YL);
            CHECK(coverage_defect_ci(d, i, drs, 0.05, m) == doctest::Approx(ref).epsilon(1e-5));
            CHECK(std::abs(coverage_defect_ci(d, i, drs, 0.05, m)) > 1e-6);
        }
    }
    VectorXd y = VectorXd::Zero(6);
    y(0) = 0.01;
    const auto flat = FHDataset::make_no_covariates(y, VectorXd::Ones(6));
    CHECK_THROWS_AS(coverage_defect_ci(flat, 0, PriorSpec::matching(flat, 0), 0.05, IntervalMethod::N),
                    TruncationError);
}

TEST_CASE("propriety check") {
    for (int p : {0, 1, 3}) {
        const auto d = oracle::random_dataset(p + 5, p, 190 + p);
        const ProprietyReport r = check_propriety(d, 0, PriorSpec::matching(d, 0));
        CHECK(r.condition_holds);
        CHECK(r.bounded);
        CHECK(r.proper);
        CHECK(r.tail_exponent > 1.0);
    }
    const auto small = oracle::random_dataset(6, 3, 199);
    const ProprietyReport r = check_propriety(small, 0, PriorSpec::matching(small, 0));
    CHECK_FALSE(r.condition_holds);
    CHECK_FALSE(r.proper);
    CHECK(r.verdict.find("condition m > p + 4 fails") != std::string::npos);
}
