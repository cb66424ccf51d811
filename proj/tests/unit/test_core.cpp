#include "doctest.h"
#include "oracles.hpp"

#include "fhmp/core.hpp"
#include "fhmp/errors.hpp"
#include "fhmp/normal.hpp"
#include "fhmp/quadrature.hpp"

using namespace fhmp;

TEST_CASE("gls fit matches the normal equations") {
    const auto d = oracle::random_dataset(12, 3, 1);
    for (double A : {0.0, 0.3, 4.0}) {
        const GlsFit fit = gls_fit(d, A);
        const VectorXd b = oracle::beta(d, A);
        for (int j = 0; j < 3; ++j) CHECK(fit.beta(j) == doctest::Approx(b(j)).epsilon(1e-10));
        const MatrixXd info = d.X.transpose() * oracle::Vinv(d, A) * d.X;
        CHECK((fit.info_inv - info.inverse()).norm() < 1e-10 * info.inverse().norm());
        CHECK(fit.log_det_info == doctest::Approx(std::log(info.determinant())).epsilon(1e-10));
    }
}

TEST_CASE("leverages and area quantities") {
    const auto d = oracle::random_dataset(10, 2, 2);
    const double A = 0.7;
    const VectorXd r = gls_leverages(d, gls_fit(d, A));
    const VectorXd q = ols_leverages(d);
    const MatrixXd H = d.X * (d.X.transpose() * d.X).inverse() * d.X.transpose();
    CHECK(q.sum() == doctest::Approx(2.0));
    for (int i = 0; i < 10; ++i) {
        CHECK(r(i) == doctest::Approx(oracle::gls_leverage(d, A, i)).epsilon(1e-10));
        CHECK(q(i) == doctest::Approx(H(i, i)).epsilon(1e-10));
        const AreaQuantities a = area_quantities(d, A, i);
        const double B = d.D(i) / (A + d.D(i));
        CHECK(a.B == doctest::Approx(B));
        CHECK(a.g1 == doctest::Approx(A * B));
        CHECK(a.delta * a.delta == doctest::Approx(A * B + B * B * r(i)));
    }
}

TEST_CASE("blup shrinks toward the regression fit") {
    const auto d = oracle::random_dataset(9, 2, 3);
    const double A = 1.3;
    const BlupResult b = blup(d, A);
    const VectorXd beta = oracle::beta(d, A);
    for (int i = 0; i < 9; ++i) {
        const double B = d.D(i) / (A + d.D(i));
        CHECK(b.theta_blup(i) == doctest::Approx((1 - B) * d.y(i) + B * d.X.row(i).dot(beta)).epsilon(1e-12));
    }
    const auto z = FHDataset::make_no_covariates(d.y, d.D);
    const BlupResult bz = blup(z, A);
    for (int i = 0; i < 9; ++i) CHECK(bz.theta_blup(i) == doctest::Approx(A / (A + d.D(i)) * d.y(i)));
}

TEST_CASE("dataset validation") {
    VectorXd y(3), D(3);
    y << 1, 2, 3;
    D << 1, 0, 1;
    CHECK_THROWS_AS(FHDataset::make_no_covariates(y, D), DataError);
    D(1) = 1;
    MatrixXd X(3, 2);
    X << 1, 2, 1, 2, 1, 2;
    CHECK_THROWS_AS(FHDataset::make(y, D, X), RankDeficiencyError);
    MatrixXd Xbig = MatrixXd::Random(3, 3);
    CHECK_THROWS_AS(FHDataset::make(y, D, Xbig), DataError);
    y(0) = NAN;
    CHECK_THROWS_AS(FHDataset::make_no_covariates(y, D), DataError);
}

TEST_CASE("normal helpers") {
    CHECK(normal_critical_value(0.05) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(normal_critical_value(0.10) == doctest::Approx(1.6448536269514722).epsilon(1e-14));
    CHECK(normal_cdf(1.0) == doctest::Approx(oracle::Phi(1.0)).epsilon(1e-15));
    CHECK(normal_interval_prob(-1.959963984540054, 1.959963984540054) == doctest::Approx(0.95).epsilon(1e-14));
}

TEST_CASE("quadrature") {
    const double v = integrate_adaptive([](double x) { return std::exp(-x) * std::sin(3 * x); }, 0.0, 10.0);
    const double exact = (3.0 - std::exp(-10.0) * (std::sin(30.0) + 3 * std::cos(30.0))) / 10.0;
    CHECK(v == doctest::Approx(exact).epsilon(1e-12));
    double wsum = 0, x2 = 0;
    for (int k = 0; k < 8; ++k) {
        wsum += GaussLegendre8::weights()[k];
        x2 += GaussLegendre8::weights()[k] * std::pow(GaussLegendre8::nodes()[k], 14);
    }
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(x2 == doctest::Approx(2.0 / 15.0).epsilon(1e-13));
    const std::vector<double> pts{0.5, 1.0, 2.0};
    const auto c = cumulative_integral([](double x) { return x * x; }, pts);
    for (std::size_t k = 0; k < 3; ++k) CHECK(c[k] == doctest::Approx(std::pow(pts[k], 3) / 3).epsilon(1e-12));
    const auto M = cumulative_integral(VectorIntegrand([](double x) { return VectorXd{{x, 1.0}}; }), pts, 2);
    CHECK(M(2, 0) == doctest::Approx(2.0));
    CHECK(M(1, 1) == doctest::Approx(1.0));
}
