#include "doctest.h"
#include "oracles.hpp"

#include "fhmp/errors.hpp"
#include "fhmp/estimators.hpp"
#include "fhmp/optimize.hpp"
#include "fhmp/reml.hpp"

using namespace fhmp;

TEST_CASE("restricted log-likelihood against dense matrices") {
    for (int p : {0, 1, 3}) {
        const auto d = oracle::random_dataset(14, p, 10 + p);
        for (double A : {0.0, 0.05, 1.0, 25.0}) {
            const RemlEval e = reml_log_likelihood(d, A);
            CHECK(e.log_lre == doctest::Approx(oracle::log_lre(d, A)).epsilon(1e-10));
            CHECK(e.k == doctest::Approx(-e.log_lre / 14));
            CHECK(e.quad_form == doctest::Approx(d.y.dot(oracle::P(d, A) * d.y)).epsilon(1e-10));
        }
    }
}

TEST_CASE("score and hessian match finite differences") {
    for (int p : {0, 2, 3}) {
        const auto d = oracle::random_dataset(15, p, 20 + p);
        for (double A : {0.2, 1.0, 6.0}) {
            const double h = 1e-4 * A;
            const double fd1 = oracle::central_diff([&](double a) { return oracle::log_lre(d, a); }, A, h);
            CHECK(reml_score(d, A) == doctest::Approx(fd1).epsilon(1e-6));
            const double fd2 = oracle::central_diff([&](double a) { return reml_score(d, a); }, A, h);
            CHECK(reml_hessian(d, gls_fit(d, A)) == doctest::Approx(fd2).epsilon(1e-6));
            const MatrixXd P = oracle::P(d, A);
            CHECK(reml_score(d, A) == doctest::Approx(-0.5 * P.trace() + 0.5 * d.y.dot(P * P * d.y)).epsilon(1e-10));
        }
    }
}

TEST_CASE("derivatives of k") {
    const auto d = oracle::random_dataset(20, 3, 31);
    const double A = 1.5;
    const auto k = [&](double a) { return -oracle::log_lre(d, a) / 20; };
    const RemlDerivatives r = reml_derivatives(d, A);
    CHECK(r.k1 == doctest::Approx(oracle::central_diff(k, A, 1e-4)).epsilon(1e-6));
    CHECK(r.k2 == doctest::Approx((k(A + 1e-3) - 2 * k(A) + k(A - 1e-3)) / 1e-6).epsilon(1e-4));
    CHECK_FALSE(r.k3_analytic);

    // balanced: analytic third derivative
    VectorXd D = VectorXd::Constant(20, 0.8);
    const auto b = FHDataset::make(d.y, D, d.X);
    const RemlDerivatives rb = reml_derivatives(b, A);
    CHECK(rb.k3_analytic);
    const auto kb2 = [&](double a) { return reml_derivatives(b, a, 2).k2; };
    CHECK(rb.k3 == doctest::Approx(oracle::central_diff(kb2, A, 1e-4)).epsilon(1e-6));
    CHECK_THROWS_AS(reml_derivatives(d, 0.0), DomainError);
}

TEST_CASE("balanced REML has the closed form max(RSS/(m-p) - D, 0)") {
    for (unsigned seed = 0; seed < 20; ++seed) {
        auto d = oracle::random_dataset(12, 3, 100 + seed);
        d.D.setConstant(0.5);
        const MatrixXd H = d.X * (d.X.transpose() * d.X).inverse() * d.X.transpose();
        const double rss = d.y.dot(d.y - H * d.y);
        const double closed = std::max(rss / 9 - 0.5, 0.0);
        const VarianceFit f = estimate_variance(d, VarianceMethod::Reml);
        CHECK(f.A_hat == doctest::Approx(closed).epsilon(1e-8).scale(1.0));
        CHECK(f.truncated == (closed == 0.0));
    }
}

TEST_CASE("maximizer on a known function") {
    // f(x) = log x - x / 3, maximum at 3
    MaximizeOptions o;
    o.upper = 1.0;
    const auto r = maximize_by_derivative([](double x) { return 1 / x - 1.0 / 3; },
                                          [](double x) { return std::log(x) - x / 3; }, o);
    CHECK(r.x == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(r.converged);
    CHECK_THROWS_AS(maximize_by_derivative([](double) { return 1.0; }, [](double x) { return x; }, o),
                    ConvergenceError);
    // two local maxima: the higher one wins
    const auto f = [](double x) { return -std::pow(std::log(x) * std::log(x) - 4, 2) + 0.5 * std::log(x); };
    const auto df = [](double x) {
        const double l = std::log(x);
        return (-4 * (l * l - 4) * l + 0.5) / x;
    };
    o.lower = 1e-4;
    o.upper = 1e4;
    const auto r2 = maximize_by_derivative(df, f, o);
    CHECK(std::log(r2.x) == doctest::Approx(2.0).epsilon(1e-2));
}
