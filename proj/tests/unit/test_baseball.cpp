#include "doctest.h"

#include "fhmp/baseball.hpp"
#include "fhmp/errors.hpp"
#include "fhmp/intervals.hpp"

#include <cmath>

using namespace fhmp;

TEST_CASE("arc-sine transform") {
    CHECK(arcsine_transform(0.4) == doctest::Approx(std::sqrt(45.0) * std::asin(-0.2)).epsilon(1e-15));
    CHECK(inverse_arcsine_transform(arcsine_transform(0.27)) == doctest::Approx(0.27));
    CHECK_THROWS_AS(arcsine_transform(1.2), DataError);
}

TEST_CASE("bundled data") {
    const auto r = read_baseball(bundled_baseball_path());
    REQUIRE(r.size() == 18);
    CHECK(r[0].player == "Clemente");
    CHECK(r[0].hits45 == 18);
    CHECK(r[0].p_hat == doctest::Approx(0.4));
    CHECK(r[16].player == "L. Alvarado");
    for (const auto& x : r) {
        CHECK(x.p_true >= 0.0);
        CHECK(x.p_true <= 1.0);
    }
}

TEST_CASE("model variants") {
    const auto r = read_baseball(bundled_baseball_path());
    BaseballOptions o;
    o.model = BaseballModel::M4;
    const FHDataset m4 = ingest_baseball(r, o);
    CHECK(m4.p() == 3);
    CHECK((m4.D.array() == 1.0).all());
    CHECK(m4.y(0) == doctest::Approx(std::sqrt(45.0) * std::asin(-0.2)));
    REQUIRE(m4.theta_true);
    CHECK((*m4.theta_true)(0) == doctest::Approx(arcsine_transform(r[0].p_true)));

    // M4: every N interval except Munson's (third player) covers the truth
    for (Index i = 0; i < 18; ++i)
        CHECK(interval_n(m4, i, 0.05).contains((*m4.theta_true)(i)) == (i != 2));

    o.model = BaseballModel::M3;
    const FHDataset m3 = ingest_baseball(r, o);
    CHECK(m3.p() == 0);
    CHECK(m3.y(0) == doctest::Approx(m4.y(0) - kBaseballCenter));
    CHECK((*m3.theta_true)(0) == doctest::Approx((*m4.theta_true)(0) - kBaseballCenter));
    o.recenter = true;
    const FHDataset rc = ingest_baseball(r, o);
    CHECK(rc.y.mean() == doctest::Approx(0.0).scale(1.0));
}
