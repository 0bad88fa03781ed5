#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bethe/direct_min.hpp"
#include "bethe/kregular.hpp"
#include "test_support.hpp"

using namespace bethe;

namespace {

Eigen::VectorXd linspace(double lo, double hi, int count) {
    Eigen::VectorXd g(count);
    for (int k = 0; k < count; ++k) g[k] = lo + (hi - lo) * k / (count - 1);
    return g;
}

}  // namespace

TEST_CASE("build_k_regular") {
    SUBCASE("n = 8, K = 4, r = 0.27") {
        const GmrfModel m = build_k_regular({8, 4, 0.27});
        CHECK(m.n == 8);
        CHECK(m.edge_count() == 16);
        for (int d : m.degrees) CHECK(d == 4);
        CHECK(m.connected);
        CHECK(spectral_analysis(m).lambda_max == doctest::Approx(1.08).epsilon(1e-12));
    }
    SUBCASE("ring n = 8, K = 2, r = 0.4 is pairwise normalizable") {
        const GmrfModel m = build_k_regular({8, 2, 0.4});
        const SpectralReport sr = spectral_analysis(m);
        CHECK(sr.lambda_max == doctest::Approx(0.8).epsilon(1e-11));
        CHECK_NOTHROW(partition_potentials(m, PartitionStrategy::PairwiseNormalizable, sr));
    }
    SUBCASE("r at the validity supremum is rejected") {
        CHECK_THROWS_AS(build_k_regular({8, 4, 0.5}), NotPositiveDefiniteError);
    }
    SUBCASE("negative couplings are allowed within validity") {
        const GmrfModel m = build_k_regular({8, 2, -0.3});
        CHECK(spectral_analysis(m).lambda_max == doctest::Approx(0.6).epsilon(1e-11));
    }
    SUBCASE("spec invariants are enforced") {
        CHECK_THROWS_AS(build_k_regular({8, 3, 0.1}), InvalidSpecError);  // odd K
        CHECK_THROWS_AS(build_k_regular({4, 4, 0.1}), InvalidSpecError);  // K >= n
    }
    SUBCASE("lambda_max equals K|r| within 1e-12") {
        for (double r : {0.05, 0.2, 0.27, -0.2}) {
            const GmrfModel m = build_k_regular({8, 4, r});
            CHECK(std::abs(spectral_analysis(m).lambda_max - 4.0 * std::abs(r)) < 1e-12);
        }
    }
}

TEST_CASE("critical_r") {
    CHECK(critical_r(4, 1.0) == doctest::Approx(0.2886751345948129).epsilon(1e-15));
    CHECK(critical_r(4, 2.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(critical_r(4, 3.999) > 10.0 * critical_r(4, 2.0) / 10.0);  // finite but large
    CHECK(critical_r(4, 3.999) == doctest::Approx(1.0 / (2.0 * std::sqrt(3.999 * 0.001))));
    CHECK_THROWS_AS(critical_r(4, 4.0), AlphaOutOfRangeError);
    CHECK_THROWS_AS(critical_r(4, 0.0), AlphaOutOfRangeError);
}

TEST_CASE("critical_alpha") {
    CHECK(critical_alpha(4, 0.27) == doctest::Approx(1.2445897016899576).epsilon(1e-14));
    // Kr -> 1+ limit approaches K/2
    CHECK(critical_alpha(4, 0.2500001) == doctest::Approx(2.0).epsilon(1e-3));
    CHECK_THROWS_AS(critical_alpha(4, 0.25), RegimeMismatchError);
}

TEST_CASE("r_valid") {
    CHECK(r_valid(8, 4) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r_valid(8, 2) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r_valid(6, 2) == doctest::Approx(0.5).epsilon(1e-14));
    // just inside the supremum validates, just outside does not
    CHECK_NOTHROW(build_k_regular({8, 4, 0.4999}));
    CHECK_THROWS_AS(build_k_regular({8, 4, 0.5001}), NotPositiveDefiniteError);
}

TEST_CASE("duality of the two critical formulas") {
    // r < r_c(K, alpha) <=> alpha < alpha_c(K, r) on a grid in the Kr > 1 regime
    for (double alpha : {0.6, 1.0, 1.5, 1.9}) {
        const double rc = critical_r(4, alpha);
        for (double r : {0.26, 0.28, 0.30, 0.33, 0.36}) {
            if (4.0 * r <= 1.0) continue;
            const double ac = critical_alpha(4, r);
            CHECK((r < rc) == (alpha < ac));
        }
    }
}

TEST_CASE("landscape agreement around the critical coupling") {
    // interior minimum on the symmetric profile iff r < r_c(4, 1)
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(8);
    const Eigen::VectorXd grid = linspace(0.6, 4.0, 1200);
    for (double r : {0.25, 0.27, 0.286675, 0.290675, 0.31}) {
        const GmrfModel m = build_k_regular({8, 4, r});
        const ProfileResult prof =
            symmetric_profile(m, AlphaAssignment::uniform(m, 1.0), grid, ones);
        const bool has_min = !prof.interior_minima.empty();
        CHECK(has_min == (r < 0.2886751345948129));
    }
}
