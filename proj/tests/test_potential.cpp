#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "membrane/linalg.hpp"
#include "membrane/potential.hpp"

using namespace membrane;

namespace {

// The potential used by the published experiments: theta = 4, theta_c = 5,
// mu0 = 0, Taylor cutoff delta = 0.02.
PotentialSpec experiment_potential() {
    return {LogExtendedPotential{4.0, 5.0, 0.0, 0.02}};
}

// Independent bisection for s + lambda (theta/2) ln((1+s)/(1-s)) = r, used to
// freeze resolvent expectations.
double bisect_resolvent(double theta, double lambda, double r) {
    auto f = [&](double s) { return s + lambda * 0.5 * theta * std::log((1 + s) / (1 - s)) - r; };
    double lo = -1.0 + 1e-17, hi = 1.0 - 1e-17;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("split evaluation") {
    SUBCASE("experiment potential at the origin") {
        const SplitEval e = eval_split(experiment_potential(), 0.0);
        CHECK(e.w1 == 0.0);
        CHECK(e.w2 == 0.0);
        CHECK(e.dw1 == 0.0);
        CHECK(e.dw2 == 0.0);
    }

    SUBCASE("total derivative vanishes near the published minima") {
        for (double s : {0.71, -0.71}) {
            const SplitEval e = eval_split(experiment_potential(), s);
            CHECK(std::abs(e.dtotal()) < 5e-3);
        }
    }

    SUBCASE("polynomial potential, direct evaluation") {
        const PotentialSpec poly{PolynomialPotential{1.0, 2.0, 0.0, 0.0}};
        const SplitEval e = eval_split(poly, 1.0);
        CHECK(e.total() == doctest::Approx(-1.0).epsilon(1e-15));
        CHECK(e.dtotal() == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(e.w1 == doctest::Approx(1.0));
        CHECK(e.w2 == doctest::Approx(-2.0));
    }

    SUBCASE("seams are C1 for W and C2 for the convex part") {
        const LogExtendedPotential log_pot{4.0, 5.0, 0.3, 0.02};
        const PotentialSpec spec{log_pot};
        for (double sign : {1.0, -1.0}) {
            const double seam = sign * (1.0 - log_pot.delta);
            const double h = sign * 1e-8;
            // Extrapolate each branch to the seam from its own side; the
            // one-sided extrapolation error is O(h^2 W''), far below the
            // asserted matching tolerance.
            const SplitEval inside = eval_split(spec, seam - h);
            const SplitEval outside = eval_split(spec, seam + h);
            const double value_in = inside.total() + h * inside.dtotal();
            const double value_out = outside.total() - h * outside.dtotal();
            CHECK(std::abs(value_in - value_out) < 1e-12);
            const double slope_in = inside.dtotal() + h * (convex_curvature(spec, seam - h) -
                                                           log_pot.theta_c);
            const double slope_out = outside.dtotal() - h * (convex_curvature(spec, seam + h) -
                                                             log_pot.theta_c);
            CHECK(std::abs(slope_in - slope_out) < 1e-10);
            // Second derivative of W1 matches across the seam by construction
            // (observed, not required by the scheme).
            CHECK(convex_curvature(spec, seam - h) ==
                  doctest::Approx(convex_curvature(spec, seam + h)).epsilon(1e-6));
        }
    }

    SUBCASE("quadratic branch applies beyond the seams") {
        const PotentialSpec spec = experiment_potential();
        // W1'' is constant outside [-0.98, 0.98].
        CHECK(convex_curvature(spec, 1.5) == doctest::Approx(convex_curvature(spec, 0.98)));
        CHECK(convex_curvature(spec, 1.5) == doctest::Approx(convex_curvature(spec, 7.0)));
        // W2 keeps its global form.
        const SplitEval e = eval_split(spec, 1.5);
        CHECK(e.w2 == doctest::Approx(-2.5 * 1.5 * 1.5));
    }
}

TEST_CASE("derivative and convexity properties") {
    std::mt19937_64 rng(21);
    const PotentialSpec specs[] = {
        experiment_potential(),
        {PolynomialPotential{1.0, 2.0, 0.5, 0.1}},
        {MoreauYosidaPotential{LogExtendedPotential{4.0, 5.0, 0.0, 0.02}, 0.1}},
    };

    SUBCASE("finite-difference second derivative of W1 is nonnegative") {
        std::uniform_real_distribution<double> dist(-1.5, 1.5);
        for (const auto& spec : specs) {
            for (int i = 0; i < 1000; ++i) {
                const double s = dist(rng);
                const double h = 1e-4;
                const double fd2 = (eval_split(spec, s + h).w1 - 2.0 * eval_split(spec, s).w1 +
                                    eval_split(spec, s - h).w1) /
                                   (h * h);
                CHECK(fd2 >= -1e-8);
            }
        }
    }

    SUBCASE("central differences match the assembled derivative") {
        std::uniform_real_distribution<double> dist(-0.9, 0.9);
        for (const auto& spec : specs) {
            for (int i = 0; i < 100; ++i) {
                const double s = dist(rng);
                const double h = 1e-5;
                const double fd =
                    (eval_split(spec, s + h).total() - eval_split(spec, s - h).total()) / (2 * h);
                const double exact = eval_split(spec, s).dtotal();
                CHECK(fd == doctest::Approx(exact).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("resolvent") {
    const LogExtendedPotential base{4.0, 5.0, 0.0, 0.02};

    SUBCASE("odd symmetry pins the origin") {
        CHECK(resolvent(base, 1.0, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
    }

    SUBCASE("identity limit for vanishing lambda") {
        CHECK(resolvent(base, 1e-8, 0.5) == doctest::Approx(0.5).epsilon(1e-6));
    }

    SUBCASE("frozen bisection value at lambda = 1, r = 2") {
        // Root of s + 2 ln((1+s)/(1-s)) = 2, computed by 200-step bisection.
        const double frozen = 0.38347768711039666;
        CHECK(resolvent(base, 1.0, 2.0) == doctest::Approx(frozen).epsilon(1e-12));
        CHECK(resolvent(base, 1.0, 2.0) ==
              doctest::Approx(bisect_resolvent(4.0, 1.0, 2.0)).epsilon(1e-12));
    }

    SUBCASE("residual is met across magnitudes") {
        const std::pair<double, std::vector<double>> cases[] = {
            {1e-4, {-0.9, -0.2, 0.7, 0.9}},
            {1e-2, {-1.2, -0.2, 0.7, 1.2}},
            {1.0, {-3.0, -0.2, 0.7, 10.0}},
            {50.0, {-30.0, -0.2, 0.7, 100.0}},
        };
        for (const auto& [lambda, rs] : cases) {
            for (double r : rs) {
                const double s = resolvent(base, lambda, r);
                CHECK(std::abs(s) < 1.0);
                const double residual =
                    s + lambda * 2.0 * (std::log1p(s) - std::log1p(-s)) - r;
                CHECK(std::abs(residual) <= 1e-12);
            }
        }
    }

    SUBCASE("roots at the representability edge stay bracketed") {
        // For small lambda the root sits within a few ulp of +-1 and the
        // residual floor is f'(s) * ulp, far above 1e-12; the solver returns
        // the best representable root instead of failing.
        for (double r : {-1.005, 1.005}) {
            const double s = resolvent(base, 1e-4, r);
            CHECK(std::abs(s) < 1.0);
            const double residual = s + 1e-4 * 2.0 * (std::log1p(s) - std::log1p(-s)) - r;
            CHECK(std::abs(residual) <= 1e-7);
        }
        CHECK(resolvent(base, 1e-4, 1.005) > resolvent(base, 1e-4, 0.9));
    }

    SUBCASE("invalid lambda") {
        CHECK_THROWS_AS(resolvent(base, 0.0, 0.5), std::invalid_argument);
    }
}

TEST_CASE("moreau-yosida regularization") {
    const LogExtendedPotential base{4.0, 5.0, 0.0, 0.02};

    SUBCASE("vanishes at the origin") {
        const auto eval = moreau_yosida_eval(base, 0.5, 0.0);
        CHECK(eval.value == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(eval.derivative == doctest::Approx(0.0).epsilon(1e-14));
    }

    SUBCASE("sandwich 0 <= W1_lambda <= W1 inside the domain") {
        std::mt19937_64 rng(22);
        std::uniform_real_distribution<double> dist(-0.97, 0.97);
        for (double lambda : {1.0, 0.1, 0.01}) {
            for (int i = 0; i < 300; ++i) {
                const double r = dist(rng);
                const auto eval = moreau_yosida_eval(base, lambda, r);
                const double w1 = 2.0 * ((1 + r) * std::log1p(r) + (1 - r) * std::log1p(-r));
                CHECK(eval.value >= -1e-12);
                CHECK(eval.value <= w1 + 1e-12);
            }
        }
    }

    SUBCASE("monotone convergence to W1(0.5)") {
        const double w1_limit = 0.52324814376454784;  // 2 (1.5 ln 1.5 + 0.5 ln 0.5)
        double previous = -1.0;
        for (double lambda : {1.0, 0.1, 0.01, 0.001}) {
            const auto eval = moreau_yosida_eval(base, lambda, 0.5);
            CHECK(eval.value >= previous - 1e-12);
            CHECK(eval.value <= w1_limit + 1e-12);
            // First-order gap: W1(r) - W1_lambda(r) ~ (lambda/2) W1'(r)^2.
            CHECK(w1_limit - eval.value <= 0.6 * lambda * 2.0 * std::log(3.0) * 2.0 *
                                               std::log(3.0));
            previous = eval.value;
        }
    }

    SUBCASE("derivative is 1/lambda-Lipschitz") {
        std::mt19937_64 rng(23);
        std::uniform_real_distribution<double> dist(-1.5, 1.5);
        for (double lambda : {1.0, 0.1, 0.01}) {
            for (int i = 0; i < 300; ++i) {
                const double r1 = dist(rng), r2 = dist(rng);
                const double d1 = moreau_yosida_eval(base, lambda, r1).derivative;
                const double d2 = moreau_yosida_eval(base, lambda, r2).derivative;
                CHECK(std::abs(d1 - d2) <= std::abs(r1 - r2) / lambda + 1e-12);
            }
        }
    }
}
