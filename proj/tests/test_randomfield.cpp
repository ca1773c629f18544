#include "mesofrac/randomfield.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace mesofrac;

TEST_SUITE_BEGIN("randomfield");

TEST_CASE("normal quantile spot values and cdf inversion") {
    CHECK(normal_quantile(0.5) == 0.0);
    CHECK(normal_quantile(0.001) == doctest::Approx(-3.0902323061678132).epsilon(1e-14));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.9599639845400545).epsilon(1e-14));
    CHECK(normal_quantile(0.495) == doctest::Approx(-0.012533469508069276).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(normal_quantile(0.999) == doctest::Approx(3.0902323061678132).epsilon(1e-14));
    CHECK(normal_quantile(0.001) == -normal_quantile(0.999));

    for (double p : {1e-6, 1e-3, 0.2, 0.5, 0.77, 1 - 1e-4}) {
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
    }
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS((void)normal_quantile(0.0), FieldError);
    CHECK_THROWS_AS((void)normal_quantile(1.0), FieldError);
}

TEST_CASE("grafted marginal hits the prescribed moments") {
    struct Case {
        double delta, xgr;
    };
    const Case cases[] = {{0.07, 0.7838363755637765},
                          {0.14, 0.56717743633618567},
                          {0.28, 0.13391036558473923}};
    for (const Case& c : cases) {
        CAPTURE(c.delta);
        const GraftedMarginal g = GraftedMarginal::build(c.delta);
        CHECK(g.delta_h() == c.delta);
        CHECK(g.mean() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(g.stddev() == doctest::Approx(c.delta).epsilon(1e-8));
        CHECK(g.graft_point() == doctest::Approx(c.xgr).epsilon(1e-9));
        CHECK(g.p_graft() == doctest::Approx(1e-3).epsilon(1e-15));

        // the tail meets the body exactly at the graft quantile
        CHECK(g.cdf(g.graft_point()) == doctest::Approx(1e-3).epsilon(1e-9));
        CHECK(g.inverse_cdf(1e-3) == doctest::Approx(g.graft_point()).epsilon(1e-9));

        // inverse round trip across both branches
        for (double u : {1e-5, 5e-4, 2e-3, 0.2, 0.5, 0.9, 0.9999}) {
            const double x = g.inverse_cdf(u);
            CHECK(g.cdf(x) == doctest::Approx(u).epsilon(1e-9));
        }

        // pdf is the cdf derivative away from the graft point
        for (double x : {0.5 * c.xgr, 1.0, 1.0 + 2 * c.delta}) {
            const double h = 1e-6;
            const double slope = (g.cdf(x + h) - g.cdf(x - h)) / (2 * h);
            CHECK(g.pdf(x) == doctest::Approx(slope).epsilon(1e-5));
        }
    }
}

TEST_CASE("weibull tail exponent shapes the far left tail") {
    const GraftedMarginal g = GraftedMarginal::build(0.14);
    // P(X <= x) = (x / lambda)^m below the graft point: scaling x by 2^(1/24)
    // doubles the probability
    const double u = 1e-5;
    const double x = g.inverse_cdf(u);
    const double x2 = g.inverse_cdf(2 * u);
    CHECK(x2 / x == doctest::Approx(std::pow(2.0, 1.0 / 24.0)).epsilon(1e-6));
    CHECK(x > 0.0); // strength stays positive however deep the tail
}

TEST_CASE("zero-correlation field: independent marginal draws") {
    const GraftedMarginal g = GraftedMarginal::build(0.14);
    const Box dom{{0, 0, 0}, {100, 100, 100}};
    FieldSpec spec;
    spec.mode = CorrelationMode::Zero;
    spec.delta_h = 0.14;

    std::vector<Vec3> pts(20000);
    for (std::size_t i = 0; i < pts.size(); ++i)
        pts[i] = Vec3(static_cast<double>(i % 100), static_cast<double>(i / 100 % 100), 0.5);

    const FieldRealization f = sample_field(spec, pts, dom, g, 99, 1);
    CHECK(f.h.size() == pts.size());
    CHECK(f.delta_h == 0.14);
    CHECK(f.realization_index == 1);

    double m1 = 0, m2 = 0;
    for (double h : f.h) {
        m1 += h;
        m2 += h * h;
    }
    m1 /= static_cast<double>(f.h.size());
    m2 = m2 / static_cast<double>(f.h.size()) - m1 * m1;
    CHECK(m1 == doctest::Approx(1.0).epsilon(4e-3));
    CHECK(std::sqrt(m2) == doctest::Approx(0.14).epsilon(3e-2));

    // deterministic in (seed, index), distinct across indices
    const FieldRealization f2 = sample_field(spec, pts, dom, g, 99, 1);
    CHECK(f.h == f2.h);
    const FieldRealization f3 = sample_field(spec, pts, dom, g, 99, 2);
    CHECK(f.h != f3.h);
}

TEST_CASE("infinite-correlation field: one stratified value per realization") {
    const GraftedMarginal g = GraftedMarginal::build(0.14);
    const Box dom{{0, 0, 0}, {10, 10, 10}};
    FieldSpec spec;
    spec.mode = CorrelationMode::Infinite;
    spec.delta_h = 0.14;
    spec.n_sim = 100;

    const std::vector<Vec3> pts{{1, 1, 1}, {2, 5, 9}, {9, 9, 9}};
    const FieldRealization f = sample_field(spec, pts, dom, g, 7, 50);
    REQUIRE(f.h.size() == 3);
    CHECK(f.h[0] == doctest::Approx(0.99822852570851484).epsilon(1e-12));
    CHECK(f.h[1] == f.h[0]);
    CHECK(f.h[2] == f.h[0]);

    // stratified values sweep the marginal monotonically
    double prev = 0.0;
    for (int i = 1; i <= 100; ++i) {
        const double h = sample_field(spec, {{0, 0, 0}}, dom, g, 7, i).h[0];
        CHECK(h > prev);
        CHECK(h == doctest::Approx(g.inverse_cdf((i - 0.5) / 100.0)).epsilon(1e-12));
        prev = h;
    }
}

TEST_CASE("correlated sampler keeps the anchor-grid spectrum") {
    // quasi-1D box: the x axis carries a 17-node grid at ell/4 spacing, the
    // thin axes collapse to 2 nodes each
    const Box dom{{0, 0, 0}, {100, 1, 1}};
    const double ell = 25.0;
    CorrelatedGaussian cg(dom, ell);

    // replicate the retained-mode count from an independent eigensolve
    auto axis_eigs = [](int n, double len, double ell_rho) {
        Eigen::MatrixXd C(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double dx = (len * i / (n - 1) - len * j / (n - 1)) / ell_rho;
                C(i, j) = std::exp(-dx * dx);
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
        return es.eigenvalues();
    };
    const auto ex = axis_eigs(17, 100.0, ell);
    const auto ey = axis_eigs(2, 1.0, ell);

    // frozen 1D spectrum head for the 17-node squared-exponential kernel
    CHECK(ex[16] == doctest::Approx(6.446301780354716).epsilon(1e-12));
    CHECK(ex[15] == doctest::Approx(4.851860764433007).epsilon(1e-12));
    CHECK(ex.sum() == doctest::Approx(17.0).epsilon(1e-12));

    std::vector<double> prods;
    for (int i = 0; i < 17; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                prods.push_back(std::max(ex[i], 0.0) * std::max(ey[j], 0.0) *
                                std::max(ey[k], 0.0));
    std::sort(prods.begin(), prods.end(), std::greater<>());
    const double total = 17.0 * 2.0 * 2.0;
    double kept = 0.0;
    int k_needed = 0;
    while (kept < 0.995 * total) kept += prods[k_needed++];
    CHECK(cg.n_modes() == k_needed);
    CHECK(cg.captured_variance_fraction() == doctest::Approx(kept / total).epsilon(1e-9));
    CHECK(cg.captured_variance_fraction() >= 0.995);
}

TEST_CASE("correlated sampler reproduces variance and covariance") {
    const Box dom{{0, 0, 0}, {100, 1, 1}};
    const double ell = 25.0;
    const CorrelatedGaussian cg(dom, ell);

    const std::vector<Vec3> pts{{10, 0.5, 0.5}, {35, 0.5, 0.5}, {60, 0.5, 0.5}, {90, 0.5, 0.5}};
    const int n_real = 20000;
    std::vector<double> sum(pts.size(), 0.0), sum2(pts.size(), 0.0);
    double cross01 = 0.0, cross02 = 0.0;
    for (int r = 0; r < n_real; ++r) {
        rng::Stream rs(31, "test.field", static_cast<std::uint64_t>(r));
        const auto g = cg.sample(pts, rs);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            sum[i] += g[i];
            sum2[i] += g[i] * g[i];
        }
        cross01 += g[0] * g[1];
        cross02 += g[0] * g[2];
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double mean = sum[i] / n_real;
        const double var = sum2[i] / n_real - mean * mean;
        CHECK(std::abs(mean) < 0.03);
        // per-point normalization pins the marginal variance at one
        CHECK(var == doctest::Approx(1.0).epsilon(0.03));
    }
    const double c01 = cross01 / n_real; // distance 25 -> exp(-1)
    const double c02 = cross02 / n_real; // distance 50 -> exp(-4)
    CHECK(c01 == doctest::Approx(std::exp(-1.0)).epsilon(0.12));
    CHECK(std::abs(c02 - std::exp(-4.0)) < 0.03);

    // identical stream, identical draw
    rng::Stream a(5, "x", 1), b(5, "x", 1);
    CHECK(cg.sample(pts, a) == cg.sample(pts, b));
}

TEST_CASE("finite-correlation field goes through the gaussian copula") {
    const GraftedMarginal g = GraftedMarginal::build(0.14);
    const Box dom{{0, 0, 0}, {50, 50, 50}};
    const CorrelatedGaussian cg(dom, 40.0);
    FieldSpec spec;
    spec.mode = CorrelationMode::Finite;
    spec.ell_rho = 40.0;
    spec.delta_h = 0.14;

    const std::vector<Vec3> pts{{5, 5, 5}, {6, 5, 5}, {45, 45, 45}};
    const FieldRealization f = sample_field(spec, pts, dom, g, 12, 3, &cg);
    REQUIRE(f.h.size() == 3);
    // neighbouring points nearly share their value, distant ones do not
    CHECK(std::abs(f.h[0] - f.h[1]) < 0.02);
    for (double h : f.h) CHECK(h > 0.0);

    const FieldRealization f2 = sample_field(spec, pts, dom, g, 12, 3, &cg);
    CHECK(f.h == f2.h);

    // without a shared sampler an equivalent one is built on the fly
    const FieldRealization f3 = sample_field(spec, pts, dom, g, 12, 3, nullptr);
    CHECK(f3.h == f.h);
}

TEST_CASE("field rescaling is the exact affine map") {
    FieldRealization f;
    f.delta_h = 0.14;
    f.h = {0.3, 1.0, 1.9, 0.001};
    const FieldRealization r = rescale_field(f, 0.28);
    REQUIRE(r.h.size() == 4);
    CHECK(r.delta_h == 0.28);
    CHECK(r.h[0] == 1e-3); // 1 + (0.3 - 1) * 2 = -0.4, caught by the floor
    CHECK(r.h[1] == 1.0);
    CHECK(r.h[2] == 1.0 + 0.9 * 2.0);
    CHECK(r.h[3] >= 1e-3);

    // the floor keeps strengths positive
    for (double h : r.h) CHECK(h >= 1e-3);

    // rescaling to the source CoV is the identity up to the affine rounding
    const FieldRealization same = rescale_field(f, 0.14);
    for (std::size_t i = 0; i < f.h.size(); ++i)
        CHECK(same.h[i] == doctest::Approx(f.h[i]).epsilon(1e-15));
}

TEST_CASE("strength scaling rules") {
    const double ft = 2.0, Gt = 0.025, E0 = 27000.0;
    const double base = E0 * Gt / (ft * ft);

    SUBCASE("ft-only scaling leaves Gt alone") {
        const ContactStrength s = apply_scaling(ScalingRule::FtOnly, ft, Gt, E0, 1.3);
        CHECK(s.ft == doctest::Approx(2.6).epsilon(1e-15));
        CHECK(s.Gt == Gt);
        CHECK(s.l_ch == doctest::Approx(base / (1.3 * 1.3)).epsilon(1e-14));
    }
    SUBCASE("proportional scaling divides the length scale once") {
        const ContactStrength s = apply_scaling(ScalingRule::FtAndGt, ft, Gt, E0, 1.3);
        CHECK(s.ft == doctest::Approx(2.6).epsilon(1e-15));
        CHECK(s.Gt == doctest::Approx(0.0325).epsilon(1e-15));
        CHECK(s.l_ch == doctest::Approx(base / 1.3).epsilon(1e-14));
    }
    SUBCASE("quadratic scaling keeps the length scale bit-identical") {
        const ContactStrength ref = apply_scaling(ScalingRule::FtAndGt2, ft, Gt, E0, 1.0);
        for (double h : {1e-3, 0.2, 0.77, 1.0, 1.5, 3.9}) {
            const ContactStrength s = apply_scaling(ScalingRule::FtAndGt2, ft, Gt, E0, h);
            CHECK(s.l_ch == ref.l_ch); // exact equality, no tolerance
            CHECK(s.ft == doctest::Approx(ft * h).epsilon(1e-15));
            CHECK(s.Gt == doctest::Approx(Gt * h * h).epsilon(1e-14));
        }
    }
}

TEST_CASE("quadratic scaling inflates mean fracture energy by 1 + delta^2") {
    const GraftedMarginal g = GraftedMarginal::build(0.28);
    rng::Stream rs(17, "test.alt2", 0);
    double m2 = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        const double h = g.inverse_cdf(rs.uniform01());
        m2 += h * h;
    }
    m2 /= n;
    CHECK(m2 == doctest::Approx(1.0784).epsilon(4e-3));
}

TEST_SUITE_END();
