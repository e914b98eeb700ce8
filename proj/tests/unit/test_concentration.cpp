#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "phi4/concentration.hpp"

using namespace phi4;

namespace {

std::vector<double> uniform_times(int n, double T) {
    std::vector<double> t(n + 1);
    for (int i = 0; i <= n; ++i) t[i] = T * i / n;
    return t;
}

// E g^{2k} = (2k-1)!!
double gauss_moment(int m) {
    if (m % 2) return 0.0;
    double r = 1.0;
    for (int k = m - 1; k > 1; k -= 2) r *= k;
    return r;
}

// E[(g^2 - 1)^4] by binomial expansion over Gaussian moments
double he2_fourth_moment() {
    double s = 0.0;
    const int binom[] = {1, 4, 6, 4, 1};
    for (int j = 0; j <= 4; ++j) s += binom[j] * std::pow(-1.0, 4 - j) * gauss_moment(2 * j);
    return s;
}

}  // namespace

TEST(Parallel, MatchesSequentialOrder) {
    auto f = [](std::size_t r) { return std::sin(static_cast<double>(r)) * 3.0 + r; };
    auto a = parallel_replicas(97, 1, f), b = parallel_replicas(97, 4, f);
    ASSERT_EQ(a.size(), 97u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i], f(i));
        EXPECT_EQ(a[i], b[i]);
    }
}

TEST(Parallel, PropagatesExceptions) {
    EXPECT_THROW(parallel_replicas(10, 3,
                                   [](std::size_t r) -> double {
                                       if (r == 7) throw std::runtime_error("x");
                                       return 0.0;
                                   }),
                 std::runtime_error);
}

TEST(Holder, ConstantAndLinearPaths) {
    auto t = uniform_times(50, 1.0);
    std::vector<double> c(t.size(), 2.5), lin(t);
    EXPECT_EQ(holder_constant(c, t, 0.5), 0.0);
    EXPECT_NEAR(holder_constant(lin, t, 1.0), 1.0, 1e-12);
    // sqrt(t) has 1/2-Holder constant 1, attained against t = 0
    std::vector<double> sq;
    for (double x : t) sq.push_back(std::sqrt(x));
    EXPECT_NEAR(holder_constant(sq, t, 0.5), 1.0, 1e-12);
}

TEST(Grr, ConstantAndDomination) {
    EXPECT_THROW(grr_constant(8, 0.1), std::invalid_argument);
    const int p = 8;
    const double g = 0.5;
    EXPECT_NEAR(grr_constant(p, g), std::pow(8.0 * std::pow(4.0, 1.0 / p) * (g + 1.0 / p) / (g - 1.0 / p), p), 1e-6);
    auto t = uniform_times(200, 1.0);
    std::vector<double> lin(t);
    const double B = grr_bound(lin, t, p, g);
    EXPECT_GE(B, std::pow(holder_constant(lin, t, g), p));

    std::mt19937_64 eng(3);
    std::normal_distribution<double> nd;
    std::vector<double> bm{0.0};
    for (std::size_t i = 1; i < t.size(); ++i) bm.push_back(bm.back() + std::sqrt(t[i] - t[i - 1]) * nd(eng));
    EXPECT_GE(grr_bound(bm, t, p, 0.3), std::pow(holder_constant(bm, t, 0.3), p));
}

TEST(Hermite, LowOrders) {
    for (double x : {-1.3, 0.0, 0.7, 2.0}) {
        EXPECT_NEAR(hermite_he(0, x), 1.0, 1e-14);
        EXPECT_NEAR(hermite_he(1, x), x, 1e-14);
        EXPECT_NEAR(hermite_he(2, x), x * x - 1, 1e-13);
        EXPECT_NEAR(hermite_he(3, x), x * x * x - 3 * x, 1e-13);
    }
}

TEST(Nelson, WickOracleOrderTwo) {
    const double exact = he2_fourth_moment();
    EXPECT_DOUBLE_EQ(exact, 60.0);
    auto r = nelson_check(2, 4, 400000, 12);
    EXPECT_NEAR(r.moment_p, exact, 0.1 * exact);
    EXPECT_NEAR(r.second, 2.0, 0.05);
    EXPECT_TRUE(r.pass);
}

TEST(Nelson, GaussianFourthMoment) {
    auto r = nelson_check(1, 4, 200000, 5);
    EXPECT_NEAR(r.moment_p, 3.0, 0.1);
    EXPECT_LE(r.ratio, 1.0);
    EXPECT_THROW(nelson_check(1, 3, 10, 1), std::invalid_argument);
}

TEST(Tail, ClopperPearsonKnownValues) {
    auto [lo0, hi0] = clopper_pearson(0, 10);
    EXPECT_EQ(lo0, 0.0);
    EXPECT_NEAR(hi0, 1.0 - std::pow(0.025, 0.1), 1e-10);
    auto [lo1, hi1] = clopper_pearson(10, 10);
    EXPECT_NEAR(lo1, std::pow(0.025, 0.1), 1e-10);
    EXPECT_EQ(hi1, 1.0);
    auto [lo, hi] = clopper_pearson(5, 10);
    EXPECT_NEAR(lo, 0.187086, 1e-5);
    EXPECT_NEAR(hi, 0.812914, 1e-5);
}

TEST(Tail, ZeroThresholdAndDegenerate) {
    std::vector<double> s(300, 0.5);
    auto c = tail_from_samples(s, {0.0, 0.4, 0.6}, 1.0, 1.0, "x");
    EXPECT_EQ(c.p_hat, (std::vector<double>{1.0, 1.0, 0.0}));
    EXPECT_EQ(c.beyond_resolution[2], 1);
    auto d = tail_from_samples(s, {0.4, 0.6}, 1.0, 1.0, "x");
    EXPECT_EQ(d.p_hat, (std::vector<double>{1.0, 0.0}));
    EXPECT_TRUE(d.narrow_grid);
    EXPECT_THROW(tail_from_samples(s, {0.6, 0.4}, 1.0, 1.0, "x"), std::invalid_argument);
    EXPECT_THROW(tail_estimate([](std::size_t, std::uint64_t) { return 0.0; }, {0.1, 1.0}, 199, 1, 1.0, 1.0, "x"),
                 std::invalid_argument);
}

TEST(Tail, SeededEstimateReproducible) {
    auto stat = [](std::size_t, std::uint64_t seed) {
        std::mt19937_64 e(seed);
        return std::fabs(std::normal_distribution<double>()(e));
    };
    auto a = tail_estimate(stat, {0.5, 1.0, 2.0}, 400, 9, 1.0, 1.0, "g", 1);
    auto b = tail_estimate(stat, {0.5, 1.0, 2.0}, 400, 9, 1.0, 1.0, "g", 3);
    EXPECT_EQ(a.counts, b.counts);
}

TEST(Fit, ExactSyntheticLine) {
    TailCurve c;
    c.replicas = 1000;
    c.sigma = 0.5;
    for (int i = 1; i <= 6; ++i) {
        const double h = 0.1 * i;
        c.h.push_back(h);
        c.p_hat.push_back(0.8 * std::exp(-5.0 * h * h / 0.25));
    }
    auto f = gaussian_tail_fit(c);
    EXPECT_NEAR(f.slope_C, 5.0, 1e-10);
    EXPECT_NEAR(f.intercept_logD, std::log(0.8), 1e-10);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
    auto g = gaussian_tail_fit(c, FitAxis::h2);
    EXPECT_NEAR(g.slope_C, 20.0, 1e-9);
    c.p_hat.resize(3);
    c.h.resize(3);
    EXPECT_THROW(gaussian_tail_fit(c), std::invalid_argument);
}

TEST(Fit, RecoversHalfNormalRate) {
    // P(|g| > h) ~ exp(-h^2 / 2) up to a slowly varying prefactor
    std::mt19937_64 e(77);
    std::normal_distribution<double> nd;
    std::vector<double> s;
    for (int i = 0; i < 20000; ++i) s.push_back(std::fabs(nd(e)));
    auto grid = quantile_grid(s, 0.05, 0.002, 8);
    auto c = tail_from_samples(s, grid, 1.0, 1.0, "g");
    auto f = gaussian_tail_fit(c);
    EXPECT_GT(f.r_squared, 0.99);
    EXPECT_NEAR(f.slope_C, 0.5, 0.5 * 0.3);
}

TEST(QuantileGrid, SpansRequestedLevels) {
    std::vector<double> s;
    for (int i = 0; i < 1000; ++i) s.push_back(i / 999.0);
    auto h = quantile_grid(s, 0.5, 0.01, 10);
    ASSERT_EQ(h.size(), 10u);
    EXPECT_NEAR(h.front(), 0.5, 1e-3);
    EXPECT_NEAR(h.back(), 0.99, 1e-3);
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_GT(h[i], h[i - 1]);
}

TEST(Xi, ZeroPathsAndEarlyCut) {
    TorusGrid g(2, 8);
    DyadicPartition p(g);
    auto t = uniform_times(10, 1.0);
    std::vector<SpectralField> z(t.size(), SpectralField(g));
    EXPECT_EQ(xi_norm(z, z, t, 1.0, 0.05, p).value(), 0.0);
    std::vector<SpectralField> v = z;
    for (std::size_t j = 1; j < v.size(); ++j) v[j].coeffs[1] = 0.1 * j;
    EXPECT_EQ(xi_norm(v, z, t, 0.0, 0.05, p).value(), 0.0);
    auto x = xi_norm(v, z, t, 0.5, 0.05, p);
    EXPECT_GT(x.sup_v, 0.0);
    EXPECT_GT(x.holder_v, 0.0);
    EXPECT_EQ(x.sup_w, 0.0);
    EXPECT_LT(x.value(), xi_norm(v, z, t, 1.0, 0.05, p).value());
}
