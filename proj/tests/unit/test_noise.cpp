#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "phi4/noise.hpp"

using namespace phi4;

namespace {

constexpr double pi = std::numbers::pi;

CoefficientSet ou(double T = 1.0) { return CoefficientSet(TimePoly::constant(0.0), TimePoly::constant(-1.0), T); }

double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

std::size_t idx(const TorusGrid& g, std::array<int, 3> w) {
    bool conj = false;
    return g.index_of(w, conj);
}

}  // namespace

TEST(Seeds, StreamSeedsDiffer) {
    EXPECT_NE(stream_seed(1, 0, StreamRole::noise), stream_seed(1, 1, StreamRole::noise));
    EXPECT_NE(stream_seed(1, 0, StreamRole::noise), stream_seed(1, 0, StreamRole::ctilde));
    EXPECT_NE(stream_seed(1, 0, StreamRole::noise), stream_seed(2, 0, StreamRole::noise));
    EXPECT_EQ(stream_seed(5, 3, StreamRole::pilot), stream_seed(5, 3, StreamRole::pilot));
}

TEST(TimeGridTest, UniformAndExplicit) {
    TimeGrid u(0.5, 5);
    EXPECT_EQ(u.steps(), 5);
    EXPECT_NEAR(u.t(5), 0.5, 1e-15);
    EXPECT_NEAR(u.dt(2), 0.1, 1e-15);
    TimeGrid e(std::vector<double>{0.0, 0.1, 0.3});
    EXPECT_NEAR(e.dt(1), 0.2, 1e-15);
    EXPECT_THROW(TimeGrid(std::vector<double>{0.0, 0.2, 0.1}), std::invalid_argument);
    EXPECT_THROW(TimeGrid(1.0, 0), std::invalid_argument);
}

TEST(SampleNoise, Deterministic) {
    TorusGrid g(2, 16);
    TimeGrid tg(0.1, 10);
    auto a = sample_noise(g, tg, 1.0, 4, 42), b = sample_noise(g, tg, 1.0, 4, 42);
    for (int j = 0; j < tg.steps(); ++j)
        for (std::size_t i = 0; i < a.dW[j].size(); ++i) ASSERT_EQ(a.dW[j][i], b.dW[j][i]);
}

TEST(SampleNoise, CutoffAndConjugatePlane) {
    TorusGrid g(2, 16);
    TimeGrid tg(0.1, 3);
    auto r = sample_noise(g, tg, 1.0, 3, 7);
    for (std::size_t i = 0; i < g.spec_size(); ++i)
        if (g.norm_inf(i) > 3) EXPECT_EQ(r.dW[0][i], cplx(0, 0));
    // the k = 0 column of the half layout stores both w and -w
    for (int a = 1; a <= 3; ++a) {
        cplx p = r.dW[1][idx(g, {0, a, 0})], m = r.dW[1][idx(g, {0, -a, 0})];
        EXPECT_EQ(p, std::conj(m));
    }
    EXPECT_EQ(r.dW[1][0].imag(), 0.0);
}

TEST(SampleNoise, VarianceAndIndependence) {
    TorusGrid g(1, 16);
    const int R = 10000;
    TimeGrid tg(0.01 * R, R);  // one long realization, draws of a fixed mode are iid across steps
    auto r = sample_noise(g, tg, 1.0, 4, 3);
    const double dt = tg.dt();
    for (int w : {0, 1, 3}) {
        const std::size_t i = idx(g, {0, 0, w});
        double s2 = 0;
        for (int j = 0; j < R; ++j) s2 += std::norm(r.dW[j][i]);
        EXPECT_NEAR(s2 / R, dt, 0.05 * dt) << w;
    }
    const std::size_t i1 = idx(g, {0, 0, 1}), i2 = idx(g, {0, 0, 2});
    cplx c(0, 0);
    double n1 = 0, n2 = 0;
    for (int j = 0; j < R; ++j) {
        c += r.dW[j][i1] * std::conj(r.dW[j][i2]);
        n1 += std::norm(r.dW[j][i1]);
        n2 += std::norm(r.dW[j][i2]);
    }
    EXPECT_LE(std::abs(c) / std::sqrt(n1 * n2), 3.0 / std::sqrt(R));
}

TEST(KernelIntegral, ConstantAndPolynomialDrift) {
    CoefficientSet c = ou();
    const double L = 0.3, k = 2.5;
    EXPECT_NEAR(kernel_integral(c, 0.7, L, k, 2.0), -std::expm1(-k * L) / k, 1e-14);
    TimePoly a({-1.0, 0.8, -1.5});
    CoefficientSet q(TimePoly::constant(0.0), a, 1.0);
    TimePoly A = a.antiderivative();
    for (double s : {1.0, 2.0})
        for (double kap : {0.0, 3.0, 400.0}) {
            const double t = 0.9, LL = 0.6;
            auto f = [&](double u) { return std::exp(-kap * u + s * (A(t) - A(t - u) - a(t) * u)); };
            const double ref = simpson(f, 0, 0.05) + simpson(f, 0.05, LL);
            EXPECT_NEAR(kernel_integral(q, t, LL, kap, s), ref, 1e-10 * ref);
        }
}

TEST(StepKernelTest, VarianceRecursionMatchesClosedForm) {
    TimePoly a({-2.0, 1.0, -0.5});
    CoefficientSet c(TimePoly::constant(0.0), a, 1.0);
    TorusGrid g(2, 8);
    TimeGrid tg(1.0, 40);
    StepKernel k(g, c, tg);
    for (int n2 : {0, 1, 5}) {
        std::size_t i = 0;
        while (g.norm2(i) != n2) ++i;
        const int cls = k.class_of(i);
        double v = 0;
        for (int j = 0; j < tg.steps(); ++j) v = k.prop(j, cls) * k.prop(j, cls) * v + k.sd(j, cls) * k.sd(j, cls);
        EXPECT_NEAR(v, mode_variance(c, n2, 1.0), 1e-12 * (1 + v));
    }
}

TEST(BuildI, ZeroSigma) {
    TorusGrid g(2, 8);
    TimeGrid tg(0.2, 10);
    auto r = sample_noise(g, tg, 0.0, 4, 1);
    for (const auto& f : build_I(r, ou()))
        for (const auto& c : f.coeffs) EXPECT_EQ(c, cplx(0, 0));
}

TEST(BuildI, Mode0VarianceOU) {
    TorusGrid g(1, 4);
    const double sigma = 0.7, t = 0.5;
    TimeGrid tg(t, 10);
    const int R = 2000;
    double s = 0, s2 = 0;
    for (int r = 0; r < R; ++r) {
        auto path = build_I(sample_noise(g, tg, sigma, 0, stream_seed(9, r, StreamRole::noise)), ou());
        const double v = std::norm(path.back().coeffs[0]);
        s += v;
        s2 += v * v;
    }
    const double m = s / R, se = std::sqrt((s2 / R - m * m) / R);
    const double exact = sigma * sigma * (1 - std::exp(-2 * t)) / 2;
    EXPECT_NEAR(m, exact, 3 * se);
    EXPECT_NEAR(m, exact, 0.05 * exact * 3);
}

TEST(BuildI, ModeVarianceBound) {
    TimePoly a({-1.5, 0.5});
    CoefficientSet c(TimePoly::constant(0.0), a, 1.0);
    for (int n2 : {0, 1, 2, 9, 40})
        for (double t : {0.1, 0.5, 1.0})
            EXPECT_LE(mode_variance(c, n2, t), 1.0 / (2 * (c.a_plus() + 4 * pi * pi * n2)));
}

TEST(IntegratorI, ConstantSourceFirstOrder) {
    TorusGrid g(1, 4);
    CoefficientSet c = ou();
    double prev = 0;
    for (int M : {20, 40, 80}) {
        TimeGrid tg(1.0, M);
        std::vector<SpectralField> f(M + 1, SpectralField(g));
        for (auto& x : f) x.coeffs[0] = 1.0;
        auto I = integrator_I(f, c, tg);
        const double err = std::fabs(I.back().coeffs[0].real() - (1 - std::exp(-1.0)));
        if (prev > 0) EXPECT_NEAR(prev / err, 2.0, 0.15);
        prev = err;
    }
}

TEST(IntegratorI, ZeroAndLinear) {
    TorusGrid g(2, 8);
    CoefficientSet c = ou();
    TimeGrid tg(0.5, 10);
    std::vector<SpectralField> f(11, SpectralField(g)), h(11, SpectralField(g)), s(11, SpectralField(g));
    for (auto& x : integrator_I(f, c, tg))
        for (const auto& q : x.coeffs) EXPECT_EQ(q, cplx(0, 0));
    for (int j = 0; j <= 10; ++j)
        for (std::size_t i = 0; i < f[j].coeffs.size(); ++i) {
            f[j].coeffs[i] = cplx(std::sin(i + j), 0.1 * j);
            h[j].coeffs[i] = cplx(std::cos(3.0 * i), -0.2 * j);
            s[j].coeffs[i] = f[j].coeffs[i] + h[j].coeffs[i];
        }
    auto a = integrator_I(f, c, tg), b = integrator_I(h, c, tg), ab = integrator_I(s, c, tg);
    for (int j = 0; j <= 10; ++j)
        for (std::size_t i = 0; i < f[j].coeffs.size(); ++i)
            EXPECT_NEAR(std::abs(ab[j].coeffs[i] - a[j].coeffs[i] - b[j].coeffs[i]), 0.0, 1e-12);
}

TEST(RenormC, Examples) {
    CoefficientSet c = ou();
    EXPECT_EQ(renorm_c(c, 3, 4, 0.0), 0.0);
    EXPECT_NEAR(renorm_c(c, 3, 0, 0.4), (1 - std::exp(-0.8)) / 2, 1e-14);
    EXPECT_NEAR(renorm_c(c, 3, 4, 0.4, 2.0), 4 * renorm_c(c, 3, 4, 0.4), 1e-12);
    // brute-force sum over the cube
    double s = 0;
    for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b) {
            const double lam = 4 * pi * pi * (a * a + b * b);
            s += (1 - std::exp(-2 * (1 + lam) * 0.5)) / (2 * (1 + lam));
        }
    EXPECT_NEAR(renorm_c(c, 2, 2, 0.5), s, 1e-13);
}

TEST(RenormC, LinearInCutoff) {
    CoefficientSet c = ou();
    std::vector<double> n{4, 8, 16, 32}, y;
    for (double v : n) y.push_back(renorm_c(c, 3, static_cast<int>(v), 0.5));
    double mx = 0, my = 0;
    for (int i = 0; i < 4; ++i) {
        mx += n[i] / 4;
        my += y[i] / 4;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < 4; ++i) {
        sxx += (n[i] - mx) * (n[i] - mx);
        sxy += (n[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    EXPECT_GT(sxy / sxx, 0);
    EXPECT_GE(sxy * sxy / (sxx * syy), 0.99);
}

TEST(RenormC, GridVariant) {
    CoefficientSet c = ou();
    TorusGrid g(3, 16);
    EXPECT_NEAR(renorm_c_grid(c, g, 4, 0.5), renorm_c(c, 3, 4, 0.5), 1e-13);
    // at n = N/2 the grid holds one representative per Nyquist pair
    EXPECT_LT(renorm_c_grid(c, g, 8, 0.5), renorm_c(c, 3, 8, 0.5));
}

TEST(RenormCTilde, ZeroAndQuarticScaling) {
    TorusGrid g(2, 8);
    CoefficientSet c = ou();
    TimeGrid tg(0.2, 10);
    CTildeOptions o;
    o.replicas = 20;
    o.seed = 4;
    o.sigma = 0.0;
    EXPECT_EQ(renorm_c_tilde(g, 4, c, tg, o).mean, 0.0);
    o.sigma = 1.0;
    const double m1 = renorm_c_tilde(g, 4, c, tg, o).mean;
    o.sigma = 2.0;
    const double m2 = renorm_c_tilde(g, 4, c, tg, o).mean;
    EXPECT_NEAR(m2, 16 * m1, 1e-10 * std::fabs(m2));
}

TEST(ResonantMean, MatchesPaddedResonant) {
    TorusGrid g(2, 16);
    DyadicPartition p(g);
    SpectralField f(g), h(g);
    for (std::size_t i = 0; i < f.coeffs.size(); ++i) {
        f.coeffs[i] = cplx(std::sin(1.0 + i), std::cos(2.0 * i));
        h.coeffs[i] = cplx(std::cos(0.5 * i), std::sin(3.0 + i));
    }
    // make them real fields
    f = dft_forward(dft_inverse(f));
    h = dft_forward(dft_inverse(h));
    SpectralField r = resonant(f, h, p);
    EXPECT_NEAR(resonant_mean(f, h, p), r.coeffs[0].real(), 1e-12);
}

TEST(Covariance, Examples) {
    CoefficientSet c = ou();
    EXPECT_EQ(covariance_increment_check(c, 3, {0, 0, 0}, 0.4, 0.4, 0.5, 10, 1).estimate, 0.0);
    const double s = 0.3, t = 0.7;
    auto r = covariance_increment_check(c, 3, {0, 0, 0}, s, t, 0.5, 20000, 2);
    const double P = std::exp(-(t - s));
    const double exact = (1 - P) * (1 - P) * (1 - std::exp(-2 * s)) / 2 + (1 - std::exp(-2 * (t - s))) / 2;
    EXPECT_NEAR(r.exact, exact, 1e-13);
    EXPECT_NEAR(r.estimate, exact, 0.05 * exact);
    double worst = 0;
    for (int w = 1; w <= 8; ++w)
        for (auto [a, b] : {std::pair{0.0, 0.1}, std::pair{0.2, 0.25}, std::pair{0.5, 1.0}})
            worst = std::max(worst, covariance_increment_check(c, 3, {w, 0, 0}, a, b, 0.5, 2000, w).ratio);
    EXPECT_TRUE(std::isfinite(worst));
    EXPECT_THROW(covariance_increment_check(c, 1, {0, 1, 0}, 0.1, 0.2, 0.5, 10, 1), std::invalid_argument);
}
