// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "phi4/experiment.hpp"

using namespace phi4;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

RealField gaussian_field(const TorusGrid& g, std::uint64_t seed) {
    std::mt19937_64 e(seed);
    std::normal_distribution<double> nd;
    RealField f(g);
    for (double& x : f.values) x = nd(e);
    return f;
}

// Gaussian coefficients damped like |w|^{-s}; a rough but summable field
SpectralField rough_field(const TorusGrid& g, double s, std::uint64_t seed) {
    SpectralField f = dft_forward(gaussian_field(g, seed));
    for (std::size_t i = 0; i < f.coeffs.size(); ++i) f.coeffs[i] *= std::pow(1.0 + g.norm2(i), -s / 2.0);
    return f;
}

double rel(const SpectralField& a, const SpectralField& b) {
    double d = 0, m = 0;
    for (std::size_t i = 0; i < a.coeffs.size(); ++i) {
        d = std::max(d, std::abs(a.coeffs[i] - b.coeffs[i]));
        m = std::max(m, std::abs(b.coeffs[i]));
    }
    return m > 0 ? d / m : d;
}

double rel(const std::vector<SpectralField>& a, const std::vector<SpectralField>& b) {
    double d = 0, m = 0;
    for (std::size_t j = 0; j < a.size(); ++j)
        for (std::size_t i = 0; i < a[j].coeffs.size(); ++i) {
            d = std::max(d, std::abs(a[j].coeffs[i] - b[j].coeffs[i]));
            m = std::max(m, std::abs(b[j].coeffs[i]));
        }
    return m > 0 ? d / m : d;
}

CoefficientConfig gamma_config(double gamma, double phibar0) {
    CoefficientConfig cc;
    cc.gamma = TimePoly::constant(gamma);
    cc.phibar0 = phibar0;
    return cc;
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
    constexpr double kPartitionTol = 1e-12;
    constexpr double kIdentityTol = 1e-10;
    constexpr int kPairs = 100;
    TorusGrid g(2, 64);
    DyadicPartition p(g);
    PartitionReport pr = check_partition(p);
    double recon = 0, decomp = 0;
    for (int r = 0; r < kPairs; ++r) {
        SpectralField f = dft_forward(gaussian_field(g, 1000 + 2 * r));
        SpectralField h = dft_forward(gaussian_field(g, 1001 + 2 * r));
        BlockDecomposition b = lp_blocks(f, p);
        RealField sum(g);
        for (const auto& blk : b.blocks)
            for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] += blk.values[i];
        recon = std::max(recon, rel(dft_forward(sum), f));
        SpectralField parts = para_lt(f, h, p) + resonant(f, h, p) + para_gt(f, h, p);
        decomp = std::max(decomp, rel(parts, dealiased_product(f, h)));
    }
    Outcome o;
    o.pass = pr.pass(kPartitionTol) && recon <= kIdentityTol && decomp <= kIdentityTol;
    o.detail = fmt("partition sum error %.2e, support violation %.2e, reconstruction %.2e, product split %.2e",
                   pr.max_sum_error, pr.max_support_violation, recon, decomp);
    return o;
}

Outcome criterion_2() {
    constexpr int kFields = 100;
    constexpr double kStability = 0.20;
    constexpr double kCeiling = 1e3;
    const double eps = 0.05;
    TorusGrid g(2, 32);
    DyadicPartition p(g);
    const std::vector<double> ts{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    auto constants = [&](std::uint64_t seed) {
        double bern = 0, sch = 0;
        for (int r = 0; r < kFields; ++r) {
            SpectralField f = rough_field(g, 0.5, seed + r);
            RealField x = dft_inverse(f);
            for (int k = 0; k <= p.max_block(); ++k)
                for (double q : {1.0, 2.0, 4.0}) bern = std::max(bern, bernstein_check(x, k, q, p).ratio);
            for (double t : ts) sch = std::max(sch, schauder_ratio(f, t, 1.0 - 2.0 * eps, -1.0 - eps, p));
        }
        return std::pair<double, double>{bern, sch};
    };
    auto [b1, s1] = constants(20000);
    auto [b2, s2] = constants(90000);
    auto drift = [](double a, double b) { return std::fabs(a - b) / std::max(a, b); };
    Outcome o;
    const bool finite = std::isfinite(b1) && std::isfinite(b2) && std::isfinite(s1) && std::isfinite(s2);
    o.pass = finite && std::max({b1, b2, s1, s2}) < kCeiling && drift(b1, b2) <= kStability &&
             drift(s1, s2) <= kStability;
    o.detail = fmt("Bernstein constant %.4f / %.4f (drift %.1f%%), Schauder constant %.4f / %.4f (drift %.1f%%)", b1,
                   b2, 100 * drift(b1, b2), s1, s2, 100 * drift(s1, s2));
    return o;
}

Outcome criterion_3() {
    constexpr std::size_t kReplicas = 2000;
    constexpr double kSe = 3.0;
    const double sigma = 1.0, t = 0.5, a_plus = 1.0;
    TorusGrid g(3, 32);
    CoefficientSet c(TimePoly::constant(0.0), TimePoly::constant(-1.0), t);
    TimeGrid tg(t, 5);
    StepKernel k(g, c, tg);
    const std::size_t S = g.spec_size();
    std::vector<double> s1(S, 0.0), s2(S, 0.0);
    CVec z(S);
    for (std::size_t r = 0; r < kReplicas; ++r) {
        NoiseStream ns(g, g.N() / 2, stream_seed(3, r, StreamRole::noise));
        SpectralField I(g);
        for (int j = 0; j < tg.steps(); ++j) {
            ns.next(z);
            k.propagate(j, I.coeffs);
            k.inject(j, I.coeffs, z, sigma);
        }
        for (std::size_t i = 0; i < S; ++i) {
            const double v = std::norm(I.coeffs[i]);
            s1[i] += v;
            s2[i] += v * v;
        }
    }
    const double R = static_cast<double>(kReplicas);
    auto mean_se = [&](std::size_t i) {
        const double m = s1[i] / R;
        return std::pair<double, double>{m, std::sqrt(std::max(0.0, s2[i] / R - m * m) / (R - 1))};
    };
    auto [m0, se0] = mean_se(0);
    const double exact = sigma * sigma * (1.0 - std::exp(-2.0 * t)) / 2.0;
    const bool zero_ok = std::fabs(m0 - exact) <= kSe * se0;
    std::size_t violations = 0;
    double worst = -1e300;
    for (std::size_t i = 0; i < S; ++i) {
        auto [m, se] = mean_se(i);
        const double bound = sigma * sigma / (2.0 * (a_plus + 4.0 * M_PI * M_PI * g.norm2(i)));
        const double margin = (m - kSe * se) / bound;
        worst = std::max(worst, margin);
        if (m - kSe * se > bound) ++violations;
    }
    Outcome o;
    o.pass = zero_ok && violations == 0;
    // nonzero modes are saturated at t = 0.5, where a one-sided 3-SE test trips at rate 0.00135 per mode
    const double expected = 0.00135 * static_cast<double>(S - 1);
    o.detail = fmt("mode 0 variance %.5f vs %.5f (|z| = %.2f); modes over bound %zu of %zu (about %.0f expected "
                   "from sampling noise alone), worst (mean-3se)/bound %.3f",
                   m0, exact, std::fabs(m0 - exact) / se0, violations, S, expected, worst);
    return o;
}

Outcome criterion_4() {
    constexpr double kR2 = 0.99;
    constexpr std::size_t kReplicas = 500;
    Scenario sc = make_scenario(gamma_config(3.0, 2.0), 0.5);
    auto rows = renorm_scaling(sc.coeffs, 3, {4, 8, 16, 32}, 0.5, kReplicas, 4);
    RenormSummary s = summarize_renorm(rows);
    std::ostringstream os;
    for (const auto& r : rows) os << fmt(" n=%d c=%.4f ct=%.4g(%.1g)", r.n, r.c, r.ctilde, r.ctilde_se);
    Outcome o;
    o.pass = s.c_vs_n.r_squared >= kR2 && s.c_vs_n.slope > 0 && s.ctilde_vs_log_n.slope > 0 && s.monotone;
    o.detail = fmt("c vs n slope %.4f R2 %.5f; c~ vs ln n slope %.4g, monotone %s;", s.c_vs_n.slope,
                   s.c_vs_n.r_squared, s.ctilde_vs_log_n.slope, s.monotone ? "yes" : "no") +
               os.str();
    return o;
}

Outcome criterion_5() {
    constexpr double kOffOrder = 1e-6;
    constexpr double kScaling = 1e-8;
    TorusGrid g(3, 16);
    const int n = 4;
    const double T = 0.5;
    Scenario sc = make_scenario(gamma_config(3.0, 2.0), T);
    TimeGrid tg(T, 20);
    DyadicPartition p(g);
    StepKernel k(g, sc.coeffs, tg);
    SymbolParams base;
    base.n = n;
    base.c_unit = renorm_c_path(sc.coeffs, g, n, tg);
    base.ctilde_unit = ctilde_unit_path(g, n, sc.coeffs, tg, 50, 5);
    auto builder = [&](double factor) {
        return [&, factor](double sigma) {
            SymbolParams prm = base;
            prm.sigma = factor * sigma;
            return build_symbols(k, p, prm, 55).path(Symbol::WW);
        };
    };
    const auto sig = default_sigma_list(5);
    ChaosDecomposition d1 = chaos_decompose(builder(1.0), sig, 5);
    ChaosDecomposition d2 = chaos_decompose(builder(2.0), sig, 5);
    double total = 0;
    for (int l = 0; l <= 5; ++l) total = std::max(total, d1.mass(l, 1.0));
    double off = 0;
    for (int l : {0, 2, 4}) off = std::max(off, d1.mass(l, 1.0) / total);
    double scale = 0;
    std::ostringstream os;
    for (int l : {1, 3, 5}) {
        auto a = d1.component(l, 1.0);
        auto b = d2.component(l, 1.0);  // component of the doubled-amplitude run
        for (auto& f : a) f *= std::pow(2.0, l);
        const double m = d1.mass(l, 1.0);
        os << fmt(" mass[%d]=%.3g", l, m / total);
        if (m > kOffOrder * total) scale = std::max(scale, rel(b, a));
    }
    Outcome o;
    o.pass = off <= kOffOrder && scale <= kScaling;
    o.detail = fmt("off-order mass %.2e, 2^k scaling error %.2e, condition %.3g;", off, scale, d1.condition) + os.str();
    return o;
}

Outcome criterion_6() {
    constexpr std::size_t kReplicas = 1000;
    constexpr double kR2 = 0.95;
    constexpr double kRatioLo = 3.0, kRatioHi = 5.3;
    const double T = 1.0, alpha = -0.6;
    TorusGrid g(3, 32);
    DyadicPartition p(g);
    Scenario sc = make_scenario(gamma_config(3.0, 2.0), T);
    TimeGrid tg(T, 50);
    StepKernel k(g, sc.coeffs, tg);
    GaussianFit fits[2];
    std::ostringstream os;
    const double sigmas[2] = {0.1, 0.2};
    for (int q = 0; q < 2; ++q) {
        auto stats = parallel_replicas(kReplicas, default_threads(), [&](std::size_t r) {
            return I_sup_statistic(k, p, 8, sigmas[q], alpha, stream_seed(6, r, StreamRole::noise));
        });
        auto grid = quantile_grid(stats, 0.5, 0.05, 10);
        TailCurve c = tail_from_samples(stats, grid, sigmas[q], T, "I");
        fits[q] = gaussian_tail_fit(c, FitAxis::h2);
        os << fmt(" sigma=%.1f: C=%.4g R2=%.4f p in [%.3f, %.3f];", sigmas[q], fits[q].slope_C, fits[q].r_squared,
                  c.p_hat.back(), c.p_hat.front());
    }
    const double ratio = fits[0].slope_C / fits[1].slope_C;
    Outcome o;
    o.pass = fits[0].r_squared >= kR2 && fits[0].slope_C > 0 && ratio >= kRatioLo && ratio <= kRatioHi;
    o.detail = fmt("slope ratio %.4f;", ratio) + os.str();
    return o;
}

Outcome criterion_7() {
    constexpr double kGap = 5e-2;
    constexpr double kRatioLo = 0.4, kRatioHi = 0.6;
    ExperimentConfig c;
    c.dimension = 3;
    c.N = 32;
    c.n = 8;
    c.T = 0.5;
    c.dt = 1e-3;
    c.sigma = {0.1};
    c.replicas = 20;
    c.coefficients = gamma_config(3.0, 2.0);
    RunOptions ro;
    ro.out = std::filesystem::temp_directory_path() / "phi4lab_acceptance_7";
    CommandResult r = cmd_equivalence(c, ro);
    const double g0 = r.report["runs"][0]["gap"], g1 = r.report["runs"][1]["gap"];
    const double ratio = r.report["halving_ratio"];
    Outcome o;
    o.pass = g0 <= kGap && ratio >= kRatioLo && ratio <= kRatioHi;
    o.detail = fmt("gap(dt) %.3e, gap(dt/2) %.3e, halving ratio %.3f", g0, g1, ratio);
    return o;
}

Outcome criterion_8() {
    constexpr int kPaths = 50;
    constexpr int kP = 8;
    constexpr double kGamma = 0.3;
    const double beta = -1.2, T = 1.0;
    TorusGrid g(3, 16);
    DyadicPartition part(g);
    CoefficientSet c(TimePoly::constant(0.0), TimePoly::constant(-1.0), T);
    TimeGrid tg(T, 64);
    int exceptions = 0;
    double worst = 1e300;
    for (int r = 0; r < kPaths; ++r) {
        auto noise = sample_noise(g, tg, 1.0, 8, stream_seed(8, r, StreamRole::noise));
        auto path = build_I(noise, c);
        const double B = grr_bound(path, tg.times(), kP, kGamma, beta, part);
        const double H = std::pow(holder_constant(path, tg.times(), beta, kGamma, part), kP);
        worst = std::min(worst, B / H);
        if (!(B >= H)) ++exceptions;
    }
    Outcome o;
    o.pass = exceptions == 0;
    o.detail = fmt("exceptions %d of %d, smallest bound/holder^8 %.3g", exceptions, kPaths, worst);
    return o;
}

// exact E[He_2(g)^4] from Gaussian moments, independent of the sampler
double wick_he2_fourth() {
    auto mom = [](int m) {
        double r = 1;
        for (int k = m - 1; k > 1; k -= 2) r *= k;
        return r;
    };
    // (x^2 - 1)^4 = x^8 - 4x^6 + 6x^4 - 4x^2 + 1
    return mom(8) - 4 * mom(6) + 6 * mom(4) - 4 * mom(2) + 1;
}

Outcome criterion_9() {
    constexpr double kCn = 3.0;
    constexpr double kWickTol = 0.10;
    constexpr std::size_t kReplicas = 200000;
    int fails = 0;
    double worst = 0;
    for (int order = 1; order <= 3; ++order)
        for (int p : {2, 4, 6, 8}) {
            auto r = nelson_check(order, p, kReplicas, 9, kCn);
            worst = std::max(worst, r.ratio);
            if (!r.pass) ++fails;
        }
    auto x = nelson_check(2, 4, 1000000, 99, kCn);
    const double exact = wick_he2_fourth();
    const double err = std::fabs(x.moment_p - exact) / exact;
    Outcome o;
    o.pass = fails == 0 && err <= kWickTol;
    o.detail = fmt("bound failures %d of 12, largest empirical constant %.3f (C_n = 3), E He2^4 = %.3f vs exact %.0f", fails,
                   worst, x.moment_p, exact);
    return o;
}

Outcome criterion_10() {
    const double T = 1.0;
    const int steps = 1000;
    bool ok = true;
    double min_phibar = 1e300, max_a = -1e300;
    Scenario s = make_scenario(gamma_config(3.0, 2.0), T);
    for (int j = 0; j <= steps; ++j) {
        const double t = T * j / steps;
        min_phibar = std::min(min_phibar, s.phibar(t));
        max_a = std::max(max_a, s.coeffs.a()(t));
    }
    ok = min_phibar > 1.0 && max_a < 0.0;
    double max_a_neg = -1e300;
    for (double p0 : {-5.0, 0.3, 5.0}) {
        Scenario d = make_scenario(gamma_config(-1.0, p0), T, false);
        for (int j = 0; j <= steps; ++j) max_a_neg = std::max(max_a_neg, d.coeffs.a()(T * j / steps));
    }
    ok = ok && max_a_neg < 0.0;
    Outcome o;
    o.pass = ok;
    o.detail = fmt("gamma=3: min phibar %.5f, max a %.4f; gamma=-1: max a %.4f", min_phibar, max_a, max_a_neg);
    return o;
}

Outcome criterion_11() {
    constexpr std::size_t kReplicas = 500;
    constexpr double kR2 = 0.9;
    const double T = 0.5, sigma = 0.05, eps = 0.05;
    const int n = 4;
    TorusGrid g(3, 16);
    DyadicPartition p(g);
    Scenario sc = make_scenario(gamma_config(3.0, 2.0), T);
    TimeGrid tg(T, 50);
    StepKernel k(g, sc.coeffs, tg);
    XiInputs in{&k, &p, &sc.coeffs, n, sigma, eps, renorm_c_path(sc.coeffs, g, n, tg),
                ctilde_unit_path(g, n, sc.coeffs, tg, 100, 11)};
    auto stats = parallel_replicas(kReplicas, default_threads(), [&](std::size_t r) {
        return xi_statistic(in, stream_seed(11, r, StreamRole::noise));
    });
    std::size_t blow = 0;
    for (double s : stats)
        if (!std::isfinite(s)) ++blow;
    auto grid = quantile_grid(stats, 0.5, 0.05, 10);
    TailCurve c = tail_from_samples(stats, grid, sigma, T, "xi");
    GaussianFit f = gaussian_tail_fit(c);
    Outcome o;
    o.pass = f.r_squared >= kR2 && f.slope_C > 0 && blow == 0;
    o.detail = fmt("C %.4g, R2 %.4f, cells %d, blow-ups %zu, h in [%.4g, %.4g]", f.slope_C, f.r_squared, f.cells, blow,
                   grid.front(), grid.back());
    return o;
}

const std::vector<std::function<Outcome()>>& criteria() {
    static const std::vector<std::function<Outcome()>> all{
        criterion_1, criterion_2, criterion_3, criterion_4,  criterion_5, criterion_6,
        criterion_7, criterion_8, criterion_9, criterion_10, criterion_11};
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            which.push_back(std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: %s [--criterion N]...\n", argv[0]);
            return 2;
        }
    }
    if (which.empty())
        for (int i = 1; i <= static_cast<int>(criteria().size()); ++i) which.push_back(i);
    bool all = true;
    for (int i : which) {
        if (i < 1 || i > static_cast<int>(criteria().size())) {
            std::fprintf(stderr, "no criterion %d\n", i);
            return 2;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria()[i - 1]();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d: %s  %s  [%.1f s]\n", i, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
