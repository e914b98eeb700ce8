#include "phi4/noise.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace phi4 {

namespace {

constexpr double four_pi2 = 4.0 * std::numbers::pi * std::numbers::pi;

bool is_constant(const TimePoly& p) {
    const auto& c = p.coeffs();
    for (std::size_t i = 1; i < c.size(); ++i)
        if (c[i] != 0.0) return false;
    return true;
}

}  // namespace

TimeGrid::TimeGrid(double T, int steps) {
    if (!(T > 0.0) || steps < 1) throw std::invalid_argument("TimeGrid: need T > 0 and steps >= 1");
    t_.resize(steps + 1);
    for (int j = 0; j <= steps; ++j) t_[j] = T * j / steps;
}

TimeGrid::TimeGrid(std::vector<double> times) : t_(std::move(times)) {
    if (t_.size() < 2 || t_.front() != 0.0) throw std::invalid_argument("TimeGrid: times must start at 0");
    for (std::size_t i = 1; i < t_.size(); ++i)
        if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("TimeGrid: times must increase");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replica, StreamRole role) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ splitmix64(replica + 0x632be59bd9b4e019ULL));
    return splitmix64(h ^ static_cast<std::uint64_t>(role));
}

NoiseStream::NoiseStream(const TorusGrid& g, int n, std::uint64_t seed) : grid_(g), n_(n), eng_(seed) {
    if (n < 0 || n > g.N() / 2) throw std::invalid_argument("NoiseStream: cutoff outside the grid band");
    const int N = g.N();
    for (std::size_t i = 0; i < g.spec_size(); ++i) {
        if (g.norm_inf(i) > n) continue;
        auto w = g.mode(i);
        if (w[2] != 0 && w[2] != N / 2) {
            active_.push_back(i);
            self_conj_.push_back(0);
            continue;
        }
        bool c = false;
        std::size_t j = g.index_of({-w[0], -w[1], -w[2]}, c);
        if (j == i) {
            active_.push_back(i);
            self_conj_.push_back(1);
        } else if (j > i) {
            active_.push_back(i);
            self_conj_.push_back(0);
        } else {
            partners_.emplace_back(i, j);
        }
    }
}

void NoiseStream::next(CVec& z) {
    if (z.size() != grid_.spec_size()) z.assign(grid_.spec_size(), cplx(0.0, 0.0));
    static const double r2 = 1.0 / std::sqrt(2.0);
    for (std::size_t a = 0; a < active_.size(); ++a) {
        if (self_conj_[a]) {
            z[active_[a]] = cplx(nd_(eng_), 0.0);
        } else {
            double g1 = nd_(eng_);
            double g2 = nd_(eng_);
            z[active_[a]] = cplx(g1 * r2, g2 * r2);
        }
    }
    for (auto [dst, src] : partners_) z[dst] = std::conj(z[src]);
}

NoiseRealization sample_noise(const TorusGrid& g, const TimeGrid& tg, double sigma, int n, std::uint64_t seed) {
    NoiseRealization r{g, tg, sigma, n, seed, {}};
    NoiseStream s(g, n, seed);
    r.dW.resize(tg.steps());
    for (int j = 0; j < tg.steps(); ++j) {
        s.next(r.dW[j]);
        const double q = std::sqrt(tg.dt(j));
        for (auto& v : r.dW[j]) v *= q;
    }
    return r;
}

double kernel_integral(const CoefficientSet& c, double t, double L, double kappa, double s) {
    if (L <= 0.0) return 0.0;
    auto primitive = [](double k, double h) { return k == 0.0 ? h : -std::expm1(-k * h) / k; };
    if (is_constant(c.a())) return primitive(kappa, L);
    const double at = c.a()(t);
    auto g = [&](double u) { return c.alpha(t, t - u) - at * u; };
    // |g'| <= 2 sup|a|, so past 40 / (kappa - 2 s sup|a|) the integrand is below e^-40 of its peak
    const double decay = kappa - 2.0 * s * std::max(std::fabs(c.a_minus()), std::fabs(c.a_plus()));
    if (decay > 0.0) L = std::min(L, 40.0 / decay);
    const double width = kappa > 1.0 ? std::min(0.05, 1.0 / kappa) : 0.05;
    const int chunks = std::max(1, static_cast<int>(std::ceil(L / width)));
    const double h = L / chunks;
    double total = 0.0;
    for (int q = 0; q < chunks; ++q) {
        const double u0 = q * h;
        const double Y = primitive(kappa, h);
        // y = (1 - e^{-kappa v}) / kappa flattens the exponential factor
        auto f = [&](double y) {
            double v = (kappa == 0.0 || std::fabs(kappa * h) < 1e-14) ? y : -std::log1p(-kappa * y) / kappa;
            v = std::min(std::max(v, 0.0), h);
            return std::exp(s * g(u0 + v));
        };
        double part = boost::math::quadrature::gauss<double, 10>::integrate(f, 0.0, Y);
        total += std::exp(-kappa * u0) * part;
    }
    return total;
}

double mode_variance(const CoefficientSet& c, int norm2, double t) {
    if (t <= 0.0) return 0.0;
    return kernel_integral(c, t, t, 2.0 * (four_pi2 * norm2 - c.a()(t)), 2.0);
}

StepKernel::StepKernel(const TorusGrid& g, const CoefficientSet& c, const TimeGrid& tg) : grid_(g), tg_(tg) {
    if (tg.T() > c.horizon() * (1.0 + 1e-12)) throw std::invalid_argument("StepKernel: time grid beyond horizon");
    std::map<int, int> ids;
    cls_.resize(g.spec_size());
    for (std::size_t i = 0; i < g.spec_size(); ++i) {
        int n2 = g.norm2(i);
        auto it = ids.find(n2);
        if (it == ids.end()) it = ids.emplace(n2, 0).first;
        cls_[i] = n2;
    }
    int next = 0;
    for (auto& [n2, id] : ids) {
        id = next++;
        norms_.push_back(n2);
    }
    for (auto& v : cls_) v = ids[v];

    bool uniform = true;
    for (int j = 1; j < tg.steps(); ++j)
        if (std::fabs(tg.dt(j) - tg.dt(0)) > 1e-13 * tg.dt(0)) uniform = false;
    shared_ = uniform && is_constant(c.a());
    const int nt = shared_ ? 1 : tg.steps();
    tables_.assign(nt, std::vector<double>(3 * norms_.size()));
    for (int j = 0; j < nt; ++j) {
        const double t0 = tg.t(j), t1 = tg.t(j + 1), h = t1 - t0;
        const double al = c.alpha(t1, t0), a1 = c.a()(t1);
        auto& tab = tables_[j];
        for (std::size_t q = 0; q < norms_.size(); ++q) {
            const double lam = four_pi2 * norms_[q];
            tab[3 * q] = std::exp(al - lam * h);
            tab[3 * q + 1] = std::sqrt(kernel_integral(c, t1, h, 2.0 * (lam - a1), 2.0));
            tab[3 * q + 2] = kernel_integral(c, t1, h, lam - a1, 1.0);
        }
    }
}

void StepKernel::propagate(int j, CVec& f) const {
    const auto& t = tab(j);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= t[3 * cls_[i]];
}

void StepKernel::lawson(int j, CVec& f, const CVec& g) const {
    const auto& t = tab(j);
    const double h = tg_.dt(j);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = t[3 * cls_[i]] * (f[i] + h * g[i]);
}

void StepKernel::etd1(int j, CVec& f, const CVec& g) const {
    const auto& t = tab(j);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double* e = &t[3 * cls_[i]];
        f[i] = e[0] * f[i] + e[2] * g[i];
    }
}

void StepKernel::inject(int j, CVec& f, const CVec& z, double s) const {
    if (s == 0.0) return;
    const auto& t = tab(j);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += s * t[3 * cls_[i] + 1] * z[i];
}

std::vector<SpectralField> build_I(const NoiseRealization& noise, const StepKernel& k) {
    if (noise.grid != k.grid()) throw std::invalid_argument("build_I: grid mismatch");
    const TimeGrid& tg = noise.time;
    std::vector<SpectralField> out(tg.steps() + 1, SpectralField(noise.grid));
    CVec z(noise.grid.spec_size());
    for (int j = 0; j < tg.steps(); ++j) {
        const double q = 1.0 / std::sqrt(tg.dt(j));
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = noise.dW[j][i] * q;
        out[j + 1].coeffs = out[j].coeffs;
        k.propagate(j, out[j + 1].coeffs);
        k.inject(j, out[j + 1].coeffs, z, noise.sigma);
    }
    return out;
}

std::vector<SpectralField> build_I(const NoiseRealization& noise, const CoefficientSet& c) {
    return build_I(noise, StepKernel(noise.grid, c, noise.time));
}

std::vector<SpectralField> integrator_I(const std::vector<SpectralField>& f, const StepKernel& k) {
    const int M = k.time().steps();
    if (static_cast<int>(f.size()) < M) throw std::invalid_argument("integrator_I: path shorter than the grid");
    std::vector<SpectralField> out(M + 1, SpectralField(k.grid()));
    for (int j = 0; j < M; ++j) {
        out[j + 1].coeffs = out[j].coeffs;
        k.lawson(j, out[j + 1].coeffs, f[j].coeffs);
    }
    return out;
}

std::vector<SpectralField> integrator_I(const std::vector<SpectralField>& f, const CoefficientSet& c,
                                        const TimeGrid& tg) {
    if (f.empty()) return {};
    return integrator_I(f, StepKernel(f.front().grid, c, tg));
}

double renorm_c(const CoefficientSet& c, int dim, int n, double t, double sigma) {
    if (n < 0) throw std::invalid_argument("renorm_c: negative cutoff");
    if (t <= 0.0 || sigma == 0.0) return 0.0;
    std::map<int, double> count;
    const int lo0 = dim == 3 ? -n : 0, hi0 = dim == 3 ? n : 0;
    const int lo1 = dim >= 2 ? -n : 0, hi1 = dim >= 2 ? n : 0;
    for (int a = lo0; a <= hi0; ++a)
        for (int b = lo1; b <= hi1; ++b)
            for (int k = -n; k <= n; ++k) count[a * a + b * b + k * k] += 1.0;
    double s = 0.0;
    for (auto [n2, m] : count) s += m * mode_variance(c, n2, t);
    return sigma * sigma * s;
}

double renorm_c_grid(const CoefficientSet& c, const TorusGrid& g, int n, double t, double sigma) {
    if (t <= 0.0 || sigma == 0.0) return 0.0;
    std::map<int, double> count;
    for (std::size_t i = 0; i < g.spec_size(); ++i)
        if (g.norm_inf(i) <= n) count[g.norm2(i)] += g.multiplicity(i);
    double s = 0.0;
    for (auto [n2, m] : count) s += m * mode_variance(c, n2, t);
    return sigma * sigma * s;
}

namespace {

std::vector<double> resonant_weights(const DyadicPartition& p) {
    const TorusGrid& g = p.grid();
    const int N = g.N();
    std::vector<double> w(g.spec_size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        double s = 0.0;
        for (int k = -1; k <= p.max_block(); ++k)
            for (int l = std::max(-1, k - 1); l <= std::min(p.max_block(), k + 1); ++l)
                s += p.weights(k)[i] * p.weights(l)[i];
        auto m = g.mode(i);
        double nyq = 1.0;
        for (int a = 0; a < 3; ++a)
            if (std::abs(m[a]) == N / 2) nyq *= 0.5;
        w[i] = s * nyq * g.multiplicity(i);
    }
    return w;
}

}  // namespace

double resonant_mean(const SpectralField& f, const SpectralField& g, const DyadicPartition& p) {
    if (f.grid != g.grid || f.grid != p.grid()) throw std::invalid_argument("resonant_mean: grid mismatch");
    std::vector<double> w = resonant_weights(p);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        s += w[i] * (f.coeffs[i].real() * g.coeffs[i].real() + f.coeffs[i].imag() * g.coeffs[i].imag());
    return s;
}

std::vector<McEstimate> renorm_c_tilde_path(const TorusGrid& g, int n, const CoefficientSet& c,
                                            const TimeGrid& tg, const CTildeOptions& opt) {
    const int M = tg.steps();
    std::vector<char> want(M + 1, opt.record.empty() ? 1 : 0);
    for (int j : opt.record) {
        if (j < 0 || j > M) throw std::out_of_range("renorm_c_tilde: record index");
        want[j] = 1;
    }
    std::vector<McEstimate> out(M + 1);
    if (opt.sigma == 0.0 || opt.replicas == 0) return out;
    DyadicPartition part(g);
    std::vector<double> rw = resonant_weights(part);
    StepKernel k(g, c, tg);
    const int pad = opt.pad > 0 ? opt.pad : default_pad(g);
    std::vector<double> cpath(M + 1);
    for (int j = 0; j <= M; ++j) cpath[j] = renorm_c_grid(c, g, n, tg.t(j), opt.sigma);

    std::vector<double> sum(M + 1, 0.0), sum2(M + 1, 0.0);
    CVec z(g.spec_size());
    for (std::size_t r = 0; r < opt.replicas; ++r) {
        NoiseStream ns(g, n, stream_seed(opt.seed, r, StreamRole::ctilde));
        SpectralField I(g), Y(g);
        for (int j = 0; j <= M; ++j) {
            Padded p = to_padded(I, pad);
            for (double& v : p.v) v = v * v - cpath[j];
            SpectralField V = from_padded(p, g);
            if (want[j]) {
                double m = 0.0;
                for (std::size_t i = 0; i < rw.size(); ++i)
                    m += rw[i] * (Y.coeffs[i].real() * V.coeffs[i].real() + Y.coeffs[i].imag() * V.coeffs[i].imag());
                m *= 0.5;
                sum[j] += m;
                sum2[j] += m * m;
            }
            if (j == M) break;
            k.lawson(j, Y.coeffs, V.coeffs);
            ns.next(z);
            k.propagate(j, I.coeffs);
            k.inject(j, I.coeffs, z, opt.sigma);
        }
    }
    const double R = static_cast<double>(opt.replicas);
    for (int j = 0; j <= M; ++j) {
        if (!want[j]) continue;
        McEstimate& e = out[j];
        e.replicas = opt.replicas;
        e.mean = sum[j] / R;
        double var = R > 1 ? std::max(0.0, (sum2[j] - R * e.mean * e.mean) / (R - 1.0)) : 0.0;
        e.se = std::sqrt(var / R);
        e.wide = opt.se_threshold > 0.0 && e.se > opt.se_threshold;
    }
    return out;
}

McEstimate renorm_c_tilde(const TorusGrid& g, int n, const CoefficientSet& c, const TimeGrid& tg,
                          const CTildeOptions& opt) {
    CTildeOptions o = opt;
    o.record = {tg.steps()};
    return renorm_c_tilde_path(g, n, c, tg, o).back();
}

CovarianceCheck covariance_increment_check(const CoefficientSet& c, int dim, const std::array<int, 3>& w,
                                           double s, double t, double lambda, std::size_t replicas,
                                           std::uint64_t seed) {
    if (!(s >= 0.0 && s <= t && t <= c.horizon())) throw std::invalid_argument("covariance_increment_check: times");
    if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("covariance_increment_check: lambda");
    if ((dim < 3 && w[0] != 0) || (dim < 2 && w[1] != 0))
        throw std::invalid_argument("covariance_increment_check: frequency on an absent axis");
    CovarianceCheck out;
    if (s == t) return out;
    const int n2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    const bool real_mode = n2 == 0;
    const double lam = four_pi2 * n2;
    // exact: E|I(t) - I(s)|^2 = (1 - P)^2 v(s) + v(s,t)
    const double P = std::exp(c.alpha(t, s) - lam * (t - s));
    const double vs = mode_variance(c, n2, s);
    const double vst = kernel_integral(c, t, t - s, 2.0 * (lam - c.a()(t)), 2.0);
    out.exact = (1.0 - P) * (1.0 - P) * vs + vst;
    std::mt19937_64 eng(stream_seed(seed, 0, StreamRole::aux));
    std::normal_distribution<double> nd;
    const double r2 = 1.0 / std::sqrt(2.0);
    auto draw = [&]() {
        if (real_mode) return cplx(nd(eng), 0.0);
        double a = nd(eng);
        double b = nd(eng);
        return cplx(a * r2, b * r2);
    };
    double sum = 0.0, sum2 = 0.0;
    const double sds = std::sqrt(vs), sdt = std::sqrt(vst);
    for (std::size_t r = 0; r < replicas; ++r) {
        cplx Is = sds * draw();
        cplx It = P * Is + sdt * draw();
        double v = std::norm(It - Is);
        sum += v;
        sum2 += v * v;
    }
    const double R = static_cast<double>(replicas);
    out.estimate = sum / R;
    out.se = R > 1 ? std::sqrt(std::max(0.0, (sum2 - R * out.estimate * out.estimate) / (R - 1.0)) / R) : 0.0;
    const double bracket = std::sqrt(1.0 + n2);
    out.ratio = out.estimate / (std::pow(t - s, lambda) * std::pow(bracket, -2.0 + 2.0 * lambda));
    return out;
}

}  // namespace phi4
