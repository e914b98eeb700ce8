#include "phi4/concentration.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/hermite.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <mutex>
#include <thread>

#include "phi4/noise.hpp"

namespace phi4 {

int default_threads() {
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : static_cast<int>(h);
}

std::vector<double> parallel_replicas(std::size_t count, int threads, const std::function<double(std::size_t)>& fn) {
    std::vector<double> out(count, 0.0);
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_m;
    auto work = [&]() {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_m);
                if (!err) err = std::current_exception();
                next = count;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int nt = std::min<int>(threads, static_cast<int>(count));
    for (int t = 0; t < nt; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
    return out;
}

double sup_path_norm(const std::vector<SpectralField>& path, double alpha, const DyadicPartition& p) {
    double m = 0.0;
    for (const auto& f : path) m = std::max(m, besov_norm(f, alpha, p));
    return m;
}

namespace {

std::vector<std::size_t> subsample(std::size_t len, int cap) {
    std::vector<std::size_t> idx;
    if (cap < 2 || len <= static_cast<std::size_t>(cap)) {
        for (std::size_t i = 0; i < len; ++i) idx.push_back(i);
        return idx;
    }
    for (int i = 0; i < cap; ++i)
        idx.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(i) * (len - 1) / (cap - 1))));
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

void check_gamma(double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("holder_constant: gamma must lie in (0, 1]");
}

}  // namespace

double holder_constant(const std::vector<SpectralField>& path, const std::vector<double>& times, double beta,
                       double gamma, const DyadicPartition& p, int cap) {
    check_gamma(gamma);
    if (path.size() != times.size()) throw std::invalid_argument("holder_constant: path and times differ in length");
    auto idx = subsample(path.size(), cap);
    double m = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            double d = besov_norm(path[idx[b]] - path[idx[a]], beta, p);
            m = std::max(m, d / std::pow(times[idx[b]] - times[idx[a]], gamma));
        }
    return m;
}

double holder_constant(const std::vector<double>& values, const std::vector<double>& times, double gamma, int cap) {
    check_gamma(gamma);
    if (values.size() != times.size()) throw std::invalid_argument("holder_constant: path and times differ in length");
    auto idx = subsample(values.size(), cap);
    double m = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b)
            m = std::max(m, std::fabs(values[idx[b]] - values[idx[a]]) /
                                std::pow(times[idx[b]] - times[idx[a]], gamma));
    return m;
}

std::vector<std::vector<double>> increment_norms(const std::vector<SpectralField>& path, double beta,
                                                 const DyadicPartition& p) {
    const std::size_t M = path.size();
    std::vector<std::vector<double>> D(M, std::vector<double>(M, 0.0));
    for (std::size_t a = 0; a < M; ++a)
        for (std::size_t b = a + 1; b < M; ++b) D[a][b] = D[b][a] = besov_norm(path[b] - path[a], beta, p);
    return D;
}

double grr_constant(int p, double gamma_prime) {
    if (p < 1 || !(gamma_prime > 1.0 / p)) throw std::invalid_argument("grr_constant: need gamma' > 1/p");
    const double ip = 1.0 / p;
    return std::pow(8.0 * std::pow(4.0, ip) * (gamma_prime + ip) / (gamma_prime - ip), p);
}

double grr_bound(const std::vector<std::vector<double>>& D, const std::vector<double>& times, int p,
                 double gamma_prime) {
    if (p < 2 || p % 2 != 0) throw std::invalid_argument("grr_bound: p must be an even integer");
    if (!(gamma_prime > 1.0 / p)) throw std::invalid_argument("grr_bound: need gamma' > 1/p");
    const std::size_t M = times.size();
    if (D.size() != M) throw std::invalid_argument("grr_bound: size mismatch");
    if (M < 2) return 0.0;
    std::vector<double> w(M, 0.0);
    for (std::size_t i = 0; i + 1 < M; ++i) {
        const double h = times[i + 1] - times[i];
        w[i] += h / 2.0;
        w[i + 1] += h / 2.0;
    }
    const double ex = gamma_prime * p + 1.0;
    double B = 0.0;
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) {
            if (i == j || D[i][j] == 0.0) continue;
            B += w[i] * w[j] * std::pow(D[i][j], p) / std::pow(std::fabs(times[i] - times[j]), ex);
        }
    return grr_constant(p, gamma_prime) * B;
}

double grr_bound(const std::vector<double>& values, const std::vector<double>& times, int p, double gamma_prime) {
    const std::size_t M = values.size();
    std::vector<std::vector<double>> D(M, std::vector<double>(M, 0.0));
    for (std::size_t a = 0; a < M; ++a)
        for (std::size_t b = 0; b < M; ++b) D[a][b] = std::fabs(values[a] - values[b]);
    return grr_bound(D, times, p, gamma_prime);
}

double grr_bound(const std::vector<SpectralField>& path, const std::vector<double>& times, int p, double gamma_prime,
                 double beta, const DyadicPartition& part) {
    return grr_bound(increment_norms(path, beta, part), times, p, gamma_prime);
}

double hermite_he(int n, double x) {
    if (n < 0) throw std::invalid_argument("hermite_he: negative order");
    return std::pow(2.0, -0.5 * n) * boost::math::hermite(static_cast<unsigned>(n), x / std::sqrt(2.0));
}

NelsonResult nelson_check(int order, int p, std::size_t replicas, std::uint64_t seed, double Cn) {
    if (order < 1) throw std::invalid_argument("nelson_check: chaos order must be >= 1");
    if (p < 2 || p % 2 != 0) throw std::invalid_argument("nelson_check: p must be an even integer >= 2");
    if (replicas < 2) throw std::invalid_argument("nelson_check: need at least two replicas");
    std::mt19937_64 eng(stream_seed(seed, static_cast<std::uint64_t>(order), StreamRole::aux));
    std::normal_distribution<double> nd;
    double mp = 0.0, m2 = 0.0;
    for (std::size_t r = 0; r < replicas; ++r) {
        const double x = hermite_he(order, nd(eng));
        mp += std::pow(std::fabs(x), p);
        m2 += x * x;
    }
    NelsonResult res;
    res.order = order;
    res.p = p;
    res.moment_p = mp / replicas;
    res.second = m2 / replicas;
    res.lhs = std::pow(res.moment_p, 1.0 / p);
    const double scale = std::pow(p - 1.0, order / 2.0) * std::sqrt(res.second);
    res.bound = Cn * scale;
    res.ratio = scale > 0.0 ? res.lhs / scale : 0.0;
    res.pass = res.lhs <= res.bound;
    return res;
}

std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double confidence) {
    if (n == 0 || k > n) throw std::invalid_argument("clopper_pearson: need 0 <= k <= n, n > 0");
    const double a = 1.0 - confidence;
    const double lo = k == 0 ? 0.0 : boost::math::ibeta_inv(static_cast<double>(k), static_cast<double>(n - k + 1), a / 2);
    const double hi =
        k == n ? 1.0 : boost::math::ibeta_inv(static_cast<double>(k + 1), static_cast<double>(n - k), 1.0 - a / 2);
    return {lo, hi};
}

TailCurve tail_from_samples(const std::vector<double>& stats, const std::vector<double>& h_grid, double sigma,
                            double T, const std::string& label) {
    if (stats.empty()) throw std::invalid_argument("tail_estimate: no samples");
    for (std::size_t i = 1; i < h_grid.size(); ++i)
        if (!(h_grid[i] > h_grid[i - 1])) throw std::invalid_argument("tail_estimate: h grid must increase");
    TailCurve c;
    c.h = h_grid;
    c.replicas = stats.size();
    c.sigma = sigma;
    c.T = T;
    c.label = label;
    if (!h_grid.empty()) {
        const double lo = std::max(h_grid.front(), 0.0);
        c.narrow_grid = !(lo > 0.0 ? h_grid.back() / lo >= 3.0 : h_grid.size() > 1);
    }
    std::vector<double> sorted = stats;
    std::sort(sorted.begin(), sorted.end());
    for (double h : h_grid) {
        // events {X > h} are nested in h, so counts cannot increase
        auto it = std::upper_bound(sorted.begin(), sorted.end(), h);
        std::size_t k = static_cast<std::size_t>(sorted.end() - it);
        c.counts.push_back(k);
        c.p_hat.push_back(static_cast<double>(k) / c.replicas);
        auto [lo, hi] = clopper_pearson(k, c.replicas);
        c.ci_low.push_back(lo);
        c.ci_high.push_back(hi);
        c.beyond_resolution.push_back(k == 0 ? 1 : 0);
    }
    for (std::size_t i = 1; i < c.counts.size(); ++i)
        if (c.counts[i] > c.counts[i - 1]) throw std::logic_error("tail_estimate: exceedance counts increased");
    return c;
}

TailCurve tail_estimate(const std::function<double(std::size_t, std::uint64_t)>& statistic,
                        const std::vector<double>& h_grid, std::size_t replicas, std::uint64_t master_seed,
                        double sigma, double T, const std::string& label, int threads) {
    if (replicas < 200) throw std::invalid_argument("tail_estimate: need at least 200 replicas");
    auto stats = parallel_replicas(replicas, threads, [&](std::size_t r) {
        return statistic(r, stream_seed(master_seed, r, StreamRole::noise));
    });
    return tail_from_samples(stats, h_grid, sigma, T, label);
}

std::vector<double> quantile_grid(std::vector<double> samples, double p_hi, double p_lo, int cells) {
    if (samples.empty() || cells < 2 || !(p_hi > p_lo && p_lo > 0.0 && p_hi < 1.0))
        throw std::invalid_argument("quantile_grid: bad arguments");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    std::vector<double> h;
    for (int i = 0; i < cells; ++i) {
        const double q = std::exp(std::log(p_hi) + (std::log(p_lo) - std::log(p_hi)) * i / (cells - 1));
        // value exceeded by a fraction q of the samples
        double pos = (1.0 - q) * (n - 1);
        std::size_t a = static_cast<std::size_t>(std::floor(pos));
        std::size_t b = std::min(a + 1, n - 1);
        double v = samples[a] + (pos - a) * (samples[b] - samples[a]);
        if (h.empty() || v > h.back()) h.push_back(v);
    }
    return h;
}

GaussianFit gaussian_tail_fit(const TailCurve& c, FitAxis axis) {
    std::vector<double> x, y, w;
    const double s2 = c.sigma * c.sigma;
    if (axis == FitAxis::h2_over_sigma2 && !(s2 > 0.0)) throw std::invalid_argument("gaussian_tail_fit: sigma is zero");
    for (std::size_t i = 0; i < c.h.size(); ++i) {
        const double p = c.p_hat[i];
        if (!(p > 0.0 && p < 1.0)) continue;
        const double h2 = c.h[i] * c.h[i];
        x.push_back(axis == FitAxis::h2 ? h2 : h2 / s2);
        y.push_back(std::log(p));
        // inverse delta-method variance of log p_hat
        w.push_back(static_cast<double>(c.replicas) * p / (1.0 - p));
    }
    GaussianFit f;
    f.cells = static_cast<int>(x.size());
    if (f.cells < 4) throw std::invalid_argument("gaussian_tail_fit: fewer than 4 usable cells");
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
        syy += w[i] * (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("gaussian_tail_fit: degenerate abscissae");
    const double b = sxy / sxx;
    f.slope_C = -b;
    f.intercept_logD = my - b * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

double XiNorm::value() const { return std::max({sup_v, sup_w, holder_v, holder_w}); }

XiNorm xi_norm(const std::vector<SpectralField>& v, const std::vector<SpectralField>& w,
               const std::vector<double>& times, double t0, double eps, const DyadicPartition& p) {
    if (v.size() != times.size() || w.size() != times.size()) throw std::invalid_argument("xi_norm: length mismatch");
    std::size_t J = 0;
    while (J + 1 < times.size() && times[J + 1] <= t0 * (1.0 + 1e-12)) ++J;
    std::vector<SpectralField> vv(v.begin(), v.begin() + J + 1), ww(w.begin(), w.begin() + J + 1);
    std::vector<double> tt(times.begin(), times.begin() + J + 1);
    XiNorm x;
    x.sup_v = sup_path_norm(vv, 1.0 - 2.0 * eps, p);
    x.sup_w = sup_path_norm(ww, 1.5 - 2.0 * eps, p);
    x.holder_v = holder_constant(vv, tt, 0.0, 0.125, p);
    x.holder_w = holder_constant(ww, tt, 0.0, 0.125, p);
    return x;
}

std::vector<TScalingRow> T_scaling_probe(const std::function<double(double, std::size_t, std::uint64_t)>& statistic,
                                         const std::vector<double>& T_list, double lambda, double sigma,
                                         std::size_t replicas, std::uint64_t seed, int threads) {
    for (std::size_t i = 1; i < T_list.size(); ++i)
        if (!(T_list[i] > T_list[i - 1])) throw std::invalid_argument("T_scaling_probe: T list must increase");
    std::vector<TScalingRow> rows;
    for (std::size_t q = 0; q < T_list.size(); ++q) {
        const double T = T_list[q];
        auto stats = parallel_replicas(replicas, threads, [&](std::size_t r) {
            return statistic(T, r, stream_seed(seed + q, r, StreamRole::noise));
        });
        auto grid = quantile_grid(stats, 0.5, 10.0 / static_cast<double>(replicas), 8);
        TScalingRow row;
        row.T = T;
        row.fit = gaussian_tail_fit(tail_from_samples(stats, grid, sigma, T, "T-probe"));
        row.scaled = row.fit.slope_C * std::max(std::pow(T, lambda), std::pow(T, lambda / 5.0));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace phi4
