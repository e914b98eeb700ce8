#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "phi4/paracalc.hpp"
#include "phi4/torus.hpp"

namespace phi4 {

// Evaluates fn(0..count-1) on a worker pool; results keep replica order.
std::vector<double> parallel_replicas(std::size_t count, int threads, const std::function<double(std::size_t)>& fn);
int default_threads();

double sup_path_norm(const std::vector<SpectralField>& path, double alpha, const DyadicPartition& p);

// sup_{s<t} |f(t)-f(s)|_{C^beta} / |t-s|^gamma over grid pairs; paths longer than cap are subsampled evenly
double holder_constant(const std::vector<SpectralField>& path, const std::vector<double>& times, double beta,
                       double gamma, const DyadicPartition& p, int cap = 512);
double holder_constant(const std::vector<double>& values, const std::vector<double>& times, double gamma,
                       int cap = 512);

// pairwise increment norms |f(t_i) - f(t_j)|_{C^beta}, symmetric with zero diagonal
std::vector<std::vector<double>> increment_norms(const std::vector<SpectralField>& path, double beta,
                                                 const DyadicPartition& p);

double grr_constant(int p, double gamma_prime);
// (8 4^{1/p} (g'+1/p)/(g'-1/p))^p B with B the trapezoidal double integral of D^p / |x-y|^{g' p + 1}
double grr_bound(const std::vector<std::vector<double>>& increments, const std::vector<double>& times, int p,
                 double gamma_prime);
double grr_bound(const std::vector<double>& values, const std::vector<double>& times, int p, double gamma_prime);
double grr_bound(const std::vector<SpectralField>& path, const std::vector<double>& times, int p, double gamma_prime,
                 double beta, const DyadicPartition& part);

// probabilists' Hermite polynomial He_n
double hermite_he(int n, double x);

struct NelsonResult {
    int order = 0;
    int p = 0;
    double moment_p = 0.0;  // E|X|^p
    double second = 0.0;    // E X^2
    double lhs = 0.0;       // E[|X|^p]^{1/p}
    double bound = 0.0;     // C_n (p-1)^{n/2} E[X^2]^{1/2}
    double ratio = 0.0;     // lhs / ((p-1)^{n/2} E[X^2]^{1/2}), the empirical constant
    bool pass = false;
};

NelsonResult nelson_check(int order, int p, std::size_t replicas, std::uint64_t seed, double Cn = 3.0);

struct TailCurve {
    std::vector<double> h;
    std::vector<std::size_t> counts;
    std::vector<double> p_hat, ci_low, ci_high;
    std::vector<char> beyond_resolution;  // zero-count cells
    std::size_t replicas = 0;
    double sigma = 0.0;
    double T = 0.0;
    std::string label;
    bool narrow_grid = false;  // h range below a factor 3
};

std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double confidence = 0.95);

TailCurve tail_from_samples(const std::vector<double>& stats, const std::vector<double>& h_grid, double sigma,
                            double T, const std::string& label);
// statistic(replica, seed) with seed derived from the master seed and the replica index
TailCurve tail_estimate(const std::function<double(std::size_t, std::uint64_t)>& statistic,
                        const std::vector<double>& h_grid, std::size_t replicas, std::uint64_t master_seed,
                        double sigma, double T, const std::string& label, int threads = 1);

// h grid from empirical quantiles of pilot samples, between exceedance levels p_hi > p_lo
std::vector<double> quantile_grid(std::vector<double> samples, double p_hi, double p_lo, int cells);

enum class FitAxis { h2_over_sigma2, h2 };

struct GaussianFit {
    double slope_C = 0.0;
    double intercept_logD = 0.0;
    double r_squared = 0.0;
    int cells = 0;
};

GaussianFit gaussian_tail_fit(const TailCurve& c, FitAxis axis = FitAxis::h2_over_sigma2);

struct XiNorm {
    double sup_v = 0.0, sup_w = 0.0, holder_v = 0.0, holder_w = 0.0;
    double value() const;
};

XiNorm xi_norm(const std::vector<SpectralField>& v, const std::vector<SpectralField>& w,
               const std::vector<double>& times, double t0, double eps, const DyadicPartition& p);

struct TScalingRow {
    double T = 0.0;
    GaussianFit fit;
    double scaled = 0.0;  // slope_C * max(T^lambda, T^{lambda/5})
};

// statistic(T, replica, seed); h grids per T from quantiles of the samples themselves
std::vector<TScalingRow> T_scaling_probe(const std::function<double(double, std::size_t, std::uint64_t)>& statistic,
                                         const std::vector<double>& T_list, double lambda, double sigma,
                                         std::size_t replicas, std::uint64_t seed, int threads = 1);

}  // namespace phi4
