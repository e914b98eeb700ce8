#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "phi4/coefficients.hpp"
#include "phi4/paracalc.hpp"
#include "phi4/torus.hpp"

namespace phi4 {

// Increasing time points starting at 0. uniform() gives t_j = j T / M.
class TimeGrid {
public:
    TimeGrid(double T, int steps);
    explicit TimeGrid(std::vector<double> times);
    static TimeGrid uniform(double T, int steps) { return TimeGrid(T, steps); }

    int steps() const { return static_cast<int>(t_.size()) - 1; }
    double T() const { return t_.back(); }
    double t(int j) const { return t_[j]; }
    double dt(int j) const { return t_[j + 1] - t_[j]; }
    // nominal step for uniform grids
    double dt() const { return T() / steps(); }
    const std::vector<double>& times() const { return t_; }

private:
    std::vector<double> t_;
};

// Roles keep streams of one replica apart.
enum class StreamRole : std::uint64_t { noise = 1, pilot = 2, ctilde = 3, aux = 4 };

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replica, StreamRole role);

// Standard complex Gaussians on the modes |w|_inf <= n, drawn step after step.
// Self-conjugate modes get a real N(0,1), other modes (g1 + i g2)/sqrt(2).
class NoiseStream {
public:
    NoiseStream(const TorusGrid& g, int n, std::uint64_t seed);
    void next(CVec& z);
    const TorusGrid& grid() const { return grid_; }
    int cutoff() const { return n_; }

private:
    TorusGrid grid_;
    int n_;
    std::mt19937_64 eng_;
    std::normal_distribution<double> nd_;
    std::vector<std::size_t> active_;       // canonical entries
    std::vector<char> self_conj_;           // per active entry
    std::vector<std::pair<std::size_t, std::size_t>> partners_;  // (dst, src) conjugate fill in the stored planes
};

struct NoiseRealization {
    TorusGrid grid;
    TimeGrid time;
    double sigma;
    int n;
    std::uint64_t seed;
    std::vector<CVec> dW;  // dW[j] has variance dt(j) per mode
};

NoiseRealization sample_noise(const TorusGrid& g, const TimeGrid& tg, double sigma, int n, std::uint64_t seed);

// Per-step exact kernels of the linear part d/dt - Delta - a(t), tabulated by |w|^2.
//   prop = e^{alpha(t1,t0) - 4 pi^2 |w|^2 h}
//   sd   = sqrt(int_{t0}^{t1} e^{2 alpha(t1,s) - 8 pi^2 |w|^2 (t1-s)} ds)
//   etd  = int_{t0}^{t1} e^{alpha(t1,s) - 4 pi^2 |w|^2 (t1-s)} ds
class StepKernel {
public:
    StepKernel(const TorusGrid& g, const CoefficientSet& c, const TimeGrid& tg);

    const TorusGrid& grid() const { return grid_; }
    const TimeGrid& time() const { return tg_; }
    int classes() const { return static_cast<int>(norms_.size()); }
    int class_of(std::size_t idx) const { return cls_[idx]; }
    int norm2_of_class(int c) const { return norms_[c]; }

    double prop(int j, int c) const { return tab(j)[3 * c]; }
    double sd(int j, int c) const { return tab(j)[3 * c + 1]; }
    double etd(int j, int c) const { return tab(j)[3 * c + 2]; }

    // f <- P_j f
    void propagate(int j, CVec& f) const;
    // f <- P_j (f + h g)
    void lawson(int j, CVec& f, const CVec& g) const;
    // f <- P_j f + etd_j g
    void etd1(int j, CVec& f, const CVec& g) const;
    // f += s * sd_j * z
    void inject(int j, CVec& f, const CVec& z, double s) const;

private:
    const std::vector<double>& tab(int j) const { return shared_ ? tables_[0] : tables_[j]; }

    TorusGrid grid_;
    TimeGrid tg_;
    std::vector<int> cls_;
    std::vector<int> norms_;
    bool shared_ = false;
    std::vector<std::vector<double>> tables_;
};

// int_0^L e^{-kappa u} e^{s g(u)} du with g(u) = A(t) - A(t-u) - a(t) u, s in {1, 2}
double kernel_integral(const CoefficientSet& c, double t, double L, double kappa, double s);

// I path at the grid times from one realization; I(0) = 0
std::vector<SpectralField> build_I(const NoiseRealization& noise, const CoefficientSet& c);
std::vector<SpectralField> build_I(const NoiseRealization& noise, const StepKernel& k);

// left-point exponential Euler I(t_{j+1}) = P (I(t_j) + h f(t_j))
std::vector<SpectralField> integrator_I(const std::vector<SpectralField>& f, const StepKernel& k);
std::vector<SpectralField> integrator_I(const std::vector<SpectralField>& f, const CoefficientSet& c,
                                        const TimeGrid& tg);

// E|I^(t,w)|^2 for unit sigma, exact
double mode_variance(const CoefficientSet& c, int norm2, double t);
// sigma^2 sum over all integer w with |w|_inf <= n
double renorm_c(const CoefficientSet& c, int dim, int n, double t, double sigma = 1.0);
// same sum restricted to the frequency set of g (differs from renorm_c only when n = N/2)
double renorm_c_grid(const CoefficientSet& c, const TorusGrid& g, int n, double t, double sigma = 1.0);

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t replicas = 0;
    bool wide = false;  // se above the requested threshold
};

// spatial mean of f o g computed in Fourier space; matches the padded resonant product
double resonant_mean(const SpectralField& f, const SpectralField& g, const DyadicPartition& p);

struct CTildeOptions {
    std::size_t replicas = 500;
    std::uint64_t seed = 1;
    double sigma = 1.0;
    int pad = 0;                // padded grid size for V; 0 uses 2N
    double se_threshold = 0.0;  // 0 disables the flag
    std::vector<int> record;    // time indices to estimate; empty means all
};

// Monte Carlo c~_n = E[I(V) o V] / 2 at every time of tg (n <= N/2 on the grid g).
// Half, so that subtracting 2 c~_n centres WV.
std::vector<McEstimate> renorm_c_tilde_path(const TorusGrid& g, int n, const CoefficientSet& c,
                                            const TimeGrid& tg, const CTildeOptions& opt);
McEstimate renorm_c_tilde(const TorusGrid& g, int n, const CoefficientSet& c, const TimeGrid& tg,
                          const CTildeOptions& opt);

struct CovarianceCheck {
    double estimate = 0.0;  // E|I^(t,w) - I^(s,w)|^2
    double se = 0.0;
    double exact = 0.0;     // closed form from the kernel
    double ratio = 0.0;     // estimate / ((t-s)^lambda <w>^{-2+2 lambda})
};

CovarianceCheck covariance_increment_check(const CoefficientSet& c, int dim, const std::array<int, 3>& w,
                                           double s, double t, double lambda, std::size_t replicas,
                                           std::uint64_t seed);

}  // namespace phi4
