#pragma once

#include <functional>
#include <vector>

namespace phi4 {

// Polynomial in t, lowest degree first.
class TimePoly {
public:
    static constexpr int max_degree = 8;

    TimePoly() = default;
    explicit TimePoly(std::vector<double> c);
    static TimePoly constant(double v);

    const std::vector<double>& coeffs() const { return c_; }
    int degree() const { return static_cast<int>(c_.size()) - 1; }

    double operator()(double t) const;
    TimePoly derivative() const;
    // antiderivative vanishing at t = 0
    TimePoly antiderivative() const;

    TimePoly operator+(const TimePoly& o) const;
    TimePoly operator-(const TimePoly& o) const;
    TimePoly operator*(const TimePoly& o) const;
    TimePoly operator*(double s) const;

    // sup and inf over [lo, hi] via critical points
    double max_on(double lo, double hi) const;
    double min_on(double lo, double hi) const;

private:
    std::vector<double> c_{0.0};
};

struct StabilityExtrema {
    double a_plus;
    double a_minus;
};

class CoefficientSet {
public:
    CoefficientSet(TimePoly f2, TimePoly a, double T, bool require_stable = true);

    const TimePoly& f2() const { return f2_; }
    const TimePoly& a() const { return a_; }
    double horizon() const { return T_; }
    bool stable() const { return stable_; }
    double a_plus() const { return ext_.a_plus; }
    double a_minus() const { return ext_.a_minus; }
    double m() const { return m_; }

    // exact antiderivative difference, int_u^t a
    double alpha(double t, double u) const;

private:
    TimePoly f2_;
    TimePoly a_;
    TimePoly A_;
    double T_;
    bool stable_;
    StabilityExtrema ext_;
    double m_;
};

double alpha(double t, double u, const CoefficientSet& c);
StabilityExtrema stability_extrema(const CoefficientSet& c);

// b = 1/sqrt(-a3) and the transformed coefficients of the normalized cubic
class CubicNormalization {
public:
    CubicNormalization(TimePoly a3, TimePoly a2, TimePoly a1, TimePoly a0, double T);

    double b(double t) const;
    double b_prime(double t) const;
    double b2(double t) const;
    double b1(double t) const;
    double b0(double t) const;
    double noise_scale(double t) const { return 1.0 / b(t); }

private:
    TimePoly a3_, a2_, a1_, a0_;
};

CubicNormalization normalize_cubic(const TimePoly& a3, const TimePoly& a2, const TimePoly& a1,
                                   const TimePoly& a0, double T);

CoefficientSet recentre(const TimePoly& b2, const TimePoly& b1, const TimePoly& b0,
                        const TimePoly& phibar, double T, bool require_stable = true);

struct EquilibriumPath {
    std::vector<double> times;
    std::vector<double> values;
};

struct EquilibriumOptions {
    double ceiling = 1e6;
};

// RK4 for d/dt phi = -phi^3 + b2 phi^2 + b1 phi + b0
EquilibriumPath equilibrium_ode(const TimePoly& b2, const TimePoly& b1, const TimePoly& b0,
                                double phi0, double T, double dt, EquilibriumOptions opt = {});
// the gamma form: d/dt phi = -phi^3 + gamma phi
EquilibriumPath equilibrium_ode(const TimePoly& gamma, double phi0, double T, double dt,
                                EquilibriumOptions opt = {});

// least-squares polynomial through a sampled path
TimePoly fit_poly(const std::vector<double>& t, const std::vector<double>& y, int degree);

}  // namespace phi4
