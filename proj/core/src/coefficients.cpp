#include "phi4/coefficients.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace phi4 {

TimePoly::TimePoly(std::vector<double> c) : c_(std::move(c)) {
    if (c_.empty()) c_.push_back(0.0);
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
    for (double v : c_)
        if (!std::isfinite(v)) throw std::invalid_argument("TimePoly: non-finite coefficient");
    if (degree() > max_degree) throw std::invalid_argument("TimePoly: degree above 8");
}

TimePoly TimePoly::constant(double v) { return TimePoly({v}); }

double TimePoly::operator()(double t) const {
    double r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * t + *it;
    return r;
}

TimePoly TimePoly::derivative() const {
    if (c_.size() <= 1) return TimePoly({0.0});
    std::vector<double> d(c_.size() - 1);
    for (size_t i = 1; i < c_.size(); ++i) d[i - 1] = c_[i] * static_cast<double>(i);
    return TimePoly(d);
}

TimePoly TimePoly::antiderivative() const {
    std::vector<double> d(c_.size() + 1, 0.0);
    for (size_t i = 0; i < c_.size(); ++i) d[i + 1] = c_[i] / static_cast<double>(i + 1);
    // may exceed degree 8 transiently; bypass the check
    TimePoly p;
    p.c_ = std::move(d);
    while (p.c_.size() > 1 && p.c_.back() == 0.0) p.c_.pop_back();
    return p;
}

TimePoly TimePoly::operator+(const TimePoly& o) const {
    std::vector<double> r(std::max(c_.size(), o.c_.size()), 0.0);
    for (size_t i = 0; i < c_.size(); ++i) r[i] += c_[i];
    for (size_t i = 0; i < o.c_.size(); ++i) r[i] += o.c_[i];
    return TimePoly(r);
}

TimePoly TimePoly::operator-(const TimePoly& o) const { return *this + o * -1.0; }

TimePoly TimePoly::operator*(const TimePoly& o) const {
    std::vector<double> r(c_.size() + o.c_.size() - 1, 0.0);
    for (size_t i = 0; i < c_.size(); ++i)
        for (size_t j = 0; j < o.c_.size(); ++j) r[i + j] += c_[i] * o.c_[j];
    return TimePoly(r);
}

TimePoly TimePoly::operator*(double s) const {
    std::vector<double> r = c_;
    for (double& v : r) v *= s;
    return TimePoly(r);
}

namespace {

// critical points of p on [lo, hi]: sign changes of p' on a fine mesh, refined by bisection
std::vector<double> critical_points(const TimePoly& p, double lo, double hi) {
    std::vector<double> pts{lo, hi};
    if (p.degree() < 2 || hi <= lo) return pts;
    TimePoly d = p.derivative();
    const int mesh = 2048;
    double h = (hi - lo) / mesh;
    double x0 = lo, f0 = d(lo);
    for (int i = 1; i <= mesh; ++i) {
        double x1 = lo + h * i, f1 = d(x1);
        if (f0 == 0.0) {
            pts.push_back(x0);
        } else if (f0 * f1 < 0.0) {
            double a = x0, b = x1, fa = f0;
            for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::fabs(a)); ++it) {
                double m = 0.5 * (a + b), fm = d(m);
                if (fa * fm <= 0.0) {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            pts.push_back(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    return pts;
}

}  // namespace

double TimePoly::max_on(double lo, double hi) const {
    double m = -INFINITY;
    for (double x : critical_points(*this, lo, hi)) m = std::max(m, (*this)(x));
    return m;
}

double TimePoly::min_on(double lo, double hi) const {
    double m = INFINITY;
    for (double x : critical_points(*this, lo, hi)) m = std::min(m, (*this)(x));
    return m;
}

CoefficientSet::CoefficientSet(TimePoly f2, TimePoly a, double T, bool require_stable)
    : f2_(std::move(f2)), a_(std::move(a)), A_(a_.antiderivative()), T_(T), stable_(false) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("CoefficientSet: horizon must be positive");
    ext_.a_plus = -a_.max_on(0.0, T_);
    ext_.a_minus = -a_.min_on(0.0, T_);
    stable_ = ext_.a_plus > 0.0;
    if (require_stable && !stable_) {
        std::ostringstream os;
        os << "CoefficientSet: a(t) < 0 fails on [0," << T_ << "], sup a = " << -ext_.a_plus;
        throw std::invalid_argument(os.str());
    }
    TimePoly d = f2_.derivative();
    double f2sup = std::max(std::fabs(f2_.max_on(0.0, T_)), std::fabs(f2_.min_on(0.0, T_)));
    double dsup = std::max(std::fabs(d.max_on(0.0, T_)), std::fabs(d.min_on(0.0, T_)));
    m_ = f2sup + dsup;
}

double CoefficientSet::alpha(double t, double u) const {
    const double tol = 1e-12 * (1.0 + T_);
    if (u < -tol || t < u - tol || t > T_ + tol) {
        std::ostringstream os;
        os << "alpha: times out of range (t=" << t << ", u=" << u << ", T=" << T_ << ")";
        throw std::out_of_range(os.str());
    }
    return A_(t) - A_(u);
}

double alpha(double t, double u, const CoefficientSet& c) { return c.alpha(t, u); }

StabilityExtrema stability_extrema(const CoefficientSet& c) { return {c.a_plus(), c.a_minus()}; }

CubicNormalization::CubicNormalization(TimePoly a3, TimePoly a2, TimePoly a1, TimePoly a0, double T)
    : a3_(std::move(a3)), a2_(std::move(a2)), a1_(std::move(a1)), a0_(std::move(a0)) {
    if (!(a3_.max_on(0.0, T) < 0.0))
        throw std::invalid_argument("normalize_cubic: a3 must stay strictly negative on [0,T]");
}

double CubicNormalization::b(double t) const { return 1.0 / std::sqrt(-a3_(t)); }

double CubicNormalization::b_prime(double t) const {
    // d/dt (-a3)^{-1/2} = a3' / (2 (-a3)^{3/2})
    double m = -a3_(t);
    return a3_.derivative()(t) / (2.0 * m * std::sqrt(m));
}

double CubicNormalization::b2(double t) const { return a2_(t) * b(t); }
double CubicNormalization::b1(double t) const { return (a1_(t) * b(t) - b_prime(t)) / b(t); }
double CubicNormalization::b0(double t) const { return a0_(t) / b(t); }

CubicNormalization normalize_cubic(const TimePoly& a3, const TimePoly& a2, const TimePoly& a1,
                                   const TimePoly& a0, double T) {
    return CubicNormalization(a3, a2, a1, a0, T);
}

CoefficientSet recentre(const TimePoly& b2, const TimePoly& b1, const TimePoly& /*b0*/,
                        const TimePoly& phibar, double T, bool require_stable) {
    TimePoly f2 = b2 - phibar * 3.0;
    TimePoly a = b1 + b2 * phibar * 2.0 - phibar * phibar * 3.0;
    return CoefficientSet(f2, a, T, require_stable);
}

EquilibriumPath equilibrium_ode(const TimePoly& b2, const TimePoly& b1, const TimePoly& b0,
                                double phi0, double T, double dt, EquilibriumOptions opt) {
    if (!(dt > 0.0)) throw std::invalid_argument("equilibrium_ode: dt must be positive");
    auto rhs = [&](double t, double p) { return -p * p * p + b2(t) * p * p + b1(t) * p + b0(t); };
    long steps = std::lround(std::ceil(T / dt - 1e-9));
    double h = T / static_cast<double>(steps);
    EquilibriumPath out;
    out.times.reserve(steps + 1);
    out.values.reserve(steps + 1);
    double t = 0.0, p = phi0;
    out.times.push_back(t);
    out.values.push_back(p);
    for (long j = 0; j < steps; ++j) {
        double k1 = rhs(t, p);
        double k2 = rhs(t + 0.5 * h, p + 0.5 * h * k1);
        double k3 = rhs(t + 0.5 * h, p + 0.5 * h * k2);
        double k4 = rhs(t + h, p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = h * static_cast<double>(j + 1);
        if (!std::isfinite(p) || std::fabs(p) > opt.ceiling) {
            std::ostringstream os;
            os << "equilibrium_ode: blow-up at t=" << t << " (|phi| > " << opt.ceiling << ")";
            throw std::runtime_error(os.str());
        }
        out.times.push_back(t);
        out.values.push_back(p);
    }
    return out;
}

EquilibriumPath equilibrium_ode(const TimePoly& gamma, double phi0, double T, double dt,
                                EquilibriumOptions opt) {
    return equilibrium_ode(TimePoly::constant(0.0), gamma, TimePoly::constant(0.0), phi0, T, dt, opt);
}

TimePoly fit_poly(const std::vector<double>& t, const std::vector<double>& y, int degree) {
    if (t.size() != y.size() || t.size() < static_cast<size_t>(degree + 1))
        throw std::invalid_argument("fit_poly: not enough samples");
    double scale = 0.0;
    for (double v : t) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0) scale = 1.0;
    Eigen::MatrixXd A(t.size(), degree + 1);
    Eigen::VectorXd b(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        double s = t[i] / scale, pw = 1.0;
        for (int k = 0; k <= degree; ++k) {
            A(i, k) = pw;
            pw *= s;
        }
        b(i) = y[i];
    }
    Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
    std::vector<double> c(degree + 1);
    for (int k = 0; k <= degree; ++k) c[k] = x(k) / std::pow(scale, k);
    return TimePoly(c);
}

}  // namespace phi4
