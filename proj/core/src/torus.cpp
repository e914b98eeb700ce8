#include "phi4/torus.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace phi4 {

std::size_t Shape::real_size() const {
    return static_cast<std::size_t>(n0()) * n1() * M;
}

std::size_t Shape::spec_size() const {
    return static_cast<std::size_t>(n0()) * n1() * nh();
}

TorusGrid::TorusGrid(int dim, int N) : s_{dim, N} {
    if (dim < 1 || dim > 3) throw std::invalid_argument("TorusGrid: dim must be 1, 2 or 3");
    if (N < 4 || (N & (N - 1)) != 0) throw std::invalid_argument("TorusGrid: N must be a power of two >= 4");
}

std::array<int, 3> TorusGrid::mode(std::size_t idx) const {
    const int nh = s_.nh(), n1 = s_.n1();
    int k = static_cast<int>(idx % nh);
    int i1 = static_cast<int>((idx / nh) % n1);
    int i0 = static_cast<int>(idx / (static_cast<std::size_t>(nh) * n1));
    return {s_.dim == 3 ? freq(i0) : 0, s_.dim >= 2 ? freq(i1) : 0, k};
}

std::size_t TorusGrid::index_of(const std::array<int, 3>& w_in, bool& conj) const {
    const int N = s_.M;
    auto wrap = [N](int w) { return ((w % N) + N) % N; };
    std::array<int, 3> w = w_in;
    if ((s_.dim < 3 && w[0] != 0) || (s_.dim < 2 && w[1] != 0))
        throw std::out_of_range("TorusGrid::index_of: frequency on an absent axis");
    int k = wrap(w[2]);
    if (k > N / 2) {
        conj = true;
        w = {-w[0], -w[1], -w[2]};
        k = wrap(w[2]);
    } else {
        conj = false;
    }
    int i0 = s_.dim == 3 ? wrap(w[0]) : 0;
    int i1 = s_.dim >= 2 ? wrap(w[1]) : 0;
    return (static_cast<std::size_t>(i0) * s_.n1() + i1) * s_.nh() + k;
}

int TorusGrid::norm2(std::size_t idx) const {
    auto w = mode(idx);
    return w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
}

int TorusGrid::norm_inf(std::size_t idx) const {
    auto w = mode(idx);
    return std::max({std::abs(w[0]), std::abs(w[1]), std::abs(w[2])});
}

double TorusGrid::multiplicity(std::size_t idx) const {
    int k = static_cast<int>(idx % s_.nh());
    return (k == 0 || k == s_.M / 2) ? 1.0 : 2.0;
}

cplx SpectralField::at(const std::array<int, 3>& w) const {
    bool c = false;
    std::size_t i = grid.index_of(w, c);
    return c ? std::conj(coeffs[i]) : coeffs[i];
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += o.coeffs[i];
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] -= o.coeffs[i];
    return *this;
}

SpectralField& SpectralField::operator*=(double s) {
    for (auto& c : coeffs) c *= s;
    return *this;
}

SpectralField& SpectralField::axpy(double s, const SpectralField& o) {
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += s * o.coeffs[i];
    return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

namespace {

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
};

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

const PlanPair& plans_for(const Shape& s) {
    static std::map<std::pair<int, int>, std::unique_ptr<PlanPair>> cache;
    std::lock_guard<std::mutex> lock(plan_mutex());
    auto key = std::make_pair(s.dim, s.M);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;
    auto pp = std::make_unique<PlanPair>();
    int dims[3] = {s.M, s.M, s.M};
    RVec r(s.real_size());
    CVec c(s.spec_size());
    auto* cp = reinterpret_cast<fftw_complex*>(c.data());
    pp->fwd = fftw_plan_dft_r2c(s.dim, dims, r.data(), cp, FFTW_ESTIMATE);
    pp->inv = fftw_plan_dft_c2r(s.dim, dims, cp, r.data(), FFTW_ESTIMATE);
    if (!pp->fwd || !pp->inv) throw std::runtime_error("FFTW planning failed");
    auto& ref = *pp;
    cache.emplace(key, std::move(pp));
    return ref;
}

}  // namespace

void forward_raw(const Shape& s, const double* in, cplx* out) {
    const PlanPair& p = plans_for(s);
    fftw_execute_dft_r2c(p.fwd, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
    const double scale = 1.0 / static_cast<double>(s.real_size());
    const std::size_t n = s.spec_size();
    for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

void inverse_raw(const Shape& s, const cplx* in, double* out) {
    const PlanPair& p = plans_for(s);
    CVec scratch(in, in + s.spec_size());
    fftw_execute_dft_c2r(p.inv, reinterpret_cast<fftw_complex*>(scratch.data()), out);
}

void inverse_raw_destroy(const Shape& s, cplx* in, double* out) {
    const PlanPair& p = plans_for(s);
    fftw_execute_dft_c2r(p.inv, reinterpret_cast<fftw_complex*>(in), out);
}

SpectralField dft_forward(const RealField& f) {
    SpectralField out(f.grid);
    forward_raw(f.grid.shape(), f.values.data(), out.coeffs.data());
    return out;
}

RealField dft_inverse(const SpectralField& f) {
    RealField out(f.grid);
    inverse_raw(f.grid.shape(), f.coeffs.data(), out.values.data());
    return out;
}

SpectralField heat_propagate(const SpectralField& f, double s, double t, const CoefficientSet& c) {
    if (t < s) throw std::invalid_argument("heat_propagate: t < s");
    const double a = c.alpha(t, s);
    const double lam = 4.0 * std::numbers::pi * std::numbers::pi * (t - s);
    SpectralField out(f.grid);
    for (std::size_t i = 0; i < f.coeffs.size(); ++i)
        out.coeffs[i] = f.coeffs[i] * std::exp(a - lam * f.grid.norm2(i));
    return out;
}

SpectralField heat_flow(const SpectralField& f, double t) {
    if (t < 0.0) throw std::invalid_argument("heat_flow: negative time");
    const double lam = 4.0 * std::numbers::pi * std::numbers::pi * t;
    SpectralField out(f.grid);
    for (std::size_t i = 0; i < f.coeffs.size(); ++i)
        out.coeffs[i] = f.coeffs[i] * std::exp(-lam * f.grid.norm2(i));
    return out;
}

SpectralField spectral_truncate(const SpectralField& f, int n) {
    if (n < 0) throw std::invalid_argument("spectral_truncate: negative cutoff");
    SpectralField out = f;
    for (std::size_t i = 0; i < f.coeffs.size(); ++i)
        if (f.grid.norm_inf(i) > n) out.coeffs[i] = 0.0;
    return out;
}

namespace {

struct PadEntry {
    std::size_t src, dst;
    double fac;
};

struct TruncEntry {
    std::size_t dst, src;
    bool conj;
};

struct PadMaps {
    std::vector<PadEntry> pad;
    std::vector<TruncEntry> trunc;
};

using Target = std::vector<std::pair<int, double>>;

Target full_axis_targets(int i, int N, int M, bool present) {
    if (!present) return {{0, 1.0}};
    int w = i <= N / 2 ? i : i - N;
    if (M == N) return {{i, 1.0}};
    if (w == N / 2) return {{N / 2, 0.5}, {M - N / 2, 0.5}};
    return {{(w + M) % M, 1.0}};
}

const PadMaps& pad_maps(int dim, int N, int M) {
    static std::map<std::tuple<int, int, int>, std::unique_ptr<PadMaps>> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto key = std::make_tuple(dim, N, M);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;
    if (M < N || M % 2 != 0) throw std::invalid_argument("padding: M must be even and >= N");
    auto maps = std::make_unique<PadMaps>();
    Shape sn{dim, N}, sm{dim, M};
    const int n0 = sn.n0(), n1 = sn.n1(), nh = sn.nh();
    const int mh = sm.nh(), m1 = sm.n1();
    auto pidx = [&](int a, int b, int k) { return (static_cast<std::size_t>(a) * m1 + b) * mh + k; };
    auto neg = [&](int t, bool present) { return present ? (M - t) % M : 0; };
    for (int i0 = 0; i0 < n0; ++i0) {
        Target T0 = full_axis_targets(i0, N, M, dim == 3);
        for (int i1 = 0; i1 < n1; ++i1) {
            Target T1 = full_axis_targets(i1, N, M, dim >= 2);
            for (int k = 0; k < nh; ++k) {
                std::size_t src = (static_cast<std::size_t>(i0) * n1 + i1) * nh + k;
                bool half_nyq = (k == N / 2 && M > N);
                double kf = half_nyq ? 0.5 : 1.0;
                for (auto [t0, f0] : T0)
                    for (auto [t1, f1] : T1) {
                        maps->pad.push_back({src, pidx(t0, t1, k), f0 * f1 * kf});
                        maps->trunc.push_back({src, pidx(t0, t1, k), false});
                        if (half_nyq)
                            maps->trunc.push_back({src, pidx(neg(t0, dim == 3), neg(t1, dim >= 2), k), true});
                    }
            }
        }
    }
    auto& ref = *maps;
    cache.emplace(key, std::move(maps));
    return ref;
}

}  // namespace

void pad_spectrum(const TorusGrid& g, const cplx* src, int M, cplx* dst) {
    const PadMaps& m = pad_maps(g.dim(), g.N(), M);
    Shape sm{g.dim(), M};
    std::fill(dst, dst + sm.spec_size(), cplx(0.0, 0.0));
    for (const auto& e : m.pad) dst[e.dst] += e.fac * src[e.src];
}

void truncate_spectrum(const TorusGrid& g, int M, const cplx* src, cplx* dst) {
    const PadMaps& m = pad_maps(g.dim(), g.N(), M);
    std::fill(dst, dst + g.spec_size(), cplx(0.0, 0.0));
    for (const auto& e : m.trunc) dst[e.dst] += e.conj ? std::conj(src[e.src]) : src[e.src];
}

int default_pad(const TorusGrid& g) { return 2 * g.N(); }

Padded to_padded(const SpectralField& f, int M) {
    Shape sm{f.grid.dim(), M};
    CVec spec(sm.spec_size());
    pad_spectrum(f.grid, f.coeffs.data(), M, spec.data());
    Padded p{sm, RVec(sm.real_size())};
    const PlanPair& pp = plans_for(sm);
    fftw_execute_dft_c2r(pp.inv, reinterpret_cast<fftw_complex*>(spec.data()), p.v.data());
    return p;
}

Padded to_padded(const SpectralField& f) { return to_padded(f, default_pad(f.grid)); }

SpectralField from_padded(const Padded& p, const TorusGrid& g) {
    CVec spec(p.shape.spec_size());
    forward_raw(p.shape, p.v.data(), spec.data());
    SpectralField out(g);
    truncate_spectrum(g, p.shape.M, spec.data(), out.coeffs.data());
    return out;
}

SpectralField dealiased_product(const SpectralField& f, const SpectralField& g) {
    if (f.grid != g.grid) throw std::invalid_argument("dealiased_product: grid mismatch");
    Padded a = to_padded(f);
    Padded b = to_padded(g);
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] *= b.v[i];
    return from_padded(a, f.grid);
}

SpectralField dealiased_product(const SpectralField& f, const SpectralField& g, const SpectralField& h) {
    if (f.grid != g.grid || f.grid != h.grid) throw std::invalid_argument("dealiased_product: grid mismatch");
    Padded a = to_padded(f);
    Padded b = to_padded(g);
    Padded c = to_padded(h);
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] *= b.v[i] * c.v[i];
    return from_padded(a, f.grid);
}

RealField dealiased_product(const RealField& f, const RealField& g) {
    return dft_inverse(dealiased_product(dft_forward(f), dft_forward(g)));
}

RealField dealiased_product(const RealField& f, const RealField& g, const RealField& h) {
    return dft_inverse(dealiased_product(dft_forward(f), dft_forward(g), dft_forward(h)));
}

double sup_norm(const RealField& f) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::fabs(v));
    return m;
}

}  // namespace phi4
