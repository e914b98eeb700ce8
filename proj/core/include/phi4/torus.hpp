#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <new>
#include <vector>

#include "phi4/coefficients.hpp"

namespace phi4 {

using cplx = std::complex<double>;

template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}
    T* allocate(std::size_t n) {
        std::size_t bytes = ((n * sizeof(T) + alignment - 1) / alignment) * alignment;
        void* p = std::aligned_alloc(alignment, bytes == 0 ? alignment : bytes);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) { std::free(p); }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const { return true; }
    template <class U>
    bool operator!=(const AlignedAllocator<U>&) const { return false; }
};

using RVec = std::vector<double, AlignedAllocator<double>>;
using CVec = std::vector<cplx, AlignedAllocator<cplx>>;

// Array shape for transforms: dim axes of M points each. M need only be even.
struct Shape {
    int dim = 1;
    int M = 4;
    int n0() const { return dim == 3 ? M : 1; }
    int n1() const { return dim >= 2 ? M : 1; }
    int nh() const { return M / 2 + 1; }
    std::size_t real_size() const;
    std::size_t spec_size() const;
    bool operator==(const Shape& o) const { return dim == o.dim && M == o.M; }
};

// Unit torus of dimension 1..3 with N points per axis (N a power of two, N >= 4).
// Spectral arrays use the half layout: full axes first, the last axis holds 0..N/2.
class TorusGrid {
public:
    TorusGrid(int dim, int N);

    int dim() const { return s_.dim; }
    int N() const { return s_.M; }
    const Shape& shape() const { return s_; }
    std::size_t real_size() const { return s_.real_size(); }
    std::size_t spec_size() const { return s_.spec_size(); }

    int freq(int i) const { return i <= s_.M / 2 ? i : i - s_.M; }
    // frequency vector of a half-layout index; axes are right-aligned, so a 1d mode is {0, 0, k}
    // and a 2d mode {0, k1, k2}
    std::array<int, 3> mode(std::size_t idx) const;
    // half-layout index of a frequency (sets conj when the stored entry is the conjugate)
    std::size_t index_of(const std::array<int, 3>& w, bool& conj) const;
    int norm2(std::size_t idx) const;
    int norm_inf(std::size_t idx) const;
    // 2 when the entry stands for itself and its conjugate, 1 for self-conjugate planes
    double multiplicity(std::size_t idx) const;

    bool operator==(const TorusGrid& o) const { return s_ == o.s_; }
    bool operator!=(const TorusGrid& o) const { return !(s_ == o.s_); }

private:
    Shape s_;
};

struct RealField {
    TorusGrid grid;
    RVec values;
    explicit RealField(const TorusGrid& g) : grid(g), values(g.real_size(), 0.0) {}
};

struct SpectralField {
    TorusGrid grid;
    CVec coeffs;
    explicit SpectralField(const TorusGrid& g) : grid(g), coeffs(g.spec_size(), cplx(0.0, 0.0)) {}

    // coefficient at any frequency in the index set
    cplx at(const std::array<int, 3>& w) const;

    SpectralField& operator+=(const SpectralField& o);
    SpectralField& operator-=(const SpectralField& o);
    SpectralField& operator*=(double s);
    SpectralField& axpy(double s, const SpectralField& o);
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

// raw transforms on a shape; forward carries the 1/M^d factor
void forward_raw(const Shape& s, const double* in, cplx* out);
void inverse_raw(const Shape& s, const cplx* in, double* out);
// as inverse_raw but overwrites in
void inverse_raw_destroy(const Shape& s, cplx* in, double* out);

SpectralField dft_forward(const RealField& f);
RealField dft_inverse(const SpectralField& f);

// e^{alpha(t,s)} e^{-4 pi^2 |w|^2 (t-s)} per coefficient
SpectralField heat_propagate(const SpectralField& f, double s, double t, const CoefficientSet& c);
// pure heat flow e^{t Delta}
SpectralField heat_flow(const SpectralField& f, double t);

SpectralField spectral_truncate(const SpectralField& f, int n);

// Padded physical samples of a bandlimited field on an M-point grid.
// The Nyquist entries of the coarse grid are split evenly between +N/2 and -N/2.
struct Padded {
    Shape shape;
    RVec v;
};

int default_pad(const TorusGrid& g);
Padded to_padded(const SpectralField& f, int M);
Padded to_padded(const SpectralField& f);
// forward transform on the padded grid, then fold back into the band of g
SpectralField from_padded(const Padded& p, const TorusGrid& g);
// pad/truncate in spectral space only
void pad_spectrum(const TorusGrid& g, const cplx* src, int M, cplx* dst);
void truncate_spectrum(const TorusGrid& g, int M, const cplx* src, cplx* dst);

SpectralField dealiased_product(const SpectralField& f, const SpectralField& g);
SpectralField dealiased_product(const SpectralField& f, const SpectralField& g, const SpectralField& h);
RealField dealiased_product(const RealField& f, const RealField& g);
RealField dealiased_product(const RealField& f, const RealField& g, const RealField& h);

double sup_norm(const RealField& f);

}  // namespace phi4
