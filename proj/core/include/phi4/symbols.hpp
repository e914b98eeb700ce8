#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "phi4/noise.hpp"
#include "phi4/paracalc.hpp"

namespace phi4 {

enum class Symbol { I, V, Y, IW, VW, WV, WW };

struct SymbolInfo {
    Symbol symbol;
    const char* name;
    double regularity;       // |tau|
    std::vector<int> chaos;  // Wiener chaos orders carried by the symbol
    int n_tau;               // number of noise factors
};

const std::vector<SymbolInfo>& symbol_catalog();
const SymbolInfo& symbol_info(Symbol s);
std::optional<Symbol> symbol_from_name(const std::string& name);

// All symbols at one grid time, plus the integrand W = I^3 - 3cI and J = I(WW).
struct SymbolSlice {
    explicit SymbolSlice(const TorusGrid& g)
        : I(g), V(g), Y(g), IW(g), VW(g), WV(g), WW(g), W(g), J(g) {}
    double t = 0.0;
    double c = 0.0;
    double ctilde = 0.0;
    SpectralField I, V, Y, IW, VW, WV, WW, W, J;
    const SpectralField& get(Symbol s) const;
};

// Supplies the standard complex Gaussian vector for step j.
using NoiseSource = std::function<void(int j, CVec& z)>;
NoiseSource stream_source(const TorusGrid& g, int n, std::uint64_t seed);
NoiseSource realization_source(const NoiseRealization& r);
// Noise for the coarse kernel aggregated exactly from `factor` draws per step on a refined kernel, so that
// both grids carry the same Brownian path; the coarse kernel must outlive the source.
NoiseSource aggregated_source(std::shared_ptr<const StepKernel> fine, const StepKernel& coarse, int factor,
                              NoiseSource fine_src);

struct SymbolParams {
    int n = 4;
    double sigma = 1.0;
    int pad = 0;                      // padded size for products; 0 means 2N
    std::vector<double> c_unit;       // c_n(t_j) at sigma = 1
    std::vector<double> ctilde_unit;  // c~_n(t_j) at sigma = 1
};

// Sequential construction of the symbols along a time grid. The state at index j
// is exposed through slice(); advance() consumes z_j and moves to j + 1.
class SymbolStepper {
public:
    SymbolStepper(const StepKernel& k, const DyadicPartition& p, SymbolParams params, NoiseSource src);

    int index() const { return j_; }
    bool done() const { return j_ == k_.time().steps(); }
    const SymbolSlice& slice() const { return s_; }
    // noise used by the next advance (valid while !done())
    const CVec& z() const { return z_; }
    double sigma() const { return prm_.sigma; }
    int pad() const { return pad_; }
    const StepKernel& kernel() const { return k_; }
    const DyadicPartition& partition() const { return p_; }

    // blocked samples of I, V, Y, IW at the current time
    const Blocked& blocked(Symbol s) const;

    void advance();

private:
    void refresh();

    const StepKernel& k_;
    const DyadicPartition& p_;
    SymbolParams prm_;
    NoiseSource src_;
    int pad_;
    int j_ = 0;
    SymbolSlice s_;
    CVec z_;
    std::unique_ptr<Blocked> bI_, bV_, bY_, bIW_;
};

struct SymbolEnsemble {
    TorusGrid grid;
    TimeGrid time;
    int n;
    double sigma;
    std::uint64_t seed;
    std::vector<SymbolSlice> slices;
    std::vector<double> c() const;
    std::vector<double> ctilde() const;
    std::vector<SpectralField> path(Symbol s) const;
};

// unit-sigma renormalisation paths on a time grid
std::vector<double> renorm_c_path(const CoefficientSet& c, const TorusGrid& g, int n, const TimeGrid& tg);

SymbolEnsemble build_symbols(const NoiseRealization& noise, const CoefficientSet& c, const DyadicPartition& p,
                             const std::vector<double>& ctilde_unit, int pad = 0);
SymbolEnsemble build_symbols(const StepKernel& k, const DyadicPartition& p, const SymbolParams& prm,
                             std::uint64_t seed);

struct ChaosDecomposition {
    std::vector<double> sigmas;
    double condition = 0.0;
    // tilde[l][j] is the sigma-free component of order l at time j
    std::vector<std::vector<SpectralField>> tilde;
    // Pi_l tau at amplitude sigma, i.e. sigma^l * tilde[l]
    std::vector<SpectralField> component(int l, double sigma) const;
    // max |coeff| of tilde[l] * sigma^l over the path
    double mass(int l, double sigma) const;
};

std::vector<double> default_sigma_list(int n_tau);

// builder(sigma) returns the symbol path at amplitude sigma with common randomness
ChaosDecomposition chaos_decompose(const std::function<std::vector<SpectralField>(double)>& builder,
                                   const std::vector<double>& sigmas, int n_tau, double max_condition = 1e8);

double max_abs(const std::vector<SpectralField>& path);

}  // namespace phi4
