#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "phi4/coefficients.hpp"
#include "phi4/noise.hpp"
#include "phi4/paracalc.hpp"
#include "phi4/symbols.hpp"

namespace phi4 {

enum class StepScheme { lawson, etd1 };
const char* scheme_name(StepScheme s);

class BlowUp : public std::runtime_error {
public:
    BlowUp(const std::string& what, double t) : std::runtime_error(what), time(t) {}
    double time;
};

struct SolutionPath {
    TorusGrid grid;
    TimeGrid time;
    std::vector<SpectralField> states;
    int n = 0;
    std::uint64_t seed = 0;
    StepScheme scheme = StepScheme::lawson;
    double dt() const { return time.dt(); }
};

// d/dt phi = Delta phi - phi^3 + b2 phi^2 + b1 phi + b0, exponential Euler with the pure heat propagator
SolutionPath solve_deterministic(const TimePoly& b2, const TimePoly& b1, const TimePoly& b0, const RealField& phi0,
                                 const TimeGrid& tg, double ceiling = 1e6);

struct RenormOptions {
    bool cubic = true;         // include -phi^3 + f2 phi^2
    bool counterterms = true;  // include (3c - 18c~) phi - f2 c
    StepScheme scheme = StepScheme::lawson;
    int pad = 0;
    double ceiling = 1e6;
};

// One step of the recentred renormalised equation; shares noise with the symbol construction.
class DirectSolver {
public:
    DirectSolver(const StepKernel& k, const CoefficientSet& c, RenormOptions opt = {});
    const SpectralField& state() const { return psi_; }
    // psi <- P psi + weight * N(psi) + sigma sd z
    void step(int j, double c_n, double ct_n, const CVec& z, double sigma);
    // pointwise nonlinearity on the padded grid
    SpectralField nonlinearity(const SpectralField& psi, double t, double c_n, double ct_n) const;

private:
    const StepKernel& k_;
    const CoefficientSet& c_;
    RenormOptions opt_;
    int pad_;
    SpectralField psi_;
};

// psi path (phibar removed) of the recentred renormalised equation driven by its own stream
SolutionPath solve_renormalized(const CoefficientSet& c, const TorusGrid& g, int n, const TimeGrid& tg, double sigma,
                                std::uint64_t seed, const std::vector<double>& c_unit,
                                const std::vector<double>& ctilde_unit, RenormOptions opt = {});
SolutionPath solve_renormalized(const CoefficientSet& c, const NoiseRealization& noise,
                                const std::vector<double>& ctilde_unit, RenormOptions opt = {});

// Symbol-only data for the (v,w) right-hand sides at one time.
class VWContext {
public:
    struct Options {
        bool closure = true;  // add the terms needed for the identity with the direct solve
    };

    // uses the stepper's cached blocks
    VWContext(const SymbolStepper& st, double f2, Options opt);
    VWContext(const SymbolStepper& st, double f2) : VWContext(st, f2, Options{}) {}
    // builds its own blocks
    VWContext(const SymbolSlice& s, const DyadicPartition& p, int pad, double f2, Options opt);
    VWContext(const SymbolSlice& s, const DyadicPartition& p, int pad, double f2)
        : VWContext(s, p, pad, f2, Options{}) {}

    const SymbolSlice& slice() const { return s_; }
    const DyadicPartition& partition() const { return p_; }
    double f2() const { return f2_; }
    int pad() const { return pad_; }
    const SpectralField& d0() const { return d0_; }
    const SpectralField& d1() const { return d1_; }
    const SpectralField& d2() const { return d2_; }
    const SpectralField& one_lt_Y() const { return oneY_; }
    const Blocked& b_one_lt_Y() const { return *boneY_; }
    const Blocked& bI() const { return *bI_; }
    const Blocked& bV() const { return *bV_; }
    const Blocked& bY() const { return *bY_; }
    const Blocked& bIW() const { return *bIW_; }
    const Options& options() const { return opt_; }

private:
    void init();

    const SymbolSlice& s_;
    const DyadicPartition& p_;
    int pad_;
    double f2_;
    Options opt_;
    const Blocked *bI_, *bV_, *bY_, *bIW_;
    std::unique_ptr<Blocked> own_[4];
    SpectralField oneY_, d0_, d1_, d2_;
    std::unique_ptr<Blocked> boneY_;
};

SpectralField F_rhs(const SpectralField& v, const SpectralField& w, const VWContext& ctx);
SpectralField com1(const SpectralField& v, const SpectralField& w, const VWContext& ctx);
SpectralField com2(const SpectralField& v, const SpectralField& w, const VWContext& ctx);
SpectralField G_rhs(const SpectralField& v, const SpectralField& w, const VWContext& ctx);

struct VWOptions {
    StepScheme scheme = StepScheme::etd1;
    VWContext::Options context;
    double ceiling = 1e6;
};

class VWSolver {
public:
    VWSolver(const StepKernel& k, VWOptions opt = {});
    const SpectralField& v() const { return v_; }
    const SpectralField& w() const { return w_; }
    // advances with the right-hand sides at the context time; returns (F, G)
    std::pair<SpectralField, SpectralField> step(int j, const VWContext& ctx);

private:
    const StepKernel& k_;
    VWOptions opt_;
    SpectralField v_, w_;
};

struct VWPaths {
    std::vector<SpectralField> v, w;
};

using VWObserver = std::function<void(int j, const SymbolStepper&, const VWContext&, const SpectralField& v,
                                      const SpectralField& w)>;

// runs the stepper to the end; the observer sees every grid time before the step from it
VWPaths solve_vw(SymbolStepper& st, const CoefficientSet& c, VWOptions opt = {}, const VWObserver& obs = {},
                 bool store = true);

// phi = phibar + I - IW + 3 J + v + w
SpectralField reconstruct_phi(const SpectralField& v, const SpectralField& w, const SymbolSlice& s, double phibar);
SolutionPath reconstruct_phi(const VWPaths& vw, const SymbolEnsemble& e, const std::function<double(double)>& phibar);

struct EquivalenceConfig {
    int dim = 3;
    int N = 32;
    int n = 8;
    double T = 0.5;
    int steps = 500;
    double sigma = 0.1;
    std::uint64_t seed = 1;
    StepScheme direct_scheme = StepScheme::lawson;
    StepScheme vw_scheme = StepScheme::etd1;
    bool closure = true;
    int pad = 0;
    int noise_refine = 1;  // noise drawn on a grid this many times finer and aggregated
};

struct EquivalenceReport {
    double gap = 0.0;           // max_j |phi_d - phi_r|_inf / max_j |phi_d|_inf
    double gap_psi = 0.0;       // same gap relative to max_j |phi_d - phibar|_inf
    double max_phi = 0.0;
    double max_psi = 0.0;
    double max_v = 0.0, max_w = 0.0;
};

// c_unit/ctilde_unit on the uniform grid of cfg; phibar a function of time
EquivalenceReport run_equivalence(const EquivalenceConfig& cfg, const CoefficientSet& c,
                                  const std::function<double(double)>& phibar, const std::vector<double>& ctilde_unit);

// com1 re-derived from its integral representation A + B + C at the final time of a stored run
struct Com1Diagnostic {
    double direct_norm = 0.0;
    double gap = 0.0;  // sup |A+B+C - com1| / sup |com1|
};
Com1Diagnostic com1_representation_check(const SymbolEnsemble& e, const VWPaths& vw, const CoefficientSet& c,
                                         const DyadicPartition& p, int pad = 0);

// ratios of measured norms to the assembled right-hand sides; maxima over the run
struct BoundDiagnostics {
    double eps = 0.05;
    double F_ratio = 0.0;  // |F|_{-1-e} / ((|v| + |w| + |IW| + |f2|) |V|)
    double G_ratio = 0.0;  // |G|_{-1/2-e} / assembled bound
    double v_ratio = 0.0;  // sup|v|_{1-2e} / sup|F|_{-1-e}
    double w_ratio = 0.0;  // sup|w|_{3/2-2e} / sup|G|_{-1/2-e}
};

class BoundTracker {
public:
    explicit BoundTracker(double eps = 0.05) { d_.eps = eps; }
    void observe(const VWContext& ctx, const SpectralField& v, const SpectralField& w);
    const BoundDiagnostics& result() const { return d_; }

private:
    BoundDiagnostics d_;
    double supF_ = 0.0, supG_ = 0.0, supv_ = 0.0, supw_ = 0.0;
};

}  // namespace phi4
