#include "phi4/symbols.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phi4 {

const std::vector<SymbolInfo>& symbol_catalog() {
    static const std::vector<SymbolInfo> cat = {
        {Symbol::I, "I", -0.5, {1}, 1},          {Symbol::V, "V", -1.0, {2}, 2},
        {Symbol::Y, "Y", 1.0, {2}, 2},           {Symbol::IW, "IW", 0.5, {3}, 3},
        {Symbol::VW, "VW", 0.0, {2, 4}, 4},      {Symbol::WV, "WV", 0.0, {2, 4}, 4},
        {Symbol::WW, "WW", -0.5, {1, 3, 5}, 5},
    };
    return cat;
}

const SymbolInfo& symbol_info(Symbol s) { return symbol_catalog()[static_cast<int>(s)]; }

std::optional<Symbol> symbol_from_name(const std::string& name) {
    for (const auto& e : symbol_catalog())
        if (name == e.name) return e.symbol;
    return std::nullopt;
}

const SpectralField& SymbolSlice::get(Symbol s) const {
    switch (s) {
        case Symbol::I: return I;
        case Symbol::V: return V;
        case Symbol::Y: return Y;
        case Symbol::IW: return IW;
        case Symbol::VW: return VW;
        case Symbol::WV: return WV;
        case Symbol::WW: return WW;
    }
    throw std::invalid_argument("SymbolSlice::get");
}

NoiseSource stream_source(const TorusGrid& g, int n, std::uint64_t seed) {
    auto ns = std::make_shared<NoiseStream>(g, n, seed);
    return [ns](int, CVec& z) { ns->next(z); };
}

NoiseSource realization_source(const NoiseRealization& r) {
    return [&r](int j, CVec& z) {
        const double q = 1.0 / std::sqrt(r.time.dt(j));
        z.resize(r.dW[j].size());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = r.dW[j][i] * q;
    };
}

NoiseSource aggregated_source(std::shared_ptr<const StepKernel> fine, const StepKernel& coarse, int factor,
                              NoiseSource fine_src) {
    if (factor < 1 || fine->time().steps() != factor * coarse.time().steps())
        throw std::invalid_argument("aggregated_source: fine grid must refine the coarse grid by the factor");
    const StepKernel* cp = &coarse;
    return [fine, cp, factor, fine_src](int j, CVec& z) {
        const std::size_t S = cp->grid().spec_size();
        CVec acc(S, cplx(0.0, 0.0)), zf(S);
        for (int q = 0; q < factor; ++q) {
            const int jf = j * factor + q;
            fine_src(jf, zf);
            for (std::size_t i = 0; i < S; ++i) {
                const int c = fine->class_of(i);
                acc[i] = fine->prop(jf, c) * acc[i] + fine->sd(jf, c) * zf[i];
            }
        }
        z.resize(S);
        for (std::size_t i = 0; i < S; ++i) {
            const double sd = cp->sd(j, cp->class_of(i));
            z[i] = sd > 0.0 ? acc[i] / sd : cplx(0.0, 0.0);
        }
    };
}

SymbolStepper::SymbolStepper(const StepKernel& k, const DyadicPartition& p, SymbolParams params, NoiseSource src)
    : k_(k), p_(p), prm_(std::move(params)), src_(std::move(src)), s_(k.grid()) {
    if (k.grid() != p.grid()) throw std::invalid_argument("SymbolStepper: grid mismatch");
    const std::size_t nt = static_cast<std::size_t>(k.time().steps()) + 1;
    if (prm_.c_unit.size() < nt || prm_.ctilde_unit.size() < nt)
        throw std::invalid_argument("SymbolStepper: renormalisation paths shorter than the time grid");
    pad_ = prm_.pad > 0 ? prm_.pad : default_pad(k.grid());
    z_.assign(k.grid().spec_size(), cplx(0.0, 0.0));
    refresh();
}

const Blocked& SymbolStepper::blocked(Symbol s) const {
    switch (s) {
        case Symbol::I: return *bI_;
        case Symbol::V: return *bV_;
        case Symbol::Y: return *bY_;
        case Symbol::IW: return *bIW_;
        default: throw std::invalid_argument("SymbolStepper::blocked: only I, V, Y, IW are cached");
    }
}

void SymbolStepper::refresh() {
    const TorusGrid& g = k_.grid();
    const double sig2 = prm_.sigma * prm_.sigma;
    s_.t = k_.time().t(j_);
    s_.c = sig2 * prm_.c_unit[j_];
    s_.ctilde = sig2 * sig2 * prm_.ctilde_unit[j_];

    Padded pi = to_padded(s_.I, pad_);
    Padded pv{pi.shape, RVec(pi.v.size())};
    Padded pw{pi.shape, RVec(pi.v.size())};
    for (std::size_t i = 0; i < pi.v.size(); ++i) {
        const double x = pi.v[i];
        pv.v[i] = x * x - s_.c;
        pw.v[i] = x * (x * x - 3.0 * s_.c);
    }
    s_.V = from_padded(pv, g);
    s_.W = from_padded(pw, g);

    bI_ = std::make_unique<Blocked>(s_.I, p_, pad_);
    bV_ = std::make_unique<Blocked>(s_.V, p_, pad_);
    bY_ = std::make_unique<Blocked>(s_.Y, p_, pad_);
    bIW_ = std::make_unique<Blocked>(s_.IW, p_, pad_);

    s_.VW = resonant(*bIW_, *bI_);
    s_.WV = resonant(*bY_, *bV_);
    s_.WV.coeffs[0] -= 2.0 * s_.ctilde;
    s_.WW = resonant(*bIW_, *bV_);
    s_.WW.axpy(-6.0 * s_.ctilde, s_.I);

    if (!done()) src_(j_, z_);
}

void SymbolStepper::advance() {
    if (done()) throw std::logic_error("SymbolStepper::advance past the end of the grid");
    const int j = j_;
    k_.lawson(j, s_.J.coeffs, s_.WW.coeffs);
    k_.lawson(j, s_.IW.coeffs, s_.W.coeffs);
    k_.lawson(j, s_.Y.coeffs, s_.V.coeffs);
    k_.propagate(j, s_.I.coeffs);
    k_.inject(j, s_.I.coeffs, z_, prm_.sigma);
    ++j_;
    refresh();
}

std::vector<double> SymbolEnsemble::c() const {
    std::vector<double> out;
    for (const auto& s : slices) out.push_back(s.c);
    return out;
}

std::vector<double> SymbolEnsemble::ctilde() const {
    std::vector<double> out;
    for (const auto& s : slices) out.push_back(s.ctilde);
    return out;
}

std::vector<SpectralField> SymbolEnsemble::path(Symbol s) const {
    std::vector<SpectralField> out;
    out.reserve(slices.size());
    for (const auto& sl : slices) out.push_back(sl.get(s));
    return out;
}

std::vector<double> renorm_c_path(const CoefficientSet& c, const TorusGrid& g, int n, const TimeGrid& tg) {
    std::vector<double> out(tg.steps() + 1);
    for (int j = 0; j <= tg.steps(); ++j) out[j] = renorm_c_grid(c, g, n, tg.t(j), 1.0);
    return out;
}

namespace {

SymbolEnsemble run_ensemble(const StepKernel& k, const DyadicPartition& p, const SymbolParams& prm,
                            NoiseSource src, std::uint64_t seed) {
    SymbolEnsemble e{k.grid(), k.time(), prm.n, prm.sigma, seed, {}};
    SymbolStepper st(k, p, prm, std::move(src));
    e.slices.reserve(k.time().steps() + 1);
    while (true) {
        e.slices.push_back(st.slice());
        if (st.done()) break;
        st.advance();
    }
    return e;
}

}  // namespace

SymbolEnsemble build_symbols(const NoiseRealization& noise, const CoefficientSet& c, const DyadicPartition& p,
                             const std::vector<double>& ctilde_unit, int pad) {
    StepKernel k(noise.grid, c, noise.time);
    SymbolParams prm;
    prm.n = noise.n;
    prm.sigma = noise.sigma;
    prm.pad = pad;
    prm.c_unit = renorm_c_path(c, noise.grid, noise.n, noise.time);
    prm.ctilde_unit = ctilde_unit;
    return run_ensemble(k, p, prm, realization_source(noise), noise.seed);
}

SymbolEnsemble build_symbols(const StepKernel& k, const DyadicPartition& p, const SymbolParams& prm,
                             std::uint64_t seed) {
    return run_ensemble(k, p, prm, stream_source(k.grid(), prm.n, seed), seed);
}

std::vector<double> default_sigma_list(int n_tau) {
    static const std::vector<double> base = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
    if (n_tau < 0 || n_tau + 1 > static_cast<int>(base.size()))
        throw std::invalid_argument("default_sigma_list: order out of range");
    return {base.begin(), base.begin() + n_tau + 1};
}

double max_abs(const std::vector<SpectralField>& path) {
    double m = 0.0;
    for (const auto& f : path)
        for (const auto& c : f.coeffs) m = std::max(m, std::abs(c));
    return m;
}

std::vector<SpectralField> ChaosDecomposition::component(int l, double sigma) const {
    std::vector<SpectralField> out = tilde.at(l);
    const double s = std::pow(sigma, l);
    for (auto& f : out) f *= s;
    return out;
}

double ChaosDecomposition::mass(int l, double sigma) const { return std::pow(sigma, l) * max_abs(tilde.at(l)); }

ChaosDecomposition chaos_decompose(const std::function<std::vector<SpectralField>(double)>& builder,
                                   const std::vector<double>& sigmas, int n_tau, double max_condition) {
    const int L = n_tau + 1;
    if (static_cast<int>(sigmas.size()) != L)
        throw std::invalid_argument("chaos_decompose: need n_tau + 1 amplitudes");
    for (std::size_t a = 0; a < sigmas.size(); ++a) {
        if (!(sigmas[a] > 0.0)) throw std::invalid_argument("chaos_decompose: amplitudes must be positive");
        for (std::size_t b = 0; b < a; ++b)
            if (sigmas[a] == sigmas[b]) throw std::invalid_argument("chaos_decompose: amplitudes must be distinct");
    }
    Eigen::MatrixXd V(L, L);
    for (int i = 0; i < L; ++i)
        for (int l = 0; l < L; ++l) V(i, l) = std::pow(sigmas[i], l);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(V);
    const auto& sv = svd.singularValues();
    ChaosDecomposition out;
    out.sigmas = sigmas;
    out.condition = sv(0) / sv(L - 1);
    if (!(out.condition <= max_condition))
        throw std::invalid_argument("chaos_decompose: amplitude list is ill-conditioned");
    Eigen::MatrixXd Vinv = V.colPivHouseholderQr().inverse();

    std::vector<std::vector<SpectralField>> paths;
    for (double s : sigmas) paths.push_back(builder(s));
    const std::size_t nt = paths[0].size();
    for (const auto& p : paths)
        if (p.size() != nt) throw std::invalid_argument("chaos_decompose: paths differ in length");
    out.tilde.assign(L, std::vector<SpectralField>(nt, SpectralField(paths[0][0].grid)));
    for (std::size_t j = 0; j < nt; ++j) {
        const std::size_t sz = paths[0][j].coeffs.size();
        for (int l = 0; l < L; ++l) {
            auto& dst = out.tilde[l][j].coeffs;
            for (std::size_t i = 0; i < sz; ++i) {
                cplx acc(0.0, 0.0);
                for (int q = 0; q < L; ++q) acc += Vinv(l, q) * paths[q][j].coeffs[i];
                dst[i] = acc;
            }
        }
    }
    return out;
}

}  // namespace phi4
