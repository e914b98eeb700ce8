#include "phi4/solvers.hpp"

#include <algorithm>
#include <cmath>

namespace phi4 {

const char* scheme_name(StepScheme s) { return s == StepScheme::lawson ? "lawson" : "etd1"; }

namespace {

double coeff_l1(const SpectralField& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.coeffs.size(); ++i) s += f.grid.multiplicity(i) * std::abs(f.coeffs[i]);
    return s;
}

void check_finite(const SpectralField& f, double ceiling, double t, const char* who) {
    double s = coeff_l1(f);
    if (!std::isfinite(s) || s > ceiling)
        throw BlowUp(std::string(who) + ": solution exceeded the ceiling at t = " + std::to_string(t), t);
}

SpectralField finish(const TorusGrid& g, const Shape& s, RVec& acc) {
    return from_padded(Padded{s, std::move(acc)}, g);
}

void add_mean(SpectralField& f, double v) { f.coeffs[0] += v; }

RVec padded(const SpectralField& f, int M) { return to_padded(f, M).v; }

}  // namespace

SolutionPath solve_deterministic(const TimePoly& b2, const TimePoly& b1, const TimePoly& b0, const RealField& phi0,
                                 const TimeGrid& tg, double ceiling) {
    CoefficientSet heat(TimePoly::constant(0.0), TimePoly::constant(0.0), tg.T(), false);
    const TorusGrid& g = phi0.grid;
    StepKernel k(g, heat, tg);
    const int M = default_pad(g);
    SolutionPath out{g, tg, {}, 0, 0, StepScheme::lawson};
    out.states.push_back(dft_forward(phi0));
    for (int j = 0; j < tg.steps(); ++j) {
        const double t = tg.t(j);
        const double B2 = b2(t), B1 = b1(t), B0 = b0(t);
        Padded p = to_padded(out.states.back(), M);
        for (double& x : p.v) x = ((-x + B2) * x + B1) * x + B0;
        SpectralField F = from_padded(p, g);
        SpectralField next = out.states.back();
        k.lawson(j, next.coeffs, F.coeffs);
        check_finite(next, ceiling, tg.t(j + 1), "solve_deterministic");
        out.states.push_back(std::move(next));
    }
    return out;
}

DirectSolver::DirectSolver(const StepKernel& k, const CoefficientSet& c, RenormOptions opt)
    : k_(k), c_(c), opt_(opt), pad_(opt.pad > 0 ? opt.pad : default_pad(k.grid())), psi_(k.grid()) {}

SpectralField DirectSolver::nonlinearity(const SpectralField& psi, double t, double c_n, double ct_n) const {
    const double f2 = c_.f2()(t);
    const double lin = opt_.counterterms ? 3.0 * c_n - 18.0 * ct_n : 0.0;
    const double cst = opt_.counterterms ? -f2 * c_n : 0.0;
    const bool cubic = opt_.cubic;
    Padded p = to_padded(psi, pad_);
    for (double& x : p.v) {
        double r = lin * x + cst;
        if (cubic) r += (-x + f2) * x * x;
        x = r;
    }
    return from_padded(p, psi.grid);
}

void DirectSolver::step(int j, double c_n, double ct_n, const CVec& z, double sigma) {
    const double t = k_.time().t(j);
    SpectralField N = nonlinearity(psi_, t, c_n, ct_n);
    if (opt_.scheme == StepScheme::lawson)
        k_.lawson(j, psi_.coeffs, N.coeffs);
    else
        k_.etd1(j, psi_.coeffs, N.coeffs);
    k_.inject(j, psi_.coeffs, z, sigma);
    check_finite(psi_, opt_.ceiling, k_.time().t(j + 1), "solve_renormalized");
}

namespace {

SolutionPath run_direct(const CoefficientSet& c, const TorusGrid& g, int n, const TimeGrid& tg, double sigma,
                        std::uint64_t seed, NoiseSource src, const std::vector<double>& c_unit,
                        const std::vector<double>& ctilde_unit, RenormOptions opt) {
    const std::size_t nt = static_cast<std::size_t>(tg.steps()) + 1;
    if (c_unit.size() < nt || ctilde_unit.size() < nt)
        throw std::invalid_argument("solve_renormalized: renormalisation paths shorter than the grid");
    StepKernel k(g, c, tg);
    DirectSolver ds(k, c, opt);
    SolutionPath out{g, tg, {}, n, seed, opt.scheme};
    out.states.push_back(ds.state());
    CVec z(g.spec_size());
    const double s2 = sigma * sigma;
    for (int j = 0; j < tg.steps(); ++j) {
        src(j, z);
        ds.step(j, s2 * c_unit[j], s2 * s2 * ctilde_unit[j], z, sigma);
        out.states.push_back(ds.state());
    }
    return out;
}

}  // namespace

SolutionPath solve_renormalized(const CoefficientSet& c, const TorusGrid& g, int n, const TimeGrid& tg, double sigma,
                                std::uint64_t seed, const std::vector<double>& c_unit,
                                const std::vector<double>& ctilde_unit, RenormOptions opt) {
    return run_direct(c, g, n, tg, sigma, seed, stream_source(g, n, seed), c_unit, ctilde_unit, opt);
}

SolutionPath solve_renormalized(const CoefficientSet& c, const NoiseRealization& noise,
                                const std::vector<double>& ctilde_unit, RenormOptions opt) {
    return run_direct(c, noise.grid, noise.n, noise.time, noise.sigma, noise.seed, realization_source(noise),
                      renorm_c_path(c, noise.grid, noise.n, noise.time), ctilde_unit, opt);
}

VWContext::VWContext(const SymbolStepper& st, double f2, Options opt)
    : s_(st.slice()), p_(st.partition()), pad_(st.pad()), f2_(f2), opt_(opt),
      bI_(&st.blocked(Symbol::I)), bV_(&st.blocked(Symbol::V)), bY_(&st.blocked(Symbol::Y)),
      bIW_(&st.blocked(Symbol::IW)), oneY_(s_.I.grid), d0_(s_.I.grid), d1_(s_.I.grid), d2_(s_.I.grid) {
    init();
}

VWContext::VWContext(const SymbolSlice& s, const DyadicPartition& p, int pad, double f2, Options opt)
    : s_(s), p_(p), pad_(pad > 0 ? pad : default_pad(s.I.grid)), f2_(f2), opt_(opt), oneY_(s.I.grid),
      d0_(s.I.grid), d1_(s.I.grid), d2_(s.I.grid) {
    own_[0] = std::make_unique<Blocked>(s.I, p, pad_);
    own_[1] = std::make_unique<Blocked>(s.V, p, pad_);
    own_[2] = std::make_unique<Blocked>(s.Y, p, pad_);
    own_[3] = std::make_unique<Blocked>(s.IW, p, pad_);
    bI_ = own_[0].get();
    bV_ = own_[1].get();
    bY_ = own_[2].get();
    bIW_ = own_[3].get();
    init();
}

void VWContext::init() {
    const TorusGrid& g = s_.I.grid;
    const Shape sh = bI_->shape();
    const std::size_t n = sh.real_size();

    // 1 < Y keeps the blocks of Y with k >= 1
    {
        SpectralField one(g);
        one.coeffs[0] = 1.0;
        oneY_ = para_lt(Blocked(one, p_, pad_), *bY_);
        boneY_ = std::make_unique<Blocked>(oneY_, p_, pad_);
    }

    d2_ = -3.0 * s_.I;
    d2_.axpy(3.0, s_.IW);
    add_mean(d2_, f2_);

    RVec pI = padded(s_.I, pad_), pIW = padded(s_.IW, pad_), pWV = padded(s_.WV, pad_), pVW = padded(s_.VW, pad_);

    // d1 = 6[IW (!=) I + VW] - 3 IW^2 + 9 WV - 2 f2 IW + 2 f2 I
    {
        RVec acc(n, 0.0);
        add_product(6.0, *bIW_, *bI_, acc);
        add_resonant(-6.0, *bIW_, *bI_, acc);
        for (std::size_t i = 0; i < n; ++i)
            acc[i] += 6.0 * pVW[i] - 3.0 * pIW[i] * pIW[i] + 9.0 * pWV[i] - 2.0 * f2_ * pIW[i] + 2.0 * f2_ * pI[i];
        d1_ = finish(g, sh, acc);
    }

    // d0 = IW^3 - 9 IW WV + f2 IW^2 - 2 f2 [VW + I (!=) IW]
    //      - 3 [I (!=) Q + I o (IW o IW) + 2 IW VW + 2 [<,o](IW, IW, I)],  Q = IW^2
    {
        SpectralField Q(g);
        {
            RVec a(n, 0.0);
            add_product(1.0, *bIW_, *bIW_, a);
            Q = finish(g, sh, a);
        }
        SpectralField IWoIW(g), IWltIW(g);
        {
            RVec a(n, 0.0);
            add_resonant(1.0, *bIW_, *bIW_, a);
            IWoIW = finish(g, sh, a);
            RVec b(n, 0.0);
            add_para_lt(1.0, *bIW_, *bIW_, b);
            IWltIW = finish(g, sh, b);
        }
        Blocked bQ(Q, p_, pad_), bIWoIW(IWoIW, p_, pad_), bIWltIW(IWltIW, p_, pad_);
        RVec pQ = padded(Q, pad_);
        RVec acc(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double iw = pIW[i], x = pI[i];
            acc[i] = iw * iw * iw - 9.0 * iw * pWV[i] + f2_ * iw * iw - 2.0 * f2_ * (pVW[i] + x * iw) -
                     3.0 * (x * pQ[i] + 2.0 * iw * pVW[i]);
        }
        add_resonant(2.0 * f2_, *bI_, *bIW_, acc);   // -2 f2 * (-(I o IW))
        add_resonant(3.0, *bI_, bQ, acc);            // -3 * (-(I o Q))
        add_resonant(-3.0, *bI_, bIWoIW, acc);       // -3 I o (IW o IW)
        // -3 * 2 [<,o](IW, IW, I) = -6 (IW < IW) o I + 6 IW VW
        add_resonant(-6.0, bIWltIW, *bI_, acc);
        for (std::size_t i = 0; i < n; ++i) acc[i] += 6.0 * pIW[i] * pVW[i];
        d0_ = finish(g, sh, acc);
    }
}

SpectralField F_rhs(const SpectralField& v, const SpectralField& w, const VWContext& ctx) {
    const SymbolSlice& s = ctx.slice();
    SpectralField Yp = v + w - s.IW;
    Blocked bYp(Yp, ctx.partition(), ctx.pad());
    RVec acc(bYp.shape().real_size(), 0.0);
    add_para_lt(-3.0, bYp, ctx.bV(), acc);
    SpectralField F = finish(v.grid, bYp.shape(), acc);
    F.axpy(ctx.f2(), s.V);
    return F;
}

SpectralField com1(const SpectralField& v, const SpectralField& w, const VWContext& ctx) {
    const SymbolSlice& s = ctx.slice();
    SpectralField Yp = v + w - s.IW;
    SpectralField out = v;
    out.axpy(3.0, para_lt(Blocked(Yp, ctx.partition(), ctx.pad()), ctx.bY()));
    out.axpy(-ctx.f2(), ctx.one_lt_Y());
    return out;
}

SpectralField com2(const SpectralField& v, const SpectralField& w, const VWContext& ctx) {
    const SymbolSlice& s = ctx.slice();
    const DyadicPartition& p = ctx.partition();
    SpectralField Yp = v + w - s.IW;
    SpectralField LY = para_lt(Blocked(Yp, p, ctx.pad()), ctx.bY());
    Blocked bLY(LY, p, ctx.pad());
    RVec acc(bLY.shape().real_size(), 0.0);
    add_resonant(-3.0, bLY, ctx.bV(), acc);
    RVec pY = padded(Yp, ctx.pad()), pWV = padded(s.WV, ctx.pad());
    const double two_ct = 2.0 * s.ctilde;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += 3.0 * pY[i] * (pWV[i] + two_ct);
    return finish(v.grid, bLY.shape(), acc);
}

SpectralField G_rhs(const SpectralField& v, const SpectralField& w, const VWContext& ctx) {
    const SymbolSlice& s = ctx.slice();
    const DyadicPartition& p = ctx.partition();
    const int M = ctx.pad();
    const double f2 = ctx.f2(), ct = s.ctilde;
    SpectralField X = v + w;
    SpectralField Yp = X - s.IW;
    Blocked bYp(Yp, p, M), bw(w, p, M);
    SpectralField LY = para_lt(bYp, ctx.bY());
    SpectralField c1 = v;
    c1.axpy(3.0, LY);
    c1.axpy(-f2, ctx.one_lt_Y());
    Blocked bc1(c1, p, M), bLY(LY, p, M);

    RVec acc(bYp.shape().real_size(), 0.0);
    add_resonant(-3.0, bc1, ctx.bV(), acc);   // -3 com1 o V
    add_resonant(9.0, bLY, ctx.bV(), acc);    // -3 com2, resonant part
    add_resonant(-3.0, bw, ctx.bV(), acc);    // -3 w o V
    add_para_lt(-3.0, ctx.bV(), bYp, acc);    // -3 (v + w - IW) > V

    RVec pX = padded(X, M), pWV = padded(s.WV, M), pd0 = padded(ctx.d0(), M), pd1 = padded(ctx.d1(), M),
         pd2 = padded(ctx.d2(), M), pIW = padded(s.IW, M);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const double x = pX[i];
        const double yp = x - pIW[i];
        acc[i] += -x * x * x + (pd2[i] * x + pd1[i]) * x + pd0[i] - 9.0 * yp * (pWV[i] + 2.0 * ct);
    }
    if (ctx.options().closure) {
        RVec pJ = padded(s.J, M), pV = padded(s.V, M);
        for (std::size_t i = 0; i < acc.size(); ++i) {
            const double x = pX[i], j = pJ[i];
            acc[i] += -9.0 * x * x * j - 27.0 * x * j * j - 27.0 * j * j * j + pd2[i] * (6.0 * x * j + 9.0 * j * j) +
                      3.0 * (pd1[i] - 9.0 * pWV[i]) * j - 9.0 * j * (pV[i] + 6.0 * ct);
        }
        add_resonant(-3.0 * f2, ctx.b_one_lt_Y(), ctx.bV(), acc);
    }
    return finish(v.grid, bYp.shape(), acc);
}

VWSolver::VWSolver(const StepKernel& k, VWOptions opt) : k_(k), opt_(opt), v_(k.grid()), w_(k.grid()) {}

std::pair<SpectralField, SpectralField> VWSolver::step(int j, const VWContext& ctx) {
    SpectralField F = F_rhs(v_, w_, ctx);
    SpectralField G = G_rhs(v_, w_, ctx);
    if (opt_.scheme == StepScheme::lawson) {
        k_.lawson(j, v_.coeffs, F.coeffs);
        k_.lawson(j, w_.coeffs, G.coeffs);
    } else {
        k_.etd1(j, v_.coeffs, F.coeffs);
        k_.etd1(j, w_.coeffs, G.coeffs);
    }
    const double t1 = k_.time().t(j + 1);
    check_finite(v_, opt_.ceiling, t1, "solve_vw");
    check_finite(w_, opt_.ceiling, t1, "solve_vw");
    return {std::move(F), std::move(G)};
}

VWPaths solve_vw(SymbolStepper& st, const CoefficientSet& c, VWOptions opt, const VWObserver& obs, bool store) {
    VWSolver sol(st.kernel(), opt);
    VWPaths out;
    while (true) {
        const int j = st.index();
        VWContext ctx(st, c.f2()(st.slice().t), opt.context);
        if (obs) obs(j, st, ctx, sol.v(), sol.w());
        if (store) {
            out.v.push_back(sol.v());
            out.w.push_back(sol.w());
        }
        if (st.done()) break;
        sol.step(j, ctx);
        st.advance();
    }
    return out;
}

SpectralField reconstruct_phi(const SpectralField& v, const SpectralField& w, const SymbolSlice& s, double phibar) {
    SpectralField phi = s.I - s.IW;
    phi.axpy(3.0, s.J);
    phi += v;
    phi += w;
    add_mean(phi, phibar);
    return phi;
}

SolutionPath reconstruct_phi(const VWPaths& vw, const SymbolEnsemble& e, const std::function<double(double)>& phibar) {
    if (vw.v.size() != e.slices.size() || vw.w.size() != e.slices.size())
        throw std::invalid_argument("reconstruct_phi: path lengths differ");
    SolutionPath out{e.grid, e.time, {}, e.n, e.seed, StepScheme::etd1};
    for (std::size_t j = 0; j < e.slices.size(); ++j)
        out.states.push_back(reconstruct_phi(vw.v[j], vw.w[j], e.slices[j], phibar(e.slices[j].t)));
    return out;
}

EquivalenceReport run_equivalence(const EquivalenceConfig& cfg, const CoefficientSet& c,
                                  const std::function<double(double)>& phibar, const std::vector<double>& ctilde_unit) {
    TorusGrid g(cfg.dim, cfg.N);
    TimeGrid tg(cfg.T, cfg.steps);
    DyadicPartition part(g);
    StepKernel k(g, c, tg);
    SymbolParams prm;
    prm.n = cfg.n;
    prm.sigma = cfg.sigma;
    prm.pad = cfg.pad;
    prm.c_unit = renorm_c_path(c, g, cfg.n, tg);
    prm.ctilde_unit = ctilde_unit;
    NoiseSource src = stream_source(g, cfg.n, stream_seed(cfg.seed, 0, StreamRole::noise));
    if (cfg.noise_refine > 1) {
        auto fine = std::make_shared<const StepKernel>(g, c, TimeGrid(cfg.T, cfg.steps * cfg.noise_refine));
        src = aggregated_source(fine, k, cfg.noise_refine, src);
    }
    SymbolStepper st(k, part, prm, src);

    RenormOptions ropt;
    ropt.scheme = cfg.direct_scheme;
    ropt.pad = cfg.pad;
    DirectSolver ds(k, c, ropt);
    VWOptions vopt;
    vopt.scheme = cfg.vw_scheme;
    vopt.context.closure = cfg.closure;
    VWSolver vs(k, vopt);

    EquivalenceReport rep;
    double max_diff = 0.0;
    while (true) {
        const int j = st.index();
        const SymbolSlice& s = st.slice();
        const double pb = phibar(s.t);
        RealField psi_d = dft_inverse(ds.state());
        RealField phi_r = dft_inverse(reconstruct_phi(vs.v(), vs.w(), s, pb));
        double dmax = 0.0, pmax = 0.0, smax = 0.0;
        for (std::size_t i = 0; i < psi_d.values.size(); ++i) {
            const double phid = pb + psi_d.values[i];
            dmax = std::max(dmax, std::fabs(phid - phi_r.values[i]));
            pmax = std::max(pmax, std::fabs(phid));
            smax = std::max(smax, std::fabs(psi_d.values[i]));
        }
        max_diff = std::max(max_diff, dmax);
        rep.max_phi = std::max(rep.max_phi, pmax);
        rep.max_psi = std::max(rep.max_psi, smax);
        rep.max_v = std::max(rep.max_v, sup_norm(dft_inverse(vs.v())));
        rep.max_w = std::max(rep.max_w, sup_norm(dft_inverse(vs.w())));
        if (st.done()) break;
        VWContext ctx(st, c.f2()(s.t), vopt.context);
        vs.step(j, ctx);
        ds.step(j, s.c, s.ctilde, st.z(), cfg.sigma);
        st.advance();
    }
    rep.gap = rep.max_phi > 0.0 ? max_diff / rep.max_phi : 0.0;
    rep.gap_psi = rep.max_psi > 0.0 ? max_diff / rep.max_psi : 0.0;
    return rep;
}

Com1Diagnostic com1_representation_check(const SymbolEnsemble& e, const VWPaths& vw, const CoefficientSet& c,
                                         const DyadicPartition& p, int pad) {
    const int M = static_cast<int>(e.slices.size()) - 1;
    if (M < 1 || static_cast<int>(vw.v.size()) != M + 1) throw std::invalid_argument("com1_representation_check");
    const TorusGrid& g = e.grid;
    const int P = pad > 0 ? pad : default_pad(g);
    const double t = e.slices[M].t;
    auto bracket = [&](int j) {
        SpectralField b = 3.0 * (vw.v[j] + vw.w[j] - e.slices[j].IW);
        b.coeffs[0] -= c.f2()(e.slices[j].t);
        return b;
    };
    SpectralField BM = bracket(M);
    SpectralField one(g);
    one.coeffs[0] = 1.0;
    Blocked bone(one, p, P);
    SpectralField A(g), B(g), C(g);
    for (int j = 0; j < M; ++j) {
        const double s = e.slices[j].t, h = e.slices[j + 1].t - s;
        const double ea = std::exp(c.alpha(t, s));
        const SpectralField& V = e.slices[j].V;
        SpectralField Bj = bracket(j);
        A.axpy(-h * ea, heat_commutator(Bj, V, t - s, p));
        SpectralField HV = heat_flow(V, t - s);
        B.axpy(-h * ea, para_lt(Bj - BM, HV, p));
        SpectralField geq = V - para_lt(bone, Blocked(V, p, P));
        C.axpy(h * ea * c.f2()(s), heat_flow(geq, t - s));
    }
    SpectralField direct = vw.v[M] + para_lt(BM, e.slices[M].Y, p);
    SpectralField rep = A + B + C;
    Com1Diagnostic d;
    d.direct_norm = sup_norm(dft_inverse(direct));
    double diff = sup_norm(dft_inverse(rep - direct));
    d.gap = d.direct_norm > 0.0 ? diff / d.direct_norm : diff;
    return d;
}

void BoundTracker::observe(const VWContext& ctx, const SpectralField& v, const SpectralField& w) {
    const DyadicPartition& p = ctx.partition();
    const SymbolSlice& s = ctx.slice();
    const double e = d_.eps;
    const double nv = besov_norm(v, 1.0 - 2.0 * e, p);
    const double nw = besov_norm(w, 1.5 - 2.0 * e, p);
    const double nIW = besov_norm(s.IW, 0.5 - e, p);
    const double nV = besov_norm(s.V, -1.0 - e, p);
    const double nY = besov_norm(s.Y, 1.0 - e, p);
    SpectralField F = F_rhs(v, w, ctx);
    SpectralField G = G_rhs(v, w, ctx);
    const double nF = besov_norm(F, -1.0 - e, p);
    const double nG = besov_norm(G, -0.5 - e, p);
    const double nc1 = besov_norm(com1(v, w, ctx), 1.0 + 2.0 * e, p);
    const double nd0 = besov_norm(ctx.d0(), -0.5 - e, p);
    const double nd1 = besov_norm(ctx.d1(), -0.5 - e, p);
    const double nd2 = besov_norm(ctx.d2(), -0.5 - e, p);
    const double f2 = std::fabs(ctx.f2());

    const double bF = (nv + nw + nIW + f2) * nV;
    if (bF > 0.0) d_.F_ratio = std::max(d_.F_ratio, nF / bF);
    const double bG = nv * nv * nv + nw * nw * nw + nw * nV + (nIW + nv + nw) * nV + nd0 + nd1 * (nv + nw) +
                      nd2 * (nv * nv + nw * nw) + nc1 * nV + (nv + nw + nIW) * nY * nV;
    if (bG > 0.0) d_.G_ratio = std::max(d_.G_ratio, nG / bG);
    supF_ = std::max(supF_, nF);
    supG_ = std::max(supG_, nG);
    supv_ = std::max(supv_, nv);
    supw_ = std::max(supw_, nw);
    if (supF_ > 0.0) d_.v_ratio = supv_ / supF_;
    if (supG_ > 0.0) d_.w_ratio = supw_ / supG_;
}

}  // namespace phi4
