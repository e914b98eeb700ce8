#include "phi4/paracalc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace phi4 {

namespace {

double h_fn(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }

bool all_zero(const CVec& v) {
    for (const auto& c : v)
        if (c.real() != 0.0 || c.imag() != 0.0) return false;
    return true;
}

SpectralField masked(const SpectralField& f, const std::vector<double>& w) {
    SpectralField out(f.grid);
    for (std::size_t i = 0; i < w.size(); ++i) out.coeffs[i] = f.coeffs[i] * w[i];
    return out;
}

void check_same(const Blocked& f, const Blocked& g) {
    if (!(f.shape() == g.shape()) || f.grid() != g.grid() || f.count() != g.count())
        throw std::invalid_argument("paraproduct: block layouts differ");
}

void check_acc(const Blocked& f, RVec& acc) {
    if (acc.size() != f.shape().real_size()) acc.assign(f.shape().real_size(), 0.0);
}

}  // namespace

double smooth_cutoff(double r, double inner, double outer) {
    if (r <= inner) return 1.0;
    if (r >= outer) return 0.0;
    double a = h_fn(outer - r), b = h_fn(r - inner);
    return a / (a + b);
}

DyadicPartition::DyadicPartition(const TorusGrid& g, PartitionSpec spec) : grid_(g), spec_(spec) {
    K_ = static_cast<int>(std::ceil(std::log2(std::sqrt(static_cast<double>(g.dim())) * g.N() / 2.0))) + 1;
    w_.assign(K_ + 2, std::vector<double>(g.spec_size(), 0.0));
    std::map<int, std::vector<double>> by_norm;
    for (std::size_t i = 0; i < g.spec_size(); ++i) {
        int n2 = g.norm2(i);
        auto it = by_norm.find(n2);
        if (it == by_norm.end()) {
            std::vector<double> ws(K_ + 2);
            double r = std::sqrt(static_cast<double>(n2));
            for (int k = -1; k <= K_; ++k) ws[k + 1] = chi_k(k, r);
            it = by_norm.emplace(n2, std::move(ws)).first;
        }
        for (int k = 0; k < K_ + 2; ++k) w_[k][i] = it->second[k];
    }
}

double DyadicPartition::chi_tilde(double r) const { return smooth_cutoff(r, spec_.inner, spec_.tilde_outer); }

double DyadicPartition::chi(double r) const {
    return smooth_cutoff(r / 2.0, spec_.inner, spec_.outer) - smooth_cutoff(r, spec_.inner, spec_.outer);
}

double DyadicPartition::chi_k(int k, double r) const {
    if (k < 0) return chi_tilde(r);
    return chi(std::ldexp(r, -k));
}

PartitionReport check_partition(const DyadicPartition& p) {
    PartitionReport rep;
    const TorusGrid& g = p.grid();
    std::map<int, std::vector<double>> seen;
    for (std::size_t i = 0; i < g.spec_size(); ++i) {
        double s = 0.0;
        std::vector<double> ws;
        for (int k = -1; k <= p.max_block(); ++k) {
            double w = p.weights(k)[i];
            if (w < 0.0 || w > 1.0) rep.values_in_unit_interval = false;
            s += w;
            ws.push_back(w);
        }
        rep.max_sum_error = std::max(rep.max_sum_error, std::fabs(s - 1.0));
        auto [it, fresh] = seen.emplace(g.norm2(i), ws);
        if (!fresh && it->second != ws) rep.radial = false;
    }
    // support of the k = -1 cutoff inside B(0, 4/3), of chi inside the annulus [3/4, 8/3]
    const int samples = 20000;
    for (int j = 0; j <= samples; ++j) {
        double r = 4.0 * j / samples;
        double ct = p.chi_tilde(r), c = p.chi(r);
        if (r >= 4.0 / 3.0 && ct > 0.0) rep.max_support_violation = std::max(rep.max_support_violation, ct);
        if ((r <= 0.75 || r >= 8.0 / 3.0) && c > 0.0)
            rep.max_support_violation = std::max(rep.max_support_violation, c);
        if (ct < 0.0 || ct > 1.0 || c < 0.0 || c > 1.0) rep.values_in_unit_interval = false;
    }
    return rep;
}

BlockDecomposition lp_blocks(const SpectralField& f, const DyadicPartition& p) {
    if (f.grid != p.grid()) throw std::invalid_argument("lp_blocks: grid mismatch");
    BlockDecomposition d;
    for (int k = -1; k <= p.max_block(); ++k) d.blocks.push_back(dft_inverse(masked(f, p.weights(k))));
    return d;
}

BlockDecomposition lp_blocks(const RealField& f, const DyadicPartition& p) {
    return lp_blocks(dft_forward(f), p);
}

std::vector<double> block_sups(const SpectralField& f, const DyadicPartition& p) {
    if (f.grid != p.grid()) throw std::invalid_argument("block_sups: grid mismatch");
    std::vector<double> out;
    const Shape& s = f.grid.shape();
    CVec spec(s.spec_size());
    RVec phys(s.real_size());
    for (int k = -1; k <= p.max_block(); ++k) {
        const auto& w = p.weights(k);
        for (std::size_t i = 0; i < w.size(); ++i) spec[i] = f.coeffs[i] * w[i];
        if (all_zero(spec)) {
            out.push_back(0.0);
            continue;
        }
        inverse_raw_destroy(s, spec.data(), phys.data());
        double m = 0.0;
        for (double v : phys) m = std::max(m, std::fabs(v));
        out.push_back(m);
    }
    return out;
}

double besov_from_sups(const std::vector<double>& sups, double alpha) {
    double m = 0.0;
    for (std::size_t i = 0; i < sups.size(); ++i) {
        int k = static_cast<int>(i) - 1;
        m = std::max(m, std::exp2(alpha * k) * sups[i]);
    }
    return m;
}

double besov_norm(const SpectralField& f, double alpha, const DyadicPartition& p) {
    return besov_from_sups(block_sups(f, p), alpha);
}

double besov_norm(const RealField& f, double alpha, const DyadicPartition& p) {
    return besov_norm(dft_forward(f), alpha, p);
}

Blocked::Blocked(const SpectralField& f, const DyadicPartition& p) : Blocked(f, p, default_pad(f.grid)) {}

Blocked::Blocked(const SpectralField& f, const DyadicPartition& p, int M)
    : grid_(f.grid), shape_{f.grid.dim(), M} {
    if (f.grid != p.grid()) throw std::invalid_argument("Blocked: grid mismatch");
    CVec spec(f.grid.spec_size());
    CVec pspec(shape_.spec_size());
    for (int k = -1; k <= p.max_block(); ++k) {
        const auto& w = p.weights(k);
        for (std::size_t i = 0; i < w.size(); ++i) spec[i] = f.coeffs[i] * w[i];
        if (all_zero(spec)) {
            blocks_.emplace_back();
            continue;
        }
        pad_spectrum(f.grid, spec.data(), M, pspec.data());
        RVec phys(shape_.real_size());
        inverse_raw_destroy(shape_, pspec.data(), phys.data());
        blocks_.push_back(std::move(phys));
    }
}

void add_para_lt(double s, const Blocked& f, const Blocked& g, RVec& acc) {
    check_same(f, g);
    check_acc(f, acc);
    const std::size_t n = f.shape().real_size();
    RVec low(n, 0.0);
    bool low_nonzero = false;
    for (int l = 0; l < g.count(); ++l) {
        // S_{l-2} f collects blocks k <= l - 2, i.e. indices <= l - 2 in storage offset
        int kk = l - 2;
        if (kk >= 0 && !f.zero(kk)) {
            const RVec& b = f.block(kk);
            for (std::size_t i = 0; i < n; ++i) low[i] += b[i];
            low_nonzero = true;
        }
        if (!low_nonzero || g.zero(l)) continue;
        const RVec& gb = g.block(l);
        for (std::size_t i = 0; i < n; ++i) acc[i] += s * low[i] * gb[i];
    }
}

void add_resonant(double s, const Blocked& f, const Blocked& g, RVec& acc) {
    check_same(f, g);
    check_acc(f, acc);
    const std::size_t n = f.shape().real_size();
    const int c = f.count();
    RVec near(n);
    for (int k = 0; k < c; ++k) {
        if (f.zero(k)) continue;
        bool any = false;
        std::fill(near.begin(), near.end(), 0.0);
        for (int l = std::max(0, k - 1); l <= std::min(c - 1, k + 1); ++l) {
            if (g.zero(l)) continue;
            const RVec& gb = g.block(l);
            for (std::size_t i = 0; i < n; ++i) near[i] += gb[i];
            any = true;
        }
        if (!any) continue;
        const RVec& fb = f.block(k);
        for (std::size_t i = 0; i < n; ++i) acc[i] += s * fb[i] * near[i];
    }
}

void add_product(double s, const Blocked& f, const Blocked& g, RVec& acc) {
    check_same(f, g);
    check_acc(f, acc);
    const std::size_t n = f.shape().real_size();
    RVec ff(n, 0.0), gg(n, 0.0);
    for (int k = 0; k < f.count(); ++k) {
        if (!f.zero(k))
            for (std::size_t i = 0; i < n; ++i) ff[i] += f.block(k)[i];
        if (!g.zero(k))
            for (std::size_t i = 0; i < n; ++i) gg[i] += g.block(k)[i];
    }
    for (std::size_t i = 0; i < n; ++i) acc[i] += s * ff[i] * gg[i];
}

namespace {

SpectralField finish(const Blocked& f, RVec& acc) {
    if (acc.empty()) return SpectralField(f.grid());
    return from_padded(Padded{f.shape(), std::move(acc)}, f.grid());
}

}  // namespace

SpectralField para_lt(const Blocked& f, const Blocked& g) {
    RVec acc(f.shape().real_size(), 0.0);
    add_para_lt(1.0, f, g, acc);
    return finish(f, acc);
}

SpectralField para_gt(const Blocked& f, const Blocked& g) { return para_lt(g, f); }

SpectralField resonant(const Blocked& f, const Blocked& g) {
    RVec acc(f.shape().real_size(), 0.0);
    add_resonant(1.0, f, g, acc);
    return finish(f, acc);
}

SpectralField para_lt(const SpectralField& f, const SpectralField& g, const DyadicPartition& p) {
    return para_lt(Blocked(f, p), Blocked(g, p));
}

SpectralField para_gt(const SpectralField& f, const SpectralField& g, const DyadicPartition& p) {
    return para_lt(g, f, p);
}

SpectralField resonant(const SpectralField& f, const SpectralField& g, const DyadicPartition& p) {
    return resonant(Blocked(f, p), Blocked(g, p));
}

RealField para_lt(const RealField& f, const RealField& g, const DyadicPartition& p) {
    return dft_inverse(para_lt(dft_forward(f), dft_forward(g), p));
}

RealField para_gt(const RealField& f, const RealField& g, const DyadicPartition& p) {
    return dft_inverse(para_gt(dft_forward(f), dft_forward(g), p));
}

RealField resonant(const RealField& f, const RealField& g, const DyadicPartition& p) {
    return dft_inverse(resonant(dft_forward(f), dft_forward(g), p));
}

SpectralField circled_neq(const SpectralField& f, const SpectralField& g, const DyadicPartition& p) {
    return dealiased_product(f, g) - resonant(f, g, p);
}

SpectralField circled_geq(const SpectralField& f, const SpectralField& g, const DyadicPartition& p) {
    return dealiased_product(f, g) - para_lt(f, g, p);
}

RealField circled_neq(const RealField& f, const RealField& g, const DyadicPartition& p) {
    return dft_inverse(circled_neq(dft_forward(f), dft_forward(g), p));
}

RealField circled_geq(const RealField& f, const RealField& g, const DyadicPartition& p) {
    return dft_inverse(circled_geq(dft_forward(f), dft_forward(g), p));
}

SpectralField commutator_lt_res(const SpectralField& f, const SpectralField& g, const SpectralField& h,
                                const DyadicPartition& p) {
    Blocked gb(g, p), hb(h, p);
    SpectralField flg = para_lt(Blocked(f, p), gb);
    SpectralField left = resonant(Blocked(flg, p), hb);
    SpectralField goh = resonant(gb, hb);
    return left - dealiased_product(f, goh);
}

RealField commutator_lt_res(const RealField& f, const RealField& g, const RealField& h,
                            const DyadicPartition& p) {
    return dft_inverse(commutator_lt_res(dft_forward(f), dft_forward(g), dft_forward(h), p));
}

SpectralField heat_commutator(const SpectralField& f, const SpectralField& g, double t,
                              const DyadicPartition& p) {
    if (t < 0.0) throw std::invalid_argument("heat_commutator: negative time");
    Blocked fb(f, p);
    return heat_flow(para_lt(fb, Blocked(g, p)), t) - para_lt(fb, Blocked(heat_flow(g, t), p));
}

RealField heat_commutator(const RealField& f, const RealField& g, double t, const DyadicPartition& p) {
    return dft_inverse(heat_commutator(dft_forward(f), dft_forward(g), t, p));
}

BernsteinResult bernstein_check(const RealField& f, int k, double p, const DyadicPartition& part) {
    if (!(p >= 1.0)) throw std::invalid_argument("bernstein_check: p must be >= 1");
    if (k < -1 || k > part.max_block()) throw std::out_of_range("bernstein_check: block index");
    SpectralField fs = dft_forward(f);
    RealField b = dft_inverse(masked(fs, part.weights(k)));
    double sup = sup_norm(b);
    if (std::isinf(p)) return {sup, sup == 0.0 ? 0.0 : 1.0};
    double acc = 0.0;
    for (double v : b.values) acc += std::pow(std::fabs(v), p);
    double lp = std::pow(acc / static_cast<double>(b.values.size()), 1.0 / p);
    double denom = std::exp2(f.grid.dim() * k / p) * lp;
    return {sup, denom == 0.0 ? 0.0 : sup / denom};
}

MomentCriterion moment_criterion_check(const std::function<RealField(std::size_t)>& sampler, double alpha,
                                       double beta, double p, std::size_t replicas,
                                       const DyadicPartition& part, std::size_t min_replicas) {
    if (!(beta < alpha)) throw std::invalid_argument("moment_criterion_check: need beta < alpha");
    const int d = part.grid().dim();
    if (!(p > d / (alpha - beta) + 1.0))
        throw std::invalid_argument("moment_criterion_check: need p > d/(alpha-beta) + 1");
    MomentCriterion mc;
    mc.insufficient_replicas = replicas < min_replicas;
    const int nb = part.block_count();
    std::vector<double> block_moment(nb, 0.0);
    double lhs = 0.0;
    for (std::size_t r = 0; r < replicas; ++r) {
        SpectralField fs = dft_forward(sampler(r));
        BlockDecomposition bd = lp_blocks(fs, part);
        double norm = 0.0;
        for (int i = 0; i < nb; ++i) {
            const auto& v = bd.blocks[i].values;
            double sup = 0.0, acc = 0.0;
            for (double x : v) {
                sup = std::max(sup, std::fabs(x));
                acc += std::pow(std::fabs(x), p);
            }
            block_moment[i] += acc / static_cast<double>(v.size());
            norm = std::max(norm, std::exp2(beta * (i - 1)) * sup);
        }
        lhs += std::pow(norm, p);
    }
    if (replicas == 0) return mc;
    mc.lhs = lhs / replicas;
    for (int i = 0; i < nb; ++i)
        mc.rhs = std::max(mc.rhs, std::exp2(alpha * (i - 1) * p) * block_moment[i] / replicas);
    mc.c0 = mc.rhs > 0.0 ? std::pow(mc.lhs / mc.rhs, 1.0 / p) : 0.0;
    return mc;
}

double schauder_ratio(const SpectralField& f, double t, double a, double b, const DyadicPartition& p) {
    double den = besov_norm(f, b, p);
    if (den == 0.0) return 0.0;
    return besov_norm(heat_flow(f, t), a, p) * std::pow(t, (a - b) / 2.0) / den;
}

}  // namespace phi4
