#pragma once

#include <functional>
#include <vector>

#include "phi4/torus.hpp"

namespace phi4 {

struct PartitionSpec {
    double inner = 0.75;
    double outer = 4.0 / 3.0;
    // support radius used for the k = -1 cutoff only; a value above outer corrupts the partition
    double tilde_outer = 4.0 / 3.0;
};

// smooth radial cutoff: 1 on [0, inner], 0 beyond outer
double smooth_cutoff(double r, double inner, double outer);

class DyadicPartition {
public:
    explicit DyadicPartition(const TorusGrid& g, PartitionSpec spec = {});

    const TorusGrid& grid() const { return grid_; }
    const PartitionSpec& spec() const { return spec_; }
    int max_block() const { return K_; }
    int block_count() const { return K_ + 2; }

    double chi_tilde(double r) const;
    double chi(double r) const;
    // chi_k at |zeta| = r, k >= -1
    double chi_k(int k, double r) const;
    // weights on the half-layout spectrum, k = -1..max_block
    const std::vector<double>& weights(int k) const { return w_[k + 1]; }

private:
    TorusGrid grid_;
    PartitionSpec spec_;
    int K_;
    std::vector<std::vector<double>> w_;
};

struct PartitionReport {
    double max_sum_error = 0.0;
    double max_support_violation = 0.0;
    bool values_in_unit_interval = true;
    bool radial = true;
    bool pass(double tol = 1e-12) const {
        return max_sum_error <= tol && max_support_violation == 0.0 && values_in_unit_interval && radial;
    }
};

PartitionReport check_partition(const DyadicPartition& p);

struct BlockDecomposition {
    std::vector<RealField> blocks;  // blocks[0] is k = -1
    const RealField& block(int k) const { return blocks[k + 1]; }
};

BlockDecomposition lp_blocks(const RealField& f, const DyadicPartition& p);
BlockDecomposition lp_blocks(const SpectralField& f, const DyadicPartition& p);
// sup_x |delta_k f| for k = -1..max_block
std::vector<double> block_sups(const SpectralField& f, const DyadicPartition& p);
double besov_norm(const RealField& f, double alpha, const DyadicPartition& p);
double besov_norm(const SpectralField& f, double alpha, const DyadicPartition& p);
double besov_from_sups(const std::vector<double>& sups, double alpha);

// Littlewood-Paley blocks sampled on the padded grid, ready for pointwise products.
class Blocked {
public:
    Blocked(const SpectralField& f, const DyadicPartition& p);
    Blocked(const SpectralField& f, const DyadicPartition& p, int M);

    const TorusGrid& grid() const { return grid_; }
    const Shape& shape() const { return shape_; }
    int count() const { return static_cast<int>(blocks_.size()); }
    bool zero(int i) const { return blocks_[i].empty(); }
    const RVec& block(int i) const { return blocks_[i]; }

private:
    TorusGrid grid_;
    Shape shape_;
    std::vector<RVec> blocks_;  // index i holds k = i - 1; empty when the block vanishes
};

// accumulate s * (f op g) into a padded buffer
void add_para_lt(double s, const Blocked& f, const Blocked& g, RVec& acc);
void add_resonant(double s, const Blocked& f, const Blocked& g, RVec& acc);
void add_product(double s, const Blocked& f, const Blocked& g, RVec& acc);

SpectralField para_lt(const Blocked& f, const Blocked& g);
SpectralField para_gt(const Blocked& f, const Blocked& g);
SpectralField resonant(const Blocked& f, const Blocked& g);

SpectralField para_lt(const SpectralField& f, const SpectralField& g, const DyadicPartition& p);
SpectralField para_gt(const SpectralField& f, const SpectralField& g, const DyadicPartition& p);
SpectralField resonant(const SpectralField& f, const SpectralField& g, const DyadicPartition& p);
RealField para_lt(const RealField& f, const RealField& g, const DyadicPartition& p);
RealField para_gt(const RealField& f, const RealField& g, const DyadicPartition& p);
RealField resonant(const RealField& f, const RealField& g, const DyadicPartition& p);

// product minus resonant part, and product minus the low-high paraproduct
SpectralField circled_neq(const SpectralField& f, const SpectralField& g, const DyadicPartition& p);
SpectralField circled_geq(const SpectralField& f, const SpectralField& g, const DyadicPartition& p);
RealField circled_neq(const RealField& f, const RealField& g, const DyadicPartition& p);
RealField circled_geq(const RealField& f, const RealField& g, const DyadicPartition& p);

// (f < g) o h - f (g o h)
SpectralField commutator_lt_res(const SpectralField& f, const SpectralField& g, const SpectralField& h,
                                const DyadicPartition& p);
RealField commutator_lt_res(const RealField& f, const RealField& g, const RealField& h,
                            const DyadicPartition& p);
// e^{t Delta}(f < g) - f < (e^{t Delta} g)
SpectralField heat_commutator(const SpectralField& f, const SpectralField& g, double t,
                              const DyadicPartition& p);
RealField heat_commutator(const RealField& f, const RealField& g, double t, const DyadicPartition& p);

struct BernsteinResult {
    double lhs;    // sup norm of the block
    double ratio;  // lhs / (2^{dk/p} ||block||_p)
};

// p = INFINITY is allowed
BernsteinResult bernstein_check(const RealField& f, int k, double p, const DyadicPartition& part);

struct MomentCriterion {
    double lhs = 0.0;  // E ||f||_{C^beta}^p
    double rhs = 0.0;  // sup_k 2^{alpha k p} E ||delta_k f||_p^p
    double c0 = 0.0;   // (lhs / rhs)^{1/p}
    bool insufficient_replicas = false;
};

MomentCriterion moment_criterion_check(const std::function<RealField(std::size_t)>& sampler, double alpha,
                                       double beta, double p, std::size_t replicas,
                                       const DyadicPartition& part, std::size_t min_replicas = 100);

// Schauder ratio ||e^{t Delta} f||_{C^a} t^{(a-b)/2} / ||f||_{C^b}
double schauder_ratio(const SpectralField& f, double t, double a, double b, const DyadicPartition& p);

}  // namespace phi4
