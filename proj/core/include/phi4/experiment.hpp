#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi4/coefficients.hpp"
#include "phi4/concentration.hpp"
#include "phi4/noise.hpp"
#include "phi4/solvers.hpp"
#include "phi4/symbols.hpp"

namespace phi4 {

const char* version_string();

struct CoefficientConfig {
    std::optional<TimePoly> gamma;  // shorthand for b2 = b0 = 0, b1 = gamma
    TimePoly b2, b1, b0;
    TimePoly a3 = TimePoly::constant(-1.0);
    double phibar0 = 2.0;
};

struct ExperimentConfig {
    int dimension = 3;
    int N = 32;
    int n = 8;
    double T = 0.5;
    double dt = 1e-3;
    std::vector<double> sigma{0.1};
    CoefficientConfig coefficients;
    double epsilon = 0.05;
    double lambda = 0.01;
    std::size_t replicas = 200;
    std::vector<double> h_grid;  // empty: quantiles of the samples
    std::uint64_t master_seed = 1;
    std::string output = "out";
    std::vector<int> n_list{4, 8, 16, 32};
    std::string statistic = "I";  // I or xi
    double alpha = -0.6;          // regularity of the I statistic
    std::vector<double> T_list;   // optional T-scaling probe
};

class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> fields);
    const std::vector<std::string>& fields() const { return fields_; }

private:
    std::vector<std::string> fields_;
};

// throws ConfigError naming every offending field
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& p);
nlohmann::json to_json(const ExperimentConfig& c);
nlohmann::json config_schema();

// phibar from RK4 with a degree-4 fit, and the recentred coefficients around it
struct Scenario {
    TimePoly b2, b1, b0;
    TimePoly phibar;
    CoefficientSet coeffs;
};
Scenario make_scenario(const CoefficientConfig& cc, double T, bool require_stable = true);

// times refined geometrically towards T: steps h_min, h_min*ratio, ... capped at h_max
TimeGrid graded_grid(double T, double h_min, double ratio, double h_max);

// sup over the grid of |I(t)|_{C^alpha}; evaluated every `stride` steps and at the end
double I_sup_statistic(const StepKernel& k, const DyadicPartition& p, int n, double sigma, double alpha,
                       std::uint64_t seed, int stride = 1);

struct XiInputs {
    const StepKernel* kernel;
    const DyadicPartition* partition;
    const CoefficientSet* coeffs;
    int n;
    double sigma;
    double eps;
    std::vector<double> c_unit, ctilde_unit;
};
// Xi-norm of the (v,w) solution at the final time; +inf on blow-up
double xi_statistic(const XiInputs& in, std::uint64_t seed);

// unit-sigma c~ along tg, Monte Carlo
std::vector<double> ctilde_unit_path(const TorusGrid& g, int n, const CoefficientSet& c, const TimeGrid& tg,
                                     std::size_t replicas, std::uint64_t seed);

struct LinearFit {
    double slope = 0.0, intercept = 0.0, r_squared = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

struct RenormRow {
    int n = 0, N = 0, steps = 0;
    double c = 0.0, c_grid = 0.0;
    double ctilde = 0.0, ctilde_se = 0.0;
};
// c_n(t) and Monte Carlo c~_n(t) per cutoff; grid N = 2n, 3/2 padding, time grid graded towards t
std::vector<RenormRow> renorm_scaling(const CoefficientSet& cs, int dim, const std::vector<int>& n_list, double t,
                                      std::size_t replicas, std::uint64_t seed);
struct RenormSummary {
    LinearFit c_vs_n, ctilde_vs_log_n;
    bool monotone = false;
};
RenormSummary summarize_renorm(const std::vector<RenormRow>& rows);

// output helpers
std::string sha256_file(const std::filesystem::path& p);
// little-endian float64 values with a JSON sidecar next to it
void write_field_dump(const std::filesystem::path& p, const RealField& f, const nlohmann::json& meta);
void write_tail_csv(const std::filesystem::path& p, const TailCurve& c);

struct RunOptions {
    int threads = 1;
    std::filesystem::path out = "out";
    bool corrupt_partition = false;  // fault injection for verify
};

struct RunManifest {
    nlohmann::json config;
    std::string version;
    std::string command;
    std::vector<std::uint64_t> seeds;
    double wall_seconds = 0.0;
    std::vector<std::filesystem::path> files;
    nlohmann::json to_json(const std::filesystem::path& root) const;
};

struct CommandResult {
    nlohmann::json report;
    RunManifest manifest;
    bool ok = true;
};

CommandResult cmd_verify(const ExperimentConfig& c, const RunOptions& o);
CommandResult cmd_symbols(const ExperimentConfig& c, const RunOptions& o);
CommandResult cmd_renorm(const ExperimentConfig& c, const RunOptions& o);
CommandResult cmd_simulate(const ExperimentConfig& c, const RunOptions& o);
CommandResult cmd_tail(const ExperimentConfig& c, const RunOptions& o);
CommandResult cmd_equivalence(const ExperimentConfig& c, const RunOptions& o);

// writes report.json and manifest.json into o.out
void finalize(CommandResult& r, const RunOptions& o);

}  // namespace phi4
