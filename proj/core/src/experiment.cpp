#include "phi4/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace phi4 {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version_string() {
#ifdef PHI4_VERSION
    return PHI4_VERSION;
#else
    return "dev";
#endif
}

namespace {

std::string join_fields(const std::vector<std::string>& f) {
    std::string s = "invalid config:";
    for (const auto& x : f) s += " " + x + ";";
    return s;
}

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

TimePoly poly_from(const json& v) {
    if (v.is_number()) return TimePoly::constant(v.get<double>());
    return TimePoly(v.get<std::vector<double>>());
}

json poly_json(const TimePoly& p) { return p.coeffs(); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> fields)
    : std::invalid_argument(join_fields(fields)), fields_(std::move(fields)) {}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    std::vector<std::string> bad;
    if (!j.is_object()) throw ConfigError({"<root>: expected an object"});
    static const std::set<std::string> known = {"dimension", "N",        "n",       "T",          "dt",
                                                "sigma",     "coefficients", "epsilon", "lambda", "replicas",
                                                "h_grid",    "master_seed",  "output",  "n_list", "statistic",
                                                "alpha",     "T_list"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) bad.push_back(it.key() + ": unknown field");

    auto get = [&](const char* key, auto& dst) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(dst);
        } catch (const std::exception&) {
            bad.push_back(std::string(key) + ": wrong type");
        }
    };
    get("dimension", c.dimension);
    get("N", c.N);
    get("n", c.n);
    get("T", c.T);
    get("dt", c.dt);
    if (j.contains("sigma")) {
        const auto& s = j["sigma"];
        if (s.is_number())
            c.sigma = {s.get<double>()};
        else
            get("sigma", c.sigma);
    }
    get("epsilon", c.epsilon);
    get("lambda", c.lambda);
    get("replicas", c.replicas);
    get("h_grid", c.h_grid);
    get("master_seed", c.master_seed);
    get("output", c.output);
    get("n_list", c.n_list);
    get("statistic", c.statistic);
    get("alpha", c.alpha);
    get("T_list", c.T_list);

    if (j.contains("coefficients")) {
        const auto& cj = j["coefficients"];
        if (!cj.is_object()) {
            bad.push_back("coefficients: expected an object");
        } else {
            static const std::set<std::string> ck = {"gamma", "b2", "b1", "b0", "a3", "phibar0"};
            for (auto it = cj.begin(); it != cj.end(); ++it)
                if (!ck.count(it.key())) bad.push_back("coefficients." + it.key() + ": unknown field");
            auto poly = [&](const char* key, TimePoly& dst) {
                if (!cj.contains(key)) return false;
                try {
                    dst = poly_from(cj[key]);
                } catch (const std::exception&) {
                    bad.push_back(std::string("coefficients.") + key + ": expected a number or coefficient list");
                }
                return true;
            };
            TimePoly g;
            if (poly("gamma", g)) c.coefficients.gamma = g;
            const bool explicit_b = poly("b2", c.coefficients.b2) | poly("b1", c.coefficients.b1) |
                                    poly("b0", c.coefficients.b0);
            if (c.coefficients.gamma && explicit_b)
                bad.push_back("coefficients.gamma: give either gamma or b2/b1/b0, not both");
            poly("a3", c.coefficients.a3);
            if (cj.contains("phibar0")) {
                if (cj["phibar0"].is_number())
                    c.coefficients.phibar0 = cj["phibar0"].get<double>();
                else
                    bad.push_back("coefficients.phibar0: wrong type");
            }
        }
    } else {
        c.coefficients.gamma = TimePoly::constant(3.0);
    }

    if (c.dimension < 1 || c.dimension > 3) bad.push_back("dimension: must be 1, 2 or 3");
    if (!is_pow2(c.N) || c.N < 4) bad.push_back("N: must be a power of two >= 4");
    if (c.n < 1 || c.n > c.N / 2) bad.push_back("n: must satisfy 1 <= n <= N/2");
    if (!(c.T > 0.0)) bad.push_back("T: must be positive");
    if (!(c.dt > 0.0) || c.dt > c.T) bad.push_back("dt: must lie in (0, T]");
    if (c.sigma.empty()) bad.push_back("sigma: at least one amplitude");
    for (double s : c.sigma)
        if (!(s >= 0.0)) bad.push_back("sigma: amplitudes must be >= 0");
    if (!(c.epsilon > 0.0 && c.epsilon < 1.0 / 16.0)) bad.push_back("epsilon: must lie in (0, 1/16)");
    if (!(c.lambda > 0.0 && c.lambda < std::min(c.epsilon / 3.0, 1.0)))
        bad.push_back("lambda: must lie in (0, min(epsilon/3, 1))");
    if (c.replicas < 1) bad.push_back("replicas: must be >= 1");
    for (std::size_t i = 1; i < c.h_grid.size(); ++i)
        if (!(c.h_grid[i] > c.h_grid[i - 1])) {
            bad.push_back("h_grid: must be strictly increasing");
            break;
        }
    for (int v : c.n_list)
        if (v < 1) bad.push_back("n_list: entries must be >= 1");
    if (c.statistic != "I" && c.statistic != "xi") bad.push_back("statistic: must be \"I\" or \"xi\"");
    for (std::size_t i = 0; i < c.T_list.size(); ++i)
        if (!(c.T_list[i] > 0.0) || (i > 0 && !(c.T_list[i] > c.T_list[i - 1]))) {
            bad.push_back("T_list: must be positive and increasing");
            break;
        }
    const auto& a3 = c.coefficients.a3.coeffs();
    bool unit = !a3.empty() && a3[0] == -1.0;
    for (std::size_t i = 1; i < a3.size(); ++i) unit = unit && a3[i] == 0.0;
    if (!unit) bad.push_back("coefficients.a3: solvers take the normalised cubic a3 = -1 (see normalize_cubic)");

    if (!bad.empty()) throw ConfigError(bad);
    return c;
}

ExperimentConfig load_config(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError({"--config: cannot open " + p.string()});
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("--config: parse error: ") + e.what()});
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json co;
    if (c.coefficients.gamma) {
        co["gamma"] = poly_json(*c.coefficients.gamma);
    } else {
        co["b2"] = poly_json(c.coefficients.b2);
        co["b1"] = poly_json(c.coefficients.b1);
        co["b0"] = poly_json(c.coefficients.b0);
    }
    co["a3"] = poly_json(c.coefficients.a3);
    co["phibar0"] = c.coefficients.phibar0;
    return json{{"dimension", c.dimension}, {"N", c.N},
                {"n", c.n},                 {"T", c.T},
                {"dt", c.dt},               {"sigma", c.sigma},
                {"coefficients", co},       {"epsilon", c.epsilon},
                {"lambda", c.lambda},       {"replicas", c.replicas},
                {"h_grid", c.h_grid},       {"master_seed", c.master_seed},
                {"output", c.output},       {"n_list", c.n_list},
                {"statistic", c.statistic}, {"alpha", c.alpha},
                {"T_list", c.T_list}};
}

json config_schema() {
    auto num = [](const char* d) { return json{{"type", "number"}, {"description", d}}; };
    auto poly = json{{"oneOf", json::array({json{{"type", "number"}},
                                            json{{"type", "array"}, {"items", {{"type", "number"}}}}})}};
    return json{
        {"$schema", "https://json-schema.org/draft/2020-12/schema"},
        {"title", "phi4lab experiment config"},
        {"type", "object"},
        {"additionalProperties", false},
        {"properties",
         {{"dimension", {{"type", "integer"}, {"enum", {1, 2, 3}}}},
          {"N", {{"type", "integer"}, {"description", "grid points per axis, power of two"}}},
          {"n", {{"type", "integer"}, {"description", "noise cutoff, n <= N/2"}}},
          {"T", num("time horizon")},
          {"dt", num("time step")},
          {"sigma", {{"oneOf", json::array({json{{"type", "number"}},
                                            json{{"type", "array"}, {"items", {{"type", "number"}}}}})}}},
          {"coefficients",
           {{"type", "object"},
            {"additionalProperties", false},
            {"properties",
             {{"gamma", poly}, {"b2", poly}, {"b1", poly}, {"b0", poly}, {"a3", poly}, {"phibar0", num("")}}}}},
          {"epsilon", num("in (0, 1/16)")},
          {"lambda", num("in (0, min(epsilon/3, 1))")},
          {"replicas", {{"type", "integer"}, {"minimum", 1}}},
          {"h_grid", {{"type", "array"}, {"items", {{"type", "number"}}}}},
          {"master_seed", {{"type", "integer"}, {"minimum", 0}}},
          {"output", {{"type", "string"}}},
          {"n_list", {{"type", "array"}, {"items", {{"type", "integer"}}}}},
          {"statistic", {{"enum", {"I", "xi"}}}},
          {"alpha", num("regularity of the I statistic")},
          {"T_list", {{"type", "array"}, {"items", {{"type", "number"}}}}}}}};
}

Scenario make_scenario(const CoefficientConfig& cc, double T, bool require_stable) {
    TimePoly b2 = cc.gamma ? TimePoly::constant(0.0) : cc.b2;
    TimePoly b1 = cc.gamma ? *cc.gamma : cc.b1;
    TimePoly b0 = cc.gamma ? TimePoly::constant(0.0) : cc.b0;
    const double h = std::min(1e-3, T / 200.0);
    EquilibriumPath ep = equilibrium_ode(b2, b1, b0, cc.phibar0, T, h);
    TimePoly pb = fit_poly(ep.times, ep.values, 4);
    CoefficientSet cs = recentre(b2, b1, b0, pb, T, require_stable);
    return Scenario{b2, b1, b0, pb, cs};
}

TimeGrid graded_grid(double T, double h_min, double ratio, double h_max) {
    if (!(T > 0.0 && h_min > 0.0 && ratio >= 1.0 && h_max >= h_min)) throw std::invalid_argument("graded_grid");
    std::vector<double> back{T};
    double h = h_min;
    while (back.back() > 0.0) {
        const double rest = back.back();
        if (rest <= h) {
            back.push_back(0.0);
        } else if (rest < 1.5 * h) {
            // two even steps instead of a sliver
            back.push_back(0.5 * rest);
            back.push_back(0.0);
        } else {
            back.push_back(rest - h);
        }
        h = std::min(h * ratio, h_max);
    }
    std::reverse(back.begin(), back.end());
    return TimeGrid(back);
}

double I_sup_statistic(const StepKernel& k, const DyadicPartition& p, int n, double sigma, double alpha,
                       std::uint64_t seed, int stride) {
    const TorusGrid& g = k.grid();
    NoiseStream ns(g, n, seed);
    SpectralField I(g);
    CVec z(g.spec_size());
    const int M = k.time().steps();
    double m = 0.0;
    for (int j = 0; j < M; ++j) {
        ns.next(z);
        k.propagate(j, I.coeffs);
        k.inject(j, I.coeffs, z, sigma);
        if ((j + 1) % std::max(stride, 1) == 0 || j + 1 == M) m = std::max(m, besov_norm(I, alpha, p));
    }
    return m;
}

double xi_statistic(const XiInputs& in, std::uint64_t seed) {
    SymbolParams prm;
    prm.n = in.n;
    prm.sigma = in.sigma;
    prm.c_unit = in.c_unit;
    prm.ctilde_unit = in.ctilde_unit;
    SymbolStepper st(*in.kernel, *in.partition, prm, stream_source(in.kernel->grid(), in.n, seed));
    try {
        VWPaths vw = solve_vw(st, *in.coeffs);
        const auto& tg = in.kernel->time();
        return xi_norm(vw.v, vw.w, tg.times(), tg.T(), in.eps, *in.partition).value();
    } catch (const BlowUp&) {
        return std::numeric_limits<double>::infinity();
    }
}

std::vector<double> ctilde_unit_path(const TorusGrid& g, int n, const CoefficientSet& c, const TimeGrid& tg,
                                     std::size_t replicas, std::uint64_t seed) {
    CTildeOptions o;
    o.replicas = replicas;
    o.seed = seed;
    auto est = renorm_c_tilde_path(g, n, c, tg, o);
    std::vector<double> out;
    for (const auto& e : est) out.push_back(e.mean);
    return out;
}

namespace {

// c~ on a coarse grid, interpolated onto tg; the identities between solvers do not depend on its value
std::vector<double> ctilde_interpolated(const TorusGrid& g, int n, const CoefficientSet& c, const TimeGrid& tg,
                                        std::size_t replicas, std::uint64_t seed) {
    const int coarse = std::min(tg.steps(), 50);
    TimeGrid cg(tg.T(), coarse);
    auto cv = ctilde_unit_path(g, n, c, cg, replicas, seed);
    std::vector<double> out(tg.steps() + 1);
    for (int j = 0; j <= tg.steps(); ++j) {
        const double x = tg.t(j) / cg.dt();
        int i = std::min(static_cast<int>(std::floor(x)), coarse - 1);
        const double f = x - i;
        out[j] = (1.0 - f) * cv[i] + f * cv[i + 1];
    }
    return out;
}

TimeGrid uniform_grid(double T, double dt) {
    return TimeGrid(T, std::max(1, static_cast<int>(std::lround(std::ceil(T / dt - 1e-9)))));
}

}  // namespace

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: need two points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r_squared = (sxx > 0 && syy > 0) ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

std::string sha256_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("sha256_file: cannot open " + p.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    static const char* digits = "0123456789abcdef";
    for (unsigned i = 0; i < len; ++i) {
        hex.push_back(digits[md[i] >> 4]);
        hex.push_back(digits[md[i] & 15]);
    }
    return hex;
}

void write_field_dump(const fs::path& p, const RealField& f, const json& meta) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    for (double v : f.values) {
        std::uint64_t u = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
    json side = meta;
    side["dtype"] = "<f8";
    side["dimension"] = f.grid.dim();
    side["N"] = f.grid.N();
    side["order"] = "row-major, last axis fastest";
    side["count"] = f.values.size();
    std::ofstream sc(p.string() + ".json");
    sc << side.dump(2) << "\n";
}

void write_tail_csv(const fs::path& p, const TailCurve& c) {
    std::ofstream out(p);
    out << "h,count,p_hat,ci_low,ci_high,beyond_resolution\n";
    for (std::size_t i = 0; i < c.h.size(); ++i)
        out << fmt(c.h[i]) << "," << c.counts[i] << "," << fmt(c.p_hat[i]) << "," << fmt(c.ci_low[i]) << ","
            << fmt(c.ci_high[i]) << "," << int(c.beyond_resolution[i]) << "\n";
}

json RunManifest::to_json(const fs::path& root) const {
    json files_j = json::array();
    for (const auto& f : files)
        files_j.push_back({{"path", fs::relative(f, root).string()}, {"sha256", sha256_file(f)}});
    return json{{"command", command}, {"version", version}, {"config", config},     {"seeds", seeds},
                {"wall_seconds", wall_seconds},             {"files", files_j}};
}

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

CommandResult start(const ExperimentConfig& c, const RunOptions& o, const char* cmd) {
    fs::create_directories(o.out);
    CommandResult r;
    r.manifest.config = to_json(c);
    r.manifest.version = version_string();
    r.manifest.command = cmd;
    return r;
}

fs::path emit_json(CommandResult& r, const fs::path& p, const json& j) {
    std::ofstream out(p);
    out << j.dump(2) << "\n";
    r.manifest.files.push_back(p);
    return p;
}

RealField random_field(const TorusGrid& g, std::mt19937_64& eng) {
    std::normal_distribution<double> nd;
    RealField f(g);
    for (double& v : f.values) v = nd(eng);
    return f;
}

double max_rel(const RealField& a, const RealField& b) {
    double d = 0, m = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        d = std::max(d, std::fabs(a.values[i] - b.values[i]));
        m = std::max(m, std::fabs(b.values[i]));
    }
    return m > 0 ? d / m : d;
}

}  // namespace

void finalize(CommandResult& r, const RunOptions& o) {
    emit_json(r, o.out / "report.json", r.report);
    std::ofstream out(o.out / "manifest.json");
    out << r.manifest.to_json(o.out).dump(2) << "\n";
}

CommandResult cmd_verify(const ExperimentConfig& c, const RunOptions& o) {
    Timer tm;
    CommandResult r = start(c, o, "verify");
    json checks = json::array();
    auto add = [&](const std::string& name, bool pass, json detail) {
        checks.push_back({{"name", name}, {"pass", pass}, {"detail", std::move(detail)}});
        r.ok = r.ok && pass;
    };
    std::mt19937_64 eng(stream_seed(c.master_seed, 0, StreamRole::aux));

    {
        TorusGrid g(2, 64);
        PartitionSpec ps;
        if (o.corrupt_partition) ps.tilde_outer = 1.6;
        DyadicPartition p(g, ps);
        PartitionReport pr = check_partition(p);
        add("partition_of_unity", pr.pass(1e-12),
            {{"max_sum_error", pr.max_sum_error}, {"max_support_violation", pr.max_support_violation}});
    }
    {
        TorusGrid g(2, 32);
        DyadicPartition p(g);
        double rec = 0, prod = 0;
        for (int i = 0; i < 5; ++i) {
            RealField f = random_field(g, eng), h = random_field(g, eng);
            BlockDecomposition bd = lp_blocks(f, p);
            RealField s(g);
            for (const auto& b : bd.blocks)
                for (std::size_t q = 0; q < s.values.size(); ++q) s.values[q] += b.values[q];
            rec = std::max(rec, max_rel(s, f));
            RealField a = para_lt(f, h, p), b = para_gt(f, h, p), rr = resonant(f, h, p);
            RealField full = dealiased_product(f, h);
            for (std::size_t q = 0; q < a.values.size(); ++q) a.values[q] += b.values[q] + rr.values[q];
            prod = std::max(prod, max_rel(a, full));
        }
        add("block_reconstruction", rec <= 1e-10, {{"max_rel", rec}});
        add("product_decomposition", prod <= 1e-10, {{"max_rel", prod}});
    }
    {
        CoefficientSet cs(TimePoly::constant(0.0), TimePoly::constant(-1.0), 1.0);
        double err = 0;
        for (double t : {0.1, 0.5, 1.0})
            err = std::max(err, std::fabs(mode_variance(cs, 0, t) - (1.0 - std::exp(-2.0 * t)) / 2.0));
        add("ou_mode0_variance", err <= 1e-10, {{"max_abs_error", err}});
    }
    {
        NelsonResult nr = nelson_check(2, 4, 20000, c.master_seed);
        // E He_2^4 = 60, E He_2^2 = 2
        const double rel = std::fabs(nr.moment_p - 60.0) / 60.0;
        add("nelson_order2_p4", nr.pass && rel < 0.1, {{"moment_p", nr.moment_p}, {"exact", 60.0}});
    }
    {
        std::normal_distribution<double> nd;
        std::vector<double> t{0.0}, x{0.0};
        for (int i = 0; i < 64; ++i) {
            t.push_back((i + 1) / 64.0);
            x.push_back(x.back() + nd(eng) / 8.0);
        }
        const double hc = holder_constant(x, t, 0.175);
        const double gb = grr_bound(x, t, 8, 0.3);
        add("grr_domination", gb >= std::pow(hc, 8), {{"grr_bound", gb}, {"holder_pow", std::pow(hc, 8)}});
    }
    {
        auto ep = equilibrium_ode(TimePoly::constant(3.0), 2.0, 1.0, 1e-3);
        bool ok = true;
        for (double v : ep.values) ok = ok && v > 1.0 && 3.0 - 3.0 * v * v < 0.0;
        add("equilibrium_example", ok, {{"phibar_T", ep.values.back()}});
    }
    {
        TorusGrid g(2, 16);
        TimeGrid tg(0.1, 10);
        Scenario sc = make_scenario(CoefficientConfig{TimePoly::constant(3.0), {}, {}, {}, {}, 2.0}, 0.1);
        StepKernel k(g, sc.coeffs, tg);
        DyadicPartition p(g);
        SymbolParams prm;
        prm.n = 4;
        prm.sigma = 0.0;
        prm.c_unit = renorm_c_path(sc.coeffs, g, 4, tg);
        prm.ctilde_unit.assign(tg.steps() + 1, 1.0);
        SymbolEnsemble e = build_symbols(k, p, prm, c.master_seed);
        double m = 0;
        for (const auto& info : symbol_catalog()) m = std::max(m, max_abs(e.path(info.symbol)));
        add("sigma_zero_symbols", m == 0.0, {{"max_abs", m}});
    }
    r.report = {{"checks", checks}, {"pass", r.ok}};
    r.manifest.wall_seconds = tm.seconds();
    return r;
}

CommandResult cmd_symbols(const ExperimentConfig& c, const RunOptions& o) {
    Timer tm;
    CommandResult r = start(c, o, "symbols");
    TorusGrid g(c.dimension, c.N);
    TimeGrid tg = uniform_grid(c.T, c.dt);
    Scenario sc = make_scenario(c.coefficients, c.T);
    DyadicPartition p(g);
    StepKernel k(g, sc.coeffs, tg);
    SymbolParams prm;
    prm.n = c.n;
    prm.sigma = c.sigma.front();
    prm.c_unit = renorm_c_path(sc.coeffs, g, c.n, tg);
    prm.ctilde_unit = ctilde_interpolated(g, c.n, sc.coeffs, tg, std::min<std::size_t>(c.replicas, 100),
                                          stream_seed(c.master_seed, 0, StreamRole::ctilde));
    const std::uint64_t seed = stream_seed(c.master_seed, 0, StreamRole::noise);
    r.manifest.seeds = {seed};
    SymbolEnsemble e = build_symbols(k, p, prm, seed);

    const fs::path csv = o.out / "symbols.csv";
    {
        std::ofstream out(csv);
        out << "t,c,ctilde";
        for (const auto& info : symbol_catalog()) out << ",sup_" << info.name;
        out << "\n";
        for (const auto& s : e.slices) {
            out << fmt(s.t) << "," << fmt(s.c) << "," << fmt(s.ctilde);
            for (const auto& info : symbol_catalog()) out << "," << fmt(sup_norm(dft_inverse(s.get(info.symbol))));
            out << "\n";
        }
    }
    r.manifest.files.push_back(csv);
    for (const auto& info : symbol_catalog()) {
        const fs::path bin = o.out / (std::string("symbol_") + info.name + ".f64");
        write_field_dump(bin, dft_inverse(e.slices.back().get(info.symbol)),
                         {{"field", info.name}, {"t", e.slices.back().t}, {"sigma", prm.sigma}, {"seed", seed}});
        r.manifest.files.push_back(bin);
        r.manifest.files.push_back(bin.string() + ".json");
    }
    json sup;
    for (const auto& info : symbol_catalog()) sup[info.name] = max_abs(e.path(info.symbol));
    r.report = {{"steps", tg.steps()}, {"max_abs_coefficient", sup}};
    r.manifest.wall_seconds = tm.seconds();
    return r;
}

std::vector<RenormRow> renorm_scaling(const CoefficientSet& cs, int dim, const std::vector<int>& n_list, double t,
                                      std::size_t replicas, std::uint64_t seed) {
    std::vector<RenormRow> rows;
    for (int n : n_list) {
        int N = 4;
        while (N < 2 * n) N *= 2;
        TorusGrid g(dim, N);
        const double lmax = 4.0 * std::numbers::pi * std::numbers::pi * dim * n * n;
        TimeGrid tg = graded_grid(t, 0.05 / lmax, 1.25, t / 20.0);
        CTildeOptions o;
        o.replicas = replicas;
        o.seed = seed;
        o.pad = 3 * N / 2;
        McEstimate ct = renorm_c_tilde(g, n, cs, tg, o);
        RenormRow row;
        row.n = n;
        row.N = N;
        row.steps = tg.steps();
        row.c = renorm_c(cs, dim, n, t);
        row.c_grid = renorm_c_grid(cs, g, n, t);
        row.ctilde = ct.mean;
        row.ctilde_se = ct.se;
        rows.push_back(row);
    }
    return rows;
}

RenormSummary summarize_renorm(const std::vector<RenormRow>& rows) {
    std::vector<double> n, c, ln, ct;
    RenormSummary s;
    s.monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        n.push_back(rows[i].n);
        c.push_back(rows[i].c);
        ln.push_back(std::log(rows[i].n));
        ct.push_back(rows[i].ctilde);
        if (i > 0 && !(rows[i].ctilde > rows[i - 1].ctilde)) s.monotone = false;
    }
    if (rows.size() >= 2) {
        s.c_vs_n = linear_fit(n, c);
        s.ctilde_vs_log_n = linear_fit(ln, ct);
    }
    return s;
}

CommandResult cmd_renorm(const ExperimentConfig& c, const RunOptions& o) {
    Timer tm;
    CommandResult r = start(c, o, "renorm");
    Scenario sc = make_scenario(c.coefficients, c.T);
    const std::uint64_t seed = stream_seed(c.master_seed, 0, StreamRole::ctilde);
    r.manifest.seeds = {seed};
    auto rows = renorm_scaling(sc.coeffs, c.dimension, c.n_list, c.T, c.replicas, seed);
    const fs::path csv = o.out / "renorm.csv";
    {
        std::ofstream out(csv);
        out << "n,N,steps,c_n,c_n_grid,ctilde_n,ctilde_se\n";
        for (const auto& row : rows)
            out << row.n << "," << row.N << "," << row.steps << "," << fmt(row.c) << "," << fmt(row.c_grid) << ","
                << fmt(row.ctilde) << "," << fmt(row.ctilde_se) << "\n";
    }
    r.manifest.files.push_back(csv);
    RenormSummary s = summarize_renorm(rows);
    r.report = {{"t", c.T},
                {"c_vs_n", {{"slope", s.c_vs_n.slope}, {"intercept", s.c_vs_n.intercept}, {"r2", s.c_vs_n.r_squared}}},
                {"ctilde_vs_log_n",
                 {{"slope", s.ctilde_vs_log_n.slope},
                  {"intercept", s.ctilde_vs_log_n.intercept},
                  {"r2", s.ctilde_vs_log_n.r_squared}}},
                {"ctilde_monotone", s.monotone}};
    r.manifest.wall_seconds = tm.seconds();
    return r;
}

CommandResult cmd_simulate(const ExperimentConfig& c, const RunOptions& o) {
    Timer tm;
    CommandResult r = start(c, o, "simulate");
    TorusGrid g(c.dimension, c.N);
    TimeGrid tg = uniform_grid(c.T, c.dt);
    Scenario sc = make_scenario(c.coefficients, c.T);
    const double sigma = c.sigma.front();
    const std::uint64_t seed = stream_seed(c.master_seed, 0, StreamRole::noise);
    r.manifest.seeds = {seed};
    auto ct = ctilde_interpolated(g, c.n, sc.coeffs, tg, std::min<std::size_t>(c.replicas, 100),
                                  stream_seed(c.master_seed, 0, StreamRole::ctilde));
    SolutionPath sp = solve_renormalized(sc.coeffs, g, c.n, tg, sigma, seed, renorm_c_path(sc.coeffs, g, c.n, tg), ct);
    const fs::path csv = o.out / "simulate.csv";
    {
        std::ofstream out(csv);
        out << "t,phibar,sup_phi,mean_phi\n";
        for (int j = 0; j <= tg.steps(); ++j) {
            RealField f = dft_inverse(sp.states[j]);
            const double pb = sc.phibar(tg.t(j));
            double m = 0;
            for (double v : f.values) m = std::max(m, std::fabs(pb + v));
            out << fmt(tg.t(j)) << "," << fmt(pb) << "," << fmt(m) << ","
                << fmt(pb + sp.states[j].coeffs[0].real()) << "\n";
        }
    }
    r.manifest.files.push_back(csv);
    RealField fin = dft_inverse(sp.states.back());
    for (double& v : fin.values) v += sc.phibar(c.T);
    const fs::path bin = o.out / "phi_final.f64";
    write_field_dump(bin, fin, {{"field", "phi"}, {"t", c.T}, {"sigma", sigma}, {"seed", seed}});
    r.manifest.files.push_back(bin);
    r.manifest.files.push_back(bin.string() + ".json");
    r.report = {{"steps", tg.steps()}, {"sup_phi_final", sup_norm(fin)}};
    r.manifest.wall_seconds = tm.seconds();
    return r;
}

CommandResult cmd_tail(const ExperimentConfig& c, const RunOptions& o) {
    Timer tm;
    CommandResult r = start(c, o, "tail");
    if (c.replicas < 200) throw ConfigError({"replicas: tail estimation needs at least 200"});
    TorusGrid g(c.dimension, c.N);
    TimeGrid tg = uniform_grid(c.T, c.dt);
    DyadicPartition p(g);
    Scenario sc = make_scenario(c.coefficients, c.T);
    StepKernel k(g, sc.coeffs, tg);
    for (std::size_t q = 0; q < c.replicas; ++q) r.manifest.seeds.push_back(stream_seed(c.master_seed, q, StreamRole::noise));

    XiInputs xi{&k, &p, &sc.coeffs, c.n, 0.0, c.epsilon, {}, {}};
    if (c.statistic == "xi") {
        xi.c_unit = renorm_c_path(sc.coeffs, g, c.n, tg);
        xi.ctilde_unit = ctilde_interpolated(g, c.n, sc.coeffs, tg, 100, stream_seed(c.master_seed, 0, StreamRole::ctilde));
    }
    const int stride = std::max(1, tg.steps() / 50);
    json fits = json::array();
    std::vector<double> slopes;
    for (double sigma : c.sigma) {
        auto stat = [&](std::size_t, std::uint64_t seed) {
            if (c.statistic == "xi") {
                XiInputs in = xi;
                in.sigma = sigma;
                return xi_statistic(in, seed);
            }
            return I_sup_statistic(k, p, c.n, sigma, c.alpha, seed, stride);
        };
        auto samples = parallel_replicas(c.replicas, o.threads, [&](std::size_t q) {
            return stat(q, r.manifest.seeds[q]);
        });
        std::vector<double> grid = c.h_grid.empty() ? quantile_grid(samples, 0.5, 0.05, 10) : c.h_grid;
        TailCurve curve = tail_from_samples(samples, grid, sigma, c.T, c.statistic);
        const std::string tag = "tail_" + c.statistic + "_sigma" + fmt(sigma);
        write_tail_csv(o.out / (tag + ".csv"), curve);
        r.manifest.files.push_back(o.out / (tag + ".csv"));
        json fj{{"sigma", sigma}, {"seed", c.master_seed}, {"narrow_grid", curve.narrow_grid}};
        try {
            GaussianFit f = gaussian_tail_fit(curve);
            fj["slope_C"] = f.slope_C;
            fj["intercept_logD"] = f.intercept_logD;
            fj["r2"] = f.r_squared;
            fj["cells"] = f.cells;
            slopes.push_back(f.slope_C);
        } catch (const std::invalid_argument& e) {
            fj["error"] = e.what();
            r.ok = false;
        }
        fj["config"] = to_json(c);
        emit_json(r, o.out / (tag + ".fit.json"), fj);
        fits.push_back(fj);
    }
    json rep{{"fits", fits}};
    json ratios = json::array();
    for (std::size_t i = 1; i < slopes.size(); ++i) ratios.push_back(slopes[i - 1] / slopes[i]);
    rep["slope_ratios"] = ratios;
    if (!c.T_list.empty() && c.statistic == "I") {
        json rows = json::array();
        auto tr = T_scaling_probe(
            [&](double T, std::size_t, std::uint64_t seed) {
                TimeGrid tt = uniform_grid(T, c.dt);
                StepKernel kk(g, make_scenario(c.coefficients, T).coeffs, tt);
                return I_sup_statistic(kk, p, c.n, c.sigma.front(), c.alpha, seed, std::max(1, tt.steps() / 50));
            },
            c.T_list, c.lambda, c.sigma.front(), c.replicas, c.master_seed, o.threads);
        for (const auto& row : tr) rows.push_back({{"T", row.T}, {"slope_C", row.fit.slope_C}, {"scaled", row.scaled}});
        rep["T_scaling"] = rows;
    }
    r.report = rep;
    r.manifest.wall_seconds = tm.seconds();
    return r;
}

CommandResult cmd_equivalence(const ExperimentConfig& c, const RunOptions& o) {
    Timer tm;
    CommandResult r = start(c, o, "equivalence");
    Scenario sc = make_scenario(c.coefficients, c.T);
    TorusGrid g(c.dimension, c.N);
    json runs = json::array();
    std::vector<double> gaps;
    // both runs see one Brownian path: the coarse run aggregates pairs of fine draws
    for (double dt : {c.dt, c.dt / 2.0}) {
        EquivalenceConfig ec;
        ec.noise_refine = dt == c.dt ? 2 : 1;
        ec.dim = c.dimension;
        ec.N = c.N;
        ec.n = c.n;
        ec.T = c.T;
        ec.steps = uniform_grid(c.T, dt).steps();
        ec.sigma = c.sigma.front();
        ec.seed = c.master_seed;
        TimeGrid tg(c.T, ec.steps);
        auto ct = ctilde_interpolated(g, c.n, sc.coeffs, tg, std::min<std::size_t>(c.replicas, 50),
                                      stream_seed(c.master_seed, 0, StreamRole::ctilde));
        EquivalenceReport er = run_equivalence(ec, sc.coeffs, [&](double t) { return sc.phibar(t); }, ct);
        gaps.push_back(er.gap);
        runs.push_back({{"dt", dt},
                        {"steps", ec.steps},
                        {"gap", er.gap},
                        {"gap_psi", er.gap_psi},
                        {"max_phi", er.max_phi},
                        {"max_v", er.max_v},
                        {"max_w", er.max_w}});
    }
    r.manifest.seeds = {stream_seed(c.master_seed, 0, StreamRole::noise)};
    const double ratio = gaps[0] > 0 ? gaps[1] / gaps[0] : 0.0;
    r.ok = gaps[0] <= 5e-2 && ratio >= 0.4 && ratio <= 0.6;
    r.report = {{"runs", runs}, {"halving_ratio", ratio}, {"pass", r.ok}};
    r.manifest.wall_seconds = tm.seconds();
    return r;
}

}  // namespace phi4
