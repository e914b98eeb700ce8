#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "phi4/experiment.hpp"

namespace {

using Cmd = phi4::CommandResult (*)(const phi4::ExperimentConfig&, const phi4::RunOptions&);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phi4lab: paracontrolled Phi^4 experiments on the torus"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string out;
    bool corrupt = false;
    bool print_schema = false;

    auto common = [&](CLI::App* sc) {
        sc->add_option("--config", config_path, "JSON experiment config");
        sc->add_option("--seed", seed, "override master_seed");
        sc->add_option("--threads", threads, "replica worker threads")->check(CLI::PositiveNumber);
        sc->add_option("--out", out, "output directory (overrides config output)");
    };
    std::vector<std::pair<CLI::App*, Cmd>> cmds;
    auto* verify = app.add_subcommand("verify", "run the property suites");
    verify->add_flag("--corrupt-partition", corrupt, "widen the low cutoff to check that the suite notices");
    cmds.emplace_back(verify, phi4::cmd_verify);
    cmds.emplace_back(app.add_subcommand("symbols", "build the noise symbols along one path"), phi4::cmd_symbols);
    cmds.emplace_back(app.add_subcommand("renorm", "renormalisation constants against the cutoff"), phi4::cmd_renorm);
    cmds.emplace_back(app.add_subcommand("simulate", "solve the renormalised equation"), phi4::cmd_simulate);
    cmds.emplace_back(app.add_subcommand("tail", "Monte Carlo tail curves and Gaussian fits"), phi4::cmd_tail);
    cmds.emplace_back(app.add_subcommand("equivalence", "direct solve against the (v,w) reconstruction"),
                      phi4::cmd_equivalence);
    for (auto& [sc, fn] : cmds) common(sc);
    auto* schema = app.add_subcommand("schema", "print the config JSON schema");
    schema->callback([&] { print_schema = true; });

    CLI11_PARSE(app, argc, argv);
    if (print_schema) {
        std::cout << phi4::config_schema().dump(2) << "\n";
        return 0;
    }

    try {
        phi4::ExperimentConfig cfg =
            config_path.empty() ? phi4::parse_config(nlohmann::json::object()) : phi4::load_config(config_path);
        if (seed) cfg.master_seed = *seed;
        phi4::RunOptions opt;
        opt.threads = threads;
        opt.out = out.empty() ? cfg.output : out;
        opt.corrupt_partition = corrupt;
        for (auto& [sc, fn] : cmds) {
            if (!sc->parsed()) continue;
            phi4::CommandResult r = fn(cfg, opt);
            phi4::finalize(r, opt);
            std::cout << r.report.dump(2) << "\n";
            return r.ok ? 0 : 1;
        }
    } catch (const phi4::ConfigError& e) {
        std::cerr << "config error:\n";
        for (const auto& f : e.fields()) std::cerr << "  " << f << "\n";
        return 2;
    } catch (const phi4::BlowUp& e) {
        std::cerr << "blow-up at t=" << e.time << ": " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
