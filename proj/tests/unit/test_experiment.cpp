#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "phi4/experiment.hpp"

using namespace phi4;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> error_fields(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.fields();
    }
    return {};
}

// entries read "field: message"
bool names(const std::vector<std::string>& f, const std::string& s) {
    return std::any_of(f.begin(), f.end(), [&](const std::string& e) { return e.rfind(s + ":", 0) == 0; });
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("phi4lab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Config, DefaultsParse) {
    auto c = parse_config(json::object());
    EXPECT_EQ(c.dimension, 3);
    EXPECT_EQ(c.N, 32);
    EXPECT_EQ(c.n, 8);
    ASSERT_TRUE(c.coefficients.gamma.has_value());
    EXPECT_EQ((*c.coefficients.gamma)(0.3), 3.0);
}

TEST(Config, NamesOffendingFields) {
    EXPECT_TRUE(names(error_fields({{"N", 16}, {"n", 9}}), "n"));
    EXPECT_TRUE(names(error_fields({{"epsilon", 0.1}}), "epsilon"));
    EXPECT_TRUE(names(error_fields({{"lambda", 0.03}}), "lambda"));
    EXPECT_TRUE(names(error_fields({{"N", 24}}), "N"));
    EXPECT_TRUE(names(error_fields({{"dimension", 4}}), "dimension"));
    EXPECT_TRUE(names(error_fields({{"bogus", 1}}), "bogus"));
    EXPECT_TRUE(names(error_fields({{"sigma", {0.1, -0.2}}}), "sigma"));
    EXPECT_TRUE(names(error_fields({{"h_grid", {0.3, 0.2}}}), "h_grid"));
    auto two = error_fields({{"epsilon", 0.2}, {"dt", -1.0}});
    EXPECT_TRUE(names(two, "epsilon"));
    EXPECT_TRUE(names(two, "dt"));
}

TEST(Config, RoundTrip) {
    json j{{"dimension", 2},     {"N", 16},       {"n", 4},           {"T", 0.25},
           {"dt", 0.005},        {"sigma", {0.1, 0.2}}, {"replicas", 300}, {"h_grid", {0.5, 1.0, 2.0}},
           {"master_seed", 42},  {"statistic", "xi"}};
    auto c = parse_config(j);
    auto back = parse_config(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(back.sigma, (std::vector<double>{0.1, 0.2}));
    EXPECT_EQ(back.statistic, "xi");
    EXPECT_TRUE(config_schema().contains("properties"));
}

TEST(Config, LoadFromFile) {
    auto d = scratch("load");
    std::ofstream(d / "c.json") << R"({"N": 8, "n": 2})";
    EXPECT_EQ(load_config(d / "c.json").N, 8);
    std::ofstream(d / "bad.json") << "{ not json";
    EXPECT_THROW(load_config(d / "bad.json"), std::exception);
}

TEST(Scenario, EquilibriumIsStable) {
    CoefficientConfig cc;
    cc.gamma = TimePoly::constant(3.0);
    auto s = make_scenario(cc, 1.0);
    EXPECT_TRUE(s.coeffs.stable());
    // quartic fit of a path that relaxes quickly towards sqrt(3)
    EXPECT_NEAR(s.phibar(0.0), 2.0, 2e-2);
    for (double t = 0; t <= 1.0; t += 0.1) EXPECT_GT(s.phibar(t), 1.0);
}

TEST(Grid, GradedTowardsT) {
    auto tg = graded_grid(1.0, 1e-3, 1.5, 0.1);
    EXPECT_DOUBLE_EQ(tg.T(), 1.0);
    EXPECT_NEAR(tg.dt(tg.steps() - 1), 1e-3, 1e-12);
    for (int j = 0; j < tg.steps(); ++j) {
        EXPECT_GT(tg.dt(j), 0.0);
        EXPECT_LE(tg.dt(j), 0.1 + 1e-12);
    }
}

TEST(Fit, LinearExact) {
    auto f = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_NEAR(f.intercept, 1.0, 1e-12);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(Output, Sha256KnownVector) {
    auto d = scratch("sha");
    std::ofstream(d / "abc", std::ios::binary) << "abc";
    EXPECT_EQ(sha256_file(d / "abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Output, FieldDumpLayout) {
    auto d = scratch("dump");
    TorusGrid g(2, 4);
    RealField f(g);
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = 0.5 * i;
    write_field_dump(d / "f.bin", f, {{"t", 0.1}});
    EXPECT_EQ(fs::file_size(d / "f.bin"), 16 * sizeof(double));
    std::ifstream in(d / "f.bin", std::ios::binary);
    double x[16];
    in.read(reinterpret_cast<char*>(x), sizeof x);
    EXPECT_EQ(x[5], 2.5);
}

TEST(Commands, VerifyPassesAndCorruptionFails) {
    auto c = parse_config(json::object());
    RunOptions o;
    o.out = scratch("verify");
    auto r = cmd_verify(c, o);
    EXPECT_TRUE(r.ok) << r.report.dump(2);
    o.corrupt_partition = true;
    auto bad = cmd_verify(c, o);
    EXPECT_FALSE(bad.ok);
}

TEST(Commands, TailOutputsIndependentOfThreads) {
    json j{{"dimension", 1}, {"N", 8},         {"n", 4},     {"T", 0.05},
           {"dt", 0.01},     {"sigma", {0.2}}, {"replicas", 200}, {"master_seed", 5}};
    auto c = parse_config(j);
    std::string digest[2];
    for (int k = 0; k < 2; ++k) {
        RunOptions o;
        o.threads = 1 + 2 * k;
        o.out = scratch("tail" + std::to_string(k));
        auto r = cmd_tail(c, o);
        finalize(r, o);
        ASSERT_TRUE(fs::exists(o.out / "manifest.json"));
        std::string acc;
        for (const auto& f : r.manifest.files)
            if (f.extension() == ".csv") acc += sha256_file(f);
        ASSERT_FALSE(acc.empty());
        digest[k] = acc;
    }
    EXPECT_EQ(digest[0], digest[1]);
}
