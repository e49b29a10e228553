#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sburgers/harness.hpp"

using namespace sburgers;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sburgers_test_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig small_config() {
    RunConfig c;
    c.n_cells = 64;
    c.dt = 4e-3;
    c.T_back = 2.0;
    return c;
}

} // namespace

TEST(Config, JsonRoundTrip) {
    RunConfig c = small_config();
    c.eta = 0.25;
    c.seeds = {3, 5, 8};
    c.eps_list = {0.2, 0.1};
    c.forcing = "sine_basic";
    const auto back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    c.n_cells = 128;
    EXPECT_NE(config_hash(back), config_hash(c));
}

TEST(Config, MissingFieldsKeepDefaults) {
    const auto c = config_from_json(nlohmann::json{{"n_cells", 32}});
    EXPECT_EQ(c.n_cells, 32);
    EXPECT_EQ(to_json(c)["dt"], to_json(RunConfig{})["dt"]);
    EXPECT_FALSE(c.eta.has_value());
}

TEST(Config, RejectsBadFields) {
    auto bad = [](nlohmann::json j) { EXPECT_THROW(config_from_json(j), ConfigError) << j.dump(); };
    bad({{"n_cellz", 64}});
    bad({{"n_cells", "many"}});
    bad({{"n_cells", 4}});
    bad({{"dt", 0.0}});
    bad({{"dt", 0.5}});
    bad({{"experiment", "nope"}});
    bad({{"dp_mode", "upwind"}});
    bad({{"eps_list", {0.05, 0.1}}});
    bad({{"delta_list", {4.0, 8.0, 2.0}}});
    bad({{"delta_list", {4.0, 2.0}}});
    bad({{"seeds", nlohmann::json::array()}});
    bad({{"forcing", "no_such_preset"}});
    bad({{"amplitude_scale", -1.0}});
    bad({{"eta", -0.1}});
    bad({{"workers", 0}});
    EXPECT_THROW(config_from_json(nlohmann::json::array()), ConfigError);
}

TEST(Config, FieldNameInMessage) {
    try {
        config_from_json({{"tau", -1.0}});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("'tau'"), std::string::npos);
    }
}

TEST(Config, LoadFromFile) {
    const auto dir = scratch_dir("load");
    fs::create_directories(dir);
    {
        std::ofstream(dir / "ok.json") << R"({"experiment": "lyapunov", "seeds": [4]})";
        std::ofstream(dir / "broken.json") << "{ not json";
    }
    const auto c = load_config(dir / "ok.json");
    EXPECT_EQ(c.experiment, "lyapunov");
    EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{4});
    EXPECT_THROW(load_config(dir / "broken.json"), ConfigError);
    EXPECT_THROW(load_config(dir / "absent.json"), ConfigError);
}

TEST(Config, InlineForcingText) {
    RunConfig c = small_config();
    c.forcing = to_text(preset_spec("ekms3"));
    c.amplitude_scale = 0.5;
    EXPECT_EQ(c.forcing_spec(), scaled(preset_spec("ekms3"), 0.5));
}

TEST(Realization, CoversRequestedWindow) {
    RunConfig c = small_config();
    c.T_forward = 3.0;
    const auto r = make_realization(c, 2, 1.0);
    EXPECT_EQ(r->first_step(), -c.steps(3.0));
    EXPECT_EQ(r->end_step(), c.steps(3.0));
}

TEST(ParallelFor, VisitsAllAndRethrows) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(hits.size(), 3, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 7) throw SolverError("boom");
                              }),
                 SolverError);
}

TEST(Experiment, ZeroForcingProfileIsFlat) {
    RunConfig c = small_config();
    c.forcing = "sine_basic";
    c.amplitude_scale = 0.0;
    c.c = 0.3;
    c.out_dir = scratch_dir("flat").string();
    const auto res = run_experiment(c);
    ASSERT_EQ(res.summary.size(), 1u);
    EXPECT_EQ(res.summary[0]["shock_count"], 0);
    std::istringstream csv(slurp(fs::path(c.out_dir) / "profile/seed_1/profile.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "step,time,cell,x,u,U");
    int rows = 0;
    while (std::getline(csv, line)) {
        const auto u = std::stod(line.substr(0, line.rfind(',')).substr(line.substr(0, line.rfind(',')).rfind(',') + 1));
        EXPECT_NEAR(u, 0.3, 1e-12);
        ++rows;
    }
    EXPECT_EQ(rows, 64);
}

TEST(Experiment, ManifestDescribesRun) {
    RunConfig c = small_config();
    c.out_dir = scratch_dir("manifest").string();
    const auto res = run_experiment(c);
    ASSERT_EQ(res.manifests.size(), 1u);
    const auto m = nlohmann::json::parse(slurp(res.manifests[0]));
    EXPECT_EQ(m["config_hash"], config_hash(c));
    EXPECT_EQ(m["seed"], 1);
    EXPECT_EQ(m["t_origin"], -500);
    EXPECT_EQ(m["code_version"], kCodeVersion);
    for (const auto& f : m["results"]) EXPECT_TRUE(fs::exists(fs::path(c.out_dir) / f.get<std::string>()));
}

TEST(Experiment, OutputsAreDeterministic) {
    for (const std::string exp : {"profile", "mainshock", "lyapunov"}) {
        RunConfig c = small_config();
        c.experiment = exp;
        c.seeds = {1, 2};
        c.T_back = 8.0;
        c.dt = 1e-2;
        c.out_dir = scratch_dir("det_a").string();
        c.workers = 2;
        const auto a = run_experiment(c);
        c.out_dir = scratch_dir("det_b").string();
        c.workers = 1;
        const auto b = run_experiment(c);
        EXPECT_EQ(a.summary, b.summary) << exp;
        const auto ma = nlohmann::json::parse(slurp(a.manifests[0]));
        for (const auto& f : ma["results"]) {
            const auto rel = f.get<std::string>();
            EXPECT_EQ(slurp(fs::path(fs::temp_directory_path() / "sburgers_test_det_a") / rel),
                      slurp(fs::path(fs::temp_directory_path() / "sburgers_test_det_b") / rel))
                << exp << " " << rel;
        }
    }
}

TEST(Ensemble, AggregatesFollowRecords) {
    std::vector<SeedRecord> recs(4);
    for (int i = 0; i < 4; ++i) {
        recs[static_cast<std::size_t>(i)].shock_count = i + 1;
        recs[static_cast<std::size_t>(i)].merged = i % 2 == 0;
        if (i < 3) recs[static_cast<std::size_t>(i)].main_shock_position = 0.1 * i;
    }
    const auto a = aggregate_records(recs);
    EXPECT_EQ(a.at("shock_count").n, 4);
    EXPECT_DOUBLE_EQ(a.at("shock_count").mean, 2.5);
    EXPECT_NEAR(a.at("shock_count").se, std::sqrt(5.0 / 3.0 / 4.0), 1e-14);
    EXPECT_EQ(a.at("main_shock_position").n, 3);
    EXPECT_NEAR(a.at("main_shock_position").mean, 0.1, 1e-15);
    EXPECT_DOUBLE_EQ(a.at("merged").mean, 0.5);
    EXPECT_FALSE(a.contains("lambda"));
    EXPECT_NEAR(a.at("shock_count").upper - a.at("shock_count").mean, 1.959963984540054 * a.at("shock_count").se, 1e-14);
}

TEST(Ensemble, SamplerIsSelfConsistent) {
    RunConfig c = small_config();
    c.seeds = {1};
    const auto e = invariant_sampler(c, 8);
    ASSERT_EQ(e.records.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(e.records[i].seed, i + 1);
    EXPECT_EQ(e.aggregates.at("shock_count").n, 8);
    EXPECT_EQ(e.to_json()["aggregates"], nlohmann::json(e.to_json()["aggregates"]));
    const auto again = aggregate_records(e.records);
    EXPECT_DOUBLE_EQ(again.at("var_u").mean, e.aggregates.at("var_u").mean);
    EXPECT_LT(e.max_invariance_l1, 1e-12);
    EXPECT_THROW(invariant_sampler(c, 7), ConfigError);
}

TEST(Ensemble, InvarianceIdentityHolds) {
    RunConfig c = small_config();
    for (const std::string m : {"semi_lagrangian", "lattice"}) {
        c.dp_mode = m;
        const auto r = make_realization(c, 6);
        EXPECT_LT(invariance_identity(r, c, 123), 1e-12) << m;
    }
    EXPECT_THROW(invariance_identity(make_realization(c, 6), c, 0), ConfigError);
}

TEST(Ergodicity, ZeroForcingAgreesExactly) {
    RunConfig c;
    c.forcing = "sine_basic";
    c.amplitude_scale = 0.0;
    c.c = 0.2;
    c.n_cells = 32;
    c.dt = 0.05;
    c.burn_in = 1.0;
    const auto rep = ergodicity_check(c, 32.0, 32);
    EXPECT_TRUE(rep.passes);
    EXPECT_FALSE(rep.control_inflated);
    for (const auto& o : rep.observables) EXPECT_LT(std::abs(o.z), 0.1) << o.name;
    EXPECT_NEAR(rep.observables[0].time_average, 0.04, 1e-12);
    EXPECT_THROW(ergodicity_check(c, 16.0, 32), ConfigError);
    EXPECT_THROW(ergodicity_check(c, 32.0, 16), ConfigError);
}

TEST(Ergodicity, ZScoreEdgeCases) {
    EXPECT_EQ(z_score(1.0, 0.0, 1.0, 0.0), 0.0);
    EXPECT_LT(z_score(1.0, 0.0, 2.0, 0.0), -1e9);
    EXPECT_LT(std::abs(z_score(0.04, 0.0, 0.04 + 6e-16, 0.0)), 0.1);
    EXPECT_NEAR(z_score(1.0, 0.3, 0.5, 0.4), 1.0, 1e-15);
}

TEST(Mollify, RejectsBadDeltaLists) {
    RunConfig c = small_config();
    EXPECT_THROW(mollification_convergence(c, {4.0, 2.0}), ConfigError);
    EXPECT_THROW(mollification_convergence(c, {4.0, 2.0, 0.5}), ConfigError);
    EXPECT_THROW(mollification_convergence(c, {2.0, 4.0, 8.0}), ConfigError);
}

TEST(Mollify, ErrorShrinksWithWidth) {
    RunConfig c = small_config();
    c.seeds = {1, 2};
    const auto t = mollification_convergence(c, {16.0, 8.0, 4.0});
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_NEAR(t.rows[0].delta, 16 * c.dt, 1e-15);
    EXPECT_GT(t.rows[0].sup_error, t.rows[2].sup_error);
    EXPECT_GT(t.exponent, 0.0);
}
