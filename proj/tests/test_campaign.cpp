#include "mesofrac/campaign.hpp"

#include "mesofrac/mesostructure.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <unistd.h>

using namespace mesofrac;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() /
                       ("mesofrac_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE_MESSAGE(bool(is), "missing file ", path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string error_text(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "(no error)";
}

} // namespace

TEST_SUITE_BEGIN("campaign");

TEST_CASE("config text parses sections, comments and whitespace") {
    const auto kv = parse_config_text("# leading comment\n"
                                      "[alpha]\n"
                                      "  x = 1 \n"
                                      "y = two words   ; trailing comment\n"
                                      "\n"
                                      "[beta]\n"
                                      "x=3\n");
    CHECK(kv.size() == 3);
    CHECK(kv.at("alpha.x") == "1");
    CHECK(kv.at("alpha.y") == "two words");
    CHECK(kv.at("beta.x") == "3");
}

TEST_CASE("config text rejects malformed input with line numbers") {
    CHECK(error_text([] { parse_config_text("x = 1\n"); }) ==
          "line 1: key before any [section]");
    CHECK(error_text([] { parse_config_text("[a\n"); }) == "line 1: unterminated section");
    CHECK(error_text([] { parse_config_text("[]\n"); }) == "line 1: empty section name");
    CHECK(error_text([] { parse_config_text("[a]\nx = 1\nx = 2\n"); }) ==
          "line 3: duplicate key 'a.x'");
    CHECK(error_text([] { parse_config_text("[a]\n= 5\n"); }) == "line 2: empty key");
    CHECK(error_text([] { parse_config_text("[a]\nno value here\n"); }) ==
          "line 2: expected key = value");
    CHECK_THROWS_AS(parse_config_file("/nonexistent/path.ini"), ConfigError);
}

TEST_CASE("correlation length tokens") {
    const EllRho zero = parse_ell_rho("0");
    CHECK(zero.mode == CorrelationMode::Zero);
    CHECK(zero.label() == "ell0");

    const EllRho inf = parse_ell_rho("inf");
    CHECK(inf.mode == CorrelationMode::Infinite);
    CHECK(inf.label() == "ellinf");

    const EllRho fin = parse_ell_rho("40");
    CHECK(fin.mode == CorrelationMode::Finite);
    CHECK(fin.value == 40.0);
    CHECK(fin.label() == "ell40");
    CHECK(parse_ell_rho("2.5").label() == "ell2.5");

    CHECK_THROWS_AS(parse_ell_rho("forty"), ConfigError);
    CHECK_THROWS_AS(parse_ell_rho("-1"), ConfigError);
    CHECK_THROWS_AS(parse_ell_rho("0.0"), ConfigError); // only the literal "0" is the limit case
}

TEST_CASE("config resolution and validation") {
    SUBCASE("defaults") {
        const CampaignConfig cfg = load_campaign_config({});
        CHECK(cfg.scenario.kind == ScenarioKind::BendUnnotched);
        CHECK(cfg.scenario.scale == 0.5);
        CHECK(cfg.scenario.length > 0.0); // geometry resolved even without keys
        CHECK(cfg.n_sim == 20);
        CHECK(cfg.deterministic_cell);
        CHECK(cfg.scaling == ScalingRule::FtAndGt2);
        // 80 % total aggregate content, restricted to the simulated sieve band
        CHECK(cfg.sieve.volume_fraction ==
              doctest::Approx(0.8 * coarse_share(cfg.sieve)).epsilon(1e-13));
    }
    SUBCASE("explicit keys land in the right fields") {
        const CampaignConfig cfg = load_campaign_config({{"scenario.kind", "tension-rotating"},
                                                         {"scenario.scale", "0.35"},
                                                         {"material.ft", "3.1"},
                                                         {"sieve.volume_fraction", "0.25"},
                                                         {"field.ell_rho", "inf, 40, 0"},
                                                         {"field.delta_h", "0.14,0.28"},
                                                         {"field.scaling", "ft"},
                                                         {"campaign.n_sim", "5"},
                                                         {"campaign.deterministic_cell", "off"},
                                                         {"control.cmod_initial", "2e-4"},
                                                         {"post.fpz_bin", "4"}});
        CHECK(cfg.scenario.kind == ScenarioKind::TensionRotating);
        CHECK(cfg.scenario.scale == 0.35);
        CHECK(cfg.material.ft == 3.1);
        CHECK(cfg.sieve.volume_fraction == 0.25);
        REQUIRE(cfg.ell_rho.size() == 3);
        CHECK(cfg.ell_rho[0].mode == CorrelationMode::Infinite);
        CHECK(cfg.ell_rho[1].value == 40.0);
        CHECK(cfg.ell_rho[2].mode == CorrelationMode::Zero);
        CHECK(cfg.delta_h == std::vector<double>{0.14, 0.28});
        CHECK(cfg.scaling == ScalingRule::FtOnly);
        CHECK(cfg.n_sim == 5);
        CHECK_FALSE(cfg.deterministic_cell);
        CHECK(cfg.control.cmod_initial == 2e-4);
        CHECK(cfg.fpz_bin == 4.0);
        CHECK(cfg.raw.at("material.ft") == "3.1");
    }
    SUBCASE("total fraction routes through the sieve band share") {
        const CampaignConfig cfg = load_campaign_config({{"sieve.total_fraction", "0.5"}});
        CHECK(cfg.sieve.volume_fraction ==
              doctest::Approx(0.5 * coarse_share(cfg.sieve)).epsilon(1e-13));
    }
    SUBCASE("rejections") {
        CHECK_THROWS_AS(load_campaign_config({{"unknown.key", "1"}}), ConfigError);
        CHECK_THROWS_AS(load_campaign_config({{"scenario.kind", "torsion"}}), ConfigError);
        CHECK_THROWS_AS(load_campaign_config({{"scenario.scale", "abc"}}), ConfigError);
        CHECK_THROWS_AS(load_campaign_config({{"campaign.n_sim", "0"}}), ConfigError);
        CHECK_THROWS_AS(load_campaign_config({{"field.scaling", "gt"}}), ConfigError);
        CHECK_THROWS_AS(load_campaign_config({{"field.delta_h", "0.14,-0.1"}}), ConfigError);
        CHECK_THROWS_AS(load_campaign_config({{"sieve.volume_fraction", "0.2"},
                                              {"sieve.total_fraction", "0.5"}}),
                        ConfigError);
    }
}

TEST_CASE("plan enumerates cells and realizations deterministically") {
    CampaignConfig cfg = load_campaign_config({{"field.ell_rho", "inf,40,0"},
                                               {"field.delta_h", "0.14,0.28"},
                                               {"campaign.n_sim", "5"}});
    const CampaignPlan plan = plan_campaign(cfg, 123);

    CHECK(plan.n_mesostructures == 5);
    CHECK(plan.n_field_realizations == 10); // infinite cells draw no spatial field
    REQUIRE(plan.runs.size() == 5 + 3 * 2 * 5);

    CHECK(plan.runs[0].cell == "det");
    CHECK(plan.runs[0].dir() == "det/run001");
    CHECK(plan.runs[4].dir() == "det/run005");
    CHECK(plan.runs[5].cell == "ellinf/d0.14");
    CHECK(plan.runs[5].dir() == "ellinf/d0.14/run001");
    CHECK(plan.runs[10].cell == "ellinf/d0.28");
    CHECK(plan.runs[15].cell == "ell40/d0.14");
    CHECK(plan.runs.back().dir() == "ell0/d0.28/run005");

    // the digest pins seed and every resolved parameter
    CHECK(plan_campaign(cfg, 123).hash == plan.hash);
    CHECK(plan_campaign(cfg, 124).hash != plan.hash);
    CampaignConfig tweaked = cfg;
    tweaked.control.tol_r *= 10.0;
    CHECK(plan_campaign(tweaked, 123).hash != plan.hash);

    cfg.deterministic_cell = false;
    CHECK(plan_campaign(cfg, 123).runs.size() == 3 * 2 * 5);
}

TEST_CASE("hashing primitives") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0) == "0000000000000000");
    CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}

TEST_CASE("atomic write creates parents and leaves no droppings") {
    const std::string dir = fresh_dir("atomic");
    const std::string path = dir + "/a/b/c.txt";
    CHECK(atomic_write(path, "hello\n") == path);
    CHECK(slurp(path) == "hello\n");
    CHECK_FALSE(fs::exists(path + ".tmp"));
    atomic_write(path, "replaced\n");
    CHECK(slurp(path) == "replaced\n");
    fs::remove_all(dir);
}

TEST_CASE("mesostructure generation runs, resumes and is reproducible") {
    const CampaignConfig cfg = load_campaign_config({{"scenario.kind", "tension-fixed"},
                                                     {"scenario.scale", "0.35"},
                                                     {"campaign.n_sim", "2"}});
    const CampaignPlan plan = plan_campaign(cfg, 7);

    const std::string dir_a = fresh_dir("meso_a");
    const CampaignSummary first = generate_mesostructures(plan, dir_a, 2, false);
    CHECK(first.executed == 2);
    CHECK(first.failed == 0);
    for (const auto& o : first.outcomes) {
        CHECK(o.ok);
        CHECK(o.key.cell == "meso");
        CHECK_FALSE(o.mesostructure_hash.empty());
    }
    CHECK(fs::exists(dir_a + "/meso/m001.txt"));
    CHECK(fs::exists(dir_a + "/meso/m002.txt"));

    const CampaignSummary again = generate_mesostructures(plan, dir_a, 1, true);
    CHECK(again.skipped == 2);
    CHECK(again.executed == 0);

    const std::string dir_b = fresh_dir("meso_b");
    generate_mesostructures(plan, dir_b, 1, false);
    CHECK(slurp(dir_a + "/meso/m001.txt") == slurp(dir_b + "/meso/m001.txt"));
    CHECK(slurp(dir_a + "/meso/m002.txt") == slurp(dir_b + "/meso/m002.txt"));
    CHECK(slurp(dir_a + "/meso/m001.txt") != slurp(dir_a + "/meso/m002.txt"));

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("campaign executes, resumes, parallelizes and postprocesses") {
    const auto kv = parse_config_text("[scenario]\n"
                                      "kind = tension-fixed\n"
                                      "scale = 0.35\n"
                                      "[campaign]\n"
                                      "n_sim = 2\n"
                                      "[field]\n"
                                      "ell_rho = 0\n"
                                      "delta_h = 0.14\n");
    const CampaignConfig cfg = load_campaign_config(kv);
    const CampaignPlan plan = plan_campaign(cfg, 7);
    REQUIRE(plan.runs.size() == 4);

    const std::string dir_a = fresh_dir("camp_a");
    const CampaignSummary run = execute_campaign(plan, dir_a, 1, false);
    CHECK(run.executed == 4);
    CHECK(run.failed == 0);
    CHECK(run.skipped == 0);
    for (const auto& o : run.outcomes) {
        CAPTURE(o.key.dir());
        CAPTURE(o.error);
        CHECK(o.ok);
        CHECK(o.peak_P > 0.0);
        CHECK_FALSE(o.mesostructure_hash.empty());
    }

    CHECK(fs::exists(dir_a + "/manifest.json"));
    for (const auto& r : plan.runs) {
        const std::string run_dir = dir_a + "/runs/" + r.dir();
        CHECK(fs::exists(run_dir + "/steps.csv"));
        CHECK(fs::exists(run_dir + "/dissip.bin"));
        const std::string meta = slurp(run_dir + "/meta.json");
        CHECK(meta.find("\"complete\": true") != std::string::npos);
    }
    CHECK(slurp(dir_a + "/manifest.json").find(plan.hash) != std::string::npos);

    // resume skips complete runs and echoes their record
    const CampaignSummary res = execute_campaign(plan, dir_a, 1, true);
    CHECK(res.skipped == 4);
    CHECK(res.executed == 0);
    for (std::size_t k = 0; k < res.outcomes.size(); ++k)
        CHECK(res.outcomes[k].peak_P == doctest::Approx(run.outcomes[k].peak_P).epsilon(1e-14));

    // a differently planned campaign refuses the directory
    const CampaignPlan other = plan_campaign(cfg, 8);
    CHECK(other.hash != plan.hash);
    CHECK_THROWS_AS(execute_campaign(other, dir_a, 1, true), ConfigError);

    // parallel execution writes byte-identical artifacts
    const std::string dir_b = fresh_dir("camp_b");
    const CampaignSummary par = execute_campaign(plan, dir_b, 2, false);
    CHECK(par.executed == 4);
    for (const auto& r : plan.runs) {
        CAPTURE(r.dir());
        CHECK(slurp(dir_a + "/runs/" + r.dir() + "/steps.csv") ==
              slurp(dir_b + "/runs/" + r.dir() + "/steps.csv"));
        CHECK(slurp(dir_a + "/runs/" + r.dir() + "/dissip.bin") ==
              slurp(dir_b + "/runs/" + r.dir() + "/dissip.bin"));
    }
    CHECK(slurp(dir_a + "/meso/m001.txt") == slurp(dir_b + "/meso/m001.txt"));
    fs::remove_all(dir_b);

    // postprocess writes per-cell tables
    CHECK(postprocess_campaign(plan, dir_a) == 0);
    const std::string stats = slurp(dir_a + "/post/stats.csv");
    CHECK(stats.rfind("cell,n_planned,n_used,n_withdrawn,mean,sd,cov\n", 0) == 0);
    CHECK(stats.find("\ndet,2,2,0,") != std::string::npos);
    CHECK(stats.find("\nell0/d0.14,2,2,0,") != std::string::npos);
    CHECK(fs::exists(dir_a + "/post/peaks_det.csv"));
    CHECK(fs::exists(dir_a + "/post/peaks_ell0_d0.14.csv"));
    CHECK(fs::exists(dir_a + "/post/fpz_det.csv"));
    CHECK(fs::exists(dir_a + "/post/fpz_contours_det.csv"));
    CHECK(fs::exists(dir_a + "/post/crack_det.csv"));
    CHECK(fs::exists(dir_a + "/post/crack_ell0_d0.14.csv"));

    fs::remove_all(dir_a);
}

TEST_SUITE_END();
