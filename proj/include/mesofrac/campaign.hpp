/*
 * campaign.hpp — batch orchestration: flat key=value config, deterministic
 * plans keyed by (master seed, purpose, index), parallel execution with
 * atomic artifact writes, manifest-based resume, and summary statistics.
 */
#pragma once

#include "mesofrac/postproc.hpp"
#include "mesofrac/randomfield.hpp"
#include "mesofrac/scenario.hpp"
#include "mesofrac/solver.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mesofrac {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// "[section] key = value" file; keys are stored as "section.key"
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text);

// one correlation-length cell: a regime plus the length when finite
struct EllRho {
    CorrelationMode mode = CorrelationMode::Zero;
    double value = 0.0; // mm
    std::string label() const;
};
EllRho parse_ell_rho(const std::string& token); // "0", "inf" or a length in mm

struct CampaignConfig {
    Scenario scenario;
    MaterialParams material;
    SieveSpec sieve;
    int pack_max_trials = 20000;
    double area_epsilon = 1e-6;

    std::vector<EllRho> ell_rho;
    std::vector<double> delta_h;
    ScalingRule scaling = ScalingRule::FtAndGt2;
    double delta_source = 0.14; // fields generated here, rescaled elsewhere
    double h_floor = 1e-3;
    int n_sim = 20;
    bool deterministic_cell = true; // always run the h = 1 reference batch

    StepControl control;

    double fpz_bin = 3.0;
    double fpz_t = 0.95;
    double crack_strip_offset = 5.0; // mm above the bottom / notch tip
    double crack_strip_depth = 10.0;
    double crack_bin = 10.0;

    std::map<std::string, std::string> raw; // echoed into the manifest
};

CampaignConfig load_campaign_config(const std::map<std::string, std::string>& kv);

struct RunKey {
    std::string cell;  // "det" or "<ell>/<delta>"
    int index = 0;     // 1-based realization index
    std::string dir() const;
};

struct CampaignPlan {
    CampaignConfig config;
    std::uint64_t master_seed = 0;
    int n_mesostructures = 0;
    int n_field_realizations = 0; // finite/zero cells, generated at delta_source
    std::vector<RunKey> runs;
    std::string hash; // deterministic digest of the plan
};

CampaignPlan plan_campaign(const CampaignConfig& cfg, std::uint64_t master_seed);

struct RunOutcome {
    RunKey key;
    bool ok = false;          // artifact produced and simulation completed
    bool withdrawn = false;   // simulation ran but did not converge/terminate
    bool skipped = false;     // resume hit
    double peak_P = 0, peak_cmod = 0;
    std::string mesostructure_hash;
    std::string error;
};

struct CampaignSummary {
    std::vector<RunOutcome> outcomes;
    int executed = 0, skipped = 0, withdrawn = 0, failed = 0;
};

// generate writes mesostructures only; run executes simulations (and anything
// missing upstream); both honor --resume by skipping complete artifacts
CampaignSummary generate_mesostructures(const CampaignPlan& plan, const std::string& out_dir,
                                        int jobs, bool resume);
CampaignSummary execute_campaign(const CampaignPlan& plan, const std::string& out_dir, int jobs,
                                 bool resume);

// reads run artifacts and writes peaks/stats/fpz/histogram tables under out_dir
int postprocess_campaign(const CampaignPlan& plan, const std::string& out_dir);

// calibration entry: targets either from config keys or a measured record
CalibrationResult calibrate_campaign(const CampaignConfig& cfg, std::uint64_t master_seed,
                                     const CalibrationTargets& targets, double ft_start,
                                     double Gt_start, const std::string& out_dir);

// helpers shared with tests
std::string atomic_write(const std::string& path, const std::string& content);
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

} // namespace mesofrac
