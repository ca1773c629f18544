/*
 * mesofrac command-line driver.
 *
 *   mesofrac generate  --config c.ini --out dir [--seed N] [--jobs N] [--resume]
 *   mesofrac run       --config c.ini --out dir [--seed N] [--jobs N] [--resume]
 *   mesofrac post      --config c.ini --out dir [--seed N]
 *   mesofrac calibrate --config c.ini --out dir --peak P --area A [options]
 *
 * Exit codes: 0 success, 1 partial results (failed or withdrawn work units,
 * incomplete cells), 2 configuration errors.
 */
#include "mesofrac/campaign.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 2024;
    int jobs = 1;
    bool resume = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_jobs) {
    cmd->add_option("--config", a.config_path, "campaign config file")->required();
    cmd->add_option("--out", a.out_dir, "output directory")->required();
    cmd->add_option("--seed", a.seed, "master seed");
    if (with_jobs) {
        cmd->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);
        cmd->add_flag("--resume", a.resume, "skip work units with complete artifacts");
    }
}

mesofrac::CampaignPlan make_plan(const CommonArgs& a) {
    const auto kv = mesofrac::parse_config_file(a.config_path);
    const auto cfg = mesofrac::load_campaign_config(kv);
    return mesofrac::plan_campaign(cfg, a.seed);
}

int report(const char* phase, const mesofrac::CampaignSummary& s) {
    std::printf("%s: executed %d, skipped %d, withdrawn %d, failed %d\n", phase, s.executed,
                s.skipped, s.withdrawn, s.failed);
    for (const auto& o : s.outcomes)
        if (!o.ok && !o.skipped)
            std::fprintf(stderr, "  %s/%d failed: %s\n", o.key.cell.c_str(), o.key.index,
                         o.error.c_str());
    return s.failed > 0 ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"discrete mesoscale fracture batches"};
    app.require_subcommand(1);

    CommonArgs gen_args, run_args, post_args, cal_args;
    double target_peak = 0, target_area = 0, ft_start = 2.0, gt_start = 0.025;

    auto* gen = app.add_subcommand("generate", "generate the shared mesostructures");
    add_common(gen, gen_args, true);

    auto* run = app.add_subcommand("run", "execute the planned simulations");
    add_common(run, run_args, true);

    auto* post = app.add_subcommand("post", "collect statistics and maps from run artifacts");
    add_common(post, post_args, false);

    auto* cal = app.add_subcommand("calibrate", "fit ft and Gt to a measured peak and area");
    add_common(cal, cal_args, false);
    cal->add_option("--peak", target_peak, "target peak load, N")->required();
    cal->add_option("--area", target_area, "target area under the load-opening record, N mm")
        ->required();
    cal->add_option("--ft-start", ft_start, "tensile strength start value, MPa");
    cal->add_option("--gt-start", gt_start, "fracture energy start value, N/mm");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            const auto plan = make_plan(gen_args);
            const auto s = mesofrac::generate_mesostructures(plan, gen_args.out_dir,
                                                             gen_args.jobs, gen_args.resume);
            return report("generate", s);
        }
        if (run->parsed()) {
            const auto plan = make_plan(run_args);
            const auto s =
                mesofrac::execute_campaign(plan, run_args.out_dir, run_args.jobs, run_args.resume);
            return report("run", s);
        }
        if (post->parsed()) {
            const auto plan = make_plan(post_args);
            const int incomplete = mesofrac::postprocess_campaign(plan, post_args.out_dir);
            std::printf("post: %d incomplete cell%s\n", incomplete, incomplete == 1 ? "" : "s");
            return incomplete > 0 ? 1 : 0;
        }
        if (cal->parsed()) {
            const auto kv = mesofrac::parse_config_file(cal_args.config_path);
            const auto cfg = mesofrac::load_campaign_config(kv);
            const auto r = mesofrac::calibrate_campaign(
                cfg, cal_args.seed, {target_peak, target_area}, ft_start, gt_start,
                cal_args.out_dir);
            std::printf("calibrate: ft %.6g MPa, Gt %.6g N/mm, objective %.3e, %d evaluations%s\n",
                        r.ft, r.Gt, r.objective, r.evaluations,
                        r.converged ? "" : " (not converged)");
            return r.converged ? 0 : 1;
        }
    } catch (const mesofrac::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
