/*
 * campaign.cpp — config parsing, planning, parallel execution, artifacts.
 *
 * Artifact layout under the output directory:
 *   manifest.json              plan digest, echoed config
 *   meso/m001.txt ...          shared mesostructures, one per realization index
 *   runs/<cell>/run001/        steps.csv, dissip.bin, meta.json (completion marker)
 *   post/                      stats.csv, peaks_*, fpz_*, crack_* tables
 *
 * meta.json is written last and atomically, so its presence means the run's
 * other artifacts are complete; resume keys on it alone.
 */
#include "mesofrac/campaign.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mesofrac {

// ---- config parsing ---------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + v + "' is not a number");
    }
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key before any [section]");
        const std::string key = section + "." + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (trim(line.substr(0, eq)).empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, value).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return out;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

EllRho parse_ell_rho(const std::string& token) {
    EllRho e;
    if (token == "0") {
        e.mode = CorrelationMode::Zero;
        return e;
    }
    if (token == "inf") {
        e.mode = CorrelationMode::Infinite;
        return e;
    }
    const double v = to_double("field.ell_rho", token);
    if (!(v > 0.0)) throw ConfigError("field.ell_rho entries must be positive, 0 or inf");
    e.mode = CorrelationMode::Finite;
    e.value = v;
    return e;
}

std::string EllRho::label() const {
    switch (mode) {
    case CorrelationMode::Zero: return "ell0";
    case CorrelationMode::Infinite: return "ellinf";
    case CorrelationMode::Finite: return "ell" + fmt_g(value);
    }
    return "ell?";
}

CampaignConfig load_campaign_config(const std::map<std::string, std::string>& kv) {
    CampaignConfig cfg;
    ScenarioKind kind = cfg.scenario.kind;
    double scale = cfg.scenario.scale;
    std::optional<double> volume_fraction, total_fraction;

    for (const auto& [key, v] : kv) {
        if (key == "scenario.kind") {
            const auto k = parse_scenario(v);
            if (!k) throw ConfigError("unknown scenario '" + v + "'");
            kind = *k;
        } else if (key == "scenario.scale") {
            scale = to_double(key, v);
            if (!(scale > 0.0)) throw ConfigError("scenario.scale must be positive");
        } else if (key == "material.E0") {
            cfg.material.E0 = to_double(key, v);
        } else if (key == "material.alpha") {
            cfg.material.alpha = to_double(key, v);
        } else if (key == "material.ft") {
            cfg.material.ft = to_double(key, v);
        } else if (key == "material.Gt") {
            cfg.material.Gt = to_double(key, v);
        } else if (key == "sieve.d_min") {
            cfg.sieve.d_min = to_double(key, v);
        } else if (key == "sieve.d_max") {
            cfg.sieve.d_max = to_double(key, v);
        } else if (key == "sieve.exponent") {
            cfg.sieve.exponent = to_double(key, v);
        } else if (key == "sieve.volume_fraction") {
            volume_fraction = to_double(key, v);
        } else if (key == "sieve.total_fraction") {
            total_fraction = to_double(key, v);
        } else if (key == "packing.max_trials") {
            cfg.pack_max_trials = to_int(key, v);
        } else if (key == "packing.area_epsilon") {
            cfg.area_epsilon = to_double(key, v);
        } else if (key == "field.ell_rho") {
            cfg.ell_rho.clear();
            for (const auto& tok : split_list(v)) cfg.ell_rho.push_back(parse_ell_rho(tok));
            if (cfg.ell_rho.empty()) throw ConfigError("field.ell_rho: empty list");
        } else if (key == "field.delta_h") {
            cfg.delta_h.clear();
            for (const auto& tok : split_list(v)) {
                const double d = to_double(key, tok);
                if (!(d > 0.0)) throw ConfigError("field.delta_h entries must be positive");
                cfg.delta_h.push_back(d);
            }
            if (cfg.delta_h.empty()) throw ConfigError("field.delta_h: empty list");
        } else if (key == "field.scaling") {
            if (v == "ft")
                cfg.scaling = ScalingRule::FtOnly;
            else if (v == "ft-gt")
                cfg.scaling = ScalingRule::FtAndGt;
            else if (v == "ft-gt2")
                cfg.scaling = ScalingRule::FtAndGt2;
            else
                throw ConfigError("field.scaling: expected ft, ft-gt or ft-gt2, got '" + v + "'");
        } else if (key == "field.delta_source") {
            cfg.delta_source = to_double(key, v);
        } else if (key == "field.h_floor") {
            cfg.h_floor = to_double(key, v);
        } else if (key == "campaign.n_sim") {
            cfg.n_sim = to_int(key, v);
            if (cfg.n_sim < 1) throw ConfigError("campaign.n_sim must be at least 1");
        } else if (key == "campaign.deterministic_cell") {
            cfg.deterministic_cell = to_bool(key, v);
        } else if (key == "control.cmod_initial") {
            cfg.control.cmod_initial = to_double(key, v);
        } else if (key == "control.cmod_min") {
            cfg.control.cmod_min = to_double(key, v);
        } else if (key == "control.cmod_max") {
            cfg.control.cmod_max = to_double(key, v);
        } else if (key == "control.tol_r") {
            cfg.control.tol_r = to_double(key, v);
        } else if (key == "control.max_iterations") {
            cfg.control.max_iterations = to_int(key, v);
        } else if (key == "control.refactor_threshold") {
            cfg.control.refactor_threshold = to_double(key, v);
        } else if (key == "control.target_iterations") {
            cfg.control.target_iterations = to_int(key, v);
        } else if (key == "control.allow_relaxed_retry") {
            cfg.control.allow_relaxed_retry = to_bool(key, v);
        } else if (key == "post.fpz_bin") {
            cfg.fpz_bin = to_double(key, v);
        } else if (key == "post.fpz_t") {
            cfg.fpz_t = to_double(key, v);
        } else if (key == "post.crack_strip_offset") {
            cfg.crack_strip_offset = to_double(key, v);
        } else if (key == "post.crack_strip_depth") {
            cfg.crack_strip_depth = to_double(key, v);
        } else if (key == "post.crack_bin") {
            cfg.crack_bin = to_double(key, v);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }

    cfg.scenario = make_scenario(kind, scale);
    if (volume_fraction && total_fraction)
        throw ConfigError("sieve.volume_fraction and sieve.total_fraction are exclusive");
    if (volume_fraction) {
        cfg.sieve.volume_fraction = *volume_fraction;
    } else {
        const double total = total_fraction.value_or(0.8);
        cfg.sieve.volume_fraction = total * coarse_share(cfg.sieve);
    }
    if (!(cfg.sieve.volume_fraction > 0.0) || cfg.sieve.volume_fraction > 1.0)
        throw ConfigError("resolved aggregate volume fraction must lie in (0, 1]");
    cfg.raw = kv;
    return cfg;
}

// ---- planning ---------------------------------------------------------------

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string RunKey::dir() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "run%03d", index);
    return cell + "/" + buf;
}

namespace {

std::string cell_name(const EllRho& ell, double delta) {
    return ell.label() + "/d" + fmt_g(delta);
}

// resolved-parameter digest; independent of comment/whitespace details of the
// source file, sensitive to anything that changes the runs
std::string canonical_plan_text(const CampaignConfig& c, std::uint64_t seed) {
    std::ostringstream os;
    os << "seed=" << hex64(seed) << '\n';
    os << "scenario=" << scenario_name(c.scenario.kind) << ' ' << fmt_g17(c.scenario.scale) << '\n';
    os << "material=" << fmt_g17(c.material.E0) << ' ' << fmt_g17(c.material.alpha) << ' '
       << fmt_g17(c.material.ft) << ' ' << fmt_g17(c.material.Gt) << '\n';
    os << "sieve=" << fmt_g17(c.sieve.d_min) << ' ' << fmt_g17(c.sieve.d_max) << ' '
       << fmt_g17(c.sieve.exponent) << ' ' << fmt_g17(c.sieve.volume_fraction) << '\n';
    os << "packing=" << c.pack_max_trials << ' ' << fmt_g17(c.area_epsilon) << '\n';
    os << "ell=";
    for (const auto& e : c.ell_rho) os << e.label() << ' ';
    os << "\ndelta=";
    for (double d : c.delta_h) os << fmt_g17(d) << ' ';
    os << "\nscaling=" << static_cast<int>(c.scaling) << ' ' << fmt_g17(c.delta_source) << ' '
       << fmt_g17(c.h_floor) << '\n';
    os << "n_sim=" << c.n_sim << ' ' << (c.deterministic_cell ? 1 : 0) << '\n';
    os << "control=" << fmt_g17(c.control.cmod_initial) << ' ' << fmt_g17(c.control.cmod_min)
       << ' ' << fmt_g17(c.control.cmod_max) << ' ' << fmt_g17(c.control.tol_r) << ' '
       << c.control.max_iterations << ' ' << fmt_g17(c.control.refactor_threshold) << ' '
       << c.control.target_iterations << ' ' << (c.control.allow_relaxed_retry ? 1 : 0) << '\n';
    return os.str();
}

} // namespace

CampaignPlan plan_campaign(const CampaignConfig& cfg, std::uint64_t master_seed) {
    CampaignPlan plan;
    plan.config = cfg;
    plan.master_seed = master_seed;
    plan.n_mesostructures = cfg.n_sim;

    int finite_or_zero = 0;
    for (const auto& e : cfg.ell_rho)
        if (e.mode != CorrelationMode::Infinite) ++finite_or_zero;
    plan.n_field_realizations = finite_or_zero * cfg.n_sim;

    if (cfg.deterministic_cell)
        for (int i = 1; i <= cfg.n_sim; ++i) plan.runs.push_back({"det", i});
    for (const auto& ell : cfg.ell_rho)
        for (double delta : cfg.delta_h)
            for (int i = 1; i <= cfg.n_sim; ++i) plan.runs.push_back({cell_name(ell, delta), i});

    std::string digest = canonical_plan_text(cfg, master_seed);
    for (const auto& r : plan.runs) digest += r.dir() + '\n';
    plan.hash = hex64(fnv1a(digest));
    return plan;
}

// ---- artifacts --------------------------------------------------------------

std::string atomic_write(const std::string& path, const std::string& content) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        os << content;
        if (!os.flush()) throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, p);
    return path;
}

namespace {

std::string meso_path(const std::string& out_dir, int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "m%03d.txt", index);
    return out_dir + "/meso/" + buf;
}

void write_manifest(const CampaignPlan& plan, const std::string& out_dir) {
    const std::string path = out_dir + "/manifest.json";
    if (fs::exists(path)) {
        std::ifstream is(path, std::ios::binary);
        json old = json::parse(is, nullptr, false);
        if (!old.is_discarded() && old.value("hash", "") == plan.hash) return;
        if (!old.is_discarded() && old.contains("hash"))
            throw ConfigError("output directory '" + out_dir +
                              "' holds a differently planned campaign (manifest hash mismatch)");
    }
    json j;
    j["format"] = "mesofrac-campaign 1";
    j["hash"] = plan.hash;
    j["seed"] = hex64(plan.master_seed);
    j["n_runs"] = plan.runs.size();
    j["n_mesostructures"] = plan.n_mesostructures;
    j["n_field_realizations"] = plan.n_field_realizations;
    j["config"] = plan.config.raw;
    atomic_write(path, j.dump(2) + "\n");
}

// fixed-slot outcomes let workers write without locking
void run_pool(int jobs, int n_tasks, const std::function<void(int)>& task) {
    if (jobs <= 1 || n_tasks <= 1) {
        for (int i = 0; i < n_tasks; ++i) task(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) task(i);
    };
    std::vector<std::thread> threads;
    const int n_threads = std::min(jobs, n_tasks);
    threads.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

void finish_summary(CampaignSummary& s) {
    for (const auto& o : s.outcomes) {
        if (o.skipped)
            ++s.skipped;
        else if (!o.ok)
            ++s.failed;
        else
            ++s.executed;
        if (o.withdrawn) ++s.withdrawn;
    }
}

// shared lazily built inputs; mesostructure generation is serialized by the
// mutex, which is cheap next to the simulations that consume it
class RunContext {
  public:
    RunContext(const CampaignPlan& plan, const std::string& out_dir)
        : plan_(plan), out_dir_(out_dir) {}

    std::shared_ptr<const Mesostructure> mesostructure(int index, std::string* hash_out) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = meso_.find(index);
        if (it == meso_.end()) {
            const std::string path = meso_path(out_dir_, index);
            std::shared_ptr<Mesostructure> m;
            if (fs::exists(path)) {
                m = std::make_shared<Mesostructure>(load_mesostructure_file(path));
            } else {
                m = std::make_shared<Mesostructure>(generate_mesostructure(
                    meso_config(), plan_.master_seed, static_cast<std::uint64_t>(index)));
                atomic_write(path, dump_mesostructure(*m));
            }
            it = meso_.emplace(index, Entry{m, mesostructure_hash(*m)}).first;
        }
        if (hash_out) *hash_out = it->second.hash;
        return it->second.mesh;
    }

    const GraftedMarginal& marginal(double delta) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = marginal_.find(delta);
        if (it == marginal_.end()) it = marginal_.emplace(delta, GraftedMarginal::build(delta)).first;
        return it->second;
    }

    std::shared_ptr<const CorrelatedGaussian> sampler(double ell) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = sampler_.find(ell);
        if (it == sampler_.end())
            it = sampler_
                     .emplace(ell, std::make_shared<CorrelatedGaussian>(
                                       plan_.config.scenario.domain(), ell))
                     .first;
        return it->second;
    }

    MesoConfig meso_config() const {
        MesoConfig mc;
        mc.sieve = plan_.config.sieve;
        mc.domain = plan_.config.scenario.domain();
        mc.notch = plan_.config.scenario.notch();
        mc.max_trials = plan_.config.pack_max_trials;
        mc.area_epsilon = plan_.config.area_epsilon;
        return mc;
    }

  private:
    struct Entry {
        std::shared_ptr<const Mesostructure> mesh;
        std::string hash;
    };
    const CampaignPlan& plan_;
    std::string out_dir_;
    std::mutex mu_;
    std::map<int, Entry> meso_;
    std::map<double, GraftedMarginal> marginal_;
    std::map<double, std::shared_ptr<const CorrelatedGaussian>> sampler_;
};

// "det" -> nullopt; otherwise the exact (ell, delta) pair the cell was planned
// from, recovered by label so no float goes through text
std::optional<std::pair<EllRho, double>> find_cell_params(const CampaignConfig& cfg,
                                                          const std::string& cell) {
    if (cell == "det") return std::nullopt;
    for (const auto& ell : cfg.ell_rho)
        for (double delta : cfg.delta_h)
            if (cell_name(ell, delta) == cell) return std::make_pair(ell, delta);
    throw ConfigError("cell '" + cell + "' is not part of the campaign");
}

} // namespace

CampaignSummary generate_mesostructures(const CampaignPlan& plan, const std::string& out_dir,
                                        int jobs, bool resume) {
    write_manifest(plan, out_dir);
    CampaignSummary summary;
    summary.outcomes.resize(static_cast<std::size_t>(plan.n_mesostructures));
    RunContext ctx(plan, out_dir);

    run_pool(jobs, plan.n_mesostructures, [&](int t) {
        const int index = t + 1;
        RunOutcome& o = summary.outcomes[static_cast<std::size_t>(t)];
        o.key = {"meso", index};
        try {
            const std::string path = meso_path(out_dir, index);
            if (resume && fs::exists(path)) {
                o.skipped = true;
                o.ok = true;
                return;
            }
            if (!resume && fs::exists(path)) fs::remove(path);
            ctx.mesostructure(index, &o.mesostructure_hash);
            o.ok = true;
        } catch (const std::exception& e) {
            o.error = e.what();
        }
    });
    finish_summary(summary);
    return summary;
}

CampaignSummary execute_campaign(const CampaignPlan& plan, const std::string& out_dir, int jobs,
                                 bool resume) {
    write_manifest(plan, out_dir);
    CampaignSummary summary;
    summary.outcomes.resize(plan.runs.size());
    RunContext ctx(plan, out_dir);
    const CampaignConfig& cfg = plan.config;

    run_pool(jobs, static_cast<int>(plan.runs.size()), [&](int t) {
        const RunKey& key = plan.runs[static_cast<std::size_t>(t)];
        RunOutcome& o = summary.outcomes[static_cast<std::size_t>(t)];
        o.key = key;
        const std::string run_dir = out_dir + "/runs/" + key.dir();
        const std::string meta_file = run_dir + "/meta.json";
        try {
            if (resume && fs::exists(meta_file)) {
                std::ifstream is(meta_file, std::ios::binary);
                json meta = json::parse(is, nullptr, false);
                if (!meta.is_discarded() && meta.value("complete", false)) {
                    o.skipped = true;
                    o.ok = true;
                    o.withdrawn = meta.value("withdrawn", false);
                    o.peak_P = meta.value("peak_P", 0.0);
                    o.peak_cmod = meta.value("peak_cmod", 0.0);
                    o.mesostructure_hash = meta.value("meso_hash", "");
                    return;
                }
            }

            auto mesh = ctx.mesostructure(key.index, &o.mesostructure_hash);
            std::vector<Vec3> points;
            points.reserve(mesh->contacts.size());
            for (const auto& c : mesh->contacts) points.push_back(c.centroid);

            std::optional<FieldRealization> h;
            const auto cell = find_cell_params(cfg, key.cell);
            if (cell) {
                const auto& [ell, delta] = *cell;
                FieldSpec spec;
                spec.mode = ell.mode;
                spec.ell_rho = ell.value;
                spec.n_sim = cfg.n_sim;
                if (ell.mode == CorrelationMode::Infinite) {
                    spec.delta_h = delta;
                    h = sample_field(spec, points, mesh->domain, ctx.marginal(delta),
                                     plan.master_seed, key.index);
                } else {
                    spec.delta_h = cfg.delta_source;
                    const CorrelatedGaussian* sampler = nullptr;
                    std::shared_ptr<const CorrelatedGaussian> keep;
                    if (ell.mode == CorrelationMode::Finite) {
                        keep = ctx.sampler(ell.value);
                        sampler = keep.get();
                    }
                    const FieldRealization src =
                        sample_field(spec, points, mesh->domain, ctx.marginal(cfg.delta_source),
                                     plan.master_seed, key.index, sampler);
                    h = rescale_field(src, delta, cfg.h_floor);
                }
            }

            const Problem problem = build_problem(*mesh, cfg.scenario, cfg.material,
                                                  h ? &*h : nullptr, cfg.scaling);
            const SimulationResult result = run_simulation(problem, cfg.control);

            fs::create_directories(run_dir);
            write_steps_csv(run_dir + "/steps.csv", result.steps);
            write_dissipation_ledger(run_dir + "/dissip.bin", result.steps);

            json meta;
            meta["complete"] = true;
            meta["cell"] = key.cell;
            meta["index"] = key.index;
            meta["status"] = run_status_name(result.status);
            meta["withdrawn"] = result.withdrawn();
            meta["peak_P"] = result.peak_P;
            meta["peak_cmod"] = result.peak_cmod;
            meta["n_steps"] = result.steps.size();
            meta["max_energy_residual"] = result.max_energy_residual;
            meta["meso_hash"] = o.mesostructure_hash;
            atomic_write(meta_file, meta.dump(2) + "\n");

            o.ok = true;
            o.withdrawn = result.withdrawn();
            o.peak_P = result.peak_P;
            o.peak_cmod = result.peak_cmod;
        } catch (const std::exception& e) {
            o.error = e.what();
        }
    });
    finish_summary(summary);
    return summary;
}

// ---- post-processing ----------------------------------------------------------

namespace {

std::string sanitize(const std::string& cell) {
    std::string s = cell;
    std::replace(s.begin(), s.end(), '/', '_');
    return s;
}

} // namespace

int postprocess_campaign(const CampaignPlan& plan, const std::string& out_dir) {
    const CampaignConfig& cfg = plan.config;
    const Box domain = cfg.scenario.domain();

    // plan order, unique cells
    std::vector<std::string> cells;
    for (const auto& r : plan.runs)
        if (std::find(cells.begin(), cells.end(), r.cell) == cells.end()) cells.push_back(r.cell);

    int incomplete_cells = 0;
    std::ostringstream stats;
    stats << "cell,n_planned,n_used,n_withdrawn,mean,sd,cov\n";

    for (const auto& cell : cells) {
        int planned = 0, withdrawn = 0, missing = 0;
        std::vector<double> peaks;
        std::vector<int> usable_indices;
        for (const auto& r : plan.runs) {
            if (r.cell != cell) continue;
            ++planned;
            const std::string meta_file = out_dir + "/runs/" + r.dir() + "/meta.json";
            std::ifstream is(meta_file, std::ios::binary);
            json meta = is ? json::parse(is, nullptr, false) : json(json::value_t::discarded);
            if (meta.is_discarded() || !meta.value("complete", false)) {
                ++missing;
                continue;
            }
            if (meta.value("withdrawn", false)) {
                ++withdrawn;
                continue;
            }
            peaks.push_back(meta.value("peak_P", 0.0));
            usable_indices.push_back(r.index);
        }

        const auto st = peak_stats(peaks, withdrawn);
        if (missing > 0 || !st) ++incomplete_cells;

        stats << cell << ',' << planned << ',' << peaks.size() << ',' << withdrawn << ',';
        if (st)
            stats << fmt_g17(st->mean) << ',' << fmt_g17(st->sd) << ',' << fmt_g17(st->cov);
        else
            stats << "nan,nan,nan";
        stats << '\n';

        std::ostringstream pk;
        pk << "index,peak_P\n";
        for (std::size_t k = 0; k < peaks.size(); ++k)
            pk << usable_indices[k] << ',' << fmt_g17(peaks[k]) << '\n';
        atomic_write(out_dir + "/post/peaks_" + sanitize(cell) + ".csv", pk.str());

        // dissipation maps and crack statistics need the full artifacts
        std::vector<Mesostructure> meshes;
        std::vector<SimulationResult> results;
        meshes.reserve(usable_indices.size());
        results.reserve(usable_indices.size());
        try {
            for (std::size_t k = 0; k < usable_indices.size(); ++k) {
                RunKey rk{cell, usable_indices[k]};
                const std::string run_dir = out_dir + "/runs/" + rk.dir();
                Mesostructure mesh = load_mesostructure_file(meso_path(out_dir, rk.index));
                SimulationResult res;
                res.steps = read_steps_csv(run_dir + "/steps.csv");
                const auto ledgers = read_dissipation_ledger(run_dir + "/dissip.bin");
                if (ledgers.size() != res.steps.size())
                    throw PostprocError("step table and dissipation ledger disagree");
                res.final_states.assign(mesh.contacts.size(), ContactState{});
                for (std::size_t s = 0; s < ledgers.size(); ++s) {
                    res.steps[s].dw = ledgers[s];
                    for (const auto& [id, dv] : ledgers[s]) {
                        if (id < 0 || id >= static_cast<int>(mesh.contacts.size()))
                            throw PostprocError("dissipation ledger names an unknown contact");
                        res.final_states[static_cast<std::size_t>(id)].w_dis += dv;
                    }
                }
                res.status = RunStatus::Completed;
                meshes.push_back(std::move(mesh));
                results.push_back(std::move(res));
            }

            std::vector<SimForFpz> sims;
            for (std::size_t k = 0; k < meshes.size(); ++k)
                sims.push_back({&meshes[k], &results[k]});

            if (!sims.empty()) {
                FpzOptions fo;
                fo.bin = cfg.fpz_bin;
                fo.t_pre = cfg.fpz_t;
                fo.t_post = cfg.fpz_t;
                const FpzResult fpz = aggregate_fpz(sims, domain, fo);
                std::ostringstream grid;
                grid << "# bin=" << fmt_g17(fpz.grid.bin) << " x0=" << fmt_g17(fpz.grid.x0)
                     << " y0=" << fmt_g17(fpz.grid.y0) << " nx=" << fpz.grid.nx
                     << " ny=" << fpz.grid.ny << '\n';
                for (int iy = 0; iy < fpz.grid.ny; ++iy) {
                    for (int ix = 0; ix < fpz.grid.nx; ++ix) {
                        if (ix) grid << ',';
                        grid << fmt_g17(fpz.grid.at(ix, iy));
                    }
                    grid << '\n';
                }
                atomic_write(out_dir + "/post/fpz_" + sanitize(cell) + ".csv", grid.str());

                std::ostringstream contours;
                contours << "level,area\n";
                for (std::size_t k = 0; k < fo.contour_levels.size(); ++k)
                    contours << fmt_g17(fo.contour_levels[k]) << ','
                             << fmt_g17(fpz.contour_areas[k]) << '\n';
                atomic_write(out_dir + "/post/fpz_contours_" + sanitize(cell) + ".csv",
                             contours.str());

                const double strip_y0 =
                    domain.lo.y() + cfg.scenario.notch_depth + cfg.crack_strip_offset;
                const CrackHistogram ch = crack_histogram(sims, strip_y0, cfg.crack_strip_depth,
                                                          cfg.crack_bin, domain);
                std::ostringstream hist;
                hist << "# strip_y0=" << fmt_g17(ch.strip_y0)
                     << " depth=" << fmt_g17(ch.strip_depth) << " bin=" << fmt_g17(ch.bin)
                     << " mean=" << fmt_g17(ch.mean) << " sd=" << fmt_g17(ch.sd) << '\n';
                hist << "x_lo,count\n";
                for (int b = 0; b < ch.nbins; ++b)
                    hist << fmt_g17(ch.x0 + b * ch.bin) << ','
                         << ch.counts[static_cast<std::size_t>(b)] << '\n';
                atomic_write(out_dir + "/post/crack_" + sanitize(cell) + ".csv", hist.str());
            }
        } catch (const std::exception&) {
            // map/histogram artifacts are best-effort; the cell already counts
            // as incomplete when runs are missing, and stats.csv always lands
            if (missing == 0 && st) ++incomplete_cells;
        }
    }

    atomic_write(out_dir + "/post/stats.csv", stats.str());
    return incomplete_cells;
}

// ---- calibration ---------------------------------------------------------------

CalibrationResult calibrate_campaign(const CampaignConfig& cfg, std::uint64_t master_seed,
                                     const CalibrationTargets& targets, double ft_start,
                                     double Gt_start, const std::string& out_dir) {
    MesoConfig mc;
    mc.sieve = cfg.sieve;
    mc.domain = cfg.scenario.domain();
    mc.notch = cfg.scenario.notch();
    mc.max_trials = cfg.pack_max_trials;
    mc.area_epsilon = cfg.area_epsilon;
    const Mesostructure mesh = generate_mesostructure(mc, master_seed, 1);

    std::ostringstream log;
    log << "ft,Gt,peak,area\n";

    CalibrationRunner runner = [&](double ft, double Gt) {
        MaterialParams mat = cfg.material;
        mat.ft = ft;
        mat.Gt = Gt;
        const Problem problem = build_problem(mesh, cfg.scenario, mat);
        const SimulationResult result = run_simulation(problem, cfg.control);
        if (result.withdrawn())
            throw PostprocError(std::string("calibration run ") + run_status_name(result.status));
        CalibrationTargets got;
        got.peak = result.peak_P;
        got.area = area_under_curve(result.steps);
        log << fmt_g17(ft) << ',' << fmt_g17(Gt) << ',' << fmt_g17(got.peak) << ','
            << fmt_g17(got.area) << '\n';
        return got;
    };

    const CalibrationResult out = calibrate(targets, runner, ft_start, Gt_start);
    if (!out_dir.empty()) atomic_write(out_dir + "/calibration.csv", log.str());
    return out;
}

} // namespace mesofrac
