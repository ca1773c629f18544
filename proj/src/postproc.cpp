/*
 * postproc.cpp — statistics, dissipation maps, calibration, writers.
 */
#include "mesofrac/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace mesofrac {

double BinGrid::sum() const { return std::accumulate(w.begin(), w.end(), 0.0); }

double BinGrid::max() const {
    double v = 0.0;
    for (double x : w) v = std::max(v, x);
    return v;
}

std::optional<CellStats> peak_stats(const std::vector<double>& peaks, int n_withdrawn) {
    if (peaks.size() < 2) return std::nullopt;
    CellStats st;
    st.n_used = static_cast<int>(peaks.size());
    st.n_withdrawn = n_withdrawn;
    st.mean = std::accumulate(peaks.begin(), peaks.end(), 0.0) / peaks.size();
    double ss = 0.0;
    for (double p : peaks) ss += (p - st.mean) * (p - st.mean);
    st.sd = std::sqrt(ss / (peaks.size() - 1));
    st.cov = st.mean != 0.0 ? st.sd / st.mean : 0.0;
    return st;
}

double infinite_correlation_cov(double delta_d, double delta_h) {
    return std::sqrt(delta_h * delta_h + delta_d * delta_d * (1.0 + delta_h * delta_h));
}

std::optional<BinGrid> bin_dissipation(const std::vector<Vec3>& centroids,
                                       const std::vector<std::pair<int, double>>& dw,
                                       const Box& domain, double bin, bool normalize) {
    if (!(bin > 0.0)) throw PostprocError("bin size must be positive");
    BinGrid g;
    g.bin = bin;
    g.x0 = domain.lo.x();
    g.y0 = domain.lo.y();
    g.nx = std::max(1, static_cast<int>(std::ceil((domain.hi.x() - domain.lo.x()) / bin)));
    g.ny = std::max(1, static_cast<int>(std::ceil((domain.hi.y() - domain.lo.y()) / bin)));
    g.w.assign(static_cast<std::size_t>(g.nx) * g.ny, 0.0);

    double total = 0.0;
    for (const auto& [k, v] : dw) {
        if (k < 0 || k >= static_cast<int>(centroids.size()))
            throw PostprocError("dissipation increment refers to an unknown contact");
        const Vec3& c = centroids[static_cast<std::size_t>(k)];
        const int ix = static_cast<int>(std::floor((c.x() - g.x0) / bin));
        const int iy = static_cast<int>(std::floor((c.y() - g.y0) / bin));
        if (ix < 0 || iy < 0 || ix >= g.nx || iy >= g.ny) continue;
        g.at(ix, iy) += v;
        total += v;
    }
    if (!(total > 0.0)) return std::nullopt;
    if (normalize)
        for (double& v : g.w) v /= total;
    return g;
}

int select_step(const std::vector<StepRecord>& steps, double t, Regime regime) {
    if (steps.empty()) return -1;
    int peak = 0;
    for (int i = 1; i < static_cast<int>(steps.size()); ++i)
        if (steps[i].P > steps[peak].P) peak = i;
    const double level = t * steps[peak].P;
    if (regime == Regime::PrePeak) {
        for (int i = 0; i <= peak; ++i)
            if (steps[i].P >= level) return i;
        return peak;
    }
    for (int i = peak; i < static_cast<int>(steps.size()); ++i)
        if (steps[i].P <= level) return i;
    return -1;
}

BinGrid align_and_average(const std::vector<BinGrid>& grids, const std::vector<int>& shifts_bins) {
    if (grids.empty()) throw PostprocError("nothing to average");
    if (grids.size() != shifts_bins.size())
        throw PostprocError("one shift per grid is required");
    BinGrid out = grids.front();
    std::fill(out.w.begin(), out.w.end(), 0.0);
    for (std::size_t s = 0; s < grids.size(); ++s) {
        const BinGrid& g = grids[s];
        if (g.nx != out.nx || g.ny != out.ny)
            throw PostprocError("grids to average have mismatched shapes");
        const int shift = shifts_bins[s];
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const int jx = ix + shift;
                if (jx < 0 || jx >= g.nx) continue;
                out.at(jx, iy) += g.at(ix, iy);
            }
    }
    const double mx = out.max();
    if (mx > 0.0)
        for (double& v : out.w) v /= mx;
    return out;
}

namespace {

// dissipation-weighted x centroid within a horizontal strip
std::optional<double> strip_centroid(const Mesostructure& mesh,
                                     const std::vector<ContactState>& final_states, double y_lo,
                                     double y_hi) {
    double wsum = 0.0, xsum = 0.0;
    for (std::size_t k = 0; k < mesh.contacts.size(); ++k) {
        const Vec3& c = mesh.contacts[k].centroid;
        if (c.y() < y_lo || c.y() >= y_hi) continue;
        const double w = final_states[k].w_dis;
        if (w <= 0.0) continue;
        wsum += w;
        xsum += w * c.x();
    }
    if (!(wsum > 0.0)) return std::nullopt;
    return xsum / wsum;
}

} // namespace

FpzResult aggregate_fpz(const std::vector<SimForFpz>& sims, const Box& domain,
                        const FpzOptions& opt) {
    std::vector<BinGrid> per_sim;
    std::vector<int> shifts;
    std::vector<double> shifts_mm;
    const double x_center = 0.5 * (domain.lo.x() + domain.hi.x());

    for (const auto& s : sims) {
        if (!s.mesh || !s.result) throw PostprocError("process-zone input is incomplete");
        if (s.result->withdrawn()) continue;
        const auto& steps = s.result->steps;
        const int i_pre = select_step(steps, opt.t_pre, Regime::PrePeak);
        const int i_post = select_step(steps, opt.t_post, Regime::PostPeak);
        if (i_pre < 0 || i_post < 0 || i_post < i_pre) continue;

        std::vector<Vec3> centroids;
        centroids.reserve(s.mesh->contacts.size());
        for (const auto& c : s.mesh->contacts) centroids.push_back(c.centroid);

        BinGrid acc;
        int n_used = 0;
        for (int i = i_pre; i <= i_post; ++i) {
            auto g = bin_dissipation(centroids, steps[i].dw, domain, opt.bin, true);
            if (!g) continue;
            if (n_used == 0) {
                acc = *g;
            } else {
                for (std::size_t j = 0; j < acc.w.size(); ++j) acc.w[j] += g->w[j];
            }
            ++n_used;
        }
        if (n_used == 0) continue;
        for (double& v : acc.w) v /= n_used;

        int shift = 0;
        if (opt.align) {
            const auto cx = strip_centroid(*s.mesh, s.result->final_states, domain.lo.y(),
                                           domain.lo.y() + opt.bottom_layer);
            if (cx) shift = static_cast<int>(std::lround((x_center - *cx) / opt.bin));
        }
        per_sim.push_back(std::move(acc));
        shifts.push_back(shift);
        shifts_mm.push_back(shift * opt.bin);
    }
    if (per_sim.empty()) throw PostprocError("no usable simulations for the process zone");

    FpzResult out;
    out.grid = align_and_average(per_sim, shifts);
    out.shifts_mm = std::move(shifts_mm);
    for (double level : opt.contour_levels) {
        int count = 0;
        for (double v : out.grid.w)
            if (v >= level) ++count;
        out.contour_areas.push_back(count * opt.bin * opt.bin);
    }
    return out;
}

CrackHistogram crack_histogram(const std::vector<SimForFpz>& sims, double strip_y0,
                               double strip_depth, double bin, const Box& domain) {
    CrackHistogram h;
    h.strip_y0 = strip_y0;
    h.strip_depth = strip_depth;
    h.bin = bin;
    h.x0 = domain.lo.x();
    h.nbins = std::max(1, static_cast<int>(std::ceil((domain.hi.x() - domain.lo.x()) / bin)));
    h.counts.assign(static_cast<std::size_t>(h.nbins), 0);

    for (const auto& s : sims) {
        if (!s.mesh || !s.result) throw PostprocError("crack-histogram input is incomplete");
        if (s.result->withdrawn()) continue;
        const auto cx =
            strip_centroid(*s.mesh, s.result->final_states, strip_y0, strip_y0 + strip_depth);
        if (!cx) continue;
        h.centroids.push_back(*cx);
        const int ix = static_cast<int>(std::floor((*cx - h.x0) / bin));
        if (ix >= 0 && ix < h.nbins) ++h.counts[static_cast<std::size_t>(ix)];
    }
    const std::size_t nc = h.centroids.size();
    if (nc > 0) {
        h.mean = std::accumulate(h.centroids.begin(), h.centroids.end(), 0.0) / nc;
        if (nc > 1) {
            double ss = 0.0;
            for (double x : h.centroids) ss += (x - h.mean) * (x - h.mean);
            h.sd = std::sqrt(ss / (nc - 1));
        }
    }
    return h;
}

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             const std::vector<double>& x0, double initial_rel_step,
                             double rel_tol, int max_evals) {
    const std::size_t n = x0.size();
    if (n == 0) throw PostprocError("nelder-mead needs at least one variable");

    struct Vertex {
        std::vector<double> x;
        double f;
    };
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        return f(x);
    };

    std::vector<Vertex> simplex;
    simplex.push_back({x0, eval(x0)});
    for (std::size_t i = 0; i < n; ++i) {
        auto x = x0;
        x[i] += x[i] != 0.0 ? initial_rel_step * x[i] : initial_rel_step;
        simplex.push_back({x, eval(x)});
    }

    auto order = [&]() {
        std::sort(simplex.begin(), simplex.end(),
                  [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    };
    auto diameter = [&]() {
        double d = 0.0, scale = 1.0;
        for (double v : simplex[0].x) scale = std::max(scale, std::abs(v));
        for (std::size_t v = 1; v < simplex.size(); ++v)
            for (std::size_t i = 0; i < n; ++i)
                d = std::max(d, std::abs(simplex[v].x[i] - simplex[0].x[i]));
        return d / scale;
    };

    order();
    bool converged = false;
    while (evals < max_evals) {
        if (diameter() < rel_tol) {
            converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t v = 0; v + 1 < simplex.size(); ++v)
            for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v].x[i] / n;

        auto blend = [&](double t) {
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i)
                x[i] = centroid[i] + t * (simplex.back().x[i] - centroid[i]);
            return x;
        };

        const auto xr = blend(-1.0);
        const double fr = eval(xr);
        if (fr < simplex[0].f) {
            const auto xe = blend(-2.0);
            const double fe = eval(xe);
            if (fe < fr)
                simplex.back() = {xe, fe};
            else
                simplex.back() = {xr, fr};
        } else if (fr < simplex[simplex.size() - 2].f) {
            simplex.back() = {xr, fr};
        } else {
            const bool outside = fr < simplex.back().f;
            const auto xc = blend(outside ? -0.5 : 0.5);
            const double fc = eval(xc);
            if (fc < std::min(fr, simplex.back().f)) {
                simplex.back() = {xc, fc};
            } else {
                for (std::size_t v = 1; v < simplex.size(); ++v) {
                    for (std::size_t i = 0; i < n; ++i)
                        simplex[v].x[i] = 0.5 * (simplex[v].x[i] + simplex[0].x[i]);
                    simplex[v].f = eval(simplex[v].x);
                    if (evals >= max_evals) break;
                }
            }
        }
        order();
    }
    order();
    return {simplex[0].x, simplex[0].f, evals, converged};
}

double area_under_curve(const std::vector<StepRecord>& steps) {
    double a = 0.0, p_prev = 0.0, c_prev = 0.0;
    for (const auto& s : steps) {
        a += 0.5 * (s.P + p_prev) * (s.cmod - c_prev);
        p_prev = s.P;
        c_prev = s.cmod;
    }
    return a;
}

CalibrationResult calibrate(const CalibrationTargets& target, const CalibrationRunner& runner,
                            double ft_start, double Gt_start, double rel_tol, int max_evals) {
    if (!(target.peak > 0.0) || !(target.area > 0.0))
        throw PostprocError("calibration targets must be positive");
    constexpr double kPenalty = 1e6;
    auto objective = [&](const std::vector<double>& x) {
        const double ft = x[0], Gt = x[1];
        if (!(ft > 0.0) || !(Gt > 0.0)) return kPenalty;
        try {
            const CalibrationTargets got = runner(ft, Gt);
            const double ep = (got.peak - target.peak) / target.peak;
            const double ea = (got.area - target.area) / target.area;
            return ep * ep + ea * ea;
        } catch (const std::exception&) {
            return kPenalty;
        }
    };
    const auto nm = nelder_mead(objective, {ft_start, Gt_start}, 0.1, rel_tol, max_evals);
    CalibrationResult out;
    out.ft = nm.x[0];
    out.Gt = nm.x[1];
    out.objective = nm.f;
    out.evaluations = nm.evaluations;
    out.converged = nm.converged;
    return out;
}

namespace {
std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace

void write_steps_csv(const std::string& path, const std::vector<StepRecord>& steps) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw PostprocError("cannot open '" + path + "' for writing");
    os << "index,P,cmod,deflection,iterations,relaxed,w_ext,w_strain,w_dis,energy_residual\n";
    for (const auto& s : steps) {
        os << s.index << ',' << g17(s.P) << ',' << g17(s.cmod) << ',' << g17(s.deflection) << ','
           << s.iterations << ',' << (s.relaxed ? 1 : 0) << ',' << g17(s.w_ext) << ','
           << g17(s.w_strain) << ',' << g17(s.w_dis) << ',' << g17(s.energy_residual) << '\n';
    }
    if (!os) throw PostprocError("write to '" + path + "' failed");
}

std::vector<StepRecord> read_steps_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw PostprocError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || line.rfind("index,", 0) != 0)
        throw PostprocError("'" + path + "' is not a step table");
    std::vector<StepRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        StepRecord s;
        int relaxed = 0;
        ls >> s.index >> s.P >> s.cmod >> s.deflection >> s.iterations >> relaxed >> s.w_ext >>
            s.w_strain >> s.w_dis >> s.energy_residual;
        if (!ls) throw PostprocError("bad row in '" + path + "'");
        s.relaxed = relaxed != 0;
        out.push_back(std::move(s));
    }
    return out;
}

namespace {
constexpr char kLedgerMagic[8] = {'M', 'F', 'D', 'L', '1', '\n', 0, 0};
}

void write_dissipation_ledger(const std::string& path, const std::vector<StepRecord>& steps) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw PostprocError("cannot open '" + path + "' for writing");
    os.write(kLedgerMagic, sizeof(kLedgerMagic));
    const std::uint32_t n = static_cast<std::uint32_t>(steps.size());
    os.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const auto& s : steps) {
        const std::uint32_t c = static_cast<std::uint32_t>(s.dw.size());
        os.write(reinterpret_cast<const char*>(&c), sizeof(c));
        for (const auto& [id, v] : s.dw) {
            const std::int32_t id32 = id;
            os.write(reinterpret_cast<const char*>(&id32), sizeof(id32));
            os.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
    if (!os) throw PostprocError("write to '" + path + "' failed");
}

std::vector<std::vector<std::pair<int, double>>> read_dissipation_ledger(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw PostprocError("cannot open '" + path + "'");
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kLedgerMagic, sizeof(magic)) != 0)
        throw PostprocError("'" + path + "' is not a dissipation ledger");
    std::uint32_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<std::vector<std::pair<int, double>>> out(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t c = 0;
        is.read(reinterpret_cast<char*>(&c), sizeof(c));
        out[i].resize(c);
        for (std::uint32_t k = 0; k < c; ++k) {
            std::int32_t id = 0;
            double v = 0;
            is.read(reinterpret_cast<char*>(&id), sizeof(id));
            is.read(reinterpret_cast<char*>(&v), sizeof(v));
            out[i][k] = {id, v};
        }
        if (!is) throw PostprocError("'" + path + "' is truncated");
    }
    return out;
}

void write_bin_grid_csv(const std::string& path, const BinGrid& grid) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw PostprocError("cannot open '" + path + "' for writing");
    os << "# bin=" << g17(grid.bin) << " x0=" << g17(grid.x0) << " y0=" << g17(grid.y0)
       << " nx=" << grid.nx << " ny=" << grid.ny << '\n';
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            if (ix) os << ',';
            os << g17(grid.at(ix, iy));
        }
        os << '\n';
    }
    if (!os) throw PostprocError("write to '" + path + "' failed");
}

void write_vtk_points(const std::string& path, const std::vector<Vec3>& points,
                      const std::vector<double>& scalar, const std::string& scalar_name) {
    if (points.size() != scalar.size())
        throw PostprocError("vtk writer: one scalar per point is required");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw PostprocError("cannot open '" + path + "' for writing");
    os << "# vtk DataFile Version 3.0\n" << scalar_name << "\nASCII\nDATASET POLYDATA\n";
    os << "POINTS " << points.size() << " double\n";
    for (const auto& p : points) os << g17(p.x()) << ' ' << g17(p.y()) << ' ' << g17(p.z()) << '\n';
    os << "POINT_DATA " << points.size() << "\nSCALARS " << scalar_name
       << " double 1\nLOOKUP_TABLE default\n";
    for (double v : scalar) os << g17(v) << '\n';
    if (!os) throw PostprocError("write to '" + path + "' failed");
}

} // namespace mesofrac
