/*
 * solver.cpp — secant-stiffness stepping under indirect gauge control.
 */
#include "mesofrac/solver.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace mesofrac {

const char* run_status_name(RunStatus s) {
    switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::StepUnderflow: return "step-underflow";
    case RunStatus::MaxSteps: return "max-steps";
    case RunStatus::CmodCap: return "cmod-cap";
    }
    return "?";
}

DofMap::DofMap(const Mesostructure& m, const BoundaryConditions& bcs)
    : n_particles_(static_cast<int>(m.particles.size())) {
    static const char* comp_name[6] = {"translation-x", "translation-y", "translation-z",
                                       "rotation-x",    "rotation-y",    "rotation-z"};
    enum class Kind : char { Free, Fixed, Tied };
    std::vector<Kind> kind(static_cast<std::size_t>(6) * n_particles_, Kind::Free);
    for (const auto& [p, c] : bcs.fixed) kind[6 * static_cast<std::size_t>(p) + c] = Kind::Fixed;
    for (const auto& pl : bcs.platens)
        for (int p : pl.particles) {
            auto& k = kind[6 * static_cast<std::size_t>(p) + pl.axis];
            if (k == Kind::Fixed) throw SolverError("dof map: a platen-tied dof is also fixed");
            k = Kind::Tied;
        }

    expand_.resize(static_cast<std::size_t>(6) * n_particles_);
    int next = 0;
    for (int p = 0; p < n_particles_; ++p)
        for (int c = 0; c < 6; ++c) {
            if (kind[6 * static_cast<std::size_t>(p) + c] != Kind::Free) continue;
            std::ostringstream nm;
            nm << "particle " << p << " " << comp_name[c];
            names_.push_back(nm.str());
            expand_[6 * static_cast<std::size_t>(p) + c] = {{next++, 1.0}};
        }

    masters_.resize(bcs.platens.size());
    for (std::size_t ip = 0; ip < bcs.platens.size(); ++ip) {
        const auto& pl = bcs.platens[ip];
        auto& ms = masters_[ip];
        ms = {-1, -1, -1};
        if (pl.driven) {
            names_.push_back("platen " + std::to_string(ip) + " translation master");
            ms[0] = next++;
        }
        if (pl.rotating) {
            names_.push_back("platen " + std::to_string(ip) + " rotation master a");
            ms[1] = next++;
            names_.push_back("platen " + std::to_string(ip) + " rotation master b");
            ms[2] = next++;
        }
        const int a1 = (pl.axis + 1) % 3, a2 = (pl.axis + 2) % 3;
        for (int p : pl.particles) {
            // u_axis = U + th_a1 * r_a2 - th_a2 * r_a1, r = center - platen center
            auto& ex = expand_[6 * static_cast<std::size_t>(p) + pl.axis];
            ex.clear();
            const Vec3 r = m.particles[p].center - pl.center;
            if (ms[0] >= 0) ex.emplace_back(ms[0], 1.0);
            if (pl.rotating) {
                ex.emplace_back(ms[1], r[a2]);
                ex.emplace_back(ms[2], -r[a1]);
            }
        }
    }
    n_reduced_ = next;
}

int DofMap::platen_master(int platen_index, int which) const {
    return masters_[static_cast<std::size_t>(platen_index)][static_cast<std::size_t>(which)];
}

Eigen::VectorXd DofMap::to_full(const Eigen::VectorXd& u_red) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(6) * n_particles_);
    for (std::size_t d = 0; d < expand_.size(); ++d)
        for (const auto& [idx, w] : expand_[d])
            full[static_cast<Eigen::Index>(d)] += w * u_red[idx];
    return full;
}

std::string DofMap::describe(int reduced_index) const {
    if (reduced_index < 0 || reduced_index >= static_cast<int>(names_.size()))
        return "unknown dof";
    return names_[static_cast<std::size_t>(reduced_index)];
}

double gauge_opening(const Gauge& g, const Mesostructure& m, const Eigen::VectorXd& u_full) {
    auto point_disp = [&](int p, const Vec3& x) {
        const Vec3 u(u_full[6 * p + 0], u_full[6 * p + 1], u_full[6 * p + 2]);
        const Vec3 th(u_full[6 * p + 3], u_full[6 * p + 4], u_full[6 * p + 5]);
        return Vec3(u + th.cross(x - m.particles[p].center));
    };
    return (point_disp(g.pb, g.xb) - point_disp(g.pa, g.xa)).dot(g.dir);
}

namespace {

struct ContactGeometry {
    std::array<int, 12> dof;        // full dof ids: u_i, th_i, u_j, th_j
    Eigen::Matrix<double, 3, 12> B; // local strain = B q
};

ContactGeometry make_geometry(const Contact& c, const Mesostructure& m) {
    ContactGeometry g;
    for (int a = 0; a < 3; ++a) {
        g.dof[a] = 6 * c.i + a;
        g.dof[3 + a] = 6 * c.i + 3 + a;
        g.dof[6 + a] = 6 * c.j + a;
        g.dof[9 + a] = 6 * c.j + 3 + a;
    }
    const Vec3 ri = c.centroid - m.particles[c.i].center;
    const Vec3 rj = c.centroid - m.particles[c.j].center;
    const Vec3 axes[3] = {c.n, c.m, c.l};
    for (int r = 0; r < 3; ++r) {
        const Vec3& e = axes[r];
        const Vec3 ti = ri.cross(e); // from e . (th x r) = th . (r x e)
        const Vec3 tj = rj.cross(e);
        for (int a = 0; a < 3; ++a) {
            g.B(r, a) = -e[a] / c.length;
            g.B(r, 3 + a) = -ti[a] / c.length;
            g.B(r, 6 + a) = e[a] / c.length;
            g.B(r, 9 + a) = tj[a] / c.length;
        }
    }
    return g;
}

} // namespace

SimulationResult run_simulation(const Problem& problem, const StepControl& control) {
    const Mesostructure& m = *problem.mesh;
    const int n_contacts = static_cast<int>(m.contacts.size());
    if (static_cast<int>(problem.laws.size()) != n_contacts)
        throw SolverError("solver: law count does not match the contact count");
    if (problem.bcs.gauges.empty()) throw SolverError("solver: no control gauges");

    DofMap dofs(m, problem.bcs);
    const int n = dofs.n_reduced();
    if (n <= 0) throw SolverError("solver: no free degrees of freedom");

    std::vector<ContactGeometry> geom;
    geom.reserve(n_contacts);
    for (const auto& c : m.contacts) geom.push_back(make_geometry(c, m));

    // unit external load in reduced coordinates
    Eigen::VectorXd f_unit = Eigen::VectorXd::Zero(n);
    for (const auto& [p, comp, coeff] : problem.bcs.point_load)
        for (const auto& [idx, w] : dofs.expand(p, comp)) f_unit[idx] += coeff * w;
    for (std::size_t ip = 0; ip < problem.bcs.platens.size(); ++ip)
        if (problem.bcs.platens[ip].driven) {
            const int u_master = dofs.platen_master(static_cast<int>(ip), 0);
            if (u_master >= 0) f_unit[u_master] += 1.0;
        }
    if (f_unit.norm() == 0.0) throw SolverError("solver: the unit load vector is zero");

    auto assemble = [&](const std::vector<double>& dmg, Eigen::SparseMatrix<double>& K) {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(n_contacts) * 144);
        Eigen::Matrix<double, 12, 12> Ke;
        for (int k = 0; k < n_contacts; ++k) {
            const ContactLaw& law = problem.laws[k];
            const double al = law.area * law.length;
            const double f = (1.0 - dmg[k]) * law.E0;
            const Eigen::Vector3d dscale(f, f * law.alpha, f * law.alpha);
            Ke.noalias() = geom[k].B.transpose() * dscale.asDiagonal() * geom[k].B * al;
            for (int r = 0; r < 12; ++r) {
                const auto& er = dofs.expand_flat(geom[k].dof[r]);
                if (er.empty()) continue;
                for (int cc = 0; cc < 12; ++cc) {
                    const auto& ec = dofs.expand_flat(geom[k].dof[cc]);
                    if (ec.empty()) continue;
                    const double v = Ke(r, cc);
                    if (v == 0.0) continue;
                    for (const auto& [ri, rw] : er)
                        for (const auto& [ci, cw] : ec) trips.emplace_back(ri, ci, rw * cw * v);
                }
            }
        }
        K.resize(n, n);
        K.setFromTriplets(trips.begin(), trips.end());
    };

    std::vector<ContactState> committed(n_contacts);
    std::vector<double> dmg_committed(n_contacts, 0.0);

    SimulationResult res;
    res.first_damage_step.assign(n_contacts, -1);
    res.first_damage_cmod.assign(n_contacts, std::numeric_limits<double>::quiet_NaN());

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    Eigen::SparseMatrix<double> K;
    bool pattern_done = false;
    bool factor_valid = false;
    std::vector<double> dmg_fact(n_contacts, 0.0);

    auto refactor = [&](const std::vector<double>& dmg) {
        assemble(dmg, K);
        if (!pattern_done) {
            ldlt.analyzePattern(K);
            pattern_done = true;
        }
        ldlt.factorize(K);
        if (ldlt.info() != Eigen::Success) {
            // the usual cause is a dof no contact or constraint touches; a zero
            // pivot makes Eigen bail before vectorD() is meaningful, so find the
            // empty row in the assembled matrix and name it
            std::vector<double> rowmax(static_cast<std::size_t>(K.rows()), 0.0);
            double overall = 0.0;
            for (int c = 0; c < K.outerSize(); ++c)
                for (Eigen::SparseMatrix<double>::InnerIterator it(K, c); it; ++it) {
                    auto& rm = rowmax[static_cast<std::size_t>(it.row())];
                    rm = std::max(rm, std::abs(it.value()));
                    overall = std::max(overall, rm);
                }
            for (int i = 0; i < static_cast<int>(rowmax.size()); ++i)
                if (rowmax[static_cast<std::size_t>(i)] <= 1e-12 * std::max(overall, 1.0))
                    throw SingularSystemError("solver: stiffness is singular (" +
                                              dofs.describe(i) + " carries no stiffness)");
            throw SingularSystemError("solver: factorization failed outright");
        }
        // a near-zero pivot with nominal success still means a floating subsystem
        const auto& D = ldlt.vectorD();
        double dmax = 0.0;
        Eigen::Index worst = 0;
        double worst_v = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < D.size(); ++i) {
            const double v = std::abs(D[i]);
            dmax = std::max(dmax, v);
            if (v < worst_v) {
                worst_v = v;
                worst = i;
            }
        }
        if (worst_v <= 1e-12 * std::max(dmax, 1.0)) {
            const int red = static_cast<int>(ldlt.permutationPinv().indices()[worst]);
            std::ostringstream msg;
            msg << "solver: stiffness is singular (pivot " << worst_v << " at " << dofs.describe(red)
                << ")";
            throw SingularSystemError(msg.str());
        }
        dmg_fact = dmg;
        factor_valid = true;
    };

    auto max_gauge = [&](const Eigen::VectorXd& u_full) {
        double g = -std::numeric_limits<double>::infinity();
        for (const auto& gg : problem.bcs.gauges) g = std::max(g, gauge_opening(gg, m, u_full));
        return g;
    };

    const Termination& term = problem.bcs.termination;
    double dcmod = control.cmod_initial;
    double cmod_committed = 0.0;
    double lambda_committed = 0.0;
    Eigen::VectorXd u_committed = Eigen::VectorXd::Zero(n);
    double w_ext = 0.0;
    double slope_elastic = 0.0;
    bool past_peak = false;
    double dcmod_last = 0.0;
    std::vector<double> dmg_step_prev;

    std::vector<ContactState> trial(n_contacts);
    std::vector<double> dmg_trial(n_contacts, 0.0);

    for (int step_index = 1;; ++step_index) {
        if (step_index > term.max_steps) {
            res.status = RunStatus::MaxSteps;
            break;
        }

        bool relaxed = false;
        bool accepted = false;
        int expand = 0;
        double lambda = 0.0, target = 0.0;
        int iters = 0;
        Eigen::VectorXd u_red, u_full;

        while (!accepted) {
            target = cmod_committed + dcmod;
            const double tol = relaxed ? 10.0 * control.tol_r : control.tol_r;
            // Post-peak, crack growth is steady enough that the last step's
            // damage increment extrapolates well and saves most iterations.
            // Approaching the peak it overshoots the basin and stalls the
            // fixed point, so it stays off until the peak has passed.
            std::vector<double> dmg_work = dmg_committed;
            if (past_peak && !dmg_step_prev.empty() && dcmod_last > 0.0) {
                const double scale = dcmod / dcmod_last;
                bool moved = false;
                for (int k = 0; k < n_contacts; ++k) {
                    const double pred = std::clamp(
                        dmg_committed[k] + scale * (dmg_committed[k] - dmg_step_prev[k]),
                        dmg_committed[k], kDamageCap);
                    if (pred != dmg_work[k]) {
                        dmg_work[k] = pred;
                        moved = true;
                    }
                }
                if (moved) factor_valid = false;
            }
            bool converged = false;
            double omega = 1.0, r_prev = std::numeric_limits<double>::infinity();
            int r_growth = 0;
            Eigen::VectorXd g_prev;
            // The relaxed rescue keeps the best iterate: at a localization
            // jump the residual has a floor that no step size removes, and
            // the state at the floor is the usable equilibrium estimate.
            double best_r = std::numeric_limits<double>::infinity();
            double lambda_best = 0.0;
            std::vector<ContactState> trial_best;
            std::vector<double> dmg_best;
            Eigen::VectorXd u_red_best, u_full_best;

            // Crossing a fold means advancing the crack contact by contact at a
            // near-fixed gauge value; that walk can need far more passes than
            // the regular budget, so relaxed attempts get a longer leash.
            const int iter_cap = relaxed ? 3 * control.max_iterations : control.max_iterations;
            for (iters = 1; iters <= iter_cap; ++iters) {
                if (!factor_valid) refactor(dmg_work);
                const Eigen::VectorXd u_hat = ldlt.solve(f_unit);
                const Eigen::VectorXd u_hat_full = dofs.to_full(u_hat);
                const double g_hat = max_gauge(u_hat_full);
                if (!(g_hat > 0.0) || !std::isfinite(g_hat)) break;
                lambda = target / g_hat;
                u_red = lambda * u_hat;
                u_full = lambda * u_hat_full;

                // trial states always restart from the committed history
                Eigen::VectorXd f_int = Eigen::VectorXd::Zero(n);
                for (int k = 0; k < n_contacts; ++k) {
                    Eigen::Matrix<double, 12, 1> q;
                    for (int a = 0; a < 12; ++a) q[a] = u_full[geom[k].dof[a]];
                    const Vec3 e = geom[k].B * q;
                    trial[k] = update_state(committed[k], e, problem.laws[k]);
                    dmg_trial[k] = trial[k].d;
                    const double al = problem.laws[k].area * problem.laws[k].length;
                    const Eigen::Matrix<double, 12, 1> fe =
                        geom[k].B.transpose() * (al * trial[k].s);
                    for (int a = 0; a < 12; ++a)
                        for (const auto& [idx, w] : dofs.expand_flat(geom[k].dof[a]))
                            f_int[idx] += w * fe[a];
                }
                const double denom = std::max(f_int.norm(), 1e-30);
                const double r = (f_int - lambda * f_unit).norm() / denom;
                if (std::getenv("MESOFRAC_TRACE")) {
                    double max_dd = 0.0;
                    int n_dd = 0, arg_dd = -1;
                    for (int k = 0; k < n_contacts; ++k) {
                        const double dd = std::abs(dmg_trial[k] - dmg_work[k]);
                        if (dd > 1e-6) ++n_dd;
                        if (dd > max_dd) {
                            max_dd = dd;
                            arg_dd = k;
                        }
                    }
                    std::fprintf(stderr,
                                 "TRACE step %d iter %d target %.6e lambda %.10e r %.3e "
                                 "max_dd %.3e at %d n_dd %d omega %.2f\n",
                                 step_index, iters, target, lambda, r, max_dd, arg_dd, n_dd,
                                 omega);
                }
                if (r < tol) {
                    converged = true;
                    break;
                }
                if (relaxed && r < best_r) {
                    best_r = r;
                    lambda_best = lambda;
                    trial_best = trial;
                    dmg_best = dmg_trial;
                    u_red_best = u_red;
                    u_full_best = u_full;
                }
                // Around the localization point the fixed point turns
                // repulsive and the residual bottoms out and climbs again;
                // sustained growth means the attempt is lost, so concede it
                // early instead of riding out the iteration cap.
                r_growth = r > r_prev ? r_growth + 1 : 0;
                if (r_growth >= (relaxed ? 24 : 8)) break;
                // Damage update for the next pass, Aitken-relaxed: the plain
                // d_work <- d_trial substitution converges linearly with a
                // rate that crawls toward one around the peak, and its error
                // is dominated by a single mode the scalar secant weight
                // extrapolates well.  A growing residual resets to the plain
                // update.  The factorization must refresh here regardless:
                // reusing it would reproduce the same failed solution.
                Eigen::Map<const Eigen::VectorXd> d_work_v(dmg_work.data(), n_contacts);
                Eigen::Map<const Eigen::VectorXd> d_trial_v(dmg_trial.data(), n_contacts);
                const Eigen::VectorXd gk = d_trial_v - d_work_v;
                if (g_prev.size() == gk.size() && r <= r_prev) {
                    const Eigen::VectorXd dg = gk - g_prev;
                    const double dg2 = dg.squaredNorm();
                    if (dg2 > 0.0) omega = std::clamp(-omega * g_prev.dot(dg) / dg2, 0.2, 12.0);
                } else {
                    omega = 1.0;
                }
                g_prev = gk;
                r_prev = r;
                for (int k = 0; k < n_contacts; ++k)
                    dmg_work[k] = std::clamp(dmg_work[k] + omega * gk[k], dmg_committed[k],
                                             kDamageCap);
                factor_valid = false;
            }

            if (!converged && relaxed && best_r < 100.0 * control.tol_r) {
                lambda = lambda_best;
                trial = trial_best;
                dmg_trial = dmg_best;
                u_red = u_red_best;
                u_full = u_full_best;
                factor_valid = false;
                converged = true;
            }
            if (converged) {
                accepted = true;
            } else if (!relaxed && dcmod > control.cmod_min) {
                dcmod = std::max(0.5 * dcmod, control.cmod_min);
                factor_valid = false;
            } else if (control.allow_relaxed_retry && !relaxed) {
                relaxed = true;
                factor_valid = false;
            } else if (relaxed && expand < 4 && dcmod < control.cmod_max) {
                // When the equilibrium branch folds in the controlled gauge, no
                // increment this small has a solution on the near side; the
                // branch resumes further out, so jump toward it instead of
                // grinding the minimum step.
                ++expand;
                dcmod = std::min(8.0 * dcmod, control.cmod_max);
                factor_valid = false;
            } else {
                res.status = RunStatus::StepUnderflow;
                break;
            }
        }
        if (!accepted) break;

        // committed load-opening slope, against the elastic one of the first
        // step; a falling slope under a still-climbing load flags the peak
        const double slope = (lambda - lambda_committed) / (target - cmod_committed);
        if (res.steps.empty()) slope_elastic = slope;

        StepRecord rec;
        rec.index = step_index;
        rec.cmod = target;
        rec.P = lambda;
        rec.iterations = iters;
        rec.relaxed = relaxed;

        double w_strain = 0.0, w_dis = 0.0;
        for (int k = 0; k < n_contacts; ++k) {
            const double dwk = trial[k].w_dis - committed[k].w_dis;
            if (dwk != 0.0) rec.dw.emplace_back(k, dwk);
            if (committed[k].d == 0.0 && trial[k].d > 0.0) {
                res.first_damage_step[k] = step_index;
                res.first_damage_cmod[k] = target;
            }
            w_strain += strain_energy(trial[k], problem.laws[k]);
            w_dis += trial[k].w_dis;
        }
        w_ext += 0.5 * (lambda + lambda_committed) * f_unit.dot(u_red - u_committed);
        rec.w_ext = w_ext;
        rec.w_strain = w_strain;
        rec.w_dis = w_dis;
        rec.energy_residual = std::abs(w_ext - w_strain - w_dis) / std::max(w_ext, 1e-30);
        res.max_energy_residual = std::max(res.max_energy_residual, rec.energy_residual);

        if (!problem.bcs.deflection.empty()) {
            double defl = 0.0;
            for (const auto& [p, comp, coeff] : problem.bcs.deflection)
                defl += coeff * u_full[6 * p + comp];
            rec.deflection = defl;
        } else {
            for (std::size_t ip = 0; ip < problem.bcs.platens.size(); ++ip)
                if (problem.bcs.platens[ip].driven) {
                    const int mu = dofs.platen_master(static_cast<int>(ip), 0);
                    if (mu >= 0) rec.deflection = u_red[mu];
                    break;
                }
        }

        dmg_step_prev = dmg_committed;
        dcmod_last = target - cmod_committed;
        committed = trial;
        dmg_committed = dmg_trial;
        cmod_committed = target;
        lambda_committed = lambda;
        u_committed = u_red;
        res.steps.push_back(std::move(rec));

        if (lambda > res.peak_P) {
            res.peak_P = lambda;
            res.peak_cmod = target;
            res.peak_index = static_cast<int>(res.steps.size()) - 1;
        }

        if (res.peak_P > 0.0 && static_cast<int>(res.steps.size()) - 1 > res.peak_index &&
            lambda <= term.post_peak_fraction * res.peak_P) {
            res.status = RunStatus::Completed;
            break;
        }
        if (cmod_committed >= term.cmod_cap) {
            res.status = RunStatus::CmodCap;
            break;
        }

        // invalidate a factorization the committed damage has drifted from
        double drift = 0.0;
        for (int k = 0; k < n_contacts; ++k)
            drift = std::max(drift, std::abs(dmg_committed[k] - dmg_fact[k]));
        if (drift > control.refactor_threshold) factor_valid = false;

        // multiplicative step adaptation toward the target iteration count;
        // resolution also follows the opening scale, so the peak region is
        // walked in small steps even though the tail strides
        if (!relaxed) {
            const double ratio = std::clamp(
                static_cast<double>(control.target_iterations) / std::max(iters, 1), 0.7, 1.6);
            dcmod = std::clamp(dcmod * ratio, control.cmod_min, control.cmod_max);
        }
        dcmod = std::min(dcmod,
                         std::max(control.cmod_initial, control.step_fraction * cmod_committed));
        const bool climbing = res.peak_index == static_cast<int>(res.steps.size()) - 1;
        past_peak = !climbing;
        if (climbing && slope_elastic > 0.0 && slope < 0.5 * slope_elastic)
            dcmod = std::min(dcmod, std::max(control.cmod_min, control.step_fraction *
                                                                   cmod_committed /
                                                                   control.peak_refine));
    }

    res.final_states = committed;
    return res;
}

} // namespace mesofrac
