/*
 * solver.hpp — quasi-static solution under indirect crack-opening control.
 *
 * Secant-stiffness damage iteration: at frozen damage the system is linear,
 * so each iteration solves the unit-load problem, scales the whole field so
 * the controlling gauge hits its target, re-evaluates damage from the
 * committed history and repeats until the out-of-balance force is small.
 * Scaling the solution by the gauge constraint passes snap-backs that kill
 * plain displacement control.
 */
#pragma once

#include "mesofrac/scenario.hpp"

#include <Eigen/Sparse>
#include <stdexcept>
#include <vector>

namespace mesofrac {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularSystemError : SolverError {
    using SolverError::SolverError;
};

struct StepControl {
    double cmod_initial = 5e-4; // mm
    double cmod_min = 1e-6;
    double cmod_max = 0.05;
    double step_fraction = 0.15; // cap on dcmod relative to the committed opening
    double peak_refine = 8.0;    // extra step divisor while closing in on a load peak
    double tol_r = 1e-4;            // residual / internal force norm
    int max_iterations = 100;       // damage iterations per step attempt
    double refactor_threshold = 1e-3; // max damage drift tolerated on a stale factorization
    int target_iterations = 16;     // step adaptation steers toward this count
    bool allow_relaxed_retry = true; // one 10x tol_r attempt at the minimum step
};

struct StepRecord {
    int index = 0;
    double P = 0;          // load multiplier, N
    double cmod = 0;       // controlling gauge value, mm
    double deflection = 0; // scenario probe, mm
    int iterations = 0;
    bool relaxed = false;
    double w_ext = 0, w_strain = 0, w_dis = 0; // cumulative energies, N mm
    double energy_residual = 0;                // |W_ext - W_strain - W_dis| / W_ext
    std::vector<std::pair<int, double>> dw;    // per-contact dissipation increments
};

enum class RunStatus { Completed, StepUnderflow, MaxSteps, CmodCap };
const char* run_status_name(RunStatus s);

struct SimulationResult {
    std::vector<StepRecord> steps;
    double peak_P = 0, peak_cmod = 0;
    int peak_index = -1;
    RunStatus status = RunStatus::Completed;
    double max_energy_residual = 0;
    std::vector<ContactState> final_states;
    std::vector<int> first_damage_step;    // -1 if never damaged
    std::vector<double> first_damage_cmod; // NaN if never damaged

    bool withdrawn() const { return status != RunStatus::Completed; }
};

/*
 * Reduced degree-of-freedom bookkeeping: six rigid-body dofs per particle,
 * platen masters appended; dofs are free, fixed to zero, or tied to masters
 * by the rigid-plane constraint.  All prescribed values are zero, so loading
 * enters purely through the scalable unit-force pattern.
 */
class DofMap {
  public:
    DofMap(const Mesostructure& m, const BoundaryConditions& bcs);

    int n_reduced() const { return n_reduced_; }
    int n_particles() const { return n_particles_; }

    // expansion of a particle dof into reduced entries
    const std::vector<std::pair<int, double>>& expand(int particle, int comp) const {
        return expand_[6 * static_cast<std::size_t>(particle) + comp];
    }
    const std::vector<std::pair<int, double>>& expand_flat(int dof) const {
        return expand_[static_cast<std::size_t>(dof)];
    }
    int platen_master(int platen_index, int which) const; // 0=U, 1=ry, 2=rz; -1 if absent/fixed

    Eigen::VectorXd to_full(const Eigen::VectorXd& u_red) const; // 6N particle dofs

    std::string describe(int reduced_index) const; // "particle 7 rotation-y" etc.

  private:
    int n_particles_ = 0, n_reduced_ = 0;
    std::vector<std::vector<std::pair<int, double>>> expand_;
    std::vector<std::array<int, 3>> masters_;
    std::vector<std::string> names_;
};

SimulationResult run_simulation(const Problem& problem, const StepControl& control);

// exposed for tests: gauge opening evaluated on full particle dofs
double gauge_opening(const Gauge& g, const Mesostructure& m, const Eigen::VectorXd& u_full);

} // namespace mesofrac
