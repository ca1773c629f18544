/*
 * postproc.hpp — batch statistics, dissipation maps, crack histograms and
 * two-parameter calibration.
 */
#pragma once

#include "mesofrac/mesostructure.hpp"
#include "mesofrac/solver.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mesofrac {

struct PostprocError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- peak statistics -------------------------------------------------------

struct CellStats {
    int n_used = 0;
    int n_withdrawn = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation (n-1)
    double cov = 0.0; // sd / mean
};

// peaks from usable runs only; needs >= 2 of them, else nullopt ("missing")
std::optional<CellStats> peak_stats(const std::vector<double>& peaks, int n_withdrawn = 0);

// infinite-correlation closed form: mu_p = mu_d and
// delta_p = sqrt(delta_h^2 + delta_d^2 (1 + delta_h^2))  (all CoVs as fractions)
double infinite_correlation_cov(double delta_d, double delta_h);

// ---- dissipation binning ---------------------------------------------------

struct BinGrid {
    double bin = 3.0;   // mm
    double x0 = 0, y0 = 0;
    int nx = 0, ny = 0;
    std::vector<double> w; // row-major [iy * nx + ix]

    double& at(int ix, int iy) { return w[static_cast<std::size_t>(iy) * nx + ix]; }
    double at(int ix, int iy) const { return w[static_cast<std::size_t>(iy) * nx + ix]; }
    double sum() const;
    double max() const;
};

// x-y projection of per-contact increments onto half-open [lo, hi) square
// bins; normalize=true divides by the binned total (unit sum), steps without
// dissipation are reported as empty (nullopt)
std::optional<BinGrid> bin_dissipation(const std::vector<Vec3>& centroids,
                                       const std::vector<std::pair<int, double>>& dw,
                                       const Box& domain, double bin, bool normalize);

// ---- step selection --------------------------------------------------------

enum class Regime { PrePeak, PostPeak };

// earliest step whose load crosses t * P_max in the given regime;
// t = 1 with either regime returns the peak step itself
int select_step(const std::vector<StepRecord>& steps, double t, Regime regime);

// ---- process-zone aggregation ----------------------------------------------

struct FpzOptions {
    double bin = 3.0;        // mm
    double t_pre = 0.95;     // averaging window: pre-peak crossing ...
    double t_post = 0.95;    // ... to post-peak crossing
    double bottom_layer = 25.0; // mm, layer used to locate the crack for x-shifts
    bool align = true;          // shift each simulation by its crack centroid (whole bins)
    std::vector<double> contour_levels{0.20, 0.30, 0.45};
};

struct FpzResult {
    BinGrid grid;  // mean dissipation rate, max-normalized to 1
    std::vector<double> contour_areas; // mm^2 of bins above each level
    std::vector<double> shifts_mm;     // applied per-simulation x-shifts
};

// per-simulation inputs: step records + final states give both the averaging
// window and the crack locator
struct SimForFpz {
    const Mesostructure* mesh = nullptr;
    const SimulationResult* result = nullptr;
};
FpzResult aggregate_fpz(const std::vector<SimForFpz>& sims, const Box& domain,
                        const FpzOptions& opt);

// alignment core, exposed for the synthetic bit-exactness test: grids are
// shifted by whole-bin offsets, summed, then max-normalized
BinGrid align_and_average(const std::vector<BinGrid>& grids, const std::vector<int>& shifts_bins);

// ---- crack location histograms ----------------------------------------------

struct CrackHistogram {
    double strip_y0 = 0, strip_depth = 10.0; // mm band the centroid is taken in
    double bin = 10.0;                       // mm
    std::vector<double> centroids;           // one per usable simulation
    std::vector<int> counts;
    double x0 = 0;
    int nbins = 0;
    double mean = 0, sd = 0;
};

// x-centroid of final dissipation within a horizontal strip, per simulation
CrackHistogram crack_histogram(const std::vector<SimForFpz>& sims, double strip_y0,
                               double strip_depth, double bin, const Box& domain);

// ---- Nelder-Mead calibration -------------------------------------------------

struct NelderMeadResult {
    std::vector<double> x;
    double f = 0.0;
    int evaluations = 0;
    bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             const std::vector<double>& x0, double initial_rel_step = 0.1,
                             double rel_tol = 1e-3, int max_evals = 200);

struct CalibrationTargets {
    double peak = 0.0;       // N
    double area = 0.0;       // N mm, area under the P-CMOD record
};
double area_under_curve(const std::vector<StepRecord>& steps); // trapezoid over cmod

// forward model: (ft, Gt) -> achieved (peak, area); throws on failed runs
using CalibrationRunner = std::function<CalibrationTargets(double ft, double Gt)>;

struct CalibrationResult {
    double ft = 0, Gt = 0;
    double objective = 0;
    int evaluations = 0;
    bool converged = false;
};

// objective: squared relative errors of peak and area; failed runs get a
// large finite penalty so the simplex can move away from them
CalibrationResult calibrate(const CalibrationTargets& target, const CalibrationRunner& runner,
                            double ft_start, double Gt_start, double rel_tol = 1e-3,
                            int max_evals = 200);

// ---- writers -----------------------------------------------------------------

void write_steps_csv(const std::string& path, const std::vector<StepRecord>& steps);
std::vector<StepRecord> read_steps_csv(const std::string& path);

// compact binary sidecar of per-step (contact id, dissipation increment)
void write_dissipation_ledger(const std::string& path, const std::vector<StepRecord>& steps);
// returns per-step sparse increments; header is checked
std::vector<std::vector<std::pair<int, double>>> read_dissipation_ledger(const std::string& path);

void write_bin_grid_csv(const std::string& path, const BinGrid& grid);
// legacy VTK point cloud of contact centroids with a scalar field
void write_vtk_points(const std::string& path, const std::vector<Vec3>& points,
                      const std::vector<double>& scalar, const std::string& scalar_name);

} // namespace mesofrac
