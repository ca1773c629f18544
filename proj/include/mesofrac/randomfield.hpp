/*
 * randomfield.hpp — spatially correlated strength fields.
 *
 * Marginal: Gaussian body grafted onto a Weibull left tail below the p_graft
 * quantile, with mean and standard deviation enforced numerically.  Spatial
 * structure: squared-exponential autocorrelation exp(-|dx|^2 / l_rho^2),
 * sampled through a truncated eigen-expansion on a separable anchor grid and
 * mapped through the Gaussian copula.  Limit regimes: independent per-contact
 * draws (l_rho -> 0) and one stratified value per realization (l_rho -> inf).
 */
#pragma once

#include "mesofrac/geom.hpp"
#include "mesofrac/rng.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mesofrac {

struct FieldError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double normal_cdf(double z);      // standard normal CDF
double normal_quantile(double p); // inverse, Wichura AS241 precision

class GraftedMarginal {
  public:
    // delta_h in (0, ~0.32); larger values put the graft point below zero
    static GraftedMarginal build(double delta_h, double p_graft = 1e-3, double weibull_m = 24.0);

    double inverse_cdf(double u) const;
    double cdf(double x) const;
    double pdf(double x) const;

    double delta_h() const { return delta_; }
    double graft_point() const { return xgr_; }
    double p_graft() const { return pgr_; }
    // realized moments from the construction integrals
    double mean() const { return mean_; }
    double stddev() const { return sd_; }

  private:
    double delta_ = 0, pgr_ = 0, m_ = 0;
    double mu_ = 0, sigma_ = 0, lambda_ = 0, xgr_ = 0;
    double mean_ = 0, sd_ = 0;
};

enum class CorrelationMode { Zero, Finite, Infinite };

struct FieldSpec {
    CorrelationMode mode = CorrelationMode::Zero;
    double ell_rho = 0.0; // mm, used when mode == Finite
    double delta_h = 0.14;
    int n_sim = 1; // stratification count for the Infinite mode
};

struct FieldRealization {
    std::vector<double> h; // one value per evaluation point
    double delta_h = 0.0;
    int realization_index = 0; // 1-based
};

/*
 * Zero-mean unit-variance Gaussian random field with separable
 * squared-exponential covariance on a box, evaluated anywhere via the
 * anchor-grid eigen-expansion (grid spacing <= l_rho/4, modes kept until the
 * captured grid variance reaches var_capture).  Per-point normalization keeps
 * the marginal variance exactly one.
 */
class CorrelatedGaussian {
  public:
    CorrelatedGaussian(const Box& box, double ell_rho, double var_capture = 0.995,
                       int max_grid_per_dim = 4096, int max_modes = 400000);

    int n_modes() const { return static_cast<int>(modes_.size()); }
    double captured_variance_fraction() const { return captured_; }

    // consumes n_modes() normal draws from rs
    std::vector<double> sample(const std::vector<Vec3>& points, rng::Stream& rs) const;

  private:
    struct Axis {
        std::vector<double> nodes;
        Eigen::MatrixXd vecs; // columns are retained 1D eigenvectors
        Eigen::VectorXd vals;
    };
    struct Mode {
        int ix, iy, iz;
        double lambda;
    };
    Axis axes_[3];
    std::vector<Mode> modes_;
    double ell_ = 0, captured_ = 0;
};

// One field realization at the given points.  realization_index is 1-based;
// the Infinite mode returns the stratified quantile F^-1((i - 0.5)/n_sim).
FieldRealization sample_field(const FieldSpec& spec, const std::vector<Vec3>& points,
                              const Box& domain, const GraftedMarginal& marginal,
                              std::uint64_t master_seed, int realization_index,
                              const CorrelatedGaussian* sampler = nullptr);

// h' = 1 + (h - 1) delta_target / delta_source, floored at h_floor; no moment
// renormalization afterwards
FieldRealization rescale_field(const FieldRealization& src, double delta_target,
                               double h_floor = 1e-3);

// How a field value h perturbs the per-contact strength parameters.
enum class ScalingRule {
    FtOnly,   // ft = ft_bar h, Gt fixed
    FtAndGt,  // ft = ft_bar h, Gt = Gt_bar h
    FtAndGt2, // ft = ft_bar h, Gt = Gt_bar h^2 (keeps E0 Gt / ft^2 constant)
};

struct ContactStrength {
    double ft = 0.0;
    double Gt = 0.0;
    double l_ch = 0.0; // E0 Gt / ft^2, evaluated in reduced per-rule form
};

// Reduced-form l_ch keeps the FtAndGt2 invariance exact in floating point:
// the shared constant E0*Gt_bar/(ft_bar*ft_bar) is divided by h or h^2 only
// where the rule actually changes it.
ContactStrength apply_scaling(ScalingRule rule, double ft_bar, double Gt_bar, double E0, double h);

} // namespace mesofrac
