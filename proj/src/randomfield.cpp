/*
 * randomfield.cpp — grafted marginal and correlated Gaussian sampling.
 */
#include "mesofrac/randomfield.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mesofrac {

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

/*
 * Wichura's PPND16 rational approximations: three branches give the standard
 * normal quantile to full double precision.
 */
double normal_quantile(double p) {
    if (!(p > 0.0) || !(p < 1.0)) throw FieldError("normal quantile needs p in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) *
                        r +
                    4.5921953931549871457e4) *
                       r +
                   1.3731693765509461125e4) *
                      r +
                  1.9715909503065514427e3) *
                     r +
                 1.3314166789178437745e2) *
                    r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) *
                        r +
                    2.1213794301586595867e4) *
                       r +
                   5.3941960214247511077e3) *
                      r +
                  6.8718700749205790830e2) *
                     r +
                 4.2313330701600911252e1) *
                    r +
                1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) *
                       r +
                   1.27045825245236838258e0) *
                      r +
                  3.64784832476320460504e0) *
                     r +
                 5.76949722146069140550e0) *
                    r +
                4.63033784615654529590e0) *
                   r +
               1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) *
                       r +
                   1.48103976427480074590e-1) *
                      r +
                  6.89767334985100004550e-1) *
                     r +
                 1.67638483018380384940e0) *
                    r +
                2.05319162663775882187e0) *
                   r +
               1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) *
                       r +
                   2.65321895265761230930e-2) *
                      r +
                  2.96560571828504891230e-1) *
                     r +
                 1.78482653991729133580e0) *
                    r +
                5.46378491116411436990e0) *
                   r +
               6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) *
                       r +
                   7.86869131145613259100e-4) *
                      r +
                  1.48753612908506148525e-2) *
                     r +
                 1.36929880922735805310e-1) *
                    r +
                5.99832206555887937690e-1) *
                   r +
               1.0);
    }
    return q < 0.0 ? -val : val;
}

namespace {

double normal_pdf(double z) {
    return 0.39894228040143267794 * std::exp(-0.5 * z * z); // 1/sqrt(2 pi)
}

// \int_0^T t^a e^{-t} dt by the alternating series; T is tiny here, so a few
// terms reach machine precision
double lower_gamma_small(double a, double T) {
    double sum = 0.0, term = 1.0;
    for (int k = 0; k < 40; ++k) {
        const double inc = term / (a + k + 1.0);
        sum += inc;
        if (std::abs(inc) < 1e-18 * std::abs(sum)) break;
        term *= -T / (k + 1.0);
    }
    return std::pow(T, a + 1.0) * sum;
}

} // namespace

GraftedMarginal GraftedMarginal::build(double delta_h, double p_graft, double weibull_m) {
    if (!(delta_h > 0.0)) throw FieldError("grafted marginal: delta_h must be positive");
    if (!(p_graft > 0.0) || !(p_graft < 0.5))
        throw FieldError("grafted marginal: p_graft must be in (0, 0.5)");
    if (!(weibull_m > 1.0)) throw FieldError("grafted marginal: weibull_m must exceed 1");

    GraftedMarginal g;
    g.delta_ = delta_h;
    g.pgr_ = p_graft;
    g.m_ = weibull_m;

    const double z = normal_quantile(p_graft);
    const double tgr = -std::log1p(-p_graft);
    const double tail_p = 1.0 - p_graft;
    const double phi_z = normal_pdf(z);

    double mu = 1.0, sigma = delta_h;
    double mean = 0.0, sd = 0.0, lambda = 0.0, xgr = 0.0;
    bool converged = false;
    for (int it = 0; it < 500; ++it) {
        xgr = mu + sigma * z;
        if (!(xgr > 0.0)) {
            std::ostringstream msg;
            msg << "grafted marginal: delta_h = " << delta_h
                << " pushes the graft point to " << xgr << " (must stay positive)";
            throw FieldError(msg.str());
        }
        lambda = xgr / std::pow(tgr, 1.0 / weibull_m);

        const double m1_w = lambda * lower_gamma_small(1.0 / weibull_m, tgr);
        const double m2_w = lambda * lambda * lower_gamma_small(2.0 / weibull_m, tgr);
        const double m1_g = mu * tail_p + sigma * phi_z;
        const double m2_g = (mu * mu + sigma * sigma) * tail_p + sigma * (mu + xgr) * phi_z;

        mean = m1_w + m1_g;
        const double var = m2_w + m2_g - mean * mean;
        sd = std::sqrt(std::max(var, 0.0));

        if (std::abs(mean - 1.0) <= 1e-14 && std::abs(sd - delta_h) <= 1e-14 * delta_h) {
            converged = true;
            break;
        }
        mu += 1.0 - mean;
        if (sd > 0.0) sigma *= delta_h / sd;
    }
    if (!converged) throw FieldError("grafted marginal: moment iteration did not converge");

    g.mu_ = mu;
    g.sigma_ = sigma;
    g.lambda_ = lambda;
    g.xgr_ = xgr;
    g.mean_ = mean;
    g.sd_ = sd;
    return g;
}

double GraftedMarginal::inverse_cdf(double u) const {
    if (!(u >= 0.0) || !(u < 1.0)) throw FieldError("grafted marginal: u must be in [0,1)");
    if (u <= pgr_) return lambda_ * std::pow(-std::log1p(-u), 1.0 / m_);
    return mu_ + sigma_ * normal_quantile(u);
}

double GraftedMarginal::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x <= xgr_) return -std::expm1(-std::pow(x / lambda_, m_));
    return normal_cdf((x - mu_) / sigma_);
}

double GraftedMarginal::pdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x <= xgr_) {
        const double t = std::pow(x / lambda_, m_);
        return m_ / x * t * std::exp(-t);
    }
    return normal_pdf((x - mu_) / sigma_) / sigma_;
}

CorrelatedGaussian::CorrelatedGaussian(const Box& box, double ell_rho, double var_capture,
                                       int max_grid_per_dim, int max_modes) {
    if (!(ell_rho > 0.0)) throw FieldError("correlated field: ell_rho must be positive");
    if (!(var_capture > 0.0) || !(var_capture <= 1.0))
        throw FieldError("correlated field: var_capture must be in (0,1]");
    ell_ = ell_rho;

    std::size_t n_total = 1;
    for (int a = 0; a < 3; ++a) {
        const double L = box.hi[a] - box.lo[a];
        if (!(L > 0.0)) throw FieldError("correlated field: degenerate domain");
        const int n = std::max(2, static_cast<int>(std::ceil(L / (ell_rho / 4.0))) + 1);
        if (n > max_grid_per_dim) {
            std::ostringstream msg;
            msg << "correlated field: axis " << a << " needs " << n
                << " anchor nodes (limit " << max_grid_per_dim
                << "); ell_rho is too small for this domain";
            throw FieldError(msg.str());
        }
        auto& ax = axes_[a];
        ax.nodes.resize(n);
        for (int i = 0; i < n; ++i)
            ax.nodes[i] = box.lo[a] + L * static_cast<double>(i) / (n - 1);

        Eigen::MatrixXd C(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double dx = (ax.nodes[i] - ax.nodes[j]) / ell_rho;
                C(i, j) = std::exp(-dx * dx);
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
        ax.vecs = es.eigenvectors();
        ax.vals = es.eigenvalues().cwiseMax(0.0);
        n_total *= static_cast<std::size_t>(n);
    }
    if (n_total > 8'000'000)
        throw FieldError("correlated field: anchor grid exceeds the mode-table limit");

    const double total = static_cast<double>(n_total); // unit diagonal per axis
    std::vector<Mode> all;
    all.reserve(n_total);
    const int nx = static_cast<int>(axes_[0].nodes.size());
    const int ny = static_cast<int>(axes_[1].nodes.size());
    const int nz = static_cast<int>(axes_[2].nodes.size());
    for (int ix = 0; ix < nx; ++ix)
        for (int iy = 0; iy < ny; ++iy)
            for (int iz = 0; iz < nz; ++iz)
                all.push_back({ix, iy, iz,
                               axes_[0].vals[ix] * axes_[1].vals[iy] * axes_[2].vals[iz]});
    std::sort(all.begin(), all.end(), [](const Mode& a, const Mode& b) {
        if (a.lambda != b.lambda) return a.lambda > b.lambda;
        if (a.ix != b.ix) return a.ix < b.ix;
        if (a.iy != b.iy) return a.iy < b.iy;
        return a.iz < b.iz;
    });
    double kept = 0.0;
    for (const auto& m : all) {
        modes_.push_back(m);
        kept += m.lambda;
        if (kept >= var_capture * total) break;
        if (static_cast<int>(modes_.size()) >= max_modes) {
            std::ostringstream msg;
            msg << "correlated field: " << max_modes << " modes capture only "
                << kept / total << " of the grid variance";
            throw FieldError(msg.str());
        }
    }
    captured_ = kept / total;
}

std::vector<double> CorrelatedGaussian::sample(const std::vector<Vec3>& points,
                                               rng::Stream& rs) const {
    std::vector<double> xi(modes_.size());
    for (auto& v : xi) v = rs.normal();

    std::vector<double> out;
    out.reserve(points.size());
    Eigen::VectorXd dots[3];
    for (const Vec3& p : points) {
        for (int a = 0; a < 3; ++a) {
            const auto& ax = axes_[a];
            const int n = static_cast<int>(ax.nodes.size());
            Eigen::VectorXd c(n);
            for (int i = 0; i < n; ++i) {
                const double dx = (p[a] - ax.nodes[i]) / ell_;
                c[i] = std::exp(-dx * dx);
            }
            dots[a] = ax.vecs.transpose() * c;
        }
        double val = 0.0, var = 0.0;
        for (std::size_t k = 0; k < modes_.size(); ++k) {
            const Mode& m = modes_[k];
            const double proj = dots[0][m.ix] * dots[1][m.iy] * dots[2][m.iz];
            if (m.lambda <= 0.0) continue;
            val += xi[k] * proj / std::sqrt(m.lambda);
            var += proj * proj / m.lambda;
        }
        out.push_back(var > 0.0 ? val / std::sqrt(var) : 0.0);
    }
    return out;
}

FieldRealization sample_field(const FieldSpec& spec, const std::vector<Vec3>& points,
                              const Box& domain, const GraftedMarginal& marginal,
                              std::uint64_t master_seed, int realization_index,
                              const CorrelatedGaussian* sampler) {
    if (realization_index < 1) throw FieldError("field realization index is 1-based");

    FieldRealization out;
    out.delta_h = marginal.delta_h();
    out.realization_index = realization_index;
    out.h.reserve(points.size());

    switch (spec.mode) {
    case CorrelationMode::Zero: {
        auto rs = rng::Stream(master_seed, "field.zero",
                              static_cast<std::uint64_t>(realization_index));
        for (std::size_t i = 0; i < points.size(); ++i)
            out.h.push_back(marginal.inverse_cdf(rs.uniform01()));
        break;
    }
    case CorrelationMode::Infinite: {
        if (realization_index > spec.n_sim)
            throw FieldError("field realization index exceeds n_sim for the stratified mode");
        const double u = (realization_index - 0.5) / spec.n_sim;
        const double h = marginal.inverse_cdf(u);
        out.h.assign(points.size(), h);
        break;
    }
    case CorrelationMode::Finite: {
        auto rs = rng::Stream(master_seed, "field.finite",
                              static_cast<std::uint64_t>(realization_index));
        std::vector<double> g;
        if (sampler) {
            g = sampler->sample(points, rs);
        } else {
            CorrelatedGaussian local(domain, spec.ell_rho);
            g = local.sample(points, rs);
        }
        for (double z : g) out.h.push_back(marginal.inverse_cdf(normal_cdf(z)));
        break;
    }
    }
    return out;
}

FieldRealization rescale_field(const FieldRealization& src, double delta_target, double h_floor) {
    if (!(src.delta_h > 0.0)) throw FieldError("rescale: source delta_h must be positive");
    FieldRealization out;
    out.delta_h = delta_target;
    out.realization_index = src.realization_index;
    out.h.reserve(src.h.size());
    const double f = delta_target / src.delta_h;
    for (double h : src.h) out.h.push_back(std::max(1.0 + (h - 1.0) * f, h_floor));
    return out;
}

ContactStrength apply_scaling(ScalingRule rule, double ft_bar, double Gt_bar, double E0,
                              double h) {
    const double lch_bar = E0 * Gt_bar / (ft_bar * ft_bar);
    ContactStrength cs;
    cs.ft = ft_bar * h;
    switch (rule) {
    case ScalingRule::FtOnly:
        cs.Gt = Gt_bar;
        cs.l_ch = lch_bar / (h * h);
        break;
    case ScalingRule::FtAndGt:
        cs.Gt = Gt_bar * h;
        cs.l_ch = lch_bar / h;
        break;
    case ScalingRule::FtAndGt2:
        cs.Gt = Gt_bar * (h * h);
        cs.l_ch = lch_bar;
        break;
    }
    return cs;
}

} // namespace mesofrac
