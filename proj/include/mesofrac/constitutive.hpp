/*
 * constitutive.hpp — vectorial damage law on a contact facet.
 *
 * Local strain e = (e_N, e_M, e_L) is the displacement jump at the facet
 * centroid divided by the particle center distance.  Stress follows the
 * secant relation s = (1 - d) E0 diag(1, alpha, alpha) e with the damage d
 * driven by an exponential softening envelope whose slope interpolates
 * between pure tension and pure shear as a function of the straining
 * direction.  Units: MPa, mm, N.
 */
#pragma once

#include "mesofrac/geom.hpp"

#include <stdexcept>

namespace mesofrac {

struct ConstitutiveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SnapbackError : ConstitutiveError {
    using ConstitutiveError::ConstitutiveError;
};

struct MaterialParams {
    double E0 = 27000.0;  // MPa
    double alpha = 0.24;  // shear/normal stiffness ratio
    double ft = 2.0;      // MPa, reference tensile strength
    double Gt = 0.025;    // N/mm, reference tensile fracture energy
    double omega0 = -0.78539816339744830961; // -pi/4; elastic below this direction
};

// sqrt(e_N^2 + alpha (e_M^2 + e_L^2))
double equivalent_strain(const Vec3& e, double alpha);

// straining direction: atan2(e_N, sqrt(alpha (e_M^2+e_L^2)));
// pi/2 in pure tension, 0 in pure shear, pi/2 for e == 0
double straining_direction(const Vec3& e, double alpha);

// strength envelope f_eq(omega).  Evaluated in the conjugate-rationalized
// form 9 ft / (4.52 sin w + sqrt(20.0704 sin^2 w + 9 alpha cos^2 w)), which
// is algebraically identical to the quotient form but has no removable
// singularity inside the tensile branch; returns exactly ft at w = pi/2.
double strength_envelope(double omega, double ft, double alpha);

// softening slopes; both denominators must stay positive and Kt > Ks for the
// interpolation exponent to exist (throws SnapbackError / ConstitutiveError)
struct SofteningSlopes {
    double Kt = 0.0;
    double Ks = 0.0;
    double nt = 0.0;
};
SofteningSlopes softening_slopes(double E0, double ft, double Gt, double length, double alpha,
                                 double omega0);

// K(omega) <= 0 on (omega0, pi/2]
double softening_slope(double omega, const SofteningSlopes& sl, double omega0);

// Everything a contact needs at solve time, precomputed once.
struct ContactLaw {
    double E0 = 0.0, alpha = 0.0, ft = 0.0, Gt = 0.0;
    double omega0 = 0.0;
    double length = 0.0, area = 0.0;
    bool elastic_only = false;
    SofteningSlopes slopes;
};
ContactLaw make_contact_law(const MaterialParams& p, double ft, double Gt, double length,
                            double area, bool elastic_only);

// Damage saturates just below one so a fully cracked contact keeps a tiny
// residual stiffness.  The cap is part of the law, not only of the solver:
// stress and assembled stiffness must degrade by the same factor, otherwise
// wide-open cracks leave an irreducible force imbalance.
inline constexpr double kDamageCap = 1.0 - 1e-9;

struct ContactState {
    Vec3 e{0, 0, 0};  // local strain at last commit
    Vec3 s{0, 0, 0};  // local stress at last commit, MPa
    double d = 0.0;   // damage
    double max_eN2 = 0.0, max_eT2 = 0.0; // history maxima of e_N^2 and e_M^2+e_L^2
    double w_dis = 0.0; // dissipated energy, N mm
};

// One constitutive evaluation: running maxima, direction, envelope, damage and
// the trapezoidal dissipation increment from prev to the new state.  Pure
// function of (prev, e_new); commit by assignment.
ContactState update_state(const ContactState& prev, const Vec3& e_new, const ContactLaw& law);

// strain energy currently stored in the contact, N mm
double strain_energy(const ContactState& st, const ContactLaw& law);

// Local strain from rigid-body kinematics of the two particles:
// jump = (u_j + th_j x (c - x_j)) - (u_i + th_i x (c - x_i)), e = R jump / l.
Vec3 strain_from_kinematics(const Vec3& u_i, const Vec3& th_i, const Vec3& x_i, const Vec3& u_j,
                            const Vec3& th_j, const Vec3& x_j, const Vec3& centroid, double length,
                            const Vec3& n, const Vec3& m, const Vec3& l);

} // namespace mesofrac
