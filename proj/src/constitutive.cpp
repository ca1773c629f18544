/*
 * constitutive.cpp — facet damage law.
 */
#include "mesofrac/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mesofrac {

namespace {
constexpr double kHalfPi = 1.5707963267948966;
}

double equivalent_strain(const Vec3& e, double alpha) {
    return std::sqrt(e[0] * e[0] + alpha * (e[1] * e[1] + e[2] * e[2]));
}

double straining_direction(const Vec3& e, double alpha) {
    const double t2 = alpha * (e[1] * e[1] + e[2] * e[2]);
    if (t2 == 0.0 && e[0] == 0.0) return kHalfPi;
    return std::atan2(e[0], std::sqrt(t2));
}

double strength_envelope(double omega, double ft, double alpha) {
    if (omega >= kHalfPi) return ft;
    const double sw = std::sin(omega), cw = std::cos(omega);
    const double root = std::sqrt(20.0704 * sw * sw + 9.0 * alpha * cw * cw);
    return 9.0 * ft / (4.52 * sw + root);
}

SofteningSlopes softening_slopes(double E0, double ft, double Gt, double length, double alpha,
                                 double omega0) {
    const double den_t = 2.0 * E0 * Gt - ft * ft * length;
    if (den_t <= 0.0) {
        std::ostringstream msg;
        msg << "contact length " << length << " mm reaches the snap-back limit "
            << 2.0 * E0 * Gt / (ft * ft) << " mm for tension";
        throw SnapbackError(msg.str());
    }
    const double den_s = 32.0 * alpha * E0 * Gt - 9.0 * ft * ft * length;
    if (den_s <= 0.0) {
        std::ostringstream msg;
        msg << "contact length " << length << " mm reaches the snap-back limit "
            << 32.0 * alpha * E0 * Gt / (9.0 * ft * ft) << " mm for shear";
        throw SnapbackError(msg.str());
    }
    SofteningSlopes sl;
    sl.Kt = 2.0 * E0 * ft * ft * length / den_t;
    sl.Ks = 18.0 * alpha * E0 * ft * ft * length / den_s;
    if (!(sl.Kt > sl.Ks))
        throw ConstitutiveError("softening: tensile slope must exceed the shear slope");
    const double base = 1.0 - 2.0 * omega0 / 3.14159265358979323846;
    if (!(base > 1.0))
        throw ConstitutiveError("softening: direction limit must lie below pi/2");
    sl.nt = std::log(sl.Kt / (sl.Kt - sl.Ks)) / std::log(base);
    return sl;
}

double softening_slope(double omega, const SofteningSlopes& sl, double omega0) {
    if (omega <= omega0) return 0.0;
    double t = (kHalfPi - omega) / (kHalfPi - omega0);
    t = std::clamp(t, 0.0, 1.0);
    return -sl.Kt * (1.0 - std::pow(t, sl.nt));
}

ContactLaw make_contact_law(const MaterialParams& p, double ft, double Gt, double length,
                            double area, bool elastic_only) {
    ContactLaw law;
    law.E0 = p.E0;
    law.alpha = p.alpha;
    law.ft = ft;
    law.Gt = Gt;
    law.omega0 = p.omega0;
    law.length = length;
    law.area = area;
    law.elastic_only = elastic_only;
    if (!elastic_only) law.slopes = softening_slopes(p.E0, ft, Gt, length, p.alpha, p.omega0);
    return law;
}

ContactState update_state(const ContactState& prev, const Vec3& e_new, const ContactLaw& law) {
    ContactState st = prev;
    st.e = e_new;
    st.max_eN2 = std::max(prev.max_eN2, e_new[0] * e_new[0]);
    st.max_eT2 = std::max(prev.max_eT2, e_new[1] * e_new[1] + e_new[2] * e_new[2]);

    double d = prev.d;
    const double e_eq = equivalent_strain(e_new, law.alpha);
    if (!law.elastic_only && e_eq > 0.0) {
        const double omega = straining_direction(e_new, law.alpha);
        if (omega > law.omega0) {
            const double chi = std::sqrt(st.max_eN2 + law.alpha * st.max_eT2);
            const double feq = strength_envelope(omega, law.ft, law.alpha);
            const double e0 = feq / law.E0;
            if (chi > e0) {
                const double K = softening_slope(omega, law.slopes, law.omega0);
                const double bound = feq * std::exp(K * (chi - e0) / feq);
                d = std::max(d, std::min(1.0 - bound / (law.E0 * chi), kDamageCap));
            }
        }
    }
    st.d = d;

    const Vec3 c0e(law.E0 * e_new[0], law.E0 * law.alpha * e_new[1], law.E0 * law.alpha * e_new[2]);
    st.s = (1.0 - d) * c0e;

    // trapezoidal work minus stored-energy change, reduced to a cross term
    const double cross = prev.s.dot(st.e) - st.s.dot(prev.e);
    st.w_dis = prev.w_dis + 0.5 * law.area * law.length * cross;
    return st;
}

double strain_energy(const ContactState& st, const ContactLaw& law) {
    return 0.5 * law.area * law.length * st.s.dot(st.e);
}

Vec3 strain_from_kinematics(const Vec3& u_i, const Vec3& th_i, const Vec3& x_i, const Vec3& u_j,
                            const Vec3& th_j, const Vec3& x_j, const Vec3& centroid, double length,
                            const Vec3& n, const Vec3& m, const Vec3& l) {
    const Vec3 jump =
        (u_j + th_j.cross(centroid - x_j)) - (u_i + th_i.cross(centroid - x_i));
    return Vec3(n.dot(jump), m.dot(jump), l.dot(jump)) / length;
}

} // namespace mesofrac
