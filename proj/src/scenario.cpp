/*
 * scenario.cpp — specimen geometry, supports, platens, gauges.
 */
#include "mesofrac/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace mesofrac {

const char* scenario_name(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::BendUnnotched: return "bend-unnotched";
    case ScenarioKind::BendNotched: return "bend-notched";
    case ScenarioKind::TensionRotating: return "tension-rotating";
    case ScenarioKind::TensionFixed: return "tension-fixed";
    }
    return "?";
}

std::optional<ScenarioKind> parse_scenario(const std::string& name) {
    if (name == "bend-unnotched") return ScenarioKind::BendUnnotched;
    if (name == "bend-notched") return ScenarioKind::BendNotched;
    if (name == "tension-rotating") return ScenarioKind::TensionRotating;
    if (name == "tension-fixed") return ScenarioKind::TensionFixed;
    return std::nullopt;
}

Box Scenario::domain() const {
    Box b;
    switch (kind) {
    case ScenarioKind::BendUnnotched:
    case ScenarioKind::BendNotched:
        b.lo = Vec3(-0.5 * length, 0.0, 0.0);
        b.hi = Vec3(0.5 * length, depth, thickness);
        break;
    case ScenarioKind::TensionRotating:
    case ScenarioKind::TensionFixed:
        b.lo = Vec3(0.0, 0.0, 0.0);
        b.hi = Vec3(length, depth, thickness);
        break;
    }
    return b;
}

std::optional<NotchSpec> Scenario::notch() const {
    if (kind == ScenarioKind::BendNotched) return NotchSpec{0.0, notch_depth};
    return std::nullopt;
}

Scenario make_scenario(ScenarioKind kind, double scale) {
    Scenario sc;
    sc.kind = kind;
    sc.scale = scale;
    switch (kind) {
    case ScenarioKind::BendUnnotched:
    case ScenarioKind::BendNotched:
        sc.length = 720.0 * scale;
        sc.depth = 150.0 * scale;
        sc.thickness = 40.0 * scale;
        sc.span = 600.0 * scale;
        sc.notch_depth = kind == ScenarioKind::BendNotched ? 75.0 * scale : 0.0;
        sc.n_gauges = kind == ScenarioKind::BendNotched ? 1 : 9;
        sc.gauge_length = 20.0 * scale;
        break;
    case ScenarioKind::TensionRotating:
    case ScenarioKind::TensionFixed:
        sc.length = 450.0 * scale;
        sc.depth = 120.0 * scale;
        sc.thickness = 40.0 * scale;
        sc.span = 0.0;
        sc.notch_depth = 0.0;
        sc.n_gauges = 9;
        sc.gauge_length = 0.7 * sc.length / 9.0;
        break;
    }
    return sc;
}

namespace {

int nearest_particle(const Mesostructure& m, const Vec3& p, const std::set<int>& exclude = {},
                     const std::function<bool(const Particle&)>& pred = nullptr) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(m.particles.size()); ++i) {
        if (exclude.count(i)) continue;
        if (pred && !pred(m.particles[i])) continue;
        const double d = (m.particles[i].center - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (best < 0) throw MesostructureError("no particle available near a fixture point");
    return best;
}

Gauge make_gauge(const Vec3& xa, const Vec3& xb, int pa, int pb) {
    Gauge g;
    g.pa = pa;
    g.pb = pb;
    g.xa = xa;
    g.xb = xb;
    g.dir = (xb - xa).normalized();
    return g;
}

void mark(std::vector<char>& flags, int i) { flags[static_cast<std::size_t>(i)] = 1; }

} // namespace

BoundaryConditions build_bcs(const Scenario& sc, const Mesostructure& m) {
    BoundaryConditions bcs;
    bcs.elastic_only_particle.assign(m.particles.size(), 0);
    const Box dom = sc.domain();
    const double b = sc.thickness, D = sc.depth;
    const double zmid = 0.5 * b;

    if (sc.kind == ScenarioKind::BendUnnotched || sc.kind == ScenarioKind::BendNotched) {
        const double xs = 0.5 * sc.span;
        std::set<int> taken;
        const int sup_l1 = nearest_particle(m, Vec3(-xs, 0, 0.25 * b), taken);
        taken.insert(sup_l1);
        const int sup_l2 = nearest_particle(m, Vec3(-xs, 0, 0.75 * b), taken);
        taken.insert(sup_l2);
        const int sup_r1 = nearest_particle(m, Vec3(xs, 0, 0.25 * b), taken);
        taken.insert(sup_r1);
        const int sup_r2 = nearest_particle(m, Vec3(xs, 0, 0.75 * b), taken);
        taken.insert(sup_r2);
        const int load1 = nearest_particle(m, Vec3(0, D, 0.25 * b), taken);
        taken.insert(load1);
        const int load2 = nearest_particle(m, Vec3(0, D, 0.75 * b), taken);
        taken.insert(load2);

        // left supports block the axial direction, right ones roll
        for (int p : {sup_l1, sup_l2}) {
            bcs.fixed.emplace_back(p, 0);
            bcs.fixed.emplace_back(p, 1);
            bcs.fixed.emplace_back(p, 2);
        }
        for (int p : {sup_r1, sup_r2}) {
            bcs.fixed.emplace_back(p, 1);
            bcs.fixed.emplace_back(p, 2);
        }
        bcs.point_load.emplace_back(load1, 1, -0.5);
        bcs.point_load.emplace_back(load2, 1, -0.5);
        bcs.deflection.emplace_back(load1, 1, -0.5);
        bcs.deflection.emplace_back(load2, 1, -0.5);
        for (int p : {sup_l1, sup_l2, sup_r1, sup_r2, load1, load2})
            mark(bcs.elastic_only_particle, p);

        if (sc.kind == ScenarioKind::BendNotched) {
            const double g = sc.gauge_length;
            const Vec3 xa(-0.5 * g, 0, zmid), xb(0.5 * g, 0, zmid);
            const int pa = nearest_particle(m, xa, {},
                                            [](const Particle& p) { return p.center.x() < 0; });
            const int pb = nearest_particle(m, xb, {},
                                            [](const Particle& p) { return p.center.x() > 0; });
            bcs.gauges.push_back(make_gauge(xa, xb, pa, pb));
        } else {
            const double g = sc.gauge_length;
            const double c_max = sc.span / 6.0 - 0.5 * g;
            for (int k = 0; k < sc.n_gauges; ++k) {
                const double t = sc.n_gauges > 1
                                     ? static_cast<double>(k) / (sc.n_gauges - 1)
                                     : 0.5;
                const double c = -c_max + 2.0 * c_max * t;
                const Vec3 xa(c - 0.5 * g, 0, zmid), xb(c + 0.5 * g, 0, zmid);
                bcs.gauges.push_back(
                    make_gauge(xa, xb, nearest_particle(m, xa), nearest_particle(m, xb)));
            }
        }
        bcs.termination.post_peak_fraction = 1.0 / 3.0;
    } else {
        // tension: x- face gripped and held, x+ face gripped and driven
        const bool rotating = sc.kind == ScenarioKind::TensionRotating;
        PlatenConstraint left, right;
        left.axis = right.axis = 0;
        left.rotating = right.rotating = rotating;
        left.driven = false;
        right.driven = true;
        left.center = Vec3(dom.lo.x(), 0.5 * D, zmid);
        right.center = Vec3(dom.hi.x(), 0.5 * D, zmid);
        for (int i = 0; i < static_cast<int>(m.particles.size()); ++i) {
            const std::uint8_t mask = m.particles[i].wall_mask;
            if (mask & 0x01) left.particles.push_back(i);
            if (mask & 0x02) right.particles.push_back(i);
        }
        if (left.particles.size() < 3 || right.particles.size() < 3)
            throw MesostructureError("tension: a gripped face holds fewer than 3 particles");
        bcs.platens.push_back(left);
        bcs.platens.push_back(right);
        for (int p : left.particles) mark(bcs.elastic_only_particle, p);
        for (int p : right.particles) mark(bcs.elastic_only_particle, p);

        // pins on symmetry lines remove the remaining rigid modes
        const int pin_a = nearest_particle(m, Vec3(dom.lo.x(), 0.5 * D, zmid));
        const int pin_b = nearest_particle(m, Vec3(dom.hi.x(), 0.5 * D, zmid));
        const int pin_c = nearest_particle(m, Vec3(dom.lo.x(), 0.0, zmid), {pin_a});
        bcs.fixed.emplace_back(pin_a, 1);
        bcs.fixed.emplace_back(pin_a, 2);
        bcs.fixed.emplace_back(pin_b, 1);
        bcs.fixed.emplace_back(pin_b, 2);
        bcs.fixed.emplace_back(pin_c, 2);
        for (int p : {pin_a, pin_b, pin_c}) mark(bcs.elastic_only_particle, p);

        const double glen = sc.gauge_length;
        const double x_start = dom.lo.x() + 0.15 * sc.length;
        for (int k = 0; k < sc.n_gauges; ++k) {
            const Vec3 xa(x_start + k * glen, 0.5 * D, zmid);
            const Vec3 xb(x_start + (k + 1) * glen, 0.5 * D, zmid);
            bcs.gauges.push_back(
                make_gauge(xa, xb, nearest_particle(m, xa), nearest_particle(m, xb)));
        }
        bcs.termination.post_peak_fraction = 0.9;
    }
    return bcs;
}

Problem build_problem(const Mesostructure& m, const Scenario& sc, const MaterialParams& mat,
                      const FieldRealization* h, ScalingRule rule) {
    Problem pr;
    pr.mesh = &m;
    pr.bcs = build_bcs(sc, m);
    if (h && h->h.size() != m.contacts.size())
        throw FieldError("strength field size does not match the contact count");

    const double l_limit = 2.0 * mat.E0 * mat.Gt / (mat.ft * mat.ft);
    pr.laws.reserve(m.contacts.size());
    for (std::size_t k = 0; k < m.contacts.size(); ++k) {
        const Contact& c = m.contacts[k];
        const bool elastic = c.elastic_only || pr.bcs.elastic_only_particle[c.i] ||
                             pr.bcs.elastic_only_particle[c.j];
        if (!elastic && c.length >= l_limit) {
            std::ostringstream msg;
            msg << "contact " << k << " (particles " << c.i << "-" << c.j << ") has length "
                << c.length << " mm >= the snap-back limit " << l_limit << " mm";
            throw SnapbackError(msg.str());
        }
        double ft = mat.ft, Gt = mat.Gt;
        if (h) {
            const ContactStrength cs = apply_scaling(rule, mat.ft, mat.Gt, mat.E0, h->h[k]);
            ft = cs.ft;
            Gt = cs.Gt;
        }
        pr.laws.push_back(make_contact_law(mat, ft, Gt, c.length, c.area, elastic));
    }
    return pr;
}

} // namespace mesofrac
