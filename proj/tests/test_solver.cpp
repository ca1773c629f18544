#include "mesofrac/solver.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace mesofrac;

namespace {

// three rigid bodies in a row: contact A (elastic) then contact B (softening);
// the gauge controls the opening across B, so the series system snaps back in
// total stretch without troubling the solver
struct Chain {
    Mesostructure mesh;
    Problem problem;
    MaterialParams mat;

    explicit Chain(double ft = 2.0, double Gt = 0.025, bool free_spin = false) {
        mat.ft = ft;
        mat.Gt = Gt;

        mesh.domain = Box{{0, 0, 0}, {30, 10, 10}};
        mesh.particles.resize(3);
        for (int i = 0; i < 3; ++i) {
            mesh.particles[i].center = Vec3(5.0 + 10.0 * i, 5, 5);
            mesh.particles[i].radius = 2.0;
        }
        auto contact = [&](int i, int j, bool elastic) {
            Contact c;
            c.i = i;
            c.j = j;
            c.centroid = Vec3(0.5 * (mesh.particles[i].center.x() +
                                     mesh.particles[j].center.x()),
                              5, 5);
            c.area = 25.0;
            c.length = 10.0;
            c.n = Vec3(1, 0, 0);
            orthonormal_frame(c.n, c.m, c.l);
            c.elastic_only = elastic;
            return c;
        };
        mesh.contacts.push_back(contact(0, 1, true));
        mesh.contacts.push_back(contact(1, 2, false));

        problem.mesh = &mesh;
        auto& bcs = problem.bcs;
        for (int c = 0; c < 6; ++c) bcs.fixed.emplace_back(0, c);
        for (int p : {1, 2})
            for (int c = 1; c < 6; ++c)
                if (!(free_spin && p == 2 && c == 3)) bcs.fixed.emplace_back(p, c);
        bcs.point_load.emplace_back(2, 0, 1.0);

        Gauge g;
        g.pa = 1;
        g.pb = 2;
        g.xa = g.xb = mesh.contacts[1].centroid;
        g.dir = Vec3(1, 0, 0);
        bcs.gauges.push_back(g);
        bcs.elastic_only_particle.assign(3, 0);
        bcs.termination.post_peak_fraction = 0.0;

        for (const Contact& c : mesh.contacts)
            problem.laws.push_back(
                make_contact_law(mat, mat.ft, mat.Gt, c.length, c.area, c.elastic_only));
    }
};

// fixed-step schedule: steps of exactly target/n up to the cap
StepControl fixed_steps(double target, int n) {
    StepControl sc;
    sc.cmod_initial = target / n;
    sc.cmod_max = sc.cmod_initial;
    sc.step_fraction = 1e12; // relative cap disabled
    sc.peak_refine = 1.0;    // peak refinement disabled
    return sc;
}

} // namespace

TEST_SUITE_BEGIN("solver");

TEST_CASE("softening chain traces the single-contact law") {
    Chain ch;
    const double e0 = ch.mat.ft / ch.mat.E0;
    const double target = 3 * e0 * 10.0; // gauge opening at 3 e0
    StepControl sc = fixed_steps(target, 12);
    ch.problem.bcs.termination.cmod_cap = 0.9999 * target;

    const SimulationResult res = run_simulation(ch.problem, sc);
    REQUIRE(res.steps.size() == 12);
    CHECK(res.status == RunStatus::CmodCap);

    // the schedule is exact: step k sits at k/12 of the target
    for (int k = 0; k < 12; ++k)
        CHECK(res.steps[k].cmod ==
              doctest::Approx(target * (k + 1) / 12.0).epsilon(1e-12));

    // peak P = ft * A at the grid point e_N = e0 (step 4)
    CHECK(res.peak_index == 3);
    CHECK(res.peak_P == doctest::Approx(50.0).epsilon(1e-9));
    CHECK(res.peak_cmod == doctest::Approx(e0 * 10.0).epsilon(1e-12));

    // frozen softening spot value at e_N = 3 e0
    CHECK(res.steps.back().P == doctest::Approx(44.251337670905315).epsilon(1e-9));

    // first damage appears at the elastic-limit grid point (give or take one
    // ulp-sensitive step), and only on contact B
    CHECK(res.first_damage_step[0] == -1);
    CHECK(res.first_damage_step[1] >= 4);
    CHECK(res.first_damage_step[1] <= 5);
    CHECK(res.first_damage_cmod[1] ==
          doctest::Approx(target * res.first_damage_step[1] / 12.0).epsilon(1e-12));

    // energy books close
    CHECK(res.max_energy_residual < 5e-3);
    CHECK(res.steps.back().w_dis > 0.0);
    CHECK(res.final_states[0].d == 0.0);
    CHECK(res.final_states[1].d > 0.0);
}

TEST_CASE("elastic spot load: P = E0 A u / l") {
    Chain ch(4.0, 0.05); // higher strength keeps e_N = 1e-4 elastic
    StepControl sc = fixed_steps(1e-3, 1);
    ch.problem.bcs.termination.cmod_cap = 0.5e-3;

    const SimulationResult res = run_simulation(ch.problem, sc);
    REQUIRE(!res.steps.empty());
    CHECK(res.steps[0].cmod == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(res.steps[0].P == doctest::Approx(67.5).epsilon(1e-12));
    CHECK(res.steps[0].iterations <= 2);
    CHECK(res.final_states[1].d == 0.0);
}

TEST_CASE("strength scaling by h maps responses exactly") {
    // ft' = h ft and Gt' = h^2 Gt turn P(c) into h P(c / h): running the
    // scaled chain over a h-scaled schedule must reproduce the base loads
    const double h = 2.0;
    Chain base(2.0, 0.025);
    Chain scaled(2.0 * h, 0.025 * h * h);

    const double e0 = base.mat.ft / base.mat.E0;
    const double target = 3 * e0 * 10.0;
    StepControl sc_base = fixed_steps(target, 10);
    StepControl sc_scaled = fixed_steps(h * target, 10);
    base.problem.bcs.termination.cmod_cap = 0.9999 * target;
    scaled.problem.bcs.termination.cmod_cap = 0.9999 * h * target;

    const SimulationResult rb = run_simulation(base.problem, sc_base);
    const SimulationResult rs = run_simulation(scaled.problem, sc_scaled);
    REQUIRE(rb.steps.size() == rs.steps.size());
    for (std::size_t k = 0; k < rb.steps.size(); ++k) {
        CHECK(rs.steps[k].cmod == doctest::Approx(h * rb.steps[k].cmod).epsilon(1e-12));
        CHECK(rs.steps[k].P == doctest::Approx(h * rb.steps[k].P).epsilon(1e-10));
    }
    CHECK(rs.peak_P == doctest::Approx(h * rb.peak_P).epsilon(1e-10));
}

TEST_CASE("a stiffness-free dof is reported by name") {
    // particle 2 spinning about the chain axis stores no energy anywhere
    Chain ch(2.0, 0.025, /*free_spin=*/true);
    StepControl sc = fixed_steps(1e-3, 1);
    try {
        (void)run_simulation(ch.problem, sc);
        FAIL("expected SingularSystemError");
    } catch (const SingularSystemError& e) {
        const std::string msg = e.what();
        CHECK_MESSAGE(msg.find("particle 2 rotation-x") != std::string::npos, msg);
    }
}

TEST_CASE("dof map: fixed, free and platen-tied") {
    Mesostructure m;
    m.domain = Box{{0, 0, 0}, {30, 10, 10}};
    m.particles.resize(3);
    m.particles[0].center = Vec3(0, 2, 3);
    m.particles[1].center = Vec3(0, 8, 1);
    m.particles[2].center = Vec3(15, 5, 5);

    BoundaryConditions bcs;
    PlatenConstraint pl;
    pl.particles = {0, 1};
    pl.axis = 0;
    pl.rotating = true;
    pl.driven = true;
    pl.center = Vec3(0, 5, 5);
    bcs.platens.push_back(pl);
    bcs.fixed.emplace_back(2, 2);

    DofMap dofs(m, bcs);
    // 18 particle dofs - 2 tied - 1 fixed + 3 masters = 18
    CHECK(dofs.n_reduced() == 18);
    CHECK(dofs.platen_master(0, 0) >= 0);
    CHECK(dofs.platen_master(0, 1) >= 0);
    CHECK(dofs.platen_master(0, 2) >= 0);

    // the tied x-translation expands to U + th_a r_z - th_b r_y
    Eigen::VectorXd u = Eigen::VectorXd::Zero(18);
    const int mu = dofs.platen_master(0, 0);
    const int ma = dofs.platen_master(0, 1);
    const int mb = dofs.platen_master(0, 2);
    u[mu] = 0.7;
    u[ma] = 0.01;
    u[mb] = -0.02;
    const Eigen::VectorXd full = dofs.to_full(u);
    const Vec3 r0 = m.particles[0].center - pl.center; // (0, -3, -2)
    const Vec3 r1 = m.particles[1].center - pl.center; // (0, 3, -4)
    CHECK(full[0] == doctest::Approx(0.7 + 0.01 * r0.z() + 0.02 * r0.y()).epsilon(1e-15));
    CHECK(full[6] == doctest::Approx(0.7 + 0.01 * r1.z() + 0.02 * r1.y()).epsilon(1e-15));
    // fixed dof stays zero, free dofs map one-to-one
    CHECK(full[2 * 6 + 2] == 0.0);
    CHECK(dofs.describe(mu).find("platen 0 translation master") != std::string::npos);
}

TEST_CASE("gauge opening follows both attachment points") {
    Mesostructure m;
    m.domain = Box{{0, 0, 0}, {20, 10, 10}};
    m.particles.resize(2);
    m.particles[0].center = Vec3(5, 5, 5);
    m.particles[1].center = Vec3(15, 5, 5);

    Gauge g;
    g.pa = 0;
    g.pb = 1;
    g.xa = Vec3(4, 5, 5);
    g.xb = Vec3(16, 5, 5);
    g.dir = Vec3(1, 0, 0);

    Eigen::VectorXd u = Eigen::VectorXd::Zero(12);
    u[0] = 0.1;          // particle 0 moves +x
    u[6] = 0.4;          // particle 1 moves +x
    CHECK(gauge_opening(g, m, u) == doctest::Approx(0.3).epsilon(1e-15));

    // rotation of particle 1 about z sweeps the attachment x = 16:
    // du = th x (xb - center) = 0.01 * (0,0,1) x (1,0,0) = (0, 0.01, 0)
    u[6 + 5] = 0.01;
    CHECK(gauge_opening(g, m, u) == doctest::Approx(0.3).epsilon(1e-13));
    g.dir = Vec3(0, 1, 0);
    CHECK(gauge_opening(g, m, u) == doctest::Approx(0.01).epsilon(1e-13));
}

TEST_SUITE_END();
