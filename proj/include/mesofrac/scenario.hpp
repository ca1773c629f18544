/*
 * scenario.hpp — test configurations: three-point bending (plain and
 * notched) and uniaxial tension with fixed or rotating end platens.
 * Scenario geometry defaults to half the laboratory dimensions with the
 * aggregate size kept, which keeps batches desk-sized; scale is a parameter.
 */
#pragma once

#include "mesofrac/constitutive.hpp"
#include "mesofrac/mesostructure.hpp"
#include "mesofrac/randomfield.hpp"

#include <optional>
#include <vector>

namespace mesofrac {

enum class ScenarioKind { BendUnnotched, BendNotched, TensionRotating, TensionFixed };

const char* scenario_name(ScenarioKind k);
std::optional<ScenarioKind> parse_scenario(const std::string& name);

struct Scenario {
    ScenarioKind kind = ScenarioKind::BendUnnotched;
    double scale = 0.5;
    // resolved geometry, mm
    double length = 0, depth = 0, thickness = 0;
    double span = 0;        // bending only
    double notch_depth = 0; // BendNotched only
    int n_gauges = 9;
    double gauge_length = 0;

    Box domain() const;
    std::optional<NotchSpec> notch() const;
};

Scenario make_scenario(ScenarioKind kind, double scale = 0.5);

// virtual extensometer: opening = (u(xb on pb) - u(xa on pa)) . dir
struct Gauge {
    int pa = -1, pb = -1;
    Vec3 xa{0, 0, 0}, xb{0, 0, 0};
    Vec3 dir{1, 0, 0};
};

// rigid-plane multipoint constraint on one translation component of a set of
// particles; rotating platens leave two in-plane rotations as free unknowns
struct PlatenConstraint {
    std::vector<int> particles;
    int axis = 0;
    bool rotating = false;
    bool driven = false; // unit load applied on the plane translation master
    Vec3 center{0, 0, 0};
};

struct Termination {
    double post_peak_fraction = 1.0 / 3.0; // stop once P <= fraction * P_max past peak
    int max_steps = 4000;
    double cmod_cap = 1.0; // mm, safety
};

struct BoundaryConditions {
    std::vector<std::pair<int, int>> fixed;                 // (particle, component 0..5)
    std::vector<PlatenConstraint> platens;
    std::vector<std::tuple<int, int, double>> point_load;   // (particle, component, coeff)
    std::vector<std::tuple<int, int, double>> deflection;   // probe; platen U when empty
    std::vector<Gauge> gauges;
    std::vector<char> elastic_only_particle;                // per particle
    Termination termination;
};

// Selects support/load/grip particles, builds gauges and termination rules.
BoundaryConditions build_bcs(const Scenario& sc, const Mesostructure& m);

// Fully assembled job: mesostructure + per-contact laws + constraints.
struct Problem {
    const Mesostructure* mesh = nullptr;
    BoundaryConditions bcs;
    std::vector<ContactLaw> laws;
};

// Applies the strength field (h == nullptr means deterministic h = 1) and the
// snap-back length guard length < 2 E0 Gt / ft^2 at nominal parameters.
Problem build_problem(const Mesostructure& m, const Scenario& sc, const MaterialParams& mat,
                      const FieldRealization* h = nullptr,
                      ScalingRule rule = ScalingRule::FtAndGt2);

} // namespace mesofrac
