/*
 * mesostructure.hpp — random aggregate structures: sieve sampling, sequential
 * sphere packing, power-diagram tessellation into contact facets, optional
 * notch cutting, validation, and a versioned re-loadable dump.
 *
 * Units: mm throughout.
 */
#pragma once

#include "mesofrac/geom.hpp"
#include "mesofrac/rng.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mesofrac {

struct MesostructureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PackingFailure : MesostructureError {
    using MesostructureError::MesostructureError;
};

struct SieveSpec {
    double d_min = 4.0;         // mm
    double d_max = 10.0;        // mm
    double exponent = 0.5;      // cumulative-volume curve exponent
    double volume_fraction = 0.294; // of the packed domain volume, in (0,1]
};

// cumulative volume fraction passing diameter d on [d_min, d_max]
double sieve_cdf(const SieveSpec& s, double d);

// fraction of the untruncated curve (starting at 0) carried by [d_min, d_max];
// converts a total aggregate fraction to the explicitly modeled coarse one
double coarse_share(const SieveSpec& s);

// Diameters drawn so cumulative volume passing follows sieve_cdf; total sphere
// volume reaches volume_fraction * target_volume within one aggregate volume.
// Sorted descending.  Throws MesostructureError on invalid specs.
std::vector<double> sample_sieve(const SieveSpec& s, double target_volume, rng::Stream& rs);

struct Particle {
    Vec3 center{0, 0, 0};
    double radius = 0.0;
    std::uint8_t wall_mask = 0; // bit f set when the cell touches box face f (x-,x+,y-,y+,z-,z+)
};

// Largest-first random sequential placement, exact non-overlap, centers kept
// radius-deep inside the box.  Throws PackingFailure when a sphere cannot be
// placed within max_trials attempts.
std::vector<Particle> pack_aggregates(const std::vector<double>& diameters, const Box& box,
                                      rng::Stream& rs, int max_trials = 20000);

struct NotchSpec {
    double x = 0.0;     // cutting plane position
    double depth = 0.0; // cut extends over y in [box.lo.y, box.lo.y + depth]
};

struct Contact {
    int i = -1, j = -1;      // particle indices, i < j
    Vec3 centroid{0, 0, 0};  // facet centroid
    double area = 0.0;       // facet area, mm^2
    double length = 0.0;     // particle center distance, mm
    Vec3 n{0, 0, 0};         // unit normal, points i -> j
    Vec3 m{0, 0, 0}, l{0, 0, 0}; // in-plane frame completing (n,m,l)
    bool elastic_only = false;
};

struct Mesostructure {
    Box domain;
    std::vector<Particle> particles;
    std::vector<Contact> contacts;
    std::optional<NotchSpec> notch;
    int dropped_small_facets = 0;
    int removed_by_notch = 0;
    int generation_attempts = 1;

    std::vector<int> contact_degree() const;
};

// Power (Laguerre) diagram of the packed spheres clipped to the box; one
// contact per interior facet, facets below area_epsilon dropped and counted.
Mesostructure tessellate(const std::vector<Particle>& particles, const Box& box,
                         const std::optional<NotchSpec>& notch = std::nullopt,
                         double area_epsilon = 1e-6);

// Single power cell of particle i (the cells partition the box exactly).
ConvexCell power_cell(const std::vector<Particle>& particles, const Box& box, int i);

// Connectivity of the contact graph plus a minimum facet count of two per
// particle (a single-facet particle carries an exact zero-energy spin mode).
// Throws MesostructureError naming the offending particle otherwise.
void validate_connectivity(const Mesostructure& m);

// All-in-one deterministic generation: sieve + pack + tessellate + validate,
// retried with (seed, attempt)-derived substreams when validation fails.
struct MesoConfig {
    SieveSpec sieve;
    Box domain;
    std::optional<NotchSpec> notch;
    int max_trials = 20000;
    double area_epsilon = 1e-6;
    int max_attempts = 8;
};
Mesostructure generate_mesostructure(const MesoConfig& cfg, std::uint64_t master_seed,
                                     std::uint64_t index);

// versioned text dump, bitwise-stable for identical inputs
std::string dump_mesostructure(const Mesostructure& m);
Mesostructure load_mesostructure(const std::string& text);
void save_mesostructure(const Mesostructure& m, const std::string& path);
Mesostructure load_mesostructure_file(const std::string& path);
std::string mesostructure_hash(const Mesostructure& m); // FNV-1a of the dump, hex

} // namespace mesofrac
