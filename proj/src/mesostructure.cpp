/*
 * mesostructure.cpp — sieve sampling, sphere packing, power tessellation.
 */
#include "mesofrac/mesostructure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>

namespace mesofrac {

namespace {
constexpr double kPi = 3.14159265358979323846;

double sphere_volume(double d) { return kPi / 6.0 * d * d * d; }

void check_sieve(const SieveSpec& s) {
    if (!(s.d_min > 0.0) || !(s.d_max > s.d_min))
        throw MesostructureError("sieve: need 0 < d_min < d_max");
    if (!(s.exponent > 0.0)) throw MesostructureError("sieve: exponent must be positive");
    if (!(s.volume_fraction > 0.0) || s.volume_fraction > 1.0)
        throw MesostructureError("sieve: volume_fraction must be in (0,1]");
}
} // namespace

double sieve_cdf(const SieveSpec& s, double d) {
    check_sieve(s);
    if (d <= s.d_min) return 0.0;
    if (d >= s.d_max) return 1.0;
    const double q = s.exponent;
    const double lo = std::pow(s.d_min / s.d_max, q);
    return (std::pow(d / s.d_max, q) - lo) / (1.0 - lo);
}

double coarse_share(const SieveSpec& s) {
    check_sieve(s);
    return 1.0 - std::pow(s.d_min / s.d_max, s.exponent);
}

std::vector<double> sample_sieve(const SieveSpec& s, double target_volume, rng::Stream& rs) {
    check_sieve(s);
    if (!(target_volume > 0.0)) throw MesostructureError("sieve: target volume must be positive");

    // The cumulative-volume curve grows like d^q, so the per-sphere number
    // density goes as d^(q-4) and the number CDF has exponent p = q - 3.
    const double q = s.exponent;
    const double p = q - 3.0;
    const double a = std::pow(s.d_min, p), b = std::pow(s.d_max, p);
    auto draw = [&]() {
        const double u = rs.uniform01();
        if (std::abs(p) < 1e-12) return s.d_min * std::pow(s.d_max / s.d_min, u);
        return std::pow((1.0 - u) * a + u * b, 1.0 / p);
    };

    const double want = s.volume_fraction * target_volume;
    std::vector<double> out;
    double have = 0.0;
    while (have < want) {
        const double d = draw();
        out.push_back(d);
        have += sphere_volume(d);
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

std::vector<Particle> pack_aggregates(const std::vector<double>& diameters, const Box& box,
                                      rng::Stream& rs, int max_trials) {
    std::vector<double> ds = diameters;
    std::sort(ds.begin(), ds.end(), std::greater<>());

    if (!ds.empty()) {
        const Vec3 ext = box.extent();
        if (ds.front() > ext.minCoeff())
            throw PackingFailure("packing: largest aggregate does not fit the box");
    }

    // uniform grid with cells >= the largest diameter: overlaps are confined
    // to the 27-cell neighborhood
    const double h = ds.empty() ? 1.0 : ds.front();
    const Vec3 ext = box.extent();
    const int nx = std::max(1, static_cast<int>(ext.x() / h));
    const int ny = std::max(1, static_cast<int>(ext.y() / h));
    const int nz = std::max(1, static_cast<int>(ext.z() / h));
    const Vec3 cell(ext.x() / nx, ext.y() / ny, ext.z() / nz);
    std::vector<std::vector<int>> grid(static_cast<std::size_t>(nx) * ny * nz);
    auto cell_of = [&](const Vec3& pnt) {
        const int ix = std::min(nx - 1, std::max(0, static_cast<int>((pnt.x() - box.lo.x()) / cell.x())));
        const int iy = std::min(ny - 1, std::max(0, static_cast<int>((pnt.y() - box.lo.y()) / cell.y())));
        const int iz = std::min(nz - 1, std::max(0, static_cast<int>((pnt.z() - box.lo.z()) / cell.z())));
        return std::array<int, 3>{ix, iy, iz};
    };
    auto cell_index = [&](int ix, int iy, int iz) {
        return (static_cast<std::size_t>(iz) * ny + iy) * nx + ix;
    };

    std::vector<Particle> placed;
    placed.reserve(ds.size());

    for (std::size_t k = 0; k < ds.size(); ++k) {
        const double r = 0.5 * ds[k];
        bool ok = false;
        for (int trial = 0; trial < max_trials && !ok; ++trial) {
            Vec3 c;
            for (int ax = 0; ax < 3; ++ax)
                c[ax] = rs.uniform(box.lo[ax] + r, box.hi[ax] - r);
            const auto [ix, iy, iz] = cell_of(c);
            bool clash = false;
            for (int dz = -1; dz <= 1 && !clash; ++dz)
                for (int dy = -1; dy <= 1 && !clash; ++dy)
                    for (int dx = -1; dx <= 1 && !clash; ++dx) {
                        const int jx = ix + dx, jy = iy + dy, jz = iz + dz;
                        if (jx < 0 || jy < 0 || jz < 0 || jx >= nx || jy >= ny || jz >= nz) continue;
                        for (int pi : grid[cell_index(jx, jy, jz)]) {
                            const double rr = r + placed[pi].radius;
                            if ((c - placed[pi].center).squaredNorm() < rr * rr) {
                                clash = true;
                                break;
                            }
                        }
                    }
            if (!clash) {
                grid[cell_index(ix, iy, iz)].push_back(static_cast<int>(placed.size()));
                placed.push_back({c, r, 0});
                ok = true;
            }
        }
        if (!ok) {
            std::ostringstream msg;
            msg << "packing: sphere " << k << " of " << ds.size() << " (d = " << ds[k]
                << " mm) found no spot in " << max_trials << " trials";
            throw PackingFailure(msg.str());
        }
    }
    return placed;
}

namespace {

// radical-plane distance from particle i along the line to particle j
double radical_offset(const Particle& a, const Particle& b, double l) {
    return (l * l + a.radius * a.radius - b.radius * b.radius) / (2.0 * l);
}

ConvexCell carve_cell(const std::vector<Particle>& ps, const Box& box, int i,
                      const std::vector<int>& order, const std::vector<double>& dist,
                      double r_max) {
    ConvexCell cell = ConvexCell::make_box(box);
    const Particle& pi = ps[i];
    double reach = cell.max_vertex_dist(pi.center);
    for (int j : order) {
        const double l = dist[j];
        // closest possible radical plane for any remaining candidate
        if (0.5 * l - r_max * r_max / (2.0 * l) >= reach) break;
        const Vec3 u = (ps[j].center - pi.center) / l;
        const double s = radical_offset(pi, ps[j], l);
        if (s >= reach) continue;
        if (cell.clip(u, u.dot(pi.center) + s, j)) {
            reach = cell.max_vertex_dist(pi.center);
        } else if (cell.empty()) {
            break;
        }
    }
    return cell;
}

// does the facet cross the plane x = px with any intersection point at y <= ymax?
bool facet_hits_notch(const std::vector<Vec3>& loop, double px, double ymax) {
    const double eps = 1e-12;
    double ymin = std::numeric_limits<double>::infinity();
    bool hit = false;
    const std::size_t n = loop.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec3 &a = loop[k], &b = loop[(k + 1) % n];
        const double da = a.x() - px, db = b.x() - px;
        if (std::abs(da) <= eps) {
            hit = true;
            ymin = std::min(ymin, a.y());
        }
        if ((da > eps && db < -eps) || (da < -eps && db > eps)) {
            const double t = da / (da - db);
            hit = true;
            ymin = std::min(ymin, a.y() + t * (b.y() - a.y()));
        }
    }
    return hit && ymin <= ymax;
}

} // namespace

ConvexCell power_cell(const std::vector<Particle>& particles, const Box& box, int i) {
    const int n = static_cast<int>(particles.size());
    std::vector<double> dist(n, 0.0);
    std::vector<int> order;
    order.reserve(n - 1);
    double r_max = 0.0;
    for (int j = 0; j < n; ++j) {
        r_max = std::max(r_max, particles[j].radius);
        if (j == i) continue;
        dist[j] = (particles[j].center - particles[i].center).norm();
        order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });
    return carve_cell(particles, box, i, order, dist, r_max);
}

Mesostructure tessellate(const std::vector<Particle>& particles, const Box& box,
                         const std::optional<NotchSpec>& notch, double area_epsilon) {
    Mesostructure m;
    m.domain = box;
    m.particles = particles;
    m.notch = notch;

    const int n = static_cast<int>(particles.size());
    double r_max = 0.0;
    for (const auto& p : particles) r_max = std::max(r_max, p.radius);

    const double notch_ymax = notch ? box.lo.y() + notch->depth : 0.0;

    std::vector<int> order;
    std::vector<double> dist(n, 0.0);
    for (int i = 0; i < n; ++i) {
        order.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            dist[j] = (particles[j].center - particles[i].center).norm();
            order.push_back(j);
        }
        std::sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });

        ConvexCell cell = carve_cell(particles, box, i, order, dist, r_max);
        if (cell.empty()) {
            std::ostringstream msg;
            msg << "tessellation: cell of particle " << i << " vanished";
            throw MesostructureError(msg.str());
        }

        std::uint8_t mask = 0;
        std::vector<int> partners;
        for (const auto& f : cell.faces()) {
            if (f.source < 0) {
                mask |= static_cast<std::uint8_t>(1u << (-f.source - 1));
            } else if (f.source > i) {
                partners.push_back(f.source);
            }
        }
        m.particles[i].wall_mask = mask;
        std::sort(partners.begin(), partners.end());

        for (int j : partners) {
            const auto loop = cell.face_loop(j);
            const auto pm = polygon_moments(loop);
            if (pm.area < area_epsilon) {
                ++m.dropped_small_facets;
                continue;
            }
            if (notch && facet_hits_notch(loop, notch->x, notch_ymax)) {
                ++m.removed_by_notch;
                continue;
            }
            Contact c;
            c.i = i;
            c.j = j;
            c.centroid = pm.centroid;
            c.area = pm.area;
            c.length = dist[j];
            c.n = (particles[j].center - particles[i].center) / dist[j];
            orthonormal_frame(c.n, c.m, c.l);
            m.contacts.push_back(c);
        }
    }
    return m;
}

std::vector<int> Mesostructure::contact_degree() const {
    std::vector<int> deg(particles.size(), 0);
    for (const auto& c : contacts) {
        ++deg[c.i];
        ++deg[c.j];
    }
    return deg;
}

void validate_connectivity(const Mesostructure& m) {
    const auto deg = m.contact_degree();
    for (std::size_t i = 0; i < deg.size(); ++i) {
        if (deg[i] < 2) {
            std::ostringstream msg;
            msg << "validation: particle " << i << " has " << deg[i]
                << " contact facets (minimum is 2)";
            throw MesostructureError(msg.str());
        }
    }
    if (m.particles.empty()) throw MesostructureError("validation: no particles");

    std::vector<std::vector<int>> adj(m.particles.size());
    for (const auto& c : m.contacts) {
        adj[c.i].push_back(c.j);
        adj[c.j].push_back(c.i);
    }
    std::vector<char> seen(m.particles.size(), 0);
    std::queue<int> bfs;
    bfs.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!bfs.empty()) {
        const int v = bfs.front();
        bfs.pop();
        for (int w : adj[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++reached;
                bfs.push(w);
            }
        }
    }
    if (reached != m.particles.size()) {
        std::ostringstream msg;
        msg << "validation: contact graph is disconnected (" << reached << " of "
            << m.particles.size() << " particles reachable)";
        throw MesostructureError(msg.str());
    }
}

Mesostructure generate_mesostructure(const MesoConfig& cfg, std::uint64_t master_seed,
                                     std::uint64_t index) {
    std::string last_error;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        try {
            const std::string tag = ".attempt" + std::to_string(attempt);
            auto rs_sieve = rng::Stream(master_seed, "meso.sieve" + tag, index);
            auto rs_pack = rng::Stream(master_seed, "meso.pack" + tag, index);
            const auto ds = sample_sieve(cfg.sieve, cfg.domain.volume(), rs_sieve);
            const auto ps = pack_aggregates(ds, cfg.domain, rs_pack, cfg.max_trials);
            Mesostructure m = tessellate(ps, cfg.domain, cfg.notch, cfg.area_epsilon);
            validate_connectivity(m);
            m.generation_attempts = attempt + 1;
            return m;
        } catch (const MesostructureError& e) {
            last_error = e.what();
        }
    }
    throw MesostructureError("generation failed after " + std::to_string(cfg.max_attempts) +
                             " attempts; last error: " + last_error);
}

namespace {
std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace

std::string dump_mesostructure(const Mesostructure& m) {
    std::ostringstream os;
    os << "mesofrac-mesostructure v1\n";
    os << "domain";
    for (int a = 0; a < 3; ++a) os << ' ' << fmt_g17(m.domain.lo[a]);
    for (int a = 0; a < 3; ++a) os << ' ' << fmt_g17(m.domain.hi[a]);
    os << '\n';
    if (m.notch)
        os << "notch " << fmt_g17(m.notch->x) << ' ' << fmt_g17(m.notch->depth) << '\n';
    else
        os << "notch none\n";
    os << "counts " << m.particles.size() << ' ' << m.contacts.size() << ' '
       << m.dropped_small_facets << ' ' << m.removed_by_notch << ' ' << m.generation_attempts
       << '\n';
    for (const auto& p : m.particles) {
        os << "p " << fmt_g17(p.center.x()) << ' ' << fmt_g17(p.center.y()) << ' '
           << fmt_g17(p.center.z()) << ' ' << fmt_g17(p.radius) << ' '
           << static_cast<int>(p.wall_mask) << '\n';
    }
    for (const auto& c : m.contacts) {
        os << "c " << c.i << ' ' << c.j;
        for (int a = 0; a < 3; ++a) os << ' ' << fmt_g17(c.centroid[a]);
        os << ' ' << fmt_g17(c.area) << ' ' << fmt_g17(c.length);
        for (int a = 0; a < 3; ++a) os << ' ' << fmt_g17(c.n[a]);
        for (int a = 0; a < 3; ++a) os << ' ' << fmt_g17(c.m[a]);
        for (int a = 0; a < 3; ++a) os << ' ' << fmt_g17(c.l[a]);
        os << ' ' << (c.elastic_only ? 1 : 0) << '\n';
    }
    return os.str();
}

Mesostructure load_mesostructure(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    auto fail = [](const std::string& why) -> void {
        throw MesostructureError("mesostructure load: " + why);
    };
    if (!std::getline(is, line) || line != "mesofrac-mesostructure v1")
        fail("bad header '" + line + "'");

    Mesostructure m;
    std::string word;
    {
        if (!std::getline(is, line)) fail("missing domain");
        std::istringstream ls(line);
        ls >> word;
        if (word != "domain") fail("expected domain line");
        for (int a = 0; a < 3; ++a) ls >> m.domain.lo[a];
        for (int a = 0; a < 3; ++a) ls >> m.domain.hi[a];
        if (!ls) fail("bad domain line");
    }
    {
        if (!std::getline(is, line)) fail("missing notch");
        std::istringstream ls(line);
        ls >> word;
        if (word != "notch") fail("expected notch line");
        ls >> word;
        if (word != "none") {
            NotchSpec ns;
            ns.x = std::stod(word);
            ls >> ns.depth;
            if (!ls) fail("bad notch line");
            m.notch = ns;
        }
    }
    std::size_t np = 0, nc = 0;
    {
        if (!std::getline(is, line)) fail("missing counts");
        std::istringstream ls(line);
        ls >> word >> np >> nc >> m.dropped_small_facets >> m.removed_by_notch >>
            m.generation_attempts;
        if (word != "counts" || !ls) fail("bad counts line");
    }
    m.particles.reserve(np);
    for (std::size_t k = 0; k < np; ++k) {
        if (!std::getline(is, line)) fail("truncated particle list");
        std::istringstream ls(line);
        Particle p;
        int mask = 0;
        ls >> word >> p.center.x() >> p.center.y() >> p.center.z() >> p.radius >> mask;
        if (word != "p" || !ls) fail("bad particle line");
        p.wall_mask = static_cast<std::uint8_t>(mask);
        m.particles.push_back(p);
    }
    m.contacts.reserve(nc);
    for (std::size_t k = 0; k < nc; ++k) {
        if (!std::getline(is, line)) fail("truncated contact list");
        std::istringstream ls(line);
        Contact c;
        int el = 0;
        ls >> word >> c.i >> c.j;
        for (int a = 0; a < 3; ++a) ls >> c.centroid[a];
        ls >> c.area >> c.length;
        for (int a = 0; a < 3; ++a) ls >> c.n[a];
        for (int a = 0; a < 3; ++a) ls >> c.m[a];
        for (int a = 0; a < 3; ++a) ls >> c.l[a];
        ls >> el;
        if (word != "c" || !ls) fail("bad contact line");
        c.elastic_only = el != 0;
        m.contacts.push_back(c);
    }
    return m;
}

void save_mesostructure(const Mesostructure& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw MesostructureError("cannot open '" + path + "' for writing");
    os << dump_mesostructure(m);
    if (!os) throw MesostructureError("write to '" + path + "' failed");
}

Mesostructure load_mesostructure_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MesostructureError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return load_mesostructure(buf.str());
}

std::string mesostructure_hash(const Mesostructure& m) {
    const std::string d = dump_mesostructure(m);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : d) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace mesofrac
