/*
 * geom.hpp — small geometric utilities: axis-aligned boxes, orthonormal
 * facet frames, and a convex polyhedron with half-space clipping used to
 * carve power-diagram cells.
 */
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

namespace mesofrac {

using Vec3 = Eigen::Vector3d;

struct Box {
    Vec3 lo{0, 0, 0};
    Vec3 hi{0, 0, 0};

    double volume() const { return (hi - lo).prod(); }
    Vec3 extent() const { return hi - lo; }
    bool contains(const Vec3& p, double tol = 0.0) const {
        return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
    }
};

// Deterministic right-handed frame (n, m, l) from a unit normal.
inline void orthonormal_frame(const Vec3& n, Vec3& m, Vec3& l) {
    const Vec3 seed = std::abs(n.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    m = seed.cross(n).normalized();
    l = n.cross(m);
}

// Area and centroid of a planar polygon in 3D (vertex loop, either winding).
struct PolygonMoments {
    double area = 0.0;
    Vec3 centroid{0, 0, 0};
};

inline PolygonMoments polygon_moments(const std::vector<Vec3>& loop) {
    PolygonMoments pm;
    if (loop.size() < 3) return pm;
    const Vec3& o = loop[0];
    Vec3 weighted = Vec3::Zero();
    Vec3 areavec = Vec3::Zero();
    double a2 = 0.0;
    for (std::size_t k = 1; k + 1 < loop.size(); ++k) {
        const Vec3 cr = (loop[k] - o).cross(loop[k + 1] - o);
        const double t2 = 0.5 * cr.norm();
        areavec += cr;
        a2 += t2;
        weighted += t2 * (o + loop[k] + loop[k + 1]) / 3.0;
    }
    // fan triangles of a convex loop share orientation, so |sum| == sum| |
    pm.area = 0.5 * areavec.norm();
    if (a2 > 0.0) pm.centroid = weighted / a2;
    return pm;
}

/*
 * Convex polyhedron as indexed face loops, supporting repeated clipping by
 * half-spaces n.x <= c.  Faces remember which cut produced them (box faces
 * use ids -1..-6, radical planes use the neighbor index), which is how the
 * tessellation recovers contact pairs.
 */
class ConvexCell {
  public:
    struct Face {
        int source = 0;
        std::vector<int> loop; // vertex indices, consistently wound
    };

    static ConvexCell make_box(const Box& b);

    // Clip with half-space n.x <= c.  Returns false when nothing remains.
    bool clip(const Vec3& n, double c, int source, double eps = 1e-9);

    bool empty() const { return faces_.size() < 4; }
    const std::vector<Vec3>& vertices() const { return verts_; }
    const std::vector<Face>& faces() const { return faces_; }

    // Vertex loop of the face created by `source` (empty if none survives).
    std::vector<Vec3> face_loop(int source) const;

    double max_vertex_dist(const Vec3& p) const;
    double volume() const;

  private:
    std::vector<Vec3> verts_;
    std::vector<Face> faces_;
    void compact();
};

} // namespace mesofrac
