/*
 * geom.cpp — convex polyhedron clipping.
 */
#include "mesofrac/geom.hpp"

#include <algorithm>
#include <map>
#include <utility>

namespace mesofrac {

ConvexCell ConvexCell::make_box(const Box& b) {
    ConvexCell c;
    const Vec3 &lo = b.lo, &hi = b.hi;
    c.verts_ = {
        {lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()}, {hi.x(), hi.y(), lo.z()},
        {lo.x(), hi.y(), lo.z()}, {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
        {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()},
    };
    // outward-wound loops; sources -1..-6 = x-, x+, y-, y+, z-, z+
    c.faces_ = {
        {-1, {0, 4, 7, 3}}, {-2, {1, 2, 6, 5}}, {-3, {0, 1, 5, 4}},
        {-4, {3, 7, 6, 2}}, {-5, {0, 3, 2, 1}}, {-6, {4, 5, 6, 7}},
    };
    return c;
}

bool ConvexCell::clip(const Vec3& n, double c, int source, double eps) {
    if (verts_.empty()) return false;

    const int nv = static_cast<int>(verts_.size());
    std::vector<double> dist(nv);
    int n_out = 0, n_in = 0;
    for (int i = 0; i < nv; ++i) {
        dist[i] = n.dot(verts_[i]) - c;
        if (dist[i] > eps)
            ++n_out;
        else if (dist[i] < -eps)
            ++n_in;
    }
    if (n_out == 0) return true; // nothing removed
    if (n_in == 0) {             // nothing kept
        verts_.clear();
        faces_.clear();
        return false;
    }

    auto cls = [&](int i) { return dist[i] > eps ? 1 : (dist[i] < -eps ? -1 : 0); };

    std::map<std::pair<int, int>, int> cut_cache;
    auto cut_vertex = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        if (auto it = cut_cache.find(key); it != cut_cache.end()) return it->second;
        const double t = dist[a] / (dist[a] - dist[b]);
        verts_.push_back(verts_[a] + t * (verts_[b] - verts_[a]));
        const int idx = static_cast<int>(verts_.size()) - 1;
        cut_cache.emplace(key, idx);
        return idx;
    };
    auto on_plane = [&](int i) { return i >= nv || cls(i) == 0; };

    std::vector<Face> out_faces;
    out_faces.reserve(faces_.size() + 1);
    std::vector<std::pair<int, int>> cap_edges;

    for (const Face& f : faces_) {
        const int m = static_cast<int>(f.loop.size());
        std::vector<int> loop;
        loop.reserve(m + 2);
        bool face_cut = false;
        for (int k = 0; k < m; ++k) {
            const int a = f.loop[k], b = f.loop[(k + 1) % m];
            const int ca = cls(a), cb = cls(b);
            if (ca <= 0)
                loop.push_back(a);
            else
                face_cut = true;
            if ((ca < 0 && cb > 0) || (ca > 0 && cb < 0)) loop.push_back(cut_vertex(a, b));
        }
        if (face_cut && loop.size() >= 2) {
            // each cut face meets the plane in a segment bounding the cap
            const int L = static_cast<int>(loop.size());
            if (L == 2) {
                if (on_plane(loop[0]) && on_plane(loop[1])) cap_edges.emplace_back(loop[0], loop[1]);
            } else {
                int n_on = 0;
                for (int k = 0; k < L; ++k)
                    if (on_plane(loop[k])) ++n_on;
                if (n_on < L) { // a face fully in the plane is the cap itself
                    for (int k = 0; k < L; ++k) {
                        const int u = loop[k], v = loop[(k + 1) % L];
                        if (u != v && on_plane(u) && on_plane(v)) cap_edges.emplace_back(u, v);
                    }
                }
            }
        }
        if (loop.size() >= 3) out_faces.push_back({f.source, std::move(loop)});
    }

    // dedup undirected edges (an in-plane edge can be reported by both its faces)
    {
        std::map<std::pair<int, int>, int> seen;
        std::vector<std::pair<int, int>> uniq;
        for (const auto& e : cap_edges) {
            if (seen.emplace(std::minmax(e.first, e.second), 1).second) uniq.push_back(e);
        }
        cap_edges = std::move(uniq);
    }

    // assemble the cap polygon from its boundary edges
    if (cap_edges.size() >= 3) {
        std::multimap<int, std::pair<int, std::size_t>> adj; // vertex -> (other, edge id)
        std::vector<char> used(cap_edges.size(), 0);
        for (std::size_t e = 0; e < cap_edges.size(); ++e) {
            adj.emplace(cap_edges[e].first, std::make_pair(cap_edges[e].second, e));
            adj.emplace(cap_edges[e].second, std::make_pair(cap_edges[e].first, e));
        }
        std::vector<int> cap;
        int cur = cap_edges[0].first;
        cap.push_back(cur);
        for (;;) {
            int next = -1;
            auto [lo_it, hi_it] = adj.equal_range(cur);
            for (auto it = lo_it; it != hi_it; ++it) {
                if (!used[it->second.second]) {
                    used[it->second.second] = 1;
                    next = it->second.first;
                    break;
                }
            }
            if (next < 0 || next == cap.front()) break;
            cap.push_back(next);
            cur = next;
        }
        if (cap.size() >= 3) {
            // orient so the cap's outward normal follows the cut direction
            Vec3 av = Vec3::Zero();
            for (std::size_t k = 0; k < cap.size(); ++k) {
                const Vec3& p = verts_[cap[k]];
                const Vec3& q = verts_[cap[(k + 1) % cap.size()]];
                av += p.cross(q);
            }
            if (av.dot(n) < 0) std::reverse(cap.begin(), cap.end());
            out_faces.push_back({source, std::move(cap)});
        }
    }

    faces_ = std::move(out_faces);
    if (faces_.size() < 4) {
        verts_.clear();
        faces_.clear();
        return false;
    }
    compact();
    return true;
}

void ConvexCell::compact() {
    std::vector<int> remap(verts_.size(), -1);
    std::vector<Vec3> nv;
    nv.reserve(verts_.size());
    for (auto& f : faces_) {
        for (int& idx : f.loop) {
            if (remap[idx] < 0) {
                remap[idx] = static_cast<int>(nv.size());
                nv.push_back(verts_[idx]);
            }
            idx = remap[idx];
        }
    }
    verts_ = std::move(nv);
}

std::vector<Vec3> ConvexCell::face_loop(int source) const {
    for (const auto& f : faces_) {
        if (f.source == source) {
            std::vector<Vec3> loop;
            loop.reserve(f.loop.size());
            for (int idx : f.loop) loop.push_back(verts_[idx]);
            return loop;
        }
    }
    return {};
}

double ConvexCell::max_vertex_dist(const Vec3& p) const {
    double best = 0.0;
    for (const auto& v : verts_) best = std::max(best, (v - p).norm());
    return best;
}

double ConvexCell::volume() const {
    // divergence theorem over consistently outward-wound faces
    double v6 = 0.0;
    for (const auto& f : faces_) {
        const int m = static_cast<int>(f.loop.size());
        if (m < 3) continue;
        const Vec3& o = verts_[f.loop[0]];
        for (int k = 1; k + 1 < m; ++k)
            v6 += o.dot(verts_[f.loop[k]].cross(verts_[f.loop[k + 1]]));
    }
    return v6 / 6.0;
}

} // namespace mesofrac
