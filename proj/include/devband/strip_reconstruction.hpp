#pragma once

// Ruled (rectifying) strip around a framed midline: rulings along the Darboux
// direction W T + K B, a quad mesh spanning half-width b on each side, and
// the checks run on it (angle defect, ruling crossing, orientation, flat
// unfolding).

#include "devband/error.hpp"
#include "devband/framed_curve.hpp"
#include "devband/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace devband {

struct RuledStrip {
    FramedCurve midline;
    double half_width = 0.0;
    std::vector<Vec3> rulings;     // unit, one per sample
    std::vector<bool> interpolated; // ruling filled in across a straight span
    bool seam_reversed = false;    // last ruling opposes the first: one-sided strip
};

struct QuadMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 4>> quads;
    std::vector<double> angle_defect; // per vertex, 0 on the boundary
    int rows = 0;    // vertices across the width
    int columns = 0; // samples along the midline
    bool closing_reversed = false;

    int index(int column, int row) const { return column * rows + row; }
};

struct StripMesh {
    RuledStrip strip;
    QuadMesh mesh;
};

namespace detail {

// Unit principal normal of a sample, falling back to the discrete normal of
// its neighbours when none was recorded.
inline Vec3 sample_normal(const FramedCurve &c, std::size_t i) {
    const CurveSample &s = c.samples[i];
    if (s.normal.squaredNorm() > 0.5) return s.normal;
    const std::size_t n = c.size();
    const Vec3 &a = c.samples[(i + n - 1) % n].position, &b = s.position, &d = c.samples[(i + 1) % n].position;
    const Vec3 t0 = (b - a).normalized(), t1 = (d - b).normalized();
    const Vec3 bin = t0.cross(t1);
    if (bin.norm() < 1e-14) return Vec3::Zero();
    return bin.normalized().cross(s.tangent).normalized();
}

// Parameters (v, u) of the closest points on lines p + v r and q + u s, or
// nothing for (nearly) parallel lines.
inline std::optional<std::pair<double, double>> closest_params(const Vec3 &p, const Vec3 &r, const Vec3 &q, const Vec3 &s) {
    const double a = r.dot(r), b = r.dot(s), c = s.dot(s);
    const Vec3 w = p - q;
    const double d = r.dot(w), e = s.dot(w);
    const double den = a * c - b * b;
    if (den <= 1e-24 * a * c) return std::nullopt;
    return std::pair{(b * e - c * d) / den, (a * e - b * d) / den};
}

inline Vec3 slerp(const Vec3 &a, const Vec3 &b, double t) {
    const double om = angle_between(a, b);
    if (om < 1e-12) return a;
    return ((std::sin((1 - t) * om) * a + std::sin(t * om) * b) / std::sin(om)).normalized();
}

inline double sin_to_tangent(const Vec3 &ruling, const Vec3 &tangent) { return ruling.cross(tangent).norm(); }

} // namespace detail

inline RuledStrip ruled_strip(const FramedCurve &curve, double b) {
    if (!curve.closed) throw Error(ErrorCode::NotClosed, "strip reconstruction needs a closed midline");
    if (b < 0.0) throw Error(ErrorCode::Precondition, "half-width must be non-negative");
    const std::size_t n = curve.size();
    if (n < 3) throw Error(ErrorCode::TooFewPoints, "need at least 3 samples");

    RuledStrip strip;
    strip.midline = curve;
    strip.half_width = b;
    strip.rulings.assign(n, Vec3::Zero());
    strip.interpolated.assign(n, false);
    std::vector<bool> defined(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const CurveSample &s = curve.samples[i];
        if (!(s.K > 0.0)) continue;
        const Vec3 N = detail::sample_normal(curve, i);
        if (N.squaredNorm() < 0.5) continue;
        const Vec3 B = s.tangent.cross(N);
        strip.rulings[i] = (s.W * s.tangent + s.K * B).normalized();
        defined[i] = true;
    }
    std::size_t first = n;
    for (std::size_t i = 0; i < n; ++i)
        if (defined[i]) {
            first = i;
            break;
        }
    if (first == n) throw Error(ErrorCode::UndefinedRuling, "no sample has a defined ruling");

    // Orient rulings consistently along the strip, starting at `first`.
    auto perp = [&](std::size_t i) {
        const Vec3 &t = curve.samples[i].tangent;
        return Vec3(strip.rulings[i] - strip.rulings[i].dot(t) * t);
    };
    std::size_t last = first;
    for (std::size_t k = 1; k < n; ++k) {
        const std::size_t i = (first + k) % n;
        if (!defined[i]) continue;
        if (perp(i).dot(perp(last)) < 0.0) strip.rulings[i] = -strip.rulings[i];
        last = i;
    }

    // Fill straight spans between consecutive defined samples a -> c.
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t a = (first + k) % n;
        if (!defined[a]) continue;
        std::size_t c = (a + 1) % n;
        std::size_t gap = 0;
        while (!defined[c]) {
            c = (c + 1) % n;
            ++gap;
        }
        if (gap == 0) continue;
        const Vec3 &xa = curve.samples[a].position, &xc = curve.samples[c].position;
        Vec3 ra = strip.rulings[a], rc = strip.rulings[c];
        // Crossing the start sample: the far ruling is expressed in the
        // orientation of the near one.
        if (c == first && perp(c).dot(perp(a)) < 0.0) rc = -rc;
        const auto cp = detail::closest_params(xa, ra, xc, rc);
        std::optional<Vec3> apex;
        if (cp) {
            const Vec3 pa = xa + cp->first * ra, pc = xc + cp->second * rc;
            const double scale = (xc - xa).norm() + std::abs(cp->first) + std::abs(cp->second);
            if ((pa - pc).norm() <= 1e-9 * scale) apex = 0.5 * (pa + pc);
        }
        for (std::size_t g = 1; g <= gap; ++g) {
            const std::size_t i = (a + g) % n;
            const double t = double(g) / double(gap + 1);
            Vec3 r;
            if (apex && (*apex - curve.samples[i].position).norm() > 1e-12) {
                // Flat span: fan the rulings through the point where the two
                // flanking rulings meet.
                r = (*apex - curve.samples[i].position).normalized();
                const Vec3 guide = detail::slerp(ra, rc, t);
                if (r.dot(guide) < 0.0) r = -r;
            } else {
                r = detail::slerp(ra, rc, t);
            }
            strip.rulings[i] = r;
            strip.interpolated[i] = true;
        }
    }
    strip.seam_reversed = perp(n - 1).dot(perp(0)) < 0.0;
    return strip;
}

namespace detail {

inline double corner_angle(const Vec3 &apex, const Vec3 &a, const Vec3 &b) { return angle_between(a - apex, b - apex); }

inline double triangle_area(const Vec3 &a, const Vec3 &b, const Vec3 &c) { return 0.5 * (b - a).cross(c - a).norm(); }

// The two triangles of quad q (split along its first diagonal).
inline std::array<std::array<int, 3>, 2> split_quad(const std::array<int, 4> &q) {
    return {{{q[0], q[1], q[2]}, {q[0], q[2], q[3]}}};
}

} // namespace detail

// Angle defect 2 pi - sum of incident triangle angles at interior vertices,
// each quad split into two triangles.
inline std::vector<double> angle_defects(const QuadMesh &mesh, std::vector<double> *areas = nullptr) {
    const std::size_t nv = mesh.vertices.size();
    std::vector<double> angle(nv, 0.0), area(nv, 0.0);
    for (const auto &q : mesh.quads) {
        for (const auto &t : detail::split_quad(q)) {
            const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
            angle[t[0]] += detail::corner_angle(a, b, c);
            angle[t[1]] += detail::corner_angle(b, c, a);
            angle[t[2]] += detail::corner_angle(c, a, b);
            const double ar = detail::triangle_area(a, b, c) / 3.0;
            area[t[0]] += ar;
            area[t[1]] += ar;
            area[t[2]] += ar;
        }
    }
    // Boundary vertices sit on an edge used by a single quad.
    std::map<std::pair<int, int>, int> uses;
    for (const auto &q : mesh.quads)
        for (int e = 0; e < 4; ++e) ++uses[std::minmax(q[e], q[(e + 1) % 4])];
    std::vector<bool> boundary(nv, false);
    for (const auto &[edge, count] : uses)
        if (count == 1) boundary[edge.first] = boundary[edge.second] = true;
    std::vector<double> defect(nv, 0.0);
    for (std::size_t v = 0; v < nv; ++v)
        if (!boundary[v] && area[v] > 0.0) defect[v] = 2.0 * kPi - angle[v];
    if (areas) *areas = std::move(area);
    return defect;
}

inline QuadMesh strip_mesh(const RuledStrip &strip, int m) {
    if (m < 2) throw Error(ErrorCode::Precondition, "need at least 2 vertices across the width");
    const FramedCurve &c = strip.midline;
    const int n = int(c.size());
    QuadMesh mesh;
    mesh.columns = n;
    if (strip.half_width == 0.0) {
        // Zero width: the mesh is the midline polyline.
        mesh.rows = 1;
        for (const auto &s : c.samples) mesh.vertices.push_back(s.position);
        mesh.angle_defect.assign(n, 0.0);
        return mesh;
    }
    mesh.rows = m;
    mesh.vertices.reserve(std::size_t(n) * m);
    for (int i = 0; i < n; ++i) {
        const CurveSample &s = c.samples[i];
        const Vec3 &r = strip.rulings[i];
        const double sinb = detail::sin_to_tangent(r, s.tangent);
        if (sinb < 1e-12) throw Error(ErrorCode::UndefinedRuling, "ruling along the tangent", std::size_t(i));
        const double vmax = strip.half_width / sinb;
        for (int j = 0; j < m; ++j) {
            const double t = -1.0 + 2.0 * double(j) / double(m - 1);
            mesh.vertices.push_back(s.position + (t * vmax) * r);
        }
    }
    mesh.closing_reversed = strip.seam_reversed;
    for (int i = 0; i < n; ++i) {
        const int k = (i + 1) % n;
        const bool flip = k == 0 && strip.seam_reversed;
        for (int j = 0; j + 1 < m; ++j) {
            const int j0 = flip ? m - 1 - j : j, j1 = flip ? m - 2 - j : j + 1;
            mesh.quads.push_back({mesh.index(i, j), mesh.index(k, j0), mesh.index(k, j1), mesh.index(i, j + 1)});
        }
    }
    mesh.angle_defect = angle_defects(mesh);
    return mesh;
}

inline StripMesh rectifying_strip(const FramedCurve &curve, double b, int m) {
    StripMesh out;
    out.strip = ruled_strip(curve, b);
    out.mesh = strip_mesh(out.strip, m);
    return out;
}

// Largest |angle defect| / (one third of the incident triangle area) over
// interior vertices.
inline double gaussian_check(const QuadMesh &mesh) {
    if (mesh.quads.empty()) return 0.0;
    std::vector<double> area;
    const std::vector<double> defect = angle_defects(mesh, &area);
    double worst = 0.0;
    for (std::size_t v = 0; v < defect.size(); ++v)
        if (area[v] > 0.0) worst = std::max(worst, std::abs(defect[v]) / area[v]);
    return worst;
}

// Neighbouring rulings further apart than this fraction of their foot spacing
// at closest approach are treated as non-intersecting.
inline constexpr double kSkewTolerance = 0.05;

// Smallest half-width at which two neighbouring ruling lines meet (infinity
// when all neighbours are parallel). Offsets are measured perpendicular to
// the midline, like b.
inline double width_feasibility(const RuledStrip &strip) {
    const FramedCurve &c = strip.midline;
    const std::size_t n = c.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = (i + 1) % n;
        const Vec3 &r0 = strip.rulings[i], &r1 = strip.rulings[k];
        const Vec3 &x0 = c.samples[i].position, &x1 = c.samples[k].position;
        const auto cp = detail::closest_params(x0, r0, x1, r1);
        if (!cp) continue;
        // Skew neighbours (parallel generators of a cylinder sampled off the
        // same line) never meet.
        const double skew = ((x0 + cp->first * r0) - (x1 + cp->second * r1)).norm();
        if (skew > kSkewTolerance * (x1 - x0).norm()) continue;
        const double w0 = std::abs(cp->first) * detail::sin_to_tangent(r0, c.samples[i].tangent);
        const double w1 = std::abs(cp->second) * detail::sin_to_tangent(r1, c.samples[k].tangent);
        best = std::min(best, 0.5 * (w0 + w1));
    }
    return best;
}

// Mesh edges whose two quads traverse them in the same direction, i.e. where
// the quad orientation disagrees. Empty for an orientable strip.
inline std::vector<std::pair<int, int>> orientation_conflicts(const QuadMesh &mesh) {
    std::map<std::pair<int, int>, int> directed;
    for (const auto &q : mesh.quads)
        for (int e = 0; e < 4; ++e) ++directed[{q[e], q[(e + 1) % 4]}];
    std::vector<std::pair<int, int>> conflicts;
    for (const auto &[edge, count] : directed)
        if (count > 1) conflicts.push_back(edge);
    return conflicts;
}

// Number of ruling columns along which the quad orientation flips. A
// Moebius strip needs at least one; the mesh here has exactly one, at the
// seam.
inline int orientation_flip_columns(const QuadMesh &mesh) {
    std::vector<int> cols;
    for (const auto &[a, b] : orientation_conflicts(mesh)) {
        const int c = a / mesh.rows;
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    }
    return int(cols.size());
}

// Orientation reversals of the strip surface normal between consecutive
// columns (the closing column included). 1 for a Moebius strip.
inline int orientation_reversals(const RuledStrip &strip) {
    const FramedCurve &c = strip.midline;
    const std::size_t n = c.size();
    int flips = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = (i + 1) % n;
        const Vec3 n0 = c.samples[i].tangent.cross(strip.rulings[i]);
        const Vec3 n1 = c.samples[k].tangent.cross(strip.rulings[k]);
        if (n0.dot(n1) < 0.0) ++flips;
    }
    return flips;
}

// Bending energy of the mesh: sum over shared ruling edges of
// theta^2 |e|^2 / (mean area of the two quads), theta the dihedral angle.
inline double mesh_bending_energy(const QuadMesh &mesh) {
    if (mesh.rows < 2) return 0.0;
    const int m = mesh.rows, n = mesh.columns;
    const int per_column = m - 1;
    auto quad_normal = [&](const std::array<int, 4> &q) {
        const Vec3 &a = mesh.vertices[q[0]], &b = mesh.vertices[q[1]], &c = mesh.vertices[q[2]], &d = mesh.vertices[q[3]];
        return Vec3((c - a).cross(d - b));
    };
    auto quad_area = [&](const std::array<int, 4> &q) {
        const Vec3 &a = mesh.vertices[q[0]], &b = mesh.vertices[q[1]], &c = mesh.vertices[q[2]], &d = mesh.vertices[q[3]];
        return 0.5 * (c - a).cross(d - b).norm();
    };
    CompensatedSum total;
    for (int i = 0; i < n; ++i) {
        const int k = (i + 1) % n; // quads of column i end on ruling edge k
        if (k == 0) continue;      // seam ruling: handled with the reversed pairing below
        for (int j = 0; j < per_column; ++j) {
            const auto &qa = mesh.quads[i * per_column + j];
            const auto &qb = mesh.quads[k * per_column + j];
            const Vec3 na = quad_normal(qa), nb = quad_normal(qb);
            const double theta = angle_between(na, nb);
            const double e = (mesh.vertices[qa[1]] - mesh.vertices[qa[2]]).norm();
            total.add(theta * theta * e * e * 2.0 / (quad_area(qa) + quad_area(qb)));
        }
    }
    // Ruling edge shared by the closing column and column 0.
    for (int j = 0; j < per_column; ++j) {
        const auto &qa = mesh.quads[(n - 1) * per_column + j];
        const int jb = mesh.closing_reversed ? per_column - 1 - j : j;
        const auto &qb = mesh.quads[jb];
        Vec3 na = quad_normal(qa), nb = quad_normal(qb);
        if (mesh.closing_reversed) nb = -nb;
        const double theta = angle_between(na, nb);
        const double e = (mesh.vertices[qa[1]] - mesh.vertices[qa[2]]).norm();
        total.add(theta * theta * e * e * 2.0 / (quad_area(qa) + quad_area(qb)));
    }
    return total.value();
}

// Lays the triangulated strip flat, column by column, preserving every
// triangle's edge lengths. Returns one 2D point per mesh vertex.
inline std::vector<Vec2> unfold_strip(const QuadMesh &mesh) {
    if (mesh.rows < 2) throw Error(ErrorCode::ZeroWidth, "nothing to unfold");
    const int m = mesh.rows, n = mesh.columns;
    std::vector<Vec2> flat(mesh.vertices.size(), Vec2::Zero());
    std::vector<bool> placed(mesh.vertices.size(), false);
    // Third point of a triangle from two placed points, on the side opposite
    // `away` (or the positive side when none).
    auto place = [&](int a, int b, int c, std::optional<Vec2> away) {
        const Vec2 pa = flat[a], pb = flat[b];
        const double ab = (pb - pa).norm();
        const double ac = (mesh.vertices[c] - mesh.vertices[a]).norm();
        const double bc = (mesh.vertices[c] - mesh.vertices[b]).norm();
        const double x = (ac * ac - bc * bc + ab * ab) / (2.0 * ab);
        const double y = std::sqrt(std::max(0.0, ac * ac - x * x));
        const Vec2 ex = (pb - pa) / ab;
        const Vec2 ey(-ex.y(), ex.x());
        Vec2 p = pa + x * ex + y * ey;
        if (away) {
            const Vec2 q = pa + x * ex - y * ey;
            if ((p - *away).norm() < (q - *away).norm()) p = q;
        }
        flat[c] = p;
        placed[c] = true;
    };
    // Column 0 along the y axis.
    for (int j = 0; j < m; ++j) {
        const int v = mesh.index(0, j);
        flat[v] = j == 0 ? Vec2::Zero()
                         : Vec2(0.0, flat[mesh.index(0, j - 1)].y() +
                                         (mesh.vertices[v] - mesh.vertices[mesh.index(0, j - 1)]).norm());
        placed[v] = true;
    }
    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j + 1 < m; ++j) {
            const auto &q = mesh.quads[i * (m - 1) + j];
            // q = {v(i,j), v(i+1,j), v(i+1,j+1), v(i,j+1)}
            const Vec2 behind = i > 0 ? flat[mesh.index(i - 1, j)] : Vec2(-1.0, flat[q[0]].y());
            if (!placed[q[1]]) place(q[0], q[3], q[1], behind);
            place(q[1], q[3], q[2], flat[q[0]]);
        }
    }
    return flat;
}

} // namespace devband
