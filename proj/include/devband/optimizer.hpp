#pragma once

// Descent on the narrow-band functional over closed inextensible polygons
// carrying a band frame.
//
// State: vertices x_0..x_{n-1} (cyclic, so the curve closes exactly) and one
// frame angle alpha_j per edge, measuring the band normal m_j from a
// reference director u_j that is parallel transported in time. At vertex i
// the band has normal curvature kn, geodesic curvature kg and twist rate tau;
// the energy is sum lbar_i [ (kn^2 + tau^2)^2 / (kn^2 + eps^2) + w_g kg^2 ].
// With kg -> 0 the band normal is the principal normal, kn = K and tau = W.
// The band normal is used as a line: at vertex 0 the previous director is
// negated, which pins the frame to the one-sided class for the whole run.

#include "devband/energy.hpp"
#include "devband/error.hpp"
#include "devband/framed_curve.hpp"
#include "devband/geometry.hpp"
#include "devband/parallel.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace devband {

struct OptimizerConfig {
    int max_iters = 2000;
    double step0 = 0.0;     // initial step; 0 picks one moving vertices by 0.1 edge
    double eps = -1.0;      // density regularization; < 0 means 1e-6 n / l
    double w_close = -1.0;  // < 0 means 10 E0 / l
    double w_hol = -1.0;    // < 0 means 10 E0 / l
    double w_geodesic = 100.0;
    double grad_tol = 1e-8;
    std::optional<std::uint64_t> seed; // optional random perturbation of the start
    double perturbation = 0.0;         // displacement scale (fraction of an edge) when seeded
    int polish_iters = -1;             // < 0 means max_iters / 10
    double holonomy_drift = 1.0;       // abort when the holonomy leaves pi by more
    int projection_sweeps = 50;
    double projection_tol = 1e-10;
};

struct ObjectiveTerms {
    double sadowsky = 0.0;
    double geodesic = 0.0; // framed objective only
    double closure = 0.0;
    double holonomy = 0.0;
    double total() const { return sadowsky + geodesic + closure + holonomy; }
};

struct TraceRow {
    int iter = 0;
    double energy = 0.0;
    double sadowsky_term = 0.0;
    double closure_pen = 0.0;
    double holonomy_pen = 0.0;
    double step = 0.0;
    ClosureResiduals residuals;
};

enum class OptimizerStatus { Converged, MaxIterations, LineSearchFailed };

inline std::string to_string(OptimizerStatus s) {
    switch (s) {
        case OptimizerStatus::Converged: return "converged";
        case OptimizerStatus::MaxIterations: return "max_iterations";
        case OptimizerStatus::LineSearchFailed: return "line_search_failed";
    }
    return "unknown";
}

struct OptimizationResult {
    FramedCurve curve;
    std::vector<Vec3> points;
    std::vector<double> frame_angles;
    std::vector<Vec3> band_normals;
    std::vector<TraceRow> energy_trace;
    std::vector<TraceRow> polish_trace;
    bool converged = false;
    OptimizerStatus status = OptimizerStatus::MaxIterations;
    ClosureResiduals final_residuals;
    // Line functional with torsion taken from the band frame, eps = 0.
    double initial_energy = 0.0;
    double final_energy = 0.0;
    // Same functional on the bare polygon (discrete_geometry estimators);
    // unreliable where the polygon is nearly straight but twisted.
    double initial_polygon_energy = 0.0;
    double final_polygon_energy = 0.0;
    double final_frame_holonomy = 0.0;
    double edge_spread = 0.0;    // (max - min) / mean edge length
    double eps = 0.0;
    double w_close = 0.0, w_hol = 0.0;
    int accepted_steps = 0;
};

// ---------------------------------------------------------------------------
// Polygon-only objective and its finite-difference gradient.

namespace detail {

inline double polygon_length(const std::vector<Vec3> &pts) {
    CompensatedSum s;
    for (std::size_t i = 0; i < pts.size(); ++i) s.add((pts[(i + 1) % pts.size()] - pts[i]).norm());
    return s.value();
}

inline double default_eps(const OptimizerConfig &c, std::size_t n, double l) {
    return c.eps >= 0.0 ? c.eps : 1e-6 * double(n) / l;
}

inline double holonomy_offset(double h) { return std::abs(std::abs(h) - kPi); }

} // namespace detail

// Line functional of the polygon plus closure and holonomy penalties. A
// vertex list is a cyclic polygon, so the closure gaps vanish identically.
inline ObjectiveTerms objective(const std::vector<Vec3> &points, const OptimizerConfig &config) {
    if (points.size() < 24) throw Error(ErrorCode::TooFewPoints, "objective needs at least 24 points");
    const FramedCurve curve = discrete_geometry(points);
    const double l = curve.total_length;
    const double eps = detail::default_eps(config, points.size(), l);
    ObjectiveTerms t;
    t.sadowsky = sadowsky_energy(curve, eps).value;
    const ClosureResiduals r = closure_residuals(curve);
    const double w_close = config.w_close >= 0.0 ? config.w_close : 10.0 * t.sadowsky / l;
    const double w_hol = config.w_hol >= 0.0 ? config.w_hol : 10.0 * t.sadowsky / l;
    t.closure = w_close * (r.position_gap * r.position_gap + r.tangent_gap * r.tangent_gap);
    const double dh = r.holonomy_angle - kPi;
    t.holonomy = w_hol * dh * dh;
    return t;
}

// Central differences of objective() with step h (default 1e-6 l / n) in
// every coordinate.
inline std::vector<Vec3> gradient(const std::vector<Vec3> &points, const OptimizerConfig &config, double h = 0.0) {
    const std::size_t n = points.size();
    if (n < 24) throw Error(ErrorCode::TooFewPoints, "gradient needs at least 24 points");
    const double l = detail::polygon_length(points);
    if (h <= 0.0) h = 1e-6 * l / double(n);
    // Freeze the defaulted weights and eps at the unperturbed polygon.
    OptimizerConfig c = config;
    const ObjectiveTerms base = objective(points, config);
    c.eps = detail::default_eps(config, n, l);
    if (c.w_close < 0.0) c.w_close = 10.0 * base.sadowsky / l;
    if (c.w_hol < 0.0) c.w_hol = 10.0 * base.sadowsky / l;
    std::vector<Vec3> g(n, Vec3::Zero());
    parallel_for(
        3 * n,
        [&](std::size_t k) {
            std::vector<Vec3> p = points;
            const std::size_t i = k / 3;
            const int a = int(k % 3);
            p[i][a] = points[i][a] + h;
            const double fp = objective(p, c).total();
            p[i][a] = points[i][a] - h;
            const double fm = objective(p, c).total();
            g[i][a] = (fp - fm) / (2.0 * h);
        },
        8);
    return g;
}

// ---------------------------------------------------------------------------
// Framed polygon used by minimize().

class FramedPolygon {
public:
    // Band normals start along the principal normals wherever the polygon
    // turns by at least kBandFrameTurn of its largest turning angle and are
    // parallel transported across flatter stretches.

    FramedPolygon(const std::vector<Vec3> &points, double eps, double w_geodesic)
        : m_x(points), m_eps(eps), m_wg(w_geodesic) {
        const std::size_t n = points.size();
        const PolylineFrames f = polyline_frames(points, true);
        const double theta_max = *std::max_element(f.theta.begin(), f.theta.end());
        if (!(theta_max >= kStraightAngle)) throw Error(ErrorCode::Precondition, "start polygon has no curved vertex");
        std::vector<bool> snap(n);
        for (std::size_t i = 0; i < n; ++i) snap[i] = f.curved[i] && f.theta[i] >= kBandFrameTurn * theta_max;
        // Binormal line carried by edge e when both its ends snap. Any
        // mismatch with the transported frame is then taken up by the twist
        // at a curved vertex, never at a straight one.
        auto edge_line = [&](std::size_t e, const Vec3 &guide) -> std::optional<Vec3> {
            if (!snap[e] || !snap[(e + 1) % n]) return std::nullopt;
            Vec3 acc = Vec3::Zero();
            for (std::size_t v : {e, (e + 1) % n})
                if (snap[v]) acc += f.binormal[v].dot(guide) >= 0.0 ? f.binormal[v] : Vec3(-f.binormal[v]);
            const Vec3 &t = f.tangent[e];
            acc -= acc.dot(t) * t;
            if (acc.norm() < 1e-12) return std::nullopt;
            return Vec3(acc.normalized());
        };
        std::size_t e0 = n;
        for (std::size_t e = 0; e < n && e0 == n; ++e)
            if (snap[e] && snap[(e + 1) % n]) e0 = e;
        if (e0 == n) throw Error(ErrorCode::Precondition, "start polygon has no pair of adjacent curved vertices");
        std::vector<Vec3> line(n);
        Vec3 v = *edge_line(e0, f.binormal[e0]);
        line[e0] = v;
        for (std::size_t k = 1; k < n; ++k) {
            const std::size_t e = (e0 + k) % n, ep = (e + n - 1) % n;
            v = parallel_transport(v, f.tangent[ep], f.tangent[e]);
            v = (v - v.dot(f.tangent[e]) * f.tangent[e]).normalized();
            if (const auto w = edge_line(e, v)) v = w->dot(v) >= 0.0 ? *w : Vec3(-*w);
            line[e] = v;
        }
        const Vec3 back = parallel_transport(v, f.tangent[(e0 + n - 1) % n], f.tangent[e0]);
        if (back.dot(line[e0]) >= 0.0)
            throw Error(ErrorCode::Precondition, "start polygon is not one-sided: its band frame closes without a flip");
        // Edges visited after wrapping past index 0 are flipped so that the
        // director reverses between edge n-1 and edge 0.
        for (std::size_t e = 0; e < e0; ++e) line[e] = -line[e];

        m_u.resize(n);
        m_tref.resize(n);
        m_alpha.assign(n, 0.0);
        for (std::size_t e = 0; e < n; ++e) {
            m_tref[e] = f.tangent[e];
            m_u[e] = line[e].cross(f.tangent[e]).normalized();
        }
        m_ref_twist.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) m_ref_twist[i] = raw_reference_twist(i, m_x, 0.0);
    }

    // Continues from given band normals, one per edge, already carrying the
    // sign flip between edge n-1 and edge 0 (as band_normals() returns them).
    FramedPolygon(const std::vector<Vec3> &points, const std::vector<Vec3> &normals, double eps, double w_geodesic)
        : m_x(points), m_eps(eps), m_wg(w_geodesic) {
        const std::size_t n = points.size();
        if (normals.size() != n) throw Error(ErrorCode::Precondition, "need one band normal per edge");
        m_u.resize(n);
        m_tref.resize(n);
        m_alpha.assign(n, 0.0);
        for (std::size_t e = 0; e < n; ++e) {
            const Vec3 t = (points[(e + 1) % n] - points[e]).normalized();
            const Vec3 u = normals[e] - normals[e].dot(t) * t;
            if (u.norm() < 1e-12) throw Error(ErrorCode::Precondition, "band normal parallel to its edge");
            m_tref[e] = t;
            m_u[e] = u.normalized();
        }
        m_ref_twist.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) m_ref_twist[i] = raw_reference_twist(i, m_x, 0.0);
        if (std::abs(frame_holonomy() - kPi) > 0.5)
            throw Error(ErrorCode::Precondition, "band normals are not in the one-sided class");
    }

    std::size_t size() const { return m_x.size(); }
    const std::vector<Vec3> &points() const { return m_x; }
    const std::vector<double> &angles() const { return m_alpha; }
    double eps() const { return m_eps; }
    void set_eps(double e) { m_eps = e; }

    struct VertexEnergy {
        double sadowsky = 0.0, geodesic = 0.0;
    };

    // Energy of vertex i for candidate vertices x and angles alpha.
    VertexEnergy vertex_energy(std::size_t i, const std::vector<Vec3> &x, const std::vector<double> &alpha) const {
        const std::size_t n = x.size();
        const std::size_t p = (i + n - 1) % n, c = i;
        const Vec3 ep = x[i] - x[p], ec = x[(i + 1) % n] - x[i];
        const double lp = ep.norm(), lc = ec.norm();
        const Vec3 tp = ep / lp, tc = ec / lc;
        const double lbar = 0.5 * (lp + lc);
        Vec3 up = director(p, tp), uc = director(c, tc);
        if (i == 0) up = -up;
        const Vec3 mp = std::cos(alpha[p]) * up + std::sin(alpha[p]) * tp.cross(up);
        const Vec3 mc = std::cos(alpha[c]) * uc + std::sin(alpha[c]) * tc.cross(uc);
        Vec3 kb = tp.cross(tc);
        const double s = kb.norm(), co = tp.dot(tc);
        const double theta = std::atan2(s, co);
        kb *= (s > 1e-300 ? theta / s : 1.0) / lbar;
        const double kn = 0.5 * (kb.dot(tp.cross(mp)) + kb.dot(tc.cross(mc)));
        const double kg = -0.5 * (kb.dot(mp) + kb.dot(mc));
        const double ref = reference_twist(i, tp, tc, up, uc);
        const double tau = (alpha[c] - alpha[p] + ref) / lbar;
        const double a = kn * kn + tau * tau;
        VertexEnergy e;
        e.sadowsky = lbar * a * a / (kn * kn + m_eps * m_eps);
        e.geodesic = lbar * m_wg * kg * kg;
        return e;
    }

    ObjectiveTerms energy(const std::vector<Vec3> &x, const std::vector<double> &alpha) const {
        CompensatedSum s, g;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const VertexEnergy e = vertex_energy(i, x, alpha);
            s.add(e.sadowsky);
            g.add(e.geodesic);
        }
        ObjectiveTerms t;
        t.sadowsky = s.value();
        t.geodesic = g.value();
        return t;
    }
    ObjectiveTerms energy() const { return energy(m_x, m_alpha); }

    // Gradient by central differences, evaluating only the vertices a
    // coordinate touches: x_k enters vertices k-1, k, k+1; alpha_j enters
    // vertices j and j+1. Returns 3n position entries then n angle entries.
    Eigen::VectorXd local_gradient(double h) const {
        const std::size_t n = size();
        Eigen::VectorXd g(4 * n);
        parallel_for(
            n,
            [&](std::size_t k) {
                std::vector<Vec3> x = m_x;
                std::vector<double> al = m_alpha;
                auto local = [&](std::initializer_list<std::size_t> verts) {
                    double acc = 0.0;
                    for (std::size_t v : verts) {
                        const VertexEnergy e = vertex_energy(v, x, al);
                        acc += e.sadowsky + e.geodesic;
                    }
                    return acc;
                };
                const std::size_t km = (k + n - 1) % n, kp = (k + 1) % n;
                for (int a = 0; a < 3; ++a) {
                    x[k][a] = m_x[k][a] + h;
                    const double fp = local({km, k, kp});
                    x[k][a] = m_x[k][a] - h;
                    const double fm = local({km, k, kp});
                    x[k][a] = m_x[k][a];
                    g[3 * k + a] = (fp - fm) / (2.0 * h);
                }
                al[k] = m_alpha[k] + h;
                const double fp = local({k, kp});
                al[k] = m_alpha[k] - h;
                const double fm = local({k, kp});
                g[3 * n + k] = (fp - fm) / (2.0 * h);
            },
            64);
        return g;
    }

    // Same coordinates, differencing the whole energy (slow; used as check).
    double full_difference(std::size_t coord, double h) const {
        const std::size_t n = size();
        std::vector<Vec3> x = m_x;
        std::vector<double> al = m_alpha;
        auto bump = [&](double d) {
            if (coord < 3 * n)
                x[coord / 3][int(coord % 3)] = m_x[coord / 3][int(coord % 3)] + d;
            else
                al[coord - 3 * n] = m_alpha[coord - 3 * n] + d;
        };
        bump(h);
        const double fp = energy(x, al).total();
        bump(-h);
        const double fm = energy(x, al).total();
        return (fp - fm) / (2.0 * h);
    }

    // Accepts new vertices and angles and carries the reference directors
    // along by parallel transport.
    void accept(const std::vector<Vec3> &x, const std::vector<double> &alpha) {
        const std::size_t n = size();
        std::vector<double> ref(n);
        for (std::size_t i = 0; i < n; ++i) ref[i] = raw_reference_twist(i, x, m_ref_twist[i]);
        for (std::size_t e = 0; e < n; ++e) {
            const Vec3 t = (x[(e + 1) % n] - x[e]).normalized();
            Vec3 u = parallel_transport(m_u[e], m_tref[e], t);
            m_u[e] = (u - u.dot(t) * t).normalized();
            m_tref[e] = t;
        }
        m_ref_twist = ref;
        m_x = x;
        m_alpha = alpha;
    }

    // Carries m_0 once around the polygon, moving it to each next edge and
    // rotating it by the frame twist there; returns its angle to m_0 at the
    // end, pi for the one-sided class up to rounding.
    double frame_holonomy(const std::vector<Vec3> &x, const std::vector<double> &alpha) const {
        const std::size_t n = x.size();
        std::vector<Vec3> t(n);
        for (std::size_t e = 0; e < n; ++e) t[e] = (x[(e + 1) % n] - x[e]).normalized();
        auto normal = [&](std::size_t e) {
            const Vec3 u = director(e, t[e]);
            return Vec3(std::cos(alpha[e]) * u + std::sin(alpha[e]) * t[e].cross(u));
        };
        const Vec3 m0 = normal(0);
        Vec3 v = m0;
        for (std::size_t k = 1; k <= n; ++k) {
            const std::size_t i = k % n, p = k - 1;
            Vec3 up = director(p, t[p]);
            const Vec3 uc = director(i, t[i]);
            if (i == 0) up = -up;
            const double tw = alpha[i] - alpha[p] + reference_twist(i, t[p], t[i], up, uc);
            v = rotate(parallel_transport(v, t[p], t[i]), t[i], tw);
            v = (v - v.dot(t[i]) * t[i]).normalized();
        }
        return angle_between(m0, v);
    }
    double frame_holonomy() const { return frame_holonomy(m_x, m_alpha); }

    // Line functional with curvature from the turning angles and torsion
    // from the band-frame twist (eps may be 0).
    double line_energy(double eps) const {
        const std::size_t n = size();
        CompensatedSum acc;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t p = (i + n - 1) % n;
            const Vec3 ep = m_x[i] - m_x[p], ec = m_x[(i + 1) % n] - m_x[i];
            const double lp = ep.norm(), lc = ec.norm(), lbar = 0.5 * (lp + lc);
            const Vec3 tp = ep / lp, tc = ec / lc;
            Vec3 up = director(p, tp);
            const Vec3 uc = director(i, tc);
            if (i == 0) up = -up;
            const double K = std::atan2(tp.cross(tc).norm(), tp.dot(tc)) / lbar;
            double twist = m_alpha[i] - m_alpha[p] + reference_twist(i, tp, tc, up, uc);
            if (K == 0.0 && std::abs(twist) < 1e-12) twist = 0.0; // rounding on exactly straight stretches
            acc.add(lbar * sadowsky_density(K, twist / lbar, eps));
        }
        return acc.value();
    }

    // Samples at the vertices with K from the turning angle, W from the
    // frame twist and the band normal as normal; sadowsky_energy of it
    // equals line_energy.
    FramedCurve framed_curve() const {
        const std::size_t n = size();
        FramedCurve c;
        c.closed = true;
        c.samples.resize(n);
        double s = 0.0;
        CompensatedSum total;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t p = (i + n - 1) % n;
            const Vec3 ep = m_x[i] - m_x[p], ec = m_x[(i + 1) % n] - m_x[i];
            const double lp = ep.norm(), lc = ec.norm(), lbar = 0.5 * (lp + lc);
            const Vec3 tp = ep / lp, tc = ec / lc;
            Vec3 up = director(p, tp);
            const Vec3 uc = director(i, tc);
            if (i == 0) up = -up;
            CurveSample &smp = c.samples[i];
            smp.s = s;
            smp.position = m_x[i];
            const Vec3 t = tp + tc;
            smp.tangent = t.norm() > 1e-12 ? Vec3(t.normalized()) : tc;
            smp.K = std::atan2(tp.cross(tc).norm(), tp.dot(tc)) / lbar;
            double twist = m_alpha[i] - m_alpha[p] + reference_twist(i, tp, tc, up, uc);
            if (smp.K == 0.0 && std::abs(twist) < 1e-12) twist = 0.0;
            smp.W = twist / lbar;
            smp.ds = lbar;
            const Vec3 mp = std::cos(m_alpha[p]) * up + std::sin(m_alpha[p]) * tp.cross(up);
            const Vec3 mc = std::cos(m_alpha[i]) * uc + std::sin(m_alpha[i]) * tc.cross(uc);
            Vec3 m = mp.dot(mc) >= 0.0 ? Vec3(mp + mc) : Vec3(mc - mp);
            m -= m.dot(smp.tangent) * smp.tangent;
            if (m.norm() > 1e-12) smp.normal = m.normalized();
            s += lc;
            total.add(lbar);
        }
        c.total_length = total.value();
        c.closure_position = m_x[0];
        c.closure_tangent = c.samples[0].tangent;
        return c;
    }

    std::vector<Vec3> band_normals() const {
        const std::size_t n = size();
        std::vector<Vec3> m(n);
        for (std::size_t e = 0; e < n; ++e) {
            const Vec3 t = m_tref[e];
            m[e] = std::cos(m_alpha[e]) * m_u[e] + std::sin(m_alpha[e]) * t.cross(m_u[e]);
        }
        return m;
    }

private:
    Vec3 director(std::size_t e, const Vec3 &t) const {
        const Vec3 u = parallel_transport(m_u[e], m_tref[e], t);
        return u - u.dot(t) * t;
    }

    // Rotation about t_c taking the transported previous director onto the
    // current one, kept continuous with the last accepted value.
    double reference_twist(std::size_t i, const Vec3 &tp, const Vec3 &tc, const Vec3 &up, const Vec3 &uc) const {
        const Vec3 moved = parallel_transport(up, tp, tc);
        const double raw = signed_angle(moved, uc, tc);
        return m_ref_twist.empty() ? raw : m_ref_twist[i] + wrap_angle(raw - m_ref_twist[i]);
    }

    double raw_reference_twist(std::size_t i, const std::vector<Vec3> &x, double previous) const {
        const std::size_t n = x.size();
        const std::size_t p = (i + n - 1) % n;
        const Vec3 tp = (x[i] - x[p]).normalized(), tc = (x[(i + 1) % n] - x[i]).normalized();
        Vec3 up = director(p, tp);
        const Vec3 uc = director(i, tc);
        if (i == 0) up = -up;
        const double raw = signed_angle(parallel_transport(up, tp, tc), uc, tc);
        return previous + wrap_angle(raw - previous);
    }

    std::vector<Vec3> m_x;
    std::vector<double> m_alpha;
    std::vector<Vec3> m_u, m_tref;
    std::vector<double> m_ref_twist;
    double m_eps;
    double m_wg;
};

// ---------------------------------------------------------------------------
// Edge-length constraint C_e = |x_{e+1} - x_e|^2 - h^2.

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;

// J J^T for the edge-length constraints (cyclic tridiagonal).
inline SpMat constraint_gram(const std::vector<Vec3> &x) {
    const int n = int(x.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(3 * n);
    std::vector<Vec3> e(n);
    for (int i = 0; i < n; ++i) e[i] = x[(i + 1) % n] - x[i];
    for (int i = 0; i < n; ++i) {
        trip.emplace_back(i, i, 8.0 * e[i].squaredNorm());
        const int j = (i + 1) % n;
        const double off = -4.0 * e[i].dot(e[j]);
        trip.emplace_back(i, j, off);
        trip.emplace_back(j, i, off);
    }
    SpMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

// J v for a displacement field v.
inline Eigen::VectorXd constraint_apply(const std::vector<Vec3> &x, const Eigen::VectorXd &v) {
    const int n = int(x.size());
    Eigen::VectorXd r(n);
    for (int e = 0; e < n; ++e) {
        const int f = (e + 1) % n;
        const Vec3 d = x[f] - x[e];
        r[e] = 2.0 * d.dot(v.segment<3>(3 * f) - v.segment<3>(3 * e));
    }
    return r;
}

// J^T lambda.
inline Eigen::VectorXd constraint_transpose(const std::vector<Vec3> &x, const Eigen::VectorXd &lambda) {
    const int n = int(x.size());
    Eigen::VectorXd r = Eigen::VectorXd::Zero(3 * n);
    for (int e = 0; e < n; ++e) {
        const int f = (e + 1) % n;
        const Vec3 d = 2.0 * lambda[e] * (x[f] - x[e]);
        r.segment<3>(3 * f) += d;
        r.segment<3>(3 * e) -= d;
    }
    return r;
}

// Removes from v (positions only) the part that changes edge lengths to
// first order.
inline void project_tangent(const std::vector<Vec3> &x, Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::SimplicialLDLT<SpMat> solver(constraint_gram(x));
    const Eigen::VectorXd lambda = solver.solve(constraint_apply(x, v));
    v -= constraint_transpose(x, lambda);
}

inline double edge_residual(const std::vector<Vec3> &x, double h) {
    double worst = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e)
        worst = std::max(worst, std::abs((x[(e + 1) % x.size()] - x[e]).squaredNorm() - h * h) / (h * h));
    return worst;
}

} // namespace detail

// Moves the vertices (least-norm Newton steps) until every edge has length
// h: relative residual below tol or `sweeps` iterations.
inline std::vector<Vec3> project_edge_lengths(std::vector<Vec3> x, double h, int sweeps = 50, double tol = 1e-10) {
    const int n = int(x.size());
    for (int it = 0; it < sweeps; ++it) {
        if (detail::edge_residual(x, h) < tol) break;
        Eigen::VectorXd C(n);
        for (int e = 0; e < n; ++e) C[e] = (x[(e + 1) % n] - x[e]).squaredNorm() - h * h;
        Eigen::SimplicialLDLT<detail::SpMat> solver(detail::constraint_gram(x));
        const Eigen::VectorXd lambda = solver.solve(-C);
        const Eigen::VectorXd dx = detail::constraint_transpose(x, lambda);
        for (int i = 0; i < n; ++i) x[i] += dx.segment<3>(3 * i);
    }
    return x;
}

inline double edge_length_spread(const std::vector<Vec3> &x) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) {
        const double len = (x[(e + 1) % x.size()] - x[e]).norm();
        lo = std::min(lo, len);
        hi = std::max(hi, len);
        sum += len;
    }
    return (hi - lo) / (sum / double(x.size()));
}

namespace detail {

// Smoothing metric for the descent direction: bending-like fourth
// differences on positions, second differences on frame angles.
class Preconditioner {
public:
    Preconditioner(int n, double h, double l) : m_n(n) {
        std::vector<Eigen::Triplet<double>> bx, ba;
        const double mu_x = h / std::pow(l, 4), mu_a = h / (l * l);
        const double c4 = 1.0 / (h * h * h), c2 = 1.0 / h;
        for (int i = 0; i < n; ++i) {
            auto at = [n](int k) { return ((k % n) + n) % n; };
            // (D2^T D2)_{i,.} = [1, -4, 6, -4, 1]
            const double w4[5] = {1, -4, 6, -4, 1};
            for (int k = -2; k <= 2; ++k) bx.emplace_back(i, at(i + k), c4 * w4[k + 2]);
            bx.emplace_back(i, i, mu_x);
            const double w2[3] = {-1, 2, -1};
            for (int k = -1; k <= 1; ++k) ba.emplace_back(i, at(i + k), c2 * w2[k + 1]);
            ba.emplace_back(i, i, mu_a);
        }
        SpMat X(n, n), A(n, n);
        X.setFromTriplets(bx.begin(), bx.end());
        A.setFromTriplets(ba.begin(), ba.end());
        m_x.compute(X);
        m_a.compute(A);
    }

    // v holds 3n position entries then n angle entries.
    Eigen::VectorXd apply_inverse(const Eigen::VectorXd &v) const {
        Eigen::VectorXd out(v.size());
        Eigen::VectorXd col(m_n);
        for (int a = 0; a < 3; ++a) {
            for (int i = 0; i < m_n; ++i) col[i] = v[3 * i + a];
            const Eigen::VectorXd s = m_x.solve(col);
            for (int i = 0; i < m_n; ++i) out[3 * i + a] = s[i];
        }
        out.tail(m_n) = m_a.solve(v.tail(m_n));
        return out;
    }

private:
    int m_n;
    Eigen::SimplicialLDLT<SpMat> m_x, m_a;
};

} // namespace detail

// Projected, preconditioned gradient descent with backtracking. Every
// accepted iterate has uniform edges l/n (projection) and a strictly lower
// objective than the previous one.
// Band normals, when given, continue an earlier run's frame; otherwise the
// frame is read off the start polygon.
inline OptimizationResult minimize(const std::vector<Vec3> &points0, const OptimizerConfig &config,
                                   const std::vector<Vec3> *normals0 = nullptr) {
    const std::size_t n = points0.size();
    if (n < 24) throw Error(ErrorCode::TooFewPoints, "minimize needs at least 24 points");
    if (config.max_iters < 0) throw Error(ErrorCode::Precondition, "max_iters must be non-negative");
    if (!(config.grad_tol > 0.0)) throw Error(ErrorCode::Precondition, "grad_tol must be positive");
    if (config.w_geodesic < 0.0) throw Error(ErrorCode::Precondition, "weights must be non-negative");

    const FramedCurve start = discrete_geometry(points0);
    const ClosureResiduals r0 = closure_residuals(start);
    const double l = start.total_length;
    if (r0.position_gap > 0.01 * l || r0.tangent_gap > 0.01 * l)
        throw Error(ErrorCode::Precondition, "start polygon is not closed");
    if (detail::holonomy_offset(r0.holonomy_angle) > 0.5)
        throw Error(ErrorCode::Precondition,
                    "start is not in the one-sided class: holonomy " + std::to_string(r0.holonomy_angle) + " rad");

    OptimizationResult result;
    result.eps = detail::default_eps(config, n, l);
    result.initial_polygon_energy = sadowsky_energy(start, 0.0).value;

    const double h_edge = l / double(n);
    // The frame is read off the unprojected polygon, whose straight stretches
    // are exactly straight, then carried onto the perturbed uniform-edge one.
    FramedPolygon state = normals0 ? FramedPolygon(points0, *normals0, result.eps, config.w_geodesic)
                                   : FramedPolygon(points0, result.eps, config.w_geodesic);
    std::vector<Vec3> x0 = points0;
    if (config.seed && config.perturbation > 0.0) {
        std::mt19937_64 rng(*config.seed);
        std::normal_distribution<double> nd(0.0, config.perturbation * h_edge);
        for (auto &p : x0) p += Vec3(nd(rng), nd(rng), nd(rng));
    }
    state.accept(project_edge_lengths(x0, h_edge, config.projection_sweeps, config.projection_tol), state.angles());
    result.initial_energy = state.line_energy(0.0);
    const double e0 = state.energy().sadowsky;
    result.w_close = config.w_close >= 0.0 ? config.w_close : 10.0 * e0 / l;
    result.w_hol = config.w_hol >= 0.0 ? config.w_hol : 10.0 * e0 / l;
    const detail::Preconditioner precond(int(n), h_edge, l);
    const double fd_step = 1e-6 * l / double(n);

    // The polygon is cyclic, so position and tangent gaps vanish; the
    // holonomy term measures the band frame, which the flip at vertex 0 keeps
    // in the one-sided class. The bare-polygon holonomy is monitored
    // separately and aborts the run if it drifts.
    auto evaluate = [&](const std::vector<Vec3> &x, const std::vector<double> &al, TraceRow &row) {
        const ObjectiveTerms t = state.energy(x, al);
        row.residuals = closure_residuals(discrete_geometry(x));
        const ClosureResiduals &r = row.residuals;
        row.closure_pen = result.w_close * (r.position_gap * r.position_gap + r.tangent_gap * r.tangent_gap);
        const double dh = state.frame_holonomy(x, al) - kPi;
        row.holonomy_pen = result.w_hol * dh * dh;
        row.sadowsky_term = t.sadowsky;
        row.energy = t.sadowsky + t.geodesic + row.closure_pen + row.holonomy_pen;
        return row.energy;
    };

    // Rigid translations cost nothing and are barely damped by the metric.
    auto remove_translation = [n](Eigen::VectorXd &v) {
        Vec3 mean = Vec3::Zero();
        for (std::size_t i = 0; i < n; ++i) mean += v.segment<3>(3 * i);
        mean /= double(n);
        for (std::size_t i = 0; i < n; ++i) v.segment<3>(3 * i) -= mean;
    };

    auto run = [&](int iters, std::vector<TraceRow> &trace, bool main_phase) {
        TraceRow row;
        row.iter = 0;
        double f = evaluate(state.points(), state.angles(), row);
        trace.push_back(row);
        double step = config.step0;
        for (int it = 1; it <= iters; ++it) {
            Eigen::VectorXd g = state.local_gradient(fd_step);
            detail::project_tangent(state.points(), g.head(3 * n));
            if (g.lpNorm<Eigen::Infinity>() < config.grad_tol) {
                if (main_phase) result.status = OptimizerStatus::Converged;
                return;
            }
            Eigen::VectorXd d = -precond.apply_inverse(g);
            remove_translation(d);
            detail::project_tangent(state.points(), d.head(3 * n));
            if (d.dot(g) >= 0.0) d = -g; // fall back to the plain projected gradient
            double dmax = 0.0;
            for (std::size_t i = 0; i < n; ++i) dmax = std::max(dmax, d.segment<3>(3 * i).norm());
            if (!(dmax > 0.0)) {
                if (main_phase) result.status = OptimizerStatus::Converged;
                return;
            }
            // Never move a vertex by more than a fifth of an edge at once.
            const double cap = 0.2 * h_edge / dmax;
            if (step <= 0.0) step = 0.5 * cap;
            step = std::min(step, cap);
            const double min_step = 1e-12 * cap;
            bool accepted = false;
            while (step >= min_step) {
                std::vector<Vec3> x = state.points();
                std::vector<double> al = state.angles();
                for (std::size_t i = 0; i < n; ++i) x[i] += step * d.segment<3>(3 * i);
                for (std::size_t j = 0; j < n; ++j) al[j] += step * d[3 * n + j];
                x = project_edge_lengths(x, h_edge, config.projection_sweeps, config.projection_tol);
                TraceRow cand;
                cand.iter = it;
                const double fc = evaluate(x, al, cand);
                if (fc < f) {
                    if (detail::holonomy_offset(cand.residuals.holonomy_angle) > config.holonomy_drift)
                        throw Error(ErrorCode::LostTopology, "holonomy left pi by more than " +
                                                                 std::to_string(config.holonomy_drift) + " rad");
                    state.accept(x, al);
                    cand.step = step;
                    trace.push_back(cand);
                    f = fc;
                    ++result.accepted_steps;
                    step *= 2.0;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                if (main_phase) result.status = OptimizerStatus::LineSearchFailed;
                return;
            }
        }
    };

    result.status = OptimizerStatus::MaxIterations;
    run(config.max_iters, result.energy_trace, true);
    const int polish = config.polish_iters >= 0 ? config.polish_iters : config.max_iters / 10;
    if (polish > 0 && result.status != OptimizerStatus::LineSearchFailed) {
        state.set_eps(result.eps / 10.0);
        const OptimizerStatus keep = result.status;
        run(polish, result.polish_trace, false);
        result.status = keep;
    }
    result.converged = result.status == OptimizerStatus::Converged;

    result.points = state.points();
    result.frame_angles = state.angles();
    result.band_normals = state.band_normals();
    result.curve = state.framed_curve();
    result.final_residuals = closure_residuals(result.curve);
    result.final_energy = state.line_energy(0.0);
    result.final_polygon_energy = sadowsky_energy(discrete_geometry(result.points), 0.0).value;
    result.final_frame_holonomy = state.frame_holonomy();
    result.edge_spread = edge_length_spread(result.points);
    return result;
}

} // namespace devband
