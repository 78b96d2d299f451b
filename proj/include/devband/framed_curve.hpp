#pragma once

// Discrete differential geometry of sampled space curves: turning-angle
// curvature, binormal-dihedral torsion, closure and frame-holonomy
// diagnostics, plus exact 60-degree helices used as oracles.

#include "devband/error.hpp"
#include "devband/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace devband {

// Vertices turning by less than this (radians) are treated as straight:
// K = W = 0 and no binormal.
inline constexpr double kStraightAngle = 1e-8;

struct CurveSample {
    double s = 0.0;          // arc-length coordinate
    Vec3 position = Vec3::Zero();
    Vec3 tangent = Vec3::UnitX();
    double K = 0.0;          // curvature
    double W = 0.0;          // torsion
    double ds = 0.0;         // quadrature weight
    Vec3 normal = Vec3::Zero(); // principal normal, zero where undefined
    int segment = -1;        // owning piece of a piecewise curve, -1 if none
};

struct FramedCurve {
    std::vector<CurveSample> samples;
    bool closed = true;
    double total_length = 0.0;
    // End of one traversal. For cyclic polygons this is sample 0; for curves
    // assembled piece by piece it is the propagated end point.
    Vec3 closure_position = Vec3::Zero();
    Vec3 closure_tangent = Vec3::UnitX();

    std::size_t size() const { return samples.size(); }

    std::vector<Vec3> positions() const {
        std::vector<Vec3> p;
        p.reserve(samples.size());
        for (const auto &smp : samples) p.push_back(smp.position);
        return p;
    }
};

struct ClosureResiduals {
    double position_gap = 0.0;
    double tangent_gap = 0.0;
    // Magnitude of the net rotation about the tangent of the band-normal
    // frame after one circuit, in [0, pi]: pi for a one-sided band.
    double holonomy_angle = 0.0;
    // Signed rotation of a purely parallel-transported normal (no twist).
    double parallel_transport_angle = 0.0;
};

// Per-vertex / per-edge quantities of a polyline. Edge e joins vertex e and
// vertex e+1; vertex i sits between edges i-1 and i.
struct PolylineFrames {
    std::vector<Vec3> tangent;   // per edge, unit
    std::vector<double> length;  // per edge
    std::vector<double> theta;   // per vertex turning angle
    std::vector<Vec3> binormal;  // per vertex, unit, zero if straight
    std::vector<bool> curved;    // per vertex
    std::vector<double> twist;   // per edge, signed binormal-line dihedral
    std::vector<bool> twist_defined;
    bool closed = true;

    std::size_t vertices() const { return theta.size(); }
    std::size_t edges() const { return length.size(); }
};

// Dihedral between binormal *lines*, reduced to (-pi/2, pi/2]: a flipped
// binormal (inflection) does not register as a half-turn of twist.
inline double line_dihedral(const Vec3 &b0, const Vec3 &b1, const Vec3 &axis) {
    double phi = signed_angle(b0, b1, axis);
    if (phi > 0.5 * kPi) phi -= kPi;
    if (phi <= -0.5 * kPi) phi += kPi;
    return phi;
}

inline PolylineFrames polyline_frames(std::span<const Vec3> pts, bool closed) {
    const std::size_t n = pts.size();
    if (n < 3) throw Error(ErrorCode::TooFewPoints, "need at least 3 points");
    PolylineFrames f;
    f.closed = closed;
    const std::size_t ne = closed ? n : n - 1;
    f.tangent.resize(ne);
    f.length.resize(ne);
    double scale = 0.0;
    for (std::size_t e = 0; e < ne; ++e) scale = std::max(scale, (pts[(e + 1) % n] - pts[e]).norm());
    for (std::size_t e = 0; e < ne; ++e) {
        const Vec3 d = pts[(e + 1) % n] - pts[e];
        const double len = d.norm();
        if (!(len > 1e-14 * scale)) throw Error(ErrorCode::DegenerateEdge, "coincident consecutive points", e);
        f.length[e] = len;
        f.tangent[e] = d / len;
    }
    f.theta.assign(n, 0.0);
    f.binormal.assign(n, Vec3::Zero());
    f.curved.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (!closed && (i == 0 || i == n - 1)) continue;
        const Vec3 &t0 = f.tangent[(i + ne - 1) % ne];
        const Vec3 &t1 = f.tangent[i % ne];
        const Vec3 c = t0.cross(t1);
        f.theta[i] = std::atan2(c.norm(), t0.dot(t1));
        if (f.theta[i] >= kStraightAngle) {
            f.curved[i] = true;
            f.binormal[i] = c.normalized();
        }
    }
    f.twist.assign(ne, 0.0);
    f.twist_defined.assign(ne, false);
    for (std::size_t e = 0; e < ne; ++e) {
        const std::size_t a = e, b = (e + 1) % n;
        if (f.curved[a] && f.curved[b]) {
            f.twist[e] = line_dihedral(f.binormal[a], f.binormal[b], f.tangent[e]);
            f.twist_defined[e] = true;
        }
    }
    return f;
}

namespace detail {

// Curvature and torsion at vertex i from precomputed frames. Torsion averages
// the defined adjacent edge twists (one-sided next to straight vertices).
inline void vertex_curvature_torsion(const PolylineFrames &f, std::size_t i, double &K, double &W) {
    const std::size_t ne = f.edges();
    const std::size_t n = f.vertices();
    K = W = 0.0;
    if (!f.curved[i]) return;
    const bool has_prev = f.closed || i > 0;
    const bool has_next = f.closed || i + 1 < n;
    if (!has_prev || !has_next) return;
    const std::size_t ep = (i + ne - 1) % ne, en = i % ne;
    K = f.theta[i] / (0.5 * (f.length[ep] + f.length[en]));
    double phi = 0.0, len = 0.0;
    for (std::size_t e : {ep, en}) {
        if (f.twist_defined[e]) {
            phi += f.twist[e];
            len += f.length[e];
        }
    }
    if (len > 0.0) W = phi / len;
}

} // namespace detail

// K, W and quadrature weights of a polyline. Closed input is treated as a
// cyclic polygon; for open input the two end vertices copy their neighbour.
inline FramedCurve discrete_geometry(std::span<const Vec3> pts, bool closed = true) {
    const std::size_t n = pts.size();
    if (n < 6) throw Error(ErrorCode::TooFewPoints, "need at least 6 points");
    const PolylineFrames f = polyline_frames(pts, closed);
    const std::size_t ne = f.edges();

    FramedCurve curve;
    curve.closed = closed;
    curve.samples.resize(n);
    double s = 0.0;
    CompensatedSum total;
    for (std::size_t i = 0; i < n; ++i) {
        CurveSample &smp = curve.samples[i];
        smp.s = s;
        smp.position = pts[i];
        const bool has_prev = closed || i > 0;
        const bool has_next = closed || i + 1 < n;
        const double lp = has_prev ? f.length[(i + ne - 1) % ne] : 0.0;
        const double ln = has_next ? f.length[i % ne] : 0.0;
        smp.ds = 0.5 * (lp + ln);
        if (has_prev && has_next) {
            const Vec3 t = f.tangent[(i + ne - 1) % ne] + f.tangent[i % ne];
            smp.tangent = t.norm() > 1e-12 ? Vec3(t.normalized()) : f.tangent[i % ne];
        } else {
            smp.tangent = has_next ? f.tangent[i] : f.tangent[ne - 1];
        }
        detail::vertex_curvature_torsion(f, i, smp.K, smp.W);
        if (f.curved[i] && smp.K > 0.0) smp.normal = f.binormal[i].cross(smp.tangent).normalized();
        if (has_next) s += f.length[i % ne];
        total.add(smp.ds);
    }
    if (!closed) {
        curve.samples.front().K = curve.samples[1].K;
        curve.samples.front().W = curve.samples[1].W;
        curve.samples.back().K = curve.samples[n - 2].K;
        curve.samples.back().W = curve.samples[n - 2].W;
    }
    curve.total_length = total.value();
    curve.closure_position = closed ? pts[0] : pts[n - 1];
    curve.closure_tangent = closed ? curve.samples[0].tangent : curve.samples[n - 1].tangent;
    return curve;
}

struct Holonomy {
    double band_frame = 0.0;         // signed, (-pi, pi]
    double parallel_transport = 0.0; // signed, (-pi, pi]
};

// A band frame follows the binormal line only through vertices turning by at
// least this fraction of the polygon's largest turning angle; across flatter
// stretches the binormal is ill-conditioned and the frame is carried by
// parallel transport instead.
inline constexpr double kBandFrameTurn = 0.1;

// Transports a normal once around a closed polygon. The band frame follows
// the binormal line through every edge joining two strongly curved vertices
// and is parallel transported elsewhere; the plain transport never twists.
inline Holonomy polygon_holonomy(std::span<const Vec3> pts, double relative_turn = kBandFrameTurn) {
    const PolylineFrames f = polyline_frames(pts, true);
    const std::size_t n = f.edges();
    const double theta_max = *std::max_element(f.theta.begin(), f.theta.end());
    auto strong = [&](std::size_t i) { return f.curved[i] && f.theta[i] >= relative_turn * theta_max; };
    const Vec3 u0 = any_orthonormal(f.tangent[0]);
    Vec3 band = u0, plain = u0;
    for (std::size_t e = 0; e < n; ++e) {
        const Vec3 &t = f.tangent[e];
        const Vec3 &tn = f.tangent[(e + 1) % n];
        if (f.twist_defined[e] && strong(e) && strong((e + 1) % n)) band = rotate(band, t, f.twist[e]);
        band = parallel_transport(band, t, tn);
        plain = parallel_transport(plain, t, tn);
        band = (band - band.dot(tn) * tn).normalized();
        plain = (plain - plain.dot(tn) * tn).normalized();
    }
    return {signed_angle(u0, band, f.tangent[0]), signed_angle(u0, plain, f.tangent[0])};
}

inline ClosureResiduals closure_residuals(const FramedCurve &curve) {
    if (!curve.closed) throw Error(ErrorCode::NotClosed, "closure residuals need a closed curve");
    if (curve.samples.empty()) throw Error(ErrorCode::TooFewPoints, "empty curve");
    ClosureResiduals r;
    r.position_gap = (curve.closure_position - curve.samples.front().position).norm();
    r.tangent_gap = angle_between(curve.closure_tangent, curve.samples.front().tangent);
    const auto pts = curve.positions();
    const Holonomy h = polygon_holonomy(pts);
    r.holonomy_angle = std::abs(h.band_frame);
    r.parallel_transport_angle = h.parallel_transport;
    return r;
}

// --- 60-degree helices -----------------------------------------------------
// A helix meeting the generators of a cylinder of radius r at 60 degrees has
// K = sin^2(60)/r = 3/(4r) and W = sin(60)cos(60)/r = sqrt(3)/(4r).

inline double helix_curvature(double r) { return 0.75 / r; }
inline double helix_torsion(double r, int handedness) { return handedness * kSqrt3 / (4.0 * r); }
inline double helix_arc_length(double r, double wrap) { return 2.0 * r * wrap / kSqrt3; }

// Point on the canonical helix about +z at winding angle psi.
inline Vec3 helix_point(double r, int handedness, double psi) {
    return {r * std::cos(psi), handedness * r * std::sin(psi), r * psi / kSqrt3};
}

inline void check_helix_args(double r, double wrap, int handedness) {
    if (!(r > 0.0) || !(wrap > 0.0)) throw Error(ErrorCode::NonPositive, "helix radius and wrap must be positive");
    if (handedness != 1 && handedness != -1) throw Error(ErrorCode::Precondition, "handedness must be +1 or -1");
}

inline std::vector<Vec3> helix_points(double r, double wrap, int handedness, std::size_t count) {
    check_helix_args(r, wrap, handedness);
    std::vector<Vec3> pts(count);
    for (std::size_t j = 0; j < count; ++j)
        pts[j] = helix_point(r, handedness, wrap * double(j) / double(count - 1));
    return pts;
}

// Exact samples (open curve) of the 60-degree helix.
inline FramedCurve analytic_helix(double r, double wrap, int handedness, std::size_t count = 65) {
    check_helix_args(r, wrap, handedness);
    if (count < 2) throw Error(ErrorCode::BadSampleCount, "need at least 2 helix samples");
    FramedCurve c;
    c.closed = false;
    c.total_length = helix_arc_length(r, wrap);
    const double h = c.total_length / double(count - 1);
    c.samples.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
        const double psi = wrap * double(j) / double(count - 1);
        CurveSample &smp = c.samples[j];
        smp.s = h * double(j);
        smp.position = helix_point(r, handedness, psi);
        smp.tangent = Vec3(-0.5 * kSqrt3 * std::sin(psi), 0.5 * kSqrt3 * handedness * std::cos(psi), 0.5);
        smp.normal = Vec3(-std::cos(psi), -handedness * std::sin(psi), 0.0);
        smp.K = helix_curvature(r);
        smp.W = helix_torsion(r, handedness);
        smp.ds = (j == 0 || j + 1 == count) ? 0.5 * h : h;
    }
    c.closure_position = c.samples.back().position;
    c.closure_tangent = c.samples.back().tangent;
    return c;
}

} // namespace devband
