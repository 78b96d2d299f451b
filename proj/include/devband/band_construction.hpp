#pragma once

// Closed-form three-rod developable Moebius band: three planar strips and
// three half-turn 60-degree helical wraps around rods of diameters 2d, d, d.
//
// Layout (drawing plane z = 0, triangle corner P at the origin, PQ along +x):
//   rod 0, radius d,   at corner P, spans z in [0, 2d]   A -> B climbs 0 -> 2d
//   rod 1, radius d/2, at corner R, spans z in [d, 2d]   C -> D descends 2d -> d
//   rod 2, radius d/2, at corner Q, spans z in [0, d]    E -> F descends d -> 0
// Planar pieces B->C (z = 2d, along PR), D->E (z = d, along RQ) and
// F->A (z = 0, along QP). Each rod axis lies along the external bisector of
// its triangle corner, so every helix leaves its tangent plane at 60 degrees
// to the generators and the projected turn at each rod is 120 degrees.

#include "devband/error.hpp"
#include "devband/framed_curve.hpp"
#include "devband/geometry.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace devband {

struct BandParams {
    double l = 3.0;  // midline length
    double d = 0.3;  // small-rod diameter
    double b = 0.1;  // half-width
    int n = 600;     // midline sample count
};

struct SegmentLengths {
    double ab = 0, bc = 0, cd = 0, de = 0, ef = 0, fa = 0;
    double ap_bp = 0, cp_dp = 0, ep_fp = 0; // projected chords of the wraps
    double side = 0;                        // triangle side L = l/3

    std::array<double, 6> arcs() const { return {ab, bc, cd, de, ef, fa}; }
    double total() const {
        const auto a = arcs();
        return compensated_sum(a);
    }
};

inline constexpr std::array<const char *, 6> kSegmentNames = {"AB", "BC", "CD", "DE", "EF", "FA"};
inline constexpr std::array<char, 6> kJunctionNames = {'A', 'B', 'C', 'D', 'E', 'F'};

// Relative slack above d_max that is still read as d_max.
inline constexpr double kDiameterSnap = 1e-9;

inline double max_diameter(double l) {
    if (!(l > 0.0)) throw Error(ErrorCode::NonPositive, "length l must be positive");
    return 2.0 * l / (3.0 * kSqrt3 * kPi);
}

namespace detail {

inline std::string fmt7(double x) {
    std::ostringstream os;
    os << std::setprecision(7) << x;
    return os.str();
}

inline double checked_diameter(double l, double d) {
    const double dmax = max_diameter(l);
    if (!(d > 0.0)) throw Error(ErrorCode::NonPositive, "diameter d must be positive");
    if (d > dmax) {
        if (d <= dmax * (1.0 + kDiameterSnap)) return dmax;
        throw Error(ErrorCode::InfeasibleDiameter,
                    "d = " + fmt7(d) + " exceeds d_max = 2l/(3*sqrt(3)*pi) = " + fmt7(dmax));
    }
    return d;
}

inline double clamp_zero(double x, double scale) { return std::abs(x) <= 1e-12 * scale ? 0.0 : x; }

} // namespace detail

inline SegmentLengths segment_lengths(double l, double d) {
    if (!(l > 0.0)) throw Error(ErrorCode::NonPositive, "length l must be positive");
    d = detail::checked_diameter(l, d);
    SegmentLengths s;
    s.side = l / 3.0;
    s.ab = 2.0 * kPi * d / kSqrt3;
    s.cd = s.ef = kPi * d / kSqrt3;
    s.bc = s.fa = detail::clamp_zero(s.side - 0.5 * kSqrt3 * kPi * d, l);
    s.de = detail::clamp_zero(s.side - kPi * d / kSqrt3, l);
    s.ap_bp = s.ab * 0.5;
    s.cp_dp = s.ep_fp = s.cd * 0.5;
    return s;
}

// Largest half-width for which strips wound on different rods cannot
// overlap: half the shortest flat piece times tan(60 deg).
inline double max_width(double l, double d) {
    if (!(l > 0.0)) throw Error(ErrorCode::NonPositive, "length l must be positive");
    d = detail::checked_diameter(l, d);
    const double dmax = max_diameter(l);
    if (d == dmax) return 0.0;
    return std::max(0.0, l / (2.0 * kSqrt3) - 0.75 * kPi * d);
}

enum class Constraint { Length, Diameter, Width, SampleCount };

inline std::string to_string(Constraint c) {
    switch (c) {
        case Constraint::Length: return "length";
        case Constraint::Diameter: return "diameter";
        case Constraint::Width: return "width";
        case Constraint::SampleCount: return "sample_count";
    }
    return "unknown";
}

struct Violation {
    Constraint constraint;
    std::string message;
    double excess = 0.0; // how far past the limit
};

struct ValidationReport {
    std::vector<Violation> violations;
    std::optional<double> diameter_margin; // d_max - d
    std::optional<double> width_margin;    // b_max - b

    bool feasible() const { return violations.empty(); }
    bool violates(Constraint c) const {
        for (const auto &v : violations)
            if (v.constraint == c) return true;
        return false;
    }
};

inline ValidationReport validate(const BandParams &p) {
    ValidationReport r;
    if (!(p.l > 0.0)) {
        r.violations.push_back({Constraint::Length, "l must be positive", -p.l});
    }
    if (!(p.d > 0.0)) {
        r.violations.push_back({Constraint::Diameter, "d must be positive (the band has to wrap the rods)", -p.d});
    }
    if (p.b < 0.0) {
        r.violations.push_back({Constraint::Width, "half-width b must be non-negative", -p.b});
    }
    if (p.n < 12 || p.n % 6 != 0) {
        r.violations.push_back({Constraint::SampleCount, "n must be >= 12 and divisible by 6", double(std::max(0, 12 - p.n))});
    }
    if (p.l > 0.0 && p.d > 0.0) {
        const double dmax = max_diameter(p.l);
        r.diameter_margin = dmax - p.d;
        if (p.d > dmax * (1.0 + kDiameterSnap)) {
            r.violations.push_back({Constraint::Diameter,
                                    "3*sqrt(3)*pi*d <= 2l violated: d_max = " + detail::fmt7(dmax), p.d - dmax});
        } else {
            const double bmax = max_width(p.l, p.d);
            r.width_margin = bmax - p.b;
            if (p.b > bmax)
                r.violations.push_back({Constraint::Width,
                                        "b <= l/(2*sqrt(3)) - 3*pi*d/4 violated: b_max = " + detail::fmt7(bmax),
                                        p.b - bmax});
        }
    }
    return r;
}

struct RodSpec {
    double radius = 0.0;
    Vec3 axis_point = Vec3::Zero();
    Vec3 axis_dir = Vec3::UnitX();
    std::pair<double, double> height_interval{0.0, 0.0};
};

struct HelicalSegment {
    int rod = 0;
    double entry_angle = 0.0; // polar position of the entry point, 0 = top of rod, pi = bottom
    double wrap = kPi;
    int handedness = 1;
    Vec3 start = Vec3::Zero();
    Vec3 climb = Vec3::UnitZ(); // from entry point towards the rod axis
    Vec3 side = Vec3::UnitX();  // horizontal, orthogonal to the axis
    double radius = 0.0;
    Vec3 axis = Vec3::UnitX();
};

struct PlanarSegment {
    double level = 0.0;
    Vec3 start = Vec3::Zero();
    Vec3 end = Vec3::Zero();
};

struct Segment {
    char from = 'A', to = 'B';
    double arc_start = 0.0;
    double length = 0.0;
    std::variant<HelicalSegment, PlanarSegment> shape;

    bool helical() const { return std::holds_alternative<HelicalSegment>(shape); }
};

struct MidlinePoint {
    Vec3 position = Vec3::Zero();
    Vec3 tangent = Vec3::UnitX();
    Vec3 normal = Vec3::Zero(); // principal normal, zero on flat pieces
    double curvature = 0.0;
    double torsion = 0.0;
};

namespace detail {

inline constexpr double kCos60 = 0.5;
inline constexpr double kSin60 = 0.5 * kSqrt3;

inline MidlinePoint evaluate_segment(const Segment &seg, double sigma) {
    MidlinePoint m;
    if (const auto *h = std::get_if<HelicalSegment>(&seg.shape)) {
        const double r = h->radius;
        const double psi = sigma * kSin60 / r;
        const Vec3 centre = h->start + r * h->climb;
        m.position = centre + (sigma * kCos60) * h->axis + r * (-std::cos(psi) * h->climb + std::sin(psi) * h->side);
        m.tangent = kCos60 * h->axis + kSin60 * (std::sin(psi) * h->climb + std::cos(psi) * h->side);
        m.normal = std::cos(psi) * h->climb - std::sin(psi) * h->side;
        m.curvature = helix_curvature(r);
        m.torsion = helix_torsion(r, h->handedness);
    } else {
        const auto &p = std::get<PlanarSegment>(seg.shape);
        const Vec3 dir = (p.end - p.start) / seg.length;
        m.position = p.start + sigma * dir;
        m.tangent = dir;
    }
    return m;
}

// Outward unit normal of the surface piece (rod surfaces point away from the
// axis, flat pieces point up).
inline Vec3 surface_normal(const Segment &seg, double sigma) {
    if (seg.helical()) return -evaluate_segment(seg, sigma).normal;
    return Vec3::UnitZ();
}

} // namespace detail

struct PiecewiseBand {
    BandParams params;
    SegmentLengths lengths;
    std::array<Vec3, 3> corners;  // P, Q, R in the drawing plane
    std::array<RodSpec, 3> rods;  // big rod at P, small rods at R and Q
    std::array<Segment, 6> segments;
    std::array<double, 6> junctions{}; // arc coordinates of A..F
    Vec3 end_position = Vec3::Zero();  // propagated end of F->A
    Vec3 end_tangent = Vec3::UnitX();

    double length() const { return params.l; }

    // Segment index owning arc coordinate s (wrapped into [0, l)).
    int segment_index(double s) const {
        s = wrap(s);
        int k = 0;
        for (int i = 0; i < 6; ++i)
            if (segments[i].length > 0.0 && s >= segments[i].arc_start) k = i;
        return k;
    }

    MidlinePoint evaluate(double s) const {
        s = wrap(s);
        const int k = segment_index(s);
        return detail::evaluate_segment(segments[k], s - segments[k].arc_start);
    }

    MidlinePoint segment_end(int k) const { return detail::evaluate_segment(segments[k], segments[k].length); }
    MidlinePoint segment_start(int k) const { return detail::evaluate_segment(segments[k], 0.0); }

    // Largest tangent jump (radians) over the six junctions, measured between
    // the propagated end of each piece and the start of the next.
    double junction_tangent_mismatch() const {
        double worst = 0.0;
        for (int k = 0; k < 6; ++k) {
            const Vec3 t_end = segments[k].length > 0.0 ? segment_end(k).tangent : segment_start(k).tangent;
            const Vec3 t_next = k == 5 ? segment_start(0).tangent : segment_start(next_nonempty(k)).tangent;
            worst = std::max(worst, angle_between(t_end, t_next));
        }
        return worst;
    }

    double closure_gap() const { return (end_position - segment_start(0).position).norm(); }

    // Continues the surface normal piece by piece from A; true when it comes
    // back reversed (one-sided band).
    bool one_sided() const { return orientation_signs().back() < 0; }

    // Sign making each piece's surface normal continuous with the previous
    // one; the seventh entry is the sign needed to match piece 0 again.
    std::array<int, 7> orientation_signs() const {
        std::array<int, 7> sign{};
        sign[0] = 1;
        int prev = 0;
        for (int k = 1; k <= 6; ++k) {
            const int cur = k % 6;
            if (k < 6 && segments[cur].length == 0.0) {
                sign[k] = sign[k - 1];
                continue;
            }
            const Vec3 n_end = sign[prev] * detail::surface_normal(segments[prev], segments[prev].length);
            const Vec3 n_start = detail::surface_normal(segments[cur], 0.0);
            sign[k] = n_end.dot(n_start) >= 0.0 ? 1 : -1;
            if (k < 6) prev = k;
        }
        if (sign[6] == 1) sign[6] = sign[0];
        return sign;
    }

private:
    double wrap(double s) const {
        const double l = params.l;
        s = std::fmod(s, l);
        if (s < 0.0) s += l;
        return s;
    }
    int next_nonempty(int k) const {
        for (int j = k + 1; j < 6; ++j)
            if (segments[j].length > 0.0) return j;
        return 0;
    }
};

namespace detail {

inline HelicalSegment make_wrap(int rod_index, const RodSpec &rod, const Vec3 &start, const Vec3 &t_in, const Vec3 &climb) {
    HelicalSegment h;
    h.rod = rod_index;
    h.radius = rod.radius;
    h.axis = rod.axis_dir;
    h.start = start;
    h.climb = climb;
    h.side = ((t_in - kCos60 * rod.axis_dir) / kSin60).normalized();
    h.entry_angle = climb.z() > 0.0 ? kPi : 0.0;
    h.wrap = kPi;
    h.handedness = (-climb).cross(h.side).dot(h.axis) > 0.0 ? 1 : -1;
    return h;
}

} // namespace detail

inline PiecewiseBand assemble(const BandParams &params) {
    if (params.d == 0.0) throw Error(ErrorCode::DegenerateDiameter, "d = 0: the band must wrap the rods");
    const ValidationReport report = validate(params);
    if (report.violates(Constraint::Length)) throw Error(ErrorCode::NonPositive, "length l must be positive");
    if (report.violates(Constraint::Diameter)) {
        if (!(params.d > 0.0)) throw Error(ErrorCode::NonPositive, "diameter d must be positive");
        throw Error(ErrorCode::InfeasibleDiameter, report.violations.front().message);
    }
    if (report.violates(Constraint::Width)) {
        for (const auto &v : report.violations)
            if (v.constraint == Constraint::Width) throw Error(ErrorCode::InfeasibleWidth, v.message);
    }
    if (report.violates(Constraint::SampleCount)) throw Error(ErrorCode::BadSampleCount, "n must be >= 12 and divisible by 6");

    PiecewiseBand band;
    band.params = params;
    band.params.d = detail::checked_diameter(params.l, params.d);
    const double l = params.l, d = band.params.d;
    band.lengths = segment_lengths(l, d);
    const SegmentLengths &len = band.lengths;
    const double L = len.side;

    const Vec3 P(0, 0, 0), Q(L, 0, 0), R(0.5 * L, 0.5 * kSqrt3 * L, 0);
    band.corners = {P, Q, R};
    const Vec3 u_qp = (P - Q) / L, u_pr = (R - P) / L, u_rq = (Q - R) / L;
    const Vec3 up = Vec3::UnitZ();

    // Rod at a corner entered along t_in and left along t_out; the axis is the
    // external bisector t_in + t_out (unit length for a 120 degree turn).
    auto make_rod = [&](const Vec3 &corner, const Vec3 &t_in, const Vec3 &t_out, double radius, double entry_level,
                        double climb_sign, double arc) {
        RodSpec rod;
        rod.radius = radius;
        rod.axis_dir = (t_in + t_out).normalized();
        const Vec3 entry = corner - 0.5 * arc * t_in + entry_level * up;
        rod.axis_point = entry + climb_sign * radius * up;
        rod.height_interval = {rod.axis_point.z() - radius, rod.axis_point.z() + radius};
        return std::pair{rod, entry};
    };
    const auto [rod0, a_pt] = make_rod(P, u_qp, u_pr, d, 0.0, +1.0, len.ab);
    const auto [rod1, c_pt] = make_rod(R, u_pr, u_rq, 0.5 * d, 2.0 * d, -1.0, len.cd);
    const auto [rod2, e_pt] = make_rod(Q, u_rq, u_qp, 0.5 * d, d, -1.0, len.ef);
    band.rods = {rod0, rod1, rod2};

    const std::array<double, 6> arcs = len.arcs();
    double s = 0.0;
    for (int k = 0; k < 6; ++k) {
        band.junctions[k] = s;
        band.segments[k].from = kJunctionNames[k];
        band.segments[k].to = kJunctionNames[(k + 1) % 6];
        band.segments[k].arc_start = s;
        band.segments[k].length = arcs[k];
        s += arcs[k];
    }

    // Chain the pieces from A; each piece starts where the previous one ended.
    Vec3 cursor = a_pt;
    auto place_wrap = [&](int k, int rod_index, const Vec3 &t_in, double climb_sign) {
        band.segments[k].shape = detail::make_wrap(rod_index, band.rods[rod_index], cursor, t_in, climb_sign * up);
        cursor = band.segment_end(k).position;
    };
    auto place_flat = [&](int k, const Vec3 &dir) {
        PlanarSegment p;
        p.level = cursor.z();
        p.start = cursor;
        p.end = cursor + arcs[k] * dir;
        band.segments[k].shape = p;
        cursor = p.end;
    };
    place_wrap(0, 0, u_qp, +1.0);
    place_flat(1, u_pr);
    place_wrap(2, 1, u_pr, -1.0);
    place_flat(3, u_rq);
    place_wrap(4, 2, u_rq, -1.0);
    place_flat(5, u_qp);
    band.end_position = cursor;
    band.end_tangent = band.segments[5].length > 0.0 ? band.segment_end(5).tangent : band.segment_end(4).tangent;
    (void)c_pt;
    (void)e_pt;
    return band;
}

// Sample counts per piece, proportional to arc length (largest remainder),
// summing to n; every piece of positive length gets at least one sample.
inline std::array<int, 6> allocate_samples(const SegmentLengths &len, int n) {
    const auto arcs = len.arcs();
    const double total = len.total();
    std::array<int, 6> count{};
    std::array<double, 6> rem{};
    int used = 0;
    for (int k = 0; k < 6; ++k) {
        if (arcs[k] <= 0.0) continue;
        const double exact = n * arcs[k] / total;
        count[k] = std::max(1, int(std::floor(exact)));
        rem[k] = exact - std::floor(exact);
        used += count[k];
    }
    while (used < n) {
        int best = -1;
        for (int k = 0; k < 6; ++k)
            if (arcs[k] > 0.0 && (best < 0 || rem[k] > rem[best])) best = k;
        ++count[best];
        rem[best] -= 1.0;
        ++used;
    }
    while (used > n) {
        int best = -1;
        for (int k = 0; k < 6; ++k)
            if (count[k] > 1 && (best < 0 || rem[k] < rem[best])) best = k;
        --count[best];
        rem[best] += 1.0;
        --used;
    }
    return count;
}

// Discretizes the midline piece by piece: every junction is a sample, samples
// are evenly spaced inside each piece, K and W come from the turning-angle and
// binormal-dihedral estimators applied to each piece separately. A junction
// sample carries the one-sided (K, W) direction of the curved piece it
// touches, scaled so that density * ds equals the two half cells
// (the curvature jumps there).
inline FramedCurve sample_midline(const PiecewiseBand &band, int n) {
    if (n < 12 || n % 6 != 0) throw Error(ErrorCode::BadSampleCount, "n must be >= 12 and divisible by 6");
    const std::array<int, 6> count = allocate_samples(band.lengths, n);

    struct PieceSamples {
        std::vector<Vec3> pts; // including both end junctions
        std::vector<double> K, W;
        double K_first = 0, W_first = 0, K_last = 0, W_last = 0; // one-sided end values
        bool curved = false;
    };
    std::array<PieceSamples, 6> pieces;
    for (int k = 0; k < 6; ++k) {
        if (count[k] == 0) continue;
        const Segment &seg = band.segments[k];
        PieceSamples &ps = pieces[k];
        const int m = count[k];
        ps.pts.resize(m + 1);
        for (int j = 0; j <= m; ++j) ps.pts[j] = detail::evaluate_segment(seg, seg.length * double(j) / m).position;
        ps.K.assign(m + 1, 0.0);
        ps.W.assign(m + 1, 0.0);
        ps.curved = seg.helical();
        if (!ps.curved || m < 2) continue;
        const PolylineFrames f = polyline_frames(ps.pts, false);
        for (int j = 1; j < m; ++j) detail::vertex_curvature_torsion(f, j, ps.K[j], ps.W[j]);
        ps.K_first = ps.K[1];
        ps.W_first = ps.W[1];
        ps.K_last = ps.K[m - 1];
        ps.W_last = ps.W[m - 1];
    }

    FramedCurve curve;
    curve.closed = true;
    for (int k = 0; k < 6; ++k) {
        const Segment &seg = band.segments[k];
        for (int j = 0; j < count[k]; ++j) {
            const double sigma = seg.length * double(j) / count[k];
            const MidlinePoint mp = detail::evaluate_segment(seg, sigma);
            CurveSample smp;
            smp.s = seg.arc_start + sigma;
            smp.position = pieces[k].pts[j];
            smp.tangent = mp.tangent;
            smp.normal = mp.normal;
            smp.K = pieces[k].K[j];
            smp.W = pieces[k].W[j];
            smp.segment = k;
            curve.samples.push_back(smp);
        }
    }
    const std::size_t ns = curve.samples.size();
    std::vector<double> edge(ns);
    for (std::size_t i = 0; i < ns; ++i)
        edge[i] = (curve.samples[(i + 1) % ns].position - curve.samples[i].position).norm();
    CompensatedSum total;
    for (std::size_t i = 0; i < ns; ++i) {
        curve.samples[i].ds = 0.5 * (edge[(i + ns - 1) % ns] + edge[i]);
        total.add(edge[i]);
    }
    curve.total_length = total.value();

    // Junction samples.
    auto density = [](double K, double W) { return K > 0.0 ? std::pow(K * K + W * W, 2) / (K * K) : 0.0; };
    std::size_t idx = 0;
    for (int k = 0; k < 6; ++k) {
        if (count[k] == 0) continue;
        int prev = (k + 5) % 6;
        while (count[prev] == 0) prev = (prev + 5) % 6;
        CurveSample &smp = curve.samples[idx];
        const double h_in = edge[(idx + ns - 1) % ns], h_out = edge[idx];
        const PieceSamples &in = pieces[prev], &out = pieces[k];
        const double f_in = in.curved ? density(in.K_last, in.W_last) : 0.0;
        const double f_out = out.curved ? density(out.K_first, out.W_first) : 0.0;
        double K = 0, W = 0;
        Vec3 normal = Vec3::Zero();
        if (out.curved && out.K_first > 0.0) {
            K = out.K_first;
            W = out.W_first;
            normal = band.segment_start(k).normal;
        } else if (in.curved && in.K_last > 0.0) {
            K = in.K_last;
            W = in.W_last;
            normal = band.segment_end(prev).normal;
        }
        const double f_base = density(K, W);
        if (f_base > 0.0) {
            const double target = (0.5 * h_in * f_in + 0.5 * h_out * f_out) / smp.ds;
            const double c = std::sqrt(target / f_base);
            K *= c;
            W *= c;
        }
        smp.K = K;
        smp.W = W;
        smp.normal = normal;
        idx += count[k];
    }

    curve.closure_position = band.end_position;
    curve.closure_tangent = band.end_tangent;
    return curve;
}

// Start polygon for the descent: the d = d_max band sampled with every
// junction on a vertex.
inline std::vector<Vec3> narrow_limit_polygon(double l, int n) {
    const PiecewiseBand band = assemble(BandParams{l, max_diameter(l), 0.0, n});
    return sample_midline(band, n).positions();
}

// Positions at uniform arc spacing l/n starting from A.
inline std::vector<Vec3> midline_points(const PiecewiseBand &band, int n) {
    if (n < 6) throw Error(ErrorCode::BadSampleCount, "need at least 6 points");
    std::vector<Vec3> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = band.evaluate(band.params.l * double(i) / n).position;
    return pts;
}

// n points on the midline, starting at A, with all n chords (including the
// closing one) of equal length. Straight pieces stay exactly straight.
inline std::vector<Vec3> equal_chord_points(const PiecewiseBand &band, int n) {
    if (n < 6) throw Error(ErrorCode::BadSampleCount, "need at least 6 points");
    const double l = band.params.l;
    // Next arc parameter whose point lies at distance h from the point at s.
    auto next = [&](double s, double h) {
        const Vec3 p = band.evaluate(s).position;
        double lo = s, hi = std::min(l, s + 1.5 * h);
        if ((band.evaluate(hi).position - p).norm() < h) return hi;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * l; ++it) {
            const double mid = 0.5 * (lo + hi);
            ((band.evaluate(mid).position - p).norm() < h ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    // Mismatch between the last chord and h for a trial h.
    auto walk = [&](double h, std::vector<double> *params) {
        double s = 0.0;
        if (params) params->assign(1, 0.0);
        for (int i = 1; i < n; ++i) {
            s = next(s, h);
            if (params) params->push_back(s);
        }
        const Vec3 last = s >= l ? band.evaluate(0.0).position : band.evaluate(s).position;
        return (band.evaluate(0.0).position - last).norm() - h;
    };
    double lo = 0.9 * l / n, hi = l / n;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * l; ++it) {
        const double mid = 0.5 * (lo + hi);
        (walk(mid, nullptr) > 0.0 ? lo : hi) = mid;
    }
    std::vector<double> params;
    walk(0.5 * (lo + hi), &params);
    std::vector<Vec3> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = band.evaluate(params[i]).position;
    return pts;
}

struct GeneratorLine {
    double foot = 0.0;      // arc position on the midline
    double angle_deg = 60;  // acute angle to the midline
    int lean = 1;           // +1: leans forward on the side the layout draws as +y
    int segment = 0;
};

struct FlatLayout {
    double length = 0.0;
    double width = 0.0; // 2b
    std::array<double, 6> junction_marks{};
    std::array<double, 6> segment_lengths{};
    std::vector<GeneratorLine> generator_lines;
};

// Unrolls the band onto a rectangle l x 2b. Generators are marked at the
// sample positions of every helical span, at 60 degrees to the midline.
inline FlatLayout flatten(const PiecewiseBand &band) {
    FlatLayout layout;
    layout.length = band.params.l;
    layout.width = 2.0 * band.params.b;
    layout.junction_marks = band.junctions;
    layout.segment_lengths = band.lengths.arcs();
    const std::array<int, 7> sign = band.orientation_signs();
    const std::array<int, 6> count = allocate_samples(band.lengths, band.params.n);
    for (int k = 0; k < 6; ++k) {
        const Segment &seg = band.segments[k];
        if (!seg.helical() || seg.length <= 0.0) continue;
        const auto &h = std::get<HelicalSegment>(seg.shape);
        const int m = std::max(1, count[k]);
        for (int j = 0; j <= m; ++j) {
            const double sigma = seg.length * double(j) / m;
            const MidlinePoint mp = detail::evaluate_segment(seg, sigma);
            // Side direction of the developed strip: surface normal x tangent.
            const Vec3 normal = sign[k] * detail::surface_normal(seg, sigma);
            const Vec3 left = normal.cross(mp.tangent);
            Vec3 gen = h.axis;
            if (gen.dot(left) < 0.0) gen = -gen;
            GeneratorLine g;
            g.foot = seg.arc_start + sigma;
            g.angle_deg = 60.0;
            g.lean = gen.dot(mp.tangent) >= 0.0 ? 1 : -1;
            g.segment = k;
            layout.generator_lines.push_back(g);
        }
    }
    return layout;
}

} // namespace devband
