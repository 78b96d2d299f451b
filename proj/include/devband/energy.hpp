#pragma once

// Bending energies: the narrow-band line functional (K^2+W^2)^2/K^2 on framed
// curves, the surface integral of squared curvature on the piecewise band, and
// the 15 pi^2 / l reference value.

#include "devband/band_construction.hpp"
#include "devband/error.hpp"
#include "devband/framed_curve.hpp"
#include "devband/geometry.hpp"

#include <json.hpp>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace devband {

enum class Convention { Principal, Mean, Line };

inline std::string to_string(Convention c) {
    switch (c) {
        case Convention::Principal: return "principal";
        case Convention::Mean: return "mean";
        case Convention::Line: return "line";
    }
    return "unknown";
}

inline Convention parse_convention(const std::string &s) {
    if (s == "principal") return Convention::Principal;
    if (s == "mean") return Convention::Mean;
    if (s == "line") return Convention::Line;
    throw Error(ErrorCode::Precondition, "unknown convention '" + s + "'");
}

struct EnergyReport {
    double value = 0.0;
    Convention convention = Convention::Line;
    double bound = 0.0; // 15 pi^2 / l
    double eps = 0.0;
    std::vector<std::pair<std::string, double>> breakdown;
};

inline void to_json(nlohmann::json &j, const EnergyReport &r) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto &[name, v] : r.breakdown) parts.push_back({{"name", name}, {"value", v}});
    j = {{"value", r.value}, {"convention", to_string(r.convention)}, {"bound", r.bound}, {"eps", r.eps},
         {"breakdown", parts}};
}

inline double narrow_limit_bound(double l) {
    if (!(l > 0.0)) throw Error(ErrorCode::NonPositive, "length l must be positive");
    return 15.0 * kPi * kPi / l;
}

inline double sadowsky_density(double K, double W, double eps) {
    if (K < 0.0 || eps < 0.0) throw Error(ErrorCode::Precondition, "K and eps must be non-negative");
    const double num = K * K + W * W;
    if (num == 0.0) return 0.0;
    const double den = K * K + eps * eps;
    if (den == 0.0) throw Error(ErrorCode::SingularDensity, "K = 0 with W != 0 and no regularization");
    return num * num / den;
}

// Midpoint quadrature sum density * ds. Samples tagged with a piece index are
// grouped per piece in the breakdown.
inline EnergyReport sadowsky_energy(const FramedCurve &curve, double eps = 0.0) {
    if (eps < 0.0) throw Error(ErrorCode::Precondition, "eps must be non-negative");
    EnergyReport r;
    r.convention = Convention::Line;
    r.eps = eps;
    r.bound = curve.total_length > 0.0 ? narrow_limit_bound(curve.total_length) : 0.0;
    std::vector<CompensatedSum> part;
    std::vector<std::string> names;
    CompensatedSum total;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const CurveSample &smp = curve.samples[i];
        double f = 0.0;
        try {
            f = sadowsky_density(smp.K, smp.W, eps);
        } catch (const Error &e) {
            throw Error(e.code(), "density undefined at sample " + std::to_string(i), i);
        }
        const double term = f * smp.ds;
        total.add(term);
        const std::string name = smp.segment >= 0 && smp.segment < 6 ? kSegmentNames[smp.segment] : "curve";
        std::size_t k = 0;
        while (k < names.size() && names[k] != name) ++k;
        if (k == names.size()) {
            names.push_back(name);
            part.emplace_back();
        }
        part[k].add(term);
    }
    r.value = total.value();
    for (std::size_t k = 0; k < names.size(); ++k) r.breakdown.emplace_back(names[k], part[k].value());
    return r;
}

// Closed form on the planes-and-cylinders band: each cylindrical piece gives
// kappa^2 * arc * 2b, kappa = 1/r (principal) or 1/(2r) (mean).
inline EnergyReport piecewise_surface_energy(const PiecewiseBand &band, Convention convention = Convention::Principal) {
    if (convention == Convention::Line) throw Error(ErrorCode::Precondition, "surface energy needs principal or mean");
    if (!(band.params.b > 0.0)) throw Error(ErrorCode::ZeroWidth, "b = 0: use the line energy per unit width");
    EnergyReport r;
    r.convention = convention;
    r.bound = narrow_limit_bound(band.params.l);
    const double width = 2.0 * band.params.b;
    CompensatedSum total;
    for (int k = 0; k < 6; ++k) {
        const Segment &seg = band.segments[k];
        double v = 0.0;
        if (const auto *h = std::get_if<HelicalSegment>(&seg.shape)) {
            const double kappa = convention == Convention::Principal ? 1.0 / h->radius : 0.5 / h->radius;
            v = kappa * kappa * seg.length * width;
        }
        r.breakdown.emplace_back(kSegmentNames[k], v);
        total.add(v);
    }
    r.value = total.value();
    return r;
}

// Exact line energy of the band midline: each 60-degree half-wrap has density
// 1/r^2 over arc 2 pi r / sqrt(3), so the sum is (10 pi / sqrt(3)) / d.
inline double piecewise_line_energy(const PiecewiseBand &band) {
    CompensatedSum total;
    for (const Segment &seg : band.segments)
        if (const auto *h = std::get_if<HelicalSegment>(&seg.shape)) total.add(seg.length / (h->radius * h->radius));
    return total.value();
}

} // namespace devband
