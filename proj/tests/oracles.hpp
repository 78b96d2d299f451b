#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's own estimators; values are recomputed from first principles.

#include "devband/geometry.hpp"
#include "devband/strip_reconstruction.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace oracle {

using devband::Vec3;
constexpr double pi = std::numbers::pi;

// Arc lengths straight from the projection rule: a wrap of diameter D climbs
// while its projection covers half the circumference, AB cos 30 = pi D / 2.
struct Lengths {
    double ab, bc, cd, de, ef, fa, ap_bp, cp_dp, side;
};

inline Lengths lengths(double l, double d) {
    Lengths o{};
    o.side = l / 3.0;
    o.ab = (pi * d) / std::cos(pi / 6.0);
    o.cd = o.ef = (pi * d / 2.0) / std::cos(pi / 6.0);
    o.ap_bp = o.ab * std::cos(pi / 3.0);
    o.cp_dp = o.cd * std::cos(pi / 3.0);
    // DE is then whatever is left of l.
    o.bc = l / 3.0 - std::sqrt(3.0) * pi * d / 2.0;
    o.fa = o.bc;
    o.de = l - (o.ab + o.bc + o.cd + o.ef + o.fa);
    return o;
}

inline double d_max(double l) { return 2.0 * l / (3.0 * std::sqrt(3.0) * pi); }

// Both closed forms of the width bound.
inline double b_max_direct(double l, double d) { return l / (2.0 * std::sqrt(3.0)) - 3.0 * pi * d / 4.0; }
inline double b_max_generators(double l, double d) { return lengths(l, d).bc / 2.0 * std::tan(pi / 3.0); }

// Curvature and torsion of a parametric curve from Frenet formulas with
// central differences of spacing h.
inline std::pair<double, double> frenet(const std::function<Vec3(double)> &c, double t, double h = 1e-3) {
    const Vec3 d1 = (c(t + h) - c(t - h)) / (2 * h);
    const Vec3 d2 = (c(t + h) - 2 * c(t) + c(t - h)) / (h * h);
    const Vec3 d3 = (c(t + 2 * h) - 2 * c(t + h) + 2 * c(t - h) - c(t - 2 * h)) / (2 * h * h * h);
    const Vec3 x = d1.cross(d2);
    return {x.norm() / std::pow(d1.norm(), 3), x.dot(d3) / x.squaredNorm()};
}

// 60-degree helix about the z axis: generators are vertical, the tangent
// makes 60 degrees with them.
inline Vec3 helix(double r, int hand, double phi) {
    return Vec3(r * std::cos(phi), hand * r * std::sin(phi), r * phi / std::tan(pi / 3.0));
}

inline std::vector<Vec3> regular_polygon(int n, double R, double z = 0.0) {
    std::vector<Vec3> p;
    for (int i = 0; i < n; ++i) {
        const double t = 2 * pi * i / n;
        p.emplace_back(R * std::cos(t), R * std::sin(t), z);
    }
    return p;
}

// Rigid motion used for invariance checks.
inline Eigen::Matrix3d test_rotation() {
    return (Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()) * Eigen::AngleAxisd(-1.1, Vec3::UnitX())).toRotationMatrix();
}

// Structured quad grid over a parametric surface, rows across.
inline devband::QuadMesh grid_mesh(int cols, int rows, const std::function<Vec3(double, double)> &f) {
    devband::QuadMesh m;
    m.rows = rows;
    m.columns = cols;
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) m.vertices.push_back(f(double(c) / (cols - 1), double(r) / (rows - 1)));
    for (int c = 0; c + 1 < cols; ++c)
        for (int r = 0; r + 1 < rows; ++r)
            m.quads.push_back({c * rows + r, (c + 1) * rows + r, (c + 1) * rows + r + 1, c * rows + r + 1});
    return m;
}

// Minimal JSON Schema subset: type, required, properties, items, enum,
// minimum, additionalProperties=false. Returns the first error path or "".
inline std::string validate_schema(const nlohmann::json &v, const nlohmann::json &s, const std::string &path = "$") {
    if (s.contains("type")) {
        std::vector<std::string> types;
        if (s["type"].is_array())
            for (const auto &t : s["type"]) types.push_back(t);
        else types.push_back(s["type"]);
        bool ok = false;
        for (const auto &t : types) {
            if (t == "object" && v.is_object()) ok = true;
            if (t == "array" && v.is_array()) ok = true;
            if (t == "string" && v.is_string()) ok = true;
            if (t == "number" && v.is_number()) ok = true;
            if (t == "integer" && v.is_number_integer()) ok = true;
            if (t == "boolean" && v.is_boolean()) ok = true;
            if (t == "null" && v.is_null()) ok = true;
        }
        if (!ok) return path + ": wrong type";
    }
    if (s.contains("enum")) {
        bool found = false;
        for (const auto &e : s["enum"]) found = found || e == v;
        if (!found) return path + ": not in enum";
    }
    if (s.contains("minimum") && v.is_number() && v.get<double>() < s["minimum"].get<double>())
        return path + ": below minimum";
    if (v.is_object()) {
        if (s.contains("required"))
            for (const auto &k : s["required"])
                if (!v.contains(k.get<std::string>())) return path + ": missing " + k.get<std::string>();
        if (s.contains("properties"))
            for (auto it = s["properties"].begin(); it != s["properties"].end(); ++it)
                if (v.contains(it.key())) {
                    const std::string e = validate_schema(v[it.key()], it.value(), path + "." + it.key());
                    if (!e.empty()) return e;
                }
        if (s.contains("additionalProperties") && s["additionalProperties"] == false)
            for (auto it = v.begin(); it != v.end(); ++it)
                if (!s["properties"].contains(it.key())) return path + ": unexpected " + it.key();
    }
    if (v.is_array() && s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string e = validate_schema(v[i], s["items"], path + "[" + std::to_string(i) + "]");
            if (!e.empty()) return e;
        }
    return "";
}

} // namespace oracle
