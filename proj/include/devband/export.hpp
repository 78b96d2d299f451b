#pragma once

// Text exporters: OBJ quad meshes, SVG flat layouts (mm units), curve CSV.
// Numbers are printed with 17 significant digits so output is exact and
// byte-identical for identical input.

#include "devband/band_construction.hpp"
#include "devband/error.hpp"
#include "devband/framed_curve.hpp"
#include "devband/strip_reconstruction.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace devband {

inline std::string fmt17(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline void write_text(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// `v x y z` lines, then 1-based `f a b c d` quads. A zero-width mesh has
// vertices only, plus an `l` polyline through them.
inline std::string obj_string(const QuadMesh &mesh) {
    std::ostringstream os;
    for (const Vec3 &v : mesh.vertices) os << "v " << fmt17(v.x()) << ' ' << fmt17(v.y()) << ' ' << fmt17(v.z()) << '\n';
    for (const auto &q : mesh.quads) os << "f " << q[0] + 1 << ' ' << q[1] + 1 << ' ' << q[2] + 1 << ' ' << q[3] + 1 << '\n';
    if (mesh.quads.empty() && mesh.vertices.size() > 1) {
        os << 'l';
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) os << ' ' << i + 1;
        os << " 1\n";
    }
    return os.str();
}

inline void export_obj(const QuadMesh &mesh, const std::filesystem::path &path) { write_text(path, obj_string(mesh)); }

// Reads back vertices and quads written by export_obj.
inline QuadMesh import_obj(const std::filesystem::path &path) {
    std::istringstream in(read_text(path));
    QuadMesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw Error(ErrorCode::IoError, "bad vertex line", lineno);
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::array<int, 4> q{};
            for (int &k : q) {
                if (!(ls >> k)) throw Error(ErrorCode::IoError, "bad face line", lineno);
                --k;
            }
            mesh.quads.push_back(q);
        }
    }
    return mesh;
}

inline std::string csv_string(const FramedCurve &curve) {
    std::ostringstream os;
    os << "s,x,y,z,K,W\n";
    for (const auto &smp : curve.samples)
        os << fmt17(smp.s) << ',' << fmt17(smp.position.x()) << ',' << fmt17(smp.position.y()) << ','
           << fmt17(smp.position.z()) << ',' << fmt17(smp.K) << ',' << fmt17(smp.W) << '\n';
    return os.str();
}

inline void export_csv(const FramedCurve &curve, const std::filesystem::path &path) { write_text(path, csv_string(curve)); }

// Flat development as in the unrolled strip: the l x 2b rectangle, a tick
// and label at each junction, and the 60 degree generators of the wound
// pieces. Drawing scale: 200 mm per band length.
inline std::string svg_string(const FlatLayout &layout) {
    const double mm = 200.0 / layout.length;
    const double margin = 10.0;
    // A zero-width layout is still drawn as a thin band so ticks stay visible.
    const double half = layout.width > 0.0 ? 0.5 * layout.width * mm : 2.0;
    const double w = layout.length * mm + 2 * margin;
    const double h = 2 * half + 2 * margin + 8.0;
    const double y0 = margin + half; // midline
    auto X = [&](double s) { return margin + s * mm; };
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt17(w) << "mm\" height=\"" << fmt17(h)
       << "mm\" viewBox=\"0 0 " << fmt17(w) << ' ' << fmt17(h) << "\">\n";
    os << "<rect x=\"" << fmt17(margin) << "\" y=\"" << fmt17(margin) << "\" width=\"" << fmt17(layout.length * mm)
       << "\" height=\"" << fmt17(2 * half) << "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.3\"/>\n";
    os << "<line x1=\"" << fmt17(X(0)) << "\" y1=\"" << fmt17(y0) << "\" x2=\"" << fmt17(X(layout.length)) << "\" y2=\""
       << fmt17(y0) << "\" stroke=\"gray\" stroke-width=\"0.15\" stroke-dasharray=\"1,1\"/>\n";
    const double slope = 1.0 / std::tan(kPi / 3.0); // horizontal run per unit rise at 60 degrees
    for (const auto &g : layout.generator_lines) {
        const double dx = g.lean * half * slope;
        os << "<line class=\"generator\" x1=\"" << fmt17(X(g.foot) - dx) << "\" y1=\"" << fmt17(y0 + half) << "\" x2=\""
           << fmt17(X(g.foot) + dx) << "\" y2=\"" << fmt17(y0 - half) << "\" stroke=\"steelblue\" stroke-width=\"0.1\"/>\n";
    }
    for (int k = 0; k < 6; ++k) {
        const double x = X(layout.junction_marks[k]);
        os << "<line class=\"tick\" x1=\"" << fmt17(x) << "\" y1=\"" << fmt17(margin - 3) << "\" x2=\"" << fmt17(x)
           << "\" y2=\"" << fmt17(margin + 2 * half + 3) << "\" stroke=\"black\" stroke-width=\"0.3\"/>\n";
        os << "<text x=\"" << fmt17(x) << "\" y=\"" << fmt17(margin + 2 * half + 8) << "\" font-size=\"4\" text-anchor=\"middle\">"
           << kJunctionNames[k] << "</text>\n";
    }
    // Closing tick back at A.
    const double xe = X(layout.length);
    os << "<line class=\"tick\" x1=\"" << fmt17(xe) << "\" y1=\"" << fmt17(margin - 3) << "\" x2=\"" << fmt17(xe) << "\" y2=\""
       << fmt17(margin + 2 * half + 3) << "\" stroke=\"black\" stroke-width=\"0.3\"/>\n";
    os << "<text x=\"" << fmt17(xe) << "\" y=\"" << fmt17(margin + 2 * half + 8) << "\" font-size=\"4\" text-anchor=\"middle\">A</text>\n";
    os << "</svg>\n";
    return os.str();
}

inline void export_svg(const FlatLayout &layout, const std::filesystem::path &path) { write_text(path, svg_string(layout)); }

} // namespace devband
