// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include "cli_app.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

using namespace devband;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string &what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string &s) {
        if (pass) detail += (detail.empty() ? "" : "; ") + s;
    }
};

std::string num(double x, int prec = 7) {
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

int failures = 0;

void criterion(int id, const std::string &name, const std::function<void(Outcome &)> &body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        body(o);
    } catch (const std::exception &e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s  %d  %-28s  %8.3f s  %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
}

std::string slurp(const fs::path &p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "devband");
    std::vector<const char *> argv;
    for (const auto &a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run_cli(int(argv.size()), argv.data(), out, err);
}

double helix_order(bool torsion) {
    auto err = [&](int per) {
        const int count = 2 * per + 1;
        std::vector<Vec3> p;
        for (int j = 0; j < count; ++j) p.push_back(oracle::helix(1.0, 1, 2 * oracle::pi * j / (count - 1)));
        const FramedCurve c = discrete_geometry(p, false);
        double e = 0;
        for (int j = 2; j + 2 < count; ++j)
            e = std::max(e, torsion ? std::abs(c.samples[j].W - std::sqrt(3.0) / 4) : std::abs(c.samples[j].K - 0.75));
        return e;
    };
    return std::log2(err(128) / err(256));
}

} // namespace

int main() {
    criterion(1, "segment identities", [](Outcome &o) {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        double worst = 0;
        for (int k = 0; k < 50; ++k) {
            const double l = 0.5 + 9.5 * U(rng);
            const double d = oracle::d_max(l) * (0.01 + 0.99 * U(rng));
            const SegmentLengths s = segment_lengths(l, d);
            const oracle::Lengths w = oracle::lengths(l, d);
            const double pid = oracle::pi * d;
            double e = std::abs(s.total() - l);
            for (auto [a, b] : {std::pair{s.ab, w.ab}, {s.bc, w.bc}, {s.cd, w.cd}, {s.de, w.de}, {s.ef, w.ef}, {s.fa, w.fa},
                                {s.ap_bp, s.ab * 0.5}, {s.cp_dp, s.cd * 0.5}, {s.ab * std::cos(oracle::pi / 6), pid},
                                {s.cd * std::cos(oracle::pi / 6), pid / 2}})
                e = std::max(e, std::abs(a - b));
            worst = std::max(worst, e / l);
        }
        o.require(worst <= 1e-12, "worst relative error " + num(worst, 3));
        o.note("50 draws, worst " + num(worst, 3) + " l");
    });

    criterion(2, "feasibility gates", [](Outcome &o) {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        double worst = 0;
        for (int k = 0; k < 50; ++k) {
            const double l = 0.5 + 9.5 * U(rng);
            const double dm = oracle::d_max(l);
            const double d_bad = dm * (1.01 + U(rng));
            const ValidationReport thick = validate({l, d_bad, 0.0, 120});
            o.require(thick.violates(Constraint::Diameter), "thick band accepted");
            const double d = dm * (0.1 + 0.8 * U(rng));
            const double bm = oracle::b_max_direct(l, d);
            worst = std::max(worst, std::abs(bm - oracle::b_max_generators(l, d)));
            const ValidationReport wide = validate({l, d, bm * (1.01 + U(rng)), 120});
            o.require(wide.violates(Constraint::Width), "wide band accepted");
            const double b = bm * U(rng);
            const ValidationReport ok = validate({l, d, b, 120});
            o.require(ok.feasible(), "feasible band rejected");
            if (ok.diameter_margin && ok.width_margin) {
                worst = std::max(worst, std::abs(*ok.diameter_margin - (dm - d)));
                worst = std::max(worst, std::abs(*ok.width_margin - (bm - b)));
            } else o.require(false, "margins missing");
            worst = std::max(worst, std::abs(max_width(l, d) - bm));
        }
        const double zero = max_width(3.0, max_diameter(3.0));
        o.require(std::abs(zero) <= 1e-12, "b_max(d_max) = " + num(zero, 3));
        const ValidationReport v = validate({3.0, 0.3, 0.1, 120});
        o.require(std::abs(*v.diameter_margin - 0.0675526) < 1e-7 && std::abs(*v.width_margin - 0.0591671) < 1e-7,
                  "worked margins");
        o.require(worst <= 1e-12, "margin mismatch " + num(worst, 3));
        o.note("margins within " + num(worst, 3) + ", b_max(d_max) = " + num(zero, 3));
    });

    criterion(3, "narrow-limit line energy", [](Outcome &o) {
        const PiecewiseBand band = assemble({3.0, max_diameter(3.0), 0.0, 1200});
        const double bound = narrow_limit_bound(3.0);
        const double e600 = sadowsky_energy(sample_midline(band, 600)).value;
        const double e1200 = sadowsky_energy(sample_midline(band, 1200)).value;
        const double e2400 = sadowsky_energy(sample_midline(band, 2400)).value;
        const double rel = std::abs(e1200 - bound) / bound;
        const double r1 = std::abs(e600 - bound) / std::abs(e1200 - bound);
        const double r2 = std::abs(e1200 - bound) / std::abs(e2400 - bound);
        o.require(std::abs(bound - 49.348022) < 1e-6, "bound value");
        o.require(rel < 0.01, "relative error " + num(rel, 3));
        o.require(r1 >= 3.5 && r2 >= 3.5, "refinement ratios " + num(r1, 3) + ", " + num(r2, 3));
        const double dn = max_diameter(3.0) * (1 - 1e-6), bn = max_width(3.0, dn) / 2;
        const double per_mean = piecewise_surface_energy(assemble({3.0, dn, bn, 600}), Convention::Mean).value / (2 * bn);
        o.require(std::abs(4 * per_mean - bound) < 1e-4 * bound, "mean reading " + num(per_mean));
        o.note("E(1200) = " + num(e1200, 8) + " vs " + num(bound, 8) + ", ratios " + num(r1, 3) + " " + num(r2, 3) +
               "; mean-curvature reading " + num(per_mean, 6) + " = bound/4");
    });

    criterion(4, "surface/line consistency", [](Outcome &o) {
        const double l = 3.0, d = 0.3;
        const double line = piecewise_line_energy(assemble({l, d, 0.0, 600}));
        double worst = 0;
        for (double b : {0.01, 0.05, max_width(l, d) / 2}) {
            const double pw = piecewise_surface_energy(assemble({l, d, b, 600}), Convention::Principal).value / (2 * b);
            worst = std::max(worst, std::abs(pw - line) / line);
        }
        const PiecewiseBand band = assemble({l, d, 0.1, 1200});
        const double surf = piecewise_surface_energy(band, Convention::Principal).value;
        const double mesh = mesh_bending_energy(rectifying_strip(sample_midline(band, 1200), 0.1, 8).mesh);
        const double mrel = std::abs(mesh - surf) / surf;
        o.require(worst <= 1e-10, "per-width mismatch " + num(worst, 3));
        o.require(std::abs(surf - 12.0920) < 5e-5, "worked value " + num(surf, 8));
        o.require(mrel < 0.005, "mesh quadrature off by " + num(mrel, 3));
        o.note("per-width within " + num(worst, 3) + ", E = " + num(surf, 6) + ", mesh " + num(mesh, 6));
    });

    criterion(5, "developability", [](Outcome &o) {
        const PiecewiseBand band = assemble({3.0, 0.3, 0.1, 600});
        const double d = 0.3;
        const double e300 = gaussian_check(rectifying_strip(sample_midline(band, 300), 0.1, 8).mesh);
        const StripMesh sm = rectifying_strip(sample_midline(band, 600), 0.1, 8);
        const double e600 = gaussian_check(sm.mesh);
        const double order = std::log2(e300 / e600);
        o.require(e600 < 1e-3 / (d * d), "defect " + num(e600, 3));
        o.require(order >= 1.9, "order " + num(order, 3));
        // Flat development: layout marks are the arc lengths, the unrolled
        // mesh keeps its ruling and midline-row edge lengths.
        const FlatLayout flat = flatten(band);
        const auto arcs = band.lengths.arcs();
        double lay = std::abs(flat.length - 3.0);
        for (int k = 0; k < 6; ++k) {
            const double next = k == 5 ? flat.length : flat.junction_marks[k + 1];
            lay = std::max(lay, std::abs(next - flat.junction_marks[k] - arcs[k]));
        }
        const std::vector<Vec2> uv = unfold_strip(sm.mesh);
        const int per = sm.mesh.rows - 1;
        double iso = 0;
        for (int i = 0; i + 1 < sm.mesh.columns; ++i)
            for (int j = 0; j < per; ++j) {
                const auto &q = sm.mesh.quads[i * per + j];
                for (auto [a, b] : {std::pair{q[0], q[1]}, std::pair{q[3], q[2]}, std::pair{q[0], q[3]}}) {
                    const double l3 = (sm.mesh.vertices[a] - sm.mesh.vertices[b]).norm();
                    iso = std::max(iso, std::abs((uv[a] - uv[b]).norm() - l3) / l3);
                }
            }
        o.require(lay <= 1e-9, "layout marks off by " + num(lay, 3));
        o.require(iso <= 1e-9, "unrolled edges off by " + num(iso, 3));
        o.note("max defect " + num(e600, 3) + " (limit " + num(1e-3 / (d * d), 3) + "), order " + num(order, 3) +
               ", layout " + num(lay, 3) + ", unrolled edges " + num(iso, 3));
    });

    criterion(6, "one-sided class", [](Outcome &o) {
        const PiecewiseBand band = assemble({3.0, 0.3, 0.1, 600});
        const FramedCurve c = sample_midline(band, 600);
        const double h = closure_residuals(c).holonomy_angle;
        const StripMesh sm = rectifying_strip(c, 0.1, 8);
        const int rev = orientation_reversals(sm.strip);
        const int cols = orientation_flip_columns(sm.mesh);
        o.require(std::abs(h - oracle::pi) <= 0.05, "holonomy " + num(h));
        o.require(rev == 1 && cols == 1, "reversals " + std::to_string(rev) + ", flip columns " + std::to_string(cols));
        o.note("holonomy " + num(h) + ", orientation reverses once");
    });

    criterion(7, "helix oracles", [](Outcome &o) {
        const double pk = helix_order(false), pw = helix_order(true);
        double worst = 0;
        for (double r : {0.15, 0.3, 1.0, 2.5})
            for (int hand : {1, -1})
                for (const auto &s : analytic_helix(r, oracle::pi, hand).samples) {
                    const double want = 1.0 / (r * r);
                    worst = std::max(worst, std::abs(sadowsky_density(s.K, s.W, 0.0) - want) / want);
                }
        o.require(pk >= 1.9 && pw >= 1.9, "orders " + num(pk, 3) + ", " + num(pw, 3));
        o.require(worst <= 1e-10, "density off by " + num(worst, 3));
        o.note("orders K " + num(pk, 3) + " W " + num(pw, 3) + ", density within " + num(worst, 3));
    });

    criterion(8, "optimization", [](Outcome &o) {
        const double l = 3.0;
        const int n = 240;
        OptimizerConfig cfg;
        cfg.max_iters = 2000;
        const OptimizationResult r = minimize(narrow_limit_polygon(l, n), cfg);
        bool mono = true;
        for (const auto *trace : {&r.energy_trace, &r.polish_trace})
            for (std::size_t i = 1; i < trace->size(); ++i) mono = mono && (*trace)[i].energy <= (*trace)[i - 1].energy;
        const double bound = narrow_limit_bound(l);
        const double hol = r.final_residuals.holonomy_angle;
        o.require(mono, "trace increased");
        o.require(r.final_energy < bound, "final energy " + num(r.final_energy, 8));
        o.require(r.edge_spread < 1e-9, "edge spread " + num(r.edge_spread, 3));
        o.require(std::abs(hol - oracle::pi) <= 0.1, "holonomy " + num(hol));

        // Gradient at the final state: local stencil against full objective
        // differences; entries far below the largest are compared to 1e-3 of it.
        const FramedPolygon st(r.points, r.band_normals, r.eps, cfg.w_geodesic);
        const double h = 1e-6 * l / n;
        const Eigen::VectorXd g = st.local_gradient(h);
        const double floor = 1e-3 * g.lpNorm<Eigen::Infinity>();
        std::mt19937_64 rng(8);
        double worst = 0;
        for (int k = 0; k < 20; ++k) {
            const std::size_t c = rng() % std::size_t(g.size());
            const double f = st.full_difference(c, h);
            worst = std::max(worst, std::abs(g[c] - f) / std::max(std::abs(f), floor));
        }
        o.require(worst <= 1e-4, "gradient mismatch " + num(worst, 3));
        o.note("E " + num(r.initial_energy, 7) + " -> " + num(r.final_energy, 7) + " (" + to_string(r.status) + ", " +
               std::to_string(r.accepted_steps) + " steps), spread " + num(r.edge_spread, 2) + ", holonomy " + num(hol) +
               ", gradient " + num(worst, 2));
    });

    criterion(9, "determinism", [](Outcome &o) {
        const fs::path base = fs::temp_directory_path() / "devband_acceptance";
        fs::remove_all(base);
        for (const char *run : {"a", "b"}) {
            const fs::path dir = base / run;
            o.require(run_cli({"construct", "--out", (dir / "construct").string()}) == 0, "construct failed");
            o.require(run_cli({"optimize", "--n", "240", "--iters", "200", "--out", (dir / "optimize").string()}) == 0,
                      "optimize failed");
        }
        int compared = 0;
        for (const char *f : {"construct/band.obj", "construct/layout.svg", "construct/midline.csv", "construct/report.json",
                              "optimize/trace.csv", "optimize/final_curve.csv", "optimize/strip.obj", "optimize/report.json"}) {
            const std::string a = slurp(base / "a" / f), b = slurp(base / "b" / f);
            o.require(!a.empty() && a == b, std::string(f) + " differs");
            ++compared;
        }
        fs::remove_all(base);
        o.note(std::to_string(compared) + " files byte-identical");
    });

    std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
