#pragma once

// devband command line: construct, verify and optimize. Everything runs
// through run_cli() so the tests can drive it without a subprocess.

#include "devband/band_construction.hpp"
#include "devband/energy.hpp"
#include "devband/error.hpp"
#include "devband/export.hpp"
#include "devband/framed_curve.hpp"
#include "devband/optimizer.hpp"
#include "devband/strip_reconstruction.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace devband::cli {

enum ExitCode { kOk = 0, kCheckFailed = 1, kInfeasible = 2, kIo = 3, kLostTopology = 4 };

struct Options {
    double l = 3.0;
    double d = 0.3;
    double b = 0.1;
    int n = 600;
    int m = 8; // mesh rows across the width
    int iters = 2000;
    double eps = -1.0;
    std::string convention = "principal";
    std::string out = ".";
};

using json = nlohmann::json;

namespace detail {

inline json params_json(const std::string &command, const Options &o) {
    json p = {{"l", o.l}, {"n", o.n}, {"convention", o.convention}};
    if (command != "optimize") {
        p["d"] = o.d;
        p["b"] = o.b;
        p["m"] = o.m;
    } else {
        p["d"] = max_diameter(o.l);
        p["b"] = o.b;
        p["m"] = o.m;
        p["iters"] = o.iters;
        p["eps"] = o.eps;
    }
    return p;
}

inline json validation_json(const ValidationReport &v) {
    json viol = json::array();
    for (const auto &x : v.violations)
        viol.push_back({{"constraint", to_string(x.constraint)}, {"message", x.message}, {"excess", x.excess}});
    json j = {{"feasible", v.feasible()}, {"violations", viol}};
    j["diameter_margin"] = v.diameter_margin ? json(*v.diameter_margin) : json(nullptr);
    j["width_margin"] = v.width_margin ? json(*v.width_margin) : json(nullptr);
    return j;
}

inline json residuals_json(const ClosureResiduals &r) {
    return {{"position_gap", r.position_gap},
            {"tangent_gap", r.tangent_gap},
            {"holonomy_angle", r.holonomy_angle},
            {"parallel_transport_angle", r.parallel_transport_angle}};
}

inline json lengths_json(const SegmentLengths &s) {
    return {{"AB", s.ab},       {"BC", s.bc},       {"CD", s.cd},       {"DE", s.de},         {"EF", s.ef},
            {"FA", s.fa},       {"Ap_Bp", s.ap_bp}, {"Cp_Dp", s.cp_dp}, {"Ep_Fp", s.ep_fp},   {"L", s.side}};
}

// Line energy, surface energies in both conventions (when b > 0) and the
// comparison with 15 pi^2 / l.
inline json energies_json(const PiecewiseBand &band, const FramedCurve &curve, Convention selected) {
    const EnergyReport line = sadowsky_energy(curve, 0.0);
    const double bound = narrow_limit_bound(band.params.l);
    json e;
    e["line"] = line;
    e["line_closed_form"] = piecewise_line_energy(band);
    if (band.params.b > 0.0) {
        const EnergyReport pr = piecewise_surface_energy(band, Convention::Principal);
        const EnergyReport mn = piecewise_surface_energy(band, Convention::Mean);
        e["surface"] = selected == Convention::Mean ? json(mn) : json(pr);
        e["surface_principal"] = pr.value;
        e["surface_mean"] = mn.value;
        e["surface_per_width"] = (selected == Convention::Mean ? mn.value : pr.value) / (2.0 * band.params.b);
    } else {
        e["surface"] = nullptr;
        e["surface_principal"] = nullptr;
        e["surface_mean"] = nullptr;
        e["surface_per_width"] = nullptr;
    }
    e["bound"] = {{"value", bound},
                  {"mean_reading", bound / 4.0},
                  {"line_ratio", line.value / bound},
                  {"note", "15 pi^2/l holds with H^2 read as the squared principal curvature; the mean-curvature "
                           "reading gives a quarter of it"}};
    return e;
}

inline std::string trace_csv(const std::vector<TraceRow> &trace) {
    std::ostringstream os;
    os << "iter,energy,sadowsky_term,closure_pen,holonomy_pen,step\n";
    for (const auto &r : trace)
        os << r.iter << ',' << fmt17(r.energy) << ',' << fmt17(r.sadowsky_term) << ',' << fmt17(r.closure_pen) << ','
           << fmt17(r.holonomy_pen) << ',' << fmt17(r.step) << '\n';
    return os.str();
}

inline void write_report(const std::filesystem::path &dir, const json &report) {
    write_text(dir / "report.json", report.dump(2) + "\n");
}

inline void ensure_dir(const std::filesystem::path &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw Error(ErrorCode::IoError, "cannot create output directory " + dir.string());
}

inline int infeasible(const ValidationReport &v, std::ostream &err) {
    for (const auto &x : v.violations) err << "infeasible: " << x.message << '\n';
    return kInfeasible;
}

} // namespace detail

// validate -> assemble -> sample -> flatten -> band.obj, layout.svg,
// midline.csv, report.json.
inline int cmd_construct(const Options &o, std::ostream &out, std::ostream &err) {
    const BandParams p{o.l, o.d, o.b, o.n};
    const ValidationReport v = validate(p);
    if (!v.feasible()) return detail::infeasible(v, err);
    const PiecewiseBand band = assemble(p);
    const FramedCurve curve = sample_midline(band, o.n);
    const FlatLayout layout = flatten(band);
    const StripMesh sm = rectifying_strip(curve, o.b, o.m);

    const std::filesystem::path dir(o.out);
    detail::ensure_dir(dir);
    export_obj(sm.mesh, dir / "band.obj");
    export_svg(layout, dir / "layout.svg");
    export_csv(curve, dir / "midline.csv");

    json r;
    r["command"] = "construct";
    r["params"] = detail::params_json("construct", o);
    r["validation"] = detail::validation_json(v);
    r["segment_lengths"] = detail::lengths_json(band.lengths);
    r["junctions"] = band.junctions;
    r["energies"] = detail::energies_json(band, curve, parse_convention(o.convention));
    r["residuals"] = detail::residuals_json(closure_residuals(curve));
    r["outputs"] = {"band.obj", "layout.svg", "midline.csv", "report.json"};
    detail::write_report(dir, r);

    out << "construct: feasible band, d_max = " << fmt17(max_diameter(o.l)) << ", b_max = " << fmt17(max_width(o.l, o.d))
        << "\n  line energy " << fmt17(r["energies"]["line"]["value"].get<double>()) << " vs 15 pi^2/l = "
        << fmt17(narrow_limit_bound(o.l)) << "\n  wrote band.obj layout.svg midline.csv report.json to " << dir.string()
        << '\n';
    return kOk;
}

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double limit = 0.0;
};

// Every identity and tolerance the construction is supposed to satisfy.
inline std::vector<Check> verify_checks(const Options &o, const PiecewiseBand &band, const FramedCurve &curve) {
    std::vector<Check> c;
    auto add = [&](const std::string &name, double value, double limit) {
        c.push_back({name, std::isfinite(value) && value <= limit, value, limit});
    };
    const SegmentLengths &s = band.lengths;
    const double l = o.l, d = band.params.d;
    const double pi_d = kPi * d;
    double e1 = std::abs(s.total() - l);
    e1 = std::max(e1, std::abs(s.ab - 2.0 * pi_d / kSqrt3));
    e1 = std::max(e1, std::abs(s.cd - pi_d / kSqrt3));
    e1 = std::max(e1, std::abs(s.ef - pi_d / kSqrt3));
    e1 = std::max(e1, std::abs(s.fa - s.bc));
    e1 = std::max(e1, std::abs(s.ap_bp - 0.5 * s.ab));
    e1 = std::max(e1, std::abs(s.ab * std::cos(kPi / 6.0) - pi_d));
    add("segment_identities", e1, 1e-12 * l);
    add("diameter_margin", -(max_diameter(l) - d), 1e-9 * l);
    add("width_margin", -(max_width(l, d) - o.b), 0.0);
    add("junction_c1", band.junction_tangent_mismatch(), 1e-10);
    add("closure_gap", band.closure_gap(), 1e-9 * l);
    const ClosureResiduals res = closure_residuals(curve);
    add("holonomy", std::abs(res.holonomy_angle - kPi), 0.05);
    if (o.b > 0.0) {
        const StripMesh sm = rectifying_strip(curve, o.b, o.m);
        add("developability", gaussian_check(sm.mesh), 1e-3 / (d * d));
        add("orientation_reversals", std::abs(orientation_reversals(sm.strip) - 1), 0.0);
        const double surf = piecewise_surface_energy(band, Convention::Principal).value / (2.0 * o.b);
        add("surface_line_consistency", std::abs(surf - piecewise_line_energy(band)) / piecewise_line_energy(band), 1e-10);
    }
    const double line = sadowsky_energy(curve, 0.0).value;
    const double exact = piecewise_line_energy(band);
    add("line_energy_vs_closed_form", std::abs(line - exact) / exact, 0.01);
    // The bound is attained by the narrow-limit band; wider bands sit above.
    const double bound = narrow_limit_bound(l);
    if (max_width(l, d) <= 1e-12 * l) add("line_energy_vs_bound", std::abs(line - bound) / bound, 0.01);
    else add("line_energy_above_bound", (bound - line) / bound, 0.0);
    return c;
}

inline int cmd_verify(const Options &o, std::ostream &out, std::ostream &err) {
    const BandParams p{o.l, o.d, o.b, o.n};
    const ValidationReport v = validate(p);
    if (!v.feasible()) return detail::infeasible(v, err);
    const PiecewiseBand band = assemble(p);
    const FramedCurve curve = sample_midline(band, o.n);
    const std::vector<Check> checks = verify_checks(o, band, curve);

    json jc = json::array();
    bool ok = true;
    for (const auto &c : checks) {
        jc.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"limit", c.limit}});
        out << (c.passed ? "ok    " : "FAIL  ") << c.name << "  " << fmt17(c.value) << " <= " << fmt17(c.limit) << '\n';
        if (!c.passed) {
            err << "verify failed: " << c.name << '\n';
            ok = false;
        }
    }
    json r;
    r["command"] = "verify";
    r["params"] = detail::params_json("verify", o);
    r["validation"] = detail::validation_json(v);
    r["segment_lengths"] = detail::lengths_json(band.lengths);
    r["junctions"] = band.junctions;
    r["energies"] = detail::energies_json(band, curve, parse_convention(o.convention));
    r["residuals"] = detail::residuals_json(closure_residuals(curve));
    r["checks"] = jc;
    r["outputs"] = {"report.json"};
    const std::filesystem::path dir(o.out);
    detail::ensure_dir(dir);
    detail::write_report(dir, r);
    return ok ? kOk : kCheckFailed;
}

// Descent from the narrow-limit band (d = d_max). Writes trace.csv and, when
// at least one iteration ran, final_curve.csv and strip.obj.
inline int cmd_optimize(const Options &o, std::ostream &out, std::ostream &err) {
    const BandParams p{o.l, max_diameter(o.l), 0.0, o.n};
    const ValidationReport v = validate(p);
    if (!v.feasible()) return detail::infeasible(v, err);
    const PiecewiseBand band = assemble(p);
    const FramedCurve start = sample_midline(band, o.n);

    OptimizerConfig cfg;
    cfg.max_iters = o.iters;
    cfg.eps = o.eps;
    OptimizationResult res;
    try {
        res = minimize(start.positions(), cfg);
    } catch (const Error &e) {
        if (e.code() == ErrorCode::LostTopology) {
            err << "optimize aborted: " << e.what() << '\n';
            return kLostTopology;
        }
        throw;
    }

    const std::filesystem::path dir(o.out);
    detail::ensure_dir(dir);
    write_text(dir / "trace.csv", detail::trace_csv(res.energy_trace));
    json outputs = {"trace.csv"};
    json strip = nullptr;
    if (o.iters > 0) {
        export_csv(res.curve, dir / "final_curve.csv");
        const StripMesh sm = rectifying_strip(res.curve, o.b, o.m);
        export_obj(sm.mesh, dir / "strip.obj");
        outputs.push_back("final_curve.csv");
        outputs.push_back("strip.obj");
        strip = {{"half_width", o.b},
                 {"width_feasibility", width_feasibility(sm.strip)},
                 {"orientation_reversals", orientation_reversals(sm.strip)}};
    }
    outputs.push_back("report.json");

    const double bound = narrow_limit_bound(o.l);
    json r;
    r["command"] = "optimize";
    r["params"] = detail::params_json("optimize", o);
    r["validation"] = detail::validation_json(v);
    r["start"] = {{"line_energy", sadowsky_energy(start, 0.0).value}, {"line_closed_form", piecewise_line_energy(band)}};
    r["optimizer"] = {{"status", to_string(res.status)},
                      {"converged", res.converged},
                      {"accepted_steps", res.accepted_steps},
                      {"eps", res.eps},
                      {"w_close", res.w_close},
                      {"w_hol", res.w_hol},
                      {"initial_energy", res.initial_energy},
                      {"final_energy", res.final_energy},
                      {"final_polygon_energy", res.final_polygon_energy},
                      {"frame_holonomy", res.final_frame_holonomy},
                      {"edge_spread", res.edge_spread},
                      {"trace_rows", res.energy_trace.size()},
                      {"polish_rows", res.polish_trace.size()}};
    r["bound"] = {{"value", bound}, {"final_ratio", res.final_energy / bound}, {"below_bound", res.final_energy < bound}};
    r["residuals"] = detail::residuals_json(res.final_residuals);
    r["strip"] = strip;
    r["outputs"] = outputs;
    detail::write_report(dir, r);

    out << "optimize: " << to_string(res.status) << " after " << res.accepted_steps << " accepted steps\n  energy "
        << fmt17(res.initial_energy) << " -> " << fmt17(res.final_energy) << " (15 pi^2/l = " << fmt17(bound)
        << ")\n  holonomy " << fmt17(res.final_residuals.holonomy_angle) << ", edge spread " << fmt17(res.edge_spread)
        << '\n';
    return kOk;
}

inline int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Developable Moebius band: construction, checks and energy descent"};
    app.require_subcommand(1);
    Options o;
    auto add_band = [&](CLI::App *sub, bool with_d) {
        sub->add_option("--l", o.l, "midline length")->capture_default_str();
        if (with_d) sub->add_option("--d", o.d, "small-rod diameter")->capture_default_str();
        sub->add_option("--b", o.b, "half-width")->capture_default_str();
        sub->add_option("--n", o.n, "midline samples (>= 12, divisible by 6)")->capture_default_str();
        sub->add_option("--m", o.m, "mesh rows across the width")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--convention", o.convention, "surface energy convention")
            ->capture_default_str()
            ->check(CLI::IsMember({"principal", "mean"}));
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
    };
    CLI::App *construct = app.add_subcommand("construct", "build the band and export OBJ/SVG/CSV/JSON");
    add_band(construct, true);
    CLI::App *verify = app.add_subcommand("verify", "check the construction identities and tolerances");
    add_band(verify, true);
    CLI::App *optimize = app.add_subcommand("optimize", "minimize the line energy from the narrow-limit band");
    add_band(optimize, false);
    optimize->add_option("--iters", o.iters, "descent iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
    optimize->add_option("--eps", o.eps, "density regularization (default 1e-6 n/l)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e, out, err);
    }

    const auto t0 = std::chrono::steady_clock::now();
    int code = kOk;
    try {
        if (construct->parsed()) code = cmd_construct(o, out, err);
        else if (verify->parsed()) code = cmd_verify(o, out, err);
        else code = cmd_optimize(o, out, err);
    } catch (const Error &e) {
        err << e.what() << '\n';
        switch (e.code()) {
            case ErrorCode::IoError: return kIo;
            case ErrorCode::LostTopology: return kLostTopology;
            case ErrorCode::InfeasibleDiameter:
            case ErrorCode::InfeasibleWidth:
            case ErrorCode::NonPositive:
            case ErrorCode::DegenerateDiameter:
            case ErrorCode::BadSampleCount: return kInfeasible;
            default: return kCheckFailed;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << "wall time " << std::fixed << std::setprecision(3) << secs << " s\n";
    return code;
}

} // namespace devband::cli
