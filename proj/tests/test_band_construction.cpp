#include "devband/band_construction.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace devband;

TEST(SegmentLengths, WorkedExample) {
    const SegmentLengths s = segment_lengths(3.0, 0.3);
    EXPECT_NEAR(s.ab, 1.0882796, 1e-7);
    EXPECT_NEAR(s.cd, 0.5441398, 1e-7);
    EXPECT_NEAR(s.ef, 0.5441398, 1e-7);
    EXPECT_NEAR(s.fa, 0.1837903, 1e-7);
    EXPECT_NEAR(s.bc, 0.1837903, 1e-7);
    EXPECT_NEAR(s.de, 0.4558602, 1e-7);
    EXPECT_NEAR(s.total(), 3.0, 1e-12 * 3.0);
    const oracle::Lengths o = oracle::lengths(3.0, 0.3);
    EXPECT_NEAR(s.ab, o.ab, 1e-14);
    EXPECT_NEAR(s.de, o.de, 1e-14);
    EXPECT_NEAR(s.ap_bp, o.ap_bp, 1e-14);
    EXPECT_NEAR(s.cp_dp, o.cp_dp, 1e-14);
}

TEST(SegmentLengths, NarrowLimitMatchesNinths) {
    const double l = 3.0;
    const SegmentLengths s = segment_lengths(l, max_diameter(l));
    EXPECT_NEAR(s.ab, 4.0 * l / 9.0, 1e-12);
    EXPECT_NEAR(s.cd, 2.0 * l / 9.0, 1e-12);
    EXPECT_NEAR(s.ef, 2.0 * l / 9.0, 1e-12);
    EXPECT_NEAR(s.de, l / 9.0, 1e-12);
    EXPECT_EQ(s.fa, 0.0);
    EXPECT_EQ(s.bc, 0.0);
}

TEST(SegmentLengths, RoundedDiameterIsStillFeasible) {
    // 0.3675482 sits just below d_max(3) = 0.3675526.
    const SegmentLengths s = segment_lengths(3.0, 0.3675482);
    EXPECT_GT(s.fa, 0.0);
    EXPECT_LT(s.fa, 2e-5);
}

TEST(SegmentLengths, Errors) {
    try {
        segment_lengths(3.0, 0.4);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::InfeasibleDiameter);
    }
    EXPECT_THROW(segment_lengths(0.0, 0.1), Error);
    EXPECT_THROW(segment_lengths(3.0, -0.1), Error);
}

TEST(SegmentLengths, RandomFeasibleIdentities) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ul(0.1, 50.0), uf(0.01, 1.0);
    for (int k = 0; k < 200; ++k) {
        const double l = ul(rng), d = uf(rng) * oracle::d_max(l);
        const SegmentLengths s = segment_lengths(l, d);
        const oracle::Lengths o = oracle::lengths(l, d);
        EXPECT_NEAR(s.total(), l, 1e-12 * l);
        EXPECT_NEAR(s.ab, 2 * s.cd, 1e-13 * l);
        EXPECT_NEAR(s.ap_bp, s.ab * 0.5, 1e-13 * l);
        EXPECT_NEAR(s.ab * std::cos(oracle::pi / 6), oracle::pi * d, 1e-13 * l);
        EXPECT_NEAR(s.bc, o.bc, 1e-13 * l);
        EXPECT_NEAR(s.de, o.de, 1e-12 * l);
        for (double a : s.arcs()) EXPECT_GE(a, 0.0);
    }
}

TEST(MaxDiameter, Values) {
    EXPECT_NEAR(max_diameter(3.0), 0.3675526, 1e-7);
    EXPECT_NEAR(max_diameter(3.0), oracle::d_max(3.0), 1e-15);
    EXPECT_NEAR(max_diameter(3.0 * std::sqrt(3.0) * oracle::pi / 2.0), 1.0, 1e-14);
    EXPECT_THROW(max_diameter(0.0), Error);
}

TEST(MaxWidth, BothClosedFormsAgree) {
    EXPECT_NEAR(max_width(3.0, 0.3), 0.1591671, 1e-7);
    EXPECT_NEAR(oracle::b_max_direct(3.0, 0.3), oracle::b_max_generators(3.0, 0.3), 1e-12);
    EXPECT_NEAR(max_width(3.0, 0.3), oracle::b_max_generators(3.0, 0.3), 1e-12);
    EXPECT_EQ(max_width(3.0, max_diameter(3.0)), 0.0);
    EXPECT_NEAR(max_width(3.0, 1e-12), 3.0 / (2 * std::sqrt(3.0)), 1e-9);
    EXPECT_THROW(max_width(3.0, 0.5), Error);
}

TEST(Validate, Margins) {
    const ValidationReport ok = validate({3.0, 0.3, 0.1, 120});
    EXPECT_TRUE(ok.feasible());
    ASSERT_TRUE(ok.diameter_margin && ok.width_margin);
    EXPECT_NEAR(*ok.diameter_margin, oracle::d_max(3.0) - 0.3, 1e-14);
    EXPECT_NEAR(*ok.diameter_margin, 0.0675526, 1e-7);
    EXPECT_NEAR(*ok.width_margin, 0.0591671, 1e-7);

    const ValidationReport wide = validate({3.0, 0.3, 0.2, 120});
    EXPECT_TRUE(wide.violates(Constraint::Width));
    EXPECT_NEAR(wide.violations.at(0).excess, 0.0408329, 1e-7);

    const ValidationReport thick = validate({3.0, 0.5, 0.0, 120});
    EXPECT_TRUE(thick.violates(Constraint::Diameter));
    EXPECT_NE(thick.violations.at(0).message.find("0.3675526"), std::string::npos);

    EXPECT_TRUE(validate({3.0, 0.3, 0.1, 100}).violates(Constraint::SampleCount));
}

TEST(Assemble, Junctions) {
    const PiecewiseBand band = assemble({3.0, 0.3, 0.1, 120});
    const std::array<double, 6> want = {0.0, 1.0882796, 1.2720699, 1.8162097, 2.2720699, 2.8162097};
    const oracle::Lengths o = oracle::lengths(3.0, 0.3);
    const std::array<double, 6> arcs = {o.ab, o.bc, o.cd, o.de, o.ef, o.fa};
    double acc = 0.0;
    for (int k = 0; k < 6; ++k) {
        EXPECT_NEAR(band.junctions[k], want[k], 1e-7);
        EXPECT_NEAR(band.junctions[k], acc, 1e-13);
        acc += arcs[k];
    }
}

TEST(Assemble, SmoothClosedOneSided) {
    for (double d : {0.1, 0.3, max_diameter(3.0)}) {
        const PiecewiseBand band = assemble({3.0, d, 0.0, 120});
        EXPECT_LT(band.junction_tangent_mismatch(), 1e-10) << d;
        EXPECT_LT(band.closure_gap(), 1e-9 * 3.0) << d;
        EXPECT_TRUE(band.one_sided()) << d;
    }
}

TEST(Assemble, RodsAndLevels) {
    const double d = 0.3;
    const PiecewiseBand band = assemble({3.0, d, 0.1, 120});
    EXPECT_DOUBLE_EQ(band.rods[0].radius, d);
    EXPECT_DOUBLE_EQ(band.rods[1].radius, d / 2);
    EXPECT_DOUBLE_EQ(band.rods[2].radius, d / 2);
    for (const RodSpec &r : band.rods) {
        EXPECT_NEAR(r.axis_dir.norm(), 1.0, 1e-14);
        EXPECT_NEAR(r.axis_dir.z(), 0.0, 1e-14);
    }
    EXPECT_NEAR(band.rods[0].height_interval.first, 0.0, 1e-14);
    EXPECT_NEAR(band.rods[0].height_interval.second, 2 * d, 1e-14);
    EXPECT_NEAR(band.rods[1].height_interval.first, d, 1e-14);
    EXPECT_NEAR(band.rods[2].height_interval.second, d, 1e-14);
    const std::array<double, 3> level = {2 * d, d, 0.0}; // BC, DE, FA
    for (int k : {1, 3, 5}) {
        const auto &p = std::get<PlanarSegment>(band.segments[k].shape);
        EXPECT_NEAR(p.start.z(), level[k / 2], 1e-14);
        EXPECT_NEAR(p.end.z(), level[k / 2], 1e-14);
    }
}

TEST(Assemble, HelixMeetsGeneratorsAt60) {
    const PiecewiseBand band = assemble({3.0, 0.3, 0.1, 120});
    for (int k : {0, 2, 4}) {
        const Segment &seg = band.segments[k];
        const Vec3 axis = band.rods[std::get<HelicalSegment>(seg.shape).rod].axis_dir;
        for (double f : {0.0, 0.3, 0.7, 1.0}) {
            const Vec3 t = band.evaluate(seg.arc_start + f * seg.length * (1 - 1e-12)).tangent;
            EXPECT_NEAR(std::acos(std::abs(t.dot(axis))), oracle::pi / 3, 1e-12);
        }
    }
}

// The flat pieces project onto the sides of the triangle P, Q, R.
TEST(Assemble, ProjectionsOnEquilateralTriangle) {
    const PiecewiseBand band = assemble({3.0, 0.3, 0.1, 120});
    const Vec3 P(0, 0, 0), Q(1, 0, 0), R(0.5, std::sqrt(3.0) / 2, 0);
    EXPECT_NEAR((band.corners[0] - P).norm(), 0.0, 1e-12);
    EXPECT_NEAR((band.corners[1] - Q).norm(), 0.0, 1e-12);
    EXPECT_NEAR((band.corners[2] - R).norm(), 0.0, 1e-12);
    auto on_line = [](const Vec3 &x, const Vec3 &a, const Vec3 &b) {
        const Vec3 p(x.x(), x.y(), 0.0);
        const Vec3 u = (b - a).normalized();
        return ((p - a) - (p - a).dot(u) * u).norm();
    };
    const auto &bc = std::get<PlanarSegment>(band.segments[1].shape);
    const auto &de = std::get<PlanarSegment>(band.segments[3].shape);
    const auto &fa = std::get<PlanarSegment>(band.segments[5].shape);
    EXPECT_LT(on_line(bc.start, P, R), 1e-10);
    EXPECT_LT(on_line(bc.end, P, R), 1e-10);
    EXPECT_LT(on_line(de.start, R, Q), 1e-10);
    EXPECT_LT(on_line(de.end, R, Q), 1e-10);
    EXPECT_LT(on_line(fa.start, Q, P), 1e-10);
    EXPECT_LT(on_line(fa.end, Q, P), 1e-10);
}

TEST(Assemble, Errors) {
    auto code = [](BandParams p) {
        try {
            assemble(p);
        } catch (const Error &e) {
            return e.code();
        }
        return ErrorCode::Precondition;
    };
    EXPECT_EQ(code({3.0, 0.0, 0.0, 120}), ErrorCode::DegenerateDiameter);
    EXPECT_EQ(code({3.0, 0.5, 0.0, 120}), ErrorCode::InfeasibleDiameter);
    EXPECT_EQ(code({3.0, 0.3, 0.2, 120}), ErrorCode::InfeasibleWidth);
    EXPECT_EQ(code({3.0, 0.3, 0.1, 100}), ErrorCode::BadSampleCount);
}

TEST(SampleMidline, ChordLengthAndCurvatures) {
    const PiecewiseBand band = assemble({3.0, 0.3, 0.1, 600});
    const FramedCurve c = sample_midline(band, 600);
    ASSERT_EQ(c.size(), 600u);
    double chord = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) chord += (c.samples[(i + 1) % c.size()].position - c.samples[i].position).norm();
    EXPECT_NEAR(chord, 3.0, 1e-4);
    EXPECT_LT(3.0 - chord, 1e-4);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const CurveSample &s = c.samples[i];
        if (std::abs(s.s - band.junctions[s.segment]) < 1e-12) continue; // one-sided junction sample
        if (band.segments[s.segment].helical()) {
            const double r = std::get<HelicalSegment>(band.segments[s.segment].shape).radius;
            EXPECT_NEAR(s.K, 0.75 / r, 2e-3 / r);
            EXPECT_NEAR(std::abs(s.W), std::sqrt(3.0) / (4 * r), 2e-3 / r);
        } else {
            EXPECT_LT(s.K, 1e-8);
            EXPECT_EQ(s.W, 0.0);
        }
    }
}

TEST(SampleMidline, ChordErrorIsSecondOrder) {
    const PiecewiseBand band = assemble({3.0, 0.3, 0.0, 600});
    auto chord_error = [&](int n) {
        const auto p = sample_midline(band, n).positions();
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += (p[(i + 1) % p.size()] - p[i]).norm();
        return 3.0 - s;
    };
    const double e1 = chord_error(300), e2 = chord_error(600);
    EXPECT_GT(e1 / e2, 3.5);
}

TEST(SampleMidline, BadCount) {
    const PiecewiseBand band = assemble({3.0, 0.3, 0.1, 600});
    EXPECT_THROW(sample_midline(band, 100), Error);
    EXPECT_THROW(sample_midline(band, 6), Error);
}

TEST(Flatten, MarksAndGenerators) {
    const FlatLayout f = flatten(assemble({3.0, 0.3, 0.1, 120}));
    EXPECT_DOUBLE_EQ(f.length, 3.0);
    EXPECT_DOUBLE_EQ(f.width, 0.2);
    const std::array<double, 6> want = {0.0, 1.0882796, 1.2720699, 1.8162097, 2.2720699, 2.8162097};
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(f.junction_marks[k], want[k], 1e-7);
    ASSERT_FALSE(f.generator_lines.empty());
    for (const auto &g : f.generator_lines) {
        EXPECT_EQ(g.angle_deg, 60.0);
        const int k = g.segment;
        EXPECT_TRUE(k == 0 || k == 2 || k == 4);
        EXPECT_GE(g.foot, f.junction_marks[k]);
        EXPECT_LE(g.foot, k == 4 ? f.junction_marks[5] : f.junction_marks[k + 1]);
    }
}

TEST(Flatten, NarrowLimitMarks) {
    const FlatLayout f = flatten(assemble({3.0, max_diameter(3.0), 0.0, 120}));
    const std::array<double, 6> want = {0.0, 4.0 / 3, 4.0 / 3, 2.0, 7.0 / 3, 3.0};
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(f.junction_marks[k], want[k], 1e-12);
}

TEST(Flatten, IsometryWithArcLengths) {
    const PiecewiseBand band = assemble({3.0, 0.3, 0.1, 120});
    const FlatLayout f = flatten(band);
    for (int k = 0; k < 6; ++k) {
        const Segment &seg = band.segments[k];
        // Arc length of the 3D piece by fine chord summation.
        double arc = 0.0;
        const int m = 20000;
        Vec3 prev = detail::evaluate_segment(seg, 0.0).position;
        for (int j = 1; j <= m; ++j) {
            const Vec3 x = detail::evaluate_segment(seg, seg.length * j / m).position;
            arc += (x - prev).norm();
            prev = x;
        }
        EXPECT_NEAR(f.segment_lengths[k], arc, 1e-9) << k;
    }
}

TEST(Construction, ScaleEquivariance) {
    const double lambda = 2.5;
    const PiecewiseBand a = assemble({3.0, 0.3, 0.1, 120});
    const PiecewiseBand b = assemble({3.0 * lambda, 0.3 * lambda, 0.1 * lambda, 120});
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(b.junctions[k], lambda * a.junctions[k], 1e-12);
    EXPECT_NEAR(max_width(3.0 * lambda, 0.3 * lambda), lambda * max_width(3.0, 0.3), 1e-12);
    const FramedCurve ca = sample_midline(a, 120), cb = sample_midline(b, 120);
    for (std::size_t i = 0; i < ca.size(); ++i) {
        EXPECT_NEAR(cb.samples[i].K, ca.samples[i].K / lambda, 1e-9);
        EXPECT_NEAR((cb.samples[i].position - lambda * ca.samples[i].position).norm(), 0.0, 1e-12);
    }
}

TEST(Construction, NarrowLimitPolygon) {
    const auto p = narrow_limit_polygon(3.0, 240);
    EXPECT_EQ(p.size(), 240u);
}
