#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "oracles.hpp"
#include "tomopet/error.hpp"
#include "tomopet/rng.hpp"
#include "tomopet/scanner.hpp"
#include "tomopet/serial.hpp"

using namespace tomopet;
using std::numbers::pi;

namespace {

Point2 unit(double a) { return {std::cos(a), std::sin(a)}; }

struct RefFace {
    Point2 p0, p1;
    CrystalId id;
};

// Crystal faces rebuilt from the geometric description of the ring.
std::vector<RefFace> reference_faces(const ScannerConfig& c, std::uint32_t step) {
    std::vector<RefFace> out;
    const double rot = 2 * pi * step / c.n_rotation_steps;
    for (std::uint16_t s = 0; s < c.n_sectors; ++s) {
        if (!c.active_sectors[s]) continue;
        for (std::uint16_t l = 0; l < c.n_layers; ++l)
            for (std::uint16_t k = 0; k < c.crystals_per_layer; ++k) {
                const double r = c.ring_radius_mm + l * c.layer_pitch_mm;
                const double th = rot + 2 * pi * s / c.n_sectors +
                                  (k - 0.5 * (c.crystals_per_layer - 1)) * c.crystal_width_mm / c.ring_radius_mm;
                const Point2 n = unit(th), t{-n.y, n.x};
                const Point2 m = r * n;
                out.push_back({m - 0.5 * c.crystal_width_mm * t, m + 0.5 * c.crystal_width_mm * t, {s, l, k}});
            }
    }
    return out;
}

std::optional<CrystalId> reference_hit(const std::vector<RefFace>& faces, Point2 o, Point2 d) {
    double best = INFINITY;
    std::optional<CrystalId> id;
    for (const auto& f : faces) {
        const double ex = f.p1.x - f.p0.x, ey = f.p1.y - f.p0.y;
        const double den = d.x * ey - d.y * ex;
        if (den == 0) continue;
        const double wx = f.p0.x - o.x, wy = f.p0.y - o.y;
        const double t = (wx * ey - wy * ex) / den;
        const double u = (wx * d.y - wy * d.x) / den;
        if (t > 1e-12 && u >= 0 && u <= 1 && t < best) {
            best = t;
            id = f.id;
        }
    }
    return id;
}

// Fraction of back-to-back directions (fine angular grid, every step) for
// which both photons reach an active crystal.
double reference_pair_rate(const ScannerConfig& c, Point2 p, int n_dirs) {
    long hits = 0;
    for (std::uint32_t s = 0; s < c.n_rotation_steps; ++s) {
        const auto faces = reference_faces(c, s);
        for (int i = 0; i < n_dirs; ++i) {
            const double a = pi * (i + 0.5) / n_dirs;
            const auto h1 = reference_hit(faces, p, unit(a));
            const auto h2 = reference_hit(faces, p, unit(a + pi));
            hits += h1 && h2 && *h1 != *h2;
        }
    }
    return double(hits) / (double(n_dirs) * c.n_rotation_steps);
}

double library_pair_rate(const Scanner& sc, Point2 p, int n_dirs) {
    long hits = 0;
    for (std::uint32_t s = 0; s < sc.config().n_rotation_steps; ++s)
        for (int i = 0; i < n_dirs; ++i) {
            const double a = pi * (i + 0.5) / n_dirs;
            hits += sc.detect_pair(p, unit(a), unit(a + pi), s).has_value();
        }
    return double(hits) / (double(n_dirs) * sc.config().n_rotation_steps);
}

} // namespace

TEST(ScannerConfig, DefaultCrystalCounts) {
    const Scanner sc(ScannerConfig{});
    EXPECT_EQ(sc.n_crystals(), 320u);
    EXPECT_EQ(sc.n_active_crystals(), 192u);
    EXPECT_EQ(sc.config().n_active_sectors(), 12u);
    const auto& m = sc.config().active_sectors;
    for (std::uint32_t k = 0; k < 20; ++k) EXPECT_EQ(m[k], k < 6 || (k >= 10 && k < 16)) << k;
}

TEST(ScannerConfig, DefaultGridFitsFieldOfView) {
    const ScannerConfig c;
    EXPECT_GE(c.fov_size_mm, 256.0);
    EXPECT_GT(c.ring_radius_mm, 0.5 * c.fov_size_mm * std::sqrt(2.0));
}

TEST(ScannerConfig, InvalidConfigurations) {
    ScannerConfig one;
    one.active_sectors.assign(20, false);
    one.active_sectors[3] = true;
    EXPECT_THROW(Scanner{one}, ValidationError);

    ScannerConfig half;
    half.active_sectors.assign(20, false);
    for (int k = 0; k < 5; ++k) half.active_sectors[k] = true;
    EXPECT_THROW(Scanner{half}, ValidationError);

    ScannerConfig steps;
    steps.n_rotation_steps = 0;
    EXPECT_THROW(Scanner{steps}, ValidationError);

    ScannerConfig small_ring;
    small_ring.ring_radius_mm = 150;
    EXPECT_THROW(Scanner{small_ring}, ValidationError);

    ScannerConfig mask;
    mask.active_sectors.resize(19);
    EXPECT_THROW(Scanner{mask}, ValidationError);

    ScannerConfig wide;
    wide.crystal_width_mm = 20;
    EXPECT_THROW(Scanner{wide}, ValidationError);
}

TEST(ScannerConfig, JsonRoundTripAndHash) {
    ScannerConfig c = oracle::small_scanner();
    c.layer_pitch_mm = 12.5;
    const auto back = ScannerConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    EXPECT_EQ(back.hash(), c.hash());
    EXPECT_NE(ScannerConfig{}.hash(), c.hash());
    EXPECT_THROW(ScannerConfig::from_json({{"radius", 3}}), ValidationError);
    EXPECT_THROW(ScannerConfig::from_json({{"n_sectors", "x"}}), ValidationError);
    EXPECT_EQ(ScannerConfig::from_json(nlohmann::json::object()).to_json(), ScannerConfig{}.to_json());
}

TEST(CrystalCenter, StaticScannerDoesNotMove) {
    ScannerConfig c;
    c.n_rotation_steps = 1;
    const Scanner sc(c);
    EXPECT_EQ(sc.crystal_center({2, 1, 5}, 0), sc.crystal_center({2, 1, 5}, 7));
    EXPECT_EQ(sc.rotation_step_at(123.0), 0u);
}

TEST(CrystalCenter, FullRevolutionIsPeriodic) {
    const Scanner sc(ScannerConfig{});
    for (std::uint16_t s : {0, 4, 13})
        EXPECT_EQ(sc.crystal_center({s, 1, 2}, 0), sc.crystal_center({s, 1, 2}, 180));
}

TEST(CrystalCenter, HalfTurnIsPointReflection) {
    const Scanner sc(ScannerConfig{});
    for (std::uint16_t s = 0; s < 20; ++s)
        for (std::uint16_t k = 0; k < 8; ++k) {
            const Point2 p = sc.crystal_center({s, 0, k}, 0);
            const Point2 q = sc.crystal_center({s, 0, k}, 90);
            EXPECT_NEAR(q.x, -p.x, 1e-12 * 200);
            EXPECT_NEAR(q.y, -p.y, 1e-12 * 200);
        }
}

TEST(CrystalCenter, RadiusPreservedAtEveryStep) {
    const Scanner sc(ScannerConfig{});
    for (std::uint32_t step = 0; step < 180; step += 7)
        for (std::uint16_t l = 0; l < 2; ++l)
            for (std::uint16_t k = 0; k < 8; ++k) {
                const Point2 p = sc.crystal_center({11, l, k}, step);
                EXPECT_LT(oracle::rel_diff(std::hypot(p.x, p.y), 200.0 + 10.0 * l), 1e-12);
            }
}

TEST(CrystalCenter, RotationIsRigid) {
    const Scanner sc(ScannerConfig{});
    std::vector<CrystalId> ids;
    for (std::uint16_t s = 0; s < 20; s += 3) ids.push_back({s, std::uint16_t(s % 2), std::uint16_t(s % 8)});
    for (std::uint32_t step : {1u, 45u, 133u})
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                const double d0 = norm(sc.crystal_center(ids[i], 0) - sc.crystal_center(ids[j], 0));
                const double d1 = norm(sc.crystal_center(ids[i], step) - sc.crystal_center(ids[j], step));
                EXPECT_LT(oracle::rel_diff(d0, d1), 1e-12);
            }
}

TEST(CrystalCenter, OutOfRangeIdsRejected) {
    const Scanner sc(ScannerConfig{});
    EXPECT_THROW(sc.crystal_center({20, 0, 0}, 0), ValidationError);
    EXPECT_THROW(sc.crystal_center({0, 2, 0}, 0), ValidationError);
    EXPECT_THROW(sc.crystal_center({0, 0, 8}, 0), ValidationError);
}

TEST(RotationSchedule, StepFromTime) {
    const Scanner sc(ScannerConfig{});
    EXPECT_EQ(sc.rotation_step_at(0.0), 0u);
    EXPECT_EQ(sc.rotation_step_at(300.0), 90u);
    EXPECT_EQ(sc.rotation_step_at(599.99), 179u);
    EXPECT_EQ(sc.rotation_step_at(600.0), 0u);
}

TEST(DetectPair, InactiveSectorAbsorbsNothing) {
    const Scanner sc(ScannerConfig{});
    const Point2 d = unit(2 * pi * 7 / 20);
    EXPECT_FALSE(sc.detect_single({0, 0}, d, 0).has_value());
    EXPECT_FALSE(sc.detect_pair({0, 0}, d, -1.0 * d, 0).has_value());
}

TEST(DetectPair, DiameterThroughCentre) {
    const Scanner sc(ScannerConfig{});
    const double a = -0.5 * 6.0 / 200.0;
    const auto hit = sc.detect_pair({0, 0}, unit(a), unit(a + pi), 0);
    ASSERT_TRUE(hit.has_value());
    EXPECT_EQ(hit->first, (CrystalId{0, 0, 3}));
    EXPECT_EQ(hit->second, (CrystalId{10, 0, 3}));
}

TEST(DetectPair, InnerLayerShadowsOuter) {
    const Scanner sc(ScannerConfig{});
    const auto hit = sc.detect_single({0, 0}, unit(-0.5 * 6.0 / 200.0), 0);
    ASSERT_TRUE(hit.has_value());
    EXPECT_EQ(hit->layer, 0);
}

TEST(DetectPair, SwapInvariantAndDeterministic) {
    const Scanner sc(oracle::small_scanner());
    Rng rng(5);
    int detected = 0;
    for (int i = 0; i < 2000; ++i) {
        const Point2 o{rng.uniform(-60, 60), rng.uniform(-60, 60)};
        const double a = rng.uniform(0, 2 * pi);
        const Point2 d1 = unit(a), d2 = unit(a + pi + rng.uniform(-0.01, 0.01));
        const auto step = std::uint32_t(rng.uniform() * 18);
        const auto p = sc.detect_pair(o, d1, d2, step);
        const auto q = sc.detect_pair(o, d2, d1, step);
        ASSERT_EQ(p.has_value(), q.has_value());
        if (p) {
            ++detected;
            EXPECT_EQ(p->first, q->second);
            EXPECT_EQ(p->second, q->first);
            EXPECT_EQ(p, sc.detect_pair(o, d1, d2, step));
        }
    }
    EXPECT_GT(detected, 100);
}

TEST(DetectSingle, MatchesBruteForceSearch) {
    const Scanner sc(ScannerConfig{});
    Rng rng(11);
    for (int i = 0; i < 5000; ++i) {
        const Point2 o{rng.uniform(-128, 128), rng.uniform(-128, 128)};
        const Point2 d = unit(rng.uniform(0, 2 * pi));
        const auto step = std::uint32_t(rng.uniform() * 180);
        EXPECT_EQ(sc.detect_single(o, d, step), serial::detect_single(sc, o, d, step));
    }
}

TEST(DetectSingle, MatchesIndependentFaceModel) {
    const ScannerConfig c = oracle::small_scanner();
    const Scanner sc(c);
    Rng rng(12);
    for (std::uint32_t step = 0; step < 18; step += 5) {
        const auto faces = reference_faces(c, step);
        for (int i = 0; i < 500; ++i) {
            const Point2 o{rng.uniform(-64, 64), rng.uniform(-64, 64)};
            const Point2 d = unit(rng.uniform(0, 2 * pi));
            EXPECT_EQ(sc.detect_single(o, d, step), reference_hit(faces, o, d));
        }
    }
}

TEST(DetectPair, OffCentrePointDetectedLessOften) {
    const ScannerConfig c = oracle::small_scanner();
    const Scanner sc(c);
    const int n_dirs = 720;
    const double centre = library_pair_rate(sc, {0, 0}, n_dirs);
    const double off = library_pair_rate(sc, {50, 20}, n_dirs);
    const double tol = 3.0 / (n_dirs * 18.0);
    EXPECT_NEAR(centre, reference_pair_rate(c, {0, 0}, n_dirs), tol);
    EXPECT_NEAR(off, reference_pair_rate(c, {50, 20}, n_dirs), tol);
    EXPECT_LT(off, centre);
}

TEST(DetectPair, FullRingDetectsMoreFromCentre) {
    const ScannerConfig partial = oracle::small_scanner();
    const ScannerConfig full = ScannerConfig::all_active(partial);
    const double r12 = library_pair_rate(Scanner(partial), {0, 0}, 720);
    const double r20 = library_pair_rate(Scanner(full), {0, 0}, 720);
    EXPECT_GT(r20, r12);
    EXPECT_NEAR(r12, reference_pair_rate(partial, {0, 0}, 720), 3.0 / (720 * 18.0));
}

TEST(EnumerateLors, TwoCrystalsOneStep) {
    ScannerConfig c;
    c.n_sectors = 2;
    c.crystals_per_layer = 1;
    c.n_layers = 1;
    c.active_sectors = {true, true};
    c.n_rotation_steps = 1;
    const Scanner sc(c);
    const auto lors = enumerate_lors(sc);
    ASSERT_EQ(lors.size(), 1u);
    EXPECT_EQ(lors[0].a, (CrystalId{0, 0, 0}));
    EXPECT_EQ(lors[0].b, (CrystalId{1, 0, 0}));
}

TEST(EnumerateLors, CanonicalUniqueAndIndexed) {
    const Scanner sc(oracle::small_scanner());
    const auto lors = enumerate_lors(sc);
    std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> seen;
    for (std::size_t i = 0; i < lors.size(); ++i) {
        const Lor& l = lors[i];
        ASSERT_LT(l.a, l.b);
        EXPECT_TRUE(sc.is_active(l.a) && sc.is_active(l.b));
        EXPECT_TRUE(seen.insert({l.rotation_step, sc.crystal_index(l.a), sc.crystal_index(l.b)}).second);
        if (i % 97 == 0) {
            EXPECT_EQ(sc.lors().find(l), std::optional<std::uint32_t>(std::uint32_t(i)));
            EXPECT_EQ(sc.bin_of(l.b, l.a, l.rotation_step), std::optional<std::uint32_t>(std::uint32_t(i)));
        }
    }
    EXPECT_EQ(enumerate_lors(sc), lors);
}

TEST(EnumerateLors, DefaultCountMatchesPairCounting) {
    const ScannerConfig c;
    const Scanner sc(c);
    const double h = 0.5 * c.fov_size_mm;
    std::size_t expected = 0;
    for (std::uint32_t s = 0; s < c.n_rotation_steps; ++s) {
        const auto faces = reference_faces(c, s);
        for (std::size_t i = 0; i < faces.size(); ++i)
            for (std::size_t j = i + 1; j < faces.size(); ++j) {
                const Point2 a = 0.5 * (faces[i].p0 + faces[i].p1);
                const Point2 b = 0.5 * (faces[j].p0 + faces[j].p1);
                expected += oracle::clipped_length(a, b, -h, -h, h, h) > 0;
            }
    }
    EXPECT_EQ(sc.lors().size(), expected);
}

TEST(LorUnobstructed, OuterLayerBehindInnerIsShadowed) {
    const Scanner sc(ScannerConfig{});
    const Lor inner{{0, 0, 3}, {10, 0, 3}, 0};
    const Lor outer{{0, 1, 3}, {10, 1, 3}, 0};
    EXPECT_TRUE(sc.lor_unobstructed(inner));
    EXPECT_FALSE(sc.lor_unobstructed(outer));
}
