#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "tomopet/error.hpp"
#include "tomopet/phantom_io.hpp"
#include "tomopet/radon.hpp"
#include "tomopet/rng.hpp"

using namespace tomopet;
using std::numbers::pi;

namespace {

Image random_image(const GridSpec& g, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(g.size());
    for (auto& x : v) x = rng.uniform();
    return Image(g, std::move(v));
}

double inner(const Image& a, const Image& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (long double)a[i] * b[i];
    return double(s);
}

// Line integral of the image along detector ray (k, d), from per-pixel clipping.
double reference_ray(const RadonSpec& spec, const Image& x, std::uint32_t k, std::uint32_t d) {
    const GridSpec& g = x.grid();
    const double th = spec.angle(k), s = spec.offset(d), L = 2 * g.half_diagonal() + 10;
    const bool axis = k == 0 || 2 * k == spec.n_angles;
    const Point2 n = k == 0 ? Point2{1, 0} : axis ? Point2{0, 1} : Point2{std::cos(th), std::sin(th)};
    const Point2 e{-n.y, n.x};
    // Axis rays may run along pixel edges: average the limits from both sides.
    const double shifts[2] = {axis ? -1e-6 : 0.0, axis ? 1e-6 : 0.0};
    double v = 0;
    for (double h : shifts) {
        const Point2 c = (s + h) * n;
        const auto row = oracle::dense_row(g, c - L * e, c + L * e);
        for (std::size_t j = 0; j < row.size(); ++j) v += 0.5 * row[j] * x[j];
    }
    return v;
}

} // namespace

TEST(RadonSpec, DefaultsAndValidation) {
    const auto s = RadonSpec::defaults_for(GridSpec{32, 24, 2.0});
    EXPECT_EQ(s.n_angles, 180u);
    EXPECT_EQ(s.n_detectors, 47u);
    EXPECT_EQ(s.detector_spacing, 2.0);
    EXPECT_EQ(RadonSpec::defaults_for(GridSpec{16, 16, 1.0}).n_detectors, 23u);
    EXPECT_NO_THROW(s.validate_for(GridSpec{32, 24, 2.0}));

    RadonSpec even = s;
    even.n_detectors = 46;
    EXPECT_THROW(even.validate(), ValidationError);
    RadonSpec narrow = s;
    narrow.n_detectors = 11;
    EXPECT_THROW(narrow.validate_for(GridSpec{32, 24, 2.0}), ValidationError);
    RadonSpec no_angles = s;
    no_angles.n_angles = 0;
    EXPECT_THROW(no_angles.validate(), ValidationError);

    const auto back = RadonSpec::from_json(s.to_json());
    EXPECT_EQ(back.n_detectors, s.n_detectors);
    EXPECT_EQ(back.detector_spacing, s.detector_spacing);
    EXPECT_EQ(back.n_angles, s.n_angles);
    EXPECT_NEAR(s.angle(90), pi / 2, 1e-15);
    EXPECT_EQ(s.offset(23), 0.0);
}

TEST(Radon, ZeroImageAndZeroSinogram) {
    const GridSpec g{16, 16, 1.0};
    const RadonTransform r(RadonSpec::defaults_for(g), g);
    const Image s = r.forward(Image(g));
    EXPECT_EQ(s.grid(), r.sinogram_grid());
    EXPECT_EQ(s.max(), 0.0);
    EXPECT_EQ(r.adjoint(Image(r.sinogram_grid())).max(), 0.0);
}

TEST(Radon, RaysMatchPerPixelClipping) {
    const GridSpec g{16, 12, 1.5};
    RadonSpec spec = RadonSpec::defaults_for(g);
    spec.n_angles = 13;
    const Image x = random_image(g, 1);
    const Image s = radon_forward(spec, x);
    for (std::uint32_t k = 0; k < spec.n_angles; ++k)
        for (std::uint32_t d = 0; d < spec.n_detectors; ++d)
            EXPECT_NEAR(s.at(d, k), reference_ray(spec, x, k, d), 1e-9);
}

TEST(Radon, MassConservedPerAngle) {
    const GridSpec g{24, 24, 1.0};
    const RadonSpec spec = RadonSpec::defaults_for(g);
    const Image x = random_image(g, 2);
    const Image s = radon_forward(spec, x);
    const double mass = x.total() * g.pixel_size * g.pixel_size;
    // Axis-aligned rays tile every pixel exactly.
    for (std::uint32_t k : {0u, 90u}) {
        double row = 0;
        for (std::uint32_t d = 0; d < spec.n_detectors; ++d) row += s.at(d, k);
        EXPECT_LE(oracle::rel_diff(row * spec.detector_spacing, mass), 1e-12) << k;
    }
    // Generic angles sample the projected mass at detector spacing.
    double worst = 0;
    for (std::uint32_t k = 0; k < spec.n_angles; ++k) {
        double row = 0;
        for (std::uint32_t d = 0; d < spec.n_detectors; ++d) row += s.at(d, k);
        worst = std::max(worst, oracle::rel_diff(row * spec.detector_spacing, mass));
    }
    EXPECT_LT(worst, 0.02);
}

TEST(Radon, CentredDiskEqualAtQuarterTurns) {
    const GridSpec g{32, 32, 1.0};
    PhantomParams p;
    p.radius_mm = 11;
    const auto x = make_synthetic_phantom(PhantomKind::disk, 32, 32, 1.0, p);
    RadonSpec spec = RadonSpec::defaults_for(g);
    spec.n_angles = 8;
    const Image s = radon_forward(spec, x);
    for (std::uint32_t d = 0; d < spec.n_detectors; ++d) {
        const std::uint32_t mirror = spec.n_detectors - 1 - d;
        EXPECT_NEAR(s.at(d, 0), s.at(d, 4), 1e-9);
        EXPECT_NEAR(s.at(d, 0), s.at(mirror, 0), 1e-9);
        EXPECT_NEAR(s.at(d, 2), s.at(d, 6), 1e-9);
        EXPECT_NEAR(s.at(d, 2), s.at(mirror, 6), 1e-9);
    }
    double total0 = 0, total2 = 0;
    for (std::uint32_t d = 0; d < spec.n_detectors; ++d) {
        total0 += s.at(d, 0);
        total2 += s.at(d, 2);
    }
    EXPECT_LE(oracle::rel_diff(total0, total2), 0.005);
    EXPECT_LE(oracle::rel_diff(total0, x.total()), 1e-12);
}

TEST(Radon, Adjointness) {
    const GridSpec g{20, 20, 1.0};
    const RadonTransform r(RadonSpec::defaults_for(g), g);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Image x = random_image(g, 10 + s);
        const Image y = random_image(r.sinogram_grid(), 20 + s);
        EXPECT_LE(oracle::rel_diff(inner(r.forward(x), y), inner(x, r.adjoint(y))), 1e-12);
    }
}

TEST(Radon, ImpulseBackProjectsChordWeights) {
    const GridSpec g{16, 16, 1.0};
    RadonSpec spec = RadonSpec::defaults_for(g);
    spec.n_angles = 7;
    std::vector<double> v(std::size_t(spec.n_angles) * spec.n_detectors, 0.0);
    const std::uint32_t k = 3, d = 14;
    v[k * spec.n_detectors + d] = 1.0;
    const Image back = radon_adjoint(spec, Image(GridSpec{spec.n_detectors, spec.n_angles, 1.0}, v), g);
    const double th = spec.angle(k), s = spec.offset(d), L = 40;
    const Point2 n{std::cos(th), std::sin(th)}, e{-n.y, n.x};
    const auto row = oracle::dense_row(g, s * n - L * e, s * n + L * e);
    for (std::size_t j = 0; j < row.size(); ++j) EXPECT_NEAR(back[j], row[j], 1e-9);
}

TEST(Radon, DimensionMismatch) {
    const GridSpec g{16, 16, 1.0};
    const RadonTransform r(RadonSpec::defaults_for(g), g);
    EXPECT_THROW(r.forward(Image(GridSpec{8, 8, 1.0})), ValidationError);
    EXPECT_THROW(r.adjoint(Image(GridSpec{8, 8, 1.0})), ValidationError);
}

TEST(Radon, Linearity) {
    const GridSpec g{16, 16, 1.0};
    const RadonTransform r(RadonSpec::defaults_for(g), g);
    const Image a = random_image(g, 40), b = random_image(g, 41);
    std::vector<double> sum(a.size());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = 2 * a[i] + b[i];
    const Image ra = r.forward(a), rb = r.forward(b), rs = r.forward(Image(g, sum));
    for (std::size_t i = 0; i < rs.size(); ++i) EXPECT_LE(oracle::rel_diff(rs[i], 2 * ra[i] + rb[i]), 1e-12);
}
