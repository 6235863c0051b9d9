#include "tomopet/radon.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "tomopet/error.hpp"
#include "tomopet/hashing.hpp"

namespace tomopet {

RadonSpec RadonSpec::defaults_for(const GridSpec& grid) {
    grid.validate();
    RadonSpec s;
    const double need = std::sqrt(2.0) * double(std::max(grid.width, grid.height));
    auto n = std::uint32_t(std::ceil(need - 1e-9));
    if (n % 2 == 0) ++n;
    s.n_detectors = n;
    s.detector_spacing = grid.pixel_size;
    return s;
}

void RadonSpec::validate() const {
    if (n_angles < 1) throw ValidationError("radon spec: n_angles must be >= 1");
    if (n_detectors < 1 || n_detectors % 2 == 0) throw ValidationError("radon spec: n_detectors must be odd");
    if (!(detector_spacing > 0.0) || !std::isfinite(detector_spacing))
        throw ValidationError("radon spec: detector_spacing must be positive");
}

void RadonSpec::validate_for(const GridSpec& grid) const {
    validate();
    grid.validate();
    const double half_span = 0.5 * n_detectors * detector_spacing;
    if (half_span < grid.half_diagonal() * (1.0 - 1e-12))
        throw ValidationError("radon spec: detector array (half-span " + std::to_string(half_span) +
                              " mm) does not cover the image (half-diagonal " + std::to_string(grid.half_diagonal()) +
                              " mm)");
}

double RadonSpec::angle(std::uint32_t k) const { return std::numbers::pi * double(k) / double(n_angles); }

double RadonSpec::offset(std::uint32_t d) const {
    return (double(d) - 0.5 * double(n_detectors - 1)) * detector_spacing;
}

nlohmann::json RadonSpec::to_json() const {
    return {{"n_angles", n_angles}, {"n_detectors", n_detectors}, {"detector_spacing", detector_spacing}};
}

RadonSpec RadonSpec::from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys{"n_angles", "n_detectors", "detector_spacing"};
    if (!j.is_object()) throw ValidationError("radon spec must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!kKeys.count(k)) throw ValidationError("radon spec: unknown key \"" + k + "\"");
    RadonSpec s;
    try {
        s.n_angles = j.value("n_angles", s.n_angles);
        s.n_detectors = j.at("n_detectors").get<std::uint32_t>();
        s.detector_spacing = j.at("detector_spacing").get<double>();
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("radon spec: ") + ex.what());
    }
    s.validate();
    return s;
}

namespace {

std::shared_ptr<const SystemMatrix> ray_matrix(const RadonSpec& spec, const GridSpec& grid) {
    spec.validate_for(grid);
    const double half_len = grid.half_diagonal() + 1.0;
    std::vector<Chord> chords;
    chords.reserve(std::size_t(spec.n_angles) * spec.n_detectors);
    for (std::uint32_t k = 0; k < spec.n_angles; ++k) {
        const double th = spec.angle(k);
        // Exact axis directions keep axis-parallel rays on grid lines.
        const Point2 n = k == 0 ? Point2{1.0, 0.0}
                         : 2 * k == spec.n_angles ? Point2{0.0, 1.0}
                                                  : Point2{std::cos(th), std::sin(th)};
        const Point2 e{-n.y, n.x};
        for (std::uint32_t d = 0; d < spec.n_detectors; ++d) {
            const Point2 c = spec.offset(d) * n;
            chords.push_back({c - half_len * e, c + half_len * e});
        }
    }
    const Digest tag = sha256(spec.to_json().dump());
    return std::make_shared<const SystemMatrix>(build_matrix_from_chords(chords, grid, tag));
}

} // namespace

RadonTransform::RadonTransform(const RadonSpec& spec, const GridSpec& grid)
    : MatrixOperator(ray_matrix(spec, grid)), spec_(spec) {}

GridSpec RadonTransform::sinogram_grid() const { return {spec_.n_detectors, spec_.n_angles, spec_.detector_spacing}; }

Image RadonTransform::forward(const Image& x) const {
    const GridSpec& g = domain();
    if (x.width() != g.width || x.height() != g.height)
        throw ValidationError("radon_forward: image is " + std::to_string(x.width()) + "x" +
                              std::to_string(x.height()) + ", operator expects " + std::to_string(g.width) + "x" +
                              std::to_string(g.height));
    return Image(sinogram_grid(), apply(x.values()));
}

Image RadonTransform::adjoint(const Image& sinogram) const {
    if (sinogram.width() != spec_.n_detectors || sinogram.height() != spec_.n_angles)
        throw ValidationError("radon_adjoint: sinogram is " + std::to_string(sinogram.width()) + "x" +
                              std::to_string(sinogram.height()) + ", expected " + std::to_string(spec_.n_detectors) +
                              "x" + std::to_string(spec_.n_angles));
    return Image(domain(), apply_adjoint(sinogram.values()));
}

Image radon_forward(const RadonSpec& spec, const Image& x) { return RadonTransform(spec, x.grid()).forward(x); }

Image radon_adjoint(const RadonSpec& spec, const Image& sinogram, const GridSpec& grid) {
    return RadonTransform(spec, grid).adjoint(sinogram);
}

} // namespace tomopet
