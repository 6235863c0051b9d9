#pragma once

#include <cstdint>

#include <json.hpp>

#include "tomopet/image.hpp"
#include "tomopet/linear_operator.hpp"

namespace tomopet {

/// Parallel-beam geometry: angle k is k*pi/n_angles; detector d sits at
/// offset (d - (n_detectors - 1)/2) * detector_spacing along (cos, sin).
struct RadonSpec {
    std::uint32_t n_angles = 180;
    std::uint32_t n_detectors = 0;
    double detector_spacing = 1.0;

    /// 180 angles, the smallest odd detector count >= sqrt(2) * max(w, h),
    /// spacing equal to the pixel size.
    static RadonSpec defaults_for(const GridSpec& grid);
    void validate() const;
    /// Also checks that the detector array covers the grid's circumscribed circle.
    void validate_for(const GridSpec& grid) const;

    double angle(std::uint32_t k) const;
    double offset(std::uint32_t d) const;

    nlohmann::json to_json() const;
    static RadonSpec from_json(const nlohmann::json& j);
};

/// Radon transform on a fixed grid, backed by a ray matrix traced with the
/// same pixel-exact tracer as the scanner system matrix. Sinograms are
/// images with width = n_detectors, height = n_angles, pixel_size = spacing.
class RadonTransform final : public MatrixOperator {
public:
    RadonTransform(const RadonSpec& spec, const GridSpec& grid);

    const RadonSpec& spec() const { return spec_; }
    GridSpec sinogram_grid() const;

    Image forward(const Image& x) const;
    Image adjoint(const Image& sinogram) const;

private:
    RadonSpec spec_;
};

Image radon_forward(const RadonSpec& spec, const Image& x);
Image radon_adjoint(const RadonSpec& spec, const Image& sinogram, const GridSpec& grid);

} // namespace tomopet
