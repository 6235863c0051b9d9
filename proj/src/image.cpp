#include "tomopet/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tomopet/error.hpp"

namespace tomopet {

double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
double norm(Point2 p) { return std::hypot(p.x, p.y); }

Point2 rotate(Point2 p, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

double GridSpec::half_diagonal() const { return 0.5 * std::hypot(width * pixel_size, height * pixel_size); }

Point2 GridSpec::pixel_center(std::uint32_t ix, std::uint32_t iy) const {
    return {x_min() + (ix + 0.5) * pixel_size, y_min() + (iy + 0.5) * pixel_size};
}

void GridSpec::validate() const {
    if (width < 1 || height < 1)
        throw ValidationError("image grid must be at least 1x1, got " + std::to_string(width) + "x" +
                              std::to_string(height));
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size))
        throw ValidationError("pixel size must be positive and finite");
}

Image::Image(GridSpec grid) : grid_(grid) {
    grid_.validate();
    values_.assign(grid_.size(), 0.0);
}

Image::Image(GridSpec grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != grid_.size())
        throw ValidationError("image has " + std::to_string(values_.size()) + " values, grid needs " +
                              std::to_string(grid_.size()));
    for (double v : values_)
        if (!std::isfinite(v)) throw ValidationError("image values must be finite");
}

double Image::total() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
}

double Image::min() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }
double Image::max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

namespace {
void require_nonnegative(const Image& img) {
    for (double v : img.values())
        if (v < 0.0) throw ValidationError("activity map has a negative pixel value");
}
} // namespace

ActivityMap::ActivityMap(GridSpec grid, std::vector<double> values) : Image(grid, std::move(values)) {
    require_nonnegative(*this);
}

ActivityMap::ActivityMap(Image image) : Image(std::move(image)) { require_nonnegative(*this); }

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
    if (a.width != b.width || a.height != b.height)
        throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width) + "x" +
                              std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                              std::to_string(b.height) + ")");
}

} // namespace tomopet
