#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tomopet {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
    friend bool operator==(Point2, Point2) = default;
};

double dot(Point2 a, Point2 b);
double cross(Point2 a, Point2 b);
double norm(Point2 p);
/// Counter-clockwise rotation about the origin.
Point2 rotate(Point2 p, double angle);

/// Pixel grid centred on the origin. Pixel (ix, iy) covers
/// [x_min + ix*ps, x_min + (ix+1)*ps) x [y_min + iy*ps, y_min + (iy+1)*ps);
/// values are stored row-major, index = iy * width + ix.
struct GridSpec {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    double pixel_size = 1.0; // mm

    std::size_t size() const { return std::size_t(width) * height; }
    double x_min() const { return -0.5 * width * pixel_size; }
    double y_min() const { return -0.5 * height * pixel_size; }
    double x_max() const { return 0.5 * width * pixel_size; }
    double y_max() const { return 0.5 * height * pixel_size; }
    double half_diagonal() const;
    Point2 pixel_center(std::uint32_t ix, std::uint32_t iy) const;
    /// Throws ValidationError unless width, height >= 1 and pixel_size > 0.
    void validate() const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Finite-valued 2D image on a GridSpec. Immutable after construction.
class Image {
public:
    Image() = default;
    /// Zero image.
    explicit Image(GridSpec grid);
    Image(GridSpec grid, std::vector<double> values);

    const GridSpec& grid() const { return grid_; }
    std::uint32_t width() const { return grid_.width; }
    std::uint32_t height() const { return grid_.height; }
    double pixel_size() const { return grid_.pixel_size; }
    std::size_t size() const { return values_.size(); }

    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double at(std::uint32_t ix, std::uint32_t iy) const { return values_[std::size_t(iy) * grid_.width + ix]; }

    double total() const;
    double min() const;
    double max() const;

    friend bool operator==(const Image&, const Image&) = default;

private:
    GridSpec grid_{};
    std::vector<double> values_;
};

/// Nonnegative emission image (phantom slice or reconstruction).
class ActivityMap : public Image {
public:
    ActivityMap() = default;
    explicit ActivityMap(GridSpec grid) : Image(grid) {}
    ActivityMap(GridSpec grid, std::vector<double> values);
    explicit ActivityMap(Image image);

    double total_activity() const { return total(); }
};

/// Throws ValidationError when the two grids differ.
void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what);

} // namespace tomopet
