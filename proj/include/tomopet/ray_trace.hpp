#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include "tomopet/image.hpp"

namespace tomopet {

/// Parameter interval [t0, t1] of p0 + t*(p1 - p0), t in [0, 1], inside the
/// grid rectangle; nullopt when the intersection has zero length.
std::optional<std::pair<double, double>> clip_to_grid(const GridSpec& grid, Point2 p0, Point2 p1);

/// Exact pixel traversal of the segment p0-p1 (Siddon's parametric method).
/// visit(pixel_index, length_mm) is called once per crossed pixel, in order
/// along the segment, with length > 0. A segment lying on a grid line
/// shares its length equally between the pixels on either side; elsewhere
/// the lengths sum to the clipped length.
template <class Visit>
void trace_segment(const GridSpec& grid, Point2 p0, Point2 p1, Visit&& visit) {
    const auto clip = clip_to_grid(grid, p0, p1);
    if (!clip) return;
    const auto [t0, t1] = *clip;
    const Point2 d = p1 - p0;
    const double len = norm(d);
    const double ps = grid.pixel_size;
    const double x0 = grid.x_min();
    const double y0 = grid.y_min();

    // Next grid-line index to cross along each axis; crossing parameters are
    // computed from the line index directly so no error accumulates.
    const auto first_line = [&](double origin, double delta, double lo, double t) -> long {
        const double pos = (origin + t * delta - lo) / ps;
        return delta > 0 ? long(std::floor(pos)) + 1 : long(std::ceil(pos)) - 1;
    };
    const bool move_x = d.x != 0.0;
    const bool move_y = d.y != 0.0;
    long ix_line = move_x ? first_line(p0.x, d.x, x0, t0) : 0;
    long iy_line = move_y ? first_line(p0.y, d.y, y0, t0) : 0;
    const long step_x = d.x > 0 ? 1 : -1;
    const long step_y = d.y > 0 ? 1 : -1;
    const auto t_of_x = [&](long i) { return (x0 + double(i) * ps - p0.x) / d.x; };
    const auto t_of_y = [&](long i) { return (y0 + double(i) * ps - p0.y) / d.y; };

    // Axis-parallel segments on a grid line: index of that line, or -1.
    const auto on_line = [&](bool moving, double origin, double lo) -> long {
        if (moving) return -1;
        const double pos = (origin - lo) / ps;
        const double li = std::round(pos);
        return std::abs(pos - li) <= 1e-9 * std::max(1.0, std::abs(pos)) ? long(li) : -1;
    };
    const long split_x = on_line(move_x, p0.x, x0);
    const long split_y = on_line(move_y, p0.y, y0);
    const auto emit = [&](long px, long py, double seg) {
        const long w = long(grid.width), h = long(grid.height);
        if (split_x >= 0) {
            if (split_x > 0) visit(std::uint32_t(py * w + split_x - 1), 0.5 * seg);
            if (split_x < w) visit(std::uint32_t(py * w + split_x), 0.5 * seg);
        } else if (split_y >= 0) {
            if (split_y > 0) visit(std::uint32_t((split_y - 1) * w + px), 0.5 * seg);
            if (split_y < h) visit(std::uint32_t(split_y * w + px), 0.5 * seg);
        } else {
            visit(std::uint32_t(py * w + px), seg);
        }
    };

    double t = t0;
    while (t < t1) {
        double tx = move_x ? t_of_x(ix_line) : INFINITY;
        double ty = move_y ? t_of_y(iy_line) : INFINITY;
        // Guard against lines at or behind t (roundoff at the entry point).
        while (move_x && tx <= t) { ix_line += step_x; tx = t_of_x(ix_line); }
        while (move_y && ty <= t) { iy_line += step_y; ty = t_of_y(iy_line); }
        const double t_next = std::min({tx, ty, t1});
        if (t_next > t) {
            const double tm = 0.5 * (t + t_next);
            const double mx = (p0.x + tm * d.x - x0) / ps;
            const double my = (p0.y + tm * d.y - y0) / ps;
            const long px = std::clamp(long(std::floor(mx)), 0L, long(grid.width) - 1);
            const long py = std::clamp(long(std::floor(my)), 0L, long(grid.height) - 1);
            const double seg = (t_next - t) * len;
            if (seg > 0.0) emit(px, py, seg);
        }
        if (t_next == tx) ix_line += step_x;
        if (t_next == ty) iy_line += step_y;
        t = t_next;
    }
}

} // namespace tomopet
