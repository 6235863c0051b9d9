#include <cmath>

#include "tomopet/error.hpp"
#include "tomopet/serial.hpp"

namespace tomopet::serial {

std::vector<double> forward_project(const SystemMatrix& a, std::span<const double> x) {
    if (x.size() != a.n_pixels()) throw ValidationError("forward_project: dimension mismatch");
    std::vector<double> out(a.n_bins(), 0.0);
    for (std::size_t i = 0; i < a.n_bins(); ++i)
        for (const auto& e : a.row(i)) out[i] += e.weight * x[e.pixel];
    return out;
}

std::vector<double> back_project(const SystemMatrix& a, std::span<const double> y) {
    if (y.size() != a.n_bins()) throw ValidationError("back_project: dimension mismatch");
    std::vector<double> out(a.n_pixels(), 0.0);
    for (std::size_t i = 0; i < a.n_bins(); ++i)
        for (const auto& e : a.row(i)) out[e.pixel] += e.weight * y[i];
    return out;
}

std::vector<double> mlem_step(const SystemMatrix& a, std::span<const double> sens, std::span<const double> y,
                              std::span<const double> x, double epsilon) {
    if (sens.size() != a.n_pixels() || x.size() != a.n_pixels() || y.size() != a.n_bins())
        throw ValidationError("mlem_step: dimension mismatch");
    const auto ax = serial::forward_project(a, x);
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] > 0.0 ? y[i] / (ax[i] + epsilon) : 0.0;
    const auto back = serial::back_project(a, r);
    std::vector<double> next(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) next[j] = sens[j] > 0.0 ? (x[j] / sens[j]) * back[j] : 0.0;
    return next;
}

std::optional<CrystalId> detect_single(const Scanner& scanner, Point2 origin, Point2 dir, std::uint32_t step) {
    double best_t = INFINITY;
    std::optional<CrystalId> best;
    const auto& layout = scanner.layout();
    for (std::uint32_t idx : scanner.active_crystals()) {
        const CrystalId id = layout.id(idx);
        const FaceSegment f = scanner.crystal_face(id, step);
        const Point2 e = f.p1 - f.p0;
        const double den = cross(dir, e);
        if (den == 0.0) continue;
        const Point2 w = f.p0 - origin;
        const double t = cross(w, e) / den;
        const double u = cross(w, dir) / den;
        if (t > 1e-12 && u >= 0.0 && u <= 1.0 && t < best_t) {
            best_t = t;
            best = id;
        }
    }
    return best;
}

} // namespace tomopet::serial
