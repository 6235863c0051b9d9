#include "tomopet/scanner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "tomopet/error.hpp"

namespace tomopet {

using std::numbers::pi;

// --- configuration ---------------------------------------------------------

std::vector<bool> ScannerConfig::default_active_mask(std::uint32_t n_sectors) {
    std::vector<bool> mask(n_sectors, false);
    if (n_sectors == 20) {
        for (std::uint32_t k = 0; k < 6; ++k) mask[k] = mask[k + 10] = true;
        return mask;
    }
    const std::uint32_t half = n_sectors / 2;
    const auto block = std::max<std::uint32_t>(1, std::uint32_t(std::lround(0.3 * n_sectors)));
    for (std::uint32_t k = 0; k < n_sectors; ++k)
        if (k < block || (k >= half && k < half + block)) mask[k] = true;
    return mask;
}

ScannerConfig ScannerConfig::all_active(ScannerConfig base) {
    base.active_sectors.assign(base.n_sectors, true);
    return base;
}

std::uint32_t ScannerConfig::n_active_sectors() const {
    return std::uint32_t(std::count(active_sectors.begin(), active_sectors.end(), true));
}

void ScannerConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ValidationError("scanner config: " + msg); };
    constexpr std::uint32_t kMax = std::numeric_limits<std::uint16_t>::max();
    if (n_sectors < 2 || n_sectors > kMax) fail("n_sectors must be in [2, 65535]");
    if (crystals_per_layer < 1 || crystals_per_layer > kMax) fail("crystals_per_layer must be in [1, 65535]");
    if (n_layers < 1 || n_layers > kMax) fail("n_layers must be in [1, 65535]");
    if (!(ring_radius_mm > 0.0) || !std::isfinite(ring_radius_mm)) fail("ring_radius_mm must be positive");
    if (!(crystal_width_mm > 0.0) || !std::isfinite(crystal_width_mm)) fail("crystal_width_mm must be positive");
    if (!(layer_pitch_mm >= 0.0) || (n_layers > 1 && !(layer_pitch_mm > 0.0)))
        fail("layer_pitch_mm must be positive when there is more than one layer");
    if (!(fov_size_mm > 0.0)) fail("fov_size_mm must be positive");
    if (!(ring_radius_mm > fov_size_mm * std::sqrt(0.5)))
        fail("ring_radius_mm must exceed the field-of-view half-diagonal");
    if (!(omega0_rad_s > 0.0) || !std::isfinite(omega0_rad_s)) fail("omega0_rad_s must be positive");
    if (n_rotation_steps < 1) fail("n_rotation_steps must be >= 1");
    if (active_sectors.size() != n_sectors) fail("active_sectors must have n_sectors entries");
    if (crystals_per_layer * crystal_width_mm / ring_radius_mm > 2.0 * pi / n_sectors)
        fail("crystals of one sector overlap the neighbouring sector");
    if (n_active_sectors() < 2) fail("at least two sectors must be active");

    // Active sectors confined to an open half-circle admit no line of response
    // through the centre region: require every circular gap <= pi.
    const double step = 2.0 * pi / n_sectors;
    std::vector<std::uint32_t> act;
    for (std::uint32_t k = 0; k < n_sectors; ++k)
        if (active_sectors[k]) act.push_back(k);
    double max_gap = 0.0;
    for (std::size_t i = 0; i < act.size(); ++i) {
        const std::uint32_t next = act[(i + 1) % act.size()];
        const std::uint32_t gap = (next + n_sectors - act[i]) % n_sectors;
        max_gap = std::max(max_gap, (gap == 0 ? n_sectors : gap) * step);
    }
    if (max_gap > pi + 1e-9) fail("active sectors all lie on one half-circle");
}

nlohmann::json ScannerConfig::to_json() const {
    nlohmann::json mask = nlohmann::json::array();
    for (bool b : active_sectors) mask.push_back(bool(b));
    return {
        {"n_sectors", n_sectors},
        {"crystals_per_layer", crystals_per_layer},
        {"n_layers", n_layers},
        {"ring_radius_mm", ring_radius_mm},
        {"layer_pitch_mm", layer_pitch_mm},
        {"crystal_width_mm", crystal_width_mm},
        {"fov_size_mm", fov_size_mm},
        {"active_sectors", mask},
        {"omega0_rad_s", omega0_rad_s},
        {"n_rotation_steps", n_rotation_steps},
    };
}

ScannerConfig ScannerConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys{"n_sectors",        "crystals_per_layer", "n_layers",
                                             "ring_radius_mm",   "layer_pitch_mm",     "crystal_width_mm",
                                             "fov_size_mm",      "active_sectors",     "omega0_rad_s",
                                             "n_rotation_steps"};
    if (!j.is_object()) throw ValidationError("scanner config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!kKeys.count(k)) throw ValidationError("scanner config: unknown key \"" + k + "\"");
    ScannerConfig c;
    try {
        c.n_sectors = j.value("n_sectors", c.n_sectors);
        c.crystals_per_layer = j.value("crystals_per_layer", c.crystals_per_layer);
        c.n_layers = j.value("n_layers", c.n_layers);
        c.ring_radius_mm = j.value("ring_radius_mm", c.ring_radius_mm);
        c.layer_pitch_mm = j.value("layer_pitch_mm", c.layer_pitch_mm);
        c.crystal_width_mm = j.value("crystal_width_mm", c.crystal_width_mm);
        c.fov_size_mm = j.value("fov_size_mm", c.fov_size_mm);
        c.omega0_rad_s = j.value("omega0_rad_s", c.omega0_rad_s);
        c.n_rotation_steps = j.value("n_rotation_steps", c.n_rotation_steps);
        if (j.contains("active_sectors")) {
            c.active_sectors.clear();
            for (const auto& b : j.at("active_sectors")) c.active_sectors.push_back(b.get<bool>());
        } else {
            c.active_sectors = default_active_mask(c.n_sectors);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("scanner config: ") + ex.what());
    }
    return c;
}

Digest ScannerConfig::hash() const { return sha256(to_json().dump()); }

// --- geometry helpers ------------------------------------------------------

namespace {

/// Liang-Barsky clip of p0 + t*(p1 - p0), t in [0, 1], against an open box.
std::optional<std::pair<double, double>> clip_segment(Point2 p0, Point2 p1, Point2 lo, Point2 hi) {
    double t0 = 0.0, t1 = 1.0;
    const double d[2] = {p1.x - p0.x, p1.y - p0.y};
    const double o[2] = {p0.x, p0.y};
    const double l[2] = {lo.x, lo.y};
    const double h[2] = {hi.x, hi.y};
    for (int a = 0; a < 2; ++a) {
        if (d[a] == 0.0) {
            if (o[a] <= l[a] || o[a] >= h[a]) return std::nullopt;
            continue;
        }
        double ta = (l[a] - o[a]) / d[a];
        double tb = (h[a] - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (!(t1 > t0)) return std::nullopt;
    return std::make_pair(t0, t1);
}

} // namespace

bool segment_crosses_box(Point2 p0, Point2 p1, Point2 lo, Point2 hi) {
    return clip_segment(p0, p1, lo, hi).has_value();
}

namespace {

/// Ray origin + t*dir (t > 0) against segment p0-p1; returns t or +inf.
double ray_segment(Point2 origin, Point2 dir, const FaceSegment& f) {
    const Point2 e = f.p1 - f.p0;
    const double den = cross(dir, e);
    if (den == 0.0) return INFINITY;
    const Point2 w = f.p0 - origin;
    const double t = cross(w, e) / den;
    const double u = cross(w, dir) / den;
    if (t <= 1e-12 || u < 0.0 || u > 1.0) return INFINITY;
    return t;
}

} // namespace

// --- LorTable --------------------------------------------------------------

LorTable::LorTable(CrystalLayout layout, std::vector<std::uint64_t> keys) : layout_(layout), keys_(std::move(keys)) {}

std::uint64_t LorTable::pack(const Lor& lor) const {
    const std::uint64_t n = layout_.total();
    return (std::uint64_t(lor.rotation_step) * n + layout_.index(lor.a)) * n + layout_.index(lor.b);
}

Lor LorTable::at(std::size_t bin) const {
    if (bin >= keys_.size()) throw DataError("LOR bin " + std::to_string(bin) + " out of range");
    const std::uint64_t n = layout_.total();
    const std::uint64_t k = keys_[bin];
    Lor lor;
    lor.b = layout_.id(std::uint32_t(k % n));
    lor.a = layout_.id(std::uint32_t((k / n) % n));
    lor.rotation_step = std::uint32_t(k / (n * n));
    return lor;
}

std::optional<std::uint32_t> LorTable::find(const Lor& lor) const {
    if (!(lor.a < lor.b)) return std::nullopt;
    const std::uint64_t k = pack(lor);
    auto it = std::lower_bound(keys_.begin(), keys_.end(), k);
    if (it == keys_.end() || *it != k) return std::nullopt;
    return std::uint32_t(it - keys_.begin());
}

std::vector<Lor> LorTable::to_vector() const {
    std::vector<Lor> out;
    out.reserve(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) out.push_back(at(i));
    return out;
}

// --- Scanner ---------------------------------------------------------------

Scanner::Scanner(ScannerConfig config) : config_(std::move(config)) {
    config_.validate();
    hash_ = config_.hash();
    layout_ = {config_.n_sectors, config_.n_layers, config_.crystals_per_layer};
    sector_angle_ = 2.0 * pi / config_.n_sectors;

    const std::uint32_t n = layout_.total();
    centers_.resize(n);
    faces_.resize(n);
    active_flag_.assign(n, false);
    const double pitch = config_.crystal_width_mm / config_.ring_radius_mm;
    const double half_w = 0.5 * config_.crystal_width_mm;
    for (std::uint32_t i = 0; i < n; ++i) {
        const CrystalId id = layout_.id(i);
        const double theta = id.sector * sector_angle_ + (id.crystal - 0.5 * (config_.crystals_per_layer - 1)) * pitch;
        const double r = layer_radius(id.layer);
        const Point2 radial{std::cos(theta), std::sin(theta)};
        const Point2 tangent{-radial.y, radial.x};
        centers_[i] = r * radial;
        faces_[i] = {centers_[i] - half_w * tangent, centers_[i] + half_w * tangent};
        if (config_.active_sectors[id.sector]) {
            active_flag_[i] = true;
            active_.push_back(i);
        }
    }

    // LOR bins: canonical active pairs whose face-centre chord crosses the
    // field of view, per rotation step.
    const double h = 0.5 * config_.fov_size_mm;
    const Point2 lo{-h, -h}, hi{h, h};
    const std::uint32_t n_steps = config_.n_rotation_steps;
    std::vector<std::vector<std::uint64_t>> per_step(n_steps);
    const auto steps = std::ptrdiff_t(n_steps);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t s = 0; s < steps; ++s) {
        const double angle = rotation_angle(std::uint32_t(s));
        std::vector<Point2> rc(active_.size());
        for (std::size_t i = 0; i < active_.size(); ++i) rc[i] = rotate(centers_[active_[i]], angle);
        auto& keys = per_step[std::size_t(s)];
        for (std::size_t i = 0; i < active_.size(); ++i)
            for (std::size_t j = i + 1; j < active_.size(); ++j)
                if (segment_crosses_box(rc[i], rc[j], lo, hi))
                    keys.push_back((std::uint64_t(s) * n + active_[i]) * n + active_[j]);
    }
    std::vector<std::uint64_t> keys;
    for (auto& k : per_step) keys.insert(keys.end(), k.begin(), k.end());
    if (keys.empty()) throw ValidationError("scanner config: no line of response crosses the field of view");
    lors_ = LorTable(layout_, std::move(keys));
}

Scanner build_scanner(const ScannerConfig& config) { return Scanner(config); }

std::vector<Lor> enumerate_lors(const Scanner& scanner) { return scanner.lors().to_vector(); }

void Scanner::check_id(const CrystalId& id) const {
    if (id.sector >= config_.n_sectors || id.layer >= config_.n_layers || id.crystal >= config_.crystals_per_layer)
        throw ValidationError("crystal id out of range");
}

std::uint32_t Scanner::crystal_index(const CrystalId& id) const {
    check_id(id);
    return layout_.index(id);
}

bool Scanner::is_active(const CrystalId& id) const { return active_flag_[crystal_index(id)]; }

double Scanner::layer_radius(std::uint32_t layer) const {
    return config_.ring_radius_mm + layer * config_.layer_pitch_mm;
}

double Scanner::rotation_angle(std::uint32_t step) const {
    return 2.0 * pi * double(step % config_.n_rotation_steps) / config_.n_rotation_steps;
}

std::uint32_t Scanner::rotation_step_at(double time_s) const {
    const double turns = config_.omega0_rad_s * time_s / (2.0 * pi);
    const double pos = (turns - std::floor(turns)) * config_.n_rotation_steps;
    const auto s = std::uint32_t(std::floor(pos + 1e-9 * std::max(1.0, pos)));
    return s % config_.n_rotation_steps;
}

Point2 Scanner::crystal_center(const CrystalId& id, std::uint32_t step) const {
    return rotate(centers_[crystal_index(id)], rotation_angle(step));
}

FaceSegment Scanner::crystal_face(const CrystalId& id, std::uint32_t step) const {
    const auto& f = faces_[crystal_index(id)];
    const double a = rotation_angle(step);
    return {rotate(f.p0, a), rotate(f.p1, a)};
}

std::optional<std::uint32_t> Scanner::hit_in_scanner_frame(Point2 o, Point2 d, double* t_hit) const {
    double best_t = INFINITY;
    std::optional<std::uint32_t> best;
    const std::uint32_t n_sec = config_.n_sectors;
    const std::uint32_t cpl = config_.crystals_per_layer;
    const double oo = dot(o, o);
    const double b = dot(o, d);
    for (std::uint32_t layer = 0; layer < config_.n_layers; ++layer) {
        const double r = layer_radius(layer);
        const auto test = [&](std::uint32_t sector) {
            if (!config_.active_sectors[sector]) return;
            const std::uint32_t base = layout_.index({std::uint16_t(sector), std::uint16_t(layer), 0});
            for (std::uint32_t c = 0; c < cpl; ++c) {
                const double t = ray_segment(o, d, faces_[base + c]);
                if (t < best_t) {
                    best_t = t;
                    best = base + c;
                }
            }
        };
        if (oo >= r * r) {
            for (std::uint32_t s = 0; s < n_sec; ++s) test(s);
            continue;
        }
        // Exit point of the layer circle; a face hit lies within one sector of it.
        const double t_exit = -b + std::sqrt(b * b - (oo - r * r));
        const Point2 p = o + t_exit * d;
        double psi = std::atan2(p.y, p.x);
        if (psi < 0) psi += 2.0 * pi;
        const auto k = std::uint32_t(std::lround(psi / sector_angle_)) % n_sec;
        test((k + n_sec - 1) % n_sec);
        test(k);
        test((k + 1) % n_sec);
    }
    if (t_hit) *t_hit = best_t;
    return best;
}

std::optional<CrystalId> Scanner::detect_single(Point2 origin, Point2 dir, std::uint32_t step) const {
    const double a = -rotation_angle(step);
    const auto hit = hit_in_scanner_frame(rotate(origin, a), rotate(dir, a), nullptr);
    if (!hit) return std::nullopt;
    return layout_.id(*hit);
}

std::optional<std::pair<CrystalId, CrystalId>> Scanner::detect_pair(Point2 origin, Point2 dir1, Point2 dir2,
                                                                   std::uint32_t step) const {
    const auto h1 = detect_single(origin, dir1, step);
    if (!h1) return std::nullopt;
    const auto h2 = detect_single(origin, dir2, step);
    if (!h2 || *h1 == *h2) return std::nullopt;
    return std::make_pair(*h1, *h2);
}

std::optional<std::uint32_t> Scanner::bin_of(const CrystalId& c1, const CrystalId& c2, std::uint32_t step) const {
    if (c1 == c2) return std::nullopt;
    Lor lor{std::min(c1, c2), std::max(c1, c2), step % config_.n_rotation_steps};
    return lors_.find(lor);
}

std::pair<Point2, Point2> Scanner::lor_endpoints(const Lor& lor) const {
    return {crystal_center(lor.a, lor.rotation_step), crystal_center(lor.b, lor.rotation_step)};
}

bool Scanner::lor_unobstructed(const Lor& lor) const {
    const auto [pa, pb] = lor_endpoints(lor);
    const double h = 0.5 * config_.fov_size_mm;
    const auto range = clip_segment(pa, pb, {-h, -h}, {h, h});
    if (!range) return false;
    const Point2 d = pb - pa;
    const Point2 mid = pa + (0.5 * (range->first + range->second)) * d;
    const auto hit_b = detect_single(mid, d, lor.rotation_step);
    const auto hit_a = detect_single(mid, -1.0 * d, lor.rotation_step);
    return hit_a == lor.a && hit_b == lor.b;
}

} // namespace tomopet
