#include "tomopet/event_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "tomopet/error.hpp"
#include "tomopet/parallel.hpp"
#include "tomopet/ray_trace.hpp"
#include "tomopet/serial.hpp"

namespace tomopet {

using std::numbers::pi;

// --- SimConfig -------------------------------------------------------------

void SimConfig::validate() const {
    auto fail = [](const std::string& m) { throw ValidationError("sim config: " + m); };
    if (!(p_random >= 0.0 && p_random <= 1.0)) fail("p_random must lie in [0, 1]");
    if (!(p_scatter >= 0.0 && p_scatter <= 1.0)) fail("p_scatter must lie in [0, 1]");
    if (p_random + p_scatter > 1.0) fail("p_random + p_scatter must not exceed 1");
    if (!(acollinearity_half_angle_deg >= 0.0) || !std::isfinite(acollinearity_half_angle_deg))
        fail("acollinearity half angle must be >= 0");
    if (!(hg_g > -1.0 && hg_g < 1.0)) fail("hg_g must lie in (-1, 1)");
    if (!(scan_time_s > 0.0) || !std::isfinite(scan_time_s)) fail("scan_time_s must be positive");
}

namespace {

std::string model_name(AcollinearityModel m) {
    return m == AcollinearityModel::uniform ? "uniform" : "truncated_gaussian";
}

AcollinearityModel parse_model(const std::string& s) {
    if (s == "uniform") return AcollinearityModel::uniform;
    if (s == "truncated_gaussian" || s == "gaussian") return AcollinearityModel::truncated_gaussian;
    throw ValidationError("sim config: unknown acollinearity model \"" + s + "\"");
}

} // namespace

nlohmann::json SimConfig::to_json() const {
    return {{"n_total", n_total},
            {"p_random", p_random},
            {"p_scatter", p_scatter},
            {"acollinearity_half_angle_deg", acollinearity_half_angle_deg},
            {"acollinearity", model_name(acollinearity)},
            {"hg_g", hg_g},
            {"seed", seed},
            {"scan_time_s", scan_time_s}};
}

SimConfig SimConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys{"n_total", "p_random", "p_scatter", "acollinearity_half_angle_deg",
                                             "acollinearity", "hg_g", "seed", "scan_time_s"};
    if (!j.is_object()) throw ValidationError("sim config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!kKeys.count(k)) throw ValidationError("sim config: unknown key \"" + k + "\"");
    SimConfig c;
    try {
        c.n_total = j.value("n_total", c.n_total);
        c.p_random = j.value("p_random", c.p_random);
        c.p_scatter = j.value("p_scatter", c.p_scatter);
        c.acollinearity_half_angle_deg = j.value("acollinearity_half_angle_deg", c.acollinearity_half_angle_deg);
        if (j.contains("acollinearity")) c.acollinearity = parse_model(j.at("acollinearity").get<std::string>());
        c.hg_g = j.value("hg_g", c.hg_g);
        c.seed = j.value("seed", c.seed);
        c.scan_time_s = j.value("scan_time_s", c.scan_time_s);
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("sim config: ") + ex.what());
    }
    return c;
}

std::size_t ListModeSet::count(EventKind kind) const {
    return std::size_t(std::count_if(events.begin(), events.end(), [&](const auto& e) { return e.kind == kind; }));
}

std::uint64_t Sinogram::total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

std::vector<double> Sinogram::as_double() const { return {counts.begin(), counts.end()}; }

// --- sampling primitives ---------------------------------------------------

EmissionSampler::EmissionSampler(const ActivityMap& map) : grid_(map.grid()), cdf_(map.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) {
        acc += map[i];
        cdf_[i] = acc;
    }
    if (!(acc > 0.0)) throw ValidationError("cannot sample emissions from an all-zero activity map");
}

Point2 EmissionSampler::sample(Rng& rng) const {
    const double target = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    if (it == cdf_.end()) --it;
    const auto pixel = std::size_t(it - cdf_.begin());
    const std::uint32_t ix = std::uint32_t(pixel % grid_.width);
    const std::uint32_t iy = std::uint32_t(pixel / grid_.width);
    const double ps = grid_.pixel_size;
    return {grid_.x_min() + (ix + rng.uniform()) * ps, grid_.y_min() + (iy + rng.uniform()) * ps};
}

Point2 sample_emission(const ActivityMap& map, Rng& rng) { return EmissionSampler(map).sample(rng); }

double sample_acollinearity_deviation(Rng& rng, double half_angle_deg, AcollinearityModel model) {
    if (half_angle_deg < 0.0) throw ValidationError("acollinearity half angle must be >= 0");
    if (half_angle_deg == 0.0) return 0.0;
    if (model == AcollinearityModel::uniform) return rng.uniform(-half_angle_deg, half_angle_deg);
    const double sigma = 0.5 * half_angle_deg;
    for (;;) {
        const double d = sigma * rng.normal();
        if (std::abs(d) <= half_angle_deg) return d;
    }
}

std::pair<Point2, Point2> sample_acollinear_pair(Rng& rng, double half_angle_deg, AcollinearityModel model) {
    const double phi = 2.0 * pi * rng.uniform();
    const double delta = sample_acollinearity_deviation(rng, half_angle_deg, model);
    const Point2 d1{std::cos(phi), std::sin(phi)};
    if (delta == 0.0) return {d1, Point2{-d1.x, -d1.y}};
    const double phi2 = phi + pi + delta * pi / 180.0;
    return {d1, Point2{std::cos(phi2), std::sin(phi2)}};
}

double hg_pdf(double theta, double g) {
    const double den = 1.0 + g * g - 2.0 * g * std::cos(theta);
    return (1.0 - g * g) / std::pow(den, 1.5);
}

double hg_cos_from_uniform(double xi, double g) {
    if (g == 0.0) return 2.0 * xi - 1.0;
    const double s = (1.0 - g * g) / (1.0 - g + 2.0 * g * xi);
    return std::clamp((1.0 + g * g - s * s) / (2.0 * g), -1.0, 1.0);
}

double sample_hg_deflection(Rng& rng, double g) { return std::acos(hg_cos_from_uniform(rng.uniform_closed(), g)); }

// --- scan simulation -------------------------------------------------------

namespace {

/// Distance from p along unit dir to the grid rectangle boundary (p inside).
double exit_distance(const GridSpec& g, Point2 p, Point2 d) {
    double t = INFINITY;
    if (d.x > 0) t = std::min(t, (g.x_max() - p.x) / d.x);
    if (d.x < 0) t = std::min(t, (g.x_min() - p.x) / d.x);
    if (d.y > 0) t = std::min(t, (g.y_max() - p.y) / d.y);
    if (d.y < 0) t = std::min(t, (g.y_min() - p.y) / d.y);
    return std::max(0.0, t);
}

Point2 uniform_direction(Rng& rng) {
    const double phi = 2.0 * pi * rng.uniform();
    return {std::cos(phi), std::sin(phi)};
}

struct Context {
    const Scanner& scanner;
    const SimConfig& config;
    const EmissionSampler& sampler;
    const ActivityMap& map;
};

/// Point drawn uniformly along p + t*d (t >= 0, d unit) restricted to pixels
/// with positive activity, up to the grid edge.
Point2 scatter_site(const ActivityMap& map, Point2 p, Point2 d, Rng& rng) {
    const double path = exit_distance(map.grid(), p, d);
    struct Piece {
        double start, length;
    };
    std::vector<Piece> pieces;
    double along = 0.0, support = 0.0;
    trace_segment(map.grid(), p, p + path * d, [&](std::uint32_t pixel, double len) {
        if (map[pixel] > 0.0) {
            pieces.push_back({along, len});
            support += len;
        }
        along += len;
    });
    if (pieces.empty()) return p;
    double u = rng.uniform() * support;
    for (const auto& pc : pieces) {
        if (u < pc.length) return p + (pc.start + u) * d;
        u -= pc.length;
    }
    const auto& last = pieces.back();
    return p + (last.start + last.length) * d;
}

std::optional<CoincidenceEvent> attempt(const Context& ctx, EventKind kind, Rng& rng) {
    const auto& sc = ctx.scanner;
    const auto& cfg = ctx.config;
    const std::uint32_t step = sc.rotation_step_at(cfg.scan_time_s * rng.uniform());
    CoincidenceEvent ev;
    ev.kind = kind;
    std::optional<CrystalId> c1, c2;
    switch (kind) {
    case EventKind::true_coincidence: {
        const Point2 p = ctx.sampler.sample(rng);
        const auto [d1, d2] = sample_acollinear_pair(rng, cfg.acollinearity_half_angle_deg, cfg.acollinearity);
        ev.emission_point = p;
        c1 = sc.detect_single(p, d1, step);
        if (!c1) return std::nullopt;
        c2 = sc.detect_single(p, d2, step);
        break;
    }
    case EventKind::random: {
        const Point2 p1 = ctx.sampler.sample(rng);
        const Point2 u1 = uniform_direction(rng);
        const Point2 p2 = ctx.sampler.sample(rng);
        const Point2 u2 = uniform_direction(rng);
        c1 = sc.detect_single(p1, u1, step);
        if (!c1) return std::nullopt;
        c2 = sc.detect_single(p2, u2, step);
        break;
    }
    case EventKind::scattered: {
        const Point2 p = ctx.sampler.sample(rng);
        auto [d1, d2] = sample_acollinear_pair(rng, cfg.acollinearity_half_angle_deg, cfg.acollinearity);
        ev.emission_point = p;
        if (rng.coin()) std::swap(d1, d2); // d2 is the photon that scatters
        const Point2 site = scatter_site(ctx.map, p, d2, rng);
        const double theta = sample_hg_deflection(rng, cfg.hg_g);
        const Point2 d2s = rotate(d2, rng.coin() ? theta : -theta);
        c1 = sc.detect_single(p, d1, step);
        if (!c1) return std::nullopt;
        c2 = sc.detect_single(site, d2s, step);
        break;
    }
    }
    if (!c2) return std::nullopt;
    const auto bin = sc.bin_of(*c1, *c2, step);
    if (!bin) return std::nullopt;
    ev.lor_index = *bin;
    ev.lor = sc.lors().at(*bin);
    return ev;
}

EventKind draw_kind(Rng& rng, const SimConfig& cfg) {
    const double u = rng.uniform();
    if (u < cfg.p_random) return EventKind::random;
    if (u < cfg.p_random + cfg.p_scatter) return EventKind::scattered;
    return EventKind::true_coincidence;
}

std::vector<CoincidenceEvent> simulate_stream(const Context& ctx, std::uint64_t stream, std::uint64_t n_events) {
    Rng rng(ctx.config.seed, stream + 1);
    std::vector<CoincidenceEvent> out;
    out.reserve(n_events);
    for (std::uint64_t i = 0; i < n_events; ++i) {
        const EventKind kind = draw_kind(rng, ctx.config);
        std::uint32_t tries = 0;
        for (;;) {
            if (auto ev = attempt(ctx, kind, rng)) {
                out.push_back(*ev);
                break;
            }
            if (++tries >= kMaxAttemptsPerEvent)
                throw SimulationError("no coincidence detected after " + std::to_string(kMaxAttemptsPerEvent) +
                                      " attempts; the scanner cannot see this activity map");
        }
    }
    return out;
}

void check_inputs(const ActivityMap& map, const Scanner& scanner, const SimConfig& config) {
    config.validate();
    if (!(map.total_activity() > 0.0)) throw ValidationError("cannot simulate an all-zero activity map");
    const double fov = scanner.config().fov_size_mm;
    if (map.width() * map.pixel_size() > fov + 1e-9 || map.height() * map.pixel_size() > fov + 1e-9)
        throw ValidationError("activity map extends beyond the scanner field of view");
}

ListModeSet assemble(std::vector<std::vector<CoincidenceEvent>>& streams, const Scanner& scanner,
                     const SimConfig& config) {
    ListModeSet set;
    set.sim_config = config;
    set.scanner_hash = scanner.hash();
    set.events.reserve(config.n_total);
    for (auto& s : streams) set.events.insert(set.events.end(), s.begin(), s.end());
    return set;
}

std::uint64_t stream_size(std::uint64_t stream, std::uint64_t n_total) {
    return std::min(kEventsPerStream, n_total - stream * kEventsPerStream);
}

} // namespace

ListModeSet simulate_scan(const ActivityMap& map, const Scanner& scanner, const SimConfig& config) {
    check_inputs(map, scanner, config);
    const EmissionSampler sampler(map);
    const Context ctx{scanner, config, sampler, map};
    const std::uint64_t n_streams = (config.n_total + kEventsPerStream - 1) / kEventsPerStream;
    std::vector<std::vector<CoincidenceEvent>> streams(n_streams);
    ExceptionSlot slot;
    const auto ns = std::ptrdiff_t(n_streams);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t s = 0; s < ns; ++s)
        slot.run([&] { streams[std::size_t(s)] = simulate_stream(ctx, std::uint64_t(s), stream_size(s, config.n_total)); });
    slot.rethrow_if_set();
    return assemble(streams, scanner, config);
}

namespace serial {

ListModeSet simulate_scan(const ActivityMap& map, const Scanner& scanner, const SimConfig& config) {
    check_inputs(map, scanner, config);
    const EmissionSampler sampler(map);
    const Context ctx{scanner, config, sampler, map};
    const std::uint64_t n_streams = (config.n_total + kEventsPerStream - 1) / kEventsPerStream;
    std::vector<std::vector<CoincidenceEvent>> streams;
    for (std::uint64_t s = 0; s < n_streams; ++s)
        streams.push_back(simulate_stream(ctx, s, stream_size(s, config.n_total)));
    return assemble(streams, scanner, config);
}

} // namespace serial

Sinogram bin_to_sinogram(const ListModeSet& events, const Scanner& scanner) {
    const auto& table = scanner.lors();
    Sinogram sino;
    sino.counts.assign(table.size(), 0);
    for (const auto& e : events.events) {
        if (e.lor_index >= table.size() || !(table.at(e.lor_index) == e.lor))
            throw DataError("event LOR is not a bin of this scanner");
        ++sino.counts[e.lor_index];
    }
    return sino;
}

// --- files -----------------------------------------------------------------

Bytes encode_plst(const ListModeSet& set) {
    ByteWriter w;
    w.magic("PLST", 1);
    w.raw(set.scanner_hash);
    const auto& c = set.sim_config;
    w.u64(c.n_total);
    w.f64(c.p_random);
    w.f64(c.p_scatter);
    w.f64(c.acollinearity_half_angle_deg);
    w.u8(std::uint8_t(c.acollinearity));
    w.f64(c.hg_g);
    w.u64(c.seed);
    w.f64(c.scan_time_s);
    w.u64(set.events.size());
    for (const auto& e : set.events) {
        w.u32(e.lor_index);
        w.u8(std::uint8_t(e.kind));
    }
    return std::move(w).bytes();
}

ListModeSet decode_plst(std::span<const std::uint8_t> bytes, const Scanner& scanner) {
    ByteReader r(bytes, "PLST");
    r.expect_magic("PLST", 1);
    ListModeSet set;
    const auto h = r.raw(32);
    std::copy(h.begin(), h.end(), set.scanner_hash.begin());
    if (set.scanner_hash != scanner.hash()) throw GeometryMismatch("PLST: geometry mismatch (scanner hash differs)");
    auto& c = set.sim_config;
    c.n_total = r.u64();
    c.p_random = r.f64();
    c.p_scatter = r.f64();
    c.acollinearity_half_angle_deg = r.f64();
    const auto model = r.u8();
    if (model > 1) throw FormatError("PLST: unknown acollinearity model");
    c.acollinearity = AcollinearityModel(model);
    c.hg_g = r.f64();
    c.seed = r.u64();
    c.scan_time_s = r.f64();
    const std::uint64_t n = r.u64();
    if (r.remaining() != n * 5) throw FormatError("PLST: record count does not match payload");
    set.events.resize(n);
    for (auto& e : set.events) {
        e.lor_index = r.u32();
        const auto kind = r.u8();
        if (kind > 2) throw FormatError("PLST: unknown event kind");
        e.kind = EventKind(kind);
        if (e.lor_index >= scanner.lors().size()) throw DataError("PLST: record references a missing LOR bin");
        e.lor = scanner.lors().at(e.lor_index);
    }
    return set;
}

Bytes encode_psin(const Sinogram& sino) {
    ByteWriter w;
    w.magic("PSIN", 1);
    w.u32(std::uint32_t(sino.counts.size()));
    for (auto c : sino.counts) w.u32(c);
    return std::move(w).bytes();
}

Sinogram decode_psin(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "PSIN");
    r.expect_magic("PSIN", 1);
    const std::uint32_t n = r.u32();
    if (r.remaining() != std::uint64_t(n) * 4) throw FormatError("PSIN: bin count does not match payload");
    Sinogram s;
    s.counts.resize(n);
    for (auto& c : s.counts) c = r.u32();
    return s;
}

} // namespace tomopet
