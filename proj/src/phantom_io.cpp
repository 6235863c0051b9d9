#include "tomopet/phantom_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

#include "tomopet/error.hpp"

namespace tomopet {

namespace fs = std::filesystem;

// --- PIMG ------------------------------------------------------------------

Bytes encode_pimg(const Image& image) {
    ByteWriter w;
    w.magic("PIMG", 1);
    w.u32(image.width());
    w.u32(image.height());
    w.f32(float(image.pixel_size()));
    for (double v : image.values()) w.f32(float(v));
    return std::move(w).bytes();
}

Image decode_pimg(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "PIMG");
    r.expect_magic("PIMG", 1);
    GridSpec grid;
    grid.width = r.u32();
    grid.height = r.u32();
    grid.pixel_size = double(r.f32());
    grid.validate();
    if (r.remaining() != grid.size() * 4)
        throw FormatError("PIMG: payload holds " + std::to_string(r.remaining()) + " bytes, header declares " +
                          std::to_string(grid.size()) + " pixels");
    std::vector<double> values(grid.size());
    for (auto& v : values) v = double(r.f32());
    return Image(grid, std::move(values));
}

void save_image(const fs::path& path, const Image& image) { write_file(path, encode_pimg(image)); }

ActivityMap load_image(const fs::path& path) { return ActivityMap(decode_pimg(read_file(path))); }

Image load_signed_image(const fs::path& path) { return decode_pimg(read_file(path)); }

// --- phantoms --------------------------------------------------------------

PhantomKind parse_phantom_kind(std::string_view name) {
    if (name == "disk") return PhantomKind::disk;
    if (name == "shepp_logan" || name == "shepp-logan") return PhantomKind::shepp_logan;
    if (name == "annulus") return PhantomKind::annulus;
    throw ValidationError("unknown phantom kind \"" + std::string(name) + "\"");
}

std::string_view to_string(PhantomKind kind) {
    switch (kind) {
    case PhantomKind::disk: return "disk";
    case PhantomKind::shepp_logan: return "shepp_logan";
    case PhantomKind::annulus: return "annulus";
    }
    return "?";
}

namespace {

struct Ellipse {
    double intensity, a, b, x0, y0, phi_deg;
};

// Shepp & Logan (1974), original intensities.
constexpr std::array<Ellipse, 10> kSheppLogan{{
    {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},
    {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
    {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0},
    {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
    {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0},
    {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
    {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0},
    {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
    {0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0},
    {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
}};

double shepp_logan_at(double xn, double yn) {
    double v = 0.0;
    for (const auto& e : kSheppLogan) {
        const double phi = e.phi_deg * std::numbers::pi / 180.0;
        const double dx = xn - e.x0;
        const double dy = yn - e.y0;
        const double u = std::cos(phi) * dx + std::sin(phi) * dy;
        const double w = -std::sin(phi) * dx + std::cos(phi) * dy;
        if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.intensity;
    }
    return v;
}

} // namespace

ActivityMap make_synthetic_phantom(PhantomKind kind, std::uint32_t width, std::uint32_t height, double pixel_size,
                                   const PhantomParams& params) {
    if (width < 8 || height < 8) throw ValidationError("synthetic phantoms need width, height >= 8");
    GridSpec grid{width, height, pixel_size};
    grid.validate();
    if (!(params.amplitude >= 0.0) || !std::isfinite(params.amplitude))
        throw ValidationError("phantom amplitude must be nonnegative");

    const double limit = grid.half_diagonal();
    if (kind != PhantomKind::shepp_logan) {
        if (params.radius_mm < 0.0 || params.radius_mm > limit)
            throw ValidationError("phantom radius " + std::to_string(params.radius_mm) +
                                  " mm exceeds the grid half-diagonal " + std::to_string(limit) + " mm");
        if (kind == PhantomKind::annulus && (params.inner_radius_mm < 0.0 || params.inner_radius_mm > params.radius_mm))
            throw ValidationError("annulus inner radius must lie in [0, radius]");
    }

    std::vector<double> values(grid.size(), 0.0);
    const double half_w = 0.5 * width * pixel_size;
    const double half_h = 0.5 * height * pixel_size;
    for (std::uint32_t iy = 0; iy < height; ++iy) {
        for (std::uint32_t ix = 0; ix < width; ++ix) {
            const Point2 c = grid.pixel_center(ix, iy);
            double v = 0.0;
            switch (kind) {
            case PhantomKind::disk: {
                const double r = std::hypot(c.x - params.center_x_mm, c.y - params.center_y_mm);
                v = r < params.radius_mm ? params.amplitude : 0.0;
                break;
            }
            case PhantomKind::annulus: {
                const double r = std::hypot(c.x - params.center_x_mm, c.y - params.center_y_mm);
                v = (r < params.radius_mm && r >= params.inner_radius_mm) ? params.amplitude : 0.0;
                break;
            }
            case PhantomKind::shepp_logan:
                v = std::max(0.0, params.amplitude * shepp_logan_at(c.x / half_w, c.y / half_h));
                break;
            }
            values[std::size_t(iy) * width + ix] = v;
        }
    }
    return ActivityMap(grid, std::move(values));
}

// --- volumes ---------------------------------------------------------------

PhantomVolume::PhantomVolume(std::vector<ActivityMap> slices) : slices_(std::move(slices)) {
    if (slices_.empty()) throw ValidationError("phantom volume has no slices");
    for (const auto& s : slices_) {
        if (!(s.grid() == slices_.front().grid()))
            throw ValidationError("phantom volume slices must share width, height and pixel size");
        activity_.push_back(s.total_activity());
    }
}

PhantomVolume PhantomVolume::load_directory(const fs::path& dir, std::vector<fs::path>* paths) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".pimg") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ValidationError("no .pimg slices in " + dir.string());
    std::vector<ActivityMap> slices;
    for (const auto& f : files) slices.push_back(load_image(f));
    if (paths) *paths = files;
    return PhantomVolume(std::move(slices));
}

std::vector<std::uint64_t> apportion_events(std::span<const double> weights, std::uint64_t n_total) {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("slice activities must be finite and >= 0");
        sum += w;
    }
    if (!(sum > 0.0)) throw ValidationError("event budget undefined: total activity is zero");

    const std::size_t n = weights.size();
    std::vector<std::uint64_t> counts(n);
    std::vector<long double> frac(n);
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const long double quota = (long double)n_total * weights[i] / sum;
        const long double fl = std::floor(quota);
        counts[i] = std::uint64_t(fl);
        frac[i] = quota - fl;
        assigned += counts[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    // Rounding of the quotas can leave the floor sum one off in either direction.
    while (assigned > n_total) {
        for (auto it = order.rbegin(); it != order.rend() && assigned > n_total; ++it)
            if (counts[*it] > 0) { --counts[*it]; --assigned; }
    }
    for (std::size_t k = 0; assigned < n_total; k = (k + 1) % n) {
        if (weights[order[k]] > 0.0) { ++counts[order[k]]; ++assigned; }
    }
    return counts;
}

std::vector<std::uint64_t> slice_event_budget(const PhantomVolume& volume, std::uint64_t n_total) {
    return apportion_events(volume.per_slice_activity(), n_total);
}

// --- manifest --------------------------------------------------------------

namespace {

std::string split_name(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ValidationError("manifest split must be \"train\" or \"test\", got \"" + s + "\"");
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

} // namespace

nlohmann::json DatasetManifest::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json j;
        j["input_lpet_path"] = e.input_lpet_path;
        j["input_mri_path"] = e.input_mri_path ? nlohmann::json(*e.input_mri_path) : nlohmann::json(nullptr);
        j["ground_truth_path"] = e.ground_truth_path;
        j["sim_config_id"] = e.sim_config_id;
        j["split"] = split_name(e.split);
        arr.push_back(std::move(j));
    }
    return nlohmann::json{{"entries", std::move(arr)}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        for (const auto& je : j.at("entries")) {
            ManifestEntry e;
            e.input_lpet_path = je.at("input_lpet_path").get<std::string>();
            if (je.contains("input_mri_path") && !je.at("input_mri_path").is_null())
                e.input_mri_path = je.at("input_mri_path").get<std::string>();
            e.ground_truth_path = je.at("ground_truth_path").get<std::string>();
            e.sim_config_id = je.at("sim_config_id").get<std::string>();
            e.split = parse_split(je.at("split").get<std::string>());
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("manifest: ") + ex.what());
    }
    return m;
}

void DatasetManifest::validate(const fs::path& base) const {
    std::map<std::pair<std::string, std::string>, Split> seen;
    for (const auto& e : entries) {
        for (const auto* p : {&e.input_lpet_path, &e.ground_truth_path}) {
            const auto path = resolve(base, *p);
            if (!fs::is_regular_file(path)) throw ValidationError("manifest references missing file " + path.string());
            (void)decode_pimg(read_file(path));
        }
        if (e.input_mri_path) {
            const auto path = resolve(base, *e.input_mri_path);
            if (!fs::is_regular_file(path)) throw ValidationError("manifest references missing file " + path.string());
            (void)decode_pimg(read_file(path));
        }
        const auto key = std::make_pair(e.input_lpet_path, e.ground_truth_path);
        auto [it, inserted] = seen.emplace(key, e.split);
        if (!inserted && it->second != e.split)
            throw ValidationError("manifest entry " + e.input_lpet_path + " appears in both train and test");
    }
}

void DatasetManifest::save(const fs::path& path) const { write_text_file(path, to_json().dump(2) + "\n"); }

DatasetManifest DatasetManifest::load(const fs::path& path) {
    const auto bytes = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("manifest: ") + ex.what());
    }
    return from_json(j);
}

} // namespace tomopet
