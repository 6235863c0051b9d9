#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tomopet/hashing.hpp"
#include "tomopet/image.hpp"

namespace tomopet {

/// Rotating, partially equipped 2D ring scanner.
///
/// Sector k is centred at angle 2*pi*k/n_sectors. Each sector holds
/// n_layers concentric layers of crystals_per_layer crystals; layer l sits at
/// radius ring_radius + l * layer_pitch. Crystal faces are flat segments of
/// length crystal_width, tangent to their layer circle, with the same angular
/// pitch crystal_width / ring_radius in every layer. The field of view is the
/// square [-fov/2, fov/2]^2 in the lab frame.
struct ScannerConfig {
    std::uint32_t n_sectors = 20;
    std::uint32_t crystals_per_layer = 8;
    std::uint32_t n_layers = 2;
    double ring_radius_mm = 200.0;
    double layer_pitch_mm = 10.0;
    double crystal_width_mm = 6.0;
    double fov_size_mm = 256.0;
    std::vector<bool> active_sectors = default_active_mask(20);
    double omega0_rad_s = 2.0 * 3.14159265358979323846 / 600.0;
    std::uint32_t n_rotation_steps = 180;

    /// 12 of 20 sectors: 0-5 and 10-15 (six on each side). For other sector
    /// counts, the same pattern scaled: two opposite blocks of 30% each.
    static std::vector<bool> default_active_mask(std::uint32_t n_sectors);
    static ScannerConfig all_active(ScannerConfig base);

    std::uint32_t n_active_sectors() const;
    void validate() const;

    nlohmann::json to_json() const;
    /// Missing keys take their defaults.
    static ScannerConfig from_json(const nlohmann::json& j);
    /// SHA-256 of the canonical JSON form.
    Digest hash() const;
};

struct CrystalId {
    std::uint16_t sector = 0;
    std::uint16_t layer = 0;
    std::uint16_t crystal = 0;

    friend auto operator<=>(const CrystalId&, const CrystalId&) = default;
};

/// Canonical line of response: a < b under (sector, layer, crystal) order.
struct Lor {
    CrystalId a;
    CrystalId b;
    std::uint32_t rotation_step = 0;

    friend bool operator==(const Lor&, const Lor&) = default;
};

struct FaceSegment {
    Point2 p0;
    Point2 p1;
};

/// Crystal layout used to convert between CrystalId and linear indices.
struct CrystalLayout {
    std::uint32_t n_sectors = 0;
    std::uint32_t n_layers = 0;
    std::uint32_t crystals_per_layer = 0;

    std::uint32_t total() const { return n_sectors * n_layers * crystals_per_layer; }
    /// (sector * n_layers + layer) * crystals_per_layer + crystal; increasing
    /// in the (sector, layer, crystal) order.
    std::uint32_t index(const CrystalId& id) const {
        return (std::uint32_t(id.sector) * n_layers + id.layer) * crystals_per_layer + id.crystal;
    }
    CrystalId id(std::uint32_t index) const {
        return {std::uint16_t(index / (n_layers * crystals_per_layer)),
                std::uint16_t((index / crystals_per_layer) % n_layers), std::uint16_t(index % crystals_per_layer)};
    }
};

/// Ordered table of all LOR bins. Order is rotation-step major, then a, then
/// b; the position of a LOR in the table is its sinogram bin index.
class LorTable {
public:
    LorTable() = default;
    /// keys must be strictly increasing packed LORs (see pack()).
    LorTable(CrystalLayout layout, std::vector<std::uint64_t> keys);

    std::uint64_t pack(const Lor& lor) const;
    std::size_t size() const { return keys_.size(); }
    Lor at(std::size_t bin) const;
    std::optional<std::uint32_t> find(const Lor& lor) const;
    std::vector<Lor> to_vector() const;

private:
    CrystalLayout layout_{};
    std::vector<std::uint64_t> keys_;
};

class Scanner {
public:
    /// Validates the configuration, precomputes crystal faces at step 0 and
    /// enumerates the LOR table. Throws ValidationError.
    explicit Scanner(ScannerConfig config);

    const ScannerConfig& config() const { return config_; }
    const Digest& hash() const { return hash_; }

    const CrystalLayout& layout() const { return layout_; }
    std::uint32_t n_crystals() const { return std::uint32_t(centers_.size()); }
    std::uint32_t n_active_crystals() const { return std::uint32_t(active_.size()); }
    /// Linear index per CrystalLayout; throws ValidationError when out of range.
    std::uint32_t crystal_index(const CrystalId& id) const;
    bool is_active(const CrystalId& id) const;
    /// Linear indices of active crystals, ascending.
    const std::vector<std::uint32_t>& active_crystals() const { return active_; }

    double layer_radius(std::uint32_t layer) const;
    double rotation_angle(std::uint32_t step) const;
    /// Step of an event at `time_s` given the constant angular velocity.
    std::uint32_t rotation_step_at(double time_s) const;

    /// Face centre of `id` at rotation step `step` (lab frame). Throws
    /// ValidationError on out-of-range indices.
    Point2 crystal_center(const CrystalId& id, std::uint32_t step) const;
    FaceSegment crystal_face(const CrystalId& id, std::uint32_t step) const;

    /// First active crystal face crossed by the ray origin + t*dir, t > 0.
    std::optional<CrystalId> detect_single(Point2 origin, Point2 dir, std::uint32_t step) const;
    /// Both rays must hit active crystals (distinct ones); result is unordered
    /// (first element from dir1).
    std::optional<std::pair<CrystalId, CrystalId>> detect_pair(Point2 origin, Point2 dir1, Point2 dir2,
                                                              std::uint32_t step) const;

    const LorTable& lors() const { return lors_; }
    /// Canonical LOR for a detected pair; nullopt when the pair is not a bin.
    std::optional<std::uint32_t> bin_of(const CrystalId& c1, const CrystalId& c2, std::uint32_t step) const;

    /// Endpoints of a bin's chord (face centre to face centre).
    std::pair<Point2, Point2> lor_endpoints(const Lor& lor) const;
    /// True when rays cast from the chord's midpoint inside the field of view
    /// reach the two end crystals first (no other active face in between).
    bool lor_unobstructed(const Lor& lor) const;

private:
    void check_id(const CrystalId& id) const;
    std::optional<std::uint32_t> hit_in_scanner_frame(Point2 origin, Point2 dir, double* t_hit) const;

    ScannerConfig config_;
    CrystalLayout layout_{};
    Digest hash_{};
    std::vector<Point2> centers_;            // step 0, by linear index
    std::vector<FaceSegment> faces_;         // step 0, by linear index
    std::vector<bool> active_flag_;          // by linear index
    std::vector<std::uint32_t> active_;
    double sector_angle_ = 0.0;
    LorTable lors_;
};

/// Same object as Scanner(config); named entry point.
Scanner build_scanner(const ScannerConfig& config);
/// All LOR bins of the scanner, in bin order.
std::vector<Lor> enumerate_lors(const Scanner& scanner);

/// True when the segment p0-p1 crosses the axis-aligned box with positive length.
bool segment_crosses_box(Point2 p0, Point2 p1, Point2 lo, Point2 hi);

} // namespace tomopet
