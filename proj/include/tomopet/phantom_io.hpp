#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tomopet/binary_io.hpp"
#include "tomopet/image.hpp"

namespace tomopet {

// ---------------------------------------------------------------------------
// PIMG image files
//
//   "PIMG" 0x01 | u32 width | u32 height | f32 pixel_size_mm | f32 values[w*h]
//
// All fields little-endian, values row-major. In memory pixels are double;
// a save/load cycle is bit-exact for values representable in f32.
// ---------------------------------------------------------------------------

Bytes encode_pimg(const Image& image);
/// Generic decode: any finite values. Throws FormatError / ValidationError.
Image decode_pimg(std::span<const std::uint8_t> bytes);

void save_image(const std::filesystem::path& path, const Image& image);
/// Loads an emission image; negative pixels are a ValidationError.
ActivityMap load_image(const std::filesystem::path& path);
/// Loads an image that may carry negative values (sinograms, network outputs).
Image load_signed_image(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic phantoms
// ---------------------------------------------------------------------------

enum class PhantomKind { disk, shepp_logan, annulus };

PhantomKind parse_phantom_kind(std::string_view name);
std::string_view to_string(PhantomKind kind);

struct PhantomParams {
    double amplitude = 1.0;
    /// Disk radius, or annulus outer radius (mm).
    double radius_mm = 0.0;
    /// Annulus inner radius (mm).
    double inner_radius_mm = 0.0;
    double center_x_mm = 0.0;
    double center_y_mm = 0.0;
};

/// Deterministic phantom on a width x height grid (both >= 8).
///
/// disk/annulus: a pixel takes `amplitude` when the distance of its centre to
/// (center_x, center_y) is < radius (and >= inner_radius for the annulus).
/// Radii beyond the grid's half-diagonal are rejected.
///
/// shepp_logan: the ten-ellipse Shepp-Logan head evaluated at pixel centres,
/// normalised so the ellipse frame [-1, 1]^2 spans the grid, scaled by
/// amplitude and clamped at zero.
ActivityMap make_synthetic_phantom(PhantomKind kind, std::uint32_t width, std::uint32_t height,
                                   double pixel_size, const PhantomParams& params);

// ---------------------------------------------------------------------------
// Volumes and event budgets
// ---------------------------------------------------------------------------

class PhantomVolume {
public:
    explicit PhantomVolume(std::vector<ActivityMap> slices);

    /// Every *.pimg file in `dir`, in lexicographic filename order.
    static PhantomVolume load_directory(const std::filesystem::path& dir,
                                        std::vector<std::filesystem::path>* paths = nullptr);

    const std::vector<ActivityMap>& slices() const { return slices_; }
    std::size_t size() const { return slices_.size(); }
    const std::vector<double>& per_slice_activity() const { return activity_; }

private:
    std::vector<ActivityMap> slices_;
    std::vector<double> activity_;
};

/// Splits n_total events over slices proportionally to their activity with
/// largest-remainder apportionment, so the counts sum to n_total exactly.
/// Remainder ties go to the lower slice index.
std::vector<std::uint64_t> slice_event_budget(const PhantomVolume& volume, std::uint64_t n_total);
std::vector<std::uint64_t> apportion_events(std::span<const double> weights, std::uint64_t n_total);

// ---------------------------------------------------------------------------
// Dataset manifests (UTF-8 JSON)
// ---------------------------------------------------------------------------

enum class Split { train, test };

struct ManifestEntry {
    std::string input_lpet_path;
    std::optional<std::string> input_mri_path;
    std::string ground_truth_path;
    std::string sim_config_id;
    Split split = Split::train;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);

    /// Paths are resolved relative to `base` when not absolute. Checks that
    /// every referenced image loads as PIMG and that no (input, ground truth)
    /// pair is tagged both train and test.
    void validate(const std::filesystem::path& base) const;

    void save(const std::filesystem::path& path) const;
    static DatasetManifest load(const std::filesystem::path& path);
};

} // namespace tomopet
