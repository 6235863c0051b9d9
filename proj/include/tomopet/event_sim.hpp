#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tomopet/binary_io.hpp"
#include "tomopet/hashing.hpp"
#include "tomopet/image.hpp"
#include "tomopet/rng.hpp"
#include "tomopet/scanner.hpp"

namespace tomopet {

enum class EventKind : std::uint8_t { true_coincidence = 0, random = 1, scattered = 2 };

enum class AcollinearityModel : std::uint8_t { uniform = 0, truncated_gaussian = 1 };

struct SimConfig {
    std::uint64_t n_total = 0;
    double p_random = 0.15;
    double p_scatter = 0.15;
    double acollinearity_half_angle_deg = 0.5;
    AcollinearityModel acollinearity = AcollinearityModel::uniform;
    double hg_g = 0.98;
    std::uint64_t seed = 0;
    double scan_time_s = 600.0;

    void validate() const;
    nlohmann::json to_json() const;
    static SimConfig from_json(const nlohmann::json& j);

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct CoincidenceEvent {
    std::uint32_t lor_index = 0;
    Lor lor;
    EventKind kind = EventKind::true_coincidence;
    std::optional<Point2> emission_point;

    friend bool operator==(const CoincidenceEvent&, const CoincidenceEvent&) = default;
};

struct ListModeSet {
    std::vector<CoincidenceEvent> events;
    SimConfig sim_config;
    Digest scanner_hash{};

    std::size_t count(EventKind kind) const;
};

struct Sinogram {
    std::vector<std::uint32_t> counts;

    std::uint64_t total() const;
    std::vector<double> as_double() const;
};

/// Draws emission points with density proportional to activity: a pixel with
/// probability value / total, then a uniform position inside it.
class EmissionSampler {
public:
    explicit EmissionSampler(const ActivityMap& map);
    Point2 sample(Rng& rng) const;
    const GridSpec& grid() const { return grid_; }

private:
    GridSpec grid_;
    std::vector<double> cdf_;
};

Point2 sample_emission(const ActivityMap& map, Rng& rng);

/// dir1 uniform on the unit circle; dir2 at 180 deg + delta from dir1, with
/// delta uniform on [-half_angle, half_angle] (or a normal with sigma =
/// half_angle / 2 truncated to that range).
std::pair<Point2, Point2> sample_acollinear_pair(Rng& rng, double half_angle_deg,
                                                 AcollinearityModel model = AcollinearityModel::uniform);
/// Signed acollinearity deviation in degrees (the delta above).
double sample_acollinearity_deviation(Rng& rng, double half_angle_deg, AcollinearityModel model);

/// Henyey-Greenstein phase function (1 - g^2) / (1 + g^2 - 2 g cos(theta))^(3/2).
double hg_pdf(double theta, double g);
/// Inverse CDF of the normalised HG density over cos(theta) in [-1, 1].
double hg_cos_from_uniform(double xi, double g);
/// Deflection angle theta in [0, pi].
double sample_hg_deflection(Rng& rng, double g);

/// Attempts allowed per requested event before the geometry is declared
/// unable to detect anything.
inline constexpr std::uint32_t kMaxAttemptsPerEvent = 10000;
/// Events generated per independent random sub-stream.
inline constexpr std::uint64_t kEventsPerStream = 1024;

/// Monte Carlo scan producing exactly config.n_total detected coincidences.
/// Sub-stream c (events [c*kEventsPerStream, ...)) uses Rng(seed, c + 1); the
/// result is identical for every worker count.
ListModeSet simulate_scan(const ActivityMap& map, const Scanner& scanner, const SimConfig& config);

Sinogram bin_to_sinogram(const ListModeSet& events, const Scanner& scanner);

// PLST list-mode files:
//   "PLST" 0x01 | scanner hash[32] | u64 n_total | f64 p_random | f64 p_scatter
//   | f64 half_angle_deg | u8 acollinearity model | f64 hg_g | u64 seed
//   | f64 scan_time_s | u64 n_records | n_records x {u32 lor_index, u8 kind}
Bytes encode_plst(const ListModeSet& set);
/// Rejects files made for another scanner (GeometryMismatch) and records whose
/// bin does not exist (DataError).
ListModeSet decode_plst(std::span<const std::uint8_t> bytes, const Scanner& scanner);

// PSIN sinogram files: "PSIN" 0x01 | u32 n_bins | u32 counts[n_bins]
Bytes encode_psin(const Sinogram& sino);
Sinogram decode_psin(std::span<const std::uint8_t> bytes);

} // namespace tomopet
