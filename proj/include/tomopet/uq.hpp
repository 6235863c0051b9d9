#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tomopet/binary_io.hpp"
#include "tomopet/image.hpp"

namespace tomopet {

class PosteriorSampleSet {
public:
    /// k >= 1 samples on one grid with finite values.
    explicit PosteriorSampleSet(std::vector<Image> samples, std::string source_id = {});

    std::size_t k() const { return samples_.size(); }
    const std::vector<Image>& samples() const { return samples_; }
    const GridSpec& grid() const { return samples_.front().grid(); }
    const std::string& source_id() const { return source_id_; }

private:
    std::vector<Image> samples_;
    std::string source_id_;
};

inline constexpr double kDefaultUqDisplayMax = 0.006;

struct UqMap {
    Image variance;
    double display_max = kDefaultUqDisplayMax;
};

enum class VarianceKind { population, unbiased };

Image sample_mean(const PosteriorSampleSet& set);
/// Per-pixel variance; population (divide by k) by default. Needs k >= 2.
UqMap sample_variance(const PosteriorSampleSet& set, VarianceKind kind = VarianceKind::population);

/// 10 log10(range^2 / MSE); +infinity when the images are identical.
double psnr(const Image& reference, const Image& estimate, double data_range);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Mean SSIM over every fully contained 11x11 Gaussian window (sigma 1.5).
double ssim(const Image& reference, const Image& estimate, double data_range);

/// Affine map of `image` taking the reference's [min, max] onto [0, 1]. A
/// constant reference only shifts by its value.
Image scale_to_reference_range(const Image& image, const Image& reference);
/// max - min of the reference.
double reference_range(const Image& reference);

// PSMP sample sets: "PSMP" 0x01 | u32 k | u32 w | u32 h | f32 values[k*w*h]
// (sample-major, each sample row-major). No pixel size is stored; decoded
// samples get pixel_size 1.
Bytes encode_psmp(const PosteriorSampleSet& set);
PosteriorSampleSet decode_psmp(std::span<const std::uint8_t> bytes, std::string source_id = {});
void save_psmp(const std::filesystem::path& path, const PosteriorSampleSet& set);
PosteriorSampleSet load_psmp(const std::filesystem::path& path);

} // namespace tomopet
