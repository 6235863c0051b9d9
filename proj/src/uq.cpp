#include "tomopet/uq.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "tomopet/error.hpp"
#include "tomopet/parallel.hpp"

namespace tomopet {

PosteriorSampleSet::PosteriorSampleSet(std::vector<Image> samples, std::string source_id)
    : samples_(std::move(samples)), source_id_(std::move(source_id)) {
    if (samples_.empty()) throw ValidationError("posterior sample set is empty");
    for (const auto& s : samples_)
        if (s.width() != grid().width || s.height() != grid().height)
            throw ValidationError("posterior samples have different dimensions");
}

Image sample_mean(const PosteriorSampleSet& set) {
    const auto& samples = set.samples();
    const std::size_t n = set.grid().size();
    const double k = double(set.k());
    std::vector<double> mean(n);
    const auto nn = std::ptrdiff_t(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < nn; ++j) {
        double s = 0.0;
        for (const auto& img : samples) s += img[std::size_t(j)];
        mean[std::size_t(j)] = s / k;
    }
    return Image(set.grid(), std::move(mean));
}

UqMap sample_variance(const PosteriorSampleSet& set, VarianceKind kind) {
    if (set.k() < 2) throw ValidationError("sample_variance needs at least 2 samples, got " + std::to_string(set.k()));
    const auto& samples = set.samples();
    const std::size_t n = set.grid().size();
    const double k = double(set.k());
    const double divisor = kind == VarianceKind::population ? k : k - 1.0;
    std::vector<double> var(n);
    const auto nn = std::ptrdiff_t(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t jj = 0; jj < nn; ++jj) {
        const auto j = std::size_t(jj);
        // Deviations are taken from the first sample so equal samples give 0.
        const double ref = samples.front()[j];
        double s = 0.0;
        for (const auto& img : samples) s += img[j] - ref;
        const double m = s / k;
        double q = 0.0;
        for (const auto& img : samples) {
            const double d = img[j] - ref - m;
            q += d * d;
        }
        var[j] = q / divisor;
    }
    return {Image(set.grid(), std::move(var)), kDefaultUqDisplayMax};
}

namespace {

void require_pair(const Image& a, const Image& b, const char* what) {
    if (a.width() != b.width() || a.height() != b.height())
        throw ValidationError(std::string(what) + ": image dimensions differ");
}

void require_range(double data_range) {
    if (!(data_range > 0.0) || !std::isfinite(data_range)) throw ValidationError("data_range must be positive");
}

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> g{};
    double s = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double t = double(i - kSsimWindow / 2);
        g[i] = std::exp(-t * t / (2.0 * kSsimSigma * kSsimSigma));
        s += g[i];
    }
    for (auto& v : g) v /= s;
    return g;
}

} // namespace

double psnr(const Image& reference, const Image& estimate, double data_range) {
    require_pair(reference, estimate, "psnr");
    require_range(data_range);
    const auto& a = reference.values();
    const auto& b = estimate.values();
    const double sse = blocked_sum(a.size(), [&](std::size_t i) {
        const double d = a[i] - b[i];
        return d * d;
    });
    const double mse = sse / double(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const Image& reference, const Image& estimate, double data_range) {
    require_pair(reference, estimate, "ssim");
    require_range(data_range);
    const std::uint32_t w = reference.width(), h = reference.height();
    if (w < std::uint32_t(kSsimWindow) || h < std::uint32_t(kSsimWindow))
        throw ValidationError("ssim: images must be at least 11x11");
    const auto g = gaussian_taps();
    const std::uint32_t ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
    const auto& x = reference.values();
    const auto& y = estimate.values();

    // Horizontal pass for the five moment maps: rows of length ow.
    std::vector<std::array<double, 5>> hor(std::size_t(ow) * h);
    const auto nh = std::ptrdiff_t(h);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < nh; ++r) {
        const std::size_t row = std::size_t(r) * w;
        for (std::uint32_t c = 0; c < ow; ++c) {
            std::array<double, 5> acc{};
            for (int t = 0; t < kSsimWindow; ++t) {
                const double a = x[row + c + t], b = y[row + c + t];
                acc[0] += g[t] * a;
                acc[1] += g[t] * b;
                acc[2] += g[t] * a * a;
                acc[3] += g[t] * b * b;
                acc[4] += g[t] * a * b;
            }
            hor[std::size_t(r) * ow + c] = acc;
        }
    }

    const double c1 = (kSsimK1 * data_range) * (kSsimK1 * data_range);
    const double c2 = (kSsimK2 * data_range) * (kSsimK2 * data_range);
    std::vector<double> local(std::size_t(ow) * oh);
    const auto noh = std::ptrdiff_t(oh);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < noh; ++r) {
        for (std::uint32_t c = 0; c < ow; ++c) {
            std::array<double, 5> m{};
            for (int t = 0; t < kSsimWindow; ++t) {
                const auto& v = hor[(std::size_t(r) + t) * ow + c];
                for (int q = 0; q < 5; ++q) m[q] += g[t] * v[q];
            }
            const double vx = m[2] - m[0] * m[0];
            const double vy = m[3] - m[1] * m[1];
            const double cxy = m[4] - m[0] * m[1];
            local[std::size_t(r) * ow + c] = ((2.0 * m[0] * m[1] + c1) * (2.0 * cxy + c2)) /
                                             ((m[0] * m[0] + m[1] * m[1] + c1) * (vx + vy + c2));
        }
    }
    return blocked_sum(local.size(), [&](std::size_t i) { return local[i]; }) / double(local.size());
}

double reference_range(const Image& reference) { return reference.max() - reference.min(); }

Image scale_to_reference_range(const Image& image, const Image& reference) {
    const double lo = reference.min();
    const double range = reference_range(reference);
    std::vector<double> v(image.values());
    for (auto& e : v) e = range > 0.0 ? (e - lo) / range : e - lo;
    return Image(image.grid(), std::move(v));
}

Bytes encode_psmp(const PosteriorSampleSet& set) {
    ByteWriter w;
    w.magic("PSMP", 1);
    w.u32(std::uint32_t(set.k()));
    w.u32(set.grid().width);
    w.u32(set.grid().height);
    for (const auto& s : set.samples())
        for (double v : s.values()) w.f32(float(v));
    return std::move(w).bytes();
}

PosteriorSampleSet decode_psmp(std::span<const std::uint8_t> bytes, std::string source_id) {
    ByteReader r(bytes, "PSMP");
    r.expect_magic("PSMP", 1);
    const std::uint32_t k = r.u32(), w = r.u32(), h = r.u32();
    if (k == 0 || w == 0 || h == 0) throw FormatError("PSMP: k, width and height must be >= 1");
    const std::uint64_t n = std::uint64_t(w) * h;
    if (r.remaining() != n * k * 4)
        throw FormatError("PSMP: payload has " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(n * k * 4));
    std::vector<Image> samples;
    samples.reserve(k);
    const GridSpec grid{w, h, 1.0};
    for (std::uint32_t s = 0; s < k; ++s) {
        std::vector<double> v(n);
        for (auto& e : v) {
            e = r.f32();
            if (!std::isfinite(e)) throw FormatError("PSMP: non-finite sample value");
        }
        samples.emplace_back(grid, std::move(v));
    }
    r.expect_end();
    return PosteriorSampleSet(std::move(samples), std::move(source_id));
}

void save_psmp(const std::filesystem::path& path, const PosteriorSampleSet& set) {
    write_file(path, encode_psmp(set));
}

PosteriorSampleSet load_psmp(const std::filesystem::path& path) {
    return decode_psmp(read_file(path), path.string());
}

} // namespace tomopet
