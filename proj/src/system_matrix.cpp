#include "tomopet/system_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "tomopet/error.hpp"
#include "tomopet/parallel.hpp"
#include "tomopet/ray_trace.hpp"

namespace tomopet {

Digest grid_hash(const GridSpec& grid) {
    const nlohmann::json j{{"width", grid.width}, {"height", grid.height}, {"pixel_size_mm", grid.pixel_size}};
    return sha256(j.dump());
}

std::optional<std::pair<double, double>> clip_to_grid(const GridSpec& grid, Point2 p0, Point2 p1) {
    double t0 = 0.0, t1 = 1.0;
    const double o[2] = {p0.x, p0.y};
    const double d[2] = {p1.x - p0.x, p1.y - p0.y};
    const double lo[2] = {grid.x_min(), grid.y_min()};
    const double hi[2] = {grid.x_max(), grid.y_max()};
    for (int a = 0; a < 2; ++a) {
        if (d[a] == 0.0) {
            if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
            continue;
        }
        double ta = (lo[a] - o[a]) / d[a];
        double tb = (hi[a] - o[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (!(t1 > t0)) return std::nullopt;
    return std::make_pair(t0, t1);
}

// --- SystemMatrix ----------------------------------------------------------

SystemMatrix::SystemMatrix(GridSpec grid, std::vector<std::uint64_t> row_ptr, std::vector<MatrixEntry> entries,
                           Digest scanner_hash, Digest grid_hash)
    : grid_(grid), row_ptr_(std::move(row_ptr)), entries_(std::move(entries)), scanner_hash_(scanner_hash),
      grid_hash_(grid_hash) {
    grid_.validate();
    if (row_ptr_.empty() || row_ptr_.front() != 0 || row_ptr_.back() != entries_.size())
        throw ValidationError("system matrix: inconsistent row offsets");
    const std::size_t n_pix = grid_.size();
    std::vector<std::uint64_t> col_count(n_pix + 1, 0);
    for (std::size_t i = 0; i + 1 < row_ptr_.size(); ++i) {
        if (row_ptr_[i] > row_ptr_[i + 1]) throw ValidationError("system matrix: decreasing row offsets");
        for (std::uint64_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            const auto& e = entries_[k];
            if (e.pixel >= n_pix) throw ValidationError("system matrix: pixel index out of range");
            if (!(e.weight > 0.0) || !std::isfinite(e.weight))
                throw ValidationError("system matrix: weights must be positive");
            if (k > row_ptr_[i] && !(entries_[k - 1].pixel < e.pixel))
                throw ValidationError("system matrix: rows must be sorted by pixel without duplicates");
            ++col_count[e.pixel + 1];
        }
    }
    // Column copy, bins ascending within each column.
    col_ptr_.assign(n_pix + 1, 0);
    for (std::size_t j = 0; j < n_pix; ++j) col_ptr_[j + 1] = col_ptr_[j] + col_count[j + 1];
    col_entries_.resize(entries_.size());
    std::vector<std::uint64_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
    for (std::size_t i = 0; i + 1 < row_ptr_.size(); ++i)
        for (std::uint64_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            col_entries_[fill[entries_[k].pixel]++] = {std::uint32_t(i), entries_[k].weight};

    sensitivity_.assign(n_pix, 0.0);
    for (std::size_t j = 0; j < n_pix; ++j) {
        double s = 0.0;
        for (const auto& c : column(j)) s += c.weight;
        sensitivity_[j] = s;
    }
}

SystemMatrix SystemMatrix::rounded_to_f32() const {
    auto entries = entries_;
    for (auto& e : entries) e.weight = double(float(e.weight));
    return SystemMatrix(grid_, row_ptr_, std::move(entries), scanner_hash_, grid_hash_);
}

bool operator==(const SystemMatrix& a, const SystemMatrix& b) {
    if (!(a.grid_ == b.grid_) || a.row_ptr_ != b.row_ptr_ || a.scanner_hash_ != b.scanner_hash_ ||
        a.grid_hash_ != b.grid_hash_ || a.entries_.size() != b.entries_.size())
        return false;
    for (std::size_t k = 0; k < a.entries_.size(); ++k)
        if (a.entries_[k].pixel != b.entries_[k].pixel || a.entries_[k].weight != b.entries_[k].weight) return false;
    return true;
}

// --- construction ----------------------------------------------------------

namespace {

SystemMatrix trace_chords(std::span<const Chord> chords, const std::vector<char>* keep, const GridSpec& grid,
                          const Digest& scanner_hash) {
    grid.validate();
    constexpr std::size_t kBlock = 2048;
    const std::size_t n = chords.size();
    const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<std::vector<MatrixEntry>> block_entries(n_blocks);
    std::vector<std::vector<std::uint32_t>> block_counts(n_blocks);
    const auto nb = std::ptrdiff_t(n_blocks);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
        const std::size_t lo = std::size_t(b) * kBlock;
        const std::size_t hi = std::min(n, lo + kBlock);
        auto& out = block_entries[std::size_t(b)];
        auto& counts = block_counts[std::size_t(b)];
        counts.reserve(hi - lo);
        std::vector<MatrixEntry> row;
        for (std::size_t i = lo; i < hi; ++i) {
            row.clear();
            if (keep && !(*keep)[i]) {
                counts.push_back(0);
                continue;
            }
            trace_segment(grid, chords[i].p0, chords[i].p1,
                          [&](std::uint32_t pixel, double len) { row.push_back({pixel, len}); });
            std::sort(row.begin(), row.end(), [](const auto& x, const auto& y) { return x.pixel < y.pixel; });
            // The tracer visits each pixel once; merge defensively if a
            // degenerate segment revisits one.
            std::size_t w = 0;
            for (std::size_t k = 0; k < row.size(); ++k) {
                if (w > 0 && row[w - 1].pixel == row[k].pixel)
                    row[w - 1].weight += row[k].weight;
                else
                    row[w++] = row[k];
            }
            row.resize(w);
            out.insert(out.end(), row.begin(), row.end());
            counts.push_back(std::uint32_t(row.size()));
        }
    }
    std::vector<std::uint64_t> row_ptr(n + 1, 0);
    std::vector<MatrixEntry> entries;
    std::size_t total = 0;
    for (const auto& e : block_entries) total += e.size();
    entries.reserve(total);
    std::size_t r = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        for (auto c : block_counts[b]) {
            row_ptr[r + 1] = row_ptr[r] + c;
            ++r;
        }
        entries.insert(entries.end(), block_entries[b].begin(), block_entries[b].end());
        std::vector<MatrixEntry>().swap(block_entries[b]);
    }
    return SystemMatrix(grid, std::move(row_ptr), std::move(entries), scanner_hash, grid_hash(grid));
}

} // namespace

SystemMatrix build_matrix_from_chords(std::span<const Chord> chords, const GridSpec& grid, const Digest& scanner_hash) {
    return trace_chords(chords, nullptr, grid, scanner_hash);
}

SystemMatrix build_system_matrix(const Scanner& scanner, const GridSpec& grid) {
    grid.validate();
    const double fov = scanner.config().fov_size_mm;
    if (grid.width * grid.pixel_size > fov + 1e-9 || grid.height * grid.pixel_size > fov + 1e-9)
        throw ValidationError("image grid (" + std::to_string(grid.width * grid.pixel_size) + " x " +
                              std::to_string(grid.height * grid.pixel_size) +
                              " mm) does not fit in the scanner field of view (" + std::to_string(fov) + " mm)");
    const auto& table = scanner.lors();
    std::vector<Chord> chords(table.size());
    std::vector<char> keep(table.size());
    const auto n = std::ptrdiff_t(table.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const Lor lor = table.at(std::size_t(i));
        const auto [p0, p1] = scanner.lor_endpoints(lor);
        chords[std::size_t(i)] = {p0, p1};
        keep[std::size_t(i)] = scanner.lor_unobstructed(lor);
    }
    return trace_chords(chords, &keep, grid, scanner.hash());
}

// --- projections -----------------------------------------------------------

std::vector<double> forward_project(const SystemMatrix& a, std::span<const double> x) {
    if (x.size() != a.n_pixels()) throw ValidationError("forward_project: dimension mismatch");
    std::vector<double> out(a.n_bins(), 0.0);
    const auto n = std::ptrdiff_t(a.n_bins());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const auto& e : a.row(std::size_t(i))) s += e.weight * x[e.pixel];
        out[std::size_t(i)] = s;
    }
    return out;
}

std::vector<double> forward_project(const SystemMatrix& a, const Image& x) {
    require_same_grid(a.grid(), x.grid(), "forward_project");
    return forward_project(a, std::span<const double>(x.values()));
}

std::vector<double> back_project(const SystemMatrix& a, std::span<const double> y) {
    if (y.size() != a.n_bins()) throw ValidationError("back_project: dimension mismatch");
    std::vector<double> out(a.n_pixels(), 0.0);
    const auto n = std::ptrdiff_t(a.n_pixels());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (const auto& c : a.column(std::size_t(j))) s += c.weight * y[c.bin];
        out[std::size_t(j)] = s;
    }
    return out;
}

const std::vector<double>& sensitivity(const SystemMatrix& a) { return a.sensitivity(); }

// --- PSYS ------------------------------------------------------------------

Bytes encode_psys(const SystemMatrix& a) {
    ByteWriter w;
    w.magic("PSYS", 1);
    w.raw(a.scanner_hash());
    w.raw(a.grid_hash());
    w.u32(a.grid().width);
    w.u32(a.grid().height);
    w.f32(float(a.grid().pixel_size));
    w.u32(std::uint32_t(a.n_bins()));
    std::uint32_t n_rows = 0;
    for (std::size_t i = 0; i < a.n_bins(); ++i)
        if (!a.row(i).empty()) ++n_rows;
    w.u32(n_rows);
    for (std::size_t i = 0; i < a.n_bins(); ++i) {
        const auto row = a.row(i);
        if (row.empty()) continue;
        w.u32(std::uint32_t(i));
        w.u32(std::uint32_t(row.size()));
        for (const auto& e : row) {
            w.u32(e.pixel);
            w.f32(float(e.weight));
        }
    }
    return std::move(w).bytes();
}

SystemMatrix decode_psys(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "PSYS");
    r.expect_magic("PSYS", 1);
    Digest sh{}, gh{};
    auto s = r.raw(32);
    std::copy(s.begin(), s.end(), sh.begin());
    auto g = r.raw(32);
    std::copy(g.begin(), g.end(), gh.begin());
    GridSpec grid;
    grid.width = r.u32();
    grid.height = r.u32();
    grid.pixel_size = double(r.f32());
    grid.validate();
    const std::uint32_t n_bins = r.u32();
    const std::uint32_t n_rows = r.u32();
    std::vector<std::uint64_t> row_ptr(std::size_t(n_bins) + 1, 0);
    std::vector<MatrixEntry> entries;
    std::int64_t prev_bin = -1;
    for (std::uint32_t k = 0; k < n_rows; ++k) {
        const std::uint32_t bin = r.u32();
        const std::uint32_t nnz = r.u32();
        if (bin >= n_bins || std::int64_t(bin) <= prev_bin) throw FormatError("PSYS: rows out of order");
        for (std::int64_t b = prev_bin + 1; b <= std::int64_t(bin); ++b) row_ptr[std::size_t(b)] = entries.size();
        if (r.remaining() < std::uint64_t(nnz) * 8) throw FormatError("PSYS: truncated row");
        for (std::uint32_t e = 0; e < nnz; ++e) {
            const std::uint32_t pixel = r.u32();
            const double weight = double(r.f32());
            entries.push_back({pixel, weight});
        }
        prev_bin = bin;
    }
    for (std::int64_t b = prev_bin + 1; b <= std::int64_t(n_bins); ++b) row_ptr[std::size_t(b)] = entries.size();
    r.expect_end();
    try {
        return SystemMatrix(grid, std::move(row_ptr), std::move(entries), sh, gh);
    } catch (const ValidationError& e) {
        throw FormatError(std::string("PSYS: ") + e.what());
    }
}

SystemMatrix load_psys(const std::filesystem::path& path, const Digest& scanner_hash, const GridSpec& grid) {
    auto m = decode_psys(read_file(path));
    if (m.scanner_hash() != scanner_hash || m.grid_hash() != grid_hash(grid))
        throw GeometryMismatch("geometry mismatch: matrix cache " + path.string() +
                               " was built for a different scanner or image grid");
    return m;
}

} // namespace tomopet
