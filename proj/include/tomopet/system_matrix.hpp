#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tomopet/binary_io.hpp"
#include "tomopet/hashing.hpp"
#include "tomopet/image.hpp"
#include "tomopet/scanner.hpp"

namespace tomopet {

struct MatrixEntry {
    std::uint32_t pixel = 0;
    double weight = 0.0;
};

/// Sparse bin x pixel operator in compressed rows, with a compressed-column
/// copy so both projections can be computed gather-style (each output element
/// is a fixed-order sum, independent of the worker count).
class SystemMatrix {
public:
    SystemMatrix() = default;
    /// rows: row_ptr has n_bins + 1 offsets into entries. Entries within a row
    /// must be sorted by pixel, unique, with positive weight.
    SystemMatrix(GridSpec grid, std::vector<std::uint64_t> row_ptr, std::vector<MatrixEntry> entries,
                 Digest scanner_hash, Digest grid_hash);

    std::size_t n_bins() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
    std::size_t n_pixels() const { return grid_.size(); }
    std::size_t nnz() const { return entries_.size(); }
    const GridSpec& grid() const { return grid_; }
    const Digest& scanner_hash() const { return scanner_hash_; }
    const Digest& grid_hash() const { return grid_hash_; }

    std::span<const MatrixEntry> row(std::size_t bin) const {
        return {entries_.data() + row_ptr_[bin], entries_.data() + row_ptr_[bin + 1]};
    }

    struct ColumnEntry {
        std::uint32_t bin;
        double weight;
    };
    std::span<const ColumnEntry> column(std::size_t pixel) const {
        return {col_entries_.data() + col_ptr_[pixel], col_entries_.data() + col_ptr_[pixel + 1]};
    }

    /// Column sums (A^T 1), computed once at construction.
    const std::vector<double>& sensitivity() const { return sensitivity_; }

    /// Copy with every weight rounded to f32 (the on-disk precision).
    SystemMatrix rounded_to_f32() const;

    friend bool operator==(const SystemMatrix& a, const SystemMatrix& b);

private:
    GridSpec grid_{};
    std::vector<std::uint64_t> row_ptr_;
    std::vector<MatrixEntry> entries_;
    std::vector<std::uint64_t> col_ptr_;
    std::vector<ColumnEntry> col_entries_;
    std::vector<double> sensitivity_;
    Digest scanner_hash_{};
    Digest grid_hash_{};
};

/// SHA-256 of the grid's canonical JSON form.
Digest grid_hash(const GridSpec& grid);

struct Chord {
    Point2 p0;
    Point2 p1;
};

/// One row per chord, weights = exact intersection lengths with each pixel.
/// Chords are traced in fixed-size blocks in parallel and merged in order.
SystemMatrix build_matrix_from_chords(std::span<const Chord> chords, const GridSpec& grid,
                                      const Digest& scanner_hash);

/// Row i is the face-centre chord of LOR bin i. Rows of LORs whose chord is
/// shadowed by another active crystal (Scanner::lor_unobstructed) are empty.
/// The grid must fit in the scanner field of view (ValidationError otherwise).
SystemMatrix build_system_matrix(const Scanner& scanner, const GridSpec& grid);

/// (Ax)_i, parallel over bins.
std::vector<double> forward_project(const SystemMatrix& a, std::span<const double> x);
std::vector<double> forward_project(const SystemMatrix& a, const Image& x);
/// (A^T y)_j, parallel over pixels.
std::vector<double> back_project(const SystemMatrix& a, std::span<const double> y);
const std::vector<double>& sensitivity(const SystemMatrix& a);

// PSYS matrix cache:
//   "PSYS" 0x01 | scanner hash[32] | grid hash[32] | u32 width | u32 height
//   | f32 pixel_size | u32 n_bins | u32 n_rows
//   | n_rows x {u32 bin, u32 nnz, nnz x {u32 pixel, f32 weight}}
// Only non-empty rows are stored.
Bytes encode_psys(const SystemMatrix& a);
SystemMatrix decode_psys(std::span<const std::uint8_t> bytes);
/// Loads a cache and checks it against the expected geometry; a mismatch is a
/// GeometryMismatch error.
SystemMatrix load_psys(const std::filesystem::path& path, const Digest& scanner_hash, const GridSpec& grid);

} // namespace tomopet
