#pragma once

#include <string_view>

#include "tomopet/binary_io.hpp"
#include "tomopet/image.hpp"

namespace tomopet {

enum class Colormap { gray, hot };

Colormap parse_colormap(std::string_view name);

/// Linear clamp of [lo, hi] onto 0..255, encoded as an 8-bit PNG (grayscale
/// for gray, RGB for hot). Row 0 of the image is the first PNG row. Output
/// bytes are deterministic.
Bytes render_png(const Image& image, double lo, double hi, Colormap colormap = Colormap::gray);

/// 8-bit level of a value, exposed for testing.
std::uint8_t display_level(double value, double lo, double hi);

} // namespace tomopet
