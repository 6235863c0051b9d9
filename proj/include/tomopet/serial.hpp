#pragma once

// Single-threaded reference implementations of the parallel kernels. They
// follow the textbook loop order (scatter-style back projection, brute-force
// crystal search) and are kept to cross-check and benchmark the OpenMP paths.

#include <optional>
#include <span>
#include <vector>

#include "tomopet/event_sim.hpp"
#include "tomopet/image.hpp"
#include "tomopet/scanner.hpp"
#include "tomopet/system_matrix.hpp"

namespace tomopet::serial {

std::vector<double> forward_project(const SystemMatrix& a, std::span<const double> x);
/// Scatters each row into the output.
std::vector<double> back_project(const SystemMatrix& a, std::span<const double> y);
std::vector<double> mlem_step(const SystemMatrix& a, std::span<const double> sens, std::span<const double> y,
                              std::span<const double> x, double epsilon);
/// Tests every active crystal face.
std::optional<CrystalId> detect_single(const Scanner& scanner, Point2 origin, Point2 dir, std::uint32_t step);
/// Generates the sub-streams one after another on the calling thread.
ListModeSet simulate_scan(const ActivityMap& map, const Scanner& scanner, const SimConfig& config);
/// Direct per-window evaluation with a 2D Gaussian kernel.
double ssim(const Image& reference, const Image& estimate, double data_range);

} // namespace tomopet::serial
