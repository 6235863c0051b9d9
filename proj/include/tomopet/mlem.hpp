#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "tomopet/image.hpp"
#include "tomopet/system_matrix.hpp"

namespace tomopet {

struct MlemConfig {
    std::uint32_t n_iterations = 50;
    double epsilon = 1e-12;
    double initial_value = 1.0;

    void validate() const;
    nlohmann::json to_json() const;
    static MlemConfig from_json(const nlohmann::json& j);
};

/// One multiplicative update
///   x_j <- (x_j / s_j) * sum_i a_ij * y_i / ((Ax)_i + eps)
/// with pixels of zero sensitivity held at 0.
std::vector<double> mlem_step(const SystemMatrix& a, std::span<const double> sens, std::span<const double> y,
                              std::span<const double> x, double epsilon);

/// Poisson log-likelihood sum_i [y_i log((Ax)_i + eps) - (Ax)_i], dropping the
/// constant log(y_i!) term.
double poisson_log_likelihood(std::span<const double> y, std::span<const double> ax, double epsilon);

struct MlemResult {
    ActivityMap image;
    /// Entry k is the log-likelihood of the k-th iterate; entry 0 is the
    /// initial image, so the trace has n_iterations + 1 values.
    std::vector<double> log_likelihood;
};

MlemResult mlem_reconstruct(const SystemMatrix& a, std::span<const double> y, const MlemConfig& config);

} // namespace tomopet
