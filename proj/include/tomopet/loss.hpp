#pragma once

#include <span>
#include <string_view>

#include <json.hpp>

#include "tomopet/image.hpp"
#include "tomopet/linear_operator.hpp"

namespace tomopet {

/// Weights of the generator objective. Defaults are the L-PET preset.
struct LossWeights {
    double lambda_grad = 0.6;
    double gamma = 10.0;
    double lambda_c = 5e-4;
    double lambda_d = 2e-4;
    double tau = 1e-5;
    double lambda_fm = 2.0;

    /// "lpet", "vlpet" or "vlpet-adni".
    static LossWeights preset(std::string_view name);
    void validate() const;
    nlohmann::json to_json() const;
    static LossWeights from_json(const nlohmann::json& j);
};

/// ||R(y_l) - R(g_out)||_2^2.
double consistency_loss(const LinearOperator& op, const Image& y_l, const Image& g_out);

/// Mean L1 distance over all unordered sample pairs (needs >= 2 samples).
double diversity_loss(std::span<const Image> samples);

/// ||ground_truth - mean(samples)||_2^2 (needs >= 1 sample).
double first_moment_loss(const Image& ground_truth, std::span<const Image> samples);

/// adv - lambda_grad*grad_pen + lambda_c*c + lambda_d/(d + tau) + lambda_fm*fm.
double combine_objective(double adv, double grad_pen, double consistency, double diversity,
                         double first_moment, const LossWeights& w);

} // namespace tomopet
