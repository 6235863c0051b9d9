#include "tomopet/loss.hpp"

#include <cmath>
#include <set>
#include <string>

#include "tomopet/error.hpp"
#include "tomopet/parallel.hpp"

namespace tomopet {

LossWeights LossWeights::preset(std::string_view name) {
    LossWeights w;
    if (name == "lpet") return w;
    if (name == "vlpet" || name == "vlpet-adni") {
        w.lambda_c = 3e-4;
        w.lambda_d = 1e-4;
        return w;
    }
    throw ValidationError("unknown loss preset \"" + std::string(name) + "\" (expected lpet, vlpet, vlpet-adni)");
}

void LossWeights::validate() const {
    for (double v : {lambda_grad, gamma, lambda_c, lambda_d, tau, lambda_fm})
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("loss weights must be finite and >= 0");
    if (!(tau > 0.0)) throw ValidationError("loss weights: tau must be > 0");
}

nlohmann::json LossWeights::to_json() const {
    return {{"lambda_grad", lambda_grad}, {"gamma", gamma}, {"lambda_c", lambda_c},
            {"lambda_d", lambda_d},       {"tau", tau},     {"lambda_fm", lambda_fm}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys{"preset", "lambda_grad", "gamma", "lambda_c", "lambda_d", "tau",
                                             "lambda_fm"};
    if (!j.is_object()) throw ValidationError("loss weights must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!kKeys.count(k)) throw ValidationError("loss weights: unknown key \"" + k + "\"");
    LossWeights w;
    try {
        if (j.contains("preset")) w = preset(j.at("preset").get<std::string>());
        w.lambda_grad = j.value("lambda_grad", w.lambda_grad);
        w.gamma = j.value("gamma", w.gamma);
        w.lambda_c = j.value("lambda_c", w.lambda_c);
        w.lambda_d = j.value("lambda_d", w.lambda_d);
        w.tau = j.value("tau", w.tau);
        w.lambda_fm = j.value("lambda_fm", w.lambda_fm);
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("loss weights: ") + ex.what());
    }
    w.validate();
    return w;
}

namespace {

void require_shape(const GridSpec& a, const GridSpec& b, const char* what) {
    if (a.width != b.width || a.height != b.height)
        throw ValidationError(std::string(what) + ": image dimensions differ (" + std::to_string(a.width) + "x" +
                              std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                              std::to_string(b.height) + ")");
}

void require_samples(std::span<const Image> samples, std::size_t min_count, const char* what) {
    if (samples.size() < min_count)
        throw ValidationError(std::string(what) + ": needs at least " + std::to_string(min_count) + " samples, got " +
                              std::to_string(samples.size()));
    for (const auto& s : samples) require_shape(samples.front().grid(), s.grid(), what);
}

} // namespace

double consistency_loss(const LinearOperator& op, const Image& y_l, const Image& g_out) {
    require_shape(y_l.grid(), g_out.grid(), "consistency_loss");
    require_shape(op.domain(), y_l.grid(), "consistency_loss");
    const auto ry = op.apply(y_l.values());
    const auto rg = op.apply(g_out.values());
    return blocked_sum(ry.size(), [&](std::size_t i) {
        const double d = ry[i] - rg[i];
        return d * d;
    });
}

double diversity_loss(std::span<const Image> samples) {
    require_samples(samples, 2, "diversity_loss");
    const std::size_t k = samples.size();
    double total = 0.0;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) {
            const auto& va = samples[a].values();
            const auto& vb = samples[b].values();
            total += blocked_sum(va.size(), [&](std::size_t i) { return std::abs(va[i] - vb[i]); });
        }
    return total / double(k * (k - 1) / 2);
}

double first_moment_loss(const Image& ground_truth, std::span<const Image> samples) {
    require_samples(samples, 1, "first_moment_loss");
    require_shape(ground_truth.grid(), samples.front().grid(), "first_moment_loss");
    const double k = double(samples.size());
    const auto& g = ground_truth.values();
    return blocked_sum(g.size(), [&](std::size_t i) {
        double s = 0.0;
        for (const auto& img : samples) s += img[i];
        const double d = g[i] - s / k;
        return d * d;
    });
}

double combine_objective(double adv, double grad_pen, double consistency, double diversity, double first_moment,
                         const LossWeights& w) {
    w.validate();
    if (!(diversity >= 0.0)) throw ValidationError("combine_objective: diversity term must be >= 0");
    return adv - w.lambda_grad * grad_pen + w.lambda_c * consistency + w.lambda_d / (diversity + w.tau) +
           w.lambda_fm * first_moment;
}

} // namespace tomopet
