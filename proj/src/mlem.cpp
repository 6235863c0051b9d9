#include "tomopet/mlem.hpp"

#include <cmath>
#include <set>
#include <string>

#include "tomopet/error.hpp"
#include "tomopet/parallel.hpp"

namespace tomopet {

void MlemConfig::validate() const {
    if (n_iterations < 1) throw ValidationError("mlem config: n_iterations must be >= 1");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("mlem config: epsilon must be positive");
    if (!(initial_value > 0.0) || !std::isfinite(initial_value))
        throw ValidationError("mlem config: initial_value must be positive");
}

nlohmann::json MlemConfig::to_json() const {
    return {{"n_iterations", n_iterations}, {"epsilon", epsilon}, {"initial_value", initial_value}};
}

MlemConfig MlemConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys{"n_iterations", "epsilon", "initial_value"};
    if (!j.is_object()) throw ValidationError("mlem config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!kKeys.count(k)) throw ValidationError("mlem config: unknown key \"" + k + "\"");
    MlemConfig c;
    try {
        c.n_iterations = j.value("n_iterations", c.n_iterations);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.initial_value = j.value("initial_value", c.initial_value);
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("mlem config: ") + ex.what());
    }
    return c;
}

namespace {

void check_step_inputs(const SystemMatrix& a, std::span<const double> sens, std::span<const double> y,
                       std::span<const double> x) {
    if (sens.size() != a.n_pixels() || x.size() != a.n_pixels())
        throw ValidationError("mlem_step: image dimension mismatch");
    if (y.size() != a.n_bins()) throw ValidationError("mlem_step: sinogram has " + std::to_string(y.size()) +
                                                      " bins, system matrix has " + std::to_string(a.n_bins()));
}

std::vector<double> ratio(std::span<const double> y, std::span<const double> ax, double eps) {
    std::vector<double> r(y.size());
    const auto n = std::ptrdiff_t(y.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = std::size_t(i);
        r[k] = y[k] > 0.0 ? y[k] / (ax[k] + eps) : 0.0;
    }
    return r;
}

std::vector<double> update(std::span<const double> x, std::span<const double> sens, std::span<const double> back) {
    std::vector<double> next(x.size());
    const auto n = std::ptrdiff_t(x.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        const auto k = std::size_t(j);
        next[k] = sens[k] > 0.0 ? (x[k] / sens[k]) * back[k] : 0.0;
    }
    return next;
}

} // namespace

std::vector<double> mlem_step(const SystemMatrix& a, std::span<const double> sens, std::span<const double> y,
                              std::span<const double> x, double epsilon) {
    check_step_inputs(a, sens, y, x);
    const auto ax = forward_project(a, x);
    const auto r = ratio(y, ax, epsilon);
    const auto back = back_project(a, r);
    return update(x, sens, back);
}

double poisson_log_likelihood(std::span<const double> y, std::span<const double> ax, double epsilon) {
    if (y.size() != ax.size()) throw ValidationError("log-likelihood: dimension mismatch");
    return blocked_sum(y.size(), [&](std::size_t i) {
        const double term = y[i] > 0.0 ? y[i] * std::log(ax[i] + epsilon) : 0.0;
        return term - ax[i];
    });
}

MlemResult mlem_reconstruct(const SystemMatrix& a, std::span<const double> y, const MlemConfig& config) {
    config.validate();
    if (y.size() != a.n_bins())
        throw ValidationError("sinogram has " + std::to_string(y.size()) + " bins, system matrix has " +
                              std::to_string(a.n_bins()));
    for (double v : y)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("sinogram counts must be finite and >= 0");
    const auto& sens = a.sensitivity();
    std::vector<double> x(a.n_pixels(), 0.0);
    bool any = false;
    for (std::size_t j = 0; j < x.size(); ++j)
        if (sens[j] > 0.0) {
            x[j] = config.initial_value;
            any = true;
        }
    if (!any) throw ValidationError("reconstruction impossible: no LOR crosses the image grid (zero sensitivity)");

    MlemResult result;
    result.log_likelihood.reserve(config.n_iterations + 1);
    auto ax = forward_project(a, x);
    result.log_likelihood.push_back(poisson_log_likelihood(y, ax, config.epsilon));
    for (std::uint32_t it = 0; it < config.n_iterations; ++it) {
        const auto r = ratio(y, ax, config.epsilon);
        const auto back = back_project(a, r);
        x = update(x, sens, back);
        ax = forward_project(a, x);
        result.log_likelihood.push_back(poisson_log_likelihood(y, ax, config.epsilon));
    }
    result.image = ActivityMap(a.grid(), std::move(x));
    return result;
}

} // namespace tomopet
