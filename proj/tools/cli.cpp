#include "tomopet/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tomopet/error.hpp"
#include "tomopet/event_sim.hpp"
#include "tomopet/hashing.hpp"
#include "tomopet/loss.hpp"
#include "tomopet/mlem.hpp"
#include "tomopet/parallel.hpp"
#include "tomopet/phantom_io.hpp"
#include "tomopet/radon.hpp"
#include "tomopet/render.hpp"
#include "tomopet/scanner.hpp"
#include "tomopet/system_matrix.hpp"
#include "tomopet/uq.hpp"

namespace tomopet {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

json read_json_file(const fs::path& path) {
    const Bytes bytes = read_file(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& ex) {
        throw ValidationError(path.string() + ": invalid JSON: " + ex.what());
    }
}

std::string file_sha256(const fs::path& path) { return to_hex(sha256(read_file(path))); }

std::string bytes_sha256(const Bytes& b) { return to_hex(sha256(b)); }

json number_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

ScannerConfig scanner_config_from(const std::string& path) {
    if (path.empty()) return ScannerConfig{};
    return ScannerConfig::from_json(read_json_file(path));
}

json input_record(const std::string& path) { return {{"path", path}, {"sha256", file_sha256(path)}}; }

json provenance_base(const std::string& command) {
    return {{"tool", "tomopet"}, {"version", kVersion}, {"command", command}};
}

/// Writes output files and records their hashes; on failure every file and
/// directory created so far is removed again.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

    void open() {
        if (!fs::exists(dir_)) created_dirs_.push_back(dir_);
        ensure_dir(dir_);
    }

    fs::path subdir(const std::string& name) {
        fs::path p = dir_ / name;
        if (!fs::exists(p)) created_dirs_.push_back(p);
        ensure_dir(p);
        return p;
    }

    void write(const std::string& rel, const Bytes& bytes) {
        const fs::path p = dir_ / rel;
        files_.push_back(p);
        write_file(p, bytes);
        hashes_[rel] = bytes_sha256(bytes);
    }

    void write_text(const std::string& rel, const std::string& text) {
        const fs::path p = dir_ / rel;
        files_.push_back(p);
        write_text_file(p, text);
        hashes_[rel] = to_hex(sha256(std::string_view(text)));
    }

    void write_json(const std::string& rel, const json& j) { write_text(rel, j.dump(2) + "\n"); }

    const json& hashes() const { return hashes_; }

    void rollback() noexcept {
        std::error_code ec;
        for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
        for (auto it = created_dirs_.rbegin(); it != created_dirs_.rend(); ++it) fs::remove_all(*it, ec);
    }

private:
    fs::path dir_;
    std::vector<fs::path> files_;
    std::vector<fs::path> created_dirs_;
    json hashes_ = json::object();
};

struct Common {
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::string scanner;
    std::string config;
    int threads = 0;
};

void add_common(CLI::App* app, Common& c, bool with_scanner = true, bool with_config = true) {
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
    if (with_scanner) app->add_option("--scanner", c.scanner, "Scanner config JSON (defaults if omitted)");
    if (with_config) app->add_option("--config", c.config, "Subcommand config JSON");
    app->add_option("--threads", c.threads, "OpenMP worker count (0 = runtime default)");
}

void apply_threads(const Common& c) {
    if (c.threads < 0) throw ValidationError("--threads must be >= 0");
    if (c.threads > 0) set_num_threads(c.threads);
}

GridSpec grid_from(std::optional<std::uint32_t> w, std::optional<std::uint32_t> h, std::optional<double> ps,
                   const std::optional<GridSpec>& like) {
    GridSpec g = like.value_or(GridSpec{128, 128, 2.0});
    if (w) g.width = *w;
    if (h) g.height = *h;
    if (ps) g.pixel_size = *ps;
    g.validate();
    return g;
}

/// Builds the matrix (weights rounded to the on-disk precision) or loads it
/// from `cache`; a new cache file is written when the path does not exist.
SystemMatrix obtain_matrix(const Scanner& scanner, const GridSpec& grid, const std::string& cache, bool* loaded) {
    *loaded = false;
    if (!cache.empty() && fs::exists(cache)) {
        *loaded = true;
        return load_psys(cache, scanner.hash(), grid);
    }
    SystemMatrix a = build_system_matrix(scanner, grid).rounded_to_f32();
    if (!cache.empty()) write_file(cache, encode_psys(a));
    return a;
}

std::string loglik_csv(const std::vector<double>& ll) {
    std::string s = "iteration,log_likelihood\n";
    char buf[64];
    for (std::size_t i = 0; i < ll.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, ll[i]);
        s += buf;
    }
    return s;
}

/// Reconstructions are in count units: the estimate is first rescaled to the
/// reference's total activity, then both take the reference's [0, 1] range.
double activity_matched_psnr(const Image& reference, const Image& estimate) {
    const double t = estimate.total();
    std::vector<double> v(estimate.values());
    if (t > 0.0)
        for (auto& e : v) e *= reference.total() / t;
    const Image matched(reference.grid(), std::move(v));
    return psnr(scale_to_reference_range(reference, reference), scale_to_reference_range(matched, reference), 1.0);
}

std::uint64_t dose_preset(const std::string& name) {
    if (name == "lpet") return 25'000'000;
    if (name == "vlpet") return 5'000'000;
    if (name == "vlpet-adni") return 2'000'000;
    throw ValidationError("unknown dose preset \"" + name + "\" (expected lpet, vlpet, vlpet-adni)");
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string phantom;
    std::optional<std::uint64_t> n_total;
    std::optional<double> p_random, p_scatter, hg_g, half_angle, scan_time;
    std::optional<std::string> acollinearity;
};

SimConfig sim_config_from(const std::string& path) {
    if (path.empty()) return SimConfig{};
    return SimConfig::from_json(read_json_file(path));
}

void override_sim(SimConfig& c, const SimulateArgs& a) {
    if (a.n_total) c.n_total = *a.n_total;
    if (a.p_random) c.p_random = *a.p_random;
    if (a.p_scatter) c.p_scatter = *a.p_scatter;
    if (a.hg_g) c.hg_g = *a.hg_g;
    if (a.half_angle) c.acollinearity_half_angle_deg = *a.half_angle;
    if (a.scan_time) c.scan_time_s = *a.scan_time;
    if (a.acollinearity) c = SimConfig::from_json([&] {
        json j = c.to_json();
        j["acollinearity"] = *a.acollinearity;
        return j;
    }());
    if (a.common.seed) c.seed = *a.common.seed;
}

void add_sim_flags(CLI::App* app, SimulateArgs& a) {
    app->add_option("--n-total", a.n_total, "Number of coincidences to generate");
    app->add_option("--p-random", a.p_random, "Fraction of random coincidences");
    app->add_option("--p-scatter", a.p_scatter, "Fraction of scattered coincidences");
    app->add_option("--hg-g", a.hg_g, "Henyey-Greenstein asymmetry factor");
    app->add_option("--acollinearity-half-angle", a.half_angle, "Acollinearity half-width (degrees)");
    app->add_option("--acollinearity", a.acollinearity, "uniform or truncated_gaussian");
    app->add_option("--scan-time", a.scan_time, "Scan duration (s)");
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    apply_threads(a.common);
    SimConfig sim = sim_config_from(a.common.config);
    override_sim(sim, a);
    sim.validate();
    const ScannerConfig sc = scanner_config_from(a.common.scanner);
    const ActivityMap phantom = load_image(a.phantom);
    const Scanner scanner(sc);

    const ListModeSet events = simulate_scan(phantom, scanner, sim);
    const Sinogram sino = bin_to_sinogram(events, scanner);

    OutputSet outputs(a.common.out_dir);
    outputs.open();
    outputs.write("events.plst", encode_plst(events));
    outputs.write("sinogram.psin", encode_psin(sino));
    json prov = provenance_base("simulate");
    prov["seed"] = sim.seed;
    prov["sim_config"] = sim.to_json();
    prov["scanner_config"] = sc.to_json();
    prov["scanner_hash"] = to_hex(scanner.hash());
    prov["inputs"] = {{"phantom", input_record(a.phantom)}};
    prov["counts"] = {{"total", events.events.size()},
                      {"true", events.count(EventKind::true_coincidence)},
                      {"random", events.count(EventKind::random)},
                      {"scattered", events.count(EventKind::scattered)},
                      {"n_bins", sino.counts.size()}};
    prov["outputs"] = outputs.hashes();
    outputs.write_json("provenance.json", prov);
    out << "simulated " << events.events.size() << " coincidences into " << a.common.out_dir << "\n";
    return kExitOk;
}

struct ReconstructArgs {
    Common common;
    std::string sinogram;
    std::string matrix_cache;
    std::string reference;
    std::optional<std::uint32_t> iterations, width, height;
    std::optional<double> epsilon, pixel_size;
};

MlemConfig mlem_config_from(const std::string& path) {
    if (path.empty()) return MlemConfig{};
    return MlemConfig::from_json(read_json_file(path));
}

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out) {
    apply_threads(a.common);
    MlemConfig mc = mlem_config_from(a.common.config);
    if (a.iterations) mc.n_iterations = *a.iterations;
    if (a.epsilon) mc.epsilon = *a.epsilon;
    mc.validate();
    const ScannerConfig sc = scanner_config_from(a.common.scanner);
    const Sinogram sino = decode_psin(read_file(a.sinogram));
    std::optional<Image> reference;
    if (!a.reference.empty()) reference = load_signed_image(a.reference);
    const GridSpec grid =
        grid_from(a.width, a.height, a.pixel_size, reference ? std::optional(reference->grid()) : std::nullopt);

    const Scanner scanner(sc);
    bool loaded = false;
    const SystemMatrix a_mat = obtain_matrix(scanner, grid, a.matrix_cache, &loaded);
    if (sino.counts.size() != scanner.lors().size())
        throw ValidationError("sinogram has " + std::to_string(sino.counts.size()) + " bins, scanner defines " +
                              std::to_string(scanner.lors().size()));
    const MlemResult r = mlem_reconstruct(a_mat, sino.as_double(), mc);

    OutputSet outputs(a.common.out_dir);
    outputs.open();
    outputs.write("recon.pimg", encode_pimg(r.image));
    outputs.write_text("loglik.csv", loglik_csv(r.log_likelihood));
    json prov = provenance_base("reconstruct");
    prov["mlem_config"] = mc.to_json();
    prov["scanner_config"] = sc.to_json();
    prov["scanner_hash"] = to_hex(scanner.hash());
    prov["grid"] = {{"width", grid.width}, {"height", grid.height}, {"pixel_size", grid.pixel_size}};
    prov["grid_hash"] = to_hex(grid_hash(grid));
    prov["inputs"] = {{"sinogram", input_record(a.sinogram)}};
    if (!a.matrix_cache.empty()) prov["inputs"]["matrix_cache"] = {{"path", a.matrix_cache}, {"reused", loaded}};
    if (reference) {
        prov["inputs"]["reference"] = input_record(a.reference);
        prov["psnr_db"] = number_or_inf(activity_matched_psnr(*reference, r.image));
    }
    prov["final_log_likelihood"] = r.log_likelihood.back();
    prov["outputs"] = outputs.hashes();
    outputs.write_json("provenance.json", prov);
    out << "reconstructed " << grid.width << "x" << grid.height << " image with " << mc.n_iterations
        << " iterations into " << a.common.out_dir << "\n";
    return kExitOk;
}

struct DatasetArgs {
    Common common;
    std::string volume;
    std::string dose;
    std::optional<std::uint64_t> n_total;
    std::string sim_config;
    std::string mlem_config;
    std::optional<std::uint32_t> iterations;
    double test_fraction = 0.2;
    bool plan_only = false;
};

int cmd_dataset(const DatasetArgs& a, std::ostream& out) {
    apply_threads(a.common);
    if (!(a.test_fraction >= 0.0 && a.test_fraction <= 1.0))
        throw ValidationError("--test-fraction must be in [0, 1]");
    if (a.dose.empty() == !a.n_total) throw ValidationError("give exactly one of --dose and --n-total");
    const std::uint64_t n_total = a.n_total ? *a.n_total : dose_preset(a.dose);

    SimConfig sim = sim_config_from(a.sim_config.empty() ? a.common.config : a.sim_config);
    if (a.common.seed) sim.seed = *a.common.seed;
    sim.n_total = n_total;
    sim.validate();
    MlemConfig mc = mlem_config_from(a.mlem_config);
    if (a.iterations) mc.n_iterations = *a.iterations;
    mc.validate();
    const ScannerConfig sc = scanner_config_from(a.common.scanner);
    sc.validate();

    std::vector<fs::path> slice_paths;
    const PhantomVolume volume = PhantomVolume::load_directory(a.volume, &slice_paths);
    const auto budgets = slice_event_budget(volume, n_total);
    const std::size_t n = volume.size();
    const auto n_test = std::size_t(std::llround(a.test_fraction * double(n)));

    json prov = provenance_base("dataset");
    prov["dose_preset"] = a.dose.empty() ? json(nullptr) : json(a.dose);
    prov["n_total"] = n_total;
    prov["seed"] = sim.seed;
    prov["sim_config"] = sim.to_json();
    prov["mlem_config"] = mc.to_json();
    prov["scanner_config"] = sc.to_json();
    prov["slice_budgets"] = budgets;
    json inputs = json::array();
    for (const auto& p : slice_paths) inputs.push_back(input_record(p.string()));
    prov["inputs"] = {{"volume", a.volume}, {"slices", inputs}};

    OutputSet outputs(a.common.out_dir);
    outputs.open();
    try {
        if (a.plan_only) {
            prov["plan_only"] = true;
            outputs.write_json("provenance.json", prov);
            out << "planned " << n << " slices, " << n_total << " coincidences\n";
            return kExitOk;
        }
        const GridSpec grid = volume.slices().front().grid();
        for (const auto& s : volume.slices())
            if (!(s.grid() == grid)) throw ValidationError("all volume slices must share one grid");
        const Scanner scanner(sc);
        const SystemMatrix matrix = build_system_matrix(scanner, grid).rounded_to_f32();
        outputs.subdir("slices");

        DatasetManifest manifest;
        json slice_records = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            SimConfig sc_i = sim;
            sc_i.n_total = budgets[i];
            sc_i.seed = sim.seed + i;
            const ListModeSet events = simulate_scan(volume.slices()[i], scanner, sc_i);
            const Sinogram sino = bin_to_sinogram(events, scanner);
            char stem[48];
            std::snprintf(stem, sizeof stem, "slices/slice_%04zu", i);
            const std::string lpet = std::string(stem) + "_lpet.pimg";
            const std::string gt = std::string(stem) + "_gt.pimg";
            if (events.events.size() > 0) {
                const MlemResult r = mlem_reconstruct(matrix, sino.as_double(), mc);
                outputs.write(lpet, encode_pimg(r.image));
            } else {
                outputs.write(lpet, encode_pimg(ActivityMap(grid)));
            }
            outputs.write(gt, encode_pimg(volume.slices()[i]));
            const std::string sim_id = to_hex(sha256(sc_i.to_json().dump())).substr(0, 16);
            manifest.entries.push_back({lpet, std::nullopt, gt, sim_id, i + n_test >= n ? Split::test : Split::train});
            slice_records.push_back(json{{"slice", i}, {"n_total", budgets[i]}, {"seed", sc_i.seed},
                                     {"sim_config_id", sim_id}, {"detected", events.events.size()}});
        }
        manifest.validate(a.common.out_dir);
        outputs.write_json("manifest.json", manifest.to_json());
        prov["slices"] = slice_records;
        prov["outputs"] = outputs.hashes();
        outputs.write_json("provenance.json", prov);
    } catch (...) {
        outputs.rollback();
        throw;
    }
    out << "wrote dataset of " << n << " slices into " << a.common.out_dir << "\n";
    return kExitOk;
}

struct RadonArgs {
    Common common;
    std::string image;
    std::string like;
    bool adjoint = false;
    std::optional<std::uint32_t> width, height;
    std::optional<double> pixel_size;
};

int cmd_radon(const RadonArgs& a, std::ostream& out) {
    apply_threads(a.common);
    const Image input = load_signed_image(a.image);
    GridSpec grid;
    if (a.adjoint) {
        std::optional<GridSpec> like;
        if (!a.like.empty()) like = load_signed_image(a.like).grid();
        if (!like && !(a.width && a.height))
            throw ValidationError("--adjoint needs the image grid (--like or --width/--height)");
        grid = grid_from(a.width, a.height, a.pixel_size, like);
    } else {
        grid = input.grid();
    }
    const RadonSpec spec =
        a.common.config.empty() ? RadonSpec::defaults_for(grid) : RadonSpec::from_json(read_json_file(a.common.config));
    const RadonTransform op(spec, grid);
    const Image result = a.adjoint ? op.adjoint(input) : op.forward(input);

    OutputSet outputs(a.common.out_dir);
    outputs.open();
    const std::string name = a.adjoint ? "adjoint.pimg" : "sinogram.pimg";
    outputs.write(name, encode_pimg(result));
    json prov = provenance_base("radon");
    prov["radon_spec"] = spec.to_json();
    prov["adjoint"] = a.adjoint;
    prov["inputs"] = {{"image", input_record(a.image)}};
    prov["outputs"] = outputs.hashes();
    outputs.write_json("provenance.json", prov);
    out << "wrote " << (fs::path(a.common.out_dir) / name).string() << "\n";
    return kExitOk;
}

struct LossArgs {
    Common common;
    std::string a_path, b_path, samples, ground_truth, radon_config;
    bool identity = false;
    double adv = 0, grad_pen = 0, consistency = 0, diversity = 0, first_moment = 0;
    std::string preset = "lpet";
};

std::vector<Image> samples_of(const std::string& path) { return load_psmp(path).samples(); }

void emit(std::ostream& out, const Common& c, const std::string& file, const json& j) {
    out << j.dump(2) << "\n";
    if (c.out_dir != ".") {
        ensure_dir(c.out_dir);
        write_json(fs::path(c.out_dir) / file, j);
    }
}

int cmd_loss_consistency(const LossArgs& a, std::ostream& out) {
    apply_threads(a.common);
    const Image y = load_signed_image(a.a_path);
    const Image g = load_signed_image(a.b_path);
    double v = 0.0;
    json j = {{"kernel", "consistency"}};
    if (a.identity) {
        v = consistency_loss(IdentityOperator(y.grid()), y, g);
        j["operator"] = "identity";
    } else {
        const RadonSpec spec = a.radon_config.empty() ? RadonSpec::defaults_for(y.grid())
                                                      : RadonSpec::from_json(read_json_file(a.radon_config));
        v = consistency_loss(RadonTransform(spec, y.grid()), y, g);
        j["operator"] = "radon";
        j["radon_spec"] = spec.to_json();
    }
    j["value"] = v;
    emit(out, a.common, "loss.json", j);
    return kExitOk;
}

int cmd_loss_diversity(const LossArgs& a, std::ostream& out) {
    apply_threads(a.common);
    const auto s = samples_of(a.samples);
    emit(out, a.common, "loss.json", {{"kernel", "diversity"}, {"k", s.size()}, {"value", diversity_loss(s)}});
    return kExitOk;
}

int cmd_loss_first_moment(const LossArgs& a, std::ostream& out) {
    apply_threads(a.common);
    const Image gt = load_signed_image(a.ground_truth);
    const auto s = samples_of(a.samples);
    emit(out, a.common, "loss.json",
         {{"kernel", "first_moment"}, {"k", s.size()}, {"value", first_moment_loss(gt, s)}});
    return kExitOk;
}

int cmd_loss_combine(const LossArgs& a, std::ostream& out) {
    const LossWeights w = a.common.config.empty() ? LossWeights::preset(a.preset)
                                                  : LossWeights::from_json(read_json_file(a.common.config));
    const double v = combine_objective(a.adv, a.grad_pen, a.consistency, a.diversity, a.first_moment, w);
    emit(out, a.common, "loss.json", {{"kernel", "combine"}, {"weights", w.to_json()}, {"value", v}});
    return kExitOk;
}

struct MetricsArgs {
    Common common;
    std::string reference, estimate;
    std::optional<double> data_range;
    bool no_scale = false;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
    apply_threads(a.common);
    const Image ref = load_signed_image(a.reference);
    const Image est = load_signed_image(a.estimate);
    json j;
    if (a.no_scale) {
        const double range = a.data_range.value_or(reference_range(ref));
        j = {{"psnr_db", number_or_inf(psnr(ref, est, range))}, {"ssim", ssim(ref, est, range)},
             {"data_range", range}, {"scaled", false}};
    } else {
        const Image r = scale_to_reference_range(ref, ref);
        const Image e = scale_to_reference_range(est, ref);
        const double range = a.data_range.value_or(1.0);
        j = {{"psnr_db", number_or_inf(psnr(r, e, range))}, {"ssim", ssim(r, e, range)}, {"data_range", range},
             {"scaled", true}};
    }
    emit(out, a.common, "metrics.json", j);
    return kExitOk;
}

struct UqArgs {
    Common common;
    std::string samples, ground_truth;
    bool unbiased = false;
    double display_max = kDefaultUqDisplayMax;
};

int cmd_uq(const UqArgs& a, std::ostream& out) {
    apply_threads(a.common);
    if (!(a.display_max > 0.0)) throw ValidationError("--display-max must be > 0");
    const PosteriorSampleSet raw = load_psmp(a.samples);
    const Image gt = load_signed_image(a.ground_truth);
    if (raw.k() < 2) throw ValidationError("uq needs at least 2 posterior samples, got " + std::to_string(raw.k()));
    if (gt.width() != raw.grid().width || gt.height() != raw.grid().height)
        throw ValidationError("ground truth and samples have different dimensions");

    std::vector<Image> scaled;
    for (const auto& s : raw.samples()) scaled.push_back(scale_to_reference_range(Image(gt.grid(), s.values()), gt));
    const PosteriorSampleSet set(std::move(scaled), raw.source_id());
    const Image mean = sample_mean(set);
    const UqMap uq =
        sample_variance(set, a.unbiased ? VarianceKind::unbiased : VarianceKind::population);
    const Image gt_scaled = scale_to_reference_range(gt, gt);

    OutputSet outputs(a.common.out_dir);
    outputs.open();
    outputs.write("mean.pimg", encode_pimg(mean));
    outputs.write("uq.pimg", encode_pimg(uq.variance));
    outputs.write("mean.png", render_png(mean, 0.0, 1.0, Colormap::gray));
    outputs.write("uq.png", render_png(uq.variance, 0.0, a.display_max, Colormap::hot));
    json metrics = {{"k", set.k()},
                    {"psnr_db", number_or_inf(psnr(gt_scaled, mean, 1.0))},
                    {"ssim", ssim(gt_scaled, mean, 1.0)},
                    {"variance", a.unbiased ? "unbiased" : "population"},
                    {"mean_variance", uq.variance.total() / double(uq.variance.size())},
                    {"max_variance", uq.variance.max()},
                    {"display_max", a.display_max},
                    {"inputs", {{"samples", input_record(a.samples)}, {"ground_truth", input_record(a.ground_truth)}}},
                    {"outputs", outputs.hashes()}};
    outputs.write_json("metrics.json", metrics);
    out << metrics.dump(2) << "\n";
    return kExitOk;
}

struct RenderArgs {
    Common common;
    std::string image, output, colormap = "gray";
    std::optional<double> lo, hi;
    bool uq = false;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
    const Image img = load_signed_image(a.image);
    double lo = 0, hi = 0;
    Colormap cm = parse_colormap(a.colormap);
    if (a.uq) {
        lo = 0.0;
        hi = kDefaultUqDisplayMax;
    } else {
        lo = img.min();
        hi = img.max() > img.min() ? img.max() : img.min() + 1.0;
    }
    if (a.lo) lo = *a.lo;
    if (a.hi) hi = *a.hi;
    const Bytes png = render_png(img, lo, hi, cm);
    fs::path dest = a.output.empty() ? fs::path(a.common.out_dir) / (fs::path(a.image).stem().string() + ".png")
                                     : fs::path(a.output);
    if (dest.has_parent_path()) ensure_dir(dest.parent_path());
    write_file(dest, png);
    out << "wrote " << dest.string() << "\n";
    return kExitOk;
}

struct PhantomArgs {
    Common common;
    std::string kind = "disk", output;
    std::uint32_t width = 128, height = 128;
    double pixel_size = 2.0;
    PhantomParams params;
};

int cmd_phantom(const PhantomArgs& a, std::ostream& out) {
    const ActivityMap m = make_synthetic_phantom(parse_phantom_kind(a.kind), a.width, a.height, a.pixel_size, a.params);
    const fs::path dest = a.output.empty() ? fs::path(a.common.out_dir) / "phantom.pimg" : fs::path(a.output);
    if (dest.has_parent_path()) ensure_dir(dest.parent_path());
    save_image(dest, m);
    out << "wrote " << dest.string() << " (total activity " << m.total_activity() << ")\n";
    return kExitOk;
}

int report(std::ostream& err, int code, const std::string& msg) {
    err << "tomopet: error: " << msg << "\n";
    return code;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"tomopet: PET simulation, reconstruction and uncertainty toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    std::function<int()> action;

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Simulate a list-mode scan of a phantom slice");
    add_common(s, sim.common);
    s->add_option("--phantom", sim.phantom, "Phantom PIMG")->required();
    add_sim_flags(s, sim);
    s->callback([&] { action = [&] { return cmd_simulate(sim, out); }; });

    ReconstructArgs rec;
    auto* r = app.add_subcommand("reconstruct", "MLEM reconstruction of a PSIN sinogram");
    add_common(r, rec.common);
    r->add_option("--sinogram", rec.sinogram, "Sinogram PSIN")->required();
    r->add_option("--iterations", rec.iterations, "MLEM iterations");
    r->add_option("--epsilon", rec.epsilon, "Denominator guard");
    r->add_option("--width", rec.width, "Image width (pixels)");
    r->add_option("--height", rec.height, "Image height (pixels)");
    r->add_option("--pixel-size", rec.pixel_size, "Pixel size (mm)");
    r->add_option("--reference", rec.reference, "Reference PIMG: sets the grid and reports PSNR");
    r->add_option("--matrix-cache", rec.matrix_cache, "PSYS cache (reused when present, written otherwise)");
    r->callback([&] { action = [&] { return cmd_reconstruct(rec, out); }; });

    DatasetArgs ds;
    auto* d = app.add_subcommand("dataset", "Simulate and reconstruct a phantom volume into a paired dataset");
    add_common(d, ds.common);
    d->add_option("--volume", ds.volume, "Directory of slice PIMGs")->required();
    d->add_option("--dose", ds.dose, "Dose preset: lpet, vlpet, vlpet-adni");
    d->add_option("--n-total", ds.n_total, "Total coincidences over the volume");
    d->add_option("--sim-config", ds.sim_config, "SimConfig JSON");
    d->add_option("--mlem-config", ds.mlem_config, "MlemConfig JSON");
    d->add_option("--iterations", ds.iterations, "MLEM iterations");
    d->add_option("--test-fraction", ds.test_fraction, "Fraction of trailing slices tagged test")
        ->capture_default_str();
    d->add_flag("--plan-only", ds.plan_only, "Only compute budgets and write the provenance record");
    d->callback([&] { action = [&] { return cmd_dataset(ds, out); }; });

    RadonArgs rad;
    auto* ra = app.add_subcommand("radon", "Parallel-beam Radon transform or its adjoint");
    add_common(ra, rad.common, false);
    ra->add_option("--image", rad.image, "Input PIMG (image, or sinogram with --adjoint)")->required();
    ra->add_flag("--adjoint", rad.adjoint, "Apply the adjoint to a sinogram");
    ra->add_option("--like", rad.like, "PIMG whose grid the adjoint output takes");
    ra->add_option("--width", rad.width, "Adjoint output width");
    ra->add_option("--height", rad.height, "Adjoint output height");
    ra->add_option("--pixel-size", rad.pixel_size, "Adjoint output pixel size (mm)");
    ra->callback([&] { action = [&] { return cmd_radon(rad, out); }; });

    LossArgs loss;
    auto* l = app.add_subcommand("loss", "Evaluate a loss kernel");
    l->require_subcommand(1);
    auto* lc = l->add_subcommand("consistency", "||R a - R b||^2");
    add_common(lc, loss.common, false, false);
    lc->add_option("--a", loss.a_path, "First image PIMG")->required();
    lc->add_option("--b", loss.b_path, "Second image PIMG")->required();
    lc->add_option("--radon-config", loss.radon_config, "RadonSpec JSON");
    lc->add_flag("--identity", loss.identity, "Use the identity operator");
    lc->callback([&] { action = [&] { return cmd_loss_consistency(loss, out); }; });
    auto* ld = l->add_subcommand("diversity", "Mean pairwise L1 distance of samples");
    add_common(ld, loss.common, false, false);
    ld->add_option("--samples", loss.samples, "PSMP sample set")->required();
    ld->callback([&] { action = [&] { return cmd_loss_diversity(loss, out); }; });
    auto* lf = l->add_subcommand("first-moment", "||gt - mean(samples)||^2");
    add_common(lf, loss.common, false, false);
    lf->add_option("--samples", loss.samples, "PSMP sample set")->required();
    lf->add_option("--ground-truth", loss.ground_truth, "Ground truth PIMG")->required();
    lf->callback([&] { action = [&] { return cmd_loss_first_moment(loss, out); }; });
    auto* lo = l->add_subcommand("combine", "Generator objective from component values");
    add_common(lo, loss.common, false, true);
    lo->add_option("--adv", loss.adv);
    lo->add_option("--grad-pen", loss.grad_pen);
    lo->add_option("--consistency", loss.consistency);
    lo->add_option("--diversity", loss.diversity);
    lo->add_option("--first-moment", loss.first_moment);
    lo->add_option("--preset", loss.preset, "Weight preset: lpet, vlpet, vlpet-adni")->capture_default_str();
    lo->callback([&] { action = [&] { return cmd_loss_combine(loss, out); }; });

    MetricsArgs met;
    auto* m = app.add_subcommand("metrics", "PSNR and SSIM of an estimate against a reference");
    add_common(m, met.common, false, false);
    m->add_option("--reference", met.reference, "Reference PIMG")->required();
    m->add_option("--estimate", met.estimate, "Estimate PIMG")->required();
    m->add_option("--data-range", met.data_range, "Peak value range");
    m->add_flag("--no-scale", met.no_scale, "Skip scaling both images by the reference range");
    m->callback([&] { action = [&] { return cmd_metrics(met, out); }; });

    UqArgs uq;
    auto* u = app.add_subcommand("uq", "Posterior mean, variance map and metrics of a sample set");
    add_common(u, uq.common, false, false);
    u->add_option("--samples", uq.samples, "PSMP sample set")->required();
    u->add_option("--ground-truth", uq.ground_truth, "Ground truth PIMG")->required();
    u->add_flag("--unbiased", uq.unbiased, "Divide by k - 1 instead of k");
    u->add_option("--display-max", uq.display_max, "Upper end of the UQ display range")->capture_default_str();
    u->callback([&] { action = [&] { return cmd_uq(uq, out); }; });

    RenderArgs ren;
    auto* re = app.add_subcommand("render", "Render a PIMG to PNG");
    add_common(re, ren.common, false, false);
    re->add_option("--image", ren.image, "Input PIMG")->required();
    re->add_option("--output", ren.output, "Output PNG path");
    re->add_option("--lo", ren.lo, "Display minimum");
    re->add_option("--hi", ren.hi, "Display maximum");
    re->add_option("--colormap", ren.colormap, "gray or hot")->capture_default_str();
    re->add_flag("--uq", ren.uq, "Use the UQ display range [0, 0.006]");
    re->callback([&] { action = [&] { return cmd_render(ren, out); }; });

    PhantomArgs ph;
    auto* p = app.add_subcommand("phantom", "Write a synthetic phantom PIMG");
    add_common(p, ph.common, false, false);
    p->add_option("--kind", ph.kind, "disk, shepp_logan or annulus")->capture_default_str();
    p->add_option("--width", ph.width)->capture_default_str();
    p->add_option("--height", ph.height)->capture_default_str();
    p->add_option("--pixel-size", ph.pixel_size)->capture_default_str();
    p->add_option("--amplitude", ph.params.amplitude)->capture_default_str();
    p->add_option("--radius", ph.params.radius_mm, "Disk or outer annulus radius (mm)");
    p->add_option("--inner-radius", ph.params.inner_radius_mm, "Inner annulus radius (mm)");
    p->add_option("--center-x", ph.params.center_x_mm);
    p->add_option("--center-y", ph.params.center_y_mm);
    p->add_option("--output", ph.output, "Output PIMG path");
    p->callback([&] { action = [&] { return cmd_phantom(ph, out); }; });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        const int code = app.exit(e, out, msg);
        if (code == 0) return kExitOk;
        std::string line = msg.str();
        while (!line.empty() && line.back() == '\n') line.pop_back();
        return report(err, kExitValidation, line);
    }

    try {
        return action();
    } catch (const IoError& e) {
        return report(err, kExitIo, e.what());
    } catch (const Error& e) {
        return report(err, kExitValidation, e.what());
    } catch (const std::exception& e) {
        return report(err, kExitInternal, std::string("internal error: ") + e.what());
    }
}

} // namespace tomopet
