// Acceptance gate: one PASS/FAIL line per primary criterion.
#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tomopet/binary_io.hpp"
#include "tomopet/cli.hpp"
#include "tomopet/event_sim.hpp"
#include "tomopet/linear_operator.hpp"
#include "tomopet/loss.hpp"
#include "tomopet/mlem.hpp"
#include "tomopet/parallel.hpp"
#include "tomopet/phantom_io.hpp"
#include "tomopet/radon.hpp"
#include "tomopet/rng.hpp"
#include "tomopet/system_matrix.hpp"
#include "tomopet/uq.hpp"

using namespace tomopet;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Outcome {
    bool pass = true;
    std::string detail;
    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [failed]");
    }
};

double chi2_critical(double df) {
    return boost::math::quantile(boost::math::complement(boost::math::chi_squared(df), 0.01));
}

double inner(const std::vector<double>& a, const std::vector<double>& b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (long double)a[i] * b[i];
    return double(s);
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform();
    return v;
}

Image random_image(const GridSpec& g, Rng& rng) { return Image(g, random_vector(g.size(), rng)); }

ActivityMap disk32() {
    PhantomParams p;
    p.radius_mm = 40;
    return make_synthetic_phantom(PhantomKind::disk, 32, 32, 4.0, p);
}

// Simpson integral of hg_pdf/2 over cos(theta) in [a, b].
double hg_mass(double a, double b, double g) {
    const int m = 2000;
    const double h = (b - a) / m;
    double s = 0;
    for (int i = 0; i <= m; ++i) {
        const double c = a + i * h;
        const double w = (i == 0 || i == m) ? 1 : (i % 2 ? 4 : 2);
        s += w * 0.5 * hg_pdf(std::acos(std::clamp(c, -1.0, 1.0)), g);
    }
    return s * h / 3;
}

Outcome check_hg_physics() {
    Outcome o;
    const auto t0 = Clock::now();
    const double g = 0.98;
    const int n = 1000000;
    Rng rng(2024);
    std::vector<double> c(n);
    double sum = 0;
    for (auto& v : c) {
        v = std::cos(sample_hg_deflection(rng, g));
        sum += v;
    }
    const double mean = sum / n;
    o.check(mean >= 0.975 && mean <= 0.985, "mean cos " + fmt("%.5f", mean) + " in [0.975, 0.985]");

    // Bin edges crowd towards cos = 1 where the density peaks.
    const int k = 60;
    std::vector<double> edges(k + 1);
    for (int i = 0; i <= k; ++i) edges[i] = 1.0 - 2.0 * std::pow(double(k - i) / k, 4.0);
    std::vector<double> expected(k);
    double total = 0;
    for (int i = 0; i < k; ++i) total += expected[i] = n * hg_mass(edges[i], edges[i + 1], g);
    std::vector<long> observed(k, 0);
    for (double v : c) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), v);
        const int b = std::clamp(int(it - edges.begin()) - 1, 0, k - 1);
        ++observed[b];
    }
    double chi2 = 0;
    for (int i = 0; i < k; ++i) chi2 += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
    const double crit = chi2_critical(k - 1);
    o.check(std::abs(total / n - 1.0) < 1e-6, "density mass " + fmt("%.8f", total / n));
    o.check(chi2 < crit, "chi2 " + fmt("%.1f", chi2) + " < " + fmt("%.1f", crit) + " (" + std::to_string(k - 1) + " dof)");
    const double secs = seconds_since(t0);
    o.check(secs < 10.0, "runtime " + fmt("%.2f", secs) + " s < 10 s");
    return o;
}

Outcome check_acollinearity() {
    Outcome o;
    Rng rng(77);
    const int n = 1000000;
    double sum = 0, worst = 0;
    for (int i = 0; i < n; ++i) {
        const auto [d1, d2] = sample_acollinear_pair(rng, 0.5);
        const Point2 back{-d1.x, -d1.y};
        const double d = std::atan2(cross(back, d2), dot(back, d2)) * 180.0 / pi;
        sum += d;
        worst = std::max(worst, std::abs(d));
    }
    const double mean = sum / n;
    const double sigma = 0.5 / std::sqrt(3.0 * n);
    o.check(worst <= 0.5 + 1e-9, "max |delta| " + fmt("%.9f", worst) + " deg <= 0.5");
    o.check(std::abs(mean) <= 3 * sigma, "mean " + fmt("%.2e", mean) + " within 3 sigma (" + fmt("%.2e", 3 * sigma) + ")");
    return o;
}

Outcome check_event_mix() {
    Outcome o;
    const Scanner sc(oracle::small_scanner());
    SimConfig c;
    c.n_total = 100000;
    c.p_random = 0.15;
    c.p_scatter = 0.15;
    c.seed = 5;
    const auto set = simulate_scan(disk32(), sc, c);
    const double n = double(c.n_total);
    const std::pair<EventKind, double> kinds[] = {
        {EventKind::true_coincidence, 0.7}, {EventKind::random, 0.15}, {EventKind::scattered, 0.15}};
    const char* names[] = {"true", "random", "scattered"};
    for (int i = 0; i < 3; ++i) {
        const double count = double(set.count(kinds[i].first));
        const double p = kinds[i].second, band = 3 * std::sqrt(n * p * (1 - p));
        o.check(std::abs(count - n * p) <= band,
                std::string(names[i]) + " " + fmt("%.0f", count) + " in " + fmt("%.0f", n * p) + " +- " + fmt("%.0f", band));
    }
    const auto sino = bin_to_sinogram(set, sc);
    o.check(sino.total() == c.n_total && set.events.size() == c.n_total,
            "sinogram sum " + std::to_string(sino.total()) + " = n_total");
    return o;
}

Outcome check_projectors() {
    Outcome o;
    const Scanner sc(oracle::small_scanner());
    const GridSpec g = oracle::small_grid();
    const SystemMatrix a = build_system_matrix(sc, g);
    Rng rng(99);
    double worst_a = 0;
    for (int t = 0; t < 50; ++t) {
        const auto x = random_vector(a.n_pixels(), rng), y = random_vector(a.n_bins(), rng);
        worst_a = std::max(worst_a, oracle::rel_diff(inner(forward_project(a, x), y), inner(x, back_project(a, y))));
    }
    o.check(worst_a <= 1e-12, "matrix adjoint max rel " + fmt("%.1e", worst_a));

    double worst_r = 0;
    for (int t = 0; t < 50; ++t) {
        const GridSpec rg{std::uint32_t(8 + rng.uniform() * 24), std::uint32_t(8 + rng.uniform() * 24),
                          0.5 + rng.uniform() * 2};
        RadonSpec spec = RadonSpec::defaults_for(rg);
        spec.n_angles = std::uint32_t(1 + rng.uniform() * 90);
        const RadonTransform r(spec, rg);
        const Image x = random_image(rg, rng);
        const Image s = random_image(r.sinogram_grid(), rng);
        worst_r = std::max(worst_r, oracle::rel_diff(inner(r.forward(x).values(), s.values()),
                                                     inner(x.values(), r.adjoint(s).values())));
    }
    o.check(worst_r <= 1e-12, "Radon adjoint max rel " + fmt("%.1e", worst_r));

    double worst_len = 0;
    int rows = 0;
    while (rows < 100) {
        const auto bin = std::size_t(rng.uniform() * a.n_bins());
        const Lor lor = sc.lors().at(bin);
        if (!sc.lor_unobstructed(lor)) continue;
        const auto [p0, p1] = sc.lor_endpoints(lor);
        double s = 0;
        for (const auto& e : a.row(bin)) s += e.weight;
        worst_len = std::max(worst_len, std::abs(s - oracle::chord_in_grid(g, p0, p1)));
        ++rows;
    }
    o.check(worst_len <= 1e-9, "row sum vs chord length max " + fmt("%.1e", worst_len) + " mm on 100 unshadowed LORs");
    return o;
}

Outcome check_mlem() {
    Outcome o;
    const auto t0 = Clock::now();
    const SystemMatrix one(GridSpec{1, 1, 1.0}, {0, 1}, {{0, 2.0}}, Digest{}, Digest{});
    const std::vector<double> s{2.0}, y{6.0};
    const double x1 = mlem_step(one, s, y, std::vector<double>{1.0}, 1e-300)[0];
    const double x2 = mlem_step(one, s, y, std::vector<double>{3.0}, 1e-300)[0];
    o.check(x1 == 3.0 && x2 == 3.0, "scalar step 1 -> " + fmt("%.17g", x1) + ", fixed point 3 -> " + fmt("%.17g", x2));

    const Scanner sc(oracle::small_scanner());
    const ActivityMap disk = disk32();
    const SystemMatrix a = build_system_matrix(sc, disk.grid());
    SimConfig c;
    c.n_total = 200000;
    c.seed = 8;
    const auto counts = bin_to_sinogram(simulate_scan(disk, sc, c), sc).as_double();
    MlemConfig mc;
    mc.n_iterations = 200;
    const auto noisy = mlem_reconstruct(a, counts, mc);
    double worst_drop = 0;
    for (std::size_t k = 1; k < noisy.log_likelihood.size(); ++k)
        worst_drop = std::max(worst_drop, noisy.log_likelihood[k - 1] - noisy.log_likelihood[k]);
    o.check(worst_drop <= 1e-9, "log-likelihood largest decrease " + fmt("%.2e", worst_drop) + " over 200 iterations");

    const auto clean = mlem_reconstruct(a, forward_project(a, disk), mc);
    double num = 0, den = 0;
    for (std::size_t j = 0; j < disk.size(); ++j) {
        num += (clean.image[j] - disk[j]) * (clean.image[j] - disk[j]);
        den += disk[j] * disk[j];
    }
    const double err = std::sqrt(num / den);
    o.check(err <= 0.10, "noiseless relative L2 error " + fmt("%.4f", err) + " <= 0.10");
    const double secs = seconds_since(t0);
    o.check(secs < 60.0, "runtime " + fmt("%.1f", secs) + " s < 60 s");
    return o;
}

// Max/min of arc-averaged sensitivity on rings of pixels around the centre.
double ring_ratio(const std::vector<double>& sens, const GridSpec& g, double radius, int n_arcs) {
    std::vector<double> sum(n_arcs, 0.0);
    std::vector<int> cnt(n_arcs, 0);
    for (std::uint32_t iy = 0; iy < g.height; ++iy)
        for (std::uint32_t ix = 0; ix < g.width; ++ix) {
            const Point2 p = g.pixel_center(ix, iy);
            if (std::abs(std::hypot(p.x, p.y) - radius) >= 0.5 * g.pixel_size) continue;
            double phi = std::atan2(p.y, p.x);
            if (phi < 0) phi += 2 * pi;
            const int arc = std::min(n_arcs - 1, int(phi / (2 * pi) * n_arcs));
            sum[arc] += sens[std::size_t(iy) * g.width + ix];
            ++cnt[arc];
        }
    double lo = INFINITY, hi = 0;
    for (int k = 0; k < n_arcs; ++k) {
        if (cnt[k] == 0) continue;
        const double v = sum[k] / cnt[k];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi / lo;
}

Outcome check_sensitivity() {
    Outcome o;
    const GridSpec g{64, 64, 4.0};
    const double radii[] = {32, 64, 96};
    for (std::uint32_t steps : {1u, ScannerConfig{}.n_rotation_steps}) {
        ScannerConfig partial;
        partial.n_rotation_steps = steps;
        const ScannerConfig full = ScannerConfig::all_active(partial);
        const auto s12 = build_system_matrix(Scanner(partial), g).sensitivity();
        const auto s20 = build_system_matrix(Scanner(full), g).sensitivity();
        for (double r : radii) {
            const double q12 = ring_ratio(s12, g, r, 36), q20 = ring_ratio(s20, g, r, 36);
            const std::string what = "R=" + fmt("%.0f", r) + " mm: 12-sector " + fmt("%.3f", q12) + " vs 20-sector " +
                                     fmt("%.3f", q20);
            if (steps == 1)
                o.check(q12 > q20, "static " + what);
            else
                o.detail += "; rotating (info) " + what;
        }
    }
    return o;
}

Outcome check_loss_kernels() {
    Outcome o;
    const GridSpec g{16, 16, 1.0};
    Rng rng(31);
    const Image a = random_image(g, rng), b = random_image(g, rng);
    const RadonTransform radon(RadonSpec::defaults_for(g), g);
    const Image ra = radon.forward(a), rb = radon.forward(b);
    double ref_c = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) ref_c += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    double ref_ci = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ref_ci += (a[i] - b[i]) * (a[i] - b[i]);
    const double ec = std::max(oracle::rel_diff(consistency_loss(radon, a, b), ref_c),
                               oracle::rel_diff(consistency_loss(IdentityOperator(g), a, b), ref_ci));
    o.check(ec <= 1e-12, "consistency rel " + fmt("%.1e", ec));

    std::vector<Image> s;
    for (int i = 0; i < 6; ++i) s.push_back(random_image(g, rng));
    double ref_d = 0;
    int pairs = 0;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j, ++pairs)
            for (std::size_t p = 0; p < g.size(); ++p) ref_d += std::abs(s[i][p] - s[j][p]);
    ref_d /= pairs;
    const double ed = oracle::rel_diff(diversity_loss(s), ref_d);
    o.check(ed <= 1e-12, "diversity rel " + fmt("%.1e", ed));

    double ref_f = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        double m = 0;
        for (const auto& im : s) m += im[p];
        m /= 6;
        ref_f += (a[p] - m) * (a[p] - m);
    }
    const double ef = oracle::rel_diff(first_moment_loss(a, s), ref_f);
    o.check(ef <= 1e-12, "first moment rel " + fmt("%.1e", ef));

    const double v = combine_objective(0, 0, 0, 0, 0, LossWeights::preset("lpet"));
    o.check(v == 20.0, "combine with zero components " + fmt("%.17g", v) + " == 20");
    return o;
}

Outcome check_uq_pipeline() {
    Outcome o;
    const GridSpec g{32, 32, 1.0};
    std::vector<double> ramp(g.size());
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.5 + 0.4 * std::sin(0.1 * double(i));
    const Image x(g, ramp);
    const auto set = decode_psmp(encode_psmp(PosteriorSampleSet({x, x, x, x})));
    o.check(sample_variance(set).variance.max() == 0.0, "identical PSMP samples give zero variance");

    const GridSpec one{1, 1, 1.0};
    const double v = sample_variance(PosteriorSampleSet({Image(one, {0.0}), Image(one, {1.0})})).variance[0];
    o.check(v == 0.25, "k=2 {0,1} variance " + fmt("%.17g", v));

    std::vector<double> shifted(ramp);
    for (auto& e : shifted) e += 0.1;
    const double p = psnr(x, Image(g, shifted), 1.0);
    o.check(std::abs(p - 20.0) <= 1e-6, "uniform 0.1 error PSNR " + fmt("%.9f", p) + " dB");
    const double s = ssim(x, x, 1.0);
    o.check(s == 1.0, "SSIM(x, x) = " + fmt("%.17g", s));
    return o;
}

std::map<std::string, Bytes> snapshot(const fs::path& dir) {
    std::map<std::string, Bytes> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
    return files;
}

int cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
    return code;
}

Outcome check_determinism() {
    Outcome o;
    const fs::path root = fs::temp_directory_path() / "tomopet_acceptance";
    fs::remove_all(root);
    fs::create_directories(root / "vol");
    const std::string scanner = (root / "scanner.json").string();
    write_text_file(scanner, oracle::small_scanner().to_json().dump());
    const std::string phantom = (root / "vol" / "a.pimg").string();
    save_image(phantom, disk32());
    PhantomParams pp;
    save_image(root / "vol" / "b.pimg", make_synthetic_phantom(PhantomKind::shepp_logan, 32, 32, 4.0, pp));

    auto run_all = [&](const std::string& tag, const std::string& threads) {
        const fs::path d = root / tag;
        // Inputs are shared so provenance paths agree; outputs go per run.
        bool ok = cli({"simulate", "--phantom", phantom, "--scanner", scanner, "--n-total", "20000", "--seed", "42",
                       "--threads", threads, "--out-dir", (d / "sim").string()}) == 0;
        ok = ok && cli({"reconstruct", "--sinogram", (root / "run1" / "sim" / "sinogram.psin").string(), "--scanner", scanner,
                        "--width", "32", "--height", "32", "--pixel-size", "4", "--iterations", "20", "--threads",
                        threads, "--out-dir", (d / "rec").string()}) == 0;
        ok = ok && cli({"dataset", "--volume", (root / "vol").string(), "--n-total", "6000", "--seed", "9",
                        "--scanner", scanner, "--iterations", "10", "--threads", threads, "--out-dir",
                        (d / "ds").string()}) == 0;
        return ok;
    };
    const bool ran = run_all("run1", "1") && run_all("run2", "1") && run_all("run3", "3");
    o.check(ran, "simulate, reconstruct and dataset ran");
    if (!ran) return o;
    for (const char* step : {"sim", "rec", "ds"}) {
        const auto a = snapshot(root / "run1" / step), b = snapshot(root / "run2" / step),
                   c = snapshot(root / "run3" / step);
        o.check(!a.empty() && a == b, std::string(step) + ": " + std::to_string(a.size()) + " files identical across runs");
        o.check(a == c, std::string(step) + ": identical with 1 and 3 workers");
    }
    fs::remove_all(root);
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"hg_physics", check_hg_physics},   {"acollinearity", check_acollinearity}, {"event_mix", check_event_mix},
        {"projectors", check_projectors},   {"mlem", check_mlem},                   {"sensitivity", check_sensitivity},
        {"loss_kernels", check_loss_kernels}, {"uq_pipeline", check_uq_pipeline},   {"determinism", check_determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
