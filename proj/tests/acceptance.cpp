// Acceptance run at desk scale: m = 1, d = 1, N_x = 256, N_y = 8, L = 12 unless a
// criterion states its own grid. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Optional arguments select criteria by number.
#include "cylres/cli.hpp"
#include "oracles/oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace cylres;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

CylinderGrid desk() {
    CylinderGrid g;
    g.L = 12.0;
    g.nx = 256;
    g.ny = 8;
    return g;
}

const std::vector<double> windows{-1.0, 2.0, 6.0};

std::shared_ptr<const Contour> contour_for(const SpectralWindow& w, const CylinderGrid& g) {
    return w.J.empty() ? nullptr : std::make_shared<const Contour>(auto_contour(w, g));
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

/// Gaussians per mode with random width, centre and complex amplitude.
WeightedField random_field(const CylinderGrid& g, double a, std::mt19937& rng) {
    std::uniform_real_distribution<double> width(0.5, 1.2), centre(-1.5, 1.5), amp(-1.0, 1.0);
    auto f = WeightedField::zeros(g, a);
    for (int c = 0; c < g.mode_count(); ++c) {
        const double w = width(rng), x0 = centre(rng);
        const cplx A(amp(rng), amp(rng));
        for (int j = 0; j < g.nx; ++j) f.values(j, c) = A * std::exp(-(g.x(j) - x0) * (g.x(j) - x0) / (w * w));
    }
    return f;
}

/// Smooth probe with energy spread over all modes, falling like 1 / (1 + col).
WeightedField mode_probe(const CylinderGrid& g, double a = 0.0) {
    auto f = WeightedField::zeros(g, a);
    for (int c = 0; c < g.mode_count(); ++c)
        for (int j = 0; j < g.nx; ++j)
            f.values(j, c) = cplx(1.0, 0.1 * c) * std::exp(-(g.x(j) - 0.3) * (g.x(j) - 0.3)) / (1.0 + c);
    return f;
}

// ----------------------------------------------------------------- criteria

Outcome c1_continuation_matches_direct() {
    const auto g = desk();
    std::mt19937 rng(20240611);
    double worst = 0.0;
    for (double l0 : windows) {
        const auto w = build_window({0.2}, l0, g);
        const auto c = std::make_shared<const Contour>(auto_contour(w, g));
        for (double im : {0.1, 0.5}) {
            const cplx lambda(l0 + 0.3 * w.delta, im);
            const auto R = make_RA(w, c, KVec{0.2}, lambda, g);
            for (int trial = 0; trial < 10; ++trial) {
                const auto f = random_field(g, R.weight_a, rng);
                const auto u = R.apply(f);
                const auto v = apply_direct_resolvent(RVec{0.2}, lambda, f);
                worst = std::max(worst, weighted_norm(g, u.values - v.values, -R.weight_a) /
                                            weighted_norm(g, f.values, 0.0));
            }
        }
    }
    return {worst < 1e-6, "max relative error " + sci(worst) + " over 60 fields (< 1e-6)"};
}

Outcome c2_identity_on_and_below_axis() {
    const auto g = desk();
    std::mt19937 rng(31);
    double worst = 0.0;
    for (double l0 : windows) {
        const auto w = build_window({0.2}, l0, g);
        const auto c = std::make_shared<const Contour>(auto_contour(w, g));
        for (double im : {0.0, -0.5 * w.delta})
            for (double re : {-0.8, 0.0, 0.8}) {
                const cplx lambda(l0 + re * w.delta, im);
                const auto R = make_RA(w, c, KVec{0.2}, lambda, g);
                const auto f = random_field(g, R.weight_a, rng);
                const auto u = R.apply_jet(f);
                const CMat r = apply_free_operator(g, KVec{0.2}, u) - lambda * u.u - f.values;
                worst = std::max(worst, weighted_norm(g, r, -R.weight_a, true) / weighted_norm(g, f.values, 0.0));
            }
    }
    return {worst < 1e-5, "max interior residual " + sci(worst) + " at 18 lambda (< 1e-5)"};
}

Outcome c3_tau_decay() {
    const auto g = desk();
    const std::vector<double> taus{5, 10, 20, 40};
    double worst = 0.0;
    std::string per;
    for (double l0 : windows) {
        const auto w = build_window({0.2}, l0, g);
        const auto c = std::make_shared<const Contour>(auto_contour(w, g));
        const auto r = tau_decay_norm(w, c, cplx(l0, 0.0), taus, g);
        double lo = 1e300, hi = 0.0;
        for (const auto& t : r) {
            lo = std::min(lo, t.scaled);
            hi = std::max(hi, t.scaled);
        }
        worst = std::max(worst, hi / lo);
        per += " " + sci(hi / lo);
    }
    return {worst < 4.0, "max/min of norm*tau per window:" + per + " (< 4)"};
}

Outcome c4_factorization() {
    const auto model = make_metric_bump(0.5, 1.0);
    std::vector<double> res;
    for (int nx : {64, 80}) {
        CylinderGrid g;
        g.L = 8.0;
        g.nx = nx;
        g.ny = 8;
        res.push_back(factorization_residual(sample_coefficients(model, g), KVec{0.2}, cplx(1.0, 0.2), mode_probe(g)));
    }
    const bool pass = res[0] < 1e-5 && res[1] < 1e-5 && res[0] / res[1] >= 2.0;
    return {pass, "residual " + sci(res[0]) + " -> " + sci(res[1]) + ", ratio " + sci(res[0] / res[1]) +
                      " (< 1e-5, ratio >= 2)"};
}

Outcome c5_determinant_sanity() {
    const auto g = desk();
    const KVec k{0.2};
    Outcome out;
    // (a) W = 0
    double dev = 0.0;
    for (double l0 : windows) {
        const auto w = build_window({0.2}, l0, g);
        const FredholmEvaluator ev(make_free(), w, contour_for(w, g), g);
        for (double im : {0.3, 0.0, -0.3})
            for (double re : {-0.5, 0.5}) dev = std::max(dev, std::abs(ev.h(k, cplx(l0 + re * w.delta, im * w.delta)) - 1.0));
    }
    const bool a = dev == 0.0;
    // (b) first-order trace, eps = 1e-3
    const double eps = 1e-3;
    const auto s = sample_coefficients(make_gaussian_well(-eps, 1.0), g);
    std::vector<double> energies;
    for (int n = -g.ny; n <= g.ny; ++n) energies.push_back((0.2 + n) * (0.2 + n));
    double log_dev = 0.0, literal_dev = 0.0;
    for (double l0 : windows) {
        const auto w = build_window({0.2}, l0, g);
        const auto ls = assemble_lippmann_schwinger(w, contour_for(w, g), s, k, cplx(l0, 0.0));
        const cplx trace = oracle::first_order_trace(eps * std::sqrt(pi), energies, l0, g.nyquist());
        log_dev = std::max(log_dev, std::abs(ls.log_plain_determinant() - trace));
        if (l0 == 6.0) literal_dev = std::abs(ls.plain_determinant() - (1.0 + trace));
    }
    const bool b = log_dev < 1e-5 && literal_dev < 1e-5;
    // (c) refinement gap shrinks
    const auto gf = g.refined();
    const auto model = make_gaussian_well(2.0, 1.0);
    int shrink = 0, total = 0;
    for (double l0 : windows) {
        const auto w = build_window({0.2}, l0, g);
        const auto wf = build_window({0.2}, l0, gf);
        const auto c = contour_for(w, g);
        const auto cf = c ? std::make_shared<const Contour>(refined_contour(*c, g, gf)) : nullptr;
        const FredholmEvaluator coarse(model, w, c, g), fine(model, wf, cf, gf);
        for (double re : {-0.7, -0.2, 0.3, 0.8})
            for (double im : {0.4, 0.0, -0.4}) {
                const cplx lambda(l0 + re * w.delta, im * w.delta);
                ++total;
                if (fine.sample(k, lambda).refinement_gap < coarse.sample(k, lambda).refinement_gap) ++shrink;
            }
    }
    const bool c = shrink >= 0.9 * total;
    out.pass = a && b && c;
    out.detail = "W=0 max |h-1| " + sci(dev) + "; |log det - eps tr| " + sci(log_dev) + ", |det - (1 + eps tr)| " +
                 sci(literal_dev) + " at lambda0=6 (< 1e-5); gap shrinks " + std::to_string(shrink) + "/" +
                 std::to_string(total) + " (>= 90%)";
    return out;
}

Outcome c6_square_well_zeros() {
    // exact zeros lambda = n^2 + E_b of the k = 0 square well, from the Jost table
    const auto [header, rows] = read_csv(std::string(CYLRES_FIXTURE_DIR) + "/square_well_jost.csv");
    (void)header;
    CylinderGrid g;
    g.L = 4.0;
    g.nx = 512;
    g.ny = 8;
    const auto model = make_square_well(4.0, 2.0);
    Outcome out;
    double worst = 0.0;
    // the two lowest zeros (bound states) and the two lowest embedded ones
    for (auto [a, b] : {std::pair{-3.5, -1.5}, std::pair{0.45, 1.25}}) {
        const auto zeros = find_resonances_in_interval(model, g, {0.0}, a, b);
        int expected = 0;
        for (const auto& r : rows) {
            const double lam = r[3];
            if (lam < a || lam > b) continue;
            ++expected;
            bool hit = false;
            for (const auto& z : zeros)
                if (std::abs(z.lambda - lam) < 1e-3 && z.winding == int(r[4])) {
                    hit = true;
                    worst = std::max(worst, std::abs(z.lambda - lam));
                }
            out.pass = out.pass && hit;
        }
        out.pass = out.pass && int(zeros.size()) == expected;
        out.detail += "[" + sci(a) + ", " + sci(b) + "]: " + std::to_string(zeros.size()) + " zeros vs " +
                      std::to_string(expected) + " expected; ";
    }
    out.detail += "max |error| " + sci(worst) + " (< 1e-3)";
    return out;
}

Outcome c7_limiting_absorption() {
    const auto g = desk();
    const auto model = make_metric_bump(0.5, 1.0);
    double worst = 0.0;
    bool mono = true;
    for (double l0 : windows) {
        const auto w = build_window({0.2}, l0, g);
        const auto c = contour_for(w, g);
        const FredholmEvaluator ev(model, w, c, g);
        const auto f = mode_probe(g, c ? default_weight(w, *c) : 0.0);
        for (double t : {-0.8, -0.4, 0.0, 0.4, 0.8}) {
            const auto r = lap_boundary_value(ev, RVec{0.2}, l0 + t * w.delta, f);
            worst = std::max(worst, r.agreement);
            for (std::size_t q = 0; q + 1 < r.gaps.size(); ++q) mono = mono && r.gaps[q + 1] < r.gaps[q];
        }
    }
    return {worst < 1e-5 && mono,
            "max |continued - extrapolated| " + sci(worst) + " (< 1e-5); eps gaps monotone: " + (mono ? "yes" : "no")};
}

Outcome c8_point_mass() {
    const auto g = desk();
    const std::vector<double> eps{0.1, 0.05, 0.025, 0.0125};
    const auto s = sample_coefficients(make_metric_bump(0.5, 1.0), g);
    const auto f = mode_probe(g);
    double worst_ratio = 1e300;
    for (double l0 : windows) {
        const auto p = point_mass_probe(s, RVec{0.2}, l0, f, eps);
        for (std::size_t i = 0; i + 1 < p.size(); ++i) worst_ratio = std::min(worst_ratio, p[i].product / p[i + 1].product);
    }
    // planted bound state of the gaussian well V0 = 4, width 1, below every threshold at k = 0
    const auto psi = oracle::ground_state([](double x) { return -4.0 * std::exp(-x * x); }, -4.0, 0.0);
    const auto sw = sample_coefficients(make_gaussian_well(4.0, 1.0), g);
    auto fb = WeightedField::zeros(g);
    for (int j = 0; j < g.nx; ++j) fb.values(j, g.ny) = std::exp(-(g.x(j) - 0.2) * (g.x(j) - 0.2));
    // psi is constant in y with unit norm on the cylinder, so its mode-0 profile is psi / sqrt(2 pi)
    const auto overlap = oracle::integrate(
        [&](double x) { return oracle::cplx(std::exp(-(x - 0.2) * (x - 0.2)) * oracle::sample(psi, x)); }, -12.0, 12.0);
    const double expected = 2.0 * oracle::pi * std::norm(overlap);
    const auto p = point_mass_probe(sw, RVec{0.0}, psi.energy, fb, {1e-2, 1e-3, 1e-4});
    const double rel = std::abs(p.back().product - expected) / expected;
    return {worst_ratio >= 1.5 && rel < 0.02, "min decay ratio per halving " + sci(worst_ratio) +
                                                  " (>= 1.5); bound state |<f,psi>|^2 relative error " + sci(rel) +
                                                  " (< 2%)"};
}

Outcome c9_parseval() {
    const auto g = desk();
    const auto rule = gauss_legendre(8, 0.0, 1.0);
    std::vector<std::pair<RVec, double>> kq;
    for (int i = 0; i < 8; ++i) kq.push_back({RVec{rule.nodes[i]}, rule.weights[i]});
    const SpaceFn fn = [](double x, std::span<const double> y) { return cplx(std::exp(-x * x - 0.5 * y[0] * y[0])); };
    const auto res = direct_integral_measure(make_free(), kq, -1.0, 30.0,
                                             [&](const RVec& k) { return floquet_gelfand(fn, k, g); }, 8);
    // |f|^2 over the plane: sqrt(pi / 2) sqrt(pi)
    const double exact = std::sqrt(pi / 2.0) * std::sqrt(pi);
    const double rel = std::abs(res.measure - exact) / exact;
    return {rel < 0.03 && res.skipped_k.empty(),
            "measure " + sci(res.measure) + " vs ||f||^2 " + sci(exact) + ", relative error " + sci(rel) +
                " (< 3%), skipped k: " + std::to_string(res.skipped_k.size())};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome c10_determinism() {
    const fs::path root = fs::temp_directory_path() / "cylres_acceptance_c10";
    fs::remove_all(root);
    fs::create_directories(root);
    const json cfg{{"model", {{"family", "gaussian-well"}, {"V0", 2.0}, {"width", 1.0}}},
                   {"grid", {{"L", 12.0}, {"N_x", 256}, {"N_y", 8}}},
                   {"params", {{"k_grid", {0.1, 0.3}}, {"lambda_grid", {-0.5, 0.5, 1.5, 2.5}}}}};
    std::ofstream(root / "scan.json") << cfg.dump(2);
    auto run = [&](const std::string& cmd, const std::string& tag, int workers, bool with_config) {
        const fs::path out = root / tag;
        std::string line = std::string("\"") + CYLRES_CLI + "\" " + cmd + " --out \"" + out.string() +
                           "\" --workers " + std::to_string(workers);
        if (with_config) line += " --config \"" + (root / "scan.json").string() + "\"";
        line += " > \"" + (root / (tag + ".log")).string() + "\" 2>&1";
        return std::system(line.c_str()) == 0;
    };
    bool ok = true;
    ok = ok && run("selfcheck", "s1", 1, false) && run("selfcheck", "s1b", 1, false) && run("selfcheck", "s3", 3, false);
    ok = ok && run("band-scan", "b1", 1, true) && run("band-scan", "b1b", 1, true) && run("band-scan", "b2", 2, true) &&
         run("band-scan", "b3", 3, true);
    if (!ok) return {false, "a CLI run failed; logs in " + root.string()};
    bool same = true;
    for (const char* t : {"s1b", "s3"}) same = same && slurp(root / "s1" / "selfcheck.csv") == slurp(root / t / "selfcheck.csv");
    for (const char* t : {"b1b", "b2", "b3"})
        for (const char* f : {"band_scan.csv", "band_witness.csv"})
            same = same && slurp(root / "b1" / f) == slurp(root / t / f);
    const bool nonempty = slurp(root / "b1" / "band_scan.csv").size() > 100;
    if (same && nonempty) fs::remove_all(root);
    return {same && nonempty, "selfcheck x3 and band-scan x4 (workers 1, 1, 2, 3): CSVs " +
                                  std::string(same ? "bit-identical" : "differ")};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"continued free resolvent matches the direct resolvent", c1_continuation_matches_direct},
        {"(A - lambda) R_A = I on and below the axis", c2_identity_on_and_below_axis},
        {"dilated resolvent decays like 1/tau", c3_tau_decay},
        {"factorization residual converges", c4_factorization},
        {"determinant sanity", c5_determinant_sanity},
        {"square-well zeros match the Jost table", c6_square_well_zeros},
        {"limiting absorption boundary values", c7_limiting_absorption},
        {"no point mass on resonance-free windows; planted bound state recovered", c8_point_mass},
        {"free Parseval through the direct integral", c9_parseval},
        {"CLI output is deterministic across runs and workers", c10_determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = int(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " | "
                  << o.detail << " | " << sci(secs) << " s" << std::endl;
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
