// cli.hpp: configuration-driven commands behind the cylres executable. Every
// command reads one JSON document, writes CSV/JSON files into an output
// directory and records the fully resolved configuration in manifest.json.
#pragma once

#include "cylres/error.hpp"
#include "cylres/free_resolvent.hpp"
#include "cylres/geometry.hpp"
#include "cylres/io.hpp"
#include "cylres/models.hpp"
#include "cylres/perturbation.hpp"
#include "cylres/spectral.hpp"
#include "cylres/transforms.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cylres {

inline constexpr const char* version = "1.0.0";

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"verify-bounds", "free-resolvent", "factorization",
                                                "determinant-scan", "resonances", "lap",
                                                "density", "band-scan", "selfcheck", "emit-plots"};
    return names;
}

// ---------------------------------------------------------------- config access

namespace detail {

/// Typed field access with a diagnostic naming the dotted path of the field.
class ConfigReader {
public:
    ConfigReader(json& root, std::string prefix = "") : node_(root), prefix_(std::move(prefix)) {
        if (!node_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(const std::string& field, const std::string& what) const {
        throw Error(ErrorKind::ConfigError, "field '" + path(field) + "': " + what);
    }

    std::string path(const std::string& field) const {
        if (prefix_.empty()) return field;
        return field.empty() ? prefix_ : prefix_ + "." + field;
    }

    bool has(const std::string& field) const { return node_.contains(field); }

    double number(const std::string& field, double fallback) {
        if (!has(field)) node_[field] = fallback;
        const auto& v = node_[field];
        if (!v.is_number()) fail(field, "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(field, "expected a finite number");
        return x;
    }

    int integer(const std::string& field, int fallback) {
        if (!has(field)) node_[field] = fallback;
        const auto& v = node_[field];
        if (!v.is_number_integer()) fail(field, "expected an integer");
        return v.get<int>();
    }

    std::string text(const std::string& field, const std::string& fallback) {
        if (!has(field)) node_[field] = fallback;
        const auto& v = node_[field];
        if (!v.is_string()) fail(field, "expected a string");
        return v.get<std::string>();
    }

    RVec vector(const std::string& field, const RVec& fallback) {
        if (!has(field)) node_[field] = fallback;
        const auto& v = node_[field];
        if (!v.is_array()) fail(field, "expected an array of numbers");
        RVec out;
        for (const auto& e : v) {
            if (!e.is_number()) fail(field, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    cplx complex(const std::string& field, cplx fallback) {
        if (!has(field)) node_[field] = json::array({fallback.real(), fallback.imag()});
        const auto& v = node_[field];
        if (v.is_number()) return {v.get<double>(), 0.0};
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            fail(field, "expected [re, im]");
        return {v[0].get<double>(), v[1].get<double>()};
    }

    std::vector<cplx> complex_list(const std::string& field, const std::vector<cplx>& fallback) {
        if (!has(field)) {
            json arr = json::array();
            for (auto z : fallback) arr.push_back(json::array({z.real(), z.imag()}));
            node_[field] = arr;
        }
        const auto& v = node_[field];
        if (!v.is_array()) fail(field, "expected an array of [re, im]");
        std::vector<cplx> out;
        for (const auto& e : v) {
            if (e.is_number()) {
                out.emplace_back(e.get<double>(), 0.0);
                continue;
            }
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                fail(field, "expected an array of [re, im]");
            out.emplace_back(e[0].get<double>(), e[1].get<double>());
        }
        return out;
    }

    ConfigReader child(const std::string& field) {
        if (!has(field)) node_[field] = json::object();
        if (!node_[field].is_object()) fail(field, "expected an object");
        return ConfigReader(node_[field], path(field));
    }

    json& raw(const std::string& field) { return node_[field]; }

    /// Rejects keys outside `allowed` so a misspelt field is never ignored.
    void only(std::initializer_list<const char*> allowed) const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || it.key() == a;
            if (!ok) fail(it.key(), "unknown field");
        }
    }

private:
    json& node_;
    std::string prefix_;
};

} // namespace detail

/// Model, grid, window, contour and probe resolved from a config document.
struct RunSetup {
    json config;   // with every default filled in
    ModelCoefficients model;
    CylinderGrid grid;
    SpectralWindow window;
    std::shared_ptr<const Contour> contour;   // null when no channel is open
    WeightedField probe;
    double probe_center = 0.0, probe_width = 1.0;
};

inline ModelCoefficients model_from_config(detail::ConfigReader m, const std::filesystem::path& base) {
    const std::string family = m.text("family", "free");
    if (family == "free") {
        m.only({"family"});
        return make_free();
    }
    if (family == "gaussian-well") {
        m.only({"family", "V0", "width"});
        return make_gaussian_well(m.number("V0", 2.0), m.number("width", 1.0));
    }
    if (family == "metric-bump") {
        m.only({"family", "amplitude", "width"});
        return make_metric_bump(m.number("amplitude", 0.5), m.number("width", 1.0));
    }
    if (family == "square-well") {
        m.only({"family", "V0", "width"});
        return make_square_well(m.number("V0", 4.0), m.number("width", 2.0));
    }
    if (family == "cosine-lattice-times-gaussian") {
        m.only({"family", "V0", "V1", "width"});
        return make_cosine_lattice(m.number("V0", 1.0), m.number("V1", 0.5), m.number("width", 1.0));
    }
    if (family == "tabulated") {
        m.only({"family", "file"});
        const std::string file = m.text("file", "");
        if (file.empty()) m.fail("file", "tabulated model needs a samples file");
        const auto p = std::filesystem::path(file).is_absolute() ? std::filesystem::path(file) : base / file;
        return tabulated_model(p.string());
    }
    m.fail("family", "unknown family '" + family + "'");
}

/// Gaussian probe e^{-((x - c)/w)^2} / (1 + |n|^2) in every mode.
inline WeightedField gaussian_probe(const CylinderGrid& grid, double center, double width) {
    WeightedField f = WeightedField::zeros(grid);
    const auto lat = grid.modes();
    for (int c = 0; c < grid.mode_count(); ++c) {
        double n2 = 0.0;
        for (int v : lat.multi(c)) n2 += double(v) * v;
        for (int j = 0; j < grid.nx; ++j) {
            const double t = (grid.x(j) - center) / width;
            f.values(j, c) = std::exp(-t * t) / (1.0 + n2);
        }
    }
    return f;
}

inline RunSetup setup_from_config(json config, const std::filesystem::path& base = ".") {
    RunSetup s;
    detail::ConfigReader root(config);
    root.only({"model", "grid", "window", "contour", "probe", "params"});

    s.model = model_from_config(root.child("model"), base);

    auto g = root.child("grid");
    g.only({"m", "d", "L", "N_x", "N_y"});
    s.grid.m = g.integer("m", 1);
    s.grid.d = g.integer("d", 1);
    s.grid.L = g.number("L", 12.0);
    s.grid.nx = g.integer("N_x", 256);
    s.grid.ny = g.integer("N_y", 8);
    try {
        s.grid.validate();
    } catch (const Error& e) {
        g.fail("", e.what());
    }

    auto w = root.child("window");
    w.only({"k0", "lambda0"});
    const RVec k0 = w.vector("k0", RVec(s.grid.d, 0.2));
    if (int(k0.size()) != s.grid.d) w.fail("k0", "length must equal grid.d");
    s.window = build_window(k0, w.number("lambda0", 2.0), s.grid);

    if (!s.window.J.empty()) {
        json& craw = root.raw("contour");
        if (craw.is_null()) craw = "auto";
        if (craw.is_string()) {
            if (craw.get<std::string>() != "auto") root.fail("contour", "expected \"auto\" or an object");
            s.contour = std::make_shared<const Contour>(auto_contour(s.window, s.grid));
        } else {
            auto c = root.child("contour");
            c.only({"eta", "Xi", "panels", "order", "grading"});
            const auto def = auto_contour(s.window, s.grid);
            s.contour = std::make_shared<const Contour>(
                build_contour(s.window.lambda0, c.number("eta", def.eta), c.number("Xi", def.Xi),
                              c.integer("panels", def.panels), c.integer("order", def.order),
                              c.number("grading", def.grading)));
        }
    } else {
        root.raw("contour") = "none";
    }

    auto p = root.child("probe");
    p.only({"center", "width"});
    s.probe_center = p.number("center", 0.3);
    s.probe_width = p.number("width", 1.0);
    if (!(s.probe_width > 0.0)) p.fail("width", "must be positive");
    s.probe = gaussian_probe(s.grid, s.probe_center, s.probe_width);

    root.child("params");
    s.config = config;
    return s;
}

// -------------------------------------------------------------------- commands

struct CommandContext {
    std::filesystem::path out;
    int workers = 1;
    double tolerance_scale = 1.0;
    std::ostream* log = &std::cout;
    std::vector<std::string> outputs;

    std::string file(const std::string& name) {
        outputs.push_back(name);
        return (out / name).string();
    }
};

namespace detail {

inline void write_json(const std::string& path, const json& j) {
    std::ofstream o(path, std::ios::binary);
    if (!o) throw Error(ErrorKind::MissingData, "cannot write " + path);
    o << j.dump(2) << '\n';
}

inline std::string mode_label(const std::vector<int>& n) {
    std::string s;
    for (std::size_t i = 0; i < n.size(); ++i) s += (i ? ";" : "") + std::to_string(n[i]);
    return s;
}

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

} // namespace detail

inline void cmd_verify_bounds(RunSetup& s, CommandContext& ctx) {
    detail::ConfigReader p(s.config["params"], "params");
    p.only({"zeta_points", "k_points", "lambda_points"});
    BoundProbe probe;
    probe.zeta_points = p.integer("zeta_points", probe.zeta_points);
    probe.k_points = p.integer("k_points", probe.k_points);
    probe.lambda_points = p.integer("lambda_points", probe.lambda_points);
    const Contour c = s.contour ? *s.contour : auto_contour(s.window.lambda0, s.grid);
    const auto r = verify_nonresonance_bounds(s.window, c, probe);
    CsvTable t({"quantity", "value"});
    t.row() << std::string("delta") << s.window.delta;
    t.row() << std::string("open_channels") << int(s.window.J.size());
    t.row() << std::string("c_closed") << r.c_closed;
    t.row() << std::string("c_open") << r.c_open;
    t.row() << std::string("c_tau_slope") << r.c_tau_slope;
    t.row() << std::string("tau_at_min") << r.tau_at_min;
    t.save(ctx.file("bounds.csv"));
    detail::write_json(ctx.file("window.json"), to_json(s.window, c, s.grid));
}

inline void cmd_free_resolvent(RunSetup& s, CommandContext& ctx) {
    detail::ConfigReader p(s.config["params"], "params");
    p.only({"lambda"});
    const cplx lambda = p.complex("lambda", cplx(s.window.lambda0, 0.1));
    const KVec k = to_complex(s.window.k0);
    const auto R = make_RA(s.window, s.contour, k, lambda, s.grid);
    const auto u = R.apply_jet(s.probe);
    const CMat res = apply_free_operator(s.grid, k, u) - lambda * u.u - s.probe.values;
    std::optional<CMat> direct;
    if (lambda.imag() > 1e-8) direct = apply_direct_resolvent(s.window.k0, lambda, s.probe).values;
    CsvTable t({"x", "mode", "re", "im", "direct_re", "direct_im"});
    const auto lat = s.grid.modes();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int c = 0; c < s.grid.mode_count(); ++c)
        for (int j = 0; j < s.grid.nx; ++j)
            t.row() << s.grid.x(j) << detail::mode_label(lat.multi(c)) << u.u(j, c)
                    << (direct ? (*direct)(j, c) : cplx(nan, nan));
    t.save(ctx.file("free_resolvent.csv"));
    CsvTable summary({"quantity", "value"});
    const double fn = weighted_norm(s.grid, s.probe.values, 0.0);
    summary.row() << std::string("identity_residual") << weighted_norm(s.grid, res, R.output_weight(), true) / fn;
    if (direct)
        summary.row() << std::string("direct_difference")
                      << weighted_norm(s.grid, u.u - *direct, R.output_weight()) / fn;
    summary.save(ctx.file("free_resolvent_summary.csv"));
}

inline void cmd_factorization(RunSetup& s, CommandContext& ctx) {
    detail::ConfigReader p(s.config["params"], "params");
    p.only({"lambdas"});
    const auto lambdas = p.complex_list("lambdas", {cplx(s.window.lambda0, 0.2)});
    const auto sampled = sample_coefficients(s.model, s.grid);
    const auto fine = sample_coefficients(s.model, s.grid.refined());
    const auto probe_fine = gaussian_probe(fine.grid, s.probe_center, s.probe_width);
    const KVec k = to_complex(s.window.k0);
    CsvTable t({"lambda_re", "lambda_im", "residual", "residual_refined"});
    for (auto lam : lambdas)
        t.row() << lam << factorization_residual(sampled, k, lam, s.probe)
                << factorization_residual(fine, k, lam, probe_fine);
    t.save(ctx.file("factorization.csv"));
}

inline void cmd_determinant_scan(RunSetup& s, CommandContext& ctx) {
    detail::ConfigReader p(s.config["params"], "params");
    p.only({"lambda_from", "lambda_to", "count", "im"});
    const double a = p.number("lambda_from", s.window.lambda0 - s.window.delta);
    const double b = p.number("lambda_to", s.window.lambda0 + s.window.delta);
    const int n = p.integer("count", 11);
    const double im = p.number("im", 0.0);
    if (n < 1) p.fail("count", "must be positive");
    const FredholmEvaluator ev(s.model, s.window, s.contour, s.grid);
    const KVec k = to_complex(s.window.k0);
    const auto lams = detail::linspace(a, b, n);
    const auto samples = parallel_map<FredholmSample>(n, ctx.workers, [&](int i) {
        return ev.sample(k, cplx(lams[i], im), true);
    });
    CsvTable t({"lambda_re", "lambda_im", "h_re", "h_im", "refinement_gap", "certified"});
    for (const auto& fs : samples) t.row() << fs.lambda << fs.h_value << fs.refinement_gap << fs.certified_nonzero();
    t.save(ctx.file("determinant.csv"));
}

inline void cmd_resonances(RunSetup& s, CommandContext& ctx) {
    detail::ConfigReader p(s.config["params"], "params");
    p.only({"interval", "rect"});
    std::vector<Resonance> zeros;
    if (p.has("interval")) {
        const RVec iv = p.vector("interval", {});
        if (iv.size() != 2 || !(iv[0] < iv[1])) p.fail("interval", "expected [a, b] with a < b");
        zeros = find_resonances_in_interval(s.model, s.grid, s.window.k0, iv[0], iv[1], ctx.workers);
    } else {
        const double d = s.window.delta;
        const RVec r = p.vector("rect", {s.window.lambda0 - d, s.window.lambda0 + d, -0.8 * d, 0.8 * d});
        if (r.size() != 4) p.fail("rect", "expected [re_lo, re_hi, im_lo, im_hi]");
        const FredholmEvaluator ev(s.model, s.window, s.contour, s.grid);
        zeros = find_resonances(ev, s.window.k0, Rect{r[0], r[1], r[2], r[3]});
    }
    std::vector<std::string> header;
    for (int i = 0; i < s.grid.d; ++i) header.push_back("k" + std::to_string(i + 1));
    for (const char* h : {"lambda_re", "lambda_im", "multiplicity", "h_residual", "refinement_gap"})
        header.push_back(h);
    CsvTable t(header);
    for (const auto& z : zeros) {
        auto& row = t.row();
        for (double v : z.k) row << v;
        row << z.lambda << z.winding << z.h_residual << z.refinement_gap;
    }
    t.save(ctx.file("resonances.csv"));
}

inline void cmd_lap(RunSetup& s, CommandContext& ctx) {
    detail::ConfigReader p(s.config["params"], "params");
    p.only({"lambdas"});
    const double d = s.window.delta;
    const RVec lams = p.vector("lambdas", detail::linspace(s.window.lambda0 - 0.8 * d, s.window.lambda0 + 0.8 * d, 5));
    const FredholmEvaluator ev(s.model, s.window, s.contour, s.grid);
    const auto results = parallel_map<LapResult>(int(lams.size()), ctx.workers, [&](int i) {
        return lap_boundary_value(ev, s.window.k0, lams[i], s.probe);
    });
    CsvTable t({"lambda", "value_re", "value_im", "extrapolated_re", "extrapolated_im", "agreement", "rate",
                "gaps_monotone"});
    for (std::size_t i = 0; i < lams.size(); ++i) {
        const auto& r = results[i];
        bool mono = true;
        for (std::size_t q = 0; q + 1 < r.gaps.size(); ++q) mono = mono && r.gaps[q + 1] < r.gaps[q];
        t.row() << lams[i] << r.value << r.extrapolated << r.agreement << r.rate << mono;
    }
    t.save(ctx.file("lap.csv"));
}

inline void cmd_density(RunSetup& s, CommandContext& ctx) {
    detail::ConfigReader p(s.config["params"], "params");
    p.only({"interval", "n_samples", "error_estimate"});
    const RVec iv = p.vector("interval", {s.window.lambda0 - s.window.delta, s.window.lambda0 + s.window.delta});
    if (iv.size() != 2 || !(iv[0] < iv[1])) p.fail("interval", "expected [a, b] with a < b");
    const int n = p.integer("n_samples", 21);
    if (n < 1) p.fail("n_samples", "must be positive");
    const bool est = p.integer("error_estimate", 1) != 0;
    const auto curve = spectral_density(s.model, s.window.k0, iv[0], iv[1], n, s.probe, ctx.workers, est);
    CsvTable t({"lambda", "density", "extrapolation_error", "flagged"});
    for (const auto& d : curve.samples) t.row() << d.lambda << d.density << d.extrapolation_error << d.flagged;
    t.save(ctx.file("density.csv"));
}

inline void cmd_band_scan(RunSetup& s, CommandContext& ctx) {
    detail::ConfigReader p(s.config["params"], "params");
    p.only({"k_grid", "lambda_grid"});
    std::vector<RVec> ks;
    json& kraw = p.raw("k_grid");
    if (kraw.is_null()) {
        for (double v : detail::linspace(0.05, 0.45, 5)) ks.push_back(RVec(s.grid.d, v));
        kraw = ks;
    } else {
        if (!kraw.is_array()) p.fail("k_grid", "expected an array of k vectors");
        for (const auto& e : kraw) {
            if (e.is_number()) {
                ks.push_back(RVec(1, e.get<double>()));
            } else if (e.is_array()) {
                RVec v;
                for (const auto& x : e) {
                    if (!x.is_number()) p.fail("k_grid", "expected numbers");
                    v.push_back(x.get<double>());
                }
                ks.push_back(v);
            } else {
                p.fail("k_grid", "expected an array of k vectors");
            }
            if (int(ks.back().size()) != s.grid.d) p.fail("k_grid", "every k needs grid.d components");
        }
    }
    const RVec lams = p.vector("lambda_grid", detail::linspace(0.5, 3.5, 7));
    const auto scan = band_scan(s.model, s.grid, ks, lams, ctx.workers);
    std::vector<std::string> header;
    for (int i = 0; i < s.grid.d; ++i) header.push_back("k" + std::to_string(i + 1));
    for (const char* h : {"lambda", "h_re", "h_im", "abs_h", "refinement_gap", "certified", "bragg"})
        header.push_back(h);
    CsvTable t(header);
    for (const auto& b : scan.samples) {
        auto& row = t.row();
        for (double v : b.k) row << v;
        row << b.lambda << b.h_value << std::abs(b.h_value) << b.refinement_gap << b.certified << b.bragg;
    }
    t.save(ctx.file("band_scan.csv"));
    CsvTable w({"lambda", "witness"});
    for (std::size_t i = 0; i < lams.size(); ++i) w.row() << lams[i] << bool(scan.row_witness[i]);
    w.save(ctx.file("band_witness.csv"));
}

// ------------------------------------------------------------------ selfcheck

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
};

/// Fast invariant suite over every module on a small grid. Thresholds are
/// multiplied by the tolerance scale.
inline std::vector<CheckResult> run_selfcheck(double scale = 1.0, int workers = 1) {
    std::vector<CheckResult> out;
    auto check_below = [&](const std::string& name, double value, double threshold) {
        out.push_back({name, value < threshold * scale, value, threshold * scale});
    };
    CylinderGrid g;
    g.L = 8.0;
    g.nx = 64;
    g.ny = 4;
    const auto f = gaussian_probe(g, 0.3, 1.0);
    const double fn = weighted_norm(g, f.values, 0.0);

    {   // window and contour serialization
        const auto w = build_window({0.2}, 2.0, g);
        const auto c = auto_contour(w, g);
        const auto back = window_from_json(json::parse(to_json(w, c, g).dump()));
        const bool same = back.window.lambda0 == w.lambda0 && back.window.k0 == w.k0 && back.contour.eta == c.eta &&
                          back.contour.Xi == c.Xi && back.contour.nodes.size() == c.nodes.size();
        out.push_back({"geometry.json_round_trip", same, same ? 0.0 : 1.0, 0.0});
    }
    {   // transform round trip
        const auto back = inverse_cylinder_fourier(cylinder_fourier(f));
        check_below("transforms.fourier_round_trip", weighted_norm(g, back.values - f.values, 0.0) / fn, 1e-12);
    }
    for (double l0 : {-1.0, 2.0}) {   // continued free resolvent
        const auto w = build_window({0.2}, l0, g);
        const auto C = w.J.empty() ? nullptr : std::make_shared<const Contour>(auto_contour(w, g));
        const KVec k = to_complex(w.k0);
        const auto R = make_RA(w, C, k, cplx(l0, 0.5), g);
        const auto u = R.apply(f);
        const auto v = apply_direct_resolvent(w.k0, cplx(l0, 0.5), f);
        const std::string tag = "(lambda0=" + format_double(l0) + ")";
        check_below("free_resolvent.continuation_vs_direct" + tag,
                    weighted_norm(g, u.values - v.values, R.output_weight()) / fn, 1e-6);
        const cplx lb(l0 + 0.3 * w.delta, -0.5 * w.delta);
        const auto Rb = make_RA(w, C, k, lb, g);
        const auto ub = Rb.apply_jet(f);
        const CMat r = apply_free_operator(g, k, ub) - lb * ub.u - f.values;
        check_below("free_resolvent.identity_below_axis" + tag, weighted_norm(g, r, Rb.output_weight(), true) / fn,
                    1e-5);
    }
    {   // factorization residual
        const auto s = sample_coefficients(make_metric_bump(0.5, 1.0), g);
        check_below("perturbation.factorization_residual",
                    factorization_residual(s, to_complex(RVec{0.2}), cplx(1.0, 0.2), f), 1e-5);
    }
    {   // determinant of the free problem and conjugate symmetry
        const auto w = build_window({0.2}, 2.0, g);
        const auto C = std::make_shared<const Contour>(auto_contour(w, g));
        const FredholmEvaluator free_ev(make_free(), w, C, g);
        const KVec k = to_complex(w.k0);
        check_below("perturbation.free_determinant_is_one", std::abs(free_ev.h(k, 2.0) - 1.0), 1e-14);
        // h(conj lambda) = conj h(lambda) only where no channel is open: with open
        // channels the values below the axis belong to the continued sheet
        const auto wc = build_window({0.2}, -1.0, g);
        const FredholmEvaluator ev(make_gaussian_well(2.0, 1.0), wc, nullptr, g);
        const auto up = ev.sample(k, cplx(-1.0, 0.3 * wc.delta));
        const auto dn = ev.sample(k, cplx(-1.0, -0.3 * wc.delta));
        check_below("perturbation.conjugate_symmetry", std::abs(up.h_value - std::conj(dn.h_value)),
                    std::max(up.refinement_gap, dn.refinement_gap) + 1e-12);
    }
    {   // Herglotz property of direct solves
        const auto s = sample_coefficients(make_gaussian_well(2.0, 1.0), g);
        double worst = std::numeric_limits<double>::infinity();
        for (double re : {-0.5, 0.7, 2.0, 4.5})
            worst = std::min(worst, inner(g, solve_direct(s, RVec{0.2}, cplx(re, 0.05), f).values, f.values).imag());
        out.push_back({"spectral.herglotz", worst > 0.0, worst, 0.0});
    }
    {   // limiting absorption on a resonance-free window
        const auto w = build_window({0.2}, 6.0, g);
        const auto C = std::make_shared<const Contour>(auto_contour(w, g));
        const FredholmEvaluator ev(make_metric_bump(0.5, 1.0), w, C, g);
        const auto r = lap_boundary_value(ev, w.k0, 6.0, f);
        check_below("spectral.limiting_absorption", r.agreement, 1e-5);
        bool mono = true;
        for (std::size_t q = 0; q + 1 < r.gaps.size(); ++q) mono = mono && r.gaps[q + 1] < r.gaps[q];
        out.push_back({"spectral.eps_gaps_monotone", mono, r.gaps.back(), 0.0});
    }
    {   // density positivity (free operator)
        const auto curve = spectral_density(make_free(), {0.2}, 0.5, 3.0, 6, f, workers, false);
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& d : curve.samples) worst = std::min(worst, d.density);
        out.push_back({"spectral.density_positive", worst >= -1e-8, worst, -1e-8});
    }
    return out;
}

inline bool cmd_selfcheck(RunSetup&, CommandContext& ctx) {
    const auto results = run_selfcheck(ctx.tolerance_scale, ctx.workers);
    CsvTable t({"check", "passed", "value", "threshold"});
    bool all = true;
    for (const auto& r : results) {
        t.row() << r.name << r.passed << r.value << r.threshold;
        *ctx.log << (r.passed ? "PASS " : "FAIL ") << r.name << "  value=" << format_double(r.value)
                 << "  threshold=" << format_double(r.threshold) << '\n';
        all = all && r.passed;
    }
    t.save(ctx.file("selfcheck.csv"));
    return all;
}

// ------------------------------------------------------------------ plot scripts

/// gnuplot scripts for whatever CSVs a run directory holds; MissingData when it
/// holds none of them.
inline std::vector<std::string> emit_plots(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& body) {
        std::ofstream o(dir / name, std::ios::binary);
        if (!o) throw Error(ErrorKind::MissingData, "cannot write " + (dir / name).string());
        o << body;
        written.push_back(name);
    };
    const std::string head = "set datafile separator ','\nset terminal pngcairo size 900,600\n";
    if (fs::exists(dir / "density.csv"))
        emit("density.gp", head + "set output 'density.png'\nset xlabel 'lambda'\nset ylabel 'density'\n"
                                  "plot 'density.csv' using 1:2 skip 1 with linespoints title 'density'\n");
    if (fs::exists(dir / "band_scan.csv"))
        emit("band_scan.gp", head + "set output 'band_scan.png'\nset xlabel 'k1'\nset ylabel 'lambda'\n"
                                    "set view map\nset logscale cb\n"
                                    "splot 'band_scan.csv' using 1:2:5 skip 1 with points pt 5 ps 2 palette "
                                    "title '|h|'\n");
    if (fs::exists(dir / "resonances.csv")) {
        std::ifstream in(dir / "resonances.csv");
        std::string header;
        std::getline(in, header);
        int col = 1;
        for (std::size_t p = header.find("lambda_re"), i = 0; i < p; ++i)
            if (header[i] == ',') ++col;
        emit("resonances.gp", head + "set output 'resonances.png'\nset xlabel 'Re lambda'\n"
                                     "set ylabel 'Im lambda'\nplot 'resonances.csv' using " +
                                  std::to_string(col) + ":" + std::to_string(col + 1) +
                                  " skip 1 with points pt 7 title 'zeros of h'\n");
    }
    if (fs::exists(dir / "determinant.csv"))
        emit("determinant.gp", head + "set output 'determinant.png'\nset xlabel 'Re lambda'\n"
                                      "set ylabel '|h|'\nset logscale y\n"
                                      "plot 'determinant.csv' using 1:(sqrt($3**2+$4**2)) skip 1 with "
                                      "linespoints title '|h|'\n");
    if (written.empty()) throw Error(ErrorKind::MissingData, "no plottable CSV in " + dir.string());
    return written;
}

// -------------------------------------------------------------------- dispatch

inline int exit_code(ErrorKind k) { return k == ErrorKind::ConfigError ? 2 : 3; }

inline json error_record(const std::string& kind, const std::string& message) {
    return {{"error", kind}, {"message", message}};
}

/// Runs one command; returns the process exit status. Errors go to `err` as one
/// JSON line.
inline int run_command(const std::string& command, const json& config, const std::filesystem::path& out,
                       int workers, double tolerance_scale, const std::filesystem::path& base = ".",
                       std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        namespace fs = std::filesystem;
        if (std::find(command_names().begin(), command_names().end(), command) == command_names().end())
            throw Error(ErrorKind::ConfigError, "unknown command '" + command + "'");
        if (workers < 1) throw Error(ErrorKind::ConfigError, "field 'workers': must be positive");
        if (!(tolerance_scale > 0.0)) throw Error(ErrorKind::ConfigError, "field 'tolerance-scale': must be positive");
        if (command == "emit-plots") {
            if (!fs::is_directory(out)) throw Error(ErrorKind::MissingData, "no run directory " + out.string());
            for (const auto& s : emit_plots(out)) log << s << '\n';
            return 0;
        }
        // a manifest from an earlier run is accepted as a config
        json cfg = config.contains("config") && config.contains("command") ? config["config"] : config;
        RunSetup setup = setup_from_config(cfg, base);
        fs::create_directories(out);
        CommandContext ctx{out, workers, tolerance_scale, &log, {}};
        bool ok = true;
        if (command == "verify-bounds") cmd_verify_bounds(setup, ctx);
        else if (command == "free-resolvent") cmd_free_resolvent(setup, ctx);
        else if (command == "factorization") cmd_factorization(setup, ctx);
        else if (command == "determinant-scan") cmd_determinant_scan(setup, ctx);
        else if (command == "resonances") cmd_resonances(setup, ctx);
        else if (command == "lap") cmd_lap(setup, ctx);
        else if (command == "density") cmd_density(setup, ctx);
        else if (command == "band-scan") cmd_band_scan(setup, ctx);
        else if (command == "selfcheck") ok = cmd_selfcheck(setup, ctx);
        json manifest{{"command", command},
                      {"version", version},
                      {"config", setup.config},
                      {"workers", workers},
                      {"tolerance_scale", tolerance_scale},
                      {"window", {{"delta", setup.window.delta}, {"open_channels", setup.window.J}}},
                      {"outputs", ctx.outputs}};
        if (setup.contour)
            manifest["contour_resolved"] = to_json(setup.window, *setup.contour, setup.grid);
        detail::write_json((out / "manifest.json").string(), manifest);
        if (!ok) {
            err << error_record("SelfcheckFailed", "at least one invariant failed").dump() << '\n';
            return 4;
        }
        return 0;
    } catch (const Error& e) {
        err << error_record(std::string(to_string(e.kind())), e.what()).dump() << '\n';
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        err << error_record("ConfigError", e.what()).dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << error_record("Internal", e.what()).dump() << '\n';
        return 4;
    }
}

} // namespace cylres
