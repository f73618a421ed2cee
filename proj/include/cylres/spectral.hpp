// spectral.hpp: consumer-level spectral analysis built on h(k, lambda) and R_H:
// limiting absorption, point-mass probes, zeros of h by the argument principle,
// band scans over (k, lambda), spectral densities and direct-integral masses.
#pragma once

#include "cylres/error.hpp"
#include "cylres/free_resolvent.hpp"
#include "cylres/geometry.hpp"
#include "cylres/models.hpp"
#include "cylres/numerics.hpp"
#include "cylres/parallel.hpp"
#include "cylres/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace cylres {

/// Polynomial through (x_i, y_i) evaluated at 0 (Neville).
inline cplx extrapolate_to_zero(const std::vector<double>& x, std::vector<cplx> y) {
    const int n = int(x.size());
    for (int m = 1; m < n; ++m)
        for (int i = 0; i + m < n; ++i) y[i] = (x[i + m] * y[i] - x[i] * y[i + 1]) / (x[i + m] - x[i]);
    return y[0];
}

// --------------------------------------------------------- limiting absorption

inline const std::vector<double> default_eps{0.1, 0.05, 0.025, 0.0125};

struct LapResult {
    cplx value = 0.0;               // <R_H(k, lambda + i0) f, f> from the continued resolvent
    cplx extrapolated = 0.0;        // limit of the direct solves at eps -> 0
    double agreement = 0.0;         // |extrapolated - value|
    double rate = 0.0;              // observed order of |v(eps) - value| in eps
    std::vector<double> eps;
    std::vector<cplx> sequence;     // <R(lambda + i eps) f, f>
    std::vector<double> gaps;       // |v(eps_i) - v(eps_{i+1})|
};

inline LapResult lap_boundary_value(const FredholmEvaluator& ev, std::span<const double> k, double lambda,
                                    const WeightedField& f, const std::vector<double>& eps = default_eps) {
    const auto& grid = f.grid;
    const KVec kc = to_complex(k);
    LapResult r;
    r.value = inner(grid, apply_RH_jet(ev, kc, lambda, f).u, f.values);
    r.eps = eps;
    for (double e : eps)
        r.sequence.push_back(inner(grid, solve_direct_jet(ev.coefficients(), k, cplx(lambda, e), f).u, f.values));
    for (std::size_t i = 0; i + 1 < r.sequence.size(); ++i) r.gaps.push_back(std::abs(r.sequence[i] - r.sequence[i + 1]));
    r.extrapolated = extrapolate_to_zero(eps, r.sequence);
    r.agreement = std::abs(r.extrapolated - r.value);
    // least-squares slope of log|v(eps) - value| against log eps
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = int(eps.size());
    for (int i = 0; i < n; ++i) {
        const double lx = std::log(eps[i]);
        const double ly = std::log(std::max(std::abs(r.sequence[i] - r.value), 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    r.rate = n > 1 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
    return r;
}

inline LapResult lap_boundary_value(const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                                    const ModelCoefficients& model, std::span<const double> k, double lambda,
                                    const WeightedField& f) {
    return lap_boundary_value(FredholmEvaluator(model, w, std::move(contour), f.grid), k, lambda, f);
}

struct PointMassSample {
    double eps = 0.0;
    double product = 0.0;   // eps * Im <R(lambda + i eps) f, f>
};

inline std::vector<PointMassSample> point_mass_probe(const SampledCoefficients& s, std::span<const double> k,
                                                     double lambda, const WeightedField& f,
                                                     const std::vector<double>& eps_list) {
    std::vector<PointMassSample> out;
    for (double e : eps_list) {
        const cplx v = inner(f.grid, solve_direct_jet(s, k, cplx(lambda, e), f).u, f.values);
        out.push_back({e, e * v.imag()});
    }
    return out;
}

// ------------------------------------------------------------------ resonances

struct Rect {
    double re_lo = 0.0, re_hi = 0.0, im_lo = 0.0, im_hi = 0.0;

    bool contains(cplx z) const {
        return z.real() >= re_lo && z.real() <= re_hi && z.imag() >= im_lo && z.imag() <= im_hi;
    }
    cplx center() const { return {0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi)}; }
};

struct Resonance {
    RVec k;
    cplx lambda = 0.0;
    double h_residual = 0.0;
    int winding = 0;
    double refinement_gap = 0.0;
};

struct ResonanceSearch {
    int samples_per_edge = 4;   // certified samples per edge
    int max_depth = 3;          // bisection depth before a multiple zero is accepted
    int max_phase_refine = 14;
};

namespace detail {

/// Argument-principle bookkeeping with an h-value cache shared by all sub-rectangles.
class WindingCounter {
public:
    WindingCounter(const FredholmEvaluator& ev, const KVec& k, const ResonanceSearch& opt)
        : ev_(ev), k_(k), opt_(opt) {}

    cplx h(cplx z) {
        const auto key = std::make_pair(z.real(), z.imag());
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const cplx v = ev_.h(k_, z);
        cache_.emplace(key, v);
        return v;
    }

    void certify(cplx z) {
        const auto key = std::make_pair(z.real(), z.imag());
        if (certified_.count(key)) return;
        const auto s = ev_.sample(k_, z, true);
        cache_.emplace(key, s.h_value);
        if (!s.certified_nonzero())
            throw Error(ErrorKind::BoundaryZero, "|h| on the rectangle boundary is below 10 refinement_gap");
        certified_.insert({key, true});
    }

    /// Change of arg h along the segment a -> b divided by 2 pi.
    double edge(cplx a, cplx b) {
        double total = 0.0;
        const int M = opt_.samples_per_edge;
        for (int i = 0; i <= M; ++i) certify(a + (b - a) * (double(i) / M));
        for (int i = 0; i < M; ++i) {
            const cplx p = a + (b - a) * (double(i) / M), q = a + (b - a) * (double(i + 1) / M);
            total += phase(p, q, 0);
        }
        return total / two_pi;
    }

    double winding(const Rect& r) {
        const cplx c0(r.re_lo, r.im_lo), c1(r.re_hi, r.im_lo), c2(r.re_hi, r.im_hi), c3(r.re_lo, r.im_hi);
        return edge(c0, c1) + edge(c1, c2) + edge(c2, c3) + edge(c3, c0);
    }

private:
    double phase(cplx p, cplx q, int depth) {
        const cplx hp = h(p), hq = h(q);
        const double d = std::arg(hq / hp);
        if (std::abs(d) < pi / 4.0) return d;
        if (depth >= opt_.max_phase_refine)
            throw Error(ErrorKind::BoundaryZero, "phase of h cannot be resolved along the boundary");
        const cplx m = 0.5 * (p + q);
        return phase(p, m, depth + 1) + phase(m, q, depth + 1);
    }

    const FredholmEvaluator& ev_;
    KVec k_;
    ResonanceSearch opt_;
    std::map<std::pair<double, double>, cplx> cache_;
    std::map<std::pair<double, double>, bool> certified_;
};

inline int rounded_winding(double w) {
    const double r = std::round(w);
    if (std::abs(w - r) > 0.1) throw Error(ErrorKind::BoundaryZero, "winding number is not integral");
    return int(r);
}

/// Newton iteration with multiplicity m and a central-difference derivative.
inline cplx polish_zero(const FredholmEvaluator& ev, const KVec& k, cplx z, int m, double scale) {
    const double step = 1e-6 * scale;
    for (int it = 0; it < 40; ++it) {
        const cplx hz = ev.h(k, z);
        if (hz == 0.0) break;
        const cplx dh = (ev.h(k, z + step) - ev.h(k, z - step)) / (2.0 * step);
        if (dh == 0.0) break;
        const cplx dz = double(m) * hz / dh;
        z -= dz;
        if (std::abs(dz) < 1e-13 * std::max(1.0, std::abs(z))) break;
    }
    return z;
}

} // namespace detail

/// Zeros of h(k, .) inside rect by the argument principle, recursive bisection and
/// multiplicity-aware Newton polishing. Multiple zeros that survive max_depth
/// bisections are reported once with their winding number.
inline std::vector<Resonance> find_resonances(const FredholmEvaluator& ev, std::span<const double> k,
                                              const Rect& rect, const ResonanceSearch& opt = {}) {
    const KVec kc = to_complex(k);
    const auto& w = ev.window();
    if (std::abs(rect.re_lo - w.lambda0) >= 2.0 * w.delta || std::abs(rect.re_hi - w.lambda0) >= 2.0 * w.delta ||
        std::abs(rect.im_lo) >= w.delta || std::abs(rect.im_hi) >= w.delta)
        throw Error(ErrorKind::OutsideWindow, "search rectangle leaves the continued domain");
    detail::WindingCounter counter(ev, kc, opt);
    std::vector<Resonance> out;
    const double scale = std::max(rect.re_hi - rect.re_lo, rect.im_hi - rect.im_lo);

    std::function<void(const Rect&, int, int)> search = [&](const Rect& r, int wind, int depth) {
        if (wind == 0) return;
        if (wind == 1 || depth >= opt.max_depth) {
            cplx z = detail::polish_zero(ev, kc, r.center(), wind, scale);
            if (!r.contains(z)) z = detail::polish_zero(ev, kc, r.center(), 1, scale);
            if (!r.contains(z)) z = r.center();
            const auto s = ev.sample(kc, z, true);
            out.push_back({RVec(k.begin(), k.end()), z, std::abs(s.h_value), wind, s.refinement_gap});
            return;
        }
        const bool split_re = (r.re_hi - r.re_lo) >= (r.im_hi - r.im_lo);
        for (double frac : {0.4142, 0.5858, 0.382, 0.618, 0.47}) {   // never the midline: embedded zeros sit on Im = 0
            Rect a = r, b = r;
            if (split_re) {
                a.re_hi = b.re_lo = r.re_lo + frac * (r.re_hi - r.re_lo);
            } else {
                a.im_hi = b.im_lo = r.im_lo + frac * (r.im_hi - r.im_lo);
            }
            try {
                const int wa = detail::rounded_winding(counter.winding(a));
                const int wb = detail::rounded_winding(counter.winding(b));
                if (wa + wb != wind) continue;
                search(a, wa, depth + 1);
                search(b, wb, depth + 1);
                return;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::BoundaryZero) throw;
            }
        }
        // every split line met a zero: accept the cluster as one multiple zero
        cplx z = detail::polish_zero(ev, kc, r.center(), wind, scale);
        if (!r.contains(z)) z = r.center();
        const auto s = ev.sample(kc, z, true);
        out.push_back({RVec(k.begin(), k.end()), z, std::abs(s.h_value), wind, s.refinement_gap});
    };

    search(rect, detail::rounded_winding(counter.winding(rect)), 0);
    std::sort(out.begin(), out.end(), [](const Resonance& a, const Resonance& b) {
        return a.lambda.real() < b.lambda.real();
    });
    // a degenerate zero split across a bisection line comes back once per piece
    std::vector<Resonance> merged;
    for (auto& r : out) {
        if (!merged.empty() && std::abs(merged.back().lambda - r.lambda) < 1e-7 * scale) {
            merged.back().winding += r.winding;
            continue;
        }
        merged.push_back(std::move(r));
    }
    return merged;
}

/// A window with its search rectangle, used to cover a real interval.
struct Tile {
    SpectralWindow window;
    Rect rect;
};

/// Thresholds (k + n)^2 of the grid modes inside (a, b), ascending.
inline std::vector<double> thresholds_in(std::span<const double> k, double a, double b, const CylinderGrid& grid) {
    std::vector<double> t;
    const auto lat = grid.modes();
    for (int c = 0; c < lat.size(); ++c) {
        const auto n = lat.multi(c);
        double s = 0.0;
        for (std::size_t i = 0; i < k.size(); ++i) s += (k[i] + n[i]) * (k[i] + n[i]);
        if (s > a && s < b) t.push_back(s);
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }), t.end());
    return t;
}

/// Covers [a, b] minus guard bands around thresholds by windows whose rectangles
/// have Re lambda inside the 2 delta dilate and |Im lambda| <= 0.8 delta.
inline std::vector<Tile> tile_interval(const RVec& k, double a, double b, const CylinderGrid& grid,
                                       double guard = 0.05) {
    std::vector<double> cuts{a};
    for (double t : thresholds_in(k, a - guard, b + guard, grid)) {
        cuts.push_back(t - guard);
        cuts.push_back(t + guard);
    }
    cuts.push_back(b);
    std::vector<Tile> tiles;
    for (std::size_t p = 0; p + 1 < cuts.size(); p += 2) {
        const double lo = std::max(cuts[p], a), hi = std::min(cuts[p + 1], b);
        double cur = lo;
        while (cur < hi - 1e-12) {
            const double d0 = build_window(k, cur, grid).delta;
            const double lambda0 = std::min(cur + 0.5 * d0, hi);
            const auto w = build_window(k, lambda0, grid);
            const double right = std::min(lambda0 + w.delta, hi);
            tiles.push_back({w, {cur, right, -0.8 * w.delta, 0.8 * w.delta}});
            cur = right;
        }
    }
    return tiles;
}

/// Evaluator for a window with the default contour and its refinement; the
/// sampled coefficients are shared between windows.
inline FredholmEvaluator window_evaluator(const SampledCoefficients& coarse,
                                          std::shared_ptr<const SampledCoefficients> fine,
                                          const SpectralWindow& w) {
    const auto& grid = coarse.grid;
    std::shared_ptr<const Contour> contour, fine_contour;
    if (!w.J.empty()) {
        contour = std::make_shared<const Contour>(auto_contour(w, grid));
        fine_contour = std::make_shared<const Contour>(refined_contour(*contour, grid, fine->grid));
    }
    return FredholmEvaluator(coarse, std::move(fine), w, contour, fine_contour);
}

/// Zeros of h over a real interval of lambda, window by window. Shared tile edges
/// are moved off the real axis points where h is not certified nonzero, so that a
/// zero never sits on the boundary of two rectangles.
inline std::vector<Resonance> find_resonances_in_interval(const ModelCoefficients& model, const CylinderGrid& grid,
                                                          const RVec& k, double a, double b, int workers = 1,
                                                          const ResonanceSearch& opt = {}) {
    auto tiles = tile_interval(k, a, b, grid);
    const auto coarse = sample_coefficients(model, grid);
    const auto fine = std::make_shared<const SampledCoefficients>(sample_coefficients(model, grid.refined()));
    std::vector<FredholmEvaluator> evs;
    for (const auto& t : tiles) evs.push_back(window_evaluator(coarse, fine, t.window));
    const KVec kc = to_complex(k);
    auto certified = [&](int i, double x) { return evs[i].sample(kc, x, true).certified_nonzero(); };

    for (std::size_t i = 1; i < tiles.size(); ++i) {
        auto& left = tiles[i - 1].rect;
        auto& right = tiles[i].rect;
        if (left.re_hi != right.re_lo) continue;
        const double step = 0.15 * std::min(tiles[i - 1].window.delta, tiles[i].window.delta);
        const double edge = right.re_lo;
        bool ok = false;
        for (double shift : {0.0, step, -step, 2.0 * step, -2.0 * step}) {
            const double x = edge + shift;
            if (x <= left.re_lo || x >= right.re_hi) continue;
            if (certified(int(i) - 1, x) && certified(int(i), x)) {
                left.re_hi = right.re_lo = x;
                ok = true;
                break;
            }
        }
        if (!ok) throw Error(ErrorKind::BoundaryZero, "no certified tile edge near lambda = " + format_double(edge));
    }

    auto per_tile = parallel_map<std::vector<Resonance>>(int(tiles.size()), workers, [&](int i) {
        return find_resonances(evs[i], k, tiles[i].rect, opt);
    });
    std::vector<Resonance> out;
    for (auto& v : per_tile) out.insert(out.end(), v.begin(), v.end());
    return out;
}

// ------------------------------------------------------------------- band scan

struct BandSample {
    RVec k;
    double lambda = 0.0;
    cplx h_value = 0.0;
    double refinement_gap = 0.0;
    bool certified = false;
    bool bragg = false;   // (k, lambda) on a threshold: no window, row skipped
};

struct BandScan {
    std::vector<BandSample> samples;   // lambda outer, k inner
    std::vector<bool> row_witness;     // per lambda: some k with certified h != 0
};

inline BandScan band_scan(const ModelCoefficients& model, const CylinderGrid& grid, const std::vector<RVec>& k_grid,
                          const std::vector<double>& lambda_grid, int workers = 1) {
    const auto coarse = sample_coefficients(model, grid);
    const auto fine = std::make_shared<const SampledCoefficients>(sample_coefficients(model, grid.refined()));
    const int nk = int(k_grid.size()), nl = int(lambda_grid.size());
    BandScan scan;
    scan.samples = parallel_map<BandSample>(nk * nl, workers, [&](int idx) {
        const RVec& k = k_grid[idx % nk];
        const double lambda = lambda_grid[idx / nk];
        BandSample s;
        s.k = k;
        s.lambda = lambda;
        SpectralWindow w;
        try {
            w = build_window(k, lambda, grid);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::BraggResonance) throw;
            s.bragg = true;
            s.h_value = std::numeric_limits<double>::quiet_NaN();
            return s;
        }
        const auto ev = window_evaluator(coarse, fine, w);
        const auto fs = ev.sample(to_complex(k), lambda, true);
        s.h_value = fs.h_value;
        s.refinement_gap = fs.refinement_gap;
        s.certified = fs.certified_nonzero();
        return s;
    });
    scan.row_witness.assign(nl, false);
    for (int idx = 0; idx < nk * nl; ++idx)
        if (scan.samples[idx].certified) scan.row_witness[idx / nk] = true;
    return scan;
}

// -------------------------------------------------------------- spectral density

struct DensitySample {
    double lambda = 0.0;
    double density = 0.0;
    double eps_used = 0.0;              // 0: boundary value from the continued resolvent
    double extrapolation_error = 0.0;   // change under a contour with doubled panels
    bool flagged = false;               // threshold or certified-zero proximity
};

struct DensityCurve {
    RVec k;
    WeightedField probe;
    std::vector<DensitySample> samples;
};

/// (1/pi) Im <R_H(k, lambda + i0) f, f> with its window built at lambda.
inline DensitySample density_at(const SampledCoefficients& coarse, std::shared_ptr<const SampledCoefficients> fine,
                                const RVec& k, double lambda, const WeightedField& f, bool estimate_error) {
    const auto& grid = f.grid;
    DensitySample d;
    d.lambda = lambda;
    try {
        const auto w = build_window(k, lambda, grid);
        const auto ev = window_evaluator(coarse, fine, w);
        const auto contour = ev.contour();
        const KVec kc = to_complex(k);
        d.density = inner(grid, apply_RH_jet(ev, kc, lambda, f).u, f.values).imag() / pi;
        if (estimate_error && contour) {
            const auto doubled = std::make_shared<const Contour>(
                build_contour(contour->lambda0, contour->eta, contour->Xi, 2 * contour->panels, contour->order,
                              contour->grading));
            const auto ls = assemble_lippmann_schwinger(w, doubled, coarse, kc, lambda);
            const double alt = inner(grid, apply_conjugated(coarse, ls, f).u, f.values).imag() / pi;
            d.extrapolation_error = std::abs(alt - d.density);
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::BraggResonance && e.kind() != ErrorKind::NearSingular) throw;
        d.flagged = true;
        d.density = std::numeric_limits<double>::quiet_NaN();
    }
    return d;
}

inline DensityCurve spectral_density(const ModelCoefficients& model, const RVec& k, double alpha, double beta,
                                     int n_samples, const WeightedField& f, int workers = 1,
                                     bool estimate_error = true) {
    const auto& grid = f.grid;
    const auto coarse = sample_coefficients(model, grid);
    const auto fine = std::make_shared<const SampledCoefficients>(sample_coefficients(model, grid.refined()));
    DensityCurve curve{k, f, {}};
    curve.samples = parallel_map<DensitySample>(n_samples, workers, [&](int i) {
        const double lambda = n_samples == 1 ? alpha : alpha + (beta - alpha) * i / (n_samples - 1);
        return density_at(coarse, fine, k, lambda, f, estimate_error);
    });
    return curve;
}

struct SpectralMass {
    double mass = 0.0;
    int evaluations = 0;
    int flagged = 0;
};

/// Integral of the density over [alpha, beta], split at the channel thresholds;
/// on each piece lambda = c + t^2 removes the inverse square-root edge.
inline SpectralMass spectral_mass(const ModelCoefficients& model, const RVec& k, double alpha, double beta,
                                  const WeightedField& f, int nodes_per_piece = 12, int workers = 1) {
    const auto& grid = f.grid;
    const auto coarse = sample_coefficients(model, grid);
    const auto fine = std::make_shared<const SampledCoefficients>(sample_coefficients(model, grid.refined()));
    std::vector<double> cuts{alpha};
    for (double t : thresholds_in(k, alpha, beta, grid)) cuts.push_back(t);
    cuts.push_back(beta);
    // channel thresholds at or below alpha also make the first piece singular at its left end
    struct Node {
        double lambda, weight;
    };
    std::vector<Node> nodes;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double lo = cuts[p], hi = cuts[p + 1];
        if (hi <= lo) continue;
        const auto rule = gauss_legendre(nodes_per_piece, 0.0, std::sqrt(hi - lo));
        for (int q = 0; q < nodes_per_piece; ++q) {
            const double t = rule.nodes[q];
            nodes.push_back({lo + t * t, 2.0 * t * rule.weights[q]});
        }
    }
    const auto values = parallel_map<DensitySample>(int(nodes.size()), workers, [&](int i) {
        return density_at(coarse, fine, k, nodes[i].lambda, f, false);
    });
    SpectralMass m;
    m.evaluations = int(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (values[i].flagged) {
            ++m.flagged;
            continue;
        }
        m.mass += nodes[i].weight * values[i].density;
    }
    return m;
}

struct DirectIntegral {
    double measure = 0.0;
    std::vector<RVec> skipped_k;
};

/// sum_k w_k <E_{H(k)}([alpha, beta]) f_k, f_k> over a quadrature in k.
inline DirectIntegral direct_integral_measure(const ModelCoefficients& model,
                                              const std::vector<std::pair<RVec, double>>& k_quadrature,
                                              double alpha, double beta,
                                              const std::function<WeightedField(const RVec&)>& f_family,
                                              int nodes_per_piece = 12, int workers = 1) {
    DirectIntegral out;
    for (const auto& [k, wk] : k_quadrature) {
        const auto f = f_family(k);
        const auto m = spectral_mass(model, k, alpha, beta, f, nodes_per_piece, workers);
        if (m.flagged > 0) {
            out.skipped_k.push_back(k);
            continue;
        }
        out.measure += wk * m.mass;
    }
    return out;
}

} // namespace cylres
