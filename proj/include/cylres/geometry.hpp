// geometry.hpp: discretization of the cylinder R^m x (0, 2pi)^d, weighted
// fields, spectral windows around a non-Bragg point (k0, lambda0) and the
// deformed integration contour used to continue the open-channel resolvent.
#pragma once

#include "cylres/error.hpp"
#include "cylres/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cylres {

// --------------------------------------------------------------- mode lattice

/// Integer multi-indices n with |n_i| <= radius in d dimensions, flattened with
/// the first coordinate running fastest.
struct ModeLattice {
    int d = 1;
    int radius = 0;

    int side() const noexcept { return 2 * radius + 1; }
    int size() const noexcept {
        int s = 1;
        for (int i = 0; i < d; ++i) s *= side();
        return s;
    }
    std::vector<int> multi(int idx) const {
        std::vector<int> n(d);
        for (int i = 0; i < d; ++i) {
            n[i] = idx % side() - radius;
            idx /= side();
        }
        return n;
    }
    /// Flat index of n, or -1 when n lies outside the lattice.
    int index(std::span<const int> n) const noexcept {
        int idx = 0, stride = 1;
        for (int i = 0; i < d; ++i) {
            if (std::abs(n[i]) > radius) return -1;
            idx += (n[i] + radius) * stride;
            stride *= side();
        }
        return idx;
    }
};

// -------------------------------------------------------------- cylinder grid

struct CylinderGrid {
    int m = 1;         // decay dimensions
    int d = 1;         // periodic dimensions
    double L = 12.0;   // x-box half-width
    int nx = 256;      // x nodes on [-L, L)
    int ny = 8;        // Fourier cutoff |n_i| <= ny
    std::size_t memory_budget = std::size_t(4) << 30;

    double h() const noexcept { return 2.0 * L / nx; }
    double x(int j) const noexcept { return -L + j * h(); }
    double nyquist() const noexcept { return pi / h(); }
    ModeLattice modes() const noexcept { return {d, ny}; }
    int mode_count() const noexcept { return modes().size(); }
    std::size_t dof() const noexcept { return std::size_t(nx) * mode_count(); }
    /// Measure of one grid cell in x times the y-torus volume.
    double cell_measure() const noexcept { return h() * std::pow(two_pi, d); }
    /// Nodes with |x| <= L - L/8 (away from the box-truncation collar).
    bool interior(int j) const noexcept { return std::abs(x(j)) <= L - L / 8.0; }

    void validate() const {
        if (m != 1)
            throw Error(ErrorKind::InvalidGrid, "only m = 1 decay dimension is supported");
        if (d < 1 || d > 2) throw Error(ErrorKind::InvalidGrid, "d must be 1 or 2");
        if (!(L > 0.0)) throw Error(ErrorKind::InvalidGrid, "L must be positive");
        if (nx < 16 || nx % 2 != 0)
            throw Error(ErrorKind::InvalidGrid, "N_x must be even and at least 16");
        if (ny < 1) throw Error(ErrorKind::InvalidGrid, "N_y must be at least 1");
        // a dense Nystrom matrix over all DOFs is the largest object we build
        const double bytes = double(dof()) * double(dof()) * sizeof(cplx);
        if (bytes > double(memory_budget))
            throw Error(ErrorKind::InvalidGrid, "grid exceeds the configured memory budget");
    }

    /// One refinement step: N_x -> 5 N_x / 4 (kept even), N_y -> N_y + 2.
    CylinderGrid refined() const {
        CylinderGrid g = *this;
        g.nx = (5 * nx / 4 + 1) / 2 * 2;
        g.ny = ny + 2;
        return g;
    }
};

// ------------------------------------------------------------ weighted fields

/// Samples on the x-grid times y-Fourier modes; column c holds mode modes().multi(c).
struct WeightedField {
    CylinderGrid grid;
    CMat values;
    double weight_a = 0.0;

    static WeightedField zeros(const CylinderGrid& grid, double a = 0.0) {
        return {grid, CMat::Zero(grid.nx, grid.mode_count()), a};
    }
};

/// A field together with its first and second x-derivatives.
struct FieldJet {
    CMat u, ux, uxx;
};

/// Discrete L_{2,a} norm: quadrature of |e^{a<x>} f|^2 over the box and the torus.
inline double weighted_norm(const CylinderGrid& grid, const CMat& v, double a,
                            bool interior_only = false) {
    double s = 0.0;
    for (int j = 0; j < grid.nx; ++j) {
        if (interior_only && !grid.interior(j)) continue;
        const double w = std::exp(2.0 * a * bracket(grid.x(j)));
        s += w * v.row(j).squaredNorm();
    }
    return std::sqrt(s * grid.cell_measure());
}

inline double weighted_norm(const WeightedField& f, bool interior_only = false) {
    return weighted_norm(f.grid, f.values, f.weight_a, interior_only);
}

/// <u, v> = integral over the cylinder of u conj(v).
inline cplx inner(const CylinderGrid& grid, const CMat& u, const CMat& v) {
    cplx s = 0.0;
    for (int c = 0; c < u.cols(); ++c) s += v.col(c).dot(u.col(c));
    return s * grid.cell_measure();
}

// ----------------------------------------------------------- model coefficients

using CoefficientFn = std::function<double(double x, std::span<const double> y)>;

/// The fields g and V of H u = -div(g grad u) + V u, normalized to g0 = 1.
struct ModelCoefficients {
    std::string family = "free";
    CoefficientFn g = [](double, std::span<const double>) { return 1.0; };
    CoefficientFn V = [](double, std::span<const double>) { return 0.0; };
    double g0 = 1.0;
    double c0 = 1.0;
    double decay_b = 20.0;
    double decay_C = std::numeric_limits<double>::infinity();
    std::vector<double> x_edges;   // jump locations; cells straddling one are averaged
    bool y_independent = true;
    bool metric_trivial = true;    // g == 1 identically
    bool potential_trivial = true; // V == 0 identically
    std::optional<double> truncation_radius;
};

// ------------------------------------------------------------ spectral window

using RVec = std::vector<double>;
using KVec = std::vector<cplx>;

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

/// (k + n)^2 without conjugation, valid for complex k.
inline cplx shifted_square(std::span<const cplx> k, std::span<const int> n) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const cplx t = k[i] + double(n[i]);
        s += t * t;
    }
    return s;
}

inline KVec to_complex(std::span<const double> k) { return KVec(k.begin(), k.end()); }

struct SpectralWindow {
    RVec k0;
    double lambda0 = 0.0;
    double delta = 0.0;
    std::vector<std::vector<int>> J;   // open channels, lexicographic in the lattice order
    RVec tilde_k;
    bool tilde_offset_applied = false;
    int cutoff = 0;                    // N_y of the grid the window was certified for
    int scan_radius = 0;

    bool is_open(std::span<const int> n) const {
        return std::any_of(J.begin(), J.end(), [&](const std::vector<int>& j) {
            return std::equal(j.begin(), j.end(), n.begin());
        });
    }

    /// (k, lambda) in the 2 delta dilate of M_1 (ball around k0 or the dilated family).
    /// In lambda the continuation needs |Re lambda - lambda0| < 2 delta and
    /// Im lambda > -2 delta; the whole upper half-plane above that strip is admitted.
    bool in_neighborhood(std::span<const cplx> k, cplx lambda) const {
        if (std::abs(lambda.real() - lambda0) >= 2.0 * delta || lambda.imag() <= -2.0 * delta) return false;
        double dk = 0.0;
        for (std::size_t i = 0; i < k.size(); ++i) dk += std::norm(k[i] - k0[i]);
        if (std::sqrt(dk) < 2.0 * delta) return true;
        double df = std::abs(k[0].real() - tilde_k[0]);
        for (std::size_t i = 1; i < k.size(); ++i) df += std::abs(k[i] - tilde_k[i]);
        return df < 2.0 * delta;
    }
};

/// Builds the window around (k0, lambda0): open-channel set J by exhaustive scan,
/// radius delta from the threshold margins with a Lipschitz correction.
inline SpectralWindow build_window(const RVec& k0, double lambda0, const CylinderGrid& grid) {
    grid.validate();
    if (int(k0.size()) != grid.d)
        throw Error(ErrorKind::InvalidGrid, "k0 dimension does not match d");
    SpectralWindow w;
    w.k0 = k0;
    w.lambda0 = lambda0;
    w.cutoff = grid.ny;

    double kinf = 0.0;
    for (double v : k0) kinf = std::max(kinf, std::abs(v));
    const int jscan = int(std::ceil(std::sqrt(std::max(lambda0, 0.0)) + kinf)) + 1;
    w.scan_radius = std::max(jscan, grid.ny + 2);

    const ModeLattice lattice{grid.d, w.scan_radius};
    double delta = std::numeric_limits<double>::infinity();
    for (int idx = 0; idx < lattice.size(); ++idx) {
        const auto n = lattice.multi(idx);
        double s = 0.0;
        for (int i = 0; i < grid.d; ++i) s += (k0[i] + n[i]) * (k0[i] + n[i]);
        const double margin = std::abs(s - lambda0);
        if (margin < 1e-9)
            throw Error(ErrorKind::BraggResonance,
                        "(k0 + n)^2 = lambda0 for a mode within the cutoff and guard band");
        delta = std::min(delta, 0.5 * margin / (2.0 + 2.0 * std::sqrt(s)));
        if (s < lambda0) w.J.push_back(n);
    }
    w.delta = std::min(delta, 0.25);

    for (const auto& n : w.J)
        for (int v : n)
            if (std::abs(v) > grid.ny)
                throw Error(ErrorKind::InvalidGrid, "open channel lies outside the mode cutoff");

    w.tilde_k = k0;
    if (std::abs(k0[0] - std::round(k0[0])) < 1e-12) {
        w.tilde_k[0] += std::min(1e-2, w.delta / 2.0) / std::sqrt(2.0);
        w.tilde_offset_applied = true;
    }

    // channel dichotomy on a probe grid of the closed ball
    const ModeLattice modes = grid.modes();
    const std::array<double, 5> t{-0.99, -0.5, 0.0, 0.5, 0.99};
    for (double tk : t)
        for (double tl : t) {
            RVec k = k0;
            for (auto& v : k) v += tk * w.delta / std::sqrt(double(grid.d));
            const double lam = lambda0 + tl * w.delta;
            for (int idx = 0; idx < modes.size(); ++idx) {
                const auto n = modes.multi(idx);
                double s = 0.0;
                for (int i = 0; i < grid.d; ++i) s += (k[i] + n[i]) * (k[i] + n[i]);
                if ((s < lam) != w.is_open(n))
                    throw Error(ErrorKind::BoundViolation, "channel dichotomy fails inside the window");
            }
        }
    return w;
}

/// k(tau) = (tilde_k_1 + i tau, tilde_k').
inline KVec dilated_momentum(const SpectralWindow& w, double tau) {
    KVec k = to_complex(w.tilde_k);
    k[0] += I * tau;
    return k;
}

// -------------------------------------------------------------------- contour

enum class Segment { LeftConnector, LeftRay, Middle, RightRay, RightConnector };

struct ContourNode {
    cplx z;
    cplx w;   // complex weight dz
    Segment segment;
};

/// Truncated three-piece contour: left ray -xi + i eta, middle alpha (1 - i),
/// right ray xi - i eta, with |Re z| <= Xi, closed by vertical connectors from -Xi
/// and to +Xi on the real axis. The closed path runs from -Xi to Xi, so for the
/// band-limited integrands used on the grid it reproduces the real-axis integral
/// over [-Xi, Xi] up to residues, with no truncation term.
struct Contour {
    double lambda0 = 0.0;
    double eta = 0.0;
    double Xi = 0.0;
    int panels = 0;
    int order = 16;
    double grading = 0.0;   // > 0: middle panels refined geometrically toward 0 down to this scale
    std::vector<ContourNode> nodes;
    double truncation_bound = 0.0;

    /// Point of a segment: connectors take the height, rays the real part, the
    /// middle its real coordinate.
    static cplx point(Segment s, double param, double eta, double Xi) {
        switch (s) {
        case Segment::LeftConnector: return {-Xi, param};
        case Segment::RightConnector: return {Xi, param};
        case Segment::LeftRay: return {-param, eta};
        case Segment::Middle: return param * cplx(1.0, -1.0);
        case Segment::RightRay: return {param, -eta};
        }
        return {};
    }
    cplx point(Segment s, double param) const { return point(s, param, eta, Xi); }

    /// Exact value of the integral of dz over the closed truncated contour.
    cplx path_integral_of_one() const { return cplx(2.0 * Xi, 0.0); }
};

inline Contour build_contour(double lambda0, double eta, double Xi, int panels, int order = 16,
                             double grading = 0.0) {
    if (!(eta > std::sqrt(std::max(lambda0, 0.0))))
        throw Error(ErrorKind::InvalidContour, "eta must exceed sqrt(lambda0)");
    if (!(Xi >= eta)) throw Error(ErrorKind::InvalidContour, "Xi must be at least eta");
    if (panels < 1) throw Error(ErrorKind::InvalidContour, "panel count must be positive");
    Contour c;
    c.lambda0 = lambda0;
    c.eta = eta;
    c.Xi = Xi;
    c.panels = panels;
    c.order = order;
    c.grading = grading;

    const auto base = gauss_legendre(order);
    auto add_panels = [&](Segment seg, double a, double b, int count) {
        const double len = (b - a) / count;
        for (int p = 0; p < count; ++p) {
            const double lo = a + p * len, half = 0.5 * len, mid = lo + half;
            for (int q = 0; q < order; ++q) {
                const double s = mid + half * base.nodes[q];
                const double ws = half * base.weights[q];
                switch (seg) {
                case Segment::LeftConnector:
                    // s is the height: z = -Xi + i s, dz = i ds
                    c.nodes.push_back({cplx(-Xi, s), cplx(0.0, ws), seg});
                    break;
                case Segment::RightConnector:
                    // s runs from -eta to 0: z = Xi + i s
                    c.nodes.push_back({cplx(Xi, s), cplx(0.0, ws), seg});
                    break;
                case Segment::LeftRay:
                    // xi runs from Xi down to eta, z = -xi + i eta, dz = -dxi
                    c.nodes.push_back({cplx(-s, eta), cplx(ws, 0.0), seg});
                    break;
                case Segment::Middle:
                    c.nodes.push_back({s * cplx(1.0, -1.0), ws * cplx(1.0, -1.0), seg});
                    break;
                case Segment::RightRay:
                    c.nodes.push_back({cplx(s, -eta), cplx(ws, 0.0), seg});
                    break;
                }
            }
        }
    };
    const double middle_len = 2.0 * eta * std::sqrt(2.0);
    const int ray_panels =
        Xi > eta ? std::max(1, int(std::ceil(panels * (Xi - eta) / middle_len))) : 0;
    const double panel_len = middle_len / panels;
    const int connector_panels = std::max(1, int(std::ceil(eta / panel_len)));
    add_panels(Segment::LeftConnector, 0.0, eta, connector_panels);
    if (ray_panels > 0) {
        // left ray is parametrized by xi in [eta, Xi]; emit in path order (xi descending)
        const std::size_t first = c.nodes.size();
        add_panels(Segment::LeftRay, eta, Xi, ray_panels);
        std::reverse(c.nodes.begin() + long(first), c.nodes.end());
    }
    // middle breakpoints: uniform, plus a geometric sequence toward the origin so
    // that panels near an open-channel pole at distance ~ grading stay shorter than it
    std::vector<double> breaks;
    for (int p = 0; p <= panels; ++p) breaks.push_back(-eta + 2.0 * eta * p / panels);
    if (grading > 0.0 && grading < middle_len / panels) {
        breaks.push_back(0.0);
        for (double b = grading / 4.0; b < eta; b *= 2.0) {
            breaks.push_back(b);
            breaks.push_back(-b);
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end(),
                                 [](double a, double b) { return std::abs(a - b) < 1e-14; }),
                     breaks.end());
    }
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) add_panels(Segment::Middle, breaks[b], breaks[b + 1], 1);
    if (ray_panels > 0) add_panels(Segment::RightRay, eta, Xi, ray_panels);
    add_panels(Segment::RightConnector, -eta, 0.0, connector_panels);
    c.truncation_bound = 2.0 / std::max(Xi - std::sqrt(std::max(lambda0, 0.0) + 1.0), 1e-300);
    return c;
}

/// Default contour: eta a fixed margin above sqrt(lambda0), rays truncated at the
/// Nyquist frequency of the grid. Panel length min(1/2, 3/L) keeps the phase of
/// e^{i zeta (x - x')} below 12 radians per 16-node panel across the whole box.
inline Contour auto_contour(double lambda0, const CylinderGrid& grid, double grading = 0.0) {
    const double s = std::sqrt(std::max(lambda0, 0.0));
    const double eta = std::max({1.2 * s, s + 0.5, 1.0});
    const double Xi = std::max(grid.nyquist(), eta);
    const double len = std::min(0.5, 3.0 / grid.L);
    const int panels = std::max(2, int(std::ceil(2.0 * eta * std::sqrt(2.0) / len)));
    return build_contour(lambda0, eta, Xi, panels, 16, grading);
}

/// Default contour for a window: graded toward the smallest open-channel
/// momentum sqrt(lambda - (k + n)^2) reachable inside the window.
inline Contour auto_contour(const SpectralWindow& w, const CylinderGrid& grid) {
    double kappa = std::numeric_limits<double>::infinity();
    for (const auto& n : w.J) {
        double s = 0.0;
        for (std::size_t i = 0; i < n.size(); ++i) s += (w.k0[i] + n[i]) * (w.k0[i] + n[i]);
        kappa = std::min(kappa, std::sqrt(std::max(w.lambda0 - 2.0 * w.delta - s, 0.0)));
    }
    return auto_contour(w.lambda0, grid, std::isfinite(kappa) ? kappa : 0.0);
}

/// Weight exponent used by the open-channel machinery (a > eta sqrt(m)); zero when
/// no channel is open.
inline double default_weight(const SpectralWindow& w, const Contour& c) {
    return w.J.empty() ? 0.0 : 1.25 * c.eta;
}

// ---------------------------------------------------------- bound certificates

struct BoundProbe {
    int zeta_points = 33;
    int k_points = 5;
    int lambda_points = 5;
    std::vector<double> taus{1, 2, 5, 10, 20, 40};
};

struct BoundReport {
    double c_closed = std::numeric_limits<double>::infinity();
    double c_open = std::numeric_limits<double>::infinity();   // +inf when J is empty
    double c_tau_slope = std::numeric_limits<double>::infinity();
    double tau_at_min = 0.0;
};

/// Probe-grid minima of |zeta^2 + (k + n)^2 - lambda| for closed channels on the
/// real axis, open channels on the contour, and of the same quantity over |tau|
/// along the dilated family.
inline BoundReport verify_nonresonance_bounds(const SpectralWindow& w, const Contour& c,
                                              const BoundProbe& probe = {}) {
    const int d = int(w.k0.size());
    const ModeLattice modes{d, w.cutoff + 2};
    BoundReport r;

    std::vector<cplx> real_zeta;
    const double Z = std::max(4.0, 2.0 * std::sqrt(std::abs(w.lambda0)) + 2.0);
    for (int i = 0; i < probe.zeta_points; ++i)
        real_zeta.push_back(-Z + 2.0 * Z * i / (probe.zeta_points - 1));

    // uniform arclength samples of the truncated contour
    std::vector<cplx> gamma_zeta;
    {
        const double ray = c.Xi - c.eta, mid = 2.0 * c.eta * std::sqrt(2.0);
        const double total = 2.0 * ray + mid;
        for (int i = 0; i < probe.zeta_points; ++i) {
            double s = total * i / (probe.zeta_points - 1);
            if (s < ray) {
                gamma_zeta.push_back(Contour::point(Segment::LeftRay, c.Xi - s, c.eta, c.Xi));
            } else if (s < ray + mid) {
                gamma_zeta.push_back(
                    Contour::point(Segment::Middle, -c.eta + (s - ray) / std::sqrt(2.0), c.eta, c.Xi));
            } else {
                gamma_zeta.push_back(Contour::point(Segment::RightRay, c.eta + (s - ray - mid), c.eta, c.Xi));
            }
        }
    }

    std::vector<double> offsets;
    for (int i = 0; i < probe.k_points; ++i)
        offsets.push_back(-0.99 + 1.98 * i / std::max(1, probe.k_points - 1));
    std::vector<RVec> ks;
    if (d == 1) {
        for (double t : offsets) ks.push_back({w.k0[0] + t * w.delta});
    } else {
        for (double t1 : offsets)
            for (double t2 : offsets)
                ks.push_back({w.k0[0] + t1 * w.delta / std::sqrt(2.0),
                              w.k0[1] + t2 * w.delta / std::sqrt(2.0)});
    }
    std::vector<double> lams;
    for (int i = 0; i < probe.lambda_points; ++i)
        lams.push_back(w.lambda0 + (-0.99 + 1.98 * i / std::max(1, probe.lambda_points - 1)) * w.delta);

    for (int idx = 0; idx < modes.size(); ++idx) {
        const auto n = modes.multi(idx);
        const bool open = w.is_open(n);
        if (open && w.lambda0 <= 0.0) continue;
        const auto& zetas = open ? gamma_zeta : real_zeta;
        double& target = open ? r.c_open : r.c_closed;
        for (const auto& kr : ks) {
            const cplx s = shifted_square(to_complex(kr), n);
            for (double lam : lams)
                for (cplx z : zetas) target = std::min(target, std::abs(z * z + s - lam));
        }
        for (double tau : probe.taus)
            for (double sign : {1.0, -1.0}) {
                const cplx s = shifted_square(dilated_momentum(w, sign * tau), n);
                for (double lam : lams)
                    for (cplx z : zetas) {
                        const double v = std::abs(z * z + s - lam) / tau;
                        if (v < r.c_tau_slope) {
                            r.c_tau_slope = v;
                            r.tau_at_min = tau;
                        }
                    }
            }
    }
    if (r.c_closed < 1e-12 || r.c_open < 1e-12 || r.c_tau_slope < 1e-12)
        throw Error(ErrorKind::BoundViolation, "denominator lower bound underflows on the probe grid");
    return r;
}

} // namespace cylres
