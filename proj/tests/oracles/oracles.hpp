// oracles.hpp: reference computations for the test suite. Nothing here calls
// into the library: closed forms, adaptive quadrature, transfer matrices and
// shooting are written out independently.
#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

// ------------------------------------------------------------------ quadrature

/// Adaptive 7/15 Gauss–Kronrod on [a, b] for complex integrands.
inline cplx integrate(const std::function<cplx(double)>& f, double a, double b, double tol = 1e-13,
                      int depth = 0) {
    static const double xk[8] = {0.991455371120812639, 0.949107912342758525, 0.864864423359769073,
                                 0.741531185599394440, 0.586087235467691130, 0.405845151377397167,
                                 0.207784955007898468, 0.0};
    static const double wk[8] = {0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
                                 0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
                                 0.204432940075298892, 0.209482141084727828};
    static const double wg[4] = {0.129484966168869693, 0.279705391489276668, 0.381830050505118945,
                                 0.417959183673469388};
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    cplx K = wk[7] * f(c), G = wg[3] * f(c);
    for (int i = 0; i < 7; ++i) {
        const cplx s = f(c - h * xk[i]) + f(c + h * xk[i]);
        K += wk[i] * s;
        if (i % 2 == 1) G += wg[i / 2] * s;
    }
    K *= h;
    G *= h;
    if (std::abs(K - G) <= tol * std::max(1.0, std::abs(K)) || depth > 40) return K;
    return integrate(f, a, c, tol, depth + 1) + integrate(f, c, b, tol, depth + 1);
}

// ---------------------------------------------------------------- closed forms

/// int e^{-i xi x} e^{-(x - c)^2 / w^2} dx / (2 pi), valid for complex xi.
inline cplx gaussian_fourier(cplx xi, double c, double w) {
    return w / (2.0 * std::sqrt(pi)) * std::exp(-cplx(0, 1) * xi * c - xi * xi * w * w / 4.0);
}

/// (1 / 2 pi) int_{-Xi}^{Xi} d xi / (xi^2 + s), continued from Re sqrt(s) > 0 by
/// the branch root = -i sqrt(-s) with Im sqrt(-s) >= 0 sheet chosen by the caller.
inline cplx truncated_green_at_zero(cplx root, double Xi) {
    return std::atan(Xi / root) / (pi * root);
}

/// Open channel, s = -kappa^2 with kappa > 0: the same integral along a path
/// passing above -kappa and below +kappa (outgoing continuation from Im s < 0):
/// i / (2 kappa) + log((Xi - kappa) / (Xi + kappa)) / (2 pi kappa).
inline cplx truncated_green_outgoing(double kappa, double Xi) {
    return cplx(0.0, 0.5 / kappa) + std::log((Xi - kappa) / (Xi + kappa)) / (2.0 * pi * kappa);
}

/// First-order trace of V R on the cylinder for V = v(x) independent of y:
/// int v dx times the sum over channel energies c_n of the diagonal Green value.
inline cplx first_order_trace(double integral_v, const std::vector<double>& channel_energy, double lambda,
                              double Xi) {
    cplx t = 0.0;
    for (double c : channel_energy)
        t += c > lambda ? truncated_green_at_zero(std::sqrt(c - lambda), Xi)
                        : truncated_green_outgoing(std::sqrt(lambda - c), Xi);
    return integral_v * t;
}

// ------------------------------------------------------------- square well

/// Bound-state condition for V = -V0 on |x| < a/2 in 1-D, as a function of the
/// channel energy E (complex allowed): even and odd parity determinants.
/// kappa = sqrt(-E) (decay outside), q = sqrt(V0 + E) (inside).
inline cplx square_well_even(cplx E, double V0, double width) {
    const cplx kappa = std::sqrt(-E), q = std::sqrt(V0 + E);
    return q * std::sin(q * width / 2.0) - kappa * std::cos(q * width / 2.0);
}
inline cplx square_well_odd(cplx E, double V0, double width) {
    const cplx kappa = std::sqrt(-E), q = std::sqrt(V0 + E);
    return q * std::cos(q * width / 2.0) + kappa * std::sin(q * width / 2.0);
}

/// Jost function of the square well by a transfer matrix: the solution equal to
/// e^{-kappa x} for x > a/2 is carried across the well; its coefficient of the
/// growing exponential e^{kappa x} on the left vanishes exactly at bound states.
inline cplx square_well_jost(cplx E, double V0, double width) {
    const cplx kappa = std::sqrt(-E), q = std::sqrt(V0 + E);
    const double x1 = width / 2.0;
    // value and slope at x = a/2
    cplx u = std::exp(-kappa * x1), du = -kappa * u;
    // inside u'' = -q^2 u; carry (u, u') back across the well to x = -a/2
    const cplx c = std::cos(q * width), s = std::sin(q * width);
    const cplx uL = u * c - du * s / q;
    const cplx duL = u * q * s + du * c;
    // left of the well u = A e^{kappa x} + B e^{-kappa x}; B multiplies the branch
    // that grows as x -> -infinity
    const cplx B = (kappa * uL - duL) / (2.0 * kappa) * std::exp(-kappa * x1);
    return B;
}

/// Real root of f on [a, b] by bisection (f changes sign).
inline double bisect(const std::function<double(double)>& f, double a, double b, double tol = 1e-15) {
    double fa = f(a);
    if (fa * f(b) > 0) throw std::runtime_error("no sign change");
    for (int it = 0; it < 200 && b - a > tol; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

/// Bound-state energies of the square well, ascending, from sign changes of the
/// Jost function on the real energy axis.
inline std::vector<double> square_well_bound_states(double V0, double width, int samples = 20000) {
    std::vector<double> out;
    auto f = [&](double E) { return square_well_jost(cplx(E, 0.0), V0, width).real(); };
    double prev = f(-V0 + 1e-12);
    for (int i = 1; i <= samples; ++i) {
        const double a = -V0 + 1e-12 + (V0 - 2e-12) * (i - 1) / samples;
        const double b = -V0 + 1e-12 + (V0 - 2e-12) * i / samples;
        const double fb = f(b);
        if ((prev < 0) != (fb < 0)) out.push_back(bisect(f, a, b));
        prev = fb;
    }
    return out;
}

// ---------------------------------------------------------------- shooting

struct BoundState {
    double energy = 0.0;
    std::vector<double> x, psi;   // normalized: int psi^2 dx = 1
};

/// Ground state of -psi'' + V psi = E psi on [-X, X] by RK4 shooting from the
/// left with decaying initial data and bisection on the node count and the sign
/// of psi at the right end.
inline BoundState ground_state(const std::function<double(double)>& V, double Emin, double Emax, double X = 10.0,
                               int steps = 8000) {
    const double h = 2.0 * X / steps;
    auto shoot = [&](double E, std::vector<double>* path) {
        double y = 1e-12, dy = 1e-12 * std::sqrt(std::max(V(-X) - E, 1e-6));
        int nodes = 0;
        auto rhs = [&](double x, double yy) { return (V(x) - E) * yy; };
        if (path) path->assign(1, y);
        for (int i = 0; i < steps; ++i) {
            const double x = -X + i * h;
            const double k1y = dy, k1d = rhs(x, y);
            const double k2y = dy + 0.5 * h * k1d, k2d = rhs(x + 0.5 * h, y + 0.5 * h * k1y);
            const double k3y = dy + 0.5 * h * k2d, k3d = rhs(x + 0.5 * h, y + 0.5 * h * k2y);
            const double k4y = dy + h * k3d, k4d = rhs(x + h, y + h * k3y);
            const double yn = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y);
            dy += h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d);
            if ((yn < 0) != (y < 0)) ++nodes;
            y = yn;
            if (path) path->push_back(y);
        }
        return std::make_pair(nodes, y);
    };
    // below the ground state: no node and psi(X) > 0; above: a node appears
    double lo = Emin, hi = Emax;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto [nodes, end] = shoot(mid, nullptr);
        if (nodes == 0 && end > 0) lo = mid;
        else hi = mid;
    }
    BoundState b;
    b.energy = 0.5 * (lo + hi);
    shoot(b.energy, &b.psi);
    b.x.resize(b.psi.size());
    for (std::size_t i = 0; i < b.x.size(); ++i) b.x[i] = -X + i * h;
    // the shot diverges beyond the turning region on the far side; cut it at its
    // minimum modulus past the well and normalize
    std::size_t cut = b.psi.size() - 1;
    double best = std::abs(b.psi.back());
    for (std::size_t i = b.psi.size() / 2; i < b.psi.size(); ++i)
        if (std::abs(b.psi[i]) < best) {
            best = std::abs(b.psi[i]);
            cut = i;
        }
    for (std::size_t i = cut; i < b.psi.size(); ++i) b.psi[i] = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i + 1 < b.psi.size(); ++i)
        norm += 0.5 * h * (b.psi[i] * b.psi[i] + b.psi[i + 1] * b.psi[i + 1]);
    for (auto& v : b.psi) v /= std::sqrt(norm);
    return b;
}

/// Linear interpolation of a tabulated state.
inline double sample(const BoundState& b, double x) {
    if (x <= b.x.front() || x >= b.x.back()) return 0.0;
    const double h = b.x[1] - b.x[0];
    const std::size_t i = std::size_t((x - b.x.front()) / h);
    const double t = (x - b.x[i]) / h;
    return (1 - t) * b.psi[i] + t * b.psi[i + 1];
}

} // namespace oracle
