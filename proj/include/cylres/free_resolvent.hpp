// free_resolvent.hpp: resolvent of the free fiber operator A(k): closed channels
// on the real frequency axis, open channels on the deformed contour, their sum
// continued across the real lambda axis, and the direct upper-half-plane oracle.
//
// Every mode block is translation invariant, so each is a Toeplitz kernel K[i - j]
// on the x-grid. Real-axis blocks are evaluated as the whole-line operator by
// zero-padding the box to a period over which the kernel has decayed below
// rounding; contour blocks are quadrature sums over the contour nodes.
#pragma once

#include "cylres/error.hpp"
#include "cylres/geometry.hpp"
#include "cylres/numerics.hpp"
#include "cylres/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <vector>

namespace cylres {

enum class ResolventKind { R1, R2, RA, RH, Direct };

inline constexpr double denominator_floor = 1e-12;

namespace detail {

/// Zero-padded FFT length so that the closed-channel kernel decays by e^{-36}
/// over the padding.
inline int padded_length(int nx, double h, cplx c_minus_lambda) {
    const double rho = std::abs(sqrt_upper(-c_minus_lambda).imag());
    const double extra = rho > 0.0 ? 36.0 / (rho * h) : 1e300;
    return next_pow2(static_cast<long long>(std::min(double(nx) + extra, double(1 << 21))));
}

/// e^{sign i zeta_c x_j} for all nodes, built by powers of e^{i zeta_c h}.
inline CMat contour_exponentials(const CylinderGrid& grid, const Contour& contour, double sign) {
    const int Nc = int(contour.nodes.size());
    CMat E(grid.nx, Nc);
    for (int c = 0; c < Nc; ++c) {
        const cplx z = sign * contour.nodes[c].z;
        const cplx r = std::exp(I * z * grid.h());
        cplx v = std::exp(I * z * grid.x(0));
        for (int j = 0; j < grid.nx; ++j) {
            E(j, c) = v;
            v *= r;
        }
    }
    return E;
}

/// e^{+- i zeta_c x_j}, built on first use; only the apply path needs them.
struct LazyExponentials {
    std::once_flag once;
    CMat plus, minus;

    void ensure(const CylinderGrid& grid, const Contour& contour) {
        std::call_once(once, [&] {
            plus = contour_exponentials(grid, contour, 1.0);
            minus = contour_exponentials(grid, contour, -1.0);
        });
    }
};

} // namespace detail

/// The free resolvent of one kind at a fixed (k, lambda), stored as per-mode
/// multipliers. apply() is reentrant.
struct ResolventOperator {
    ResolventKind kind = ResolventKind::RA;
    KVec k;
    cplx lambda = 0.0;
    double weight_a = 0.0;
    const SpectralWindow* window = nullptr;
    std::shared_ptr<const Contour> contour;
    CylinderGrid grid;
    std::vector<cplx> channel;          // (k + n)^2 per grid mode
    std::vector<char> open;             // mode evaluated on the contour
    std::vector<char> active;           // mode used by this kind
    std::shared_ptr<detail::LazyExponentials> exponentials;   // set when a mode is open

    /// Values and first two x-derivatives of R f on the grid.
    FieldJet apply_jet(const WeightedField& f) const {
        const int N = grid.nx, nm = grid.mode_count();
        FieldJet out{CMat::Zero(N, nm), CMat::Zero(N, nm), CMat::Zero(N, nm)};
        for (int c = 0; c < nm; ++c) {
            if (!active[c]) continue;
            if (open[c]) apply_contour(f.values.col(c), c, out, c);
            else apply_real_axis(f.values.col(c), c, out, c);
        }
        return out;
    }

    WeightedField apply(const WeightedField& f) const {
        return {grid, apply_jet(f).u, output_weight()};
    }

    double output_weight() const { return -weight_a; }

    /// Toeplitz kernel of mode c: entry m + N - 1 holds K[m], |m| < N. Only
    /// |m| < span is filled (span <= 0: all of them).
    CVec kernel(int c, int span = 0) const {
        const int N = grid.nx;
        const int M = span <= 0 ? N : std::min(span, N);
        CVec K = CVec::Zero(2 * N - 1);
        if (!active[c]) return K;
        if (open[c]) {
            const double h = grid.h();
            for (std::size_t q = 0; q < contour->nodes.size(); ++q) {
                const auto& nd = contour->nodes[q];
                const cplx a = h / two_pi * nd.w / (nd.z * nd.z + channel[c] - lambda);
                const cplx r = std::exp(I * nd.z * h);
                cplx v = std::exp(-I * nd.z * h * double(M - 1));
                for (int m = N - M; m < N + M - 1; ++m) {
                    K[m] += a * v;
                    v *= r;
                }
            }
            return K;
        }
        const cplx s = channel[c] - lambda;
        const int Np = std::max(detail::padded_length(N, grid.h(), s), 2 * N);
        const auto xi = dft_frequencies(Np, grid.h());
        std::vector<cplx> S(Np);
        for (int q = 0; q < Np; ++q) S[q] = 1.0 / (xi[q] * xi[q] + s);
        const auto k = fft_inverse(S);
        for (int m = -(N - 1); m <= N - 1; ++m) K[m + N - 1] = k[(m + Np) % Np];
        return K;
    }

private:
    void apply_real_axis(const CVec& f, int c, FieldJet& out, int col) const {
        const int N = grid.nx;
        const cplx s = channel[c] - lambda;
        const int Np = detail::padded_length(N, grid.h(), s);
        std::vector<cplx> buf(Np, 0.0);
        for (int j = 0; j < N; ++j) buf[j] = f[j];
        const auto F = fft_forward(buf);
        const auto xi = dft_frequencies(Np, grid.h());
        std::vector<cplx> U(Np), Ux(Np), Uxx(Np);
        for (int q = 0; q < Np; ++q) {
            const cplx den = xi[q] * xi[q] + s;
            if (std::abs(den) < denominator_floor)
                throw Error(ErrorKind::DenominatorUnderflow, "real-axis symbol vanishes");
            U[q] = F[q] / den;
            Ux[q] = q == Np / 2 ? cplx(0.0) : I * xi[q] * U[q];
            Uxx[q] = -xi[q] * xi[q] * U[q];
        }
        const auto u = fft_inverse(U), ux = fft_inverse(Ux), uxx = fft_inverse(Uxx);
        for (int j = 0; j < N; ++j) {
            out.u(j, col) = u[j];
            out.ux(j, col) = ux[j];
            out.uxx(j, col) = uxx[j];
        }
    }

    void apply_contour(const CVec& f, int c, FieldJet& out, int col) const {
        const int Nc = int(contour->nodes.size());
        exponentials->ensure(grid, *contour);
        const CVec F = (grid.h() / two_pi) * (exponentials->minus.transpose() * f);
        CVec A(Nc), Ax(Nc), Axx(Nc);
        for (int q = 0; q < Nc; ++q) {
            const auto& nd = contour->nodes[q];
            const cplx den = nd.z * nd.z + channel[c] - lambda;
            if (std::abs(den) < denominator_floor)
                throw Error(ErrorKind::DenominatorUnderflow, "contour symbol vanishes");
            A[q] = nd.w * F[q] / den;
            Ax[q] = I * nd.z * A[q];
            Axx[q] = -nd.z * nd.z * A[q];
        }
        const CMat& E = exponentials->plus;
        out.u.col(col) = E * A;
        out.ux.col(col) = E * Ax;
        out.uxx.col(col) = E * Axx;
    }
};

namespace detail {

inline void check_neighborhood(const SpectralWindow& w, std::span<const cplx> k, cplx lambda) {
    if (int(k.size()) != int(w.k0.size()))
        throw Error(ErrorKind::OutsideWindow, "quasimomentum dimension does not match the window");
    // the dilated family k(tau) is admitted for any tau
    if (!w.in_neighborhood(k, lambda))
        throw Error(ErrorKind::OutsideWindow, "(k, lambda) lies outside the window neighbourhood");
}

inline ResolventOperator make_operator(ResolventKind kind, const CylinderGrid& grid, std::span<const cplx> k,
                                       cplx lambda, const SpectralWindow* w,
                                       std::shared_ptr<const Contour> contour, double a) {
    ResolventOperator R;
    R.kind = kind;
    R.k.assign(k.begin(), k.end());
    R.lambda = lambda;
    R.weight_a = a;
    R.window = w;
    R.contour = std::move(contour);
    R.grid = grid;
    R.channel = channel_energies(grid, k);
    const auto lat = grid.modes();
    const int nm = grid.mode_count();
    R.open.assign(nm, 0);
    R.active.assign(nm, 1);
    bool any_open = false;
    for (int c = 0; c < nm; ++c) {
        const bool op = kind != ResolventKind::Direct && w && w->is_open(lat.multi(c));
        R.open[c] = op;
        any_open = any_open || op;
        if (kind == ResolventKind::R1) R.active[c] = !op;
        if (kind == ResolventKind::R2) R.active[c] = op;
    }
    if (any_open && kind != ResolventKind::R1) {
        if (!R.contour) throw Error(ErrorKind::InvalidContour, "open channels need a contour");
        R.exponentials = std::make_shared<LazyExponentials>();
    }
    return R;
}

} // namespace detail

inline ResolventOperator make_R1(const SpectralWindow& w, std::span<const cplx> k, cplx lambda,
                                 const CylinderGrid& grid) {
    detail::check_neighborhood(w, k, lambda);
    return detail::make_operator(ResolventKind::R1, grid, k, lambda, &w, nullptr, 0.0);
}

inline ResolventOperator make_R2(const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                                 std::span<const cplx> k, cplx lambda, const CylinderGrid& grid, double a) {
    if (!(w.lambda0 > 0.0)) throw Error(ErrorKind::InvalidContour, "R2 needs lambda0 > 0");
    if (!(a > contour->eta * std::sqrt(double(grid.m))))
        throw Error(ErrorKind::WeightTooSmall, "weight must exceed eta sqrt(m)");
    detail::check_neighborhood(w, k, lambda);
    return detail::make_operator(ResolventKind::R2, grid, k, lambda, &w, std::move(contour), a);
}

/// R_A = R1 + R2; for lambda0 <= 0 no channel is open and R_A = R1 with a = 0.
inline ResolventOperator make_RA(const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                                 std::span<const cplx> k, cplx lambda, const CylinderGrid& grid) {
    detail::check_neighborhood(w, k, lambda);
    if (w.J.empty()) return detail::make_operator(ResolventKind::RA, grid, k, lambda, &w, nullptr, 0.0);
    if (!contour) throw Error(ErrorKind::InvalidContour, "open channels need a contour");
    const double a = default_weight(w, *contour);
    return detail::make_operator(ResolventKind::RA, grid, k, lambda, &w, std::move(contour), a);
}

inline ResolventOperator make_direct(std::span<const double> k, cplx lambda, const CylinderGrid& grid) {
    if (!(lambda.imag() > 1e-8))
        throw Error(ErrorKind::NotUpperHalfPlane, "direct resolvent needs Im lambda > 1e-8");
    const KVec kc = to_complex(k);
    return detail::make_operator(ResolventKind::Direct, grid, kc, lambda, nullptr, nullptr, 0.0);
}

inline WeightedField apply_R1(const SpectralWindow& w, std::span<const cplx> k, cplx lambda,
                              const WeightedField& f) {
    return make_R1(w, k, lambda, f.grid).apply(f);
}

inline WeightedField apply_R2(const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                              std::span<const cplx> k, cplx lambda, const WeightedField& f) {
    if (!(f.weight_a > contour->eta * std::sqrt(double(f.grid.m))))
        throw Error(ErrorKind::WeightTooSmall, "field weight must exceed eta sqrt(m)");
    return make_R2(w, std::move(contour), k, lambda, f.grid, f.weight_a).apply(f);
}

inline WeightedField apply_RA(const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                              std::span<const cplx> k, cplx lambda, const WeightedField& f) {
    return make_RA(w, std::move(contour), k, lambda, f.grid).apply(f);
}

inline WeightedField apply_direct_resolvent(std::span<const double> k, cplx lambda, const WeightedField& f) {
    return make_direct(k, lambda, f.grid).apply(f);
}

// ------------------------------------------------------------------ tau decay

struct TauNorm {
    double tau = 0.0;
    double norm = 0.0;     // L_{2,a} -> L_{2,-a} estimate
    double scaled = 0.0;   // norm * |tau|
};

/// Largest singular value of e^{-a<x>} K e^{-a<x>} by 20 power iterations on B* B.
inline double block_norm(const CylinderGrid& grid, const CVec& K, double a, int iterations = 20) {
    const int N = grid.nx;
    Eigen::VectorXd wt(N);
    for (int j = 0; j < N; ++j) wt[j] = std::exp(-a * bracket(grid.x(j)));
    CMat B(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) B(i, j) = wt[i] * K[i - j + N - 1] * wt[j];
    CVec v(N);
    for (int j = 0; j < N; ++j) v[j] = cplx(1.0 + 0.5 * std::sin(0.37 * j), 0.25 * std::cos(0.11 * j));
    v.normalize();
    double sigma = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const CVec Bv = B * v;
        sigma = Bv.norm();
        if (sigma == 0.0) return 0.0;
        v = B.adjoint() * Bv;
        v.normalize();
    }
    return (B * v).norm();
}

/// Grid on which the symbol of R_A(k(tau)) is resolved: its near-zero sits at
/// |zeta| ~ |tau|, so the Nyquist frequency must clear it.
inline CylinderGrid tau_resolving_grid(const CylinderGrid& grid, double tau, double lambda0) {
    CylinderGrid g = grid;
    const double need = 1.5 * std::abs(tau) + std::sqrt(std::max(lambda0, 0.0)) + 1.0;
    if (g.nyquist() < need) g.nx = 2 * int(std::ceil(g.L * need / pi));
    // only per-mode N x N blocks are formed, never the dense Nystrom matrix
    g.memory_budget = std::numeric_limits<std::size_t>::max();
    return g;
}

inline std::vector<TauNorm> tau_decay_norm(const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                                           cplx lambda, std::span<const double> taus,
                                           const CylinderGrid& grid) {
    std::vector<TauNorm> out;
    for (double tau : taus) {
        if (std::abs(tau) < 1.0) throw Error(ErrorKind::OutsideWindow, "tau must satisfy |tau| >= 1");
        const KVec k = dilated_momentum(w, tau);
        const CylinderGrid g = tau_resolving_grid(grid, tau, w.lambda0);
        auto c = contour;
        if (c && g.nx != grid.nx && c->Xi >= grid.nyquist() * (1.0 - 1e-12))
            c = std::make_shared<const Contour>(
                build_contour(c->lambda0, c->eta, g.nyquist(), c->panels, c->order, c->grading));
        const auto R = make_RA(w, c, k, lambda, g);
        double norm = 0.0;
        for (int m = 0; m < g.mode_count(); ++m)
            norm = std::max(norm, block_norm(g, R.kernel(m), R.weight_a));
        out.push_back({tau, norm, norm * std::abs(tau)});
    }
    return out;
}

} // namespace cylres
