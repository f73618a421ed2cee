// transforms.hpp: Fourier analysis on the cylinder (continuous transform in x,
// Fourier series in y), evaluation at complex frequencies on the contour, the
// Floquet–Gelfand lattice sum and the fiber operators H(k), A(k).
#pragma once

#include "cylres/error.hpp"
#include "cylres/geometry.hpp"
#include "cylres/models.hpp"
#include "cylres/numerics.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

namespace cylres {

enum class FrequencyKind { RealAxis, Contour };

/// (Ff)(zeta, n) = (2 pi)^{-m-d} int e^{-i zeta x - i n y} f dx dy, row = zeta node,
/// column = y-mode.
struct CylinderSpectrum {
    CylinderGrid grid;
    FrequencyKind kind = FrequencyKind::RealAxis;
    std::vector<cplx> zeta;
    CMat coeffs;
    std::shared_ptr<const Contour> contour;   // set for FrequencyKind::Contour
};

/// Real-axis frequencies pi q / L, q = -N/2 .. N/2 - 1, ascending.
inline std::vector<double> real_frequencies(const CylinderGrid& grid) {
    std::vector<double> xi(grid.nx);
    for (int q = 0; q < grid.nx; ++q) xi[q] = pi * (q - grid.nx / 2) / grid.L;
    return xi;
}

inline CylinderSpectrum cylinder_fourier(const WeightedField& f) {
    const auto& grid = f.grid;
    const int N = grid.nx;
    const double h = grid.h();
    CylinderSpectrum s;
    s.grid = grid;
    s.kind = FrequencyKind::RealAxis;
    const auto xi = real_frequencies(grid);
    s.zeta.assign(xi.begin(), xi.end());
    s.coeffs.resize(N, grid.mode_count());
    std::vector<cplx> buf(N);
    for (int c = 0; c < grid.mode_count(); ++c) {
        for (int j = 0; j < N; ++j) buf[j] = f.values(j, c);
        const auto F = fft_forward(buf);
        for (int q = 0; q < N; ++q) {
            // FFT slot of frequency index q - N/2; x_0 = -L contributes e^{i xi L}
            const int slot = (q - N / 2 + N) % N;
            s.coeffs(q, c) = h / two_pi * std::exp(I * xi[q] * grid.L) * F[slot];
        }
    }
    return s;
}

inline WeightedField inverse_cylinder_fourier(const CylinderSpectrum& s, double weight_a = 0.0) {
    if (s.kind != FrequencyKind::RealAxis)
        throw Error(ErrorKind::InvalidGrid, "inverse transform needs real-axis frequencies");
    const auto& grid = s.grid;
    const int N = grid.nx;
    const double dxi = pi / grid.L;
    WeightedField f = WeightedField::zeros(grid, weight_a);
    std::vector<cplx> buf(N);
    for (int c = 0; c < grid.mode_count(); ++c) {
        for (int q = 0; q < N; ++q) {
            const int slot = (q - N / 2 + N) % N;
            buf[slot] = s.coeffs(q, c) * std::exp(-I * s.zeta[q].real() * grid.L);
        }
        const auto out = fft_inverse(buf);   // carries 1/N
        for (int j = 0; j < N; ++j) f.values(j, c) = out[j] * double(N) * dxi;
    }
    return f;
}

/// Direct quadrature of e^{-i zeta x} f at every contour node; needs a > eta sqrt(m)
/// so that the continuation integral converges.
inline CylinderSpectrum contour_fourier(const WeightedField& f, std::shared_ptr<const Contour> contour) {
    const auto& grid = f.grid;
    if (!(f.weight_a > contour->eta * std::sqrt(double(grid.m))))
        throw Error(ErrorKind::WeightTooSmall, "field weight must exceed eta sqrt(m)");
    CylinderSpectrum s;
    s.grid = grid;
    s.kind = FrequencyKind::Contour;
    s.contour = contour;
    const int Nc = int(contour->nodes.size());
    CMat E(Nc, grid.nx);
    for (int c = 0; c < Nc; ++c) {
        s.zeta.push_back(contour->nodes[c].z);
        for (int j = 0; j < grid.nx; ++j)
            E(c, j) = grid.h() / two_pi * std::exp(-I * contour->nodes[c].z * grid.x(j));
    }
    s.coeffs = E * f.values;
    return s;
}

using SpaceFn = std::function<cplx(double x, std::span<const double> y)>;

/// (Uf)(k, x, y) = sum_l e^{i <k, y + 2 pi l>} f(x, y + 2 pi l), lattice sum truncated
/// to |l_i| <= periods, returned in y-modes |n_i| <= N_y.
inline WeightedField floquet_gelfand(const SpaceFn& f, std::span<const double> k,
                                     const CylinderGrid& grid, int periods = 5) {
    grid.validate();
    if (periods < 3) throw Error(ErrorKind::InvalidGrid, "lattice sum needs at least 3 periods");
    const int M = std::max(16, 4 * grid.ny + 4);
    detail::YGrid yg{grid.d, M};
    const ModeLattice cells{grid.d, periods};
    CMat P(grid.nx, yg.total());
    for (int c = 0; c < yg.total(); ++c) {
        const auto y = yg.point(c);
        for (int j = 0; j < grid.nx; ++j) {
            cplx s = 0.0;
            for (int l = 0; l < cells.size(); ++l) {
                const auto ll = cells.multi(l);
                std::vector<double> ys(y);
                double phase = 0.0;
                for (int i = 0; i < grid.d; ++i) {
                    ys[i] += two_pi * ll[i];
                    phase += k[i] * ys[i];
                }
                s += std::exp(I * phase) * f(grid.x(j), ys);
            }
            P(j, c) = s;
        }
    }
    return {grid, detail::analyse(P, yg, grid.modes()), 0.0};
}

/// (k + n)^2 for every mode of the grid.
inline std::vector<cplx> channel_energies(const CylinderGrid& grid, std::span<const cplx> k) {
    const auto lat = grid.modes();
    std::vector<cplx> c(lat.size());
    for (int idx = 0; idx < lat.size(); ++idx) c[idx] = shifted_square(k, lat.multi(idx));
    return c;
}

/// Spectral first and second x-derivatives of a field decaying at the box edge.
inline FieldJet field_jet(const WeightedField& f) {
    FieldJet j{f.values, CMat(f.values.rows(), f.values.cols()), CMat(f.values.rows(), f.values.cols())};
    for (int c = 0; c < f.values.cols(); ++c) {
        j.ux.col(c) = spectral_derivative(f.values.col(c), f.grid.h(), 1);
        j.uxx.col(c) = spectral_derivative(f.values.col(c), f.grid.h(), 2);
    }
    return j;
}

namespace detail {

/// sum_i (i d_{y_i} - k_i) c (i d_{y_i} - k_i) u in modes; (i d_y - k) acts as -(n + k).
inline CMat y_part(const SampledCoefficients& s, const CMat& coeff, std::span<const cplx> k, const CMat& u) {
    const auto lat = s.grid.modes();
    CMat out = CMat::Zero(u.rows(), u.cols());
    for (int i = 0; i < s.grid.d; ++i) {
        CMat v = u;
        for (int c = 0; c < u.cols(); ++c) v.col(c) *= -(double(lat.multi(c)[i]) + k[i]);
        CMat w = mode_multiply(s, coeff, v);
        for (int c = 0; c < u.cols(); ++c) out.col(c) += -(double(lat.multi(c)[i]) + k[i]) * w.col(c);
    }
    return out;
}

} // namespace detail

/// H(k) u on a field that decays at the box edge: free part by its Fourier symbol
/// xi^2 + (k + n)^2, metric part as -D (g - 1) D with the skew-adjoint spectral D.
inline WeightedField apply_fiber_operator(const SampledCoefficients& s, std::span<const cplx> k,
                                          const WeightedField& u) {
    const auto& grid = u.grid;
    const double h = grid.h();
    const auto cn = channel_energies(grid, k);
    WeightedField out = WeightedField::zeros(grid, u.weight_a);
    for (int c = 0; c < grid.mode_count(); ++c)
        out.values.col(c) = -spectral_derivative(u.values.col(c), h, 2) + cn[c] * u.values.col(c);
    if (!s.metric_trivial) {
        CMat du(u.values.rows(), u.values.cols());
        for (int c = 0; c < grid.mode_count(); ++c) du.col(c) = spectral_derivative(u.values.col(c), h, 1);
        const CMat gdu = mode_multiply(s, s.g_minus1, du);
        for (int c = 0; c < grid.mode_count(); ++c)
            out.values.col(c) -= spectral_derivative(gdu.col(c), h, 1);
        out.values += detail::y_part(s, s.g_minus1, k, u.values);
    }
    if (!s.potential_trivial) out.values += mode_multiply(s, s.V, u.values);
    return out;
}

/// A(k) u, the free fiber operator (g = 1, V = 0).
inline WeightedField apply_free_operator(std::span<const cplx> k, const WeightedField& u) {
    const double h = u.grid.h();
    const auto cn = channel_energies(u.grid, k);
    WeightedField out = WeightedField::zeros(u.grid, u.weight_a);
    for (int c = 0; c < u.grid.mode_count(); ++c)
        out.values.col(c) = -spectral_derivative(u.values.col(c), h, 2) + cn[c] * u.values.col(c);
    return out;
}

/// H(k) u from supplied x-derivatives: -g u_xx - g_x u_x + y-part + V u. Used for
/// resolvent outputs that need not decay at the box edge.
inline CMat apply_fiber_operator(const SampledCoefficients& s, std::span<const cplx> k, const FieldJet& u) {
    const auto cn = channel_energies(s.grid, k);
    CMat out(u.u.rows(), u.u.cols());
    for (int c = 0; c < u.u.cols(); ++c) out.col(c) = -u.uxx.col(c) + cn[c] * u.u.col(c);
    if (!s.metric_trivial) {
        out -= mode_multiply(s, s.g_minus1, u.uxx);
        out -= mode_multiply(s, s.gx, u.ux);
        out += detail::y_part(s, s.g_minus1, k, u.u);
    }
    if (!s.potential_trivial) out += mode_multiply(s, s.V, u.u);
    return out;
}

inline CMat apply_free_operator(const CylinderGrid& grid, std::span<const cplx> k, const FieldJet& u) {
    const auto cn = channel_energies(grid, k);
    CMat out(u.u.rows(), u.u.cols());
    for (int c = 0; c < u.u.cols(); ++c) out.col(c) = -u.uxx.col(c) + cn[c] * u.u.col(c);
    return out;
}

} // namespace cylres
