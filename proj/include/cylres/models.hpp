// models.hpp: built-in coefficient families and their sampled, mode-space
// representation on a cylinder grid (g - 1, derivatives, V, the effective
// potential W(lambda) = W0 + lambda W1 and the conjugation factors g^{+-1/2}).
#pragma once

#include "cylres/error.hpp"
#include "cylres/geometry.hpp"
#include "cylres/numerics.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace cylres {

// ------------------------------------------------------------------ families

inline ModelCoefficients make_free() { return {}; }

/// V = -V0 exp(-x^2 / w^2), g = 1.
inline ModelCoefficients make_gaussian_well(double V0, double width) {
    ModelCoefficients c;
    c.family = "gaussian-well";
    c.V = [V0, width](double x, std::span<const double>) {
        return -V0 * std::exp(-x * x / (width * width));
    };
    c.potential_trivial = V0 == 0.0;
    return c;
}

/// g = 1 + A exp(-x^2 / w^2), V = 0.
inline ModelCoefficients make_metric_bump(double amplitude, double width) {
    if (!(amplitude > -1.0)) throw Error(ErrorKind::InvalidModel, "metric-bump amplitude must exceed -1");
    ModelCoefficients c;
    c.family = "metric-bump";
    c.g = [amplitude, width](double x, std::span<const double>) {
        return 1.0 + amplitude * std::exp(-x * x / (width * width));
    };
    c.c0 = std::min(1.0, 1.0 + amplitude);
    c.metric_trivial = amplitude == 0.0;
    return c;
}

/// V = -V0 on |x| < width / 2, zero outside; g = 1.
inline ModelCoefficients make_square_well(double V0, double width) {
    ModelCoefficients c;
    c.family = "square-well";
    const double half = 0.5 * width;
    c.V = [V0, half](double x, std::span<const double>) { return std::abs(x) < half ? -V0 : 0.0; };
    c.x_edges = {-half, half};
    c.potential_trivial = V0 == 0.0;
    return c;
}

/// V = -(V0 + V1 cos y_1) exp(-x^2 / w^2), g = 1; couples neighbouring y-modes.
inline ModelCoefficients make_cosine_lattice(double V0, double V1, double width) {
    ModelCoefficients c;
    c.family = "cosine-lattice-times-gaussian";
    c.V = [V0, V1, width](double x, std::span<const double> y) {
        return -(V0 + V1 * std::cos(y[0])) * std::exp(-x * x / (width * width));
    };
    c.y_independent = V1 == 0.0;
    c.potential_trivial = V0 == 0.0 && V1 == 0.0;
    return c;
}

/// Coefficients with the effective potential cut to |x| < rho.
inline ModelCoefficients truncate_potential(ModelCoefficients c, double rho) {
    if (!(rho >= 0.0)) throw Error(ErrorKind::InvalidModel, "truncation radius must be non-negative");
    c.truncation_radius = rho;
    return c;
}

// ---------------------------------------------------------- sampled form

/// Mode-space samples: column p of each matrix holds the y-Fourier coefficient
/// of index coeff_modes().multi(p) as a function of x, for |p_i| <= 2 N_y.
struct SampledCoefficients {
    CylinderGrid grid;
    ModeLattice lattice;
    bool y_independent = true;
    bool metric_trivial = true;
    bool potential_trivial = true;
    double decay_b = 0.0;
    double decay_C = 0.0;
    double c0 = 1.0;

    CMat g_minus1, gx, V, W0, W1;
    CMat sqrt_g_minus1;                  // g^{1/2} - 1
    CMat inv_sqrt_g_minus1, inv_sqrt_g_x, inv_sqrt_g_xx;   // g^{-1/2} - 1 and derivatives
    bool W_zero = true;

    int zero_mode() const noexcept { return lattice.size() / 2; }

    CMat W(cplx lambda) const { return W0 + lambda * W1; }
};

namespace detail {

/// Physical sample layout: row j = x node, column = flat y-sample index.
struct YGrid {
    int d = 1;
    int M = 1;
    int total() const { return d == 1 ? M : M * M; }
    std::vector<double> point(int idx) const {
        std::vector<double> y(d);
        for (int i = 0; i < d; ++i) {
            y[i] = two_pi * (idx % M) / M;
            idx /= M;
        }
        return y;
    }
};

/// FFT along y-dimension `dim` of every x-row; `inverse` normalizes by 1/M.
inline CMat fft_y(const CMat& P, const YGrid& yg, int dim, bool inverse) {
    CMat out = P;
    const int M = yg.M;
    const int stride = dim == 0 ? 1 : M;
    const int lines = yg.total() / M;
    std::vector<cplx> buf(M);
    for (int r = 0; r < P.rows(); ++r)
        for (int l = 0; l < lines; ++l) {
            const int base = dim == 0 ? l * M : l;
            for (int t = 0; t < M; ++t) buf[t] = P(r, base + t * stride);
            auto res = inverse ? fft_inverse(buf) : fft_forward(buf);
            for (int t = 0; t < M; ++t) out(r, base + t * stride) = res[t];
        }
    return out;
}

inline CMat y_derivative(const CMat& P, const YGrid& yg, int dim, int order) {
    if (yg.M == 1) return CMat::Zero(P.rows(), P.cols());
    CMat F = fft_y(P, yg, dim, false);
    const int M = yg.M, stride = dim == 0 ? 1 : M;
    for (int c = 0; c < yg.total(); ++c) {
        const int t = (c / stride) % M;
        const int p = signed_index(t, M);
        const cplx mult = (order % 2 == 1 && 2 * t == M) ? cplx(0.0) : std::pow(I * double(p), order);
        F.col(c) *= mult;
    }
    return fft_y(F, yg, dim, true);
}

inline CMat x_derivative(const CMat& P, double h, int order) {
    CMat out(P.rows(), P.cols());
    for (int c = 0; c < P.cols(); ++c) out.col(c) = spectral_derivative(P.col(c), h, order);
    return out;
}

/// Physical samples -> y-Fourier modes |p_i| <= radius.
inline CMat analyse(const CMat& P, const YGrid& yg, const ModeLattice& lat) {
    CMat F = P;
    for (int dim = 0; dim < yg.d; ++dim) F = fft_y(F, yg, dim, false);
    F /= double(yg.total());
    CMat out = CMat::Zero(P.rows(), lat.size());
    for (int idx = 0; idx < lat.size(); ++idx) {
        const auto p = lat.multi(idx);
        int col = 0, stride = 1;
        bool ok = true;
        for (int i = 0; i < yg.d; ++i) {
            if (yg.M == 1 && p[i] != 0) ok = false;
            col += ((p[i] % yg.M + yg.M) % yg.M) * stride;
            stride *= yg.M;
        }
        if (ok) out.col(idx) = F.col(col);
    }
    return out;
}

inline double sample_cell(const CoefficientFn& fn, const std::vector<double>& edges, double x,
                          double h, std::span<const double> y) {
    for (double e : edges)
        if (std::abs(e - x) < 0.5 * h) {
            constexpr int sub = 64;
            double s = 0.0;
            for (int q = 0; q < sub; ++q) s += fn(x - 0.5 * h + (q + 0.5) * h / sub, y);
            return s / sub;
        }
    return fn(x, y);
}

} // namespace detail

/// Samples the model on the grid, verifies the standing hypotheses (periodicity,
/// g >= c0 > 0, decay certificate, negligible values at the box edge) and builds
/// the mode-space representation.
inline SampledCoefficients sample_coefficients(const ModelCoefficients& model, const CylinderGrid& grid) {
    grid.validate();
    SampledCoefficients s;
    s.grid = grid;
    s.lattice = {grid.d, 2 * grid.ny};
    s.y_independent = model.y_independent;
    s.metric_trivial = model.metric_trivial;
    s.potential_trivial = model.potential_trivial;
    s.decay_b = model.decay_b;
    s.c0 = model.c0;
    if (!(model.c0 > 0.0)) throw Error(ErrorKind::InvalidModel, "c0 must be positive");
    if (!(model.decay_b > 0.0)) throw Error(ErrorKind::InvalidModel, "decay exponent b must be positive");

    detail::YGrid yg{grid.d, model.y_independent ? 1 : std::max(16, 8 * grid.ny + 8)};
    const int ny_samples = yg.total();
    const double h = grid.h();
    Eigen::MatrixXd g(grid.nx, ny_samples), V(grid.nx, ny_samples);
    for (int c = 0; c < ny_samples; ++c) {
        const auto y = yg.point(c);
        for (int j = 0; j < grid.nx; ++j) {
            const double x = grid.x(j);
            g(j, c) = detail::sample_cell(model.g, model.x_edges, x, h, y);
            V(j, c) = detail::sample_cell(model.V, model.x_edges, x, h, y);
        }
    }

    // hypotheses at sampled nodes
    for (int c = 0; c < ny_samples; ++c) {
        auto y = yg.point(c);
        for (int j = 0; j < grid.nx; j += std::max(1, grid.nx / 32)) {
            const double x = grid.x(j);
            for (int i = 0; i < grid.d; ++i) {
                auto ys = y;
                ys[i] += two_pi;
                if (std::abs(model.g(x, ys) - model.g(x, y)) > 1e-12 ||
                    std::abs(model.V(x, ys) - model.V(x, y)) > 1e-12)
                    throw Error(ErrorKind::InvalidModel, "coefficients are not 2pi-periodic in y");
            }
        }
        for (double xe : {-grid.L, grid.L})
            if (std::abs(model.g(xe, y) - 1.0) > 1e-10 || std::abs(model.V(xe, y)) > 1e-10)
                throw Error(ErrorKind::InvalidModel, "coefficients do not decay below 1e-10 at |x| = L");
    }
    if (g.minCoeff() < model.c0)
        throw Error(ErrorKind::InvalidModel, "g falls below its lower bound c0");

    const CMat gm1 = (g.array() - 1.0).matrix().cast<cplx>();
    const CMat gx = detail::x_derivative(gm1, h, 1);
    const CMat gxx = detail::x_derivative(gm1, h, 2);
    CMat lap = gxx;
    Eigen::ArrayXXd grad2 = gx.real().array().square();
    for (int i = 0; i < grid.d; ++i) {
        lap += detail::y_derivative(gm1, yg, i, 2);
        grad2 += detail::y_derivative(gm1, yg, i, 1).real().array().square();
    }
    const Eigen::ArrayXXd ga = g.array();
    const Eigen::ArrayXXd lapr = lap.real().array();
    Eigen::ArrayXXd W0 = (0.5 * lapr - grad2 / (4.0 * ga) + V.array()) / ga;
    Eigen::ArrayXXd W1 = (ga - 1.0) / ga;
    if (model.truncation_radius) {
        for (int j = 0; j < grid.nx; ++j)
            if (std::abs(grid.x(j)) >= *model.truncation_radius) {
                W0.row(j).setZero();
                W1.row(j).setZero();
            }
    }

    // decay certificate: C = max over nodes of e^{b<x>} max(|g-1|, |grad g|, |lap g|, |V|)
    s.decay_C = 0.0;
    for (int j = 0; j < grid.nx; ++j) {
        const double e = std::exp(model.decay_b * bracket(grid.x(j)));
        for (int c = 0; c < ny_samples; ++c) {
            const double m = std::max({std::abs(ga(j, c) - 1.0), std::sqrt(grad2(j, c)),
                                       std::abs(lapr(j, c)), std::abs(V(j, c))});
            s.decay_C = std::max(s.decay_C, m * e);
        }
    }
    if (!std::isfinite(s.decay_C))
        throw Error(ErrorKind::InvalidModel, "decay certificate is not finite on the grid");

    const Eigen::ArrayXXd gxr = gx.real().array(), gxxr = gxx.real().array();
    const Eigen::ArrayXXd isg = ga.rsqrt();
    const Eigen::ArrayXXd isg_x = -0.5 * isg / ga * gxr;
    const Eigen::ArrayXXd isg_xx = 0.75 * isg / (ga * ga) * gxr.square() - 0.5 * isg / ga * gxxr;

    auto modes = [&](const Eigen::ArrayXXd& a) {
        return detail::analyse(a.matrix().cast<cplx>(), yg, s.lattice);
    };
    s.g_minus1 = modes(ga - 1.0);
    s.gx = modes(gxr);
    s.V = modes(V.array());
    s.W0 = modes(W0);
    s.W1 = modes(W1);
    s.sqrt_g_minus1 = modes(ga.sqrt() - 1.0);
    s.inv_sqrt_g_minus1 = modes(isg - 1.0);
    s.inv_sqrt_g_x = modes(isg_x);
    s.inv_sqrt_g_xx = modes(isg_xx);
    s.W_zero = W0.abs().maxCoeff() == 0.0 && W1.abs().maxCoeff() == 0.0;
    if (model.y_independent) s.y_independent = true;
    return s;
}

/// (c * u)_n = sum_{n'} c_{n - n'} u_{n'}: pointwise product in y written in modes.
inline CMat mode_multiply(const CMat& coeff, const ModeLattice& clat, const CMat& u,
                          const ModeLattice& ulat, bool y_independent) {
    CMat out = CMat::Zero(u.rows(), u.cols());
    if (y_independent) {
        const CVec c0 = coeff.col(clat.size() / 2);
        for (int n = 0; n < u.cols(); ++n) out.col(n) = c0.cwiseProduct(u.col(n));
        return out;
    }
    std::vector<int> p(ulat.d);
    for (int n = 0; n < u.cols(); ++n) {
        const auto nn = ulat.multi(n);
        for (int np = 0; np < u.cols(); ++np) {
            const auto mm = ulat.multi(np);
            for (int i = 0; i < ulat.d; ++i) p[i] = nn[i] - mm[i];
            const int pi_ = clat.index(p);
            if (pi_ < 0) continue;
            out.col(n).array() += coeff.col(pi_).array() * u.col(np).array();
        }
    }
    return out;
}

inline CMat mode_multiply(const SampledCoefficients& s, const CMat& coeff, const CMat& u) {
    return mode_multiply(coeff, s.lattice, u, s.grid.modes(), s.y_independent);
}

} // namespace cylres
