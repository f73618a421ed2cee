// numerics.hpp: small numerical building blocks shared by all modules:
// Gauss–Legendre rules, FFT helpers, the Japanese bracket and number formatting.
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <charconv>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace cylres {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

/// <x> = sqrt(x^2 + 1)
inline double bracket(double x) noexcept { return std::sqrt(x * x + 1.0); }

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss–Legendre rule on [-1, 1] by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int n) {
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        rule.nodes[i] = -z;
        rule.nodes[n - 1 - i] = z;
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

/// Gauss–Legendre rule mapped to [a, b].
inline QuadratureRule gauss_legendre(int n, double a, double b) {
    auto rule = gauss_legendre(n);
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = mid + half * rule.nodes[i];
        rule.weights[i] *= half;
    }
    return rule;
}

/// Unnormalized forward DFT: X_j = sum_m x_m e^{-2 pi i j m / N}.
inline std::vector<cplx> fft_forward(const std::vector<cplx>& x) {
    if (x.size() <= 1) return x;
    Eigen::FFT<double> fft;
    std::vector<cplx> out;
    fft.fwd(out, x);
    return out;
}

/// Normalized inverse DFT: x_m = (1/N) sum_j X_j e^{2 pi i j m / N}.
inline std::vector<cplx> fft_inverse(const std::vector<cplx>& X) {
    if (X.size() <= 1) return X;
    Eigen::FFT<double> fft;
    std::vector<cplx> out;
    fft.inv(out, X);
    return out;
}

/// Signed DFT frequency index for position j of an N-point transform.
inline int signed_index(int j, int n) noexcept { return j < (n + 1) / 2 ? j : j - n; }

inline int next_pow2(long long n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Locale-independent shortest-round-trip-safe rendering with 17 significant digits.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

/// Angular frequencies xi_q = 2 pi q / (N h) of an N-point grid of spacing h,
/// in FFT order.
inline std::vector<double> dft_frequencies(int n, double h) {
    std::vector<double> xi(n);
    for (int q = 0; q < n; ++q) xi[q] = two_pi * signed_index(q, n) / (n * h);
    return xi;
}

/// Spectral x-derivative of order 1 or 2 of samples on a periodic grid of spacing h.
/// The Nyquist mode is dropped for odd orders so the first derivative stays skew-adjoint.
inline CVec spectral_derivative(const CVec& f, double h, int order) {
    const int n = int(f.size());
    std::vector<cplx> buf(f.data(), f.data() + n);
    auto F = fft_forward(buf);
    const auto xi = dft_frequencies(n, h);
    for (int q = 0; q < n; ++q) {
        if (order % 2 == 1 && q == n / 2 && n % 2 == 0) {
            F[q] = 0.0;
            continue;
        }
        F[q] *= std::pow(I * xi[q], order);
    }
    auto out = fft_inverse(F);
    return Eigen::Map<CVec>(out.data(), n);
}

/// Principal square root continued so that Im >= 0 (outgoing/decaying branch).
inline cplx sqrt_upper(cplx z) {
    cplx s = std::sqrt(z);
    if (s.imag() < 0.0) s = -s;
    return s;
}

} // namespace cylres
