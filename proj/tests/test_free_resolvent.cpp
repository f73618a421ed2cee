#include "cylres/free_resolvent.hpp"
#include "oracles/oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>

using namespace cylres;
using Catch::Matchers::WithinRel;

namespace {

CylinderGrid grid(double L = 12.0, int nx = 256, int ny = 8) {
    CylinderGrid g;
    g.L = L;
    g.nx = nx;
    g.ny = ny;
    return g;
}

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no cylres::Error thrown");
    return ErrorKind::ConfigError;
}

/// Random Gaussians per mode, narrow and centred enough to decay against e^{a<x>}.
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

/// (h / 2 pi) int e^{i zeta x} / (zeta^2 + s) d zeta from -Xi to Xi along the
/// path -Xi -> -Xi + i -> i -> -i -> Xi - i -> Xi, which passes above -kappa
/// and below +kappa for an open channel with |Im kappa| < 1.
oracle::cplx open_kernel_oracle(double h, double Xi, oracle::cplx s, double x) {
    const oracle::cplx pts[6] = {{-Xi, 0}, {-Xi, 1}, {0, 1}, {0, -1}, {Xi, -1}, {Xi, 0}};
    oracle::cplx total = 0.0;
    for (int p = 0; p < 5; ++p) {
        const auto a = pts[p], b = pts[p + 1];
        total += oracle::integrate(
            [&](double t) {
                const auto z = a + t * (b - a);
                return std::exp(oracle::cplx(0, 1) * z * x) / (z * z + s) * (b - a);
            },
            0.0, 1.0, 1e-13);
    }
    return h / (2.0 * oracle::pi) * total;
}

} // namespace

TEST_CASE("closed-channel kernel is the band-limited Green function", "[free_resolvent]") {
    const auto g = grid(8.0, 128, 2);
    const auto w = build_window({0.2}, 2.0, g);
    const KVec k{0.2};
    const cplx lambda(2.0 + 0.3 * w.delta, 0.05);
    const auto R = make_R1(w, k, lambda, g);
    const auto lat = g.modes();
    for (int c = 0; c < g.mode_count(); ++c) {
        const int n = lat.multi(c)[0];
        const cplx s = (0.2 + n) * (0.2 + n) - lambda;
        const auto K = R.kernel(c);
        if (w.is_open(std::vector<int>{n})) {
            CHECK(K.cwiseAbs().maxCoeff() == 0.0);
            continue;
        }
        // on-diagonal value: h atan(Xi / sqrt s) / (pi sqrt s)
        CHECK(std::abs(K[g.nx - 1] - g.h() * oracle::truncated_green_at_zero(std::sqrt(s), g.nyquist())) <
              1e-6 * std::abs(K[g.nx - 1]));
        for (int m : {1, 7, 30}) {
            const auto ref = oracle::integrate(
                [&](double xi) { return std::exp(oracle::cplx(0, xi * m * g.h())) / (xi * xi + s); }, -g.nyquist(),
                g.nyquist(), 1e-14);
            const cplx exact = g.h() / two_pi * ref;
            // the padded frequency grid is a Riemann sum of the band-limited integral
            CHECK(std::abs(K[g.nx - 1 + m] - exact) < 1e-6 * std::abs(K[g.nx - 1]));
            CHECK(std::abs(K[g.nx - 1 - m] - exact) < 1e-6 * std::abs(K[g.nx - 1]));
        }
    }
}

TEST_CASE("open-channel kernel continues below the real axis", "[free_resolvent]") {
    const auto g = grid(8.0, 128, 2);
    const auto w = build_window({0.2}, 2.0, g);
    const auto contour = std::make_shared<const Contour>(auto_contour(w, g));
    const KVec k{0.2};
    const auto lat = g.modes();
    for (double im : {0.05, 0.0, -0.5 * w.delta}) {
        const cplx lambda(2.0 + 0.3 * w.delta, im);
        const auto R = make_RA(w, contour, k, lambda, g);
        for (int c = 0; c < g.mode_count(); ++c) {
            const int n = lat.multi(c)[0];
            if (!w.is_open(std::vector<int>{n})) continue;
            const cplx s = (0.2 + n) * (0.2 + n) - lambda;
            const auto K = R.kernel(c);
            for (int m : {0, 3, 20, 60}) {
                const cplx exact = open_kernel_oracle(g.h(), contour->Xi, s, m * g.h());
                CHECK(std::abs(K[g.nx - 1 + m] - exact) < 1e-9 * std::abs(K[g.nx - 1]));
            }
        }
    }
}

TEST_CASE("R_A agrees with the direct resolvent above the axis", "[free_resolvent]") {
    const auto g = grid();
    std::mt19937 rng(7);
    const KVec k{0.2};
    const RVec kr{0.2};
    for (double lambda0 : {-1.0, 2.0, 6.0}) {
        const auto w = build_window({0.2}, lambda0, g);
        const auto contour = std::make_shared<const Contour>(auto_contour(w, g));
        for (double im : {0.1, 0.5}) {
            const cplx lambda(lambda0 + 0.3 * w.delta, im);
            const auto RA = make_RA(w, contour, k, lambda, g);
            const auto f = random_field(g, RA.weight_a, rng);
            const auto u = RA.apply(f);
            const auto v = apply_direct_resolvent(kr, lambda, f);
            const double err = weighted_norm(g, u.values - v.values, -RA.weight_a) / weighted_norm(g, f.values, 0.0);
            CHECK(err < 1e-6);
            CHECK(u.weight_a == -RA.weight_a);
        }
    }
}

TEST_CASE("R_A inverts A - lambda on and below the real axis", "[free_resolvent]") {
    const auto g = grid();
    std::mt19937 rng(11);
    const KVec k{0.2};
    for (double lambda0 : {-1.0, 2.0, 6.0}) {
        const auto w = build_window({0.2}, lambda0, g);
        const auto contour = std::make_shared<const Contour>(auto_contour(w, g));
        for (double im : {0.0, -0.5 * w.delta})
            for (double re : {-0.8, 0.0, 0.8}) {
                const cplx lambda(lambda0 + re * w.delta, im);
                const auto RA = make_RA(w, contour, k, lambda, g);
                const auto f = random_field(g, RA.weight_a, rng);
                const auto u = RA.apply_jet(f);
                const CMat r = apply_free_operator(g, k, u) - lambda * u.u - f.values;
                CHECK(weighted_norm(g, r, -RA.weight_a, true) / weighted_norm(g, f.values, 0.0) < 1e-5);
            }
    }
}

TEST_CASE("R_A splits into its closed and open parts", "[free_resolvent]") {
    const auto g = grid(8.0, 128, 3);
    const auto w = build_window({0.2}, 2.0, g);
    const auto contour = std::make_shared<const Contour>(auto_contour(w, g));
    const KVec k{0.2};
    const cplx lambda(2.0, -0.2 * w.delta);
    const double a = default_weight(w, *contour);
    std::mt19937 rng(3);
    const auto f = random_field(g, a, rng);
    const CMat sum = apply_R1(w, k, lambda, f).values + apply_R2(w, contour, k, lambda, f).values;
    const CMat whole = apply_RA(w, contour, k, lambda, f).values;
    CHECK((sum - whole).cwiseAbs().maxCoeff() < 1e-12 * whole.cwiseAbs().maxCoeff());
}

TEST_CASE("free resolvent error kinds", "[free_resolvent]") {
    const auto g = grid(8.0, 64, 2);
    const auto w = build_window({0.2}, 2.0, g);
    const auto wneg = build_window({0.2}, -1.0, g);
    const auto contour = std::make_shared<const Contour>(auto_contour(w, g));
    const KVec k{0.2};
    const RVec kr{0.2};
    CHECK(kind_of([&] { make_direct(kr, cplx(2.0, 0.0), g); }) == ErrorKind::NotUpperHalfPlane);
    CHECK(kind_of([&] { make_RA(w, contour, k, cplx(2.0 + 3.0 * w.delta, 0.0), g); }) == ErrorKind::OutsideWindow);
    CHECK(kind_of([&] { make_RA(w, contour, KVec{0.2, 0.1}, cplx(2.0, 0.0), g); }) == ErrorKind::OutsideWindow);
    CHECK(kind_of([&] { make_RA(w, nullptr, k, cplx(2.0, 0.0), g); }) == ErrorKind::InvalidContour);
    CHECK(kind_of([&] { make_R2(wneg, contour, k, cplx(-1.0, 0.0), g, 10.0); }) == ErrorKind::InvalidContour);
    CHECK(kind_of([&] { make_R2(w, contour, k, cplx(2.0, 0.0), g, 0.5 * contour->eta); }) ==
          ErrorKind::WeightTooSmall);
    const auto f = WeightedField::zeros(g, 0.5 * contour->eta);
    CHECK(kind_of([&] { apply_R2(w, contour, k, cplx(2.0, 0.0), f); }) == ErrorKind::WeightTooSmall);
    CHECK(kind_of([&] { tau_decay_norm(w, contour, 2.0, std::vector<double>{0.5}, g); }) ==
          ErrorKind::OutsideWindow);
    // no channel open: R_A needs no contour and carries no weight
    const auto R = make_RA(wneg, nullptr, k, cplx(-1.0, 0.0), g);
    CHECK(R.weight_a == 0.0);
}

TEST_CASE("dilated family decays like 1 / tau", "[free_resolvent]") {
    const auto g = grid(8.0, 128, 4);
    const auto w = build_window({0.2}, 2.0, g);
    const auto contour = std::make_shared<const Contour>(auto_contour(w, g));
    const std::vector<double> taus{5, 10, 20, 40};
    const auto r = tau_decay_norm(w, contour, cplx(2.0, 0.0), taus, g);
    REQUIRE(r.size() == taus.size());
    double lo = 1e300, hi = 0.0;
    for (const auto& t : r) {
        CHECK(t.norm > 0.0);
        CHECK_THAT(t.scaled, WithinRel(t.norm * t.tau, 1e-15));
        lo = std::min(lo, t.scaled);
        hi = std::max(hi, t.scaled);
    }
    CHECK(hi / lo < 4.0);
}
