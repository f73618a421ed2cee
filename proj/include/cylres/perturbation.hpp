// perturbation.hpp: effective potential W(lambda), the factorization of H(k)
// through A(k) + W(lambda), the Nystrom discretization of I + W R_A, its
// determinant h(k, lambda) and the perturbed resolvent R_H.
#pragma once

#include "cylres/error.hpp"
#include "cylres/free_resolvent.hpp"
#include "cylres/geometry.hpp"
#include "cylres/models.hpp"
#include "cylres/numerics.hpp"
#include "cylres/transforms.hpp"

#include <Eigen/LU>

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

namespace cylres {

struct EffectivePotential {
    cplx lambda = 0.0;
    CMat values;          // y-modes |p| <= 2 N_y, as SampledCoefficients::lattice
    double decay_b = 0.0;
};

inline EffectivePotential effective_potential(const SampledCoefficients& s, cplx lambda) {
    return {lambda, s.W(lambda), s.decay_b};
}

inline EffectivePotential effective_potential(const ModelCoefficients& model, cplx lambda,
                                              const CylinderGrid& grid) {
    return effective_potential(sample_coefficients(model, grid), lambda);
}

// ------------------------------------------------------------ factorization

namespace detail {

/// u + (phi - 1) u with phi given by its mode samples of phi - 1.
inline CMat multiply_shifted(const SampledCoefficients& s, const CMat& phi_minus1, const CMat& u) {
    return u + mode_multiply(s, phi_minus1, u);
}

/// g^{-1/2} applied to a jet by the product rule.
inline FieldJet multiply_inv_sqrt_g(const SampledCoefficients& s, const FieldJet& u) {
    if (s.metric_trivial) return u;
    FieldJet out;
    out.u = multiply_shifted(s, s.inv_sqrt_g_minus1, u.u);
    out.ux = multiply_shifted(s, s.inv_sqrt_g_minus1, u.ux) + mode_multiply(s, s.inv_sqrt_g_x, u.u);
    out.uxx = multiply_shifted(s, s.inv_sqrt_g_minus1, u.uxx) +
              2.0 * mode_multiply(s, s.inv_sqrt_g_x, u.ux) + mode_multiply(s, s.inv_sqrt_g_xx, u.u);
    return out;
}

} // namespace detail

/// ||(H - lambda) g^{-1/2} u - g^{1/2} (A + W(lambda) - lambda) u||_interior / ||u||.
inline double factorization_residual(const SampledCoefficients& s, std::span<const cplx> k, cplx lambda,
                                     const WeightedField& u) {
    const auto& grid = u.grid;
    WeightedField v{grid, detail::multiply_shifted(s, s.inv_sqrt_g_minus1, u.values), u.weight_a};
    const CMat lhs = apply_fiber_operator(s, k, v).values - lambda * v.values;
    const CMat inner_part = apply_free_operator(k, u).values + mode_multiply(s, s.W(lambda), u.values) -
                            lambda * u.values;
    const CMat rhs = detail::multiply_shifted(s, s.sqrt_g_minus1, inner_part);
    return weighted_norm(grid, lhs - rhs, 0.0, true) / weighted_norm(grid, u.values, 0.0);
}

// ------------------------------------------------------ Lippmann-Schwinger

/// Nystrom matrix of I + W(lambda) R_A(k, lambda) restricted to the x-nodes where W
/// is not negligible. Outside that set the operator acts as the identity, so the
/// restriction carries the full determinant and solves extend trivially.
struct LippmannSchwinger {
    CylinderGrid grid;
    double weight_a = 0.0;
    std::vector<int> nodes;           // x-node indices of the support set
    bool block_diagonal = true;       // W independent of y: one block per mode
    std::vector<CMat> blocks;         // per mode, or a single coupled block
    ResolventOperator resolvent;
    CMat W;                           // W(lambda) modes
    std::vector<Eigen::PartialPivLU<CMat>> lu;

    int support_size() const { return int(nodes.size()); }

    /// Matrix over (mode, support node) pairs, mode-major.
    CMat dense() const {
        const int S = support_size(), nm = grid.mode_count();
        if (!block_diagonal) return blocks.empty() ? CMat::Identity(0, 0) : blocks[0];
        CMat M = CMat::Zero(S * nm, S * nm);
        for (int c = 0; c < nm; ++c) M.block(c * S, c * S, S, S) = blocks[c];
        return M;
    }

    /// The same matrix in the discrete L_{2,a} inner product: D M D^{-1}, D = e^{a<x>}.
    CMat weighted_dense() const {
        CMat M = dense();
        const int S = support_size();
        for (int r = 0; r < M.rows(); ++r)
            for (int q = 0; q < M.cols(); ++q)
                M(r, q) *= std::exp(weight_a * (bracket(grid.x(nodes[r % S])) - bracket(grid.x(nodes[q % S]))));
        return M;
    }

    void factorize() {
        lu.clear();
        for (const auto& B : blocks) lu.emplace_back(B);
    }

    /// log det(I + W R) from the LU factors (branch irrelevant after exponentiation).
    cplx log_plain_determinant() const {
        cplx s = 0.0;
        for (const auto& f : lu) {
            s += std::log(cplx(double(f.permutationP().determinant())));
            const CVec diag = f.matrixLU().diagonal();
            for (int i = 0; i < diag.size(); ++i) s += std::log(diag[i]);
        }
        return s;
    }

    cplx trace_of_WR() const {
        cplx t = 0.0;
        for (const auto& B : blocks) t += B.trace() - double(B.rows());
        return t;
    }

    /// det(I + W R), the plain Nystrom determinant.
    cplx plain_determinant() const { return std::exp(log_plain_determinant()); }

    /// det(I + W R) exp(-tr W R): same zeros as the plain determinant, and stable as
    /// channels are added (the plain one changes by a factor ~ 1 + tr W R_n per channel).
    cplx determinant() const { return std::exp(log_plain_determinant() - trace_of_WR()); }

    /// Solves (I + W R_A) z = v for a full field v.
    CMat solve(const CMat& v) const {
        const int S = support_size(), nm = grid.mode_count();
        if (S == 0) return v;
        // z = v + s with s supported on the nodes: (I + W R)_SS s = -(W R v)_S
        const WeightedField vf{grid, v, weight_a};
        const CMat Rv = resolvent.apply(vf).values;
        CMat WRv = mode_multiply(W, coefficient_lattice(), Rv, grid.modes(), block_diagonal);
        CVec rhs(S * nm);
        for (int c = 0; c < nm; ++c)
            for (int i = 0; i < S; ++i) rhs[c * S + i] = -WRv(nodes[i], c);
        CVec sol(S * nm);
        if (block_diagonal) {
            for (int c = 0; c < nm; ++c) sol.segment(c * S, S) = lu[c].solve(rhs.segment(c * S, S));
        } else {
            sol = lu[0].solve(rhs);
        }
        CMat z = v;
        for (int c = 0; c < nm; ++c)
            for (int i = 0; i < S; ++i) z(nodes[i], c) += sol[c * S + i];
        return z;
    }

    ModeLattice coefficient_lattice() const { return {grid.d, 2 * grid.ny}; }
};

inline constexpr double support_tolerance = 1e-17;

/// Builds the Nystrom matrix for a prepared free resolvent. `trim` restricts to the
/// nodes where W exceeds support_tolerance times its maximum.
inline LippmannSchwinger assemble_lippmann_schwinger(const SampledCoefficients& s, const ResolventOperator& R,
                                                     cplx lambda, bool trim = true) {
    const auto& grid = s.grid;
    if (!(s.decay_b > 2.0 * R.weight_a))
        throw Error(ErrorKind::DecayTooSlow, "decay exponent b must exceed 2a");
    LippmannSchwinger ls;
    ls.grid = grid;
    ls.weight_a = R.weight_a;
    ls.resolvent = R;
    ls.W = s.W(lambda);
    ls.block_diagonal = s.y_independent;

    const double wmax = ls.W.cwiseAbs().maxCoeff();
    for (int j = 0; j < grid.nx; ++j) {
        const double row = ls.W.row(j).cwiseAbs().maxCoeff();
        if (!trim || (wmax > 0.0 && row > support_tolerance * wmax)) ls.nodes.push_back(j);
    }
    if (wmax == 0.0 && trim) ls.nodes.clear();
    const int S = ls.support_size(), nm = grid.mode_count(), N = grid.nx;

    std::vector<CVec> K(nm);
    const int span = S == 0 ? 1 : ls.nodes.back() - ls.nodes.front() + 1;
    for (int c = 0; c < nm; ++c) K[c] = R.kernel(c, span);
    const int zero = s.zero_mode();

    if (ls.block_diagonal) {
        for (int c = 0; c < nm; ++c) {
            CMat B = CMat::Identity(S, S);
            for (int i = 0; i < S; ++i) {
                const cplx wi = ls.W(ls.nodes[i], zero);
                if (wi == 0.0) continue;
                for (int j = 0; j < S; ++j) B(i, j) += wi * K[c][ls.nodes[i] - ls.nodes[j] + N - 1];
            }
            ls.blocks.push_back(std::move(B));
        }
    } else {
        const auto lat = grid.modes();
        CMat B = CMat::Identity(S * nm, S * nm);
        std::vector<int> p(grid.d);
        for (int c = 0; c < nm; ++c) {
            const auto n = lat.multi(c);
            for (int cp = 0; cp < nm; ++cp) {
                const auto np = lat.multi(cp);
                for (int i = 0; i < grid.d; ++i) p[i] = n[i] - np[i];
                const int pidx = s.lattice.index(p);
                if (pidx < 0) continue;
                for (int i = 0; i < S; ++i) {
                    const cplx wi = ls.W(ls.nodes[i], pidx);
                    if (wi == 0.0) continue;
                    for (int j = 0; j < S; ++j)
                        B(c * S + i, cp * S + j) += wi * K[cp][ls.nodes[i] - ls.nodes[j] + N - 1];
                }
            }
        }
        ls.blocks.push_back(std::move(B));
    }
    ls.factorize();
    return ls;
}

inline LippmannSchwinger assemble_lippmann_schwinger(const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                                                     const SampledCoefficients& s, std::span<const cplx> k,
                                                     cplx lambda, bool trim = true) {
    return assemble_lippmann_schwinger(s, make_RA(w, std::move(contour), k, lambda, s.grid), lambda, trim);
}

// ---------------------------------------------------------------- determinant

struct FredholmSample {
    KVec k;
    cplx lambda = 0.0;
    cplx h_value = 1.0;
    double refinement_gap = 0.0;   // |h_refined - h|; zero when not computed
    bool refined = false;

    bool certified_nonzero() const { return std::abs(h_value) > 10.0 * refinement_gap; }
};

/// Contour for the refined grid: a ray cut at the coarse Nyquist frequency moves to
/// the refined one, everything else is kept.
inline Contour refined_contour(const Contour& c, const CylinderGrid& coarse, const CylinderGrid& fine) {
    double Xi = c.Xi;
    if (Xi >= coarse.nyquist() * (1.0 - 1e-12)) Xi = std::max(fine.nyquist(), c.eta);
    return build_contour(c.lambda0, c.eta, Xi, c.panels, c.order, c.grading);
}

/// Evaluates h(k, lambda) on a grid and its one-step refinement; the sampled
/// coefficients and contours are prepared once and reused across (k, lambda).
class FredholmEvaluator {
public:
    FredholmEvaluator(const ModelCoefficients& model, const SpectralWindow& w,
                      std::shared_ptr<const Contour> contour, const CylinderGrid& grid)
        : window_(w), coarse_(sample_coefficients(model, grid)), contour_(std::move(contour)) {
        const CylinderGrid fine = grid.refined();
        fine_ = std::make_shared<const SampledCoefficients>(sample_coefficients(model, fine));
        if (contour_) fine_contour_ = std::make_shared<const Contour>(refined_contour(*contour_, grid, fine));
    }

    FredholmEvaluator(SampledCoefficients coarse, std::shared_ptr<const SampledCoefficients> fine,
                      const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                      std::shared_ptr<const Contour> fine_contour)
        : window_(w), coarse_(std::move(coarse)), fine_(std::move(fine)), contour_(std::move(contour)),
          fine_contour_(std::move(fine_contour)) {}

    cplx h(std::span<const cplx> k, cplx lambda) const {
        if (coarse_.W_zero) return 1.0;
        return assemble_lippmann_schwinger(window_, contour_, coarse_, k, lambda).determinant();
    }

    cplx h_refined(std::span<const cplx> k, cplx lambda) const {
        if (fine_->W_zero) return 1.0;
        return assemble_lippmann_schwinger(window_, fine_contour_, *fine_, k, lambda).determinant();
    }

    FredholmSample sample(std::span<const cplx> k, cplx lambda, bool refine = true) const {
        FredholmSample fs;
        fs.k.assign(k.begin(), k.end());
        fs.lambda = lambda;
        fs.h_value = h(k, lambda);
        if (refine) {
            fs.refinement_gap = std::abs(h_refined(k, lambda) - fs.h_value);
            fs.refined = true;
        }
        return fs;
    }

    const SampledCoefficients& coefficients() const { return coarse_; }
    const SpectralWindow& window() const { return window_; }
    std::shared_ptr<const Contour> contour() const { return contour_; }

private:
    SpectralWindow window_;
    SampledCoefficients coarse_;
    std::shared_ptr<const SampledCoefficients> fine_;
    std::shared_ptr<const Contour> contour_, fine_contour_;
};

inline FredholmSample fredholm_h(const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                                 const ModelCoefficients& model, const CylinderGrid& grid,
                                 std::span<const cplx> k, cplx lambda) {
    return FredholmEvaluator(model, w, std::move(contour), grid).sample(k, lambda);
}

// ----------------------------------------------------------- perturbed resolvent

/// g^{-1/2} R (I + W R)^{-1} g^{-1/2} f for a prepared Nystrom system, as a jet.
inline FieldJet apply_conjugated(const SampledCoefficients& s, const LippmannSchwinger& ls, const WeightedField& f) {
    const CMat f1 = s.metric_trivial ? f.values : detail::multiply_shifted(s, s.inv_sqrt_g_minus1, f.values);
    const CMat z = ls.solve(f1);
    const FieldJet u = ls.resolvent.apply_jet({f.grid, z, ls.weight_a});
    return detail::multiply_inv_sqrt_g(s, u);
}

/// R_H(k, lambda) f as a jet; NearSingular unless |h| > 10 refinement_gap.
inline FieldJet apply_RH_jet(const FredholmEvaluator& ev, std::span<const cplx> k, cplx lambda,
                             const WeightedField& f) {
    const auto& s = ev.coefficients();
    const auto sample = ev.sample(k, lambda, true);
    if (!sample.certified_nonzero())
        throw Error(ErrorKind::NearSingular, "h(k, lambda) is not certified nonzero");
    const auto ls = assemble_lippmann_schwinger(ev.window(), ev.contour(), s, k, lambda);
    return apply_conjugated(s, ls, f);
}

inline WeightedField apply_RH(const FredholmEvaluator& ev, std::span<const cplx> k, cplx lambda,
                              const WeightedField& f) {
    const auto ls_weight = ev.window().J.empty() || !ev.contour() ? 0.0 : default_weight(ev.window(), *ev.contour());
    return {f.grid, apply_RH_jet(ev, k, lambda, f).u, -ls_weight};
}

inline WeightedField apply_RH(const SpectralWindow& w, std::shared_ptr<const Contour> contour,
                              const ModelCoefficients& model, const CylinderGrid& grid,
                              std::span<const cplx> k, cplx lambda, const WeightedField& f) {
    return apply_RH(FredholmEvaluator(model, w, std::move(contour), grid), k, lambda, f);
}

/// (H(k) - lambda)^{-1} f for Im lambda > 0 through the same factorization with the
/// real-axis free resolvent over every mode; independent of the contour.
inline FieldJet solve_direct_jet(const SampledCoefficients& s, std::span<const double> k, cplx lambda,
                                 const WeightedField& f) {
    const auto R = make_direct(k, lambda, s.grid);
    const auto ls = assemble_lippmann_schwinger(s, R, lambda);
    return apply_conjugated(s, ls, f);
}

inline WeightedField solve_direct(const SampledCoefficients& s, std::span<const double> k, cplx lambda,
                                  const WeightedField& f) {
    return {f.grid, solve_direct_jet(s, k, lambda, f).u, 0.0};
}

} // namespace cylres
