#pragma once

#include <optional>

#include "riemlab/ops/operators.hpp"
#include "riemlab/util/random_fields.hpp"

namespace riemlab {

/// Residual of the divergence gauge coupling delta h + 1/2 d(tr_g h).
/// Vanishes exactly on Chen-Nagano harmonic tensors.
inline TensorField cn_residual(const ManifoldContext& ctx, const TensorField& h) {
    TensorField dh = divergence(ctx, h);
    TensorField du = exterior_d_scalar(ctx, trace(ctx, h));
    return linear_combination(1.0, dh, 0.5, du);
}

/// Residual of the trace-free coupling delta h0 + (n-2)/(2n) d(tr_g h).
/// Identical to cn_residual as a 1-form for every h; the identity is pure
/// algebra once delta(u g) = -du holds.
inline TensorField coupling_residual(const ManifoldContext& ctx, const TensorField& h) {
    auto [h0, u] = trace_split(ctx, h);
    TensorField dh0 = divergence(ctx, h0);
    TensorField du = exterior_d_scalar(ctx, u);
    const double coeff = double(ctx.dim() - 2) / (2.0 * ctx.dim());
    return linear_combination(1.0, dh0, coeff, du);
}

enum class GaugeClass { TT, CN_strict, neither };

inline const char* to_string(GaugeClass c) {
    switch (c) {
        case GaugeClass::TT: return "TT";
        case GaugeClass::CN_strict: return "CN_strict";
        case GaugeClass::neither: return "neither";
    }
    return "?";
}

struct GaugeReport {
    double cn_residual_sup = 0.0;
    double cn_residual_l2 = 0.0;            // torus only
    double tt_divergence_sup = 0.0;
    double tt_trace_sup = 0.0;
    double coupling_residual_sup = 0.0;
    double field_sup = 0.0;                 // sup |h|_g, normalization scale
    double mean_trace = 0.0;                // torus only
    bool global_norms_available = false;
    std::optional<GaugeClass> classification;  // unset on open charts
    double tolerance_used = 0.0;
};

inline double default_gauge_tolerance(const ManifoldContext& ctx) {
    return ctx.spec().backend == DerivativeBackend::spectral
               ? 1e-8
               : 10.0 * ctx.differentiation_tolerance();
}

/// Volume average of tr_g h (torus only).
inline double mean_trace(const ManifoldContext& ctx, const TensorField& h) {
    TensorField u = trace(ctx, h);
    const double integral = parallel_sum(static_cast<std::size_t>(ctx.samples()), [&](std::size_t s) {
        return ctx.weight(static_cast<std::int64_t>(s)) * u.at(static_cast<std::int64_t>(s), 0);
    });
    return integral / ctx.volume();
}

/// Gauge residual report. Classification is relative (residual / |h|) and
/// only computed on the torus, where global norms exist; open charts get the
/// pointwise residual sups with classification left unset.
inline GaugeReport classify(const ManifoldContext& ctx, const TensorField& h, double tol = -1.0) {
    if (tol < 0) tol = default_gauge_tolerance(ctx);
    if (tol <= 0) throw std::invalid_argument("classification tolerance must be positive");
    GaugeReport rep;
    rep.tolerance_used = tol;
    TensorField cn = cn_residual(ctx, h);
    TensorField coup = coupling_residual(ctx, h);
    TensorField div = divergence(ctx, h);
    TensorField u = trace(ctx, h);
    rep.cn_residual_sup = sup_norm(ctx, cn);
    rep.coupling_residual_sup = sup_norm(ctx, coup);
    rep.tt_divergence_sup = sup_norm(ctx, div);
    rep.tt_trace_sup = sup_norm(ctx, u, cn.margin - u.margin);
    rep.field_sup = sup_norm(ctx, h, cn.margin - h.margin);
    if (!ctx.has_global_integrals()) return rep;

    rep.global_norms_available = true;
    rep.cn_residual_l2 = l2_norm(ctx, cn);
    rep.mean_trace = mean_trace(ctx, h);
    const double scale = std::max(rep.field_sup, 1e-300);
    const bool is_cn = rep.cn_residual_sup <= tol * scale;
    const bool is_tt = is_cn && rep.tt_divergence_sup <= tol * scale &&
                       rep.tt_trace_sup <= tol * scale;
    rep.classification = is_tt ? GaugeClass::TT
                               : (is_cn ? GaugeClass::CN_strict : GaugeClass::neither);
    return rep;
}

namespace detail {

/// Minimal-Frobenius-norm solution of A x = b over packed symmetric
/// components, where the Frobenius norm doubles off-diagonal weights.
inline Eigen::VectorXcd weighted_min_norm(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& b,
                                          const Eigen::VectorXd& w) {
    Eigen::MatrixXcd Aw = A;
    for (int c = 0; c < A.cols(); ++c) Aw.col(c) /= std::sqrt(w[c]);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(Aw);
    Eigen::VectorXcd z = cod.solve(b);
    Eigen::VectorXcd x = z;
    for (int c = 0; c < A.cols(); ++c) x[c] /= std::sqrt(w[c]);
    return x;
}

/// Orthogonal (Frobenius) projection of packed x onto the kernel of A.
inline Eigen::VectorXcd weighted_kernel_projection(const Eigen::MatrixXcd& A,
                                                   const Eigen::VectorXcd& x,
                                                   const Eigen::VectorXd& w) {
    Eigen::VectorXcd z = x;
    for (int c = 0; c < x.size(); ++c) z[c] *= std::sqrt(w[c]);
    Eigen::MatrixXcd Aw = A;
    for (int c = 0; c < A.cols(); ++c) Aw.col(c) /= std::sqrt(w[c]);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(Aw);
    z -= cod.pseudoInverse() * (Aw * z);
    Eigen::VectorXcd out = z;
    for (int c = 0; c < x.size(); ++c) out[c] /= std::sqrt(w[c]);
    return out;
}

/// Per-mode constraint rows for divergence-free (n rows) and trace-free
/// (1 row) conditions on packed lower-index components.
inline void mode_constraints(const Eigen::MatrixXd& Ginv, const Eigen::VectorXd& kvec, int n,
                             Eigen::MatrixXcd& A) {
    const int ns = n * (n + 1) / 2;
    A.setZero(n + 1, ns);
    Eigen::VectorXd q = Ginv * kvec;  // (G^{-1} k)^m
    for (int j = 0; j < n; ++j)
        for (int m = 0; m < n; ++m) A(j, sym_index(m, j, n)) += q[m];
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            A(n, sym_index(i, j, n)) += (i == j ? 1.0 : 2.0) * Ginv(i, j);
}

inline void require_flat_torus(const ManifoldContext& ctx, const char* who) {
    if (ctx.model_name() != "flat_torus" || !ctx.spec().periodic())
        throw std::invalid_argument(std::string(who) + " requires a flat torus context");
}

}  // namespace detail

/// Synthesizes a transverse-traceless field on the flat torus by projecting
/// seeded band-limited coefficients onto {k . H = 0, tr H = 0} per Fourier
/// mode. Exact in the spectral backend. A zero result (possible for n = 2,
/// where nonzero modes admit no TT content) is reported via the returned
/// flag when requested.
inline TensorField synthesize_tt_torus(const ManifoldContext& ctx, std::uint64_t seed,
                                       bool* degenerate = nullptr) {
    detail::require_flat_torus(ctx, "synthesize_tt_torus");
    const int n = ctx.dim();
    const int ns = n * (n + 1) / 2;
    FourierTransform ft(ctx.grid());
    TensorField noise = random_band_limited(ctx, Valence::sym2, seed);
    Eigen::MatrixXcd coeffs(ctx.samples(), ns);
    for (int c = 0; c < ns; ++c) coeffs.col(c) = ft.forward(noise.data.col(c));

    Eigen::MatrixXd G = ctx.metric().g.sym_at(0);
    Eigen::MatrixXd Ginv = ctx.metric().g_inv.sym_at(0);
    Eigen::VectorXd w(ns);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) w[sym_index(i, j, n)] = (i == j) ? 1.0 : 2.0;

    for (std::int64_t s = 0; s < ctx.samples(); ++s) {
        auto kv = ft.wavevector(s);
        bool zero = true;
        Eigen::VectorXd kvec(n);
        for (int a = 0; a < n; ++a) {
            kvec[a] = kv[a];
            zero = zero && kv[a] == 0;
        }
        Eigen::VectorXcd x = coeffs.row(s).transpose();
        if (x.norm() == 0.0) continue;
        Eigen::MatrixXcd A;
        if (zero) {
            // constants: only the trace constraint applies
            A.setZero(1, ns);
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j)
                    A(0, sym_index(i, j, n)) = (i == j ? 1.0 : 2.0) * Ginv(i, j);
        } else {
            detail::mode_constraints(Ginv, kvec, n, A);
        }
        coeffs.row(s) = detail::weighted_kernel_projection(A, x, w).transpose();
    }
    TensorField out = ctx.make_field(Valence::sym2);
    for (int c = 0; c < ns; ++c) out.data.col(c) = ft.inverse(coeffs.col(c));
    if (degenerate) *degenerate = sup_norm(ctx, out) < 1e-14;
    return out;
}

/// Synthesizes a Chen-Nagano harmonic tensor with prescribed trace u on the
/// flat torus: per nonzero Fourier mode the packed trace-free part solves
///   (G^{-1}k)^m H0_{mj} = (n-2)/(2n) k_j u_hat,   tr_G H0 = 0
/// by the minimal-Frobenius-norm pseudoinverse; a seeded TT field rides on
/// top and (u/n) g carries the trace.
inline TensorField synthesize_cn_torus(const ManifoldContext& ctx, const TensorField& u,
                                       std::uint64_t seed) {
    detail::require_flat_torus(ctx, "synthesize_cn_torus");
    if (u.valence != Valence::scalar) throw std::invalid_argument("trace field must be scalar");
    const int n = ctx.dim();
    const int ns = n * (n + 1) / 2;
    FourierTransform ft(ctx.grid());
    Eigen::VectorXcd uhat = ft.forward(u.data.col(0));

    Eigen::MatrixXd Ginv = ctx.metric().g_inv.sym_at(0);
    Eigen::VectorXd w(ns);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) w[sym_index(i, j, n)] = (i == j) ? 1.0 : 2.0;
    const double coeff = double(n - 2) / (2.0 * n);

    Eigen::MatrixXcd coeffs = Eigen::MatrixXcd::Zero(ctx.samples(), ns);
    for (std::int64_t s = 0; s < ctx.samples(); ++s) {
        auto kv = ft.wavevector(s);
        bool zero = true;
        Eigen::VectorXd kvec(n);
        for (int a = 0; a < n; ++a) {
            kvec[a] = kv[a];
            zero = zero && kv[a] == 0;
        }
        if (zero) continue;  // zero mode of h0 stays 0
        if (std::abs(uhat[s]) == 0.0) continue;
        Eigen::MatrixXcd A;
        detail::mode_constraints(Ginv, kvec, n, A);
        Eigen::VectorXcd b(n + 1);
        for (int j = 0; j < n; ++j) b[j] = coeff * kvec[j] * uhat[s];
        b[n] = 0.0;
        coeffs.row(s) = detail::weighted_min_norm(A, b, w).transpose();
    }
    TensorField h0 = ctx.make_field(Valence::sym2);
    for (int c = 0; c < ns; ++c) h0.data.col(c) = ft.inverse(coeffs.col(c));

    TensorField tt = synthesize_tt_torus(ctx, seed);
    TensorField pure = scalar_times_metric(ctx, u);
    TensorField out = linear_combination(1.0, h0, 1.0, tt);
    pure.data /= double(n);
    return linear_combination(1.0, out, 1.0, pure);
}

}  // namespace riemlab
