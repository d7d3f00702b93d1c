#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "riemlab/core/curvature.hpp"

namespace riemlab {

// ---------------------------------------------------------------------------
// trace and trace split
// ---------------------------------------------------------------------------

inline TensorField trace(const ManifoldContext& ctx, const TensorField& h) {
    if (h.valence != Valence::sym2) throw std::invalid_argument("trace needs sym2");
    TensorField u = ctx.make_field(Valence::scalar, h.margin);
    const int n = ctx.dim();
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t s) {
        double acc = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                acc += ctx.metric().g_inv.at(s, sym_index(i, j, n)) * h.at(s, sym_index(i, j, n));
        u.at(s, 0) = acc;
    });
    return u;
}

/// h = h0 + (u/n) g with tr_g h0 = 0 pointwise.
inline std::pair<TensorField, TensorField> trace_split(const ManifoldContext& ctx,
                                                       const TensorField& h) {
    TensorField u = trace(ctx, h);
    TensorField h0 = h;
    const int n = ctx.dim();
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t s) {
        const double f = u.at(s, 0) / n;
        for (int c = 0; c < h.components(); ++c)
            h0.at(s, c) = h.at(s, c) - f * ctx.metric().g.at(s, c);
    });
    return {h0, u};
}

/// f * g as a sym2 field (pure-trace tensor with tr = n f).
inline TensorField scalar_times_metric(const ManifoldContext& ctx, const TensorField& f) {
    if (f.valence != Valence::scalar) throw std::invalid_argument("expected a scalar field");
    TensorField out = ctx.make_field(Valence::sym2, f.margin);
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t s) {
        for (int c = 0; c < out.components(); ++c)
            out.at(s, c) = f.at(s, 0) * ctx.metric().g.at(s, c);
    });
    return out;
}

// ---------------------------------------------------------------------------
// first-order operators
// ---------------------------------------------------------------------------

/// (df)_i = d_i f.
inline TensorField exterior_d_scalar(const ManifoldContext& ctx, const TensorField& f) {
    if (f.valence != Valence::scalar) throw std::invalid_argument("expected a scalar field");
    TensorField out = ctx.make_field(Valence::one_form, f.margin);
    int m = f.margin;
    for (int a = 0; a < ctx.dim(); ++a)
        out.data.col(a) = ctx.engine().apply_columns(f.data, f.margin, a, &m).col(0);
    out.margin = m;
    return out;
}

/// Divergence (delta h)_j = -nabla^i h_{ij}.
inline TensorField divergence(const ManifoldContext& ctx, const TensorField& h) {
    if (h.valence != Valence::sym2) throw std::invalid_argument("divergence needs sym2");
    const auto& B = ctx.curvature();
    const int n = ctx.dim();
    int mD = h.margin;
    std::array<Eigen::MatrixXd, kMaxDim> dh;
    for (int a = 0; a < n; ++a) dh[a] = ctx.engine().apply_columns(h.data, h.margin, a, &mD);
    const int mout = std::max(mD, B.margin_christoffel);
    TensorField out = ctx.make_field(Valence::one_form, mout);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t sz) {
        const auto s = static_cast<std::int64_t>(sz);
        if (!ctx.grid().is_interior(s, mout)) {
            out.data.row(s).setConstant(nan);
            return;
        }
        for (int j = 0; j < n; ++j) {
            double acc = 0;
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k) {
                    double cov = dh[i](s, sym_index(k, j, n));
                    for (int m = 0; m < n; ++m)
                        cov -= B.gamma(s, m, i, k) * h.at(s, sym_index(m, j, n)) +
                               B.gamma(s, m, i, j) * h.at(s, sym_index(k, m, n));
                    acc += ctx.metric().g_inv.at(s, sym_index(i, k, n)) * cov;
                }
            out.at(s, j) = -acc;
        }
    });
    return out;
}

/// Symmetrized covariant derivative (delta* w)_ij = 1/2 (nabla_i w_j + nabla_j w_i).
inline TensorField sym_derivative(const ManifoldContext& ctx, const TensorField& w) {
    if (w.valence != Valence::one_form) throw std::invalid_argument("sym_derivative needs one_form");
    const auto& B = ctx.curvature();
    const int n = ctx.dim();
    int mD = w.margin;
    std::array<Eigen::MatrixXd, kMaxDim> dw;
    for (int a = 0; a < n; ++a) dw[a] = ctx.engine().apply_columns(w.data, w.margin, a, &mD);
    const int mout = std::max(mD, B.margin_christoffel);
    TensorField out = ctx.make_field(Valence::sym2, mout);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t sz) {
        const auto s = static_cast<std::int64_t>(sz);
        if (!ctx.grid().is_interior(s, mout)) {
            out.data.row(s).setConstant(nan);
            return;
        }
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double v = 0.5 * (dw[i](s, j) + dw[j](s, i));
                for (int m = 0; m < n; ++m) v -= B.gamma(s, m, i, j) * w.at(s, m);
                out.at(s, sym_index(i, j, n)) = v;
            }
    });
    return out;
}

/// Codifferential on 1-forms, delta w = -nabla^i w_i (covariant form).
inline TensorField codifferential(const ManifoldContext& ctx, const TensorField& w) {
    if (w.valence != Valence::one_form) throw std::invalid_argument("codifferential needs one_form");
    const auto& B = ctx.curvature();
    const int n = ctx.dim();
    int mD = w.margin;
    std::array<Eigen::MatrixXd, kMaxDim> dw;
    for (int a = 0; a < n; ++a) dw[a] = ctx.engine().apply_columns(w.data, w.margin, a, &mD);
    const int mout = std::max(mD, B.margin_christoffel);
    TensorField out = ctx.make_field(Valence::scalar, mout);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t sz) {
        const auto s = static_cast<std::int64_t>(sz);
        if (!ctx.grid().is_interior(s, mout)) {
            out.data.row(s).setConstant(nan);
            return;
        }
        double acc = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double cov = dw[i](s, j);
                for (int m = 0; m < n; ++m) cov -= B.gamma(s, m, i, j) * w.at(s, m);
                acc += ctx.metric().g_inv.at(s, sym_index(i, j, n)) * cov;
            }
        out.at(s, 0) = -acc;
    });
    return out;
}

// ---------------------------------------------------------------------------
// second-order operators
// ---------------------------------------------------------------------------

/// Scalar Laplacian in divergence form,
/// (Delta f) = -(1/sqrt g) d_i ( sqrt g g^{ij} d_j f ).
/// Exactly self-adjoint and nonnegative against the quadrature weights on
/// periodic charts.
inline TensorField scalar_laplacian(const ManifoldContext& ctx, const TensorField& f) {
    if (f.valence != Valence::scalar) throw std::invalid_argument("scalar_laplacian needs scalar");
    const int n = ctx.dim();
    TensorField df = exterior_d_scalar(ctx, f);
    // flux^i = sqrt(g) g^{ij} (df)_j
    Eigen::MatrixXd flux(ctx.samples(), n);
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t s) {
        const double sq = ctx.metric().sqrt_det.at(s, 0);
        for (int i = 0; i < n; ++i) {
            double acc = 0;
            for (int j = 0; j < n; ++j)
                acc += ctx.metric().g_inv.at(s, sym_index(i, j, n)) * df.at(s, j);
            flux(s, i) = sq * acc;
        }
    });
    int mout = df.margin;
    TensorField out = ctx.make_field(Valence::scalar, df.margin);
    out.data.setZero();
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd di = ctx.engine().apply_columns(flux.col(i), df.margin, i, &mout);
        out.data.col(0) += di.col(0);
    }
    out.margin = df.margin;
    out.apply_margin(ctx.grid(), mout);
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t s) {
        out.at(s, 0) = -out.at(s, 0) / ctx.metric().sqrt_det.at(s, 0);
    });
    return out;
}

/// Hessian (nabla d f)_ij = d_i d_j f - Gamma^k_ij d_k f.
inline TensorField hessian(const ManifoldContext& ctx, const TensorField& f) {
    if (f.valence != Valence::scalar) throw std::invalid_argument("hessian needs scalar");
    TensorField df = exterior_d_scalar(ctx, f);
    return sym_derivative(ctx, df);
}

/// Rough Laplacian nabla* nabla h = -g^{ab} nabla_a nabla_b h on sym2.
inline TensorField rough_laplacian(const ManifoldContext& ctx, const TensorField& h) {
    if (h.valence != Valence::sym2) throw std::invalid_argument("rough_laplacian needs sym2");
    const auto& B = ctx.curvature();
    const int n = ctx.dim();
    const int ns = n * (n + 1) / 2;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    // first covariant derivative T_b = nabla_b h (sym2 per b)
    int mD = h.margin;
    std::array<Eigen::MatrixXd, kMaxDim> dh;
    for (int a = 0; a < n; ++a) dh[a] = ctx.engine().apply_columns(h.data, h.margin, a, &mD);
    const int m1 = std::max(mD, B.margin_christoffel);
    Eigen::MatrixXd T(ctx.samples(), n * ns);  // column b*ns + sym(i,j)
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t sz) {
        const auto s = static_cast<std::int64_t>(sz);
        if (!ctx.grid().is_interior(s, m1)) {
            T.row(s).setConstant(nan);
            return;
        }
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) {
                    double v = dh[b](s, sym_index(i, j, n));
                    for (int m = 0; m < n; ++m)
                        v -= B.gamma(s, m, b, i) * h.at(s, sym_index(m, j, n)) +
                             B.gamma(s, m, b, j) * h.at(s, sym_index(i, m, n));
                    T(s, b * ns + sym_index(i, j, n)) = v;
                }
    });

    // second covariant derivative, contracted with -g^{ab}
    int mD2 = m1;
    std::array<Eigen::MatrixXd, kMaxDim> dT;
    for (int a = 0; a < n; ++a) dT[a] = ctx.engine().apply_columns(T, m1, a, &mD2);
    const int mout = std::max(mD2, B.margin);
    TensorField out = ctx.make_field(Valence::sym2, mout);
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t sz) {
        const auto s = static_cast<std::int64_t>(sz);
        if (!ctx.grid().is_interior(s, mout)) {
            out.data.row(s).setConstant(nan);
            return;
        }
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double acc = 0;
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) {
                        double v = dT[a](s, b * ns + sym_index(i, j, n));
                        for (int m = 0; m < n; ++m)
                            v -= B.gamma(s, m, a, b) * T(s, m * ns + sym_index(i, j, n)) +
                                 B.gamma(s, m, a, i) * T(s, b * ns + sym_index(m, j, n)) +
                                 B.gamma(s, m, a, j) * T(s, b * ns + sym_index(i, m, n));
                        acc += ctx.metric().g_inv.at(s, sym_index(a, b, n)) * v;
                    }
                out.at(s, sym_index(i, j, n)) = -acc;
            }
    });
    return out;
}

/// Hodge-de Rham Laplacian on 1-forms, Delta_H = d delta + delta d.
inline TensorField hodge_1form(const ManifoldContext& ctx, const TensorField& w) {
    if (w.valence != Valence::one_form) throw std::invalid_argument("hodge_1form needs one_form");
    const auto& B = ctx.curvature();
    const int n = ctx.dim();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    // term 1: d(delta w)
    TensorField dd = exterior_d_scalar(ctx, codifferential(ctx, w));

    // term 2: delta(d w) with (dw)_ij = d_i w_j - d_j w_i (no connection terms)
    int mD = w.margin;
    std::array<Eigen::MatrixXd, kMaxDim> dw;
    for (int a = 0; a < n; ++a) dw[a] = ctx.engine().apply_columns(w.data, w.margin, a, &mD);
    Eigen::MatrixXd beta(ctx.samples(), n * n);  // (dw)_ij at column i*n+j
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t s) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) beta(s, i * n + j) = dw[i](s, j) - dw[j](s, i);
    });
    int mD2 = mD;
    std::array<Eigen::MatrixXd, kMaxDim> dbeta;
    for (int a = 0; a < n; ++a) dbeta[a] = ctx.engine().apply_columns(beta, mD, a, &mD2);
    const int mout = std::max({mD2, dd.margin, B.margin_christoffel});
    TensorField out = ctx.make_field(Valence::one_form, mout);
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t sz) {
        const auto s = static_cast<std::int64_t>(sz);
        if (!ctx.grid().is_interior(s, mout)) {
            out.data.row(s).setConstant(nan);
            return;
        }
        for (int j = 0; j < n; ++j) {
            double acc = 0;
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k) {
                    double cov = dbeta[k](s, i * n + j);
                    for (int m = 0; m < n; ++m)
                        cov -= B.gamma(s, m, k, i) * beta(s, m * n + j) +
                               B.gamma(s, m, k, j) * beta(s, i * n + m);
                    acc += ctx.metric().g_inv.at(s, sym_index(i, k, n)) * cov;
                }
            out.at(s, j) = dd.at(s, j) - acc;  // d(delta w) + delta(d w)
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Lichnerowicz Laplacian and the linearized Ricci tensor
// ---------------------------------------------------------------------------

/// Ric o h + h o Ric with one index raised by the metric.
inline TensorField ricci_composition(const ManifoldContext& ctx, const TensorField& h) {
    if (h.valence != Valence::sym2) throw std::invalid_argument("ricci_composition needs sym2");
    const auto& B = ctx.curvature();
    const int mout = std::max(B.margin, h.margin);
    TensorField out = ctx.make_field(Valence::sym2, mout);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t sz) {
        const auto s = static_cast<std::int64_t>(sz);
        if (!ctx.grid().is_interior(s, mout)) {
            out.data.row(s).setConstant(nan);
            return;
        }
        Eigen::MatrixXd gi = ctx.metric().g_inv.sym_at(s);
        Eigen::MatrixXd ric = B.ricci.sym_at(s);
        Eigen::MatrixXd hm = h.sym_at(s);
        out.set_sym_at(s, ric * gi * hm + hm * gi * ric);
    });
    return out;
}

enum class LichnerowiczVariant { general, einstein_reduced };

/// Delta_L h = nabla*nabla h - 2 R(h) + Ric o h + h o Ric. The reduced
/// variant replaces the composition terms by 2 lambda_hat h and requires the
/// context to be numerically Einstein.
inline TensorField lichnerowicz(const ManifoldContext& ctx, const TensorField& h,
                                LichnerowiczVariant variant = LichnerowiczVariant::general,
                                double einstein_threshold = -1.0) {
    const auto& B = ctx.curvature();
    TensorField out = rough_laplacian(ctx, h);
    TensorField rk = second_kind_apply(ctx, h);
    if (variant == LichnerowiczVariant::einstein_reduced) {
        if (einstein_threshold < 0) einstein_threshold = 10.0 * ctx.differentiation_tolerance();
        if (B.einstein_residual_sup > einstein_threshold)
            throw std::invalid_argument(
                "einstein_reduced Lichnerowicz on a visibly non-Einstein model: residual " +
                std::to_string(B.einstein_residual_sup) + " exceeds threshold " +
                std::to_string(einstein_threshold));
        TensorField lam = h;
        lam.data = (2.0 * B.lambda_hat) * h.data;
        out = linear_combination(1.0, out, -2.0, rk);
        return linear_combination(1.0, out, 1.0, lam);
    }
    TensorField comp = ricci_composition(ctx, h);
    out = linear_combination(1.0, out, -2.0, rk);
    return linear_combination(1.0, out, 1.0, comp);
}

/// Closed-form linearization of the Ricci tensor at the context metric:
/// (Ric)'(h) = 1/2 ( Delta_L h - 2 delta* delta h - nabla d (tr_g h) ).
inline TensorField linearized_ricci_formula(const ManifoldContext& ctx, const TensorField& h) {
    TensorField lich = lichnerowicz(ctx, h, LichnerowiczVariant::general);
    TensorField corr = sym_derivative(ctx, divergence(ctx, h));
    TensorField hess = hessian(ctx, trace(ctx, h));
    TensorField out = linear_combination(1.0, lich, -2.0, corr);
    out = linear_combination(1.0, out, -1.0, hess);
    out.data *= 0.5;
    return out;
}

/// Central-difference Gateaux derivative of the full curvature pipeline:
/// (Ric(g + eps h) - Ric(g - eps h)) / (2 eps). Independent of every
/// closed-form operator above.
inline TensorField linearized_ricci_gateaux(const ManifoldContext& ctx, const TensorField& h,
                                            double eps = 1e-3) {
    if (h.valence != Valence::sym2) throw std::invalid_argument("gateaux needs sym2");
    if (eps <= 0) throw std::invalid_argument("eps must be positive");
    auto perturbed_ricci = [&](double sign) {
        Eigen::MatrixXd gp = ctx.metric().g.data + sign * eps * h.data;
        try {
            ManifoldContext pctx(ctx.spec(), ctx.model_name() + "_perturbed", gp);
            return pctx.curvature().ricci.data.eval();
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(e.what()) +
                                        "; perturbed metric g " + (sign > 0 ? "+" : "-") +
                                        " eps*h failed, try a smaller eps");
        }
    };
    Eigen::MatrixXd plus = perturbed_ricci(+1.0);
    Eigen::MatrixXd minus = perturbed_ricci(-1.0);
    const int p = ctx.spec().stencil_order;
    const int mout = std::max(h.margin, ctx.spec().periodic() ? 0 : p);
    TensorField out = ctx.make_field(Valence::sym2, mout);
    out.data = (plus - minus) / (2.0 * eps);
    out.margin = 0;
    out.apply_margin(ctx.grid(), mout);
    return out;
}

}  // namespace riemlab
