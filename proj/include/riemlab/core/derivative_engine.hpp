#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "riemlab/core/grid.hpp"
#include "riemlab/core/tensor_field.hpp"
#include "riemlab/util/parallel.hpp"

namespace riemlab {

/// Central finite-difference weights for d/dx, offsets 1..order/2. The
/// stencil is antisymmetric; the full row is w[k] at +k and -w[k] at -k.
inline std::vector<double> central_weights(int order) {
    switch (order) {
        case 2: return {0.5};
        case 4: return {2.0 / 3.0, -1.0 / 12.0};
        case 6: return {3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
        case 8: return {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
        default: throw config_error("stencil_order must be one of {2,4,6,8}");
    }
}

/// Signed integer frequency of DFT bin k on an odd-length grid.
inline int signed_freq(int k, int N) { return (k <= (N - 1) / 2) ? k : k - N; }

/// Single-axis derivative operators realized as dense N x N matrices.
/// Spectral: D = Re(F^-1 diag(2*pi*i*m) F) on the periodic unit cell,
/// exact for band-limited data and exactly antisymmetric. Finite
/// difference: circulant (torus) or central-stencil rows with zeroed edge
/// rows (open charts; edge rows are masked by the field margin).
class DerivativeEngine {
public:
    DerivativeEngine() = default;

    explicit DerivativeEngine(const Grid& grid) : grid_(&grid) {
        const auto& spec = grid.spec;
        const int N = spec.resolution;
        for (int a = 0; a < spec.dim; ++a) {
            if (a > 0 && grid.dx[a] == grid.dx[a - 1]) {
                d_[a] = d_[a - 1];
                continue;
            }
            if (spec.backend == DerivativeBackend::spectral) {
                d_[a] = spectral_matrix(N, grid.dx[a] * N);
            } else if (spec.periodic()) {
                d_[a] = circulant_fd(N, spec.stencil_order, grid.dx[a]);
            } else {
                d_[a] = open_fd(N, spec.stencil_order, grid.dx[a]);
            }
        }
    }

    /// Cells of validity lost per application on open charts.
    int margin_cost() const {
        return grid_->spec.periodic() ? 0 : grid_->spec.stencil_order / 2;
    }

    /// d/dx^axis applied to every column of `data` (one column per tensor
    /// component), with margin bookkeeping for open charts. Margin cells hold
    /// NaN; they are zeroed before the row products (valid output rows never
    /// actually read them) and re-masked afterwards.
    Eigen::MatrixXd apply_columns(const Eigen::MatrixXd& data, int in_margin, int axis,
                                  int* out_margin_ptr = nullptr) const {
        const auto& g = *grid_;
        if (axis < 0 || axis >= g.dim()) throw std::invalid_argument("axis out of range");
        const int out_margin = in_margin + margin_cost();
        if (!g.spec.periodic() && g.interior_count(out_margin) == 0)
            throw domain_error("derivative leaves no interior samples on this open chart");
        Eigen::MatrixXd clean;
        const Eigen::MatrixXd* src = &data;
        if (in_margin > 0) {
            clean = data.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; });
            src = &clean;
        }
        Eigen::MatrixXd out(data.rows(), data.cols());
        for (int c = 0; c < data.cols(); ++c) {
            Eigen::VectorXd res(data.rows());
            apply_axis(d_[axis], src->col(c), res, axis);
            out.col(c) = res;
        }
        if (out_margin > 0) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            for (std::int64_t s = 0; s < out.rows(); ++s)
                if (!g.is_interior(s, out_margin)) out.row(s).setConstant(nan);
        }
        if (out_margin_ptr) *out_margin_ptr = out_margin;
        return out;
    }

    /// d(field)/dx^axis, component by component.
    TensorField apply(const TensorField& f, int axis) const {
        TensorField out = f;
        int out_margin = f.margin;
        out.data = apply_columns(f.data, f.margin, axis, &out_margin);
        out.margin = out_margin;
        return out;
    }

    const Eigen::MatrixXd& matrix(int axis) const { return d_[axis]; }

    /// Applies an arbitrary N x N line operator along `axis` (used by the
    /// DFT helpers below and by operator assembly).
    template <typename Scalar>
    void apply_axis_matrix(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& M,
                           Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> in,
                           Eigen::Ref<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> out,
                           int axis) const {
        const auto& g = *grid_;
        const int N = g.res();
        const std::int64_t stride = g.stride[axis];
        const std::int64_t nlines = g.num_samples / N;
        // enumerate line base offsets: all indices with axis coordinate 0
        parallel_for(static_cast<std::size_t>(nlines), [&](std::size_t li) {
            // decode line index into a base flat offset
            std::int64_t rem = static_cast<std::int64_t>(li);
            std::int64_t base = 0;
            for (int a = 0; a < g.dim(); ++a) {
                if (a == axis) continue;
                const std::int64_t count = N;
                const std::int64_t digit = rem % count;
                rem /= count;
                base += digit * g.stride[a];
            }
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1> line(N);
            for (int k = 0; k < N; ++k) line[k] = in[base + k * stride];
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1> res = M * line;
            for (int k = 0; k < N; ++k) out[base + k * stride] = res[k];
        });
    }

    static Eigen::MatrixXd spectral_matrix(int N, double period) {
        using cd = std::complex<double>;
        Eigen::MatrixXcd F(N, N), Finv(N, N);
        const double w = 2.0 * M_PI / N;
        for (int k = 0; k < N; ++k)
            for (int j = 0; j < N; ++j) {
                F(k, j) = std::exp(cd(0.0, -w * k * j)) / double(N);
                Finv(j, k) = std::exp(cd(0.0, w * k * j));
            }
        Eigen::VectorXcd mult(N);
        for (int k = 0; k < N; ++k)
            mult[k] = cd(0.0, 2.0 * M_PI * signed_freq(k, N) / period);
        Eigen::MatrixXd D = (Finv * mult.asDiagonal() * F).real();
        return 0.5 * (D - D.transpose().eval());  // clear roundoff asymmetry
    }

    static Eigen::MatrixXd circulant_fd(int N, int order, double dx) {
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, N);
        const auto w = central_weights(order);
        for (int j = 0; j < N; ++j)
            for (int k = 1; k <= order / 2; ++k) {
                D(j, (j + k) % N) += w[k - 1] / dx;
                D(j, ((j - k) % N + N) % N) -= w[k - 1] / dx;
            }
        return D;
    }

    static Eigen::MatrixXd open_fd(int N, int order, double dx) {
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N, N);
        const auto w = central_weights(order);
        const int r = order / 2;
        for (int j = r; j < N - r; ++j)
            for (int k = 1; k <= r; ++k) {
                D(j, j + k) += w[k - 1] / dx;
                D(j, j - k) -= w[k - 1] / dx;
            }
        return D;  // edge rows stay zero; masked by field margin
    }

private:
    void apply_axis(const Eigen::MatrixXd& M, Eigen::Ref<const Eigen::VectorXd> in,
                    Eigen::Ref<Eigen::VectorXd> out, int axis) const {
        apply_axis_matrix<double>(M, in, out, axis);
    }

    const Grid* grid_ = nullptr;
    std::array<Eigen::MatrixXd, kMaxDim> d_;
};

/// Forward/inverse DFT along every axis of a periodic grid. Forward is
/// normalized by 1/N per axis, so coefficient k = 0 is the sample mean.
class FourierTransform {
public:
    explicit FourierTransform(const Grid& grid) : grid_(&grid), engine_(grid) {
        if (!grid.spec.periodic())
            throw std::invalid_argument("Fourier transform requires a periodic chart");
        const int N = grid.res();
        using cd = std::complex<double>;
        F_.resize(N, N);
        Finv_.resize(N, N);
        const double w = 2.0 * M_PI / N;
        for (int k = 0; k < N; ++k)
            for (int j = 0; j < N; ++j) {
                F_(k, j) = std::exp(cd(0.0, -w * k * j)) / double(N);
                Finv_(j, k) = std::exp(cd(0.0, w * k * j));
            }
    }

    Eigen::VectorXcd forward(Eigen::Ref<const Eigen::VectorXd> real_samples) const {
        Eigen::VectorXcd buf = real_samples.cast<std::complex<double>>();
        Eigen::VectorXcd tmp(buf.size());
        for (int a = 0; a < grid_->dim(); ++a) {
            engine_.apply_axis_matrix<std::complex<double>>(F_, buf, tmp, a);
            buf.swap(tmp);
        }
        return buf;
    }

    Eigen::VectorXd inverse(Eigen::Ref<const Eigen::VectorXcd> coeffs) const {
        Eigen::VectorXcd buf = coeffs;
        Eigen::VectorXcd tmp(buf.size());
        for (int a = 0; a < grid_->dim(); ++a) {
            engine_.apply_axis_matrix<std::complex<double>>(Finv_, buf, tmp, a);
            buf.swap(tmp);
        }
        return buf.real();
    }

    /// Signed wavevector of flat DFT bin index s.
    std::array<int, kMaxDim> wavevector(std::int64_t s) const {
        auto idx = grid_->multi_index(s);
        std::array<int, kMaxDim> k{};
        for (int a = 0; a < grid_->dim(); ++a) k[a] = signed_freq(idx[a], grid_->res());
        return k;
    }

    /// Flat bin index of a signed wavevector.
    std::int64_t bin(const std::array<int, kMaxDim>& k) const {
        std::array<int, kMaxDim> idx{};
        const int N = grid_->res();
        for (int a = 0; a < grid_->dim(); ++a) idx[a] = (k[a] % N + N) % N;
        return grid_->flat_index(idx);
    }

private:
    const Grid* grid_;
    DerivativeEngine engine_;
    Eigen::MatrixXcd F_, Finv_;
};

}  // namespace riemlab
