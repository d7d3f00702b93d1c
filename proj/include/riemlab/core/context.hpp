#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "riemlab/core/derivative_engine.hpp"
#include "riemlab/core/grid.hpp"
#include "riemlab/core/tensor_field.hpp"
#include "riemlab/util/parallel.hpp"

namespace riemlab {

struct CurvatureBundle;  // core/curvature.hpp

/// Metric tensor with its pointwise inverse and volume density.
struct MetricField {
    TensorField g;         // sym2
    TensorField g_inv;     // sym2, pointwise inverse
    TensorField sqrt_det;  // scalar, > 0
};

/// A discretized model manifold: chart, metric, derivative engine,
/// quadrature weights. Immutable after construction; the curvature bundle
/// is memoized on first use.
class ManifoldContext {
public:
    ManifoldContext(ChartSpec spec, std::string model_name,
                    std::map<std::string, Eigen::MatrixXd> params,
                    const std::function<Eigen::MatrixXd(const std::array<double, kMaxDim>&)>&
                        metric_at)
        : id_(next_id()), grid_(spec), engine_(grid_), name_(std::move(model_name)),
          params_(std::move(params)) {
        build_metric([&](std::int64_t s) { return metric_at(grid_.coords(s)); });
        build_quadrature();
    }

    /// Context over an explicitly sampled metric (packed sym2 rows), used for
    /// perturbed-metric pipelines.
    ManifoldContext(ChartSpec spec, std::string model_name, const Eigen::MatrixXd& packed_metric)
        : id_(next_id()), grid_(spec), engine_(grid_), name_(std::move(model_name)) {
        if (packed_metric.rows() != grid_.num_samples ||
            packed_metric.cols() != component_count(Valence::sym2, grid_.dim()))
            throw std::invalid_argument("sampled metric has the wrong shape for this grid");
        build_metric([&](std::int64_t s) {
            Eigen::MatrixXd m(grid_.dim(), grid_.dim());
            for (int i = 0; i < grid_.dim(); ++i)
                for (int j = i; j < grid_.dim(); ++j)
                    m(i, j) = m(j, i) = packed_metric(s, sym_index(i, j, grid_.dim()));
            return m;
        });
        build_quadrature();
    }

    std::uint64_t id() const { return id_; }
    const Grid& grid() const { return grid_; }
    const ChartSpec& spec() const { return grid_.spec; }
    const DerivativeEngine& engine() const { return engine_; }
    const MetricField& metric() const { return metric_; }
    const std::string& model_name() const { return name_; }
    const std::map<std::string, Eigen::MatrixXd>& params() const { return params_; }
    int dim() const { return grid_.dim(); }
    std::int64_t samples() const { return grid_.num_samples; }

    bool has_global_integrals() const { return spec().periodic(); }

    /// Quadrature weight of a sample (torus only): cell volume * sqrt(det g).
    double weight(std::int64_t s) const {
        if (!has_global_integrals())
            throw domain_error("no global integrals on open charts");
        return weights_[s];
    }
    double volume() const {
        if (!has_global_integrals())
            throw domain_error("no global integrals on open charts");
        return volume_;
    }

    TensorField make_field(Valence v, int margin = 0) const {
        return TensorField(v, dim(), id_, samples(), margin);
    }

    /// Expected magnitude of differentiation residuals for this chart, used
    /// for default tolerances. Spectral backends resolve the analytic model
    /// metrics to roundoff; finite differences carry C * dx^p with a
    /// curvature-scale constant.
    double differentiation_tolerance() const {
        if (spec().backend == DerivativeBackend::spectral) return 1e-9;
        double dxmax = 0;
        for (int a = 0; a < dim(); ++a) dxmax = std::max(dxmax, grid_.dx[a]);
        return 1e3 * std::pow(dxmax, spec().stencil_order);
    }

    const CurvatureBundle& curvature() const;  // defined in core/curvature.hpp

    /// d(field)/dx^axis. On open charts the result is valid only at samples
    /// whose full stencil stays inside the previous validity region.
    TensorField differentiate(const TensorField& f, int axis) const {
        if (f.context_id != id_)
            throw std::invalid_argument("field does not belong to this context");
        return engine_.apply(f, axis);
    }

private:
    static std::uint64_t next_id() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    void build_metric(const std::function<Eigen::MatrixXd(std::int64_t)>& metric_at) {
        const int n = dim();
        metric_.g = make_field(Valence::sym2);
        metric_.g_inv = make_field(Valence::sym2);
        metric_.sqrt_det = make_field(Valence::scalar);
        std::string failure;
        std::mutex mu;
        parallel_for(static_cast<std::size_t>(samples()), [&](std::size_t s) {
            Eigen::MatrixXd g = metric_at(static_cast<std::int64_t>(s));
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
            if (es.eigenvalues().minCoeff() <= 0.0) {
                std::lock_guard<std::mutex> lk(mu);
                if (failure.empty()) {
                    auto x = grid_.coords(s);
                    failure = "metric not positive-definite at sample " + std::to_string(s) +
                              " (x =";
                    for (int a = 0; a < n; ++a) failure += " " + std::to_string(x[a]);
                    failure += ")";
                }
                return;
            }
            metric_.g.set_sym_at(s, g);
            metric_.g_inv.set_sym_at(s, g.inverse());
            metric_.sqrt_det.at(s, 0) = std::sqrt(g.determinant());
        });
        if (!failure.empty()) throw std::invalid_argument(failure);
    }

    void build_quadrature() {
        if (!spec().periodic()) return;  // open charts: no global integrals
        const double cell = std::pow(1.0 / grid_.res(), dim());
        weights_.resize(samples());
        for (std::int64_t s = 0; s < samples(); ++s)
            weights_[s] = cell * metric_.sqrt_det.at(s, 0);
        volume_ = parallel_sum(static_cast<std::size_t>(samples()),
                               [&](std::size_t s) { return weights_[s]; });
    }

    std::uint64_t id_;
    Grid grid_;
    DerivativeEngine engine_;
    std::string name_;
    std::map<std::string, Eigen::MatrixXd> params_;
    MetricField metric_;
    std::vector<double> weights_;
    double volume_ = 0.0;

    mutable std::once_flag curvature_once_;
    mutable std::shared_ptr<const CurvatureBundle> curvature_cache_;
    friend const CurvatureBundle& context_curvature(const ManifoldContext&);
};

// ---- pointwise metric pairings ----

inline double pointwise_inner(const ManifoldContext& ctx, const TensorField& a,
                              const TensorField& b, std::int64_t s) {
    const int n = ctx.dim();
    const auto& ginv = ctx.metric().g_inv;
    switch (a.valence) {
        case Valence::scalar: return a.at(s, 0) * b.at(s, 0);
        case Valence::one_form: {
            double acc = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    acc += ginv.at(s, sym_index(i, j, n)) * a.at(s, i) * b.at(s, j);
            return acc;
        }
        case Valence::sym2: {
            Eigen::MatrixXd gi = ginv.sym_at(s);
            Eigen::MatrixXd ma = a.sym_at(s), mb = b.sym_at(s);
            return (gi * ma * gi * mb).trace();
        }
    }
    return 0;
}

inline double pointwise_norm(const ManifoldContext& ctx, const TensorField& f, std::int64_t s) {
    return std::sqrt(std::max(0.0, pointwise_inner(ctx, f, f, s)));
}

/// sup over valid samples of the pointwise metric norm.
inline double sup_norm(const ManifoldContext& ctx, const TensorField& f, int extra_margin = 0) {
    const int m = f.margin + extra_margin;
    return parallel_max(static_cast<std::size_t>(f.samples()), [&](std::size_t s) {
        if (!ctx.grid().is_interior(static_cast<std::int64_t>(s), m))
            return -std::numeric_limits<double>::infinity();
        return pointwise_norm(ctx, f, static_cast<std::int64_t>(s));
    });
}

/// L2 inner product with metric quadrature weights (torus only).
inline double l2_inner(const ManifoldContext& ctx, const TensorField& a, const TensorField& b) {
    return parallel_sum(static_cast<std::size_t>(a.samples()), [&](std::size_t s) {
        return ctx.weight(static_cast<std::int64_t>(s)) *
               pointwise_inner(ctx, a, b, static_cast<std::int64_t>(s));
    });
}

inline double l2_norm(const ManifoldContext& ctx, const TensorField& f) {
    return std::sqrt(std::max(0.0, l2_inner(ctx, f, f)));
}

}  // namespace riemlab
