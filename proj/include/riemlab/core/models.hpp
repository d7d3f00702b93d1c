#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <string>

#include "riemlab/core/context.hpp"

namespace riemlab {

/// Fixed symmetric direction of the bumpy-torus perturbation,
/// B_ij = 1/(i+j+1) (1-based), so ||B||_2 < 1.5 for n <= 4.
inline Eigen::MatrixXd bumpy_direction(int n) {
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) = 1.0 / double(i + j + 1);
    return B;
}

struct ModelOptions {
    int dim = 3;
    int resolution = 17;
    int stencil_order = 6;
    double interior_margin = 0.2;  // open charts only
    DerivativeBackend backend = DerivativeBackend::spectral;
    std::map<std::string, Eigen::MatrixXd> params;  // G, a, freq, scale

    double scalar_param(const std::string& key, double fallback) const {
        auto it = params.find(key);
        if (it == params.end()) return fallback;
        if (it->second.size() != 1)
            throw config_error("param '" + key + "' must be a scalar");
        return it->second(0, 0);
    }
};

/// Builds one of the catalog models:
///   flat_torus      g = G (constant SPD matrix), lambda = 0
///   bumpy_torus     g = I + a*sin(2*pi*f*x1)*cos(2*pi*f*x2)*B, non-Einstein
///   sphere_stereo   g = 4c^2/(1+|x|^2)^2 * I   (curvature +1/c^2)
///   hyperbolic_ball g = 4c^2/(1-|x|^2)^2 * I   (curvature -1/c^2)
///   hyperbolic_half g = c^2/(x_n)^2 * I        (curvature -1/c^2)
inline std::shared_ptr<const ManifoldContext> make_model(const std::string& name,
                                                         const ModelOptions& opt) {
    ChartSpec spec;
    spec.dim = opt.dim;
    spec.resolution = opt.resolution;
    spec.stencil_order = opt.stencil_order;
    spec.backend = opt.backend;

    const int n = opt.dim;
    if (name == "flat_torus" || name == "bumpy_torus") {
        spec.kind = ChartKind::periodic_torus;
        spec.interior_margin = 0.0;
    } else if (name == "sphere_stereo" || name == "hyperbolic_ball") {
        spec.kind = ChartKind::open_ball_chart;
        spec.interior_margin = opt.interior_margin;
        spec.backend = DerivativeBackend::finite_difference;
    } else if (name == "hyperbolic_half") {
        spec.kind = ChartKind::half_space_chart;
        spec.interior_margin = opt.interior_margin;
        spec.backend = DerivativeBackend::finite_difference;
    } else {
        throw config_error("unknown model '" + name + "'");
    }

    using Point = std::array<double, kMaxDim>;

    if (name == "flat_torus") {
        Eigen::MatrixXd G = Eigen::MatrixXd::Identity(n, n);
        auto it = opt.params.find("G");
        if (it != opt.params.end()) {
            if (it->second.rows() != n || it->second.cols() != n)
                throw config_error("param G must be a " + std::to_string(n) + "x" +
                                   std::to_string(n) + " matrix");
            G = 0.5 * (it->second + it->second.transpose());
        }
        return std::make_shared<ManifoldContext>(spec, name, opt.params,
                                                 [G](const Point&) { return G; });
    }
    if (name == "bumpy_torus") {
        const double a = opt.scalar_param("a", 0.1);
        const double freq = opt.scalar_param("freq", 1.0);
        const Eigen::MatrixXd B = bumpy_direction(n);
        if (std::abs(a) * B.operatorNorm() >= 1.0)
            throw config_error("bumpy amplitude too large for a positive-definite metric");
        return std::make_shared<ManifoldContext>(
            spec, name, opt.params, [a, freq, B, n](const Point& x) {
                const double s = a * std::sin(2.0 * M_PI * freq * x[0]) *
                                 std::cos(2.0 * M_PI * freq * x[1]);
                return Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n) + s * B);
            });
    }

    const double c = opt.scalar_param("scale", 1.0);
    if (c <= 0.0) throw config_error("param scale must be positive");
    if (name == "sphere_stereo") {
        return std::make_shared<ManifoldContext>(spec, name, opt.params, [c, n](const Point& x) {
            double r2 = 0;
            for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
            const double f = 2.0 * c / (1.0 + r2);
            return Eigen::MatrixXd(f * f * Eigen::MatrixXd::Identity(n, n));
        });
    }
    if (name == "hyperbolic_ball") {
        return std::make_shared<ManifoldContext>(spec, name, opt.params, [c, n](const Point& x) {
            double r2 = 0;
            for (int a = 0; a < n; ++a) r2 += x[a] * x[a];
            const double f = 2.0 * c / (1.0 - r2);
            return Eigen::MatrixXd(f * f * Eigen::MatrixXd::Identity(n, n));
        });
    }
    // hyperbolic_half
    return std::make_shared<ManifoldContext>(spec, name, opt.params, [c, n](const Point& x) {
        const double f = c / x[n - 1];
        return Eigen::MatrixXd(f * f * Eigen::MatrixXd::Identity(n, n));
    });
}

}  // namespace riemlab
