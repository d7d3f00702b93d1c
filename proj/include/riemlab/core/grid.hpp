#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace riemlab {

inline constexpr int kMaxDim = 4;

enum class ChartKind { periodic_torus, open_ball_chart, half_space_chart };
enum class DerivativeBackend { spectral, finite_difference };

inline const char* to_string(ChartKind k) {
    switch (k) {
        case ChartKind::periodic_torus: return "periodic_torus";
        case ChartKind::open_ball_chart: return "open_ball_chart";
        case ChartKind::half_space_chart: return "half_space_chart";
    }
    return "?";
}

inline const char* to_string(DerivativeBackend b) {
    return b == DerivativeBackend::spectral ? "spectral" : "finite_difference";
}

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Chart geometry and discretization parameters.
///
/// Torus charts cover the unit cell [0,1)^n periodically. The ball chart
/// covers the cube inscribed in the sphere of radius (1 - interior_margin),
/// so every sample stays away from |x| = 1. The half-space chart covers a
/// unit box lifted interior_margin above the x_n = 0 wall.
struct ChartSpec {
    ChartKind kind = ChartKind::periodic_torus;
    int dim = 2;
    int resolution = 17;          // samples per axis, odd
    double interior_margin = 0.0; // open charts only
    int stencil_order = 6;        // even, in {2,4,6,8}
    DerivativeBackend backend = DerivativeBackend::spectral;

    bool periodic() const { return kind == ChartKind::periodic_torus; }

    void validate() const {
        if (dim < 2 || dim > kMaxDim)
            throw config_error("dim must be in [2," + std::to_string(kMaxDim) + "], got " +
                               std::to_string(dim));
        if (resolution % 2 == 0)
            throw config_error("resolution must be odd, got " + std::to_string(resolution));
        if (stencil_order < 2 || stencil_order > 8 || stencil_order % 2 != 0)
            throw config_error("stencil_order must be one of {2,4,6,8}");
        if (resolution < 2 * stencil_order + 1)
            throw config_error("resolution " + std::to_string(resolution) +
                               " below stencil requirement 2*order+1 = " +
                               std::to_string(2 * stencil_order + 1));
        if (periodic()) {
            if (interior_margin != 0.0)
                throw config_error("periodic charts require interior_margin = 0");
        } else {
            if (!(interior_margin > 0.0 && interior_margin < 0.5))
                throw config_error("open charts require 0 < interior_margin < 0.5");
            if (backend == DerivativeBackend::spectral)
                throw config_error("spectral differentiation requires a periodic chart");
        }
    }
};

/// Sample lattice for a chart: coordinates, strides, index arithmetic.
struct Grid {
    ChartSpec spec;
    std::array<double, kMaxDim> lo{};   // coordinate of sample index 0 per axis
    std::array<double, kMaxDim> dx{};   // sample spacing per axis
    std::array<std::int64_t, kMaxDim> stride{};
    std::int64_t num_samples = 0;

    explicit Grid(const ChartSpec& s) : spec(s) {
        spec.validate();
        const int n = spec.dim;
        const int N = spec.resolution;
        double extent[kMaxDim];
        if (spec.kind == ChartKind::periodic_torus) {
            for (int a = 0; a < n; ++a) {
                lo[a] = 0.0;
                extent[a] = 1.0;
                dx[a] = 1.0 / N;  // no duplicated endpoint
            }
        } else if (spec.kind == ChartKind::open_ball_chart) {
            // cube inscribed in the sphere of radius 1 - margin
            const double c = (1.0 - spec.interior_margin) / std::sqrt(double(n));
            for (int a = 0; a < n; ++a) {
                lo[a] = -c;
                extent[a] = 2.0 * c;
                dx[a] = extent[a] / (N - 1);
            }
        } else {  // half_space_chart: last axis kept interior_margin above the wall
            for (int a = 0; a < n; ++a) {
                lo[a] = (a == n - 1) ? spec.interior_margin : -0.5;
                extent[a] = 1.0;
                dx[a] = extent[a] / (N - 1);
            }
        }
        num_samples = 1;
        for (int a = n - 1; a >= 0; --a) {
            stride[a] = num_samples;
            num_samples *= N;
        }
    }

    int dim() const { return spec.dim; }
    int res() const { return spec.resolution; }

    std::int64_t flat_index(const std::array<int, kMaxDim>& idx) const {
        std::int64_t s = 0;
        for (int a = 0; a < spec.dim; ++a) s += idx[a] * stride[a];
        return s;
    }

    std::array<int, kMaxDim> multi_index(std::int64_t s) const {
        std::array<int, kMaxDim> idx{};
        for (int a = 0; a < spec.dim; ++a) {
            idx[a] = static_cast<int>(s / stride[a]);
            s %= stride[a];
        }
        return idx;
    }

    std::array<double, kMaxDim> coords(std::int64_t s) const {
        auto idx = multi_index(s);
        std::array<double, kMaxDim> x{};
        for (int a = 0; a < spec.dim; ++a) x[a] = lo[a] + idx[a] * dx[a];
        return x;
    }

    /// True when every axis index is at least `margin` cells from the grid
    /// edge. Torus grids have no edge; everything is interior.
    bool is_interior(std::int64_t s, int margin) const {
        if (spec.periodic()) return true;
        auto idx = multi_index(s);
        for (int a = 0; a < spec.dim; ++a)
            if (idx[a] < margin || idx[a] >= spec.resolution - margin) return false;
        return true;
    }

    /// Number of samples surviving an interior margin.
    std::int64_t interior_count(int margin) const {
        if (spec.periodic()) return num_samples;
        const std::int64_t w = spec.resolution - 2 * std::int64_t(margin);
        if (w <= 0) return 0;
        std::int64_t c = 1;
        for (int a = 0; a < spec.dim; ++a) c *= w;
        return c;
    }
};

}  // namespace riemlab
