#pragma once

#include <complex>
#include <random>

#include "riemlab/core/context.hpp"

namespace riemlab {

/// Default bandwidth of seeded random fields: resolution/4, at least 1.
inline int default_bandwidth(const ManifoldContext& ctx) {
    return std::max(1, ctx.grid().res() / 4);
}

/// Lexicographically positive representative test for conjugate-symmetric
/// spectra: k is a representative when its first nonzero entry is positive.
inline bool wavevector_is_positive(const std::array<int, kMaxDim>& k, int dim) {
    for (int a = 0; a < dim; ++a) {
        if (k[a] > 0) return true;
        if (k[a] < 0) return false;
    }
    return false;  // k == 0 handled separately
}

/// Seeded band-limited random field. On the torus this is an exact Fourier
/// series with |k|_inf <= bandwidth and unit-scale coefficients; on open
/// charts a trigonometric polynomial in box coordinates of the same
/// bandwidth. Deterministic: coefficients are drawn in a fixed mode order,
/// independent of threading.
inline TensorField random_band_limited(const ManifoldContext& ctx, Valence v,
                                       std::uint64_t seed, int bandwidth = -1) {
    if (bandwidth < 0) bandwidth = default_bandwidth(ctx);
    const int n = ctx.dim();
    const int C = component_count(v, n);
    TensorField out = ctx.make_field(v);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);

    if (ctx.spec().periodic()) {
        FourierTransform ft(ctx.grid());
        Eigen::MatrixXcd coeffs = Eigen::MatrixXcd::Zero(ctx.samples(), C);
        int modes = 0;
        for (std::int64_t s = 0; s < ctx.samples(); ++s) {
            auto k = ft.wavevector(s);
            bool in_band = true;
            for (int a = 0; a < n; ++a) in_band = in_band && std::abs(k[a]) <= bandwidth;
            if (!in_band) continue;
            bool zero = true;
            for (int a = 0; a < n; ++a) zero = zero && k[a] == 0;
            if (zero) {
                for (int c = 0; c < C; ++c) coeffs(s, c) = gauss(rng);
                ++modes;
            } else if (wavevector_is_positive(k, n)) {
                std::array<int, kMaxDim> mk{};
                for (int a = 0; a < n; ++a) mk[a] = -k[a];
                const std::int64_t sm = ft.bin(mk);
                for (int c = 0; c < C; ++c) {
                    const std::complex<double> z(gauss(rng), gauss(rng));
                    coeffs(s, c) = z;
                    coeffs(sm, c) = std::conj(z);
                }
                ++modes;
            }
        }
        const double scale = 1.0 / std::sqrt(double(std::max(1, modes)));
        for (int c = 0; c < C; ++c)
            out.data.col(c) = scale * ft.inverse(coeffs.col(c));
        return out;
    }

    // open chart: low-order trigonometric polynomial in box coordinates
    const int B = std::min(bandwidth, 3);
    struct Mode {
        std::array<int, kMaxDim> m;
        std::array<double, kMaxDim> phase;
        double amp;
    };
    std::vector<std::vector<Mode>> comp_modes(C);
    int total = 0;
    std::array<int, kMaxDim> m{};
    std::function<void(int)> enumerate = [&](int axis) {
        if (axis == n) {
            for (int c = 0; c < C; ++c) {
                Mode mode;
                mode.m = m;
                for (int a = 0; a < n; ++a) mode.phase[a] = 2.0 * M_PI *
                    std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                mode.amp = gauss(rng);
                comp_modes[c].push_back(mode);
            }
            ++total;
            return;
        }
        for (int f = 0; f <= B; ++f) {
            m[axis] = f;
            enumerate(axis + 1);
        }
    };
    enumerate(0);
    const double scale = 1.0 / std::sqrt(double(std::max(1, total)));
    parallel_for(static_cast<std::size_t>(ctx.samples()), [&](std::size_t s) {
        auto x = ctx.grid().coords(static_cast<std::int64_t>(s));
        for (int c = 0; c < C; ++c) {
            double acc = 0;
            for (const auto& mode : comp_modes[c]) {
                double term = mode.amp;
                for (int a = 0; a < n; ++a) {
                    const double t = (x[a] - ctx.grid().lo[a]) /
                                     (ctx.grid().dx[a] * (ctx.grid().res() - 1));
                    term *= std::cos(M_PI * mode.m[a] * t + mode.phase[a]);
                }
                acc += term;
            }
            out.at(s, c) = scale * acc;
        }
    });
    return out;
}

}  // namespace riemlab
