#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "riemlab/core/grid.hpp"

namespace riemlab {

enum class Valence { scalar, one_form, sym2 };

inline const char* to_string(Valence v) {
    switch (v) {
        case Valence::scalar: return "scalar";
        case Valence::one_form: return "one_form";
        case Valence::sym2: return "sym2";
    }
    return "?";
}

inline int component_count(Valence v, int dim) {
    switch (v) {
        case Valence::scalar: return 1;
        case Valence::one_form: return dim;
        case Valence::sym2: return dim * (dim + 1) / 2;
    }
    return 0;
}

/// Packed index of the (i,j) entry of a symmetric matrix, i<=j row ordering:
/// n=3 -> (00,01,02,11,12,22).
inline int sym_index(int i, int j, int dim) {
    if (i > j) std::swap(i, j);
    return i * dim - i * (i - 1) / 2 + (j - i);
}

struct domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Component arrays over grid samples. `margin` counts edge cells (per axis,
/// open charts only) where values are not defined; those samples hold NaN so
/// accidental use is loud. Fields are value types; operations never mutate
/// their inputs.
struct TensorField {
    Valence valence = Valence::scalar;
    int dim = 0;
    std::uint64_t context_id = 0;
    int margin = 0;                 // invalid edge cells per axis (0 on torus)
    Eigen::MatrixXd data;           // num_samples x component_count

    TensorField() = default;
    TensorField(Valence v, int n, std::uint64_t ctx_id, std::int64_t num_samples, int mar = 0)
        : valence(v), dim(n), context_id(ctx_id), margin(mar),
          data(Eigen::MatrixXd::Zero(num_samples, component_count(v, n))) {}

    int components() const { return static_cast<int>(data.cols()); }
    std::int64_t samples() const { return data.rows(); }

    double& at(std::int64_t s, int c) { return data(s, c); }
    double at(std::int64_t s, int c) const { return data(s, c); }

    /// Symmetric-matrix view of a sym2 field at one sample.
    Eigen::MatrixXd sym_at(std::int64_t s) const {
        Eigen::MatrixXd m(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = i; j < dim; ++j) m(i, j) = m(j, i) = data(s, sym_index(i, j, dim));
        return m;
    }

    void set_sym_at(std::int64_t s, const Eigen::MatrixXd& m) {
        for (int i = 0; i < dim; ++i)
            for (int j = i; j < dim; ++j) data(s, sym_index(i, j, dim)) = 0.5 * (m(i, j) + m(j, i));
    }

    Eigen::VectorXd vec_at(std::int64_t s) const { return data.row(s).transpose(); }

    /// Marks every sample closer than `margin` cells to the grid edge invalid.
    void apply_margin(const Grid& grid, int new_margin) {
        if (grid.spec.periodic() || new_margin <= margin) return;
        margin = new_margin;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (std::int64_t s = 0; s < samples(); ++s)
            if (!grid.is_interior(s, margin)) data.row(s).setConstant(nan);
    }
};

inline void require_same_context(const TensorField& a, const TensorField& b) {
    if (a.context_id != b.context_id)
        throw std::invalid_argument("tensor fields belong to different manifold contexts");
}

inline TensorField linear_combination(double ca, const TensorField& a, double cb,
                                      const TensorField& b) {
    require_same_context(a, b);
    if (a.valence != b.valence) throw std::invalid_argument("valence mismatch");
    TensorField out = a;
    out.data = ca * a.data + cb * b.data;
    out.margin = std::max(a.margin, b.margin);
    return out;
}

}  // namespace riemlab
