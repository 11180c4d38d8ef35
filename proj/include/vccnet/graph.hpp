#ifndef VCCNET_GRAPH_HPP
#define VCCNET_GRAPH_HPP

// Distance matrices and k-NN graph construction over patch nodes.
//
// Everything here is a pure function over Eigen expressions and templated on
// the scalar type; the differentiable counterparts used during training live
// in autodiff.hpp.

#include "vccnet/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace vccnet {

enum class DistanceSpace { feature, visual, fused };

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct DistanceMatrix {
    DenseMatrix<Scalar> values;
    DistanceSpace space = DistanceSpace::feature;

    Eigen::Index size() const { return values.rows(); }
};

/// Per node, the indices of its k nearest other nodes, nearest first.
using Neighborhood = std::vector<std::vector<int>>;

template <typename Scalar>
struct PatchGraph {
    DenseMatrix<Scalar> features;  // N x C
    int grid_height = 0;
    int grid_width = 0;
    Neighborhood neighbors;
    int k = 0;
};

inline const char* distance_space_name(DistanceSpace s) {
    switch (s) {
        case DistanceSpace::feature: return "feature";
        case DistanceSpace::visual: return "visual";
        case DistanceSpace::fused: return "fused";
    }
    return "feature";
}

inline DistanceSpace parse_distance_space(const std::string& name) {
    if (name == "feature") return DistanceSpace::feature;
    if (name == "visual") return DistanceSpace::visual;
    if (name == "fused") return DistanceSpace::fused;
    throw Error(ErrorCode::Validation, "unknown distance space \"" + name + "\"");
}

/// Euclidean distance between every pair of rows.
template <typename Derived>
DistanceMatrix<typename Derived::Scalar> pairwise_feature_distance(
    const Eigen::MatrixBase<Derived>& features) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = features.rows();
    DistanceMatrix<Scalar> out{DenseMatrix<Scalar>::Zero(n, n), DistanceSpace::feature};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const Scalar d = (features.row(i) - features.row(j)).norm();
            out.values(i, j) = d;
            out.values(j, i) = d;
        }
    }
    return out;
}

/// |a_i - a_j| for a per-node scalar attention vector.
template <typename Derived>
DistanceMatrix<typename Derived::Scalar> pairwise_attention_distance(
    const Eigen::MatrixBase<Derived>& attention) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = attention.size();
    DistanceMatrix<Scalar> out{DenseMatrix<Scalar>(n, n), DistanceSpace::visual};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out.values(i, j) = std::abs(attention(i) - attention(j));
        }
    }
    return out;
}

/// Rescales to [0,1]; a constant matrix maps to all zeros.
template <typename Scalar>
DistanceMatrix<Scalar> minmax_normalize(const DistanceMatrix<Scalar>& d) {
    DistanceMatrix<Scalar> out{DenseMatrix<Scalar>::Zero(d.values.rows(), d.values.cols()), d.space};
    if (d.values.size() == 0) {
        return out;
    }
    const Scalar lo = d.values.minCoeff();
    const Scalar hi = d.values.maxCoeff();
    if (hi > lo) {
        out.values = (d.values.array() - lo) / (hi - lo);
    }
    return out;
}

/// Rounds every entry to single precision (identity for float matrices).
template <typename Scalar>
DenseMatrix<Scalar> round_to_single(const DenseMatrix<Scalar>& m) {
    return m.unaryExpr([](Scalar v) { return static_cast<Scalar>(static_cast<float>(v)); });
}

/// D-hat_a: min-max normalised |a_i - a_j|, rounded to single precision.
/// Positive rescaling of a non-constant `attention` leaves it bitwise
/// unchanged unless a value lands within a few ulps of a float rounding tie.
template <typename Derived>
DistanceMatrix<typename Derived::Scalar> normalized_attention_distance(
    const Eigen::MatrixBase<Derived>& attention) {
    auto d = minmax_normalize(pairwise_attention_distance(attention));
    d.values = round_to_single(d.values);
    return d;
}

/// df + alpha * da, both expected min-max normalised.
template <typename Scalar>
DistanceMatrix<Scalar> fuse_distances(const DistanceMatrix<Scalar>& df,
                                      const DistanceMatrix<Scalar>& da, Scalar alpha) {
    if (df.values.rows() != da.values.rows() || df.values.cols() != da.values.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "fuse_distances: matrices differ in shape");
    }
    return {df.values + alpha * da.values, DistanceSpace::fused};
}

/// k nearest other nodes per row of a distance matrix; ties go to the
/// smaller index.
template <typename Scalar>
Neighborhood knn_edges(const DistanceMatrix<Scalar>& d, int k) {
    const Eigen::Index n = d.values.rows();
    if (k < 1 || k > n - 1) {
        throw Error(ErrorCode::KTooLarge,
                    "knn_edges: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(n - 1) + "]");
    }
    Neighborhood out(static_cast<std::size_t>(n));
    std::vector<int> candidates;
    candidates.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        candidates.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) candidates.push_back(static_cast<int>(j));
        }
        const auto closer = [&](int a, int b) {
            const Scalar da = d.values(i, a);
            const Scalar db = d.values(i, b);
            return da < db || (da == db && a < b);
        };
        std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(), closer);
        out[static_cast<std::size_t>(i)].assign(candidates.begin(), candidates.begin() + k);
    }
    return out;
}

/// Mean squared difference of two equally shaped matrices.
template <typename Scalar>
Scalar alignment_loss(const DistanceMatrix<Scalar>& df_hat, const DistanceMatrix<Scalar>& da_hat) {
    if (df_hat.values.rows() != da_hat.values.rows() || df_hat.values.cols() != da_hat.values.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "alignment_loss: matrices differ in shape");
    }
    if (df_hat.values.size() == 0) {
        return Scalar(0);
    }
    return (df_hat.values - da_hat.values).squaredNorm() / static_cast<Scalar>(df_hat.values.size());
}

/// Clamps a requested neighbour count to what an n-node graph can hold.
inline int effective_k(int requested, Eigen::Index n) {
    return static_cast<int>(std::min<Eigen::Index>(requested, std::max<Eigen::Index>(n - 1, 0)));
}

}  // namespace vccnet

#endif  // VCCNET_GRAPH_HPP
