#ifndef VCCNET_AUTODIFF_HPP
#define VCCNET_AUTODIFF_HPP

// Tape-free reverse-mode differentiation over dense row-major matrices.
//
// Every op returns a Var that owns its value and a closure propagating its
// gradient into its parents. Feature maps are stored as (B*H*W) x C matrices
// with rows in (batch, y, x) order; the spatial shape travels separately.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace vccnet::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Node {
    Matrix value;
    Matrix grad;  // empty until something flows into it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void accumulate(const Matrix& g);
    template <typename Derived>
    void accumulate_expr(const Eigen::MatrixBase<Derived>& g) {
        if (grad.size() == 0) {
            grad = g;
        } else {
            grad += g;
        }
    }
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Matrix& value() const { return node_->value; }
    Matrix& mutable_value() { return node_->value; }
    const Matrix& grad() const { return node_->grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double scalar() const { return node_->value(0, 0); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }

    /// Drops the accumulated gradient (parameters between steps).
    void zero_grad() { node_->grad.resize(0, 0); }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// While alive on a thread, ops on that thread record no graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

Var constant(Matrix value);
Var parameter(Matrix value);
Var scalar_constant(double v);

/// Seeds d(root)/d(root) = 1 and propagates through the recorded graph.
void backward(const Var& root);

// Elementwise and linear algebra.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_bias(const Var& x, const Var& bias);  // bias is 1 x C
Var relu(const Var& x);
Var gelu(const Var& x);
Var sigmoid(const Var& x);
Var concat_cols(const Var& a, const Var& b);
Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count);
Var concat_rows(std::span<const Var> parts);
Var detach(const Var& x);

// Reductions to 1x1.
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var add_scalars(std::span<const Var> parts);

/// out(r, k*C + c) = x(index(r, k), c), or 0 where index is negative.
Var gather_patches(const Var& x, const Eigen::MatrixXi& index);

/// Per-sample mean over consecutive groups of `group` rows.
Var group_mean_rows(const Var& x, Eigen::Index group);

/// Average over non-overlapping factor x factor blocks of a (B,H,W) grid.
Var block_mean(const Var& x, int batch, int height, int width, int factor);

/// Nearest-neighbour upsampling by an integer factor of a (B,H,W) grid.
Var upsample_nearest(const Var& x, int batch, int height, int width, int factor);

/// Row i becomes the elementwise max over j in neighbors[i] of x_j - x_i,
/// or zeros for a neighborless row. Indices are global row indices.
Var max_relative(const Var& x, const std::vector<std::vector<int>>& neighbors);

/// Batch normalisation with batch statistics over all rows. Writes the
/// biased batch mean and variance into the outputs for running-stat updates.
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps,
                     RowVector* batch_mean, RowVector* batch_var);

/// Batch normalisation with frozen statistics.
Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const Matrix& mean,
                    const Matrix& var, double eps);

/// Euclidean distances between all row pairs; the diagonal carries no gradient.
Var pairwise_distance(const Var& x);

/// (d - min) / (max - min) over all entries; zeros when max == min.
Var minmax_normalize(const Var& d);

// Losses (1x1 results).
Var mse(const Var& a, const Var& b);
Var log_softmax_rows(const Var& logits);
Var nll(const Var& log_probs, std::span<const int> labels);

/// Mean over samples of 1 - (2 sum(p y) + eps) / (sum p + sum y + eps),
/// p = sigmoid(logits). Rows are grouped per sample in blocks of `group`.
Var dice_loss(const Var& logits, const Matrix& targets, Eigen::Index group, double eps);

}  // namespace vccnet::ad

#endif  // VCCNET_AUTODIFF_HPP
