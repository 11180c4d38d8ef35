#ifndef VCCNET_LAYERS_HPP
#define VCCNET_LAYERS_HPP

// Parameterised building blocks shared by the attention generator and the
// classifier: affine maps, 3x3 convolutions, batch norm, the max-relative
// graph convolution and the residual GNN / CNN blocks built from them.

#include "vccnet/autodiff.hpp"
#include "vccnet/graph.hpp"
#include "vccnet/grid_io.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace vccnet {

using ad::Matrix;
using ad::Var;

/// A batch of spatial feature grids, stored as (batch*height*width) x C.
struct FeatureMap {
    Var data;
    int batch = 0;
    int height = 0;
    int width = 0;

    int nodes_per_sample() const { return height * width; }
    Eigen::Index channels() const { return data.cols(); }
};

/// Named trainable parameters and persistent buffers (batch-norm running
/// statistics) of a model. Entries alias the layers' own nodes.
class ParamStore {
public:
    void add_parameter(std::string name, Var v) { params_.emplace_back(std::move(name), std::move(v)); }
    void add_buffer(std::string name, Var v) { buffers_.emplace_back(std::move(name), std::move(v)); }

    const std::vector<std::pair<std::string, Var>>& parameters() const { return params_; }
    const std::vector<std::pair<std::string, Var>>& buffers() const { return buffers_; }

    void zero_grad();
    std::size_t parameter_count() const;

private:
    std::vector<std::pair<std::string, Var>> params_;
    std::vector<std::pair<std::string, Var>> buffers_;
};

struct Context {
    bool training = true;
};

using Rng = std::mt19937_64;

class Linear {
public:
    Linear() = default;
    Linear(int in, int out, Rng& rng);

    Var forward(const Var& x) const;
    void register_params(ParamStore& store, const std::string& prefix) const;

    Var weight;  // in x out
    Var bias;    // 1 x out
};

/// 3x3 convolution with padding 1.
class Conv3x3 {
public:
    Conv3x3() = default;
    Conv3x3(int in, int out, int stride, Rng& rng);

    FeatureMap forward(const FeatureMap& x) const;
    void register_params(ParamStore& store, const std::string& prefix) const;

    Var weight;  // 9*in x out, tap-major (ky, kx) then input channel
    Var bias;
    int stride = 1;
};

/// Row indices of the 3x3, padding-1 receptive field of every output cell,
/// -1 for taps falling in the padding.
Eigen::MatrixXi conv3x3_index(int batch, int height, int width, int stride);

class BatchNorm {
public:
    BatchNorm() = default;
    explicit BatchNorm(int channels);

    Var forward(const Var& x, const Context& ctx) const;
    void register_params(ParamStore& store, const std::string& prefix) const;

    Var gamma;
    Var beta;
    Var running_mean;  // buffers, updated in training mode
    Var running_var;
    double momentum = 0.1;
    double eps = 1e-5;
};

/// 3x3 conv -> batch norm -> optional ReLU.
class ConvBnAct {
public:
    ConvBnAct() = default;
    ConvBnAct(int in, int out, int stride, bool relu, Rng& rng);

    FeatureMap forward(const FeatureMap& x, const Context& ctx) const;
    void register_params(ParamStore& store, const std::string& prefix) const;

    Conv3x3 conv;
    BatchNorm norm;
    bool relu = true;
};

/// Max-relative graph convolution: linear map of concat(x_i, max_j (x_j - x_i)).
class MaxRelativeGraphConv {
public:
    MaxRelativeGraphConv() = default;
    MaxRelativeGraphConv(int channels, Rng& rng);

    Var forward(const Var& x, const Neighborhood& neighbors) const;
    void register_params(ParamStore& store, const std::string& prefix) const;

    Linear mix;  // 2C -> C
};

/// X1 = FC2(GC(FC1(X))) + X ; Y = FC4(FC3(X1)) + X1 with GELU on FC1 and FC3.
class GnnBlock {
public:
    GnnBlock() = default;
    GnnBlock(int channels, Rng& rng);

    Var forward(const Var& x, const Neighborhood& neighbors) const;
    void register_params(ParamStore& store, const std::string& prefix) const;

    Linear fc1, fc2, fc3, fc4;
    MaxRelativeGraphConv gc;
};

/// Z = Conv2(Conv1(Y)) + Y, each Conv being 3x3 conv -> BN -> ReLU.
class CnnBlock {
public:
    CnnBlock() = default;
    CnnBlock(int channels, Rng& rng);

    FeatureMap forward(const FeatureMap& x, const Context& ctx) const;
    void register_params(ParamStore& store, const std::string& prefix) const;

    ConvBnAct conv1, conv2;
};

/// Image (1 channel) to an H/4 x W/4 x C grid; also exposes the
/// full-resolution first activation for a decoder skip.
class Stem {
public:
    Stem() = default;
    Stem(int channels, Rng& rng);

    std::pair<FeatureMap, FeatureMap> forward(const FeatureMap& image, const Context& ctx) const;
    void register_params(ParamStore& store, const std::string& prefix) const;

    ConvBnAct full, half, quarter;
};

/// Per-sample k-NN on Euclidean feature distance, returned in global
/// row indices. k is clamped to nodes-1.
Neighborhood feature_knn(const FeatureMap& x, int k);

/// Offsets per-sample neighbour lists into global row indices.
void append_offset(Neighborhood& global, const Neighborhood& local, int offset);

/// Image batch as a FeatureMap of one channel.
FeatureMap image_batch(const std::vector<const Matrix*>& images);

}  // namespace vccnet

#endif  // VCCNET_LAYERS_HPP
