#include "vccnet/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace vccnet {

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = dist(rng);
        }
    }
    return m;
}

}  // namespace

void ParamStore::zero_grad() {
    for (auto& [name, v] : params_) {
        v.zero_grad();
    }
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : params_) {
        n += static_cast<std::size_t>(v.value().size());
    }
    return n;
}

Linear::Linear(int in, int out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = ad::parameter(uniform(in, out, bound, rng));
    bias = ad::parameter(uniform(1, out, bound, rng));
}

Var Linear::forward(const Var& x) const { return ad::add_bias(ad::matmul(x, weight), bias); }

void Linear::register_params(ParamStore& store, const std::string& prefix) const {
    store.add_parameter(prefix + ".weight", weight);
    store.add_parameter(prefix + ".bias", bias);
}

Eigen::MatrixXi conv3x3_index(int batch, int height, int width, int stride) {
    const int oh = (height - 1) / stride + 1;
    const int ow = (width - 1) / stride + 1;
    Eigen::MatrixXi index(static_cast<Eigen::Index>(batch) * oh * ow, 9);
    for (int b = 0; b < batch; ++b) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const Eigen::Index row = (static_cast<Eigen::Index>(b) * oh + y) * ow + x;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sy = y * stride + ky - 1;
                        const int sx = x * stride + kx - 1;
                        const bool inside = sy >= 0 && sy < height && sx >= 0 && sx < width;
                        index(row, ky * 3 + kx) = inside ? (b * height + sy) * width + sx : -1;
                    }
                }
            }
        }
    }
    return index;
}

Conv3x3::Conv3x3(int in, int out, int stride_, Rng& rng) : stride(stride_) {
    const double bound = 1.0 / std::sqrt(9.0 * in);
    weight = ad::parameter(uniform(9 * in, out, bound, rng));
    bias = ad::parameter(uniform(1, out, bound, rng));
}

FeatureMap Conv3x3::forward(const FeatureMap& x) const {
    if (x.channels() * 9 != weight.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "conv3x3: channel mismatch");
    }
    const auto index = conv3x3_index(x.batch, x.height, x.width, stride);
    Var cols = ad::gather_patches(x.data, index);
    FeatureMap out;
    out.data = ad::add_bias(ad::matmul(cols, weight), bias);
    out.batch = x.batch;
    out.height = (x.height - 1) / stride + 1;
    out.width = (x.width - 1) / stride + 1;
    return out;
}

void Conv3x3::register_params(ParamStore& store, const std::string& prefix) const {
    store.add_parameter(prefix + ".weight", weight);
    store.add_parameter(prefix + ".bias", bias);
}

BatchNorm::BatchNorm(int channels) {
    gamma = ad::parameter(Matrix::Ones(1, channels));
    beta = ad::parameter(Matrix::Zero(1, channels));
    running_mean = ad::constant(Matrix::Zero(1, channels));
    running_var = ad::constant(Matrix::Ones(1, channels));
}

Var BatchNorm::forward(const Var& x, const Context& ctx) const {
    if (ctx.training) {
        ad::RowVector mean, var;
        Var out = ad::batch_norm_train(x, gamma, beta, eps, &mean, &var);
        const double n = static_cast<double>(x.rows());
        const double unbias = n > 1 ? n / (n - 1.0) : 1.0;
        auto rm = running_mean;
        auto rv = running_var;
        rm.mutable_value() = (1.0 - momentum) * rm.value() + momentum * mean;
        rv.mutable_value() = (1.0 - momentum) * rv.value() + momentum * unbias * var;
        return out;
    }
    return ad::batch_norm_eval(x, gamma, beta, running_mean.value(), running_var.value(), eps);
}

void BatchNorm::register_params(ParamStore& store, const std::string& prefix) const {
    store.add_parameter(prefix + ".gamma", gamma);
    store.add_parameter(prefix + ".beta", beta);
    store.add_buffer(prefix + ".running_mean", running_mean);
    store.add_buffer(prefix + ".running_var", running_var);
}

ConvBnAct::ConvBnAct(int in, int out, int stride, bool relu_, Rng& rng)
    : conv(in, out, stride, rng), norm(out), relu(relu_) {}

FeatureMap ConvBnAct::forward(const FeatureMap& x, const Context& ctx) const {
    FeatureMap y = conv.forward(x);
    y.data = norm.forward(y.data, ctx);
    if (relu) {
        y.data = ad::relu(y.data);
    }
    return y;
}

void ConvBnAct::register_params(ParamStore& store, const std::string& prefix) const {
    conv.register_params(store, prefix + ".conv");
    norm.register_params(store, prefix + ".bn");
}

MaxRelativeGraphConv::MaxRelativeGraphConv(int channels, Rng& rng) : mix(2 * channels, channels, rng) {}

Var MaxRelativeGraphConv::forward(const Var& x, const Neighborhood& neighbors) const {
    Var relative = ad::max_relative(x, neighbors);
    return mix.forward(ad::concat_cols(x, relative));
}

void MaxRelativeGraphConv::register_params(ParamStore& store, const std::string& prefix) const {
    mix.register_params(store, prefix + ".mix");
}

GnnBlock::GnnBlock(int channels, Rng& rng)
    : fc1(channels, channels, rng),
      fc2(channels, channels, rng),
      fc3(channels, 2 * channels, rng),
      fc4(2 * channels, channels, rng),
      gc(channels, rng) {}

Var GnnBlock::forward(const Var& x, const Neighborhood& neighbors) const {
    Var h = ad::gelu(fc1.forward(x));
    Var x1 = ad::add(fc2.forward(gc.forward(h, neighbors)), x);
    Var f = ad::gelu(fc3.forward(x1));
    return ad::add(fc4.forward(f), x1);
}

void GnnBlock::register_params(ParamStore& store, const std::string& prefix) const {
    fc1.register_params(store, prefix + ".fc1");
    gc.register_params(store, prefix + ".gc");
    fc2.register_params(store, prefix + ".fc2");
    fc3.register_params(store, prefix + ".fc3");
    fc4.register_params(store, prefix + ".fc4");
}

CnnBlock::CnnBlock(int channels, Rng& rng)
    : conv1(channels, channels, 1, true, rng), conv2(channels, channels, 1, true, rng) {}

FeatureMap CnnBlock::forward(const FeatureMap& x, const Context& ctx) const {
    FeatureMap z = conv2.forward(conv1.forward(x, ctx), ctx);
    z.data = ad::add(z.data, x.data);
    return z;
}

void CnnBlock::register_params(ParamStore& store, const std::string& prefix) const {
    conv1.register_params(store, prefix + ".conv1");
    conv2.register_params(store, prefix + ".conv2");
}

Stem::Stem(int channels, Rng& rng)
    : full(1, std::max(channels / 2, 1), 1, true, rng),
      half(std::max(channels / 2, 1), std::max(channels / 2, 1), 2, true, rng),
      quarter(std::max(channels / 2, 1), channels, 2, false, rng) {}

std::pair<FeatureMap, FeatureMap> Stem::forward(const FeatureMap& image, const Context& ctx) const {
    FeatureMap f = full.forward(image, ctx);
    FeatureMap q = quarter.forward(half.forward(f, ctx), ctx);
    return {q, f};
}

void Stem::register_params(ParamStore& store, const std::string& prefix) const {
    full.register_params(store, prefix + ".full");
    half.register_params(store, prefix + ".half");
    quarter.register_params(store, prefix + ".quarter");
}

void append_offset(Neighborhood& global, const Neighborhood& local, int offset) {
    for (const auto& list : local) {
        std::vector<int> shifted(list.size());
        for (std::size_t i = 0; i < list.size(); ++i) {
            shifted[i] = list[i] + offset;
        }
        global.push_back(std::move(shifted));
    }
}

Neighborhood feature_knn(const FeatureMap& x, int k) {
    const int n = x.nodes_per_sample();
    const int keff = effective_k(k, n);
    Neighborhood global;
    global.reserve(static_cast<std::size_t>(x.batch) * n);
    for (int b = 0; b < x.batch; ++b) {
        if (keff == 0) {
            global.insert(global.end(), static_cast<std::size_t>(n), {});
            continue;
        }
        const auto rows = x.data.value().middleRows(static_cast<Eigen::Index>(b) * n, n);
        const auto d = pairwise_feature_distance(rows);
        append_offset(global, knn_edges(d, keff), b * n);
    }
    return global;
}

FeatureMap image_batch(const std::vector<const Matrix*>& images) {
    if (images.empty()) {
        throw Error(ErrorCode::ShapeMismatch, "image_batch: empty batch");
    }
    const auto h = static_cast<int>(images.front()->rows());
    const auto w = static_cast<int>(images.front()->cols());
    Matrix data(static_cast<Eigen::Index>(images.size()) * h * w, 1);
    for (std::size_t b = 0; b < images.size(); ++b) {
        if (images[b]->rows() != h || images[b]->cols() != w) {
            throw Error(ErrorCode::ShapeMismatch, "image_batch: images differ in size");
        }
        data.middleRows(static_cast<Eigen::Index>(b) * h * w, h * w) =
            Eigen::Map<const Matrix>(images[b]->data(), h * w, 1);
    }
    return {ad::constant(std::move(data)), static_cast<int>(images.size()), h, w};
}

}  // namespace vccnet
