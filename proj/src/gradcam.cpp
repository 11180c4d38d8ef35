#include "vccnet/gradcam.hpp"

#include <algorithm>
#include <cmath>

namespace vccnet {

Grid upsample_bilinear(const Grid& g, int out_height, int out_width) {
    const Eigen::Index h = g.rows();
    const Eigen::Index w = g.cols();
    Grid out(out_height, out_width);
    const double sy = static_cast<double>(h) / out_height;
    const double sx = static_cast<double>(w) / out_width;
    for (int y = 0; y < out_height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
        const auto y0 = static_cast<Eigen::Index>(std::floor(fy));
        const Eigen::Index y1 = std::min(y0 + 1, h - 1);
        const double ty = fy - y0;
        for (int x = 0; x < out_width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            const auto x0 = static_cast<Eigen::Index>(std::floor(fx));
            const Eigen::Index x1 = std::min(x0 + 1, w - 1);
            const double tx = fx - x0;
            out(y, x) = (1 - ty) * ((1 - tx) * g(y0, x0) + tx * g(y0, x1)) +
                        ty * ((1 - tx) * g(y1, x0) + tx * g(y1, x1));
        }
    }
    return out;
}

Grid gradcam_from(const Matrix& activations, const Matrix& grads, int grid_height, int grid_width,
                  int out_height, int out_width) {
    const Eigen::Index n = static_cast<Eigen::Index>(grid_height) * grid_width;
    if (activations.rows() != n || grads.rows() != n || grads.cols() != activations.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "gradcam: activations and gradients must be N x C on the grid");
    }
    const Eigen::RowVectorXd weights = grads.colwise().mean();
    const Eigen::VectorXd cam = (activations * weights.transpose()).cwiseMax(0.0);
    Grid coarse(grid_height, grid_width);
    Eigen::Map<Eigen::VectorXd>(coarse.data(), n) = cam;
    Grid out = upsample_bilinear(coarse, out_height, out_width);
    const double peak = out.maxCoeff();
    if (peak > 0.0) {
        out /= peak;
    } else {
        out.setZero();
    }
    return out;
}

Grid gradcam(ModelBundle& bundle, const Grid& image, int target_class, int layer_id, const Grid* attention) {
    const VccConfig& vc = bundle.vcc.config();
    const int stages = vc.stage_count();
    if (layer_id == -1) layer_id = stages - 1;
    if (layer_id < 0 || layer_id >= stages) {
        throw Error(ErrorCode::BadLayer, "gradcam: layer id " + std::to_string(layer_id) + " is not a stage in [0, " +
                                             std::to_string(stages - 1) + "]");
    }
    if (target_class < 0 || target_class >= vc.num_classes) {
        throw Error(ErrorCode::Validation, "gradcam: target class out of range");
    }
    const Context ctx{false};
    const FeatureMap batch = image_batch({&image});
    Grid att;
    if (attention != nullptr) {
        att = *attention;
    } else if (bundle.config.use_vag) {
        ad::NoGradGuard no_grad;
        att = bundle.vag.forward(batch, ctx).soft_grid(0, batch.height, batch.width);
    } else {
        att = Grid::Zero(image.rows(), image.cols());
    }
    if (att.rows() != image.rows() || att.cols() != image.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "gradcam: attention must match the image size");
    }
    const Matrix att_col = Eigen::Map<const Matrix>(att.data(), att.size(), 1);
    const VccForward out = bundle.vcc.forward(batch, att_col, ctx);
    const FeatureMap& fm = out.stages[static_cast<std::size_t>(layer_id)];
    Var target = ad::slice_rows(out.logits, 0, 1);
    // Select the target logit as a 1x1 through a one-hot projection.
    Matrix onehot = Matrix::Zero(vc.num_classes, 1);
    onehot(target_class, 0) = 1.0;
    target = ad::matmul(target, ad::constant(onehot));
    ad::backward(target);
    Matrix grads = fm.data.grad();
    if (grads.size() == 0) grads = Matrix::Zero(fm.data.rows(), fm.data.cols());
    Grid heat = gradcam_from(fm.data.value(), grads, fm.height, fm.width, batch.height, batch.width);
    bundle.params.zero_grad();
    return heat;
}

}  // namespace vccnet
