#ifndef VCCNET_GRADCAM_HPP
#define VCCNET_GRADCAM_HPP

// Gradient-weighted class activation maps over the classifier's stages.

#include "vccnet/training.hpp"

namespace vccnet {

/// Bilinear resize with pixel-centre alignment (edges clamped).
Grid upsample_bilinear(const Grid& g, int out_height, int out_width);

/// ReLU(sum_c mean_i(grads[:, c]) * activations[:, c]) on the grid_h x grid_w
/// node grid, resized to out_h x out_w and rescaled to max 1 (all-zero stays zero).
Grid gradcam_from(const Matrix& activations, const Matrix& grads, int grid_height, int grid_width,
                  int out_height, int out_width);

/// Heat map for one image. layer_id indexes the classifier stages; -1 picks
/// the deepest. The classifier consumes the generator's p_soft, or
/// `attention` when given. Parameter gradients are cleared on return, so the
/// bundle must not be shared with a concurrent trainer or Grad-CAM call.
Grid gradcam(ModelBundle& bundle, const Grid& image, int target_class, int layer_id = -1,
             const Grid* attention = nullptr);

}  // namespace vccnet

#endif  // VCCNET_GRADCAM_HPP
