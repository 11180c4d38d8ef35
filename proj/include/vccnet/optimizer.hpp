#ifndef VCCNET_OPTIMIZER_HPP
#define VCCNET_OPTIMIZER_HPP

#include "vccnet/layers.hpp"

#include <vector>

namespace vccnet {

/// Adaptive-moment optimiser with bias correction, constant learning rate.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// Applies one update from the accumulated gradients; parameters with no
    /// gradient this step are left untouched.
    void step(const ParamStore& store);

    long steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Matrix> m_, v_;
};

}  // namespace vccnet

#endif  // VCCNET_OPTIMIZER_HPP
