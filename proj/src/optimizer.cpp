#include "vccnet/optimizer.hpp"

#include <cmath>

namespace vccnet {

void Adam::step(const ParamStore& store) {
    const auto& params = store.parameters();
    if (m_.empty()) {
        for (const auto& [name, p] : params) {
            m_.push_back(Matrix::Zero(p.rows(), p.cols()));
            v_.push_back(Matrix::Zero(p.rows(), p.cols()));
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Var p = params[i].second;
        const Matrix& g = p.grad();
        if (g.size() == 0) continue;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
        p.mutable_value().array() -=
            lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

}  // namespace vccnet
