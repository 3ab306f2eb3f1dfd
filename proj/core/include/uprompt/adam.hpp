#pragma once

#include <vector>

#include "uprompt/tensor.hpp"

namespace uprompt {

struct AdamConfig {
    double lr = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    /// Decoupled weight decay; 0 disables.
    double weight_decay = 0.0;
    /// Global-norm gradient clip; 0 disables.
    double clip_norm = 0.0;
};

/// Adam with bias correction. Moment buffers are kept in double regardless of
/// the parameter scalar type so float training stays well conditioned.
template <class T>
class Adam {
public:
    Adam(std::vector<Tensor<T>> params, AdamConfig cfg = {});

    /// Applies one update from the gradients currently on the parameters.
    void step();
    void zero_grad();

    long step_count() const { return t_; }
    /// Pre-clip global gradient norm of the most recent step().
    double last_grad_norm() const { return last_norm_; }
    const std::vector<Tensor<T>>& params() const { return params_; }

private:
    std::vector<Tensor<T>> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long t_ = 0;
    double last_norm_ = 0.0;
};

}  // namespace uprompt
