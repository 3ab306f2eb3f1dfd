#include "uprompt/adam.hpp"

#include <algorithm>
#include <cmath>

namespace uprompt {

template <class T>
Adam<T>::Adam(std::vector<Tensor<T>> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    if (params_.empty()) {
        throw ConfigError("optimizer needs at least one parameter");
    }
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& p : params_) {
        if (!p.trainable()) {
            throw ConfigError("optimizer given a parameter not marked trainable");
        }
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

template <class T>
void Adam<T>::step() {
    ++t_;
    double norm_sq = 0.0;
    for (auto& p : params_) {
        for (T g : p.grad()) {
            norm_sq += static_cast<double>(g) * static_cast<double>(g);
        }
    }
    last_norm_ = std::sqrt(norm_sq);
    double grad_scale = 1.0;
    if (cfg_.clip_norm > 0.0 && last_norm_ > cfg_.clip_norm) {
        grad_scale = cfg_.clip_norm / last_norm_;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& p = params_[pi];
        auto& values = p.values();
        const auto& grad = p.grad();
        if (grad.size() != values.size()) {
            continue;  // no backward pass reached this parameter yet
        }
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = static_cast<double>(grad[i]) * grad_scale;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            double x = static_cast<double>(values[i]);
            x -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            if (cfg_.weight_decay > 0.0) {
                x -= cfg_.lr * cfg_.weight_decay * static_cast<double>(values[i]);
            }
            values[i] = static_cast<T>(x);
        }
    }
}

template <class T>
void Adam<T>::zero_grad() {
    for (auto& p : params_) {
        std::fill(p.grad().begin(), p.grad().end(), T(0));
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace uprompt
