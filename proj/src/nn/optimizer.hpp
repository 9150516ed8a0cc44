#pragma once

#include <cmath>
#include <vector>

#include "nn/layers.hpp"

namespace caeloc::nn {

// Nesterov-accelerated Adam. One step updates every attached parameter:
//   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
//   p -= lr * (b1 * m/(1-b1^(t+1)) + (1-b1) * g/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
template <class T>
class Nadam {
public:
    explicit Nadam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-7)
        : lr_(T(lr)), b1_(T(beta1)), b2_(T(beta2)), eps_(T(eps)) {}

    void attach(const std::vector<ParamRef<T>>& params) {
        m_.clear();
        v_.clear();
        for (const auto& p : params) {
            m_.emplace_back(p.value->shape());
            v_.emplace_back(p.value->shape());
        }
        t_ = 0;
    }

    void step(const std::vector<ParamRef<T>>& params) {
        if (m_.size() != params.size()) raise(ErrorCode::state, "nadam: step before attach");
        ++t_;
        const T c1 = T(1) - std::pow(b1_, T(t_));
        const T c1_next = T(1) - std::pow(b1_, T(t_ + 1));
        const T c2 = T(1) - std::pow(b2_, T(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& p = *params[i].value;
            const Tensor<T>& g = *params[i].grad;
            if (!p.same_shape(g)) raise(ErrorCode::shape, "nadam: grad shape mismatch for " + params[i].name);
            Tensor<T>& m = m_[i];
            Tensor<T>& v = v_[i];
            for (size_t j = 0; j < p.size(); ++j) {
                T gj = g[j];
                if (!std::isfinite(double(gj))) {
                    raise(ErrorCode::numeric, "nadam: non-finite gradient in " + params[i].name);
                }
                m[j] = b1_ * m[j] + (T(1) - b1_) * gj;
                v[j] = b2_ * v[j] + (T(1) - b2_) * gj * gj;
                T lookahead = b1_ * (m[j] / c1_next) + (T(1) - b1_) * gj / c1;
                p[j] -= lr_ * lookahead / (std::sqrt(v[j] / c2) + eps_);
            }
        }
    }

    int64_t step_count() const { return t_; }
    T learning_rate() const { return lr_; }
    void set_learning_rate(T lr) { lr_ = lr; }

private:
    T lr_, b1_, b2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

} // namespace caeloc::nn
