#pragma once

#include <memory>
#include <vector>

#include "nn/layers.hpp"

namespace caeloc::nn {

// Linear chain of layers. Layers are shared pointers so networks can
// share sublayers (the auto-encoder and classifier share the encoder).
template <class T>
class Sequential {
public:
    Sequential() = default;
    explicit Sequential(std::vector<std::shared_ptr<Layer<T>>> layers) : layers_(std::move(layers)) {}

    void add(std::shared_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

    Tensor<T> forward(const Tensor<T>& in, Mode mode) {
        Tensor<T> x = in;
        for (auto& l : layers_) x = l->forward(x, mode);
        forwarded_ = true;
        return x;
    }

    // dloss is the gradient w.r.t. the network output; returns the
    // gradient w.r.t. the input. Parameter gradients land in the layers.
    Tensor<T> backward(const Tensor<T>& dloss) {
        if (!forwarded_) raise(ErrorCode::state, "network: backward before forward");
        Tensor<T> d = dloss;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
        return d;
    }

    std::vector<ParamRef<T>> params() const {
        std::vector<ParamRef<T>> out;
        for (auto& l : layers_) l->collect_params(out);
        return out;
    }

    std::vector<int> out_shape(std::vector<int> shape) const {
        for (auto& l : layers_) shape = l->out_shape(shape);
        return shape;
    }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& p : params()) n += p.value->size();
        return n;
    }

    const std::vector<std::shared_ptr<Layer<T>>>& layers() const { return layers_; }

private:
    std::vector<std::shared_ptr<Layer<T>>> layers_;
    bool forwarded_ = false;
};

} // namespace caeloc::nn
