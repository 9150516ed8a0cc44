#pragma once

#include <cmath>
#include <vector>

#include "nn/tensor.hpp"

namespace caeloc::nn {

// Mean squared error over all elements.
template <class T>
T mse(const Tensor<T>& pred, const Tensor<T>& target) {
    if (!pred.same_shape(target)) raise(ErrorCode::shape, "mse: shape mismatch");
    T acc = T(0);
    for (size_t i = 0; i < pred.size(); ++i) {
        T d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / T(pred.size());
}

template <class T>
Tensor<T> mse_backward(const Tensor<T>& pred, const Tensor<T>& target) {
    Tensor<T> d(pred.shape());
    const T scale = T(2) / T(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) d[i] = scale * (pred[i] - target[i]);
    return d;
}

// Row-wise softmax via log-sum-exp.
template <class T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    if (logits.rank() != 2) raise(ErrorCode::shape, "softmax: expected (n, classes)");
    const int n = logits.dim(0), c = logits.dim(1);
    Tensor<T> probs({n, c});
    for (int r = 0; r < n; ++r) {
        const T* row = &logits.at(r, 0);
        T mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        T* prow = &probs.at(r, 0);
        for (int j = 0; j < c; ++j) {
            prow[j] = std::exp(row[j] - mx);
            sum += prow[j];
        }
        for (int j = 0; j < c; ++j) prow[j] /= sum;
    }
    return probs;
}

// Mean sparse categorical cross entropy, -ln softmax(logits)[label],
// with the log taken through log-sum-exp. Optionally emits the gradient
// w.r.t. the logits.
template <class T>
T sparse_cce(const Tensor<T>& logits, const std::vector<int>& labels, Tensor<T>* dlogits = nullptr) {
    if (logits.rank() != 2) raise(ErrorCode::shape, "sparse_cce: expected (n, classes)");
    const int n = logits.dim(0), c = logits.dim(1);
    if (int(labels.size()) != n) raise(ErrorCode::shape, "sparse_cce: label count mismatch");
    if (dlogits) dlogits->reshape({n, c});
    T total = T(0);
    for (int r = 0; r < n; ++r) {
        int y = labels[size_t(r)];
        if (y < 0 || y >= c) raise(ErrorCode::validation, "sparse_cce: label out of range");
        const T* row = &logits.at(r, 0);
        T mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        T sum = T(0);
        for (int j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
        T lse = mx + std::log(sum);
        total += lse - row[y];
        if (dlogits) {
            T* drow = &dlogits->at(r, 0);
            for (int j = 0; j < c; ++j) drow[j] = std::exp(row[j] - lse) / T(n);
            drow[y] -= T(1) / T(n);
        }
    }
    return total / T(n);
}

} // namespace caeloc::nn
