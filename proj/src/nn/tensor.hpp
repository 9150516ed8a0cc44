#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "error.hpp"

namespace caeloc::nn {

// Dense row-major tensor, rank 1..4. Image batches use (n, h, w, c),
// flat batches (n, len). float for training/inference, double for
// gradient checks.
template <class T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::initializer_list<int> dims) { reshape(dims); }

    explicit Tensor(const std::vector<int>& dims) { reshape(dims); }

    void reshape(const std::vector<int>& dims) {
        if (dims.empty() || dims.size() > 4) {
            raise(ErrorCode::shape, "tensor rank must be 1..4");
        }
        rank_ = int(dims.size());
        size_t n = 1;
        for (int i = 0; i < rank_; ++i) {
            if (dims[size_t(i)] <= 0) raise(ErrorCode::shape, "tensor dims must be positive");
            shape_[size_t(i)] = dims[size_t(i)];
            n *= size_t(dims[size_t(i)]);
        }
        for (int i = rank_; i < 4; ++i) shape_[size_t(i)] = 1;
        data_.assign(n, T(0));
    }

    void reshape(std::initializer_list<int> dims) { reshape(std::vector<int>(dims)); }

    // Reinterpret shape without touching storage.
    void view(const std::vector<int>& dims) {
        size_t n = 1;
        for (int d : dims) n *= size_t(d);
        if (n != data_.size()) raise(ErrorCode::shape, "view size mismatch");
        rank_ = int(dims.size());
        for (int i = 0; i < rank_; ++i) shape_[size_t(i)] = dims[size_t(i)];
        for (int i = rank_; i < 4; ++i) shape_[size_t(i)] = 1;
    }

    int rank() const { return rank_; }
    int dim(int i) const { return shape_[size_t(i)]; }
    std::vector<int> shape() const { return std::vector<int>(shape_.begin(), shape_.begin() + rank_); }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    // (n, h, w, c) indexing for rank-4 tensors.
    T& at(int n, int h, int w, int c) {
        return data_[((size_t(n) * shape_[1] + size_t(h)) * shape_[2] + size_t(w)) * shape_[3] + size_t(c)];
    }
    const T& at(int n, int h, int w, int c) const {
        return data_[((size_t(n) * shape_[1] + size_t(h)) * shape_[2] + size_t(w)) * shape_[3] + size_t(c)];
    }

    // (n, i) indexing for rank-2 tensors.
    T& at(int n, int i) { return data_[size_t(n) * shape_[1] + size_t(i)]; }
    const T& at(int n, int i) const { return data_[size_t(n) * shape_[1] + size_t(i)]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const {
        return rank_ == o.rank_ && shape_ == o.shape_;
    }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(double(v))) return false;
        }
        return true;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (int i = 0; i < rank_; ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[size_t(i)]);
        }
        return s + ")";
    }

private:
    std::array<int, 4> shape_{1, 1, 1, 1};
    int rank_ = 0;
    std::vector<T> data_;
};

} // namespace caeloc::nn
