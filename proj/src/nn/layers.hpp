#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "nn/gemm.hpp"
#include "nn/rng.hpp"
#include "nn/tensor.hpp"

namespace caeloc::nn {

enum class Mode { train, infer };

template <class T>
struct ParamRef {
    Tensor<T>* value;
    Tensor<T>* grad;
    std::string name;
};

template <class T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual const char* kind() const = 0;
    virtual Tensor<T> forward(const Tensor<T>& in, Mode mode) = 0;
    virtual Tensor<T> backward(const Tensor<T>& dout) = 0;
    virtual void collect_params(std::vector<ParamRef<T>>&) {}
    // Shape algebra on (n, ...) shapes, usable before any forward pass.
    virtual std::vector<int> out_shape(const std::vector<int>& in) const { return in; }

protected:
    void require_forwarded(bool forwarded) const {
        if (!forwarded) raise(ErrorCode::state, std::string(kind_name()) + ": backward before forward");
    }
    virtual const char* kind_name() const { return "layer"; }
};

inline void he_uniform_fill(Tensor<float>& w, int fan_in, Rng& rng) {
    double limit = std::sqrt(6.0 / double(fan_in));
    for (size_t i = 0; i < w.size(); ++i) w[i] = float(rng.uniform(-limit, limit));
}
inline void he_uniform_fill(Tensor<double>& w, int fan_in, Rng& rng) {
    double limit = std::sqrt(6.0 / double(fan_in));
    for (size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
}

// Valid (unpadded) cross-correlation, weights laid out (ky, kx, cin, cout)
// so the output-channel loop is contiguous.
template <class T>
class Conv2D : public Layer<T> {
public:
    Conv2D(int cin, int cout, int kernel, int stride, Rng& rng)
        : cin_(cin), cout_(cout), k_(kernel), stride_(stride) {
        if (kernel <= 0 || stride <= 0) raise(ErrorCode::config, "conv2d: kernel and stride must be positive");
        w_.reshape({k_, k_, cin_, cout_});
        b_.reshape({cout_});
        dw_.reshape({k_, k_, cin_, cout_});
        db_.reshape({cout_});
        he_uniform_fill(w_, k_ * k_ * cin_, rng);
    }

    const char* kind() const override { return "conv2d"; }

    std::vector<int> out_shape(const std::vector<int>& in) const override {
        check_input_shape(in);
        return {in[0], (in[1] - k_) / stride_ + 1, (in[2] - k_) / stride_ + 1, cout_};
    }

    Tensor<T> forward(const Tensor<T>& in, Mode) override {
        check_input_shape(in.shape());
        in_ = in;
        const int n = in.dim(0), oh = (in.dim(1) - k_) / stride_ + 1, ow = (in.dim(2) - k_) / stride_ + 1;
        Tensor<T> out({n, oh, ow, cout_});
        std::vector<T> acc(size_t(cout_), T(0));
        for (int b = 0; b < n; ++b) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    for (int co = 0; co < cout_; ++co) acc[size_t(co)] = b_[size_t(co)];
                    for (int ky = 0; ky < k_; ++ky) {
                        for (int kx = 0; kx < k_; ++kx) {
                            const T* irow = &in.at(b, oy * stride_ + ky, ox * stride_ + kx, 0);
                            const T* wrow = w_.data() + (size_t(ky) * k_ + kx) * cin_ * cout_;
                            for (int ci = 0; ci < cin_; ++ci) {
                                T a = irow[ci];
                                const T* wc = wrow + size_t(ci) * cout_;
                                for (int co = 0; co < cout_; ++co) acc[size_t(co)] += a * wc[co];
                            }
                        }
                    }
                    std::copy(acc.begin(), acc.end(), &out.at(b, oy, ox, 0));
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(!in_.empty());
        const int n = in_.dim(0), oh = dout.dim(1), ow = dout.dim(2);
        dw_.fill(T(0));
        db_.fill(T(0));
        Tensor<T> din(in_.shape());
        for (int b = 0; b < n; ++b) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const T* dorow = &dout.at(b, oy, ox, 0);
                    for (int co = 0; co < cout_; ++co) db_[size_t(co)] += dorow[co];
                    for (int ky = 0; ky < k_; ++ky) {
                        for (int kx = 0; kx < k_; ++kx) {
                            const int iy = oy * stride_ + ky, ix = ox * stride_ + kx;
                            const T* irow = &in_.at(b, iy, ix, 0);
                            T* dirow = &din.at(b, iy, ix, 0);
                            size_t off = (size_t(ky) * k_ + kx) * cin_ * cout_;
                            const T* wrow = w_.data() + off;
                            T* dwrow = dw_.data() + off;
                            for (int ci = 0; ci < cin_; ++ci) {
                                T a = irow[ci];
                                const T* wc = wrow + size_t(ci) * cout_;
                                T* dwc = dwrow + size_t(ci) * cout_;
                                T acc = T(0);
                                for (int co = 0; co < cout_; ++co) {
                                    T d = dorow[co];
                                    dwc[co] += a * d;
                                    acc += wc[co] * d;
                                }
                                dirow[ci] += acc;
                            }
                        }
                    }
                }
            }
        }
        return din;
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({&w_, &dw_, "w"});
        out.push_back({&b_, &db_, "b"});
    }

    Tensor<T>& weights() { return w_; }
    Tensor<T>& bias() { return b_; }
    int in_channels() const { return cin_; }
    int out_channels() const { return cout_; }
    int kernel() const { return k_; }
    int stride() const { return stride_; }

protected:
    const char* kind_name() const override { return "conv2d"; }

private:
    void check_input_shape(const std::vector<int>& s) const {
        if (s.size() != 4) raise(ErrorCode::shape, "conv2d: expected (n,h,w,c) input");
        if (s[3] != cin_) raise(ErrorCode::shape, "conv2d: channel mismatch");
        if (s[1] < k_ || s[2] < k_) raise(ErrorCode::shape, "conv2d: kernel larger than input");
    }

    int cin_, cout_, k_, stride_;
    Tensor<T> w_, b_, dw_, db_;
    Tensor<T> in_;
};

template <class T>
class MaxPool : public Layer<T> {
public:
    MaxPool(int pool, int stride) : p_(pool), stride_(stride) {
        if (pool <= 0 || stride <= 0) raise(ErrorCode::config, "maxpool: pool and stride must be positive");
    }

    const char* kind() const override { return "maxpool"; }

    std::vector<int> out_shape(const std::vector<int>& in) const override {
        check_input_shape(in);
        return {in[0], (in[1] - p_) / stride_ + 1, (in[2] - p_) / stride_ + 1, in[3]};
    }

    Tensor<T> forward(const Tensor<T>& in, Mode) override {
        check_input_shape(in.shape());
        in_shape_ = in.shape();
        const int n = in.dim(0), c = in.dim(3);
        const int oh = (in.dim(1) - p_) / stride_ + 1, ow = (in.dim(2) - p_) / stride_ + 1;
        Tensor<T> out({n, oh, ow, c});
        argmax_.assign(out.size(), 0);
        const size_t hstride = size_t(in.dim(2)) * c;
        for (int b = 0; b < n; ++b) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const size_t base = (&in.at(b, oy * stride_, ox * stride_, 0)) - in.data();
                    T* orow = &out.at(b, oy, ox, 0);
                    size_t* arow = argmax_.data() + (orow - out.data());
                    for (int ch = 0; ch < c; ++ch) {
                        T best = in[base + size_t(ch)];
                        size_t besti = base + size_t(ch);
                        for (int ky = 0; ky < p_; ++ky) {
                            for (int kx = 0; kx < p_; ++kx) {
                                size_t idx = base + size_t(ky) * hstride + size_t(kx) * c + size_t(ch);
                                if (in[idx] > best) {
                                    best = in[idx];
                                    besti = idx;
                                }
                            }
                        }
                        orow[ch] = best;
                        arow[ch] = besti;
                    }
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(!argmax_.empty());
        Tensor<T> din(in_shape_);
        for (size_t i = 0; i < dout.size(); ++i) din[argmax_[i]] += dout[i];
        return din;
    }

protected:
    const char* kind_name() const override { return "maxpool"; }

private:
    void check_input_shape(const std::vector<int>& s) const {
        if (s.size() != 4) raise(ErrorCode::shape, "maxpool: expected (n,h,w,c) input");
        if (s[1] < p_ || s[2] < p_) raise(ErrorCode::shape, "maxpool: pool larger than input");
    }

    int p_, stride_;
    std::vector<int> in_shape_;
    std::vector<size_t> argmax_;
};

// Per-channel batch normalization over the last axis; running statistics
// follow moving = momentum * moving + (1 - momentum) * batch.
template <class T>
class BatchNorm : public Layer<T> {
public:
    BatchNorm(int channels, double eps = 1e-3, double momentum = 0.99)
        : c_(channels), eps_(T(eps)), momentum_(T(momentum)) {
        gamma_.reshape({c_});
        beta_.reshape({c_});
        dgamma_.reshape({c_});
        dbeta_.reshape({c_});
        running_mean_.reshape({c_});
        running_var_.reshape({c_});
        gamma_.fill(T(1));
        running_var_.fill(T(1));
    }

    const char* kind() const override { return "batchnorm"; }

    Tensor<T> forward(const Tensor<T>& in, Mode mode) override {
        if (in.dim(in.rank() - 1) != c_) raise(ErrorCode::shape, "batchnorm: channel mismatch");
        const size_t rows = in.size() / size_t(c_);
        if (rows == 0) raise(ErrorCode::state, "batchnorm: empty batch in train mode");
        Tensor<T> out(in.shape());
        if (mode == Mode::train) {
            mean_.assign(size_t(c_), T(0));
            inv_std_.assign(size_t(c_), T(0));
            std::vector<T> var(size_t(c_), T(0));
            const T* x = in.data();
            for (size_t r = 0; r < rows; ++r) {
                for (int ch = 0; ch < c_; ++ch) mean_[size_t(ch)] += x[r * c_ + size_t(ch)];
            }
            for (int ch = 0; ch < c_; ++ch) mean_[size_t(ch)] /= T(rows);
            for (size_t r = 0; r < rows; ++r) {
                for (int ch = 0; ch < c_; ++ch) {
                    T d = x[r * c_ + size_t(ch)] - mean_[size_t(ch)];
                    var[size_t(ch)] += d * d;
                }
            }
            for (int ch = 0; ch < c_; ++ch) {
                var[size_t(ch)] /= T(rows);
                inv_std_[size_t(ch)] = T(1) / std::sqrt(var[size_t(ch)] + eps_);
                running_mean_[size_t(ch)] = momentum_ * running_mean_[size_t(ch)] + (T(1) - momentum_) * mean_[size_t(ch)];
                running_var_[size_t(ch)] = momentum_ * running_var_[size_t(ch)] + (T(1) - momentum_) * var[size_t(ch)];
            }
            xhat_.reshape(in.shape());
            rows_ = rows;
            for (size_t r = 0; r < rows; ++r) {
                for (int ch = 0; ch < c_; ++ch) {
                    size_t i = r * c_ + size_t(ch);
                    xhat_[i] = (x[i] - mean_[size_t(ch)]) * inv_std_[size_t(ch)];
                    out[i] = gamma_[size_t(ch)] * xhat_[i] + beta_[size_t(ch)];
                }
            }
            train_forward_ = true;
        } else {
            for (size_t r = 0; r < rows; ++r) {
                for (int ch = 0; ch < c_; ++ch) {
                    size_t i = r * c_ + size_t(ch);
                    T inv = T(1) / std::sqrt(running_var_[size_t(ch)] + eps_);
                    out[i] = gamma_[size_t(ch)] * (in[i] - running_mean_[size_t(ch)]) * inv + beta_[size_t(ch)];
                }
            }
            train_forward_ = false;
            infer_forwarded_ = true;
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(train_forward_ || infer_forwarded_);
        Tensor<T> din(dout.shape());
        if (!train_forward_) {
            // infer-mode graph is a per-channel affine map
            const size_t rows = dout.size() / size_t(c_);
            for (size_t r = 0; r < rows; ++r) {
                for (int ch = 0; ch < c_; ++ch) {
                    size_t i = r * c_ + size_t(ch);
                    din[i] = dout[i] * gamma_[size_t(ch)] / std::sqrt(running_var_[size_t(ch)] + eps_);
                }
            }
            return din;
        }
        const size_t rows = rows_;
        dgamma_.fill(T(0));
        dbeta_.fill(T(0));
        for (size_t r = 0; r < rows; ++r) {
            for (int ch = 0; ch < c_; ++ch) {
                size_t i = r * c_ + size_t(ch);
                dgamma_[size_t(ch)] += dout[i] * xhat_[i];
                dbeta_[size_t(ch)] += dout[i];
            }
        }
        const T m = T(rows);
        for (size_t r = 0; r < rows; ++r) {
            for (int ch = 0; ch < c_; ++ch) {
                size_t i = r * c_ + size_t(ch);
                din[i] = gamma_[size_t(ch)] * inv_std_[size_t(ch)] / m *
                         (m * dout[i] - dbeta_[size_t(ch)] - xhat_[i] * dgamma_[size_t(ch)]);
            }
        }
        return din;
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({&gamma_, &dgamma_, "gamma"});
        out.push_back({&beta_, &dbeta_, "beta"});
    }

    Tensor<T>& gamma() { return gamma_; }
    Tensor<T>& beta() { return beta_; }
    Tensor<T>& running_mean() { return running_mean_; }
    Tensor<T>& running_var() { return running_var_; }
    double eps() const { return double(eps_); }
    int channels() const { return c_; }

protected:
    const char* kind_name() const override { return "batchnorm"; }

private:
    int c_;
    T eps_, momentum_;
    Tensor<T> gamma_, beta_, dgamma_, dbeta_;
    Tensor<T> running_mean_, running_var_;
    std::vector<T> mean_, inv_std_;
    Tensor<T> xhat_;
    size_t rows_ = 0;
    bool train_forward_ = false;
    bool infer_forwarded_ = false;
};

// Inverted dropout: survivors are scaled by 1/(1-rate) so inference is
// the identity.
template <class T>
class Dropout : public Layer<T> {
public:
    Dropout(double rate, uint64_t seed) : rate_(rate), rng_(seed) {
        if (rate < 0.0 || rate >= 1.0) raise(ErrorCode::config, "dropout: rate must be in [0,1)");
    }

    const char* kind() const override { return "dropout"; }

    Tensor<T> forward(const Tensor<T>& in, Mode mode) override {
        forwarded_ = true;
        if (mode == Mode::infer || rate_ == 0.0) {
            mask_ = Tensor<T>();
            return in;
        }
        Tensor<T> out(in.shape());
        if (!(freeze_mask_ && mask_.same_shape(in))) {
            mask_.reshape(in.shape());
            const T scale = T(1.0 / (1.0 - rate_));
            for (size_t i = 0; i < mask_.size(); ++i) {
                mask_[i] = rng_.uniform() < rate_ ? T(0) : scale;
            }
        }
        for (size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask_[i];
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(forwarded_);
        if (mask_.empty()) return dout;
        Tensor<T> din(dout.shape());
        for (size_t i = 0; i < din.size(); ++i) din[i] = dout[i] * mask_[i];
        return din;
    }

    // Reuse the current mask across forward calls (finite-difference checks).
    void freeze_mask(bool on) { freeze_mask_ = on; }
    double rate() const { return rate_; }

protected:
    const char* kind_name() const override { return "dropout"; }

private:
    double rate_;
    Rng rng_;
    Tensor<T> mask_;
    bool freeze_mask_ = false;
    bool forwarded_ = false;
};

// Nearest-neighbor upsampling by an integer factor.
template <class T>
class Upsample : public Layer<T> {
public:
    explicit Upsample(int factor) : f_(factor) {
        if (factor < 1) raise(ErrorCode::config, "upsample: factor must be >= 1");
    }

    const char* kind() const override { return "upsample"; }

    std::vector<int> out_shape(const std::vector<int>& in) const override {
        return {in[0], in[1] * f_, in[2] * f_, in[3]};
    }

    Tensor<T> forward(const Tensor<T>& in, Mode) override {
        in_shape_ = in.shape();
        const int n = in.dim(0), h = in.dim(1), w = in.dim(2), c = in.dim(3);
        Tensor<T> out({n, h * f_, w * f_, c});
        for (int b = 0; b < n; ++b) {
            for (int y = 0; y < h * f_; ++y) {
                for (int x = 0; x < w * f_; ++x) {
                    const T* src = &in.at(b, y / f_, x / f_, 0);
                    T* dst = &out.at(b, y, x, 0);
                    std::copy(src, src + c, dst);
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(!in_shape_.empty());
        Tensor<T> din(in_shape_);
        const int n = din.dim(0), h = din.dim(1), w = din.dim(2), c = din.dim(3);
        for (int b = 0; b < n; ++b) {
            for (int y = 0; y < h * f_; ++y) {
                for (int x = 0; x < w * f_; ++x) {
                    const T* src = &dout.at(b, y, x, 0);
                    T* dst = &din.at(b, y / f_, x / f_, 0);
                    for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                }
            }
        }
        return din;
    }

protected:
    const char* kind_name() const override { return "upsample"; }

private:
    int f_;
    std::vector<int> in_shape_;
};

// Stride-1 transposed convolution; each input pixel scatters a kernel
// footprint, so output spatial size is input + kernel - 1.
template <class T>
class TransposedConv2D : public Layer<T> {
public:
    TransposedConv2D(int cin, int cout, int kernel, Rng& rng) : cin_(cin), cout_(cout), k_(kernel) {
        w_.reshape({k_, k_, cin_, cout_});
        b_.reshape({cout_});
        dw_.reshape({k_, k_, cin_, cout_});
        db_.reshape({cout_});
        he_uniform_fill(w_, k_ * k_ * cin_, rng);
    }

    const char* kind() const override { return "transposed_conv2d"; }

    std::vector<int> out_shape(const std::vector<int>& in) const override {
        if (in.size() != 4 || in[3] != cin_) raise(ErrorCode::shape, "transposed_conv2d: bad input shape");
        return {in[0], in[1] + k_ - 1, in[2] + k_ - 1, cout_};
    }

    Tensor<T> forward(const Tensor<T>& in, Mode) override {
        if (in.rank() != 4 || in.dim(3) != cin_) raise(ErrorCode::shape, "transposed_conv2d: bad input shape");
        in_ = in;
        const int n = in.dim(0), h = in.dim(1), w = in.dim(2);
        Tensor<T> out({n, h + k_ - 1, w + k_ - 1, cout_});
        for (size_t i = 0; i < out.size(); ++i) out[i] = b_[i % size_t(cout_)];
        for (int b = 0; b < n; ++b) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const T* irow = &in.at(b, y, x, 0);
                    for (int ky = 0; ky < k_; ++ky) {
                        for (int kx = 0; kx < k_; ++kx) {
                            T* orow = &out.at(b, y + ky, x + kx, 0);
                            const T* wrow = w_.data() + (size_t(ky) * k_ + kx) * cin_ * cout_;
                            for (int ci = 0; ci < cin_; ++ci) {
                                T a = irow[ci];
                                const T* wc = wrow + size_t(ci) * cout_;
                                for (int co = 0; co < cout_; ++co) orow[co] += a * wc[co];
                            }
                        }
                    }
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(!in_.empty());
        const int n = in_.dim(0), h = in_.dim(1), w = in_.dim(2);
        dw_.fill(T(0));
        db_.fill(T(0));
        for (size_t i = 0; i < dout.size(); ++i) db_[i % size_t(cout_)] += dout[i];
        Tensor<T> din(in_.shape());
        for (int b = 0; b < n; ++b) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const T* irow = &in_.at(b, y, x, 0);
                    T* dirow = &din.at(b, y, x, 0);
                    for (int ky = 0; ky < k_; ++ky) {
                        for (int kx = 0; kx < k_; ++kx) {
                            const T* dorow = &dout.at(b, y + ky, x + kx, 0);
                            size_t off = (size_t(ky) * k_ + kx) * cin_ * cout_;
                            const T* wrow = w_.data() + off;
                            T* dwrow = dw_.data() + off;
                            for (int ci = 0; ci < cin_; ++ci) {
                                T a = irow[ci];
                                const T* wc = wrow + size_t(ci) * cout_;
                                T* dwc = dwrow + size_t(ci) * cout_;
                                T acc = T(0);
                                for (int co = 0; co < cout_; ++co) {
                                    T d = dorow[co];
                                    dwc[co] += a * d;
                                    acc += wc[co] * d;
                                }
                                dirow[ci] += acc;
                            }
                        }
                    }
                }
            }
        }
        return din;
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({&w_, &dw_, "w"});
        out.push_back({&b_, &db_, "b"});
    }

    Tensor<T>& weights() { return w_; }
    Tensor<T>& bias() { return b_; }

protected:
    const char* kind_name() const override { return "transposed_conv2d"; }

private:
    int cin_, cout_, k_;
    Tensor<T> w_, b_, dw_, db_;
    Tensor<T> in_;
};

template <class T>
class Flatten : public Layer<T> {
public:
    const char* kind() const override { return "flatten"; }

    std::vector<int> out_shape(const std::vector<int>& in) const override {
        int len = 1;
        for (size_t i = 1; i < in.size(); ++i) len *= in[i];
        return {in[0], len};
    }

    Tensor<T> forward(const Tensor<T>& in, Mode) override {
        in_shape_ = in.shape();
        Tensor<T> out = in;
        out.view(out_shape(in_shape_));
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(!in_shape_.empty());
        Tensor<T> din = dout;
        din.view(in_shape_);
        return din;
    }

protected:
    const char* kind_name() const override { return "flatten"; }

private:
    std::vector<int> in_shape_;
};

template <class T>
class Dense : public Layer<T> {
public:
    Dense(int in_width, int out_width, Rng& rng) : in_w_(in_width), out_w_(out_width) {
        w_.reshape({in_w_, out_w_});
        b_.reshape({out_w_});
        dw_.reshape({in_w_, out_w_});
        db_.reshape({out_w_});
        he_uniform_fill(w_, in_w_, rng);
    }

    const char* kind() const override { return "dense"; }

    std::vector<int> out_shape(const std::vector<int>& in) const override {
        if (in.size() != 2 || in[1] != in_w_) raise(ErrorCode::shape, "dense: bad input shape");
        return {in[0], out_w_};
    }

    Tensor<T> forward(const Tensor<T>& in, Mode) override {
        if (in.rank() != 2 || in.dim(1) != in_w_) raise(ErrorCode::shape, "dense: bad input shape");
        in_ = in;
        const int n = in.dim(0);
        Tensor<T> out({n, out_w_});
        for (int r = 0; r < n; ++r) {
            std::copy(b_.data(), b_.data() + out_w_, &out.at(r, 0));
        }
        gemm_nn(n, in_w_, out_w_, in.data(), w_.data(), out.data());
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(!in_.empty());
        const int n = in_.dim(0);
        dw_.fill(T(0));
        db_.fill(T(0));
        gemm_tn(in_w_, n, out_w_, in_.data(), dout.data(), dw_.data());
        for (int r = 0; r < n; ++r) {
            const T* row = &dout.at(r, 0);
            for (int j = 0; j < out_w_; ++j) db_[size_t(j)] += row[j];
        }
        Tensor<T> din({n, in_w_});
        gemm_nt(n, out_w_, in_w_, dout.data(), w_.data(), din.data());
        return din;
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({&w_, &dw_, "w"});
        out.push_back({&b_, &db_, "b"});
    }

    Tensor<T>& weights() { return w_; }
    Tensor<T>& bias() { return b_; }
    int in_width() const { return in_w_; }
    int out_width() const { return out_w_; }

protected:
    const char* kind_name() const override { return "dense"; }

private:
    int in_w_, out_w_;
    Tensor<T> w_, b_, dw_, db_;
    Tensor<T> in_;
};

template <class T>
class ReLU : public Layer<T> {
public:
    const char* kind() const override { return "relu"; }

    Tensor<T> forward(const Tensor<T>& in, Mode) override {
        in_ = in;
        Tensor<T> out(in.shape());
        for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(!in_.empty());
        Tensor<T> din(dout.shape());
        for (size_t i = 0; i < din.size(); ++i) din[i] = in_[i] > T(0) ? dout[i] : T(0);
        return din;
    }

protected:
    const char* kind_name() const override { return "relu"; }

private:
    Tensor<T> in_;
};

template <class T>
class Sigmoid : public Layer<T> {
public:
    const char* kind() const override { return "sigmoid"; }

    Tensor<T> forward(const Tensor<T>& in, Mode) override {
        out_.reshape(in.shape());
        for (size_t i = 0; i < in.size(); ++i) out_[i] = T(1) / (T(1) + std::exp(-in[i]));
        return out_;
    }

    Tensor<T> backward(const Tensor<T>& dout) override {
        this->require_forwarded(!out_.empty());
        Tensor<T> din(dout.shape());
        for (size_t i = 0; i < din.size(); ++i) din[i] = dout[i] * out_[i] * (T(1) - out_[i]);
        return din;
    }

protected:
    const char* kind_name() const override { return "sigmoid"; }

private:
    Tensor<T> out_;
};

} // namespace caeloc::nn
