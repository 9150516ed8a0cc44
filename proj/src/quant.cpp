#include "quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "error.hpp"
#include "f16.hpp"
#include "nn/gemm.hpp"

namespace caeloc {

Int8Tensor quantize_tensor_int8(const float* x, size_t n, std::vector<int> shape) {
    if (n == 0) raise(ErrorCode::validation, "quantize: empty tensor");
    float mn = x[0], mx = x[0];
    for (size_t i = 1; i < n; ++i) {
        mn = std::min(mn, x[i]);
        mx = std::max(mx, x[i]);
    }
    if (!std::isfinite(double(mn)) || !std::isfinite(double(mx))) {
        raise(ErrorCode::numeric, "quantize: non-finite values");
    }
    Int8Tensor t;
    t.shape = std::move(shape);
    double scale;
    if (mx == mn) {
        scale = std::max(std::abs(double(mn)), 1.0) * 2.0 / 255.0;
    } else {
        scale = (double(mx) - double(mn)) / 255.0;
    }
    long zp = std::lround(-double(mn) / scale) - 128;
    zp = std::clamp(zp, -128L, 127L);
    t.scale = scale;
    t.zero_point = int(zp);
    t.codes.resize(n);
    for (size_t i = 0; i < n; ++i) {
        long c = std::lround(double(x[i]) / scale) + zp;
        t.codes[i] = int8_t(std::clamp(c, -128L, 127L));
    }
    return t;
}

std::vector<float> dequantize(const Int8Tensor& t) {
    std::vector<float> out(t.codes.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = float((double(t.codes[i]) - t.zero_point) * t.scale);
    }
    return out;
}

void fold_batchnorm(nn::Tensor<float>& w, nn::Tensor<float>& b, nn::BatchNorm<float>& bn) {
    const int cout = w.dim(3);
    if (cout != bn.channels() || b.dim(0) != cout) {
        raise(ErrorCode::shape, "fold: conv/batchnorm channel mismatch");
    }
    const size_t per_out = w.size() / size_t(cout);
    for (int co = 0; co < cout; ++co) {
        float g = bn.gamma()[size_t(co)] /
                  std::sqrt(bn.running_var()[size_t(co)] + float(bn.eps()));
        for (size_t i = 0; i < per_out; ++i) w[i * size_t(cout) + size_t(co)] *= g;
        b[size_t(co)] = (b[size_t(co)] - bn.running_mean()[size_t(co)]) * g + bn.beta()[size_t(co)];
    }
}

nn::Sequential<float> folded_float_classifier(CaeCnnModel& model) {
    const ModelSpec& s = model.spec();
    nn::Rng rng(s.seed);  // initialization is overwritten below
    auto c1 = std::make_shared<nn::Conv2D<float>>(1, s.conv1_filters, s.kernel, 1, rng);
    auto c2 = std::make_shared<nn::Conv2D<float>>(s.conv1_filters, s.conv2_filters, s.kernel, 1, rng);
    auto c3 = std::make_shared<nn::Conv2D<float>>(s.conv2_filters, s.conv3_filters, s.kernel, 1, rng);
    c1->weights() = model.conv1().weights();
    c1->bias() = model.conv1().bias();
    c2->weights() = model.conv2().weights();
    c2->bias() = model.conv2().bias();
    c3->weights() = model.conv3().weights();
    c3->bias() = model.conv3().bias();
    fold_batchnorm(c1->weights(), c1->bias(), model.bn1());
    fold_batchnorm(c2->weights(), c2->bias(), model.bn2());
    fold_batchnorm(c3->weights(), c3->bias(), model.bn3());
    auto dense = std::make_shared<nn::Dense<float>>(model.dense().in_width(), model.dense().out_width(), rng);
    dense->weights() = model.dense().weights();
    dense->bias() = model.dense().bias();

    auto relu = [] { return std::make_shared<nn::ReLU<float>>(); };
    return nn::Sequential<float>({c1, relu(), std::make_shared<nn::MaxPool<float>>(s.pool, s.pool_stride),
                                  c2, relu(), c3, relu(), std::make_shared<nn::Flatten<float>>(), dense});
}

ModelFile quantize_f16(const ModelFile& f32_file) {
    if (f32_file.precision != "f32") {
        raise(ErrorCode::state, "quantize: expected an f32 container, got " + f32_file.precision);
    }
    ModelFile out = f32_file;
    out.precision = "f16";
    for (TensorEntry& e : out.tensors) {
        std::vector<float> vals = decode_entry(e);
        std::vector<uint8_t> packed(vals.size() * 2);
        for (size_t i = 0; i < vals.size(); ++i) {
            if (!std::isfinite(double(vals[i])) || f16_overflows(vals[i])) {
                raise(ErrorCode::numeric, "quantize: " + e.name + " exceeds the half-precision range");
            }
            uint16_t h = f32_to_f16_bits(vals[i]);
            packed[2 * i] = uint8_t(h & 0xFF);
            packed[2 * i + 1] = uint8_t(h >> 8);
        }
        e.dtype = "f16";
        e.data = std::move(packed);
    }
    return out;
}

namespace {

TensorEntry int8_entry(const std::string& name, const nn::Tensor<float>& w) {
    Int8Tensor q = quantize_tensor_int8(w.data(), w.size(), w.shape());
    TensorEntry e;
    e.name = name;
    e.shape = q.shape;
    e.dtype = "i8";
    e.scale = q.scale;
    e.zero_point = q.zero_point;
    e.data.assign(reinterpret_cast<const uint8_t*>(q.codes.data()),
                  reinterpret_cast<const uint8_t*>(q.codes.data()) + q.codes.size());
    return e;
}

TensorEntry f32_entry(const std::string& name, const nn::Tensor<float>& v) {
    TensorEntry e;
    e.name = name;
    e.shape = v.shape();
    e.dtype = "f32";
    e.data.resize(v.size() * 4);
    std::memcpy(e.data.data(), v.data(), e.data.size());
    return e;
}

} // namespace

ModelFile quantize_int8(const ModelFile& f32_file) {
    if (f32_file.precision != "f32") {
        raise(ErrorCode::state, "quantize: expected an f32 container, got " + f32_file.precision);
    }
    CaeCnnModel model = unpack_model(f32_file);
    nn::Tensor<float> w1 = model.conv1().weights(), b1 = model.conv1().bias();
    nn::Tensor<float> w2 = model.conv2().weights(), b2 = model.conv2().bias();
    nn::Tensor<float> w3 = model.conv3().weights(), b3 = model.conv3().bias();
    fold_batchnorm(w1, b1, model.bn1());
    fold_batchnorm(w2, b2, model.bn2());
    fold_batchnorm(w3, b3, model.bn3());

    ModelFile out;
    out.precision = "i8";
    out.spec = f32_file.spec;
    out.bn_folded = true;
    out.grid_ref = f32_file.grid_ref;
    out.metadata_json = f32_file.metadata_json;
    out.tensors.push_back(int8_entry("conv1.w", w1));
    out.tensors.push_back(f32_entry("conv1.b", b1));
    out.tensors.push_back(int8_entry("conv2.w", w2));
    out.tensors.push_back(f32_entry("conv2.b", b2));
    out.tensors.push_back(int8_entry("conv3.w", w3));
    out.tensors.push_back(f32_entry("conv3.b", b3));
    out.tensors.push_back(int8_entry("dense.w", model.dense().weights()));
    out.tensors.push_back(f32_entry("dense.b", model.dense().bias()));
    return out;
}

namespace {

// Zero-point-subtracted per-tensor activation codes. The range always
// includes 0, so the zero point is exact and stays unclamped.
struct QAct {
    std::vector<int16_t> q;
    float scale = 1.0f;
};

QAct quantize_activations(const float* x, size_t n) {
    float mn = 0.0f, mx = 0.0f;
    for (size_t i = 0; i < n; ++i) {
        mn = std::min(mn, x[i]);
        mx = std::max(mx, x[i]);
    }
    QAct a;
    double scale = (double(mx) - double(mn)) / 255.0;
    if (scale <= 0.0) scale = 1.0 / 255.0;
    long zp = std::lround(-double(mn) / scale) - 128;
    a.scale = float(scale);
    a.q.resize(n);
    for (size_t i = 0; i < n; ++i) {
        long c = std::clamp(std::lround(double(x[i]) / scale) + zp, -128L, 127L);
        a.q[i] = int16_t(c - zp);
    }
    return a;
}

} // namespace

Int8Engine::Int8Engine(const ModelFile& file) : spec_(file.spec) {
    if (file.precision != "i8") {
        raise(ErrorCode::state, "int8 engine: container precision is " + file.precision);
    }
    auto load_conv = [&](const char* base, QConv& L) {
        const TensorEntry& we = file.entry(std::string(base) + ".w");
        const TensorEntry& be = file.entry(std::string(base) + ".b");
        if (we.dtype != "i8" || we.shape.size() != 4) raise(ErrorCode::schema, "int8 engine: bad conv tensor");
        L.k = we.shape[0];
        L.cin = we.shape[2];
        L.cout = we.shape[3];
        L.scale = float(we.scale);
        L.bias = decode_entry(be);
        // reorder (ky,kx,cin,cout) codes into one contiguous row per cout
        const int flen = L.k * L.k * L.cin;
        L.w.resize(size_t(L.cout) * size_t(flen));
        for (int f = 0; f < flen; ++f) {
            for (int co = 0; co < L.cout; ++co) {
                int16_t code = int16_t(int8_t(we.data[size_t(f) * size_t(L.cout) + size_t(co)]));
                L.w[size_t(co) * size_t(flen) + size_t(f)] = int16_t(code - we.zero_point);
            }
        }
    };
    load_conv("conv1", conv1_);
    load_conv("conv2", conv2_);
    load_conv("conv3", conv3_);

    const TensorEntry& dw = file.entry("dense.w");
    const TensorEntry& db = file.entry("dense.b");
    if (dw.dtype != "i8" || dw.shape.size() != 2) raise(ErrorCode::schema, "int8 engine: bad dense tensor");
    dense_.in = dw.shape[0];
    dense_.out = dw.shape[1];
    dense_.scale = float(dw.scale);
    dense_.bias = decode_entry(db);
    dense_.w.resize(size_t(dense_.in) * size_t(dense_.out));
    for (int i = 0; i < dense_.in; ++i) {
        for (int j = 0; j < dense_.out; ++j) {
            int16_t code = int16_t(int8_t(dw.data[size_t(i) * size_t(dense_.out) + size_t(j)]));
            dense_.w[size_t(j) * size_t(dense_.in) + size_t(i)] = int16_t(code - dw.zero_point);
        }
    }
}

nn::Tensor<float> Int8Engine::conv_forward(const QConv& L, const nn::Tensor<float>& in) const {
    const int n = in.dim(0), h = in.dim(1), w = in.dim(2), c = in.dim(3);
    if (c != L.cin) raise(ErrorCode::shape, "int8 engine: conv channel mismatch");
    const int oh = h - L.k + 1, ow = w - L.k + 1;
    if (oh < 1 || ow < 1) raise(ErrorCode::shape, "int8 engine: kernel larger than input");

    QAct act = quantize_activations(in.data(), in.size());
    nn::Tensor<float> out({n, oh, ow, L.cout});
    const int flen = L.k * L.k * c;
    const float rescale = act.scale * L.scale;
    std::vector<int16_t> patch(size_t(flen), 0);
    for (int b = 0; b < n; ++b) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                for (int ky = 0; ky < L.k; ++ky) {
                    const int16_t* src = act.q.data() + ((size_t(b) * h + size_t(oy + ky)) * w + size_t(ox)) * c;
                    std::copy(src, src + size_t(L.k) * c, patch.data() + size_t(ky) * L.k * c);
                }
                float* orow = &out.at(b, oy, ox, 0);
                for (int co = 0; co < L.cout; ++co) {
                    int32_t acc = nn::dot_i16(flen, patch.data(), L.w.data() + size_t(co) * size_t(flen));
                    float v = float(acc) * rescale + L.bias[size_t(co)];
                    orow[co] = v > 0.0f ? v : 0.0f;  // conv is always followed by relu here
                }
            }
        }
    }
    return out;
}

namespace {

nn::Tensor<float> maxpool_f32(const nn::Tensor<float>& in, int p, int s) {
    const int n = in.dim(0), h = in.dim(1), w = in.dim(2), c = in.dim(3);
    const int oh = (h - p) / s + 1, ow = (w - p) / s + 1;
    nn::Tensor<float> out({n, oh, ow, c});
    for (int b = 0; b < n; ++b) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float* orow = &out.at(b, oy, ox, 0);
                for (int ch = 0; ch < c; ++ch) {
                    float best = in.at(b, oy * s, ox * s, ch);
                    for (int ky = 0; ky < p; ++ky) {
                        for (int kx = 0; kx < p; ++kx) {
                            best = std::max(best, in.at(b, oy * s + ky, ox * s + kx, ch));
                        }
                    }
                    orow[ch] = best;
                }
            }
        }
    }
    return out;
}

} // namespace

nn::Tensor<float> Int8Engine::logits(const nn::Tensor<float>& images) {
    if (images.rank() != 4) raise(ErrorCode::shape, "int8 engine: expected (n,h,w,c) images");
    nn::Tensor<float> x = conv_forward(conv1_, images);
    x = maxpool_f32(x, spec_.pool, spec_.pool_stride);
    x = conv_forward(conv2_, x);
    x = conv_forward(conv3_, x);
    const int n = x.dim(0);
    const int flat = x.dim(1) * x.dim(2) * x.dim(3);
    if (flat != dense_.in) raise(ErrorCode::shape, "int8 engine: flatten width mismatch");

    nn::Tensor<float> out({n, dense_.out});
    for (int r = 0; r < n; ++r) {
        QAct act = quantize_activations(&x.at(r, 0, 0, 0), size_t(flat));
        const float rescale = act.scale * dense_.scale;
        float* orow = &out.at(r, 0);
        for (int j = 0; j < dense_.out; ++j) {
            int32_t acc = nn::dot_i16(dense_.in, act.q.data(), dense_.w.data() + size_t(j) * size_t(dense_.in));
            orow[j] = float(acc) * rescale + dense_.bias[size_t(j)];
        }
    }
    return out;
}

std::vector<int> Int8Engine::predict(const nn::Tensor<float>& images) {
    return argmax_rows(logits(images));
}

} // namespace caeloc
