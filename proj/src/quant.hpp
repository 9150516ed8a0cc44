#pragma once

#include <cstdint>
#include <vector>

#include "serialize.hpp"

namespace caeloc {

// Per-tensor affine int8 quantization: real ≈ (code - zero_point) * scale.
struct Int8Tensor {
    std::vector<int8_t> codes;
    std::vector<int> shape;
    double scale = 1.0;
    int zero_point = 0;
};

Int8Tensor quantize_tensor_int8(const float* x, size_t n, std::vector<int> shape);
std::vector<float> dequantize(const Int8Tensor& t);

// Fold inference-mode batch norm into the conv that feeds it, in place:
// w'(.,co) = w(.,co) * g, b'(co) = (b(co) - mean(co)) * g + beta(co) with
// g = gamma(co) / sqrt(var(co) + eps).
void fold_batchnorm(nn::Tensor<float>& w, nn::Tensor<float>& b, nn::BatchNorm<float>& bn);

// Float classifier with batch norm folded away (conv->relu->pool->conv->
// relu->conv->relu->flatten->dense). Matches the source model's inference
// logits to float rounding.
nn::Sequential<float> folded_float_classifier(CaeCnnModel& model);

// Every tensor re-encoded as 16-bit floats. Rejects values outside the
// half range, naming the offending tensor.
ModelFile quantize_f16(const ModelFile& f32_file);

// Deployment container: batch norm folded into the convs, decoder dropped,
// weights int8 per-tensor affine, biases kept float32.
ModelFile quantize_int8(const ModelFile& f32_file);

// Integer inference for i8 containers. Weights are stored as zero-point-
// subtracted int16 rows; activations are quantized per tensor on the fly;
// products accumulate in int32 and each layer rescales back to float.
class Int8Engine {
public:
    explicit Int8Engine(const ModelFile& file);

    nn::Tensor<float> logits(const nn::Tensor<float>& images);
    std::vector<int> predict(const nn::Tensor<float>& images);

    const ModelSpec& spec() const { return spec_; }

private:
    struct QConv {
        int k = 0, cin = 0, cout = 0;
        std::vector<int16_t> w;  // (cout, k*k*cin)
        std::vector<float> bias;
        float scale = 1.0f;
    };
    struct QDense {
        int in = 0, out = 0;
        std::vector<int16_t> w;  // (out, in)
        std::vector<float> bias;
        float scale = 1.0f;
    };

    nn::Tensor<float> conv_forward(const QConv& layer, const nn::Tensor<float>& in) const;

    ModelSpec spec_;
    QConv conv1_, conv2_, conv3_;
    QDense dense_;
};

} // namespace caeloc
