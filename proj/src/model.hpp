#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nn/network.hpp"

namespace caeloc {

struct ModelSpec {
    int image_side = 23;
    int class_count = 0;
    int conv1_filters = 16;
    int conv2_filters = 32;
    int conv3_filters = 64;
    int kernel = 3;
    int pool = 3;
    int pool_stride = 3;
    double dropout_rate = 0.3;
    uint64_t seed = 1;

    void validate() const;
};

// Convolutional encoder pretrained as an auto-encoder, then reused as the
// front of a grid-cell classifier. The encoder layers are shared between
// the two networks, so classifier fine-tuning keeps adjusting them.
//
//   encoder:    conv(k,f1) -> bn -> relu -> maxpool(p)
//   decoder:    upsample(p) -> tconv(k, 1 channel) -> sigmoid
//   classifier: encoder -> conv(k,f2) -> bn -> relu -> conv(k,f3) -> bn
//               -> relu -> flatten -> dropout -> dense(classes)
class CaeCnnModel {
public:
    explicit CaeCnnModel(const ModelSpec& spec);

    nn::Tensor<float> reconstruct(const nn::Tensor<float>& images, nn::Mode mode);
    nn::Tensor<float> logits(const nn::Tensor<float>& images, nn::Mode mode);

    nn::Sequential<float>& cae() { return cae_; }
    nn::Sequential<float>& classifier() { return clf_; }
    const ModelSpec& spec() const { return spec_; }

    size_t classifier_parameter_count() const { return clf_.parameter_count(); }

    nn::Conv2D<float>& conv1() { return *conv1_; }
    nn::Conv2D<float>& conv2() { return *conv2_; }
    nn::Conv2D<float>& conv3() { return *conv3_; }
    nn::BatchNorm<float>& bn1() { return *bn1_; }
    nn::BatchNorm<float>& bn2() { return *bn2_; }
    nn::BatchNorm<float>& bn3() { return *bn3_; }
    nn::TransposedConv2D<float>& tconv() { return *tconv_; }
    nn::Dense<float>& dense() { return *dense_; }
    nn::Dropout<float>& dropout() { return *dropout_; }

    // Every persistent tensor (weights, biases, batch-norm parameters and
    // running statistics) under a stable name, in a fixed order.
    struct NamedTensor {
        std::string name;
        nn::Tensor<float>* tensor;
    };
    std::vector<NamedTensor> named_tensors();

    std::vector<std::vector<float>> snapshot_state();
    void restore_state(const std::vector<std::vector<float>>& state);

private:
    ModelSpec spec_;
    std::shared_ptr<nn::Conv2D<float>> conv1_, conv2_, conv3_;
    std::shared_ptr<nn::BatchNorm<float>> bn1_, bn2_, bn3_;
    std::shared_ptr<nn::MaxPool<float>> pool_;
    std::shared_ptr<nn::Upsample<float>> up_;
    std::shared_ptr<nn::TransposedConv2D<float>> tconv_;
    std::shared_ptr<nn::Dense<float>> dense_;
    std::shared_ptr<nn::Dropout<float>> dropout_;
    nn::Sequential<float> cae_, clf_;
};

struct TrainConfig {
    int cae_epochs = 30;
    int classifier_epochs = 100;
    int batch_size = 128;
    double learning_rate = 1e-3;
    int patience = 10;  // stop after this many epochs without a validation improvement; <=0 disables
    uint64_t seed = 1;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;  // classifier stage only
};

struct TrainLog {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Stage one: reconstruction training of encoder+decoder (mean squared
// error). The best-on-validation weights win; with no validation set the
// training loss is used instead.
TrainLog train_cae(CaeCnnModel& model, const nn::Tensor<float>& train_images,
                   const nn::Tensor<float>& val_images, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

// Stage two: end-to-end classifier training (sparse categorical cross
// entropy) on top of the pretrained encoder, which stays trainable.
TrainLog train_classifier(CaeCnnModel& model, const nn::Tensor<float>& train_images,
                          const std::vector<int>& train_labels, const nn::Tensor<float>& val_images,
                          const std::vector<int>& val_labels, const TrainConfig& config,
                          const EpochCallback& on_epoch = {});

nn::Tensor<float> predict_logits(CaeCnnModel& model, const nn::Tensor<float>& images,
                                 int batch_size = 256);

std::vector<int> predict_classes(CaeCnnModel& model, const nn::Tensor<float>& images,
                                 int batch_size = 256);

// Row argmax; ties go to the lowest index.
std::vector<int> argmax_rows(const nn::Tensor<float>& scores);

} // namespace caeloc
