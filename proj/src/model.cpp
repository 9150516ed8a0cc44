#include "model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "error.hpp"
#include "nn/loss.hpp"
#include "nn/optimizer.hpp"
#include "nn/rng.hpp"

namespace caeloc {

void ModelSpec::validate() const {
    if (image_side < kernel) raise(ErrorCode::config, "model: image side smaller than kernel");
    if (class_count <= 0) raise(ErrorCode::config, "model: class_count must be positive");
    if (conv1_filters <= 0 || conv2_filters <= 0 || conv3_filters <= 0) {
        raise(ErrorCode::config, "model: filter counts must be positive");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) raise(ErrorCode::config, "model: dropout must be in [0,1)");
    // the classifier needs spatial room for pool + two more convs
    int s = image_side - kernel + 1;
    if (s < pool) raise(ErrorCode::config, "model: image too small for pooling");
    s = (s - pool) / pool_stride + 1;
    s = s - kernel + 1;
    s = s - kernel + 1;
    if (s < 1) raise(ErrorCode::config, "model: image too small for the conv stack");
}

void TrainConfig::validate() const {
    if (batch_size < 1) raise(ErrorCode::config, "train: batch_size must be >= 1");
    if (cae_epochs < 0 || classifier_epochs < 0) raise(ErrorCode::config, "train: epochs must be >= 0");
    if (!(learning_rate > 0)) raise(ErrorCode::config, "train: learning_rate must be positive");
}

CaeCnnModel::CaeCnnModel(const ModelSpec& spec) : spec_(spec) {
    spec_.validate();
    nn::Rng rng(spec_.seed);
    conv1_ = std::make_shared<nn::Conv2D<float>>(1, spec_.conv1_filters, spec_.kernel, 1, rng);
    bn1_ = std::make_shared<nn::BatchNorm<float>>(spec_.conv1_filters);
    pool_ = std::make_shared<nn::MaxPool<float>>(spec_.pool, spec_.pool_stride);
    up_ = std::make_shared<nn::Upsample<float>>(spec_.pool_stride);
    tconv_ = std::make_shared<nn::TransposedConv2D<float>>(spec_.conv1_filters, 1, spec_.kernel, rng);
    conv2_ = std::make_shared<nn::Conv2D<float>>(spec_.conv1_filters, spec_.conv2_filters, spec_.kernel, 1, rng);
    bn2_ = std::make_shared<nn::BatchNorm<float>>(spec_.conv2_filters);
    conv3_ = std::make_shared<nn::Conv2D<float>>(spec_.conv2_filters, spec_.conv3_filters, spec_.kernel, 1, rng);
    bn3_ = std::make_shared<nn::BatchNorm<float>>(spec_.conv3_filters);

    auto relu = [] { return std::make_shared<nn::ReLU<float>>(); };
    std::vector<int> head_in = {1, spec_.image_side, spec_.image_side, 1};
    std::vector<int> enc_out = pool_->out_shape(conv1_->out_shape(head_in));
    int flat = (enc_out[1] - 2 * (spec_.kernel - 1)) * (enc_out[2] - 2 * (spec_.kernel - 1)) *
               spec_.conv3_filters;
    dense_ = std::make_shared<nn::Dense<float>>(flat, spec_.class_count, rng);
    dropout_ = std::make_shared<nn::Dropout<float>>(spec_.dropout_rate, rng.next_u64());

    cae_ = nn::Sequential<float>({conv1_, bn1_, relu(), pool_, up_, tconv_,
                                  std::make_shared<nn::Sigmoid<float>>()});
    clf_ = nn::Sequential<float>({conv1_, bn1_, relu(), pool_, conv2_, bn2_, relu(), conv3_, bn3_,
                                  relu(), std::make_shared<nn::Flatten<float>>(), dropout_, dense_});

    // the decoder must reproduce the input frame exactly
    std::vector<int> recon = cae_.out_shape(head_in);
    if (recon != head_in) {
        raise(ErrorCode::config, "model: decoder output " + std::to_string(recon[1]) + "x" +
                                     std::to_string(recon[2]) + " does not match the input side " +
                                     std::to_string(spec_.image_side));
    }
}

nn::Tensor<float> CaeCnnModel::reconstruct(const nn::Tensor<float>& images, nn::Mode mode) {
    return cae_.forward(images, mode);
}

nn::Tensor<float> CaeCnnModel::logits(const nn::Tensor<float>& images, nn::Mode mode) {
    return clf_.forward(images, mode);
}

std::vector<CaeCnnModel::NamedTensor> CaeCnnModel::named_tensors() {
    std::vector<NamedTensor> out;
    auto add_conv = [&](const std::string& base, nn::Conv2D<float>& c) {
        out.push_back({base + ".w", &c.weights()});
        out.push_back({base + ".b", &c.bias()});
    };
    auto add_bn = [&](const std::string& base, nn::BatchNorm<float>& b) {
        out.push_back({base + ".gamma", &b.gamma()});
        out.push_back({base + ".beta", &b.beta()});
        out.push_back({base + ".moving_mean", &b.running_mean()});
        out.push_back({base + ".moving_var", &b.running_var()});
    };
    add_conv("enc.conv1", *conv1_);
    add_bn("enc.bn1", *bn1_);
    out.push_back({"dec.tconv.w", &tconv_->weights()});
    out.push_back({"dec.tconv.b", &tconv_->bias()});
    add_conv("head.conv2", *conv2_);
    add_bn("head.bn2", *bn2_);
    add_conv("head.conv3", *conv3_);
    add_bn("head.bn3", *bn3_);
    out.push_back({"head.dense.w", &dense_->weights()});
    out.push_back({"head.dense.b", &dense_->bias()});
    return out;
}

std::vector<std::vector<float>> CaeCnnModel::snapshot_state() {
    std::vector<std::vector<float>> state;
    for (const auto& nt : named_tensors()) {
        state.emplace_back(nt.tensor->data(), nt.tensor->data() + nt.tensor->size());
    }
    return state;
}

void CaeCnnModel::restore_state(const std::vector<std::vector<float>>& state) {
    auto tensors = named_tensors();
    if (state.size() != tensors.size()) raise(ErrorCode::state, "model: state snapshot mismatch");
    for (size_t i = 0; i < tensors.size(); ++i) {
        if (state[i].size() != tensors[i].tensor->size()) {
            raise(ErrorCode::state, "model: state size mismatch for " + tensors[i].name);
        }
        std::copy(state[i].begin(), state[i].end(), tensors[i].tensor->data());
    }
}

namespace {

nn::Tensor<float> gather_images(const nn::Tensor<float>& all, const std::vector<int>& order,
                                size_t from, size_t to) {
    const int h = all.dim(1), w = all.dim(2), c = all.dim(3);
    nn::Tensor<float> out({int(to - from), h, w, c});
    const size_t stride = size_t(h) * size_t(w) * size_t(c);
    for (size_t i = from; i < to; ++i) {
        const float* src = all.data() + size_t(order[i]) * stride;
        std::copy(src, src + stride, out.data() + (i - from) * stride);
    }
    return out;
}

nn::Tensor<float> slice_images(const nn::Tensor<float>& all, size_t from, size_t to) {
    const int h = all.dim(1), w = all.dim(2), c = all.dim(3);
    nn::Tensor<float> out({int(to - from), h, w, c});
    const size_t stride = size_t(h) * size_t(w) * size_t(c);
    std::copy(all.data() + from * stride, all.data() + to * stride, out.data());
    return out;
}

double eval_cae_loss(CaeCnnModel& model, const nn::Tensor<float>& images, int batch_size) {
    const size_t n = size_t(images.dim(0));
    double total = 0.0;
    for (size_t from = 0; from < n; from += size_t(batch_size)) {
        size_t to = std::min(n, from + size_t(batch_size));
        nn::Tensor<float> x = slice_images(images, from, to);
        nn::Tensor<float> recon = model.reconstruct(x, nn::Mode::infer);
        total += double(nn::mse(recon, x)) * double(to - from);
    }
    return total / double(n);
}

double eval_classifier_loss(CaeCnnModel& model, const nn::Tensor<float>& images,
                            const std::vector<int>& labels, int batch_size, double* accuracy) {
    const size_t n = size_t(images.dim(0));
    double total = 0.0;
    size_t hits = 0;
    for (size_t from = 0; from < n; from += size_t(batch_size)) {
        size_t to = std::min(n, from + size_t(batch_size));
        nn::Tensor<float> x = slice_images(images, from, to);
        std::vector<int> y(labels.begin() + long(from), labels.begin() + long(to));
        nn::Tensor<float> logit = model.logits(x, nn::Mode::infer);
        total += double(nn::sparse_cce(logit, y)) * double(to - from);
        std::vector<int> pred = argmax_rows(logit);
        for (size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] == y[i]) ++hits;
        }
    }
    if (accuracy) *accuracy = n ? double(hits) / double(n) : 0.0;
    return n ? total / double(n) : 0.0;
}

} // namespace

TrainLog train_cae(CaeCnnModel& model, const nn::Tensor<float>& train_images,
                   const nn::Tensor<float>& val_images, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
    config.validate();
    if (train_images.rank() != 4) raise(ErrorCode::shape, "train: expected (n,h,w,c) images");
    const auto t0 = std::chrono::steady_clock::now();
    const bool have_val = !val_images.empty();

    TrainLog log;
    log.best_val_loss = std::numeric_limits<double>::infinity();
    auto params = model.cae().params();
    nn::Nadam<float> opt(config.learning_rate);
    opt.attach(params);
    nn::Rng rng(config.seed);

    const size_t n = size_t(train_images.dim(0));
    std::vector<int> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = int(i);

    std::vector<std::vector<float>> best;
    int since_best = 0;
    for (int epoch = 0; epoch < config.cae_epochs; ++epoch) {
        rng.shuffle(order);
        double train_loss = 0.0;
        for (size_t from = 0; from < n; from += size_t(config.batch_size)) {
            size_t to = std::min(n, from + size_t(config.batch_size));
            nn::Tensor<float> x = gather_images(train_images, order, from, to);
            nn::Tensor<float> recon = model.reconstruct(x, nn::Mode::train);
            train_loss += double(nn::mse(recon, x)) * double(to - from);
            model.cae().backward(nn::mse_backward(recon, x));
            opt.step(params);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = train_loss / double(n);
        stats.val_loss = have_val ? eval_cae_loss(model, val_images, config.batch_size) : stats.train_loss;
        log.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (stats.val_loss < log.best_val_loss) {
            log.best_val_loss = stats.val_loss;
            log.best_epoch = epoch;
            best = model.snapshot_state();
            since_best = 0;
        } else if (config.patience > 0 && ++since_best >= config.patience) {
            break;
        }
    }
    if (!best.empty()) model.restore_state(best);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return log;
}

TrainLog train_classifier(CaeCnnModel& model, const nn::Tensor<float>& train_images,
                          const std::vector<int>& train_labels, const nn::Tensor<float>& val_images,
                          const std::vector<int>& val_labels, const TrainConfig& config,
                          const EpochCallback& on_epoch) {
    config.validate();
    if (train_images.rank() != 4) raise(ErrorCode::shape, "train: expected (n,h,w,c) images");
    if (size_t(train_images.dim(0)) != train_labels.size()) {
        raise(ErrorCode::shape, "train: image/label count mismatch");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const bool have_val = !val_images.empty();
    if (have_val && size_t(val_images.dim(0)) != val_labels.size()) {
        raise(ErrorCode::shape, "train: validation image/label count mismatch");
    }

    TrainLog log;
    log.best_val_loss = std::numeric_limits<double>::infinity();
    auto params = model.classifier().params();
    nn::Nadam<float> opt(config.learning_rate);
    opt.attach(params);
    nn::Rng rng(config.seed);

    const size_t n = size_t(train_images.dim(0));
    std::vector<int> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = int(i);

    std::vector<std::vector<float>> best;
    double best_accuracy = -1.0;
    int since_best = 0;
    nn::Tensor<float> dlogits;
    for (int epoch = 0; epoch < config.classifier_epochs; ++epoch) {
        rng.shuffle(order);
        double train_loss = 0.0;
        for (size_t from = 0; from < n; from += size_t(config.batch_size)) {
            size_t to = std::min(n, from + size_t(config.batch_size));
            nn::Tensor<float> x = gather_images(train_images, order, from, to);
            std::vector<int> y(to - from);
            for (size_t i = from; i < to; ++i) y[i - from] = train_labels[size_t(order[i])];
            nn::Tensor<float> logit = model.logits(x, nn::Mode::train);
            train_loss += double(nn::sparse_cce(logit, y, &dlogits)) * double(to - from);
            model.classifier().backward(dlogits);
            opt.step(params);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = train_loss / double(n);
        if (have_val) {
            stats.val_loss = eval_classifier_loss(model, val_images, val_labels, config.batch_size,
                                                  &stats.val_accuracy);
        } else {
            stats.val_loss = stats.train_loss;
        }
        log.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);

        // patience watches the loss; the checkpoint keeps the most accurate
        // weights (first epoch wins ties), falling back to the loss when
        // there is no validation set to score
        bool improved_loss = stats.val_loss < log.best_val_loss;
        if (improved_loss) {
            log.best_val_loss = stats.val_loss;
            since_best = 0;
        }
        if (have_val ? stats.val_accuracy > best_accuracy : improved_loss) {
            best_accuracy = stats.val_accuracy;
            log.best_epoch = epoch;
            best = model.snapshot_state();
        }
        if (!improved_loss && config.patience > 0 && ++since_best >= config.patience) break;
    }
    if (!best.empty()) model.restore_state(best);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return log;
}

nn::Tensor<float> predict_logits(CaeCnnModel& model, const nn::Tensor<float>& images, int batch_size) {
    if (images.rank() != 4) raise(ErrorCode::shape, "predict: expected (n,h,w,c) images");
    const size_t n = size_t(images.dim(0));
    const int k = model.spec().class_count;
    nn::Tensor<float> out({int(n), k});
    for (size_t from = 0; from < n; from += size_t(batch_size)) {
        size_t to = std::min(n, from + size_t(batch_size));
        nn::Tensor<float> x = slice_images(images, from, to);
        nn::Tensor<float> logit = model.logits(x, nn::Mode::infer);
        std::copy(logit.data(), logit.data() + logit.size(), out.data() + from * size_t(k));
    }
    return out;
}

std::vector<int> predict_classes(CaeCnnModel& model, const nn::Tensor<float>& images, int batch_size) {
    return argmax_rows(predict_logits(model, images, batch_size));
}

std::vector<int> argmax_rows(const nn::Tensor<float>& scores) {
    if (scores.rank() != 2) raise(ErrorCode::shape, "argmax: expected (n, classes)");
    const int n = scores.dim(0), c = scores.dim(1);
    std::vector<int> out(size_t(n), 0);
    for (int r = 0; r < n; ++r) {
        const float* row = &scores.at(r, 0);
        int best = 0;
        for (int j = 1; j < c; ++j) {
            if (row[j] > row[best]) best = j;
        }
        out[size_t(r)] = best;
    }
    return out;
}

} // namespace caeloc
