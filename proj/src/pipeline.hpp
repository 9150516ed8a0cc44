#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "eval.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "synth.hpp"

namespace caeloc {

// One experiment, fully described: dataset source, grid, split protocol,
// training hyper-parameters, precisions to emit. The config file is the
// single source of truth; every artifact embeds it. Output lands in
// <output_dir>/<run_name>/ where the default run name is derived from the
// config itself, so reruns of the same config hit the same directory.
struct RunConfig {
    uint64_t seed = 0;  // mandatory in the file
    std::string run_name;
    std::string output_dir = "runs";

    // dataset: either CSV files under a manifest, or the synthetic corpus
    std::string dataset_kind = "csv";  // csv | synthetic
    std::string manifest = "uji";      // builtin name or manifest JSON path
    std::string train_csv;
    std::string test_csv;
    SynthConfig synth;

    double cell_length = 7.0;
    bool auto_origin = true;
    double origin_x = 0.0, origin_y = 0.0;

    std::string split_mode = "original";  // original | combined
    double val_fraction = 0.1;            // original mode: carved from the training file
    std::array<double, 3> fractions = {0.7, 0.1, 0.2};  // combined mode

    TrainConfig train;
    ModelSpec model;  // class_count/image_side filled from data at run time

    std::vector<std::string> precisions = {"f32", "f16", "i8"};

    std::vector<double> noise_magnitudes = {0, 3, 5, 7, 10};
    int noise_seeds = 5;
    int bench_repetitions = 200;

    std::string resolved_run_name() const;
    std::string run_dir() const;

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig from_json_file(const std::string& path);

    void validate() const;
};

// Records with grid, labels and split indices, ready for tensor building.
struct PreparedData {
    DatasetManifest manifest;
    std::vector<FingerprintRecord> pool;
    std::vector<int> train_idx, val_idx, test_idx;
    GridMap grid;
    std::vector<int> labels;  // per pool record; -1 where the cell is unmapped
};

PreparedData prepare_data(const RunConfig& config);

// Each command returns a JSON summary of what it wrote and the headline
// numbers; failures raise.
std::string run_prepare(const RunConfig& config);
std::string run_train(const RunConfig& config);
std::string run_quantize(const RunConfig& config, const std::string& model_path);
std::string run_evaluate(const RunConfig& config, const std::string& model_path);
std::string run_sweep_l(const RunConfig& config, const std::vector<double>& cell_lengths);
std::string run_sweep_noise(const RunConfig& config, const std::string& model_path);
std::string run_bench(const RunConfig& config, const std::vector<std::string>& model_paths);
std::string run_predict(const std::string& model_path, const std::string& input_csv);

// Resolve a data path against the dataset cache directory env var when the
// path is relative and does not exist as given.
std::string resolve_data_path(const std::string& path);

extern const char* kDataDirEnv;  // CAELOC_DATA_DIR

} // namespace caeloc
