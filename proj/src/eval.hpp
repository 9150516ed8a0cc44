#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "grid.hpp"

namespace caeloc {

struct LatencyStats {
    double median_us = 0.0;
    double p95_us = 0.0;
    int repetitions = 0;
};

struct EvalReport {
    double building_hitrate = 0.0;  // over records that carry a building label
    double floor_hitrate = 0.0;
    double mean_error = 0.0;  // meters
    double p50_error = 0.0;
    double p75_error = 0.0;
    double p95_error = 0.0;
    int sample_count = 0;
    int unmapped_count = 0;  // test points whose true cell holds no training sample
    std::map<std::string, uint64_t> model_size_bytes;  // precision -> payload bytes
    std::map<std::string, LatencyStats> latency;       // precision -> per-sample stats

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
};

// Batch class predictor: (n,h,w,1) radio images -> n class ids.
using ClassPredictor = std::function<std::vector<int>(const nn::Tensor<float>&)>;

// Score a predictor against exact positions: each record gets a predicted
// cell whose centroid is the reported position. Records whose true cell is
// not in the grid still count (they are also tallied as unmapped).
EvalReport evaluate(const ClassPredictor& predict, const std::vector<FingerprintRecord>& test,
                    const DatasetManifest& manifest, const GridMap& grid);

// Uniform noise in [-magnitude, +magnitude] dBm added to every non-sentinel
// RSSI, clamped back into [rssi_min, 0]. Deterministic under the seed.
std::vector<FingerprintRecord> inject_noise(const std::vector<FingerprintRecord>& records,
                                            const DatasetManifest& manifest, double magnitude,
                                            uint64_t seed);

enum class KnnWeighting { uniform, inverse_distance };

// Nearest-neighbor baseline in normalized RSSI space: position is the
// (weighted) mean of the k neighbors' exact positions, floor/building by
// neighbor majority with ties going to the nearest neighbor.
EvalReport knn_baseline(const std::vector<FingerprintRecord>& train,
                        const std::vector<FingerprintRecord>& test, const DatasetManifest& manifest,
                        int k, KnnWeighting weighting);

// Single-image wall time over `repetitions` draws (after an untimed
// warm-up), cycling through the given images.
LatencyStats latency_bench(const ClassPredictor& predict, const nn::Tensor<float>& images,
                           int repetitions);

// Linear-interpolation percentile of an unsorted sample, q in [0,1].
double percentile(std::vector<double> values, double q);

} // namespace caeloc
