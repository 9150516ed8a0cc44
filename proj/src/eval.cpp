#include "eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"

#include "error.hpp"
#include "nn/rng.hpp"

namespace caeloc {

using nlohmann::json;

double percentile(std::vector<double> values, double q) {
    if (values.empty()) raise(ErrorCode::validation, "percentile: empty sample");
    if (q < 0.0 || q > 1.0) raise(ErrorCode::validation, "percentile: q outside [0,1]");
    std::sort(values.begin(), values.end());
    double pos = q * double(values.size() - 1);
    size_t lo = size_t(pos);
    double frac = pos - double(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

std::string EvalReport::to_json() const {
    json j;
    j["building_hitrate"] = building_hitrate;
    j["floor_hitrate"] = floor_hitrate;
    j["mean_error"] = mean_error;
    j["p50_error"] = p50_error;
    j["p75_error"] = p75_error;
    j["p95_error"] = p95_error;
    j["sample_count"] = sample_count;
    j["unmapped_count"] = unmapped_count;
    if (!model_size_bytes.empty()) j["model_size_bytes"] = model_size_bytes;
    if (!latency.empty()) {
        json lj = json::object();
        for (const auto& [k, v] : latency) {
            lj[k] = {{"median_us", v.median_us}, {"p95_us", v.p95_us}, {"repetitions", v.repetitions}};
        }
        j["latency"] = std::move(lj);
    }
    return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    EvalReport r;
    try {
        json j = json::parse(text);
        r.building_hitrate = j.at("building_hitrate").get<double>();
        r.floor_hitrate = j.at("floor_hitrate").get<double>();
        r.mean_error = j.at("mean_error").get<double>();
        r.p50_error = j.at("p50_error").get<double>();
        r.p75_error = j.at("p75_error").get<double>();
        r.p95_error = j.at("p95_error").get<double>();
        r.sample_count = j.at("sample_count").get<int>();
        r.unmapped_count = j.at("unmapped_count").get<int>();
        if (j.contains("model_size_bytes")) {
            r.model_size_bytes = j["model_size_bytes"].get<std::map<std::string, uint64_t>>();
        }
        if (j.contains("latency")) {
            for (auto& [k, v] : j["latency"].items()) {
                LatencyStats s;
                s.median_us = v.at("median_us").get<double>();
                s.p95_us = v.at("p95_us").get<double>();
                s.repetitions = v.at("repetitions").get<int>();
                r.latency[k] = s;
            }
        }
    } catch (const json::exception& e) {
        raise(ErrorCode::parse, std::string("report: bad json: ") + e.what());
    }
    return r;
}

EvalReport evaluate(const ClassPredictor& predict, const std::vector<FingerprintRecord>& test,
                    const DatasetManifest& manifest, const GridMap& grid) {
    if (test.empty()) raise(ErrorCode::validation, "evaluate: empty test set");
    if (grid.class_count() == 0) raise(ErrorCode::validation, "evaluate: empty grid");

    const size_t n = test.size();
    std::vector<int> classes(n);
    const size_t chunk = 256;
    for (size_t from = 0; from < n; from += chunk) {
        size_t to = std::min(n, from + chunk);
        std::vector<int> idx(to - from);
        std::iota(idx.begin(), idx.end(), int(from));
        nn::Tensor<float> images = radio_image_batch(test, manifest, &idx);
        std::vector<int> pred = predict(images);
        if (pred.size() != to - from) raise(ErrorCode::internal, "evaluate: predictor returned wrong count");
        std::copy(pred.begin(), pred.end(), classes.begin() + long(from));
    }

    EvalReport r;
    r.sample_count = int(n);
    std::vector<double> errors(n);
    size_t floor_hits = 0, building_hits = 0, building_total = 0;
    for (size_t i = 0; i < n; ++i) {
        const FingerprintRecord& rec = test[i];
        if (classes[i] < 0 || classes[i] >= grid.class_count()) {
            raise(ErrorCode::validation, "evaluate: predicted class out of range");
        }
        const GridCell& cell = grid.cell(classes[i]);
        double dx = rec.x - cell.centroid_x, dy = rec.y - cell.centroid_y;
        errors[i] = std::sqrt(dx * dx + dy * dy);
        if (cell.floor == rec.floor) ++floor_hits;
        if (rec.has_building()) {
            ++building_total;
            if (cell.building == rec.building) ++building_hits;
        }
        if (!grid.assign(rec)) ++r.unmapped_count;
    }
    r.floor_hitrate = double(floor_hits) / double(n);
    r.building_hitrate = building_total ? double(building_hits) / double(building_total) : 0.0;
    r.mean_error = std::accumulate(errors.begin(), errors.end(), 0.0) / double(n);
    r.p50_error = percentile(errors, 0.50);
    r.p75_error = percentile(errors, 0.75);
    r.p95_error = percentile(errors, 0.95);
    return r;
}

std::vector<FingerprintRecord> inject_noise(const std::vector<FingerprintRecord>& records,
                                            const DatasetManifest& manifest, double magnitude,
                                            uint64_t seed) {
    if (magnitude < 0.0) raise(ErrorCode::validation, "noise: magnitude must be >= 0");
    std::vector<FingerprintRecord> out = records;
    if (magnitude == 0.0) return out;
    nn::Rng rng(seed);
    const float sentinel = float(manifest.no_signal_sentinel);
    const float lo = float(manifest.rssi_min);
    for (FingerprintRecord& rec : out) {
        for (float& v : rec.rssi) {
            if (v == sentinel) continue;
            double noisy = double(v) + rng.uniform(-magnitude, magnitude);
            v = float(std::clamp(noisy, double(lo), 0.0));
        }
    }
    return out;
}

EvalReport knn_baseline(const std::vector<FingerprintRecord>& train,
                        const std::vector<FingerprintRecord>& test, const DatasetManifest& manifest,
                        int k, KnnWeighting weighting) {
    if (k < 1) raise(ErrorCode::validation, "knn: k must be >= 1");
    if (size_t(k) > train.size()) raise(ErrorCode::validation, "knn: k exceeds the training set");
    if (test.empty()) raise(ErrorCode::validation, "knn: empty test set");

    // normalized feature matrix for the training side, computed once
    const int ap = manifest.ap_count;
    std::vector<float> feats(train.size() * size_t(ap));
    for (size_t i = 0; i < train.size(); ++i) {
        RadioImage img = to_radio_image(train[i], manifest);
        std::copy(img.pixels.begin(), img.pixels.begin() + ap, feats.begin() + long(i * size_t(ap)));
    }

    EvalReport r;
    r.sample_count = int(test.size());
    std::vector<double> errors(test.size());
    size_t floor_hits = 0, building_hits = 0, building_total = 0;
    std::vector<std::pair<double, int>> dist(train.size());
    for (size_t t = 0; t < test.size(); ++t) {
        RadioImage q = to_radio_image(test[t], manifest);
        for (size_t i = 0; i < train.size(); ++i) {
            const float* f = feats.data() + i * size_t(ap);
            double d = 0.0;
            for (int a = 0; a < ap; ++a) {
                double diff = double(q.pixels[size_t(a)]) - double(f[a]);
                d += diff * diff;
            }
            dist[i] = {d, int(i)};
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

        double px = 0.0, py = 0.0, wsum = 0.0;
        for (int j = 0; j < k; ++j) {
            const FingerprintRecord& nb = train[size_t(dist[size_t(j)].second)];
            double w = 1.0;
            if (weighting == KnnWeighting::inverse_distance) {
                w = 1.0 / (std::sqrt(dist[size_t(j)].first) + 1e-9);
            }
            px += w * nb.x;
            py += w * nb.y;
            wsum += w;
        }
        px /= wsum;
        py /= wsum;

        // majority floor/building; the nearest neighbor breaks ties
        auto majority = [&](auto getter) {
            std::map<int, int> counts;
            for (int j = 0; j < k; ++j) counts[getter(train[size_t(dist[size_t(j)].second)])]++;
            int best = getter(train[size_t(dist[0].second)]);
            int best_count = counts[best];
            for (const auto& [label, count] : counts) {
                if (count > best_count) {
                    best = label;
                    best_count = count;
                }
            }
            return best;
        };
        int floor = majority([](const FingerprintRecord& rec) { return rec.floor; });
        const FingerprintRecord& rec = test[t];
        double dx = rec.x - px, dy = rec.y - py;
        errors[t] = std::sqrt(dx * dx + dy * dy);
        if (floor == rec.floor) ++floor_hits;
        if (rec.has_building()) {
            ++building_total;
            int building = majority([](const FingerprintRecord& rr) { return rr.building; });
            if (building == rec.building) ++building_hits;
        }
    }
    r.floor_hitrate = double(floor_hits) / double(test.size());
    r.building_hitrate = building_total ? double(building_hits) / double(building_total) : 0.0;
    r.mean_error = std::accumulate(errors.begin(), errors.end(), 0.0) / double(errors.size());
    r.p50_error = percentile(errors, 0.50);
    r.p75_error = percentile(errors, 0.75);
    r.p95_error = percentile(errors, 0.95);
    return r;
}

LatencyStats latency_bench(const ClassPredictor& predict, const nn::Tensor<float>& images,
                           int repetitions) {
    if (repetitions < 30) raise(ErrorCode::validation, "bench: need at least 30 repetitions");
    if (images.rank() != 4) raise(ErrorCode::shape, "bench: expected (n,h,w,c) images");
    const int n = images.dim(0);
    const int h = images.dim(1), w = images.dim(2), c = images.dim(3);
    const size_t stride = size_t(h) * size_t(w) * size_t(c);

    // pre-slice single-image tensors so the timed region is inference only
    std::vector<nn::Tensor<float>> singles;
    singles.reserve(size_t(std::min(n, repetitions)));
    for (int i = 0; i < std::min(n, repetitions); ++i) {
        nn::Tensor<float> one({1, h, w, c});
        std::copy(images.data() + size_t(i) * stride, images.data() + size_t(i + 1) * stride, one.data());
        singles.push_back(std::move(one));
    }

    for (size_t i = 0; i < std::min<size_t>(5, singles.size()); ++i) predict(singles[i]);  // warm-up

    std::vector<double> micros(size_t(repetitions), 0.0);
    for (int rep = 0; rep < repetitions; ++rep) {
        const nn::Tensor<float>& one = singles[size_t(rep) % singles.size()];
        auto t0 = std::chrono::steady_clock::now();
        predict(one);
        auto t1 = std::chrono::steady_clock::now();
        micros[size_t(rep)] = std::chrono::duration<double, std::micro>(t1 - t0).count();
    }
    LatencyStats s;
    s.median_us = percentile(micros, 0.50);
    s.p95_us = percentile(micros, 0.95);
    s.repetitions = repetitions;
    return s;
}

} // namespace caeloc
