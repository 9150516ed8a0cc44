#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>

#include "json.hpp"

#include "error.hpp"
#include "log.hpp"
#include "nn/loss.hpp"
#include "nn/rng.hpp"
#include "quant.hpp"
#include "serialize.hpp"

namespace caeloc {

namespace fs = std::filesystem;
using nlohmann::json;

const char* kDataDirEnv = "CAELOC_DATA_DIR";

std::string resolve_data_path(const std::string& path) {
    if (path.empty() || fs::exists(path)) return path;
    if (fs::path(path).is_absolute()) return path;
    const char* base = std::getenv(kDataDirEnv);
    if (!base || !*base) return path;
    fs::path joined = fs::path(base) / path;
    if (fs::exists(joined)) return joined.string();
    return path;
}

namespace {

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

json synth_to_json(const SynthConfig& s) {
    return json{{"buildings", s.buildings},
                {"floors_per_building", s.floors_per_building},
                {"aps_per_floor", s.aps_per_floor},
                {"train_records", s.train_records},
                {"test_records", s.test_records},
                {"spot_spacing", s.spot_spacing},
                {"shadow_sigma", s.shadow_sigma},
                {"seed", s.seed}};
}

void synth_from_json(const json& j, SynthConfig& s) {
    s.buildings = j.value("buildings", s.buildings);
    if (j.contains("floors_per_building")) {
        s.floors_per_building = j["floors_per_building"].get<std::vector<int>>();
    }
    s.aps_per_floor = j.value("aps_per_floor", s.aps_per_floor);
    s.train_records = j.value("train_records", s.train_records);
    s.test_records = j.value("test_records", s.test_records);
    s.spot_spacing = j.value("spot_spacing", s.spot_spacing);
    s.shadow_sigma = j.value("shadow_sigma", s.shadow_sigma);
    s.seed = j.value("seed", s.seed);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::io, "cannot write " + path);
    out << text;
    if (!out) raise(ErrorCode::io, "write failed for " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::io, "cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

std::string RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    if (!run_name.empty()) j["run_name"] = run_name;
    j["output_dir"] = output_dir;
    json ds;
    ds["kind"] = dataset_kind;
    ds["manifest"] = manifest;
    if (!train_csv.empty()) ds["train_csv"] = train_csv;
    if (!test_csv.empty()) ds["test_csv"] = test_csv;
    if (dataset_kind == "synthetic") ds["synthetic"] = synth_to_json(synth);
    j["dataset"] = std::move(ds);
    json grid;
    grid["cell_length"] = cell_length;
    grid["auto_origin"] = auto_origin;
    if (!auto_origin) grid["origin"] = {origin_x, origin_y};
    j["grid"] = std::move(grid);
    json split;
    split["mode"] = split_mode;
    split["val_fraction"] = val_fraction;
    split["fractions"] = fractions;
    j["split"] = std::move(split);
    j["train"] = {{"cae_epochs", train.cae_epochs},
                  {"classifier_epochs", train.classifier_epochs},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"patience", train.patience}};
    j["model"] = {{"conv1_filters", model.conv1_filters}, {"conv2_filters", model.conv2_filters},
                  {"conv3_filters", model.conv3_filters}, {"kernel", model.kernel},
                  {"pool", model.pool},                   {"pool_stride", model.pool_stride},
                  {"dropout_rate", model.dropout_rate}};
    j["precisions"] = precisions;
    j["noise"] = {{"magnitudes", noise_magnitudes}, {"seeds", noise_seeds}};
    j["bench"] = {{"repetitions", bench_repetitions}};
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    RunConfig c;
    try {
        json j = json::parse(text);
        static const char* known[] = {"seed",  "run_name", "output_dir", "dataset", "grid",
                                      "split", "train",    "model",      "precisions", "noise",
                                      "bench"};
        for (auto& [key, _] : j.items()) {
            if (std::find_if(std::begin(known), std::end(known),
                             [&](const char* k) { return key == k; }) == std::end(known)) {
                raise(ErrorCode::config, "config: unknown key '" + key + "'");
            }
        }
        if (!j.contains("seed")) raise(ErrorCode::config, "config: seed is mandatory");
        c.seed = j.at("seed").get<uint64_t>();
        c.run_name = j.value("run_name", "");
        c.output_dir = j.value("output_dir", c.output_dir);
        if (j.contains("dataset")) {
            const json& ds = j["dataset"];
            c.dataset_kind = ds.value("kind", c.dataset_kind);
            c.manifest = ds.value("manifest", c.manifest);
            c.train_csv = ds.value("train_csv", "");
            c.test_csv = ds.value("test_csv", "");
            if (ds.contains("synthetic")) synth_from_json(ds["synthetic"], c.synth);
        }
        if (j.contains("grid")) {
            const json& g = j["grid"];
            c.cell_length = g.value("cell_length", c.cell_length);
            if (g.contains("origin")) {
                c.auto_origin = false;
                c.origin_x = g["origin"][0].get<double>();
                c.origin_y = g["origin"][1].get<double>();
            }
            c.auto_origin = g.value("auto_origin", c.auto_origin);
        }
        if (j.contains("split")) {
            const json& s = j["split"];
            c.split_mode = s.value("mode", c.split_mode);
            c.val_fraction = s.value("val_fraction", c.val_fraction);
            if (s.contains("fractions")) {
                auto f = s["fractions"].get<std::vector<double>>();
                if (f.size() != 3) raise(ErrorCode::config, "config: fractions must have 3 entries");
                c.fractions = {f[0], f[1], f[2]};
            }
        }
        if (j.contains("train")) {
            const json& t = j["train"];
            c.train.cae_epochs = t.value("cae_epochs", c.train.cae_epochs);
            c.train.classifier_epochs = t.value("classifier_epochs", c.train.classifier_epochs);
            c.train.batch_size = t.value("batch_size", c.train.batch_size);
            c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
            c.train.patience = t.value("patience", c.train.patience);
        }
        if (j.contains("model")) {
            const json& m = j["model"];
            c.model.conv1_filters = m.value("conv1_filters", c.model.conv1_filters);
            c.model.conv2_filters = m.value("conv2_filters", c.model.conv2_filters);
            c.model.conv3_filters = m.value("conv3_filters", c.model.conv3_filters);
            c.model.kernel = m.value("kernel", c.model.kernel);
            c.model.pool = m.value("pool", c.model.pool);
            c.model.pool_stride = m.value("pool_stride", c.model.pool_stride);
            c.model.dropout_rate = m.value("dropout_rate", c.model.dropout_rate);
        }
        if (j.contains("precisions")) c.precisions = j["precisions"].get<std::vector<std::string>>();
        if (j.contains("noise")) {
            c.noise_magnitudes = j["noise"].value("magnitudes", c.noise_magnitudes);
            c.noise_seeds = j["noise"].value("seeds", c.noise_seeds);
        }
        if (j.contains("bench")) c.bench_repetitions = j["bench"].value("repetitions", c.bench_repetitions);
    } catch (const json::exception& e) {
        raise(ErrorCode::parse, std::string("config: bad json: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    return from_json(read_text(resolve_data_path(path)));
}

void RunConfig::validate() const {
    if (dataset_kind != "csv" && dataset_kind != "synthetic") {
        raise(ErrorCode::config, "config: dataset kind must be csv or synthetic");
    }
    if (dataset_kind == "csv" && (train_csv.empty() || test_csv.empty())) {
        raise(ErrorCode::config, "config: csv datasets need train_csv and test_csv");
    }
    if (split_mode != "original" && split_mode != "combined") {
        raise(ErrorCode::config, "config: split mode must be original or combined");
    }
    if (!(cell_length > 0)) raise(ErrorCode::config, "config: cell_length must be positive");
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
        raise(ErrorCode::config, "config: val_fraction must be in [0,1)");
    }
    for (const std::string& p : precisions) {
        if (p != "f32" && p != "f16" && p != "i8") {
            raise(ErrorCode::config, "config: unknown precision " + p);
        }
    }
    train.validate();
}

std::string RunConfig::resolved_run_name() const {
    if (!run_name.empty()) return run_name;
    RunConfig canon = *this;
    canon.run_name.clear();
    uint64_t h = fnv1a64(canon.to_json());
    char buf[80];
    std::snprintf(buf, sizeof buf, "l%g-%s-s%llu-%08llx", cell_length, split_mode.c_str(),
                  (unsigned long long)seed, (unsigned long long)(h & 0xFFFFFFFFULL));
    return buf;
}

std::string RunConfig::run_dir() const {
    return (fs::path(output_dir) / resolved_run_name()).string();
}

PreparedData prepare_data(const RunConfig& config) {
    config.validate();
    PreparedData out;
    std::vector<FingerprintRecord> train_recs, test_recs;
    if (config.dataset_kind == "synthetic") {
        SynthConfig sc = config.synth;
        if (sc.seed == 0) sc.seed = config.seed;
        SynthDataset d = generate_synthetic(sc);
        out.manifest = d.manifest;
        train_recs = std::move(d.train);
        test_recs = std::move(d.test);
    } else {
        if (config.manifest == "uji") {
            out.manifest = DatasetManifest::uji();
        } else {
            out.manifest = DatasetManifest::from_json_file(resolve_data_path(config.manifest));
        }
        train_recs = load_dataset(resolve_data_path(config.train_csv), out.manifest);
        test_recs = load_dataset(resolve_data_path(config.test_csv), out.manifest);
    }
    if (train_recs.empty()) raise(ErrorCode::validation, "prepare: empty training set");
    if (test_recs.empty()) raise(ErrorCode::validation, "prepare: empty test set");

    const size_t n_train = train_recs.size();
    if (config.split_mode == "combined") {
        SplitResult split = combined_split(train_recs, test_recs, config.cell_length,
                                           config.fractions, config.seed);
        out.pool = std::move(train_recs);
        out.pool.insert(out.pool.end(), test_recs.begin(), test_recs.end());
        out.grid = std::move(split.grid);
        out.train_idx = std::move(split.train);
        out.val_idx = std::move(split.val);
        out.test_idx = std::move(split.test);
    } else {
        out.pool = std::move(train_recs);
        out.pool.insert(out.pool.end(), test_recs.begin(), test_recs.end());
        std::vector<FingerprintRecord> train_view(out.pool.begin(), out.pool.begin() + long(n_train));
        if (config.auto_origin) {
            out.grid = build_grid_auto_origin(train_view, config.cell_length);
        } else {
            GridConfig gc{config.cell_length, config.origin_x, config.origin_y};
            out.grid = build_grid(train_view, gc);
        }
        std::vector<int> order(n_train);
        std::iota(order.begin(), order.end(), 0);
        nn::Rng rng(config.seed ^ 0x76616cULL);  // independent of training shuffles
        rng.shuffle(order);
        size_t n_val = size_t(std::llround(double(n_train) * config.val_fraction));
        out.val_idx.assign(order.begin(), order.begin() + long(n_val));
        out.train_idx.assign(order.begin() + long(n_val), order.end());
        std::sort(out.val_idx.begin(), out.val_idx.end());
        std::sort(out.train_idx.begin(), out.train_idx.end());
        out.test_idx.resize(test_recs.size());
        std::iota(out.test_idx.begin(), out.test_idx.end(), int(n_train));
    }

    out.labels.resize(out.pool.size());
    for (size_t i = 0; i < out.pool.size(); ++i) {
        auto cid = out.grid.assign(out.pool[i]);
        out.labels[i] = cid ? *cid : -1;
    }
    for (int i : out.train_idx) {
        if (out.labels[size_t(i)] < 0) raise(ErrorCode::internal, "prepare: unmapped training record");
    }
    for (int i : out.val_idx) {
        if (out.labels[size_t(i)] < 0) raise(ErrorCode::internal, "prepare: unmapped validation record");
    }
    return out;
}

namespace {

json index_stats(const PreparedData& d) {
    int unmapped_test = 0;
    for (int i : d.test_idx) {
        if (d.labels[size_t(i)] < 0) ++unmapped_test;
    }
    return json{{"pool_records", d.pool.size()},
                {"train_records", d.train_idx.size()},
                {"val_records", d.val_idx.size()},
                {"test_records", d.test_idx.size()},
                {"classes", d.grid.class_count()},
                {"unmapped_test_records", unmapped_test}};
}

void write_prepare_artifacts(const RunConfig& config, const PreparedData& d) {
    fs::create_directories(config.run_dir());
    const std::string dir = config.run_dir();
    write_text(dir + "/config.json", config.to_json());
    d.grid.save(dir + "/grid.json", config.to_json());
    json split;
    split["config"] = json::parse(config.to_json());
    split["train"] = d.train_idx;
    split["val"] = d.val_idx;
    split["test"] = d.test_idx;
    split["stats"] = index_stats(d);
    write_text(dir + "/split.json", split.dump(2));
}

std::vector<int> gather_labels(const PreparedData& d, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) out[i] = d.labels[size_t(idx[i])];
    return out;
}

std::vector<FingerprintRecord> gather_records(const PreparedData& d, const std::vector<int>& idx) {
    std::vector<FingerprintRecord> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(d.pool[size_t(i)]);
    return out;
}

struct LoadedModel {
    ModelFile file;
    std::shared_ptr<CaeCnnModel> float_model;  // f32 / f16
    std::shared_ptr<Int8Engine> int8_model;    // i8

    nn::Tensor<float> logits(const nn::Tensor<float>& images) const {
        if (int8_model) return int8_model->logits(images);
        return predict_logits(*float_model, images);
    }

    ClassPredictor predictor() const {
        if (int8_model) {
            auto m = int8_model;
            return [m](const nn::Tensor<float>& images) { return m->predict(images); };
        }
        auto m = float_model;
        return [m](const nn::Tensor<float>& images) { return predict_classes(*m, images); };
    }
};

LoadedModel load_model_file(const std::string& path) {
    LoadedModel lm;
    lm.file = ModelFile::load(resolve_data_path(path));
    if (lm.file.precision == "i8") {
        lm.int8_model = std::make_shared<Int8Engine>(lm.file);
    } else {
        lm.float_model = std::make_shared<CaeCnnModel>(unpack_model(lm.file));
    }
    return lm;
}

GridMap load_model_grid(const std::string& model_path, const ModelFile& file) {
    if (file.grid_ref.empty()) raise(ErrorCode::schema, "model file: missing grid reference");
    fs::path p = fs::path(model_path).parent_path() / file.grid_ref;
    return GridMap::load(p.string());
}

std::string curve_csv(const TrainLog& cae, const TrainLog& clf) {
    std::string out = "stage,epoch,train_loss,val_loss,val_accuracy\n";
    for (const EpochStats& e : cae.epochs) {
        out += "cae," + std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
               format_double(e.val_loss) + ",\n";
    }
    for (const EpochStats& e : clf.epochs) {
        out += "classifier," + std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
               format_double(e.val_loss) + "," + format_double(e.val_accuracy) + "\n";
    }
    return out;
}

} // namespace

std::string run_prepare(const RunConfig& config) {
    PreparedData d = prepare_data(config);
    write_prepare_artifacts(config, d);
    json out;
    out["run_dir"] = config.run_dir();
    out["grid_file"] = config.run_dir() + "/grid.json";
    out["split_file"] = config.run_dir() + "/split.json";
    out["stats"] = index_stats(d);
    return out.dump(2);
}

std::string run_train(const RunConfig& config) {
    PreparedData d = prepare_data(config);
    write_prepare_artifacts(config, d);
    const std::string dir = config.run_dir();

    nn::Tensor<float> train_images = radio_image_batch(d.pool, d.manifest, &d.train_idx);
    nn::Tensor<float> val_images;
    if (!d.val_idx.empty()) val_images = radio_image_batch(d.pool, d.manifest, &d.val_idx);
    std::vector<int> train_labels = gather_labels(d, d.train_idx);
    std::vector<int> val_labels = gather_labels(d, d.val_idx);

    ModelSpec spec = config.model;
    spec.image_side = radio_image_side(d.manifest.ap_count);
    spec.class_count = d.grid.class_count();
    spec.seed = config.seed;
    CaeCnnModel model(spec);

    TrainConfig tc = config.train;
    tc.seed = config.seed;
    EpochCallback cae_progress = [](const EpochStats& e) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "cae epoch %d: train %.6f val %.6f", e.epoch,
                      e.train_loss, e.val_loss);
        log_line(buf);
    };
    EpochCallback clf_progress = [](const EpochStats& e) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "classifier epoch %d: train %.6f val %.6f acc %.4f",
                      e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
        log_line(buf);
    };
    TrainLog cae_log = train_cae(model, train_images, val_images, tc, cae_progress);
    TrainLog clf_log = train_classifier(model, train_images, train_labels, val_images, val_labels,
                                        tc, clf_progress);
    write_text(dir + "/training_curve.csv", curve_csv(cae_log, clf_log));

    json meta;
    meta["config"] = json::parse(config.to_json());
    meta["manifest"] = json::parse(d.manifest.to_json());
    meta["training"] = {{"cae_best_epoch", cae_log.best_epoch},
                        {"cae_best_val_loss", cae_log.best_val_loss},
                        {"cae_epochs_run", cae_log.epochs.size()},
                        {"classifier_best_epoch", clf_log.best_epoch},
                        {"classifier_best_val_loss", clf_log.best_val_loss},
                        {"classifier_epochs_run", clf_log.epochs.size()}};
    ModelFile f32 = pack_model(model, "grid.json", meta.dump());

    json out;
    out["run_dir"] = dir;
    out["classes"] = spec.class_count;
    out["parameters"] = model.classifier_parameter_count();
    out["cae_seconds"] = cae_log.seconds;
    out["classifier_seconds"] = clf_log.seconds;
    out["classifier_best_val_loss"] = clf_log.best_val_loss;
    json files = json::object();
    for (const std::string& p : config.precisions) {
        ModelFile mf = p == "f32" ? f32 : (p == "f16" ? quantize_f16(f32) : quantize_int8(f32));
        std::string path = dir + "/model_" + p + ".cclm";
        mf.save(path);
        files[p] = {{"path", path}, {"payload_bytes", mf.payload_bytes()}, {"file_bytes", mf.file_bytes()}};
    }
    if (!files.contains("f32")) {  // the checkpoint is always kept
        std::string path = dir + "/model_f32.cclm";
        f32.save(path);
        files["f32"] = {{"path", path}, {"payload_bytes", f32.payload_bytes()}, {"file_bytes", f32.file_bytes()}};
    }
    out["models"] = std::move(files);
    return out.dump(2);
}

std::string run_quantize(const RunConfig& config, const std::string& model_path) {
    ModelFile f32 = ModelFile::load(resolve_data_path(model_path));
    if (f32.precision != "f32") raise(ErrorCode::state, "quantize: source must be an f32 model");
    fs::path dir = fs::path(model_path).parent_path();
    json out;
    out["source"] = {{"path", model_path}, {"payload_bytes", f32.payload_bytes()}};
    for (const std::string& p : config.precisions) {
        if (p == "f32") continue;
        ModelFile mf = p == "f16" ? quantize_f16(f32) : quantize_int8(f32);
        std::string path = (dir / ("model_" + p + ".cclm")).string();
        mf.save(path);
        out[p] = {{"path", path},
                  {"payload_bytes", mf.payload_bytes()},
                  {"file_bytes", mf.file_bytes()},
                  {"payload_ratio", double(mf.payload_bytes()) / double(f32.payload_bytes())}};
    }
    return out.dump(2);
}

std::string run_evaluate(const RunConfig& config, const std::string& model_path) {
    LoadedModel lm = load_model_file(model_path);
    GridMap grid = load_model_grid(model_path, lm.file);
    PreparedData d = prepare_data(config);
    if (grid.class_count() != d.grid.class_count()) {
        raise(ErrorCode::state, "evaluate: model grid does not match the configured data");
    }
    std::vector<FingerprintRecord> test = gather_records(d, d.test_idx);
    EvalReport report = evaluate(lm.predictor(), test, d.manifest, grid);
    report.model_size_bytes[lm.file.precision] = lm.file.payload_bytes();

    json out;
    out["config"] = json::parse(config.to_json());
    out["model"] = model_path;
    out["precision"] = lm.file.precision;
    out["report"] = json::parse(report.to_json());
    std::string path = (fs::path(model_path).parent_path() /
                        ("report_" + lm.file.precision + ".json")).string();
    write_text(path, out.dump(2));
    return out.dump(2);
}

std::string run_sweep_noise(const RunConfig& config, const std::string& model_path) {
    LoadedModel lm = load_model_file(model_path);
    GridMap grid = load_model_grid(model_path, lm.file);
    PreparedData d = prepare_data(config);
    std::vector<FingerprintRecord> test = gather_records(d, d.test_idx);

    std::string csv = "magnitude,mean_error,p50_error,p75_error,p95_error,floor_hitrate,building_hitrate,seeds\n";
    json rows = json::array();
    for (double mag : config.noise_magnitudes) {
        double mean = 0, p50 = 0, p75 = 0, p95 = 0, floor = 0, building = 0;
        const int seeds = std::max(1, config.noise_seeds);
        for (int s = 0; s < seeds; ++s) {
            uint64_t noise_seed = config.seed + 1000003ULL * uint64_t(s + 1);
            std::vector<FingerprintRecord> noisy = inject_noise(test, d.manifest, mag, noise_seed);
            EvalReport r = evaluate(lm.predictor(), noisy, d.manifest, grid);
            mean += r.mean_error;
            p50 += r.p50_error;
            p75 += r.p75_error;
            p95 += r.p95_error;
            floor += r.floor_hitrate;
            building += r.building_hitrate;
        }
        mean /= seeds; p50 /= seeds; p75 /= seeds; p95 /= seeds; floor /= seeds; building /= seeds;
        log_line("noise " + format_double(mag) + " dBm: mean error " + format_double(mean));
        csv += format_double(mag) + "," + format_double(mean) + "," + format_double(p50) + "," +
               format_double(p75) + "," + format_double(p95) + "," + format_double(floor) + "," +
               format_double(building) + "," + std::to_string(seeds) + "\n";
        rows.push_back({{"magnitude", mag}, {"mean_error", mean}, {"floor_hitrate", floor},
                        {"building_hitrate", building}, {"seeds", seeds}});
    }
    fs::path dir = fs::path(model_path).parent_path();
    write_text((dir / "noise_sweep.csv").string(), csv);
    json out;
    out["config"] = json::parse(config.to_json());
    out["model"] = model_path;
    out["csv"] = (dir / "noise_sweep.csv").string();
    out["rows"] = std::move(rows);
    return out.dump(2);
}

std::string run_sweep_l(const RunConfig& config, const std::vector<double>& cell_lengths) {
    if (cell_lengths.empty()) raise(ErrorCode::config, "sweep: no cell lengths given");
    std::string csv = "cell_length,classes,mean_error,p50_error,floor_hitrate,building_hitrate,"
                      "unmapped,f32_payload_bytes,i8_payload_bytes\n";
    json rows = json::array();
    for (double L : cell_lengths) {
        if (!(L > 0)) raise(ErrorCode::config, "sweep: cell lengths must be positive");
        RunConfig sub = config;
        sub.cell_length = L;
        sub.run_name = config.resolved_run_name() + "-l" + format_double(L);
        log_line("sweep: training cell_length=" + format_double(L));
        json train_out = json::parse(run_train(sub));
        std::string f32_path = train_out["models"]["f32"]["path"].get<std::string>();
        json eval_out = json::parse(run_evaluate(sub, f32_path));
        const json& rep = eval_out["report"];
        uint64_t i8_payload = 0;
        if (train_out["models"].contains("i8")) {
            i8_payload = train_out["models"]["i8"]["payload_bytes"].get<uint64_t>();
        }
        csv += format_double(L) + "," + std::to_string(train_out["classes"].get<int>()) + "," +
               format_double(rep["mean_error"].get<double>()) + "," +
               format_double(rep["p50_error"].get<double>()) + "," +
               format_double(rep["floor_hitrate"].get<double>()) + "," +
               format_double(rep["building_hitrate"].get<double>()) + "," +
               std::to_string(rep["unmapped_count"].get<int>()) + "," +
               std::to_string(train_out["models"]["f32"]["payload_bytes"].get<uint64_t>()) + "," +
               std::to_string(i8_payload) + "\n";
        rows.push_back({{"cell_length", L},
                        {"classes", train_out["classes"]},
                        {"mean_error", rep["mean_error"]},
                        {"run_dir", sub.run_dir()}});
    }
    fs::create_directories(config.run_dir());
    std::string path = config.run_dir() + "/l_sweep.csv";
    write_text(path, csv);
    json out;
    out["config"] = json::parse(config.to_json());
    out["csv"] = path;
    out["rows"] = std::move(rows);
    return out.dump(2);
}

std::string run_bench(const RunConfig& config, const std::vector<std::string>& model_paths) {
    if (model_paths.empty()) raise(ErrorCode::config, "bench: no models given");
    PreparedData d = prepare_data(config);
    std::vector<int> take(d.test_idx.begin(),
                          d.test_idx.begin() + long(std::min<size_t>(d.test_idx.size(), 64)));
    nn::Tensor<float> images = radio_image_batch(d.pool, d.manifest, &take);

    json rows = json::array();
    for (const std::string& path : model_paths) {
        LoadedModel lm = load_model_file(path);
        LatencyStats s = latency_bench(lm.predictor(), images, config.bench_repetitions);
        rows.push_back({{"model", path},
                        {"precision", lm.file.precision},
                        {"payload_bytes", lm.file.payload_bytes()},
                        {"median_us", s.median_us},
                        {"p95_us", s.p95_us},
                        {"repetitions", s.repetitions}});
    }
    json out;
    out["config"] = json::parse(config.to_json());
    out["rows"] = std::move(rows);
    fs::create_directories(config.run_dir());
    std::string path = config.run_dir() + "/bench.json";
    write_text(path, out.dump(2));
    return out.dump(2);
}

std::string run_predict(const std::string& model_path, const std::string& input_csv) {
    LoadedModel lm = load_model_file(model_path);
    GridMap grid = load_model_grid(model_path, lm.file);
    if (lm.file.metadata_json.empty()) raise(ErrorCode::schema, "model file: missing metadata");
    json meta = json::parse(lm.file.metadata_json);
    if (!meta.contains("manifest")) raise(ErrorCode::schema, "model file: metadata lacks the dataset manifest");
    DatasetManifest manifest = DatasetManifest::from_json(meta["manifest"].dump());

    std::vector<FingerprintRecord> records = load_dataset(resolve_data_path(input_csv), manifest);
    if (records.empty()) raise(ErrorCode::validation, "predict: no rows in " + input_csv);
    nn::Tensor<float> images = radio_image_batch(records, manifest);
    nn::Tensor<float> logits = lm.logits(images);
    nn::Tensor<float> probs = nn::softmax_rows(logits);
    std::vector<int> classes = argmax_rows(logits);

    json rows = json::array();
    for (size_t i = 0; i < records.size(); ++i) {
        const GridCell& cell = grid.cell(classes[i]);
        rows.push_back({{"class", classes[i]},
                        {"building", cell.building},
                        {"floor", cell.floor},
                        {"x", cell.centroid_x},
                        {"y", cell.centroid_y},
                        {"probability", probs.at(int(i), classes[i])}});
    }
    json out;
    out["model"] = model_path;
    out["predictions"] = std::move(rows);
    return out.dump(2);
}

} // namespace caeloc
