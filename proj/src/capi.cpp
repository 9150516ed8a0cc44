#include "caeloc.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "json.hpp"

#include "error.hpp"
#include "log.hpp"
#include "nn/loss.hpp"
#include "pipeline.hpp"
#include "quant.hpp"
#include "serialize.hpp"

using namespace caeloc;

namespace {

thread_local std::string g_last_error = "no error";

caeloc_status status_from(ErrorCode code) {
    return static_cast<caeloc_status>(static_cast<int>(code));
}

caeloc_status fail(caeloc_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

// Run `fn` and translate exceptions into status codes + last-error text.
template <class Fn>
caeloc_status guarded(Fn&& fn) noexcept {
    try {
        fn();
        return CAELOC_OK;
    } catch (const Error& e) {
        return fail(status_from(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(CAELOC_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(CAELOC_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(CAELOC_ERR_INTERNAL, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

caeloc_status require(bool ok, const char* what) {
    return ok ? CAELOC_OK : fail(CAELOC_ERR_VALIDATION, std::string("null argument: ") + what);
}

} // namespace

struct caeloc_model {
    ModelFile file;
    std::shared_ptr<CaeCnnModel> float_model;
    std::shared_ptr<Int8Engine> int8_model;
    GridMap grid;
    DatasetManifest manifest;
};

extern "C" {

const char* caeloc_last_error(void) { return g_last_error.c_str(); }

const char* caeloc_version(void) {
    static const char version[] = "1.0.0";
    return version;
}

void caeloc_string_free(char* s) { std::free(s); }

void caeloc_set_logger(caeloc_log_fn fn, void* user) {
    if (!fn) {
        set_log_sink({});
        return;
    }
    set_log_sink([fn, user](const std::string& line) { fn(line.c_str(), user); });
}

caeloc_status caeloc_run_prepare(const char* config_json, char** result_json) {
    if (auto s = require(config_json && result_json, "config/result")) return s;
    return guarded([&] { *result_json = dup_string(run_prepare(RunConfig::from_json(config_json))); });
}

caeloc_status caeloc_run_train(const char* config_json, char** result_json) {
    if (auto s = require(config_json && result_json, "config/result")) return s;
    return guarded([&] { *result_json = dup_string(run_train(RunConfig::from_json(config_json))); });
}

caeloc_status caeloc_run_quantize(const char* config_json, const char* model_path,
                                  char** result_json) {
    if (auto s = require(config_json && model_path && result_json, "config/model/result")) return s;
    return guarded([&] {
        *result_json = dup_string(run_quantize(RunConfig::from_json(config_json), model_path));
    });
}

caeloc_status caeloc_run_evaluate(const char* config_json, const char* model_path,
                                  char** result_json) {
    if (auto s = require(config_json && model_path && result_json, "config/model/result")) return s;
    return guarded([&] {
        *result_json = dup_string(run_evaluate(RunConfig::from_json(config_json), model_path));
    });
}

caeloc_status caeloc_run_sweep_l(const char* config_json, const double* cell_lengths, size_t count,
                                 char** result_json) {
    if (auto s = require(config_json && cell_lengths && count && result_json,
                         "config/lengths/result")) {
        return s;
    }
    return guarded([&] {
        std::vector<double> lengths(cell_lengths, cell_lengths + count);
        *result_json = dup_string(run_sweep_l(RunConfig::from_json(config_json), lengths));
    });
}

caeloc_status caeloc_run_sweep_noise(const char* config_json, const char* model_path,
                                     char** result_json) {
    if (auto s = require(config_json && model_path && result_json, "config/model/result")) return s;
    return guarded([&] {
        *result_json = dup_string(run_sweep_noise(RunConfig::from_json(config_json), model_path));
    });
}

caeloc_status caeloc_run_bench(const char* config_json, const char* const* model_paths,
                               size_t count, char** result_json) {
    if (auto s = require(config_json && model_paths && count && result_json,
                         "config/models/result")) {
        return s;
    }
    return guarded([&] {
        std::vector<std::string> paths;
        paths.reserve(count);
        for (size_t i = 0; i < count; ++i) {
            if (!model_paths[i]) raise(ErrorCode::validation, "null model path");
            paths.emplace_back(model_paths[i]);
        }
        *result_json = dup_string(run_bench(RunConfig::from_json(config_json), paths));
    });
}

caeloc_status caeloc_run_predict(const char* model_path, const char* input_csv,
                                 char** result_json) {
    if (auto s = require(model_path && input_csv && result_json, "model/input/result")) return s;
    return guarded([&] { *result_json = dup_string(run_predict(model_path, input_csv)); });
}

caeloc_status caeloc_model_open(const char* path, caeloc_model** out) {
    if (auto s = require(path && out, "path/out")) return s;
    return guarded([&] {
        auto m = std::make_unique<caeloc_model>();
        m->file = ModelFile::load(resolve_data_path(path));
        if (m->file.precision == "i8") {
            m->int8_model = std::make_shared<Int8Engine>(m->file);
        } else {
            m->float_model = std::make_shared<CaeCnnModel>(unpack_model(m->file));
        }
        if (m->file.grid_ref.empty()) raise(ErrorCode::schema, "model file: missing grid reference");
        std::string dir = std::string(path);
        size_t slash = dir.find_last_of('/');
        dir = slash == std::string::npos ? std::string(".") : dir.substr(0, slash);
        m->grid = GridMap::load(dir + "/" + m->file.grid_ref);
        if (m->file.metadata_json.empty()) raise(ErrorCode::schema, "model file: missing metadata");
        nlohmann::json meta = nlohmann::json::parse(m->file.metadata_json);
        if (!meta.contains("manifest")) {
            raise(ErrorCode::schema, "model file: metadata lacks the dataset manifest");
        }
        m->manifest = DatasetManifest::from_json(meta["manifest"].dump());
        *out = m.release();
    });
}

caeloc_status caeloc_model_info(const caeloc_model* model, char** result_json) {
    if (auto s = require(model && result_json, "model/result")) return s;
    return guarded([&] {
        nlohmann::json j;
        j["precision"] = model->file.precision;
        j["classes"] = model->file.spec.class_count;
        j["image_side"] = model->file.spec.image_side;
        j["ap_count"] = model->manifest.ap_count;
        j["payload_bytes"] = model->file.payload_bytes();
        j["tensors"] = model->file.tensors.size();
        j["bn_folded"] = model->file.bn_folded;
        *result_json = dup_string(j.dump(2));
    });
}

caeloc_status caeloc_model_predict(caeloc_model* model, const double* rssi, size_t count,
                                   caeloc_prediction* out) {
    if (auto s = require(model && rssi && out, "model/rssi/out")) return s;
    return guarded([&] {
        if (int(count) != model->manifest.ap_count) {
            raise(ErrorCode::shape, "predict: expected " +
                                        std::to_string(model->manifest.ap_count) +
                                        " rssi values, got " + std::to_string(count));
        }
        FingerprintRecord rec;
        rec.rssi.assign(rssi, rssi + count);
        std::vector<FingerprintRecord> one{rec};
        nn::Tensor<float> image = radio_image_batch(one, model->manifest);
        nn::Tensor<float> logits = model->int8_model
                                       ? model->int8_model->logits(image)
                                       : predict_logits(*model->float_model, image);
        nn::Tensor<float> probs = nn::softmax_rows(logits);
        int cls = argmax_rows(logits)[0];
        const GridCell& cell = model->grid.cell(cls);
        out->class_id = cls;
        out->building = cell.building;
        out->floor = cell.floor;
        out->x = cell.centroid_x;
        out->y = cell.centroid_y;
        out->probability = double(probs.at(0, cls));
    });
}

void caeloc_model_close(caeloc_model* model) { delete model; }

} // extern "C"
