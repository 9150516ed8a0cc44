#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "caeloc.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path work_root() {
    static fs::path root = [] {
        fs::path p = fs::temp_directory_path() / "caeloc_capi_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

// Frees the result string automatically so every call site stays terse.
struct Result {
    char* text = nullptr;
    ~Result() { caeloc_string_free(text); }
    json parsed() const {
        REQUIRE(text != nullptr);
        return json::parse(text);
    }
};

std::string tiny_config_json() {
    json j;
    j["seed"] = 99;
    j["output_dir"] = (work_root() / "runs").string();
    j["dataset"] = {{"kind", "synthetic"},
                    {"synthetic",
                     {{"buildings", 1},
                      {"floors_per_building", {2}},
                      {"aps_per_floor", 140},
                      {"train_records", 300},
                      {"test_records", 40},
                      {"seed", 0}}}};
    j["grid"] = {{"cell_length", 25.0}};
    j["train"] = {{"cae_epochs", 1}, {"classifier_epochs", 2}, {"batch_size", 64}, {"patience", 0}};
    j["precisions"] = {"f32"};
    j["bench"] = {{"repetitions", 40}};
    return j.dump();
}

// Trains once and caches the model path for the rest of the suite.
const std::string& trained_model_path() {
    static std::string path = [] {
        Result r;
        REQUIRE(caeloc_run_train(tiny_config_json().c_str(), &r.text) == CAELOC_OK);
        return r.parsed()["models"]["f32"]["path"].get<std::string>();
    }();
    return path;
}

} // namespace

TEST_CASE("version and error strings are always available") {
    CHECK(std::string(caeloc_version()) == "1.0.0");
    CHECK(caeloc_last_error() != nullptr);
    caeloc_string_free(nullptr);  // must be a no-op
}

TEST_CASE("null arguments are rejected with a message") {
    CHECK(caeloc_run_prepare(nullptr, nullptr) == CAELOC_ERR_VALIDATION);
    CHECK(std::string(caeloc_last_error()).find("null") != std::string::npos);

    Result r;
    CHECK(caeloc_run_prepare("{\"seed\": 1}", nullptr) == CAELOC_ERR_VALIDATION);
    CHECK(caeloc_model_open(nullptr, nullptr) == CAELOC_ERR_VALIDATION);
    CHECK(caeloc_model_predict(nullptr, nullptr, 0, nullptr) == CAELOC_ERR_VALIDATION);
}

TEST_CASE("config errors map to distinct statuses") {
    Result r;
    CHECK(caeloc_run_prepare("{", &r.text) == CAELOC_ERR_PARSE);
    CHECK(caeloc_run_prepare("{}", &r.text) == CAELOC_ERR_CONFIG);
    CHECK(std::string(caeloc_last_error()).find("seed") != std::string::npos);
    CHECK(caeloc_run_prepare("{\"seed\": 1, \"mystery\": 3}", &r.text) == CAELOC_ERR_CONFIG);
    CHECK(caeloc_model_open((work_root() / "no_such.cclm").string().c_str(), nullptr) ==
          CAELOC_ERR_VALIDATION);  // null out pointer trumps the path
    caeloc_model* m = nullptr;
    CHECK(caeloc_model_open((work_root() / "no_such.cclm").string().c_str(), &m) == CAELOC_ERR_IO);
    CHECK(m == nullptr);
}

TEST_CASE("prepare returns a summary and writes artifacts") {
    Result r;
    REQUIRE(caeloc_run_prepare(tiny_config_json().c_str(), &r.text) == CAELOC_OK);
    json out = r.parsed();
    CHECK(fs::exists(out["run_dir"].get<std::string>() + "/grid.json"));
    CHECK(out["stats"]["pool_records"] == 340);
}

TEST_CASE("training streams progress through the registered logger") {
    static std::vector<std::string> lines;
    lines.clear();
    caeloc_set_logger(
        [](const char* line, void* user) {
            static_cast<std::vector<std::string>*>(user)->push_back(line);
        },
        &lines);

    const std::string& model = trained_model_path();
    caeloc_set_logger(nullptr, nullptr);

    CHECK(fs::exists(model));
    // 1 autoencoder epoch + 2 classifier epochs
    CHECK(lines.size() >= 3);
    bool saw_cae = false, saw_clf = false;
    for (const std::string& l : lines) {
        saw_cae = saw_cae || l.find("cae epoch") != std::string::npos;
        saw_clf = saw_clf || l.find("classifier epoch") != std::string::npos;
    }
    CHECK(saw_cae);
    CHECK(saw_clf);
}

TEST_CASE("a trained model answers info and single-scan predictions") {
    caeloc_model* m = nullptr;
    REQUIRE(caeloc_model_open(trained_model_path().c_str(), &m) == CAELOC_OK);
    REQUIRE(m != nullptr);

    Result info;
    REQUIRE(caeloc_model_info(m, &info.text) == CAELOC_OK);
    json j = info.parsed();
    CHECK(j["precision"] == "f32");
    CHECK(j["ap_count"] == 280);
    CHECK(j["image_side"] == 17);
    int classes = j["classes"].get<int>();
    CHECK(classes > 1);

    std::vector<double> rssi(280, 100.0);  // all silent but a few strong APs
    rssi[3] = -40.0;
    rssi[4] = -52.0;
    rssi[17] = -60.0;
    caeloc_prediction p{};
    REQUIRE(caeloc_model_predict(m, rssi.data(), rssi.size(), &p) == CAELOC_OK);
    CHECK(p.class_id >= 0);
    CHECK(p.class_id < classes);
    CHECK(p.building == 0);
    CHECK(p.floor >= 0);
    CHECK(p.floor <= 1);
    CHECK(p.probability > 0.0);
    CHECK(p.probability <= 1.0);

    SUBCASE("the scan length must match the dataset") {
        CHECK(caeloc_model_predict(m, rssi.data(), 10, &p) == CAELOC_ERR_SHAPE);
        CHECK(caeloc_last_error()[0] != '\0');
    }
    SUBCASE("repeat predictions are deterministic") {
        caeloc_prediction q{};
        REQUIRE(caeloc_model_predict(m, rssi.data(), rssi.size(), &q) == CAELOC_OK);
        CHECK(q.class_id == p.class_id);
        CHECK(q.probability == p.probability);
        CHECK(q.x == p.x);
        CHECK(q.y == p.y);
    }

    caeloc_model_close(m);
    caeloc_model_close(nullptr);  // no-op
}

TEST_CASE("csv prediction works through the command entry point") {
    // hand-rolled one-row CSV in the generated dataset's schema
    fs::path csv = work_root() / "one_scan.csv";
    {
        std::ofstream out(csv);
        for (int i = 1; i <= 280; ++i) {
            char col[16];
            std::snprintf(col, sizeof col, "WAP%03d", i);
            out << col << ",";
        }
        out << "LONGITUDE,LATITUDE,FLOOR,BUILDINGID\n";
        for (int i = 1; i <= 280; ++i) out << (i == 5 ? "-45" : "100") << ",";
        out << "0,0,0,0\n";
    }

    Result r;
    REQUIRE(caeloc_run_predict(trained_model_path().c_str(), csv.string().c_str(), &r.text) ==
            CAELOC_OK);
    json out = r.parsed();
    REQUIRE(out["predictions"].size() == 1);
    CHECK(out["predictions"][0]["probability"].get<double>() > 0.0);

    Result bad;
    CHECK(caeloc_run_predict(trained_model_path().c_str(),
                             (work_root() / "absent.csv").string().c_str(), &bad.text) ==
          CAELOC_ERR_IO);
}

TEST_CASE("evaluate and bench run against the trained model") {
    std::string cfg = tiny_config_json();
    Result ev;
    REQUIRE(caeloc_run_evaluate(cfg.c_str(), trained_model_path().c_str(), &ev.text) == CAELOC_OK);
    json report = ev.parsed();
    CHECK(report["precision"] == "f32");
    CHECK(report["report"]["sample_count"] == 40);

    const char* paths[] = {trained_model_path().c_str()};
    Result bench;
    REQUIRE(caeloc_run_bench(cfg.c_str(), paths, 1, &bench.text) == CAELOC_OK);
    CHECK(bench.parsed()["rows"][0]["repetitions"] == 40);

    Result sweep;
    CHECK(caeloc_run_sweep_l(cfg.c_str(), nullptr, 0, &sweep.text) == CAELOC_ERR_VALIDATION);
}
