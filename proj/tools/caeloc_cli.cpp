// Command-line front end for the caeloc toolchain. Everything real
// happens behind the C API in libcaeloc; this file only parses arguments,
// assembles the run-config JSON and prints results.

#include <cstdio>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "caeloc.h"

using nlohmann::json;

namespace {

// Options shared by every config-driven subcommand.
struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> sets;  // key.path=value overrides
    std::string run_name;
    std::string output_dir;
    int64_t seed = -1;
    bool quiet = false;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "run config JSON file");
    cmd->add_option("--set", args.sets,
                    "override a config entry by dotted path, e.g. --set train.cae_epochs=5");
    cmd->add_option("--seed", args.seed, "override the run seed");
    cmd->add_option("--run-name", args.run_name, "override the run name");
    cmd->add_option("--output-dir", args.output_dir, "override the output directory");
    cmd->add_flag("-q,--quiet", args.quiet, "suppress progress lines");
}

void set_dotted(json& j, const std::string& path, const json& value) {
    json* cur = &j;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string part = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) throw CLI::ValidationError("--set", "empty path segment in " + path);
        if (dot == std::string::npos) {
            (*cur)[part] = value;
            return;
        }
        cur = &(*cur)[part];
        start = dot + 1;
    }
}

std::string build_config(const ConfigArgs& args) {
    json cfg = json::object();
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) throw CLI::ValidationError("--config", "cannot open " + args.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        cfg = json::parse(ss.str());  // malformed files abort with the parser's message
    }
    for (const std::string& s : args.sets) {
        size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw CLI::ValidationError("--set", "expected key.path=value, got " + s);
        }
        std::string key = s.substr(0, eq);
        std::string raw = s.substr(eq + 1);
        json value = json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw;  // bare words stay strings
        set_dotted(cfg, key, value);
    }
    if (args.seed >= 0) cfg["seed"] = uint64_t(args.seed);
    if (!args.run_name.empty()) cfg["run_name"] = args.run_name;
    if (!args.output_dir.empty()) cfg["output_dir"] = args.output_dir;
    return cfg.dump();
}

void stderr_logger(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

void hook_logger(const ConfigArgs& args) {
    caeloc_set_logger(args.quiet ? nullptr : stderr_logger, nullptr);
}

// Print the result (or the error) and map the status to the exit code.
int finish(caeloc_status status, char* result) {
    if (status != CAELOC_OK) {
        std::fprintf(stderr, "error: %s\n", caeloc_last_error());
        return int(status);
    }
    std::printf("%s\n", result);
    caeloc_string_free(result);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"caeloc: CNN indoor positioning from WiFi fingerprints"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(caeloc_version()));

    ConfigArgs prep_args, train_args, quant_args, eval_args, sweepl_args, noise_args, bench_args;
    std::string quant_model, eval_model, noise_model, predict_model, predict_input;
    std::vector<double> sweep_lengths;
    std::vector<std::string> bench_models;

    CLI::App* prep = app.add_subcommand("prepare", "build the grid and split files for a config");
    add_config_options(prep, prep_args);

    CLI::App* train = app.add_subcommand("train", "train the auto-encoder and classifier, write model files");
    add_config_options(train, train_args);

    CLI::App* quant = app.add_subcommand("quantize", "emit reduced-precision model files from an f32 model");
    add_config_options(quant, quant_args);
    quant->add_option("-m,--model", quant_model, "f32 model file")->required();

    CLI::App* eval = app.add_subcommand("evaluate", "score a model file on the configured test split");
    add_config_options(eval, eval_args);
    eval->add_option("-m,--model", eval_model, "model file")->required();

    CLI::App* sweepl = app.add_subcommand("sweep-l", "train and evaluate across cell lengths");
    add_config_options(sweepl, sweepl_args);
    sweepl->add_option("-l,--lengths", sweep_lengths, "cell lengths in meters")->required();

    CLI::App* noise = app.add_subcommand("sweep-noise", "evaluate a model under injected RSSI noise");
    add_config_options(noise, noise_args);
    noise->add_option("-m,--model", noise_model, "model file")->required();

    CLI::App* bench = app.add_subcommand("bench", "measure single-scan prediction latency");
    add_config_options(bench, bench_args);
    bench->add_option("-m,--model", bench_models, "model files to time")->required();

    CLI::App* predict = app.add_subcommand("predict", "predict positions for fingerprint CSV rows");
    predict->add_option("-m,--model", predict_model, "model file")->required();
    predict->add_option("-i,--input", predict_input, "CSV of fingerprint rows")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        // `result` is written through the out-parameter, so the status must be
        // sequenced before `result` is read back.
        char* result = nullptr;
        caeloc_status status = CAELOC_OK;
        if (prep->parsed()) {
            hook_logger(prep_args);
            status = caeloc_run_prepare(build_config(prep_args).c_str(), &result);
            return finish(status, result);
        }
        if (train->parsed()) {
            hook_logger(train_args);
            status = caeloc_run_train(build_config(train_args).c_str(), &result);
            return finish(status, result);
        }
        if (quant->parsed()) {
            hook_logger(quant_args);
            status = caeloc_run_quantize(build_config(quant_args).c_str(), quant_model.c_str(),
                                         &result);
            return finish(status, result);
        }
        if (eval->parsed()) {
            hook_logger(eval_args);
            status = caeloc_run_evaluate(build_config(eval_args).c_str(), eval_model.c_str(),
                                         &result);
            return finish(status, result);
        }
        if (sweepl->parsed()) {
            hook_logger(sweepl_args);
            status = caeloc_run_sweep_l(build_config(sweepl_args).c_str(), sweep_lengths.data(),
                                        sweep_lengths.size(), &result);
            return finish(status, result);
        }
        if (noise->parsed()) {
            hook_logger(noise_args);
            status = caeloc_run_sweep_noise(build_config(noise_args).c_str(), noise_model.c_str(),
                                            &result);
            return finish(status, result);
        }
        if (bench->parsed()) {
            hook_logger(bench_args);
            std::vector<const char*> paths;
            for (const std::string& m : bench_models) paths.push_back(m.c_str());
            status = caeloc_run_bench(build_config(bench_args).c_str(), paths.data(), paths.size(),
                                      &result);
            return finish(status, result);
        }
        if (predict->parsed()) {
            status = caeloc_run_predict(predict_model.c_str(), predict_input.c_str(), &result);
            return finish(status, result);
        }
    } catch (const json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return int(CAELOC_ERR_PARSE);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    }
    return 0;
}
