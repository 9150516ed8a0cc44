// Generates the synthetic campus fingerprint corpus as CSV files with the
// benchmark column layout, for use anywhere a real dataset would go.

#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"

#include "error.hpp"
#include "synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"uji_synth: write a synthetic WiFi fingerprint corpus"};

    caeloc::SynthConfig config;
    std::string out_dir = "data/synth";
    app.add_option("-o,--out", out_dir, "output directory (created if missing)");
    app.add_option("--seed", config.seed, "generator seed");
    app.add_option("--train-records", config.train_records, "training rows to emit");
    app.add_option("--test-records", config.test_records, "test rows to emit");
    app.add_option("--buildings", config.buildings, "building count");
    app.add_option("--aps-per-floor", config.aps_per_floor, "access points per floor");
    app.add_option("--shadow-sigma", config.shadow_sigma, "shadow fading sigma (dB)");
    app.add_option("--spot-spacing", config.spot_spacing, "reference spot pitch (m)");

    CLI11_PARSE(app, argc, argv);

    try {
        while (int(config.floors_per_building.size()) > config.buildings) {
            config.floors_per_building.pop_back();
        }
        while (int(config.floors_per_building.size()) < config.buildings) {
            config.floors_per_building.push_back(config.floors_per_building.back());
        }
        caeloc::SynthDataset d = caeloc::generate_synthetic(config);
        std::filesystem::create_directories(out_dir);
        std::string train_path = out_dir + "/trainingData.csv";
        std::string test_path = out_dir + "/validationData.csv";
        caeloc::write_dataset_csv(d.train, d.manifest, train_path);
        caeloc::write_dataset_csv(d.test, d.manifest, test_path);
        std::string manifest_path = out_dir + "/manifest.json";
        std::FILE* f = std::fopen(manifest_path.c_str(), "wb");
        if (!f) {
            std::fprintf(stderr, "error: cannot write %s\n", manifest_path.c_str());
            return 1;
        }
        std::string manifest_json = d.manifest.to_json();
        std::fwrite(manifest_json.data(), 1, manifest_json.size(), f);
        std::fclose(f);
        std::printf("wrote %zu train rows -> %s\n", d.train.size(), train_path.c_str());
        std::printf("wrote %zu test rows  -> %s\n", d.test.size(), test_path.c_str());
        std::printf("wrote manifest       -> %s\n", manifest_path.c_str());
        return 0;
    } catch (const caeloc::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
