#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nn/tensor.hpp"

namespace caeloc {

// How RSSI feature columns are named in a CSV: prefix + zero-padded
// index, e.g. WAP001.. for UJIIndoorLoc or rssi_0.. for the generic schema.
struct RssiColumnScheme {
    std::string prefix = "rssi_";
    int start_index = 0;
    int pad_width = 0;

    std::string column_name(int i) const;
};

struct DatasetManifest {
    std::string name;
    int ap_count = 0;
    double rssi_min = 0.0;       // dBm, negative
    double no_signal_sentinel = 100.0;
    std::string x_column = "x";
    std::string y_column = "y";
    std::string floor_column = "floor";
    std::string building_column;  // empty when the dataset has no buildings
    RssiColumnScheme rssi_columns;

    void validate() const;

    static DatasetManifest uji();
    static DatasetManifest generic(int ap_count, double rssi_min = -104.0, double sentinel = 100.0);
    static DatasetManifest from_json_file(const std::string& path);
    static DatasetManifest from_json(const std::string& text);
    std::string to_json() const;
};

// One fingerprint scan: raw dBm values (sentinel allowed) plus the exact
// position and building/floor labels.
struct FingerprintRecord {
    std::vector<float> rssi;
    double x = 0.0;
    double y = 0.0;
    int floor = 0;
    int building = -1;  // -1 when absent

    bool has_building() const { return building >= 0; }
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<FingerprintRecord> records;
};

// Normalized, zero-padded square grid of RSSI values in [0,1].
struct RadioImage {
    int side = 0;
    int pad_count = 0;
    std::vector<float> pixels;  // side*side, row-major, trailing pad_count are 0
};

// Eq-style normalization to [0,1]: positive raw values mean "no signal"
// and map to 0; in-range dBm maps linearly with rssi_min -> 0 and 0 -> 1.
double normalize_rssi(double raw, double rssi_min);

// Smallest n with n*n >= ap_count.
int radio_image_side(int ap_count);

RadioImage to_radio_image(const FingerprintRecord& record, const DatasetManifest& manifest);

std::vector<FingerprintRecord> load_dataset(const std::string& path, const DatasetManifest& manifest);

// Batch (n, side, side, 1) tensor of radio images for the given record
// indices (all records when indices is null).
nn::Tensor<float> radio_image_batch(const std::vector<FingerprintRecord>& records,
                                    const DatasetManifest& manifest,
                                    const std::vector<int>* indices = nullptr);

} // namespace caeloc
