#include "dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "error.hpp"

namespace caeloc {

using nlohmann::json;

std::string RssiColumnScheme::column_name(int i) const {
    std::string num = std::to_string(start_index + i);
    if (int(num.size()) < pad_width) num.insert(0, size_t(pad_width) - num.size(), '0');
    return prefix + num;
}

void DatasetManifest::validate() const {
    if (ap_count < 1) raise(ErrorCode::config, "manifest: ap_count must be >= 1");
    if (!(rssi_min < 0)) raise(ErrorCode::config, "manifest: rssi_min must be negative");
    if (no_signal_sentinel >= rssi_min && no_signal_sentinel <= 0) {
        raise(ErrorCode::config, "manifest: sentinel must lie outside [rssi_min, 0]");
    }
}

DatasetManifest DatasetManifest::uji() {
    DatasetManifest m;
    m.name = "UJIIndoorLoc";
    m.ap_count = 520;
    m.rssi_min = -104.0;
    m.no_signal_sentinel = 100.0;
    m.x_column = "LONGITUDE";
    m.y_column = "LATITUDE";
    m.floor_column = "FLOOR";
    m.building_column = "BUILDINGID";
    m.rssi_columns = {"WAP", 1, 3};
    return m;
}

DatasetManifest DatasetManifest::generic(int ap_count, double rssi_min, double sentinel) {
    DatasetManifest m;
    m.name = "generic";
    m.ap_count = ap_count;
    m.rssi_min = rssi_min;
    m.no_signal_sentinel = sentinel;
    return m;
}

DatasetManifest DatasetManifest::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) raise(ErrorCode::io, "manifest: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return from_json(text);
    } catch (const Error& e) {
        raise(e.code(), "manifest: " + path + ": " + e.what());
    }
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        raise(ErrorCode::parse, std::string("manifest: ") + e.what());
    }
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.ap_count = j.at("ap_count").get<int>();
        m.rssi_min = j.at("rssi_min").get<double>();
        m.no_signal_sentinel = j.at("no_signal_sentinel").get<double>();
        if (j.contains("columns")) {
            const auto& c = j["columns"];
            m.x_column = c.value("x", m.x_column);
            m.y_column = c.value("y", m.y_column);
            m.floor_column = c.value("floor", m.floor_column);
            m.building_column = c.value("building", m.building_column);
        }
        if (j.contains("rssi_columns")) {
            const auto& r = j["rssi_columns"];
            m.rssi_columns.prefix = r.value("prefix", m.rssi_columns.prefix);
            m.rssi_columns.start_index = r.value("start_index", m.rssi_columns.start_index);
            m.rssi_columns.pad_width = r.value("pad_width", m.rssi_columns.pad_width);
        }
    } catch (const json::exception& e) {
        raise(ErrorCode::schema, std::string("manifest: ") + e.what());
    }
    m.validate();
    return m;
}

std::string DatasetManifest::to_json() const {
    json j;
    j["name"] = name;
    j["ap_count"] = ap_count;
    j["rssi_min"] = rssi_min;
    j["no_signal_sentinel"] = no_signal_sentinel;
    j["columns"] = {{"x", x_column}, {"y", y_column}, {"floor", floor_column}};
    if (!building_column.empty()) j["columns"]["building"] = building_column;
    j["rssi_columns"] = {{"prefix", rssi_columns.prefix},
                         {"start_index", rssi_columns.start_index},
                         {"pad_width", rssi_columns.pad_width}};
    return j.dump(2);
}

double normalize_rssi(double raw, double rssi_min) {
    if (!(rssi_min < 0)) raise(ErrorCode::config, "normalize_rssi: rssi_min must be negative");
    if (raw > 0) return 0.0;  // no-signal sentinel
    if (raw < rssi_min) {
        raise(ErrorCode::validation, "normalize_rssi: measurement below rssi_min");
    }
    double v = (raw - rssi_min) / (-rssi_min);
    return std::clamp(v, 0.0, 1.0);
}

int radio_image_side(int ap_count) {
    int side = int(std::sqrt(double(ap_count)));
    while (side * side < ap_count) ++side;
    return side;
}

RadioImage to_radio_image(const FingerprintRecord& record, const DatasetManifest& manifest) {
    if (int(record.rssi.size()) != manifest.ap_count) {
        raise(ErrorCode::shape, "radio image: record has " + std::to_string(record.rssi.size()) +
                                    " RSSI values, manifest says " + std::to_string(manifest.ap_count));
    }
    const int side = radio_image_side(manifest.ap_count);
    RadioImage img;
    img.side = side;
    img.pad_count = side * side - manifest.ap_count;
    img.pixels.assign(size_t(side) * side, 0.0f);
    for (int i = 0; i < manifest.ap_count; ++i) {
        const double raw = double(record.rssi[size_t(i)]);
        // the manifest sentinel may sit on either side of [rssi_min, 0]
        img.pixels[size_t(i)] =
            raw == manifest.no_signal_sentinel ? 0.0f : float(normalize_rssi(raw, manifest.rssi_min));
    }
    return img;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            std::string last = line.substr(start);
            if (!last.empty() && last.back() == '\r') last.pop_back();
            out.push_back(std::move(last));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_cell(const std::string& cell, size_t line_no, const std::string& col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last) {
        raise(ErrorCode::parse,
              "csv row " + std::to_string(line_no) + ": non-numeric value '" + cell + "' in column " + col);
    }
    return v;
}

} // namespace

std::vector<FingerprintRecord> load_dataset(const std::string& path, const DatasetManifest& manifest) {
    manifest.validate();
    std::ifstream f(path);
    if (!f) raise(ErrorCode::io, "dataset: cannot open " + path);

    std::string line;
    if (!std::getline(f, line)) raise(ErrorCode::schema, "dataset: " + path + " is missing a header row");
    std::vector<std::string> header = split_csv_line(line);
    std::unordered_map<std::string, int> col_index;
    for (size_t i = 0; i < header.size(); ++i) col_index[header[i]] = int(i);

    auto require_col = [&](const std::string& name) -> int {
        auto it = col_index.find(name);
        if (it == col_index.end()) raise(ErrorCode::schema, "dataset: missing column " + name);
        return it->second;
    };

    std::vector<int> rssi_cols(size_t(manifest.ap_count));
    for (int i = 0; i < manifest.ap_count; ++i) {
        rssi_cols[size_t(i)] = require_col(manifest.rssi_columns.column_name(i));
    }
    const int xc = require_col(manifest.x_column);
    const int yc = require_col(manifest.y_column);
    const int fc = require_col(manifest.floor_column);
    const int bc = manifest.building_column.empty() ? -1 : require_col(manifest.building_column);

    std::vector<FingerprintRecord> records;
    size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() < header.size()) {
            raise(ErrorCode::parse, "csv row " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        }
        FingerprintRecord r;
        r.rssi.resize(size_t(manifest.ap_count));
        for (int i = 0; i < manifest.ap_count; ++i) {
            double v = parse_cell(cells[size_t(rssi_cols[size_t(i)])], line_no, manifest.rssi_columns.column_name(i));
            if (v != manifest.no_signal_sentinel && (v < manifest.rssi_min || v > 0)) {
                raise(ErrorCode::validation, "csv row " + std::to_string(line_no) + ": RSSI " +
                                                 std::to_string(v) + " outside [rssi_min, 0] and not the sentinel");
            }
            r.rssi[size_t(i)] = float(v);
        }
        r.x = parse_cell(cells[size_t(xc)], line_no, manifest.x_column);
        r.y = parse_cell(cells[size_t(yc)], line_no, manifest.y_column);
        r.floor = int(parse_cell(cells[size_t(fc)], line_no, manifest.floor_column));
        if (bc >= 0) r.building = int(parse_cell(cells[size_t(bc)], line_no, manifest.building_column));
        records.push_back(std::move(r));
    }
    return records;
}

nn::Tensor<float> radio_image_batch(const std::vector<FingerprintRecord>& records,
                                    const DatasetManifest& manifest,
                                    const std::vector<int>* indices) {
    const int side = radio_image_side(manifest.ap_count);
    const int n = indices ? int(indices->size()) : int(records.size());
    if (n == 0) raise(ErrorCode::validation, "radio_image_batch: no records");
    nn::Tensor<float> batch({n, side, side, 1});
    for (int i = 0; i < n; ++i) {
        const FingerprintRecord& r = records[size_t(indices ? (*indices)[size_t(i)] : i)];
        RadioImage img = to_radio_image(r, manifest);
        std::copy(img.pixels.begin(), img.pixels.end(), batch.data() + size_t(i) * img.pixels.size());
    }
    return batch;
}

} // namespace caeloc
