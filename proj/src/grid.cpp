#include "grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "json.hpp"

#include "error.hpp"
#include "nn/rng.hpp"

namespace caeloc {

using nlohmann::json;

namespace {

uint64_t cell_key(int building, int floor, int ix, int iy) {
    auto pack = [](int v) -> uint64_t {
        long shifted = long(v) + 32768;
        if (shifted < 0 || shifted > 0xFFFF) raise(ErrorCode::validation, "grid: cell index out of range");
        return uint64_t(shifted);
    };
    return (pack(building) << 48) | (pack(floor) << 32) | (pack(ix) << 16) | pack(iy);
}

} // namespace

std::pair<int, int> GridMap::cell_index(double x, double y) const {
    int ix = int(std::floor((x - config.origin_x) / config.cell_length));
    int iy = int(std::floor((y - config.origin_y) / config.cell_length));
    return {ix, iy};
}

std::optional<int> GridMap::assign(int building, int floor, double x, double y) const {
    auto [ix, iy] = cell_index(x, y);
    auto it = lookup_.find(cell_key(building, floor, ix, iy));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> GridMap::assign(const FingerprintRecord& r) const {
    return assign(r.building, r.floor, r.x, r.y);
}

const GridCell& GridMap::cell(int class_id) const {
    if (class_id < 0 || class_id >= int(cells.size())) raise(ErrorCode::validation, "grid: bad class id");
    return cells[size_t(class_id)];
}

void GridMap::rebuild_lookup() {
    lookup_.clear();
    lookup_.reserve(cells.size() * 2);
    for (const GridCell& c : cells) {
        lookup_[cell_key(c.building, c.floor, c.ix, c.iy)] = c.class_id;
    }
}

GridMap build_grid(const std::vector<FingerprintRecord>& records, const GridConfig& config) {
    if (records.empty()) raise(ErrorCode::validation, "build_grid: no records");
    if (!(config.cell_length > 0)) raise(ErrorCode::config, "build_grid: cell_length must be positive");
    for (const auto& r : records) {
        if (!std::isfinite(r.x) || !std::isfinite(r.y)) raise(ErrorCode::validation, "build_grid: non-finite position");
    }

    struct Acc {
        double sx = 0.0, sy = 0.0;
        int n = 0;
    };
    // ordered map gives the lexicographic (building, floor, ix, iy) class order
    std::map<std::array<int, 4>, Acc> buckets;
    GridMap grid;
    grid.config = config;
    for (const auto& r : records) {
        auto [ix, iy] = grid.cell_index(r.x, r.y);
        Acc& a = buckets[{r.building, r.floor, ix, iy}];
        a.sx += r.x;
        a.sy += r.y;
        a.n += 1;
    }
    grid.cells.reserve(buckets.size());
    int next_id = 0;
    for (const auto& [key, acc] : buckets) {
        GridCell c;
        c.building = key[0];
        c.floor = key[1];
        c.ix = key[2];
        c.iy = key[3];
        c.centroid_x = acc.sx / acc.n;
        c.centroid_y = acc.sy / acc.n;
        c.member_count = acc.n;
        c.class_id = next_id++;
        grid.cells.push_back(c);
    }
    grid.rebuild_lookup();
    return grid;
}

GridMap build_grid_auto_origin(const std::vector<FingerprintRecord>& records, double cell_length) {
    if (records.empty()) raise(ErrorCode::validation, "build_grid: no records");
    GridConfig cfg;
    cfg.cell_length = cell_length;
    cfg.origin_x = std::numeric_limits<double>::infinity();
    cfg.origin_y = std::numeric_limits<double>::infinity();
    for (const auto& r : records) {
        cfg.origin_x = std::min(cfg.origin_x, r.x);
        cfg.origin_y = std::min(cfg.origin_y, r.y);
    }
    return build_grid(records, cfg);
}

std::string GridMap::to_json(const std::string& metadata_json) const {
    json j;
    j["config"] = {{"cell_length", config.cell_length}, {"origin", {config.origin_x, config.origin_y}}};
    json arr = json::array();
    for (const GridCell& c : cells) {
        arr.push_back({{"building", c.building},
                       {"floor", c.floor},
                       {"ix", c.ix},
                       {"iy", c.iy},
                       {"centroid", {c.centroid_x, c.centroid_y}},
                       {"class_id", c.class_id},
                       {"member_count", c.member_count}});
    }
    j["cells"] = std::move(arr);
    if (!metadata_json.empty()) j["metadata"] = json::parse(metadata_json);
    return j.dump(2);
}

GridMap GridMap::from_json(const std::string& text) {
    GridMap g;
    try {
        json j = json::parse(text);
        g.config.cell_length = j.at("config").at("cell_length").get<double>();
        g.config.origin_x = j.at("config").at("origin")[0].get<double>();
        g.config.origin_y = j.at("config").at("origin")[1].get<double>();
        for (const auto& cj : j.at("cells")) {
            GridCell c;
            c.building = cj.at("building").get<int>();
            c.floor = cj.at("floor").get<int>();
            c.ix = cj.at("ix").get<int>();
            c.iy = cj.at("iy").get<int>();
            c.centroid_x = cj.at("centroid")[0].get<double>();
            c.centroid_y = cj.at("centroid")[1].get<double>();
            c.class_id = cj.at("class_id").get<int>();
            c.member_count = cj.at("member_count").get<int>();
            g.cells.push_back(c);
        }
    } catch (const json::exception& e) {
        raise(ErrorCode::parse, std::string("grid: bad json: ") + e.what());
    }
    std::sort(g.cells.begin(), g.cells.end(), [](const GridCell& a, const GridCell& b) {
        return a.class_id < b.class_id;
    });
    for (size_t i = 0; i < g.cells.size(); ++i) {
        if (g.cells[i].class_id != int(i)) raise(ErrorCode::validation, "grid: class ids not contiguous");
    }
    g.rebuild_lookup();
    return g;
}

void GridMap::save(const std::string& path, const std::string& metadata_json) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorCode::io, "grid: cannot write " + path);
    f << to_json(metadata_json);
    if (!f) raise(ErrorCode::io, "grid: write failed for " + path);
}

GridMap GridMap::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) raise(ErrorCode::io, "grid: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_json(text);
}

SplitResult combined_split(const std::vector<FingerprintRecord>& train,
                           const std::vector<FingerprintRecord>& test, double cell_length,
                           const std::array<double, 3>& fractions, uint64_t seed) {
    for (double f : fractions) {
        if (!(f > 0)) raise(ErrorCode::config, "combined_split: fractions must be positive");
    }
    double sum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(sum - 1.0) > 1e-9) raise(ErrorCode::config, "combined_split: fractions must sum to 1");

    std::vector<FingerprintRecord> pool;
    pool.reserve(train.size() + test.size());
    pool.insert(pool.end(), train.begin(), train.end());
    pool.insert(pool.end(), test.begin(), test.end());

    SplitResult out;
    out.grid = build_grid_auto_origin(pool, cell_length);
    const size_t n = pool.size();
    std::vector<int> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = int(i);
    nn::Rng rng(seed);
    rng.shuffle(order);

    size_t n_train = size_t(std::llround(double(n) * fractions[0]));
    size_t n_val = size_t(std::llround(double(n) * fractions[1]));
    if (n_train + n_val > n) n_val = n - n_train;
    out.train.assign(order.begin(), order.begin() + long(n_train));
    out.val.assign(order.begin() + long(n_train), order.begin() + long(n_train + n_val));
    out.test.assign(order.begin() + long(n_train + n_val), order.end());
    return out;
}

} // namespace caeloc
