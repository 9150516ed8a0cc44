#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dataset.hpp"

namespace caeloc {

struct GridConfig {
    double cell_length = 1.0;   // L, meters
    double origin_x = 0.0;
    double origin_y = 0.0;
};

// One occupied cell; the centroid is the mean position of the training
// samples inside it and is the coordinate reported for any prediction
// of this class.
struct GridCell {
    int building = -1;
    int floor = 0;
    int ix = 0;
    int iy = 0;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    int class_id = 0;
    int member_count = 0;
};

// Cell decomposition over (building, floor, ix, iy) with contiguous
// class ids ordered lexicographically by that key.
class GridMap {
public:
    GridConfig config;
    std::vector<GridCell> cells;  // indexed by class_id

    int class_count() const { return int(cells.size()); }

    // Cell indices for a position; cells are half-open [kL, (k+1)L).
    std::pair<int, int> cell_index(double x, double y) const;

    std::optional<int> assign(const FingerprintRecord& r) const;
    std::optional<int> assign(int building, int floor, double x, double y) const;

    const GridCell& cell(int class_id) const;

    std::string to_json(const std::string& metadata_json = "") const;
    static GridMap from_json(const std::string& text);
    void save(const std::string& path, const std::string& metadata_json = "") const;
    static GridMap load(const std::string& path);

    void rebuild_lookup();

private:
    std::unordered_map<uint64_t, int> lookup_;
};

// origin (x0, y0) comes from the config; use build_grid_auto_origin to
// default it to the dataset minimum.
GridMap build_grid(const std::vector<FingerprintRecord>& records, const GridConfig& config);

GridMap build_grid_auto_origin(const std::vector<FingerprintRecord>& records, double cell_length);

struct SplitResult {
    std::vector<int> train;  // indices into the combined record list
    std::vector<int> val;
    std::vector<int> test;
    GridMap grid;
};

// Combined-split protocol: pool both record lists, build the grid on the
// union so every cell is a known class, then split by a seeded shuffle.
SplitResult combined_split(const std::vector<FingerprintRecord>& train,
                           const std::vector<FingerprintRecord>& test, double cell_length,
                           const std::array<double, 3>& fractions, uint64_t seed);

} // namespace caeloc
