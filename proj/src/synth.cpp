#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "error.hpp"
#include "nn/rng.hpp"

namespace caeloc {

int SynthConfig::ap_count() const {
    int floors = 0;
    for (int f : floors_per_building) floors += f;
    return floors * aps_per_floor;
}

void SynthConfig::validate() const {
    if (buildings < 1 || int(floors_per_building.size()) != buildings) {
        raise(ErrorCode::config, "synth: floors_per_building must list every building");
    }
    for (int f : floors_per_building) {
        if (f < 1) raise(ErrorCode::config, "synth: each building needs at least one floor");
    }
    if (aps_per_floor < 1) raise(ErrorCode::config, "synth: aps_per_floor must be positive");
    if (train_records < 1 || test_records < 1) raise(ErrorCode::config, "synth: record counts must be positive");
    if (!(spot_spacing > 0)) raise(ErrorCode::config, "synth: spot_spacing must be positive");
    if (!(rssi_min < 0)) raise(ErrorCode::config, "synth: rssi_min must be negative");
    if (scan_sigma < 0 || scan_sigma > shadow_sigma) {
        raise(ErrorCode::config, "synth: scan_sigma must lie in [0, shadow_sigma]");
    }
}

namespace {

struct Segment {
    double x0, y0, x1, y1;
    double length() const { return std::hypot(x1 - x0, y1 - y0); }
    void at(double t, double& x, double& y) const {  // t in [0, length]
        double f = t / length();
        x = x0 + (x1 - x0) * f;
        y = y0 + (y1 - y0) * f;
    }
};

// Comb-shaped corridor plan: a horizontal spine with evenly spaced
// vertical teeth, offset to the building's origin.
std::vector<Segment> corridor_plan(const SynthConfig& cfg, double ox) {
    std::vector<Segment> segs;
    const double spine_y = cfg.tooth_length / 2.0;
    segs.push_back({ox, spine_y, ox + cfg.spine_length, spine_y});
    for (int i = 0; i < cfg.teeth; ++i) {
        double x = ox + cfg.spine_length * (i + 0.5) / cfg.teeth;
        segs.push_back({x, 0.0, x, cfg.tooth_length});
    }
    return segs;
}

double total_length(const std::vector<Segment>& segs) {
    double len = 0.0;
    for (const auto& s : segs) len += s.length();
    return len;
}

void point_at(const std::vector<Segment>& segs, double t, double& x, double& y) {
    for (const auto& s : segs) {
        double len = s.length();
        if (t <= len) {
            s.at(t, x, y);
            return;
        }
        t -= len;
    }
    segs.back().at(segs.back().length(), x, y);
}

struct Ap {
    double x, y;
    int building, floor;
};

struct Spot {
    double x, y;
    int building, floor;
};

uint64_t splitmix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// One standard gaussian per (seed, ap, floor, lattice corner), frozen for
// the lifetime of the campus.
double corner_normal(uint64_t seed, size_t ap, int floor, int64_t cx, int64_t cy) {
    uint64_t h = splitmix64(seed ^ 0x73686164ULL);
    h = splitmix64(h ^ uint64_t(ap));
    h = splitmix64(h ^ uint64_t(uint32_t(floor)));
    h = splitmix64(h ^ uint64_t(cx + 0x40000000LL));
    h = splitmix64(h ^ uint64_t(cy + 0x40000000LL));
    double u1 = double((h >> 11) | 1ULL) * 0x1.0p-53;
    double u2 = double(splitmix64(h) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Smooth spatial shadowing field with unit marginal variance and a
// correlation length of a few meters: what a receiver at (x, y) loses to
// walls and furniture between it and one access point.
double shadow_field(uint64_t seed, size_t ap, int floor, double x, double y) {
    constexpr double kCorrLength = 4.0;  // meters
    double gx = x / kCorrLength;
    double gy = y / kCorrLength;
    double fx = std::floor(gx);
    double fy = std::floor(gy);
    int64_t x0 = int64_t(fx);
    int64_t y0 = int64_t(fy);
    double tx = gx - fx;
    double ty = gy - fy;
    double sx = tx * tx * (3.0 - 2.0 * tx);
    double sy = ty * ty * (3.0 - 2.0 * ty);
    double w00 = (1.0 - sx) * (1.0 - sy);
    double w10 = sx * (1.0 - sy);
    double w01 = (1.0 - sx) * sy;
    double w11 = sx * sy;
    double v = w00 * corner_normal(seed, ap, floor, x0, y0) +
               w10 * corner_normal(seed, ap, floor, x0 + 1, y0) +
               w01 * corner_normal(seed, ap, floor, x0, y0 + 1) +
               w11 * corner_normal(seed, ap, floor, x0 + 1, y0 + 1);
    return v / std::sqrt(w00 * w00 + w10 * w10 + w01 * w01 + w11 * w11);
}

} // namespace

SynthDataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    nn::Rng rng(cfg.seed);
    nn::Rng ap_rng = rng.fork(1);
    nn::Rng train_rng = rng.fork(2);
    nn::Rng test_rng = rng.fork(3);

    // building plans and reference spots
    std::vector<Ap> aps;
    std::vector<Spot> spots;
    std::vector<std::vector<Segment>> plans(size_t(cfg.buildings));
    for (int b = 0; b < cfg.buildings; ++b) {
        plans[size_t(b)] = corridor_plan(cfg, b * cfg.building_gap);
        const auto& plan = plans[size_t(b)];
        const double len = total_length(plan);
        for (int f = 0; f < cfg.floors_per_building[size_t(b)]; ++f) {
            for (int a = 0; a < cfg.aps_per_floor; ++a) {
                double x, y;
                point_at(plan, ap_rng.uniform(0.0, len), x, y);
                // APs sit in rooms off the corridor, not on it
                x += ap_rng.uniform(-4.0, 4.0);
                y += ap_rng.uniform(-4.0, 4.0);
                aps.push_back({x, y, b, f});
            }
            for (double t = 0.0; t <= len; t += cfg.spot_spacing) {
                double x, y;
                point_at(plan, t, x, y);
                spots.push_back({x, y, b, f});
            }
        }
    }

    const double spatial_sigma =
        std::sqrt(std::max(0.0, cfg.shadow_sigma * cfg.shadow_sigma - cfg.scan_sigma * cfg.scan_sigma));

    auto scan = [&](double x, double y, int building, int floor, double device_offset,
                    nn::Rng& r) {
        FingerprintRecord rec;
        rec.x = x;
        rec.y = y;
        rec.building = building;
        rec.floor = floor;
        rec.rssi.assign(aps.size(), 100.0f);
        for (size_t i = 0; i < aps.size(); ++i) {
            const Ap& ap = aps[i];
            double dz = cfg.floor_height * (ap.floor - floor);
            double walls = ap.building == building ? 0.0 : 20.0;  // outer walls between buildings
            double d = std::max(1.0, std::hypot(ap.x - x, ap.y - y, dz));
            double level = cfg.tx_power - 10.0 * cfg.path_exponent * std::log10(d) -
                           cfg.floor_loss * std::abs(double(ap.floor - floor)) - walls +
                           spatial_sigma * shadow_field(cfg.seed, i, floor, x, y) +
                           cfg.scan_sigma * r.normal() + device_offset;
            if (level < cfg.rssi_min) continue;
            // scans miss weak access points more often than strong ones
            double miss = 0.10 + 0.40 * std::clamp((-60.0 - level) / 40.0, 0.0, 1.0);
            if (r.uniform() < miss) continue;
            rec.rssi[i] = float(std::round(std::clamp(level, cfg.rssi_min, 0.0)));
        }
        return rec;
    };

    SynthDataset out;
    out.manifest = DatasetManifest::uji();
    out.manifest.name = "synthetic-campus";
    out.manifest.ap_count = int(aps.size());
    out.manifest.rssi_min = cfg.rssi_min;

    out.train.reserve(size_t(cfg.train_records));
    for (int i = 0; i < cfg.train_records; ++i) {
        const Spot& s = spots[size_t(i) % spots.size()];
        out.train.push_back(scan(s.x, s.y, s.building, s.floor, 0.0, train_rng));
    }

    out.test.reserve(size_t(cfg.test_records));
    for (int i = 0; i < cfg.test_records; ++i) {
        int b = int(test_rng.uniform_int(uint64_t(cfg.buildings)));
        int f = int(test_rng.uniform_int(uint64_t(cfg.floors_per_building[size_t(b)])));
        const auto& plan = plans[size_t(b)];
        double x, y;
        point_at(plan, test_rng.uniform(0.0, total_length(plan)), x, y);
        // users stand near, not on, the survey line
        x += test_rng.uniform(-1.5, 1.5);
        y += test_rng.uniform(-1.5, 1.5);
        double device_offset = test_rng.normal() * cfg.device_offset_sigma;
        out.test.push_back(scan(x, y, b, f, device_offset, test_rng));
    }
    return out;
}

void write_dataset_csv(const std::vector<FingerprintRecord>& records,
                       const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::io, "synth: cannot write " + path);
    for (int i = 0; i < manifest.ap_count; ++i) {
        out << manifest.rssi_columns.column_name(i) << ',';
    }
    out << manifest.x_column << ',' << manifest.y_column << ',' << manifest.floor_column;
    if (!manifest.building_column.empty()) out << ',' << manifest.building_column;
    out << '\n';
    char buf[64];
    for (const FingerprintRecord& rec : records) {
        if (int(rec.rssi.size()) != manifest.ap_count) {
            raise(ErrorCode::validation, "synth: record width does not match the manifest");
        }
        for (float v : rec.rssi) {
            int n = std::snprintf(buf, sizeof buf, "%d,", int(std::lround(v)));
            out.write(buf, n);
        }
        int n = std::snprintf(buf, sizeof buf, "%.4f,%.4f,%d", rec.x, rec.y, rec.floor);
        out.write(buf, n);
        if (!manifest.building_column.empty()) {
            n = std::snprintf(buf, sizeof buf, ",%d", rec.building);
            out.write(buf, n);
        }
        out.put('\n');
    }
    if (!out) raise(ErrorCode::io, "synth: write failed for " + path);
}

} // namespace caeloc
