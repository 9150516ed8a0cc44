#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"

namespace caeloc {

// Generator for a campus-style WiFi fingerprint corpus: several multi-floor
// buildings, corridor-comb floor plans, reference spots on a fixed lattice
// for the training side and continuous corridor positions for the test
// side, log-distance path loss with shadowing and scan dropout.
//
// The defaults are calibrated so the corpus behaves like the well-known
// public benchmark it mirrors: ~820 occupied 7 m cells over the training
// positions, a KNN baseline in the 7-12 m band, and learnable building/
// floor structure.
struct SynthConfig {
    int buildings = 3;
    std::vector<int> floors_per_building = {4, 4, 5};
    int aps_per_floor = 40;  // buildings*floors*aps_per_floor = total AP count
    int train_records = 19938;
    int test_records = 1111;

    // floor plan: one horizontal spine with vertical teeth
    double spine_length = 147.0;
    double tooth_length = 74.0;
    int teeth = 4;
    double building_gap = 200.0;  // x offset between building origins
    double floor_height = 4.0;

    double spot_spacing = 3.0;  // reference-spot pitch along corridors

    // radio model. Shadowing splits into a frozen spatial field (walls and
    // furniture look the same to every scan taken at the same place) and a
    // per-scan component (people, orientation, hardware jitter); the total
    // marginal std is shadow_sigma.
    double tx_power = -33.0;   // dBm at 1 m
    double path_exponent = 3.0;
    double floor_loss = 15.0;  // dB per floor crossed
    double shadow_sigma = 8.0; // total shadowing std
    double scan_sigma = 2.75;  // per-scan share of shadow_sigma
    double device_offset_sigma = 9.0;  // per-test-record bias (device variety)
    double rssi_min = -104.0;

    uint64_t seed = 20138;

    int ap_count() const;
    void validate() const;
};

struct SynthDataset {
    DatasetManifest manifest;
    std::vector<FingerprintRecord> train;
    std::vector<FingerprintRecord> test;
};

SynthDataset generate_synthetic(const SynthConfig& config);

// CSV with the benchmark column layout (WAP...,LONGITUDE,LATITUDE,FLOOR,
// BUILDINGID); RSSI values are integral dBm, absent APs carry the sentinel.
void write_dataset_csv(const std::vector<FingerprintRecord>& records,
                       const DatasetManifest& manifest, const std::string& path);

} // namespace caeloc
