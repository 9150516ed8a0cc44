#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "model.hpp"

namespace caeloc {

// One stored tensor. Payload bytes are little-endian in the tensor's
// dtype: f32 (4 bytes), f16 (2), i8 (1, with affine scale/zero_point).
struct TensorEntry {
    std::string name;
    std::vector<int> shape;
    std::string dtype = "f32";
    double scale = 0.0;   // i8 only
    int zero_point = 0;   // i8 only
    std::vector<uint8_t> data;

    size_t element_count() const;
    size_t dtype_size() const;
};

// Versioned model container: magic, version, JSON header (architecture,
// precision, grid reference, metadata, tensor table) and a raw parameter
// blob. Round-trips bit-exactly.
struct ModelFile {
    std::string precision = "f32";  // f32 | f16 | i8
    ModelSpec spec;
    bool bn_folded = false;
    std::string grid_ref;       // name of the grid file the class ids refer to
    std::string metadata_json;  // free-form JSON object (training config, provenance)
    std::vector<TensorEntry> tensors;

    const TensorEntry* find(const std::string& name) const;
    const TensorEntry& entry(const std::string& name) const;

    uint64_t payload_bytes() const;  // parameter bytes only
    uint64_t file_bytes() const;

    std::string to_bytes() const;
    static ModelFile from_bytes(const std::string& bytes);
    void save(const std::string& path) const;
    static ModelFile load(const std::string& path);
};

// Snapshot every persistent tensor of the model into an f32 container.
ModelFile pack_model(CaeCnnModel& model, const std::string& grid_ref,
                     const std::string& metadata_json = "");

// Rebuild a float model from an f32 or f16 container (f16 payloads are
// decoded back to f32). i8 containers run through the integer engine
// instead and are rejected here.
CaeCnnModel unpack_model(const ModelFile& file);

// Decode any entry to f32 (i8 entries are dequantized).
std::vector<float> decode_entry(const TensorEntry& e);

} // namespace caeloc
