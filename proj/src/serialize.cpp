#include "serialize.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

#include "error.hpp"
#include "f16.hpp"

namespace caeloc {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'C', 'C', 'L', 'M'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const std::string& s, size_t& pos) {
    if (pos + 4 > s.size()) raise(ErrorCode::parse, "model file: truncated");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(s[pos + size_t(i)])) << (8 * i);
    pos += 4;
    return v;
}

uint64_t get_u64(const std::string& s, size_t& pos) {
    if (pos + 8 > s.size()) raise(ErrorCode::parse, "model file: truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(s[pos + size_t(i)])) << (8 * i);
    pos += 8;
    return v;
}

json spec_to_json(const ModelSpec& s) {
    return json{{"image_side", s.image_side},       {"class_count", s.class_count},
                {"conv1_filters", s.conv1_filters}, {"conv2_filters", s.conv2_filters},
                {"conv3_filters", s.conv3_filters}, {"kernel", s.kernel},
                {"pool", s.pool},                   {"pool_stride", s.pool_stride},
                {"dropout_rate", s.dropout_rate},   {"seed", s.seed}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.image_side = j.at("image_side").get<int>();
    s.class_count = j.at("class_count").get<int>();
    s.conv1_filters = j.at("conv1_filters").get<int>();
    s.conv2_filters = j.at("conv2_filters").get<int>();
    s.conv3_filters = j.at("conv3_filters").get<int>();
    s.kernel = j.at("kernel").get<int>();
    s.pool = j.at("pool").get<int>();
    s.pool_stride = j.at("pool_stride").get<int>();
    s.dropout_rate = j.at("dropout_rate").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
    return s;
}

} // namespace

size_t TensorEntry::element_count() const {
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    return n;
}

size_t TensorEntry::dtype_size() const {
    if (dtype == "f32") return 4;
    if (dtype == "f16") return 2;
    if (dtype == "i8") return 1;
    raise(ErrorCode::schema, "model file: unknown dtype " + dtype);
}

const TensorEntry* ModelFile::find(const std::string& name) const {
    for (const auto& e : tensors) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

const TensorEntry& ModelFile::entry(const std::string& name) const {
    const TensorEntry* e = find(name);
    if (!e) raise(ErrorCode::schema, "model file: missing tensor " + name);
    return *e;
}

uint64_t ModelFile::payload_bytes() const {
    uint64_t n = 0;
    for (const auto& e : tensors) n += e.data.size();
    return n;
}

uint64_t ModelFile::file_bytes() const { return to_bytes().size(); }

std::string ModelFile::to_bytes() const {
    json header;
    header["precision"] = precision;
    header["model"] = spec_to_json(spec);
    header["bn_folded"] = bn_folded;
    header["grid_ref"] = grid_ref;
    if (!metadata_json.empty()) {
        header["metadata"] = json::parse(metadata_json);
    } else {
        header["metadata"] = json::object();
    }
    json table = json::array();
    uint64_t offset = 0;
    for (const auto& e : tensors) {
        if (e.data.size() != e.element_count() * e.dtype_size()) {
            raise(ErrorCode::internal, "model file: payload size mismatch for " + e.name);
        }
        json tj = {{"name", e.name}, {"shape", e.shape}, {"dtype", e.dtype},
                   {"offset", offset}, {"bytes", e.data.size()}};
        if (e.dtype == "i8") {
            tj["scale"] = e.scale;
            tj["zero_point"] = e.zero_point;
        }
        table.push_back(std::move(tj));
        offset += e.data.size();
    }
    header["tensors"] = std::move(table);
    std::string header_text = header.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, header_text.size());
    out += header_text;
    put_u64(out, offset);
    for (const auto& e : tensors) out.append(reinterpret_cast<const char*>(e.data.data()), e.data.size());
    return out;
}

ModelFile ModelFile::from_bytes(const std::string& bytes) {
    size_t pos = 0;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        raise(ErrorCode::parse, "model file: bad magic (not a model file)");
    }
    pos = 4;
    uint32_t version = get_u32(bytes, pos);
    if (version != kVersion) {
        raise(ErrorCode::parse, "model file: unsupported version " + std::to_string(version));
    }
    uint64_t header_len = get_u64(bytes, pos);
    if (pos + header_len > bytes.size()) raise(ErrorCode::parse, "model file: truncated header");
    std::string header_text = bytes.substr(pos, header_len);
    pos += header_len;
    uint64_t blob_len = get_u64(bytes, pos);
    if (pos + blob_len > bytes.size()) raise(ErrorCode::parse, "model file: truncated blob");
    if (pos + blob_len < bytes.size()) raise(ErrorCode::parse, "model file: trailing bytes after blob");
    const char* blob = bytes.data() + pos;

    ModelFile f;
    try {
        json header = json::parse(header_text);
        f.precision = header.at("precision").get<std::string>();
        f.spec = spec_from_json(header.at("model"));
        f.bn_folded = header.value("bn_folded", false);
        f.grid_ref = header.value("grid_ref", "");
        if (header.contains("metadata") && !header["metadata"].empty()) {
            f.metadata_json = header["metadata"].dump();
        }
        for (const auto& tj : header.at("tensors")) {
            TensorEntry e;
            e.name = tj.at("name").get<std::string>();
            e.shape = tj.at("shape").get<std::vector<int>>();
            e.dtype = tj.at("dtype").get<std::string>();
            uint64_t offset = tj.at("offset").get<uint64_t>();
            uint64_t nbytes = tj.at("bytes").get<uint64_t>();
            if (e.dtype == "i8") {
                e.scale = tj.at("scale").get<double>();
                e.zero_point = tj.at("zero_point").get<int>();
            }
            if (offset + nbytes > blob_len) raise(ErrorCode::parse, "model file: tensor " + e.name + " out of bounds");
            if (nbytes != e.element_count() * e.dtype_size()) {
                raise(ErrorCode::parse, "model file: tensor " + e.name + " size inconsistent with shape");
            }
            e.data.assign(blob + offset, blob + offset + nbytes);
            f.tensors.push_back(std::move(e));
        }
    } catch (const json::exception& ex) {
        raise(ErrorCode::parse, std::string("model file: bad header: ") + ex.what());
    }
    return f;
}

void ModelFile::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::io, "model file: cannot write " + path);
    std::string bytes = to_bytes();
    out.write(bytes.data(), long(bytes.size()));
    if (!out) raise(ErrorCode::io, "model file: write failed for " + path);
}

ModelFile ModelFile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::io, "model file: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

ModelFile pack_model(CaeCnnModel& model, const std::string& grid_ref, const std::string& metadata_json) {
    ModelFile f;
    f.precision = "f32";
    f.spec = model.spec();
    f.grid_ref = grid_ref;
    f.metadata_json = metadata_json;
    for (const auto& nt : model.named_tensors()) {
        if (!nt.tensor->all_finite()) {
            raise(ErrorCode::numeric, "model file: non-finite values in " + nt.name);
        }
        TensorEntry e;
        e.name = nt.name;
        e.shape = nt.tensor->shape();
        e.dtype = "f32";
        e.data.resize(nt.tensor->size() * 4);
        std::memcpy(e.data.data(), nt.tensor->data(), e.data.size());
        f.tensors.push_back(std::move(e));
    }
    return f;
}

std::vector<float> decode_entry(const TensorEntry& e) {
    const size_t n = e.element_count();
    std::vector<float> out(n);
    if (e.dtype == "f32") {
        std::memcpy(out.data(), e.data.data(), n * 4);
    } else if (e.dtype == "f16") {
        for (size_t i = 0; i < n; ++i) {
            uint16_t h = uint16_t(e.data[2 * i]) | (uint16_t(e.data[2 * i + 1]) << 8);
            out[i] = f16_bits_to_f32(h);
        }
    } else if (e.dtype == "i8") {
        for (size_t i = 0; i < n; ++i) {
            out[i] = float((double(int8_t(e.data[i])) - e.zero_point) * e.scale);
        }
    } else {
        raise(ErrorCode::schema, "model file: unknown dtype " + e.dtype);
    }
    return out;
}

CaeCnnModel unpack_model(const ModelFile& file) {
    if (file.precision == "i8") {
        raise(ErrorCode::state, "model file: i8 models run through the integer engine");
    }
    if (file.bn_folded) {
        raise(ErrorCode::state, "model file: folded models cannot be unpacked into the training graph");
    }
    CaeCnnModel model(file.spec);
    for (const auto& nt : model.named_tensors()) {
        const TensorEntry& e = file.entry(nt.name);
        if (e.element_count() != nt.tensor->size()) {
            raise(ErrorCode::schema, "model file: shape mismatch for " + nt.name);
        }
        std::vector<float> vals = decode_entry(e);
        std::copy(vals.begin(), vals.end(), nt.tensor->data());
    }
    return model;
}

} // namespace caeloc
