#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "error.hpp"
#include "f16.hpp"
#include "model.hpp"
#include "nn/rng.hpp"
#include "quant.hpp"
#include "serialize.hpp"

using namespace caeloc;
using nn::Mode;
using nn::Tensor;

namespace {

ModelSpec small_spec(int classes = 5, uint64_t seed = 7) {
    ModelSpec s;
    s.image_side = 17;
    s.class_count = classes;
    s.conv1_filters = 4;
    s.conv2_filters = 6;
    s.conv3_filters = 8;
    s.seed = seed;
    return s;
}

// Random values that sit exactly on a 1/255 grid in [0,1], so feeding them
// to the integer engine loses nothing at the input quantization step.
Tensor<float> grid_images(std::vector<int> shape, uint64_t seed) {
    nn::Rng rng(seed);
    Tensor<float> t(shape);
    for (size_t i = 0; i < t.size(); ++i) t[i] = float(double(rng.uniform_int(256)) / 255.0);
    return t;
}

// Give batch-norm layers non-trivial inference statistics; freshly built
// models have identity stats, which would make folding vacuous.
void randomize_bn_stats(CaeCnnModel& m, uint64_t seed) {
    nn::Rng rng(seed);
    for (auto* bn : {&m.bn1(), &m.bn2(), &m.bn3()}) {
        for (size_t i = 0; i < bn->gamma().size(); ++i) {
            bn->gamma()[i] = float(rng.uniform(0.5, 1.5));
            bn->beta()[i] = float(rng.uniform(-0.3, 0.3));
            bn->running_mean()[i] = float(rng.uniform(-0.5, 0.5));
            bn->running_var()[i] = float(rng.uniform(0.25, 2.0));
        }
    }
}

} // namespace

TEST_CASE("f16 encodings of anchor values") {
    CHECK(f32_to_f16_bits(0.0f) == 0x0000);
    CHECK(f32_to_f16_bits(-0.0f) == 0x8000);
    CHECK(f32_to_f16_bits(1.0f) == 0x3C00);
    CHECK(f32_to_f16_bits(-2.0f) == 0xC000);
    CHECK(f32_to_f16_bits(0.5f) == 0x3800);
    CHECK(f32_to_f16_bits(65504.0f) == 0x7BFF);  // largest finite half
    CHECK(f32_to_f16_bits(0.099976f) == 0x2E66);
    CHECK(f32_to_f16_bits(5.960464e-8f) == 0x0001);  // smallest subnormal
    CHECK(f16_bits_to_f32(0x3C00) == 1.0f);
    CHECK(f16_bits_to_f32(0x7BFF) == 65504.0f);
    CHECK(f16_bits_to_f32(0x0001) == doctest::Approx(5.960464e-8).epsilon(1e-6));
    CHECK(f16_bits_to_f32(0xC000) == -2.0f);
}

TEST_CASE("f16 rounds to nearest even") {
    // 2049 is halfway between the representable 2048 and 2050; ties go to
    // the even mantissa (2048). 2051 is halfway to 2052 and goes up.
    CHECK(f16_bits_to_f32(f32_to_f16_bits(2049.0f)) == 2048.0f);
    CHECK(f16_bits_to_f32(f32_to_f16_bits(2051.0f)) == 2052.0f);
    // above halfway rounds up
    CHECK(f16_bits_to_f32(f32_to_f16_bits(2049.1f)) == 2050.0f);
    // round-up may carry into the exponent
    CHECK(f16_bits_to_f32(f32_to_f16_bits(2047.9f)) == 2048.0f);
}

TEST_CASE("f16 overflow detection") {
    CHECK_FALSE(f16_overflows(65504.0f));
    CHECK(f16_overflows(65520.0f));  // rounds past the largest finite half
    CHECK(f16_overflows(1e6f));
    CHECK(f16_overflows(-1e6f));
    CHECK_FALSE(f16_overflows(-65504.0f));
    CHECK_FALSE(f16_overflows(0.0f));
}

TEST_CASE("every f16 bit pattern round-trips through f32") {
    for (uint32_t bits = 0; bits <= 0xFFFF; ++bits) {
        uint16_t h = uint16_t(bits);
        if ((h & 0x7C00u) == 0x7C00u) continue;  // inf/nan: payload not preserved
        float f = f16_bits_to_f32(h);
        CHECK(f32_to_f16_bits(f) == h);
    }
}

TEST_CASE("f16 relative error stays within a half ulp for normal values") {
    nn::Rng rng(5);
    for (int i = 0; i < 20000; ++i) {
        float x = float(rng.uniform(-100.0, 100.0));
        if (std::abs(x) < 6.2e-5f) continue;  // skip subnormals here
        float back = f16_bits_to_f32(f32_to_f16_bits(x));
        CHECK(std::abs(back - x) <= std::abs(x) * (1.0f / 2048.0f));
    }
}

TEST_CASE("int8 affine quantization: formula and reconstruction bound") {
    nn::Rng rng(9);
    std::vector<float> x(500);
    for (auto& v : x) v = float(rng.uniform(-3.0, 7.0));
    Int8Tensor q = quantize_tensor_int8(x.data(), x.size(), {500});

    float mn = x[0], mx = x[0];
    for (float v : x) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    CHECK(q.scale == doctest::Approx((double(mx) - double(mn)) / 255.0));
    for (int8_t c : q.codes) {
        CHECK(int(c) >= -128);
        CHECK(int(c) <= 127);
    }
    std::vector<float> back = dequantize(q);
    for (size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(double(back[i]) - double(x[i])) <= q.scale / 2.0 + 1e-6);
    }
}

TEST_CASE("int8 handles degenerate tensors") {
    SUBCASE("all zero") {
        std::vector<float> x(16, 0.0f);
        Int8Tensor q = quantize_tensor_int8(x.data(), x.size(), {16});
        std::vector<float> back = dequantize(q);
        for (float v : back) CHECK(v == 0.0f);
    }
    SUBCASE("all same nonzero") {
        std::vector<float> x(16, 2.5f);
        Int8Tensor q = quantize_tensor_int8(x.data(), x.size(), {16});
        std::vector<float> back = dequantize(q);
        for (float v : back) CHECK(v == doctest::Approx(2.5).epsilon(0.02));
    }
    SUBCASE("single value") {
        float v = -1.25f;
        Int8Tensor q = quantize_tensor_int8(&v, 1, {1});
        CHECK(dequantize(q)[0] == doctest::Approx(-1.25).epsilon(0.02));
    }
}

TEST_CASE("int8 hits exact grid values") {
    // values on the scale grid reconstruct exactly: range [0, 255] -> scale 1
    std::vector<float> x;
    for (int i = 0; i <= 255; ++i) x.push_back(float(i));
    Int8Tensor q = quantize_tensor_int8(x.data(), x.size(), {256});
    CHECK(q.scale == doctest::Approx(1.0));
    std::vector<float> back = dequantize(q);
    for (size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(double(x[i])));
}

TEST_CASE("batch-norm folding preserves the conv output") {
    nn::Rng rng(31);
    CaeCnnModel m(small_spec());
    randomize_bn_stats(m, 41);
    Tensor<float> in = grid_images({3, 17, 17, 1}, 11);

    // reference: conv1 then bn1 in inference mode
    Tensor<float> ref = m.bn1().forward(m.conv1().forward(in, Mode::infer), Mode::infer);

    nn::Tensor<float> w = m.conv1().weights();  // copies
    nn::Tensor<float> b = m.conv1().bias();
    fold_batchnorm(w, b, m.bn1());
    m.conv1().weights() = w;
    m.conv1().bias() = b;
    Tensor<float> folded = m.conv1().forward(in, Mode::infer);

    REQUIRE(folded.shape() == ref.shape());
    for (size_t i = 0; i < ref.size(); ++i) {
        CHECK(folded[i] == doctest::Approx(ref[i]).epsilon(1e-4));
    }
}

TEST_CASE("folded float classifier reproduces the model's inference logits") {
    CaeCnnModel m(small_spec(5, 3));
    randomize_bn_stats(m, 13);
    Tensor<float> in = grid_images({4, 17, 17, 1}, 7);
    Tensor<float> want = m.logits(in, Mode::infer);
    nn::Sequential<float> folded = folded_float_classifier(m);
    Tensor<float> got = folded.forward(in, Mode::infer);
    REQUIRE(got.shape() == want.shape());
    for (size_t i = 0; i < want.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-4));
    }
}

TEST_CASE("model container round-trips bit-exactly") {
    CaeCnnModel m(small_spec());
    randomize_bn_stats(m, 3);
    ModelFile f = pack_model(m, "grid.json", "{\"k\":1}");
    CHECK(f.precision == "f32");
    CHECK(f.grid_ref == "grid.json");

    std::string bytes = f.to_bytes();
    ModelFile back = ModelFile::from_bytes(bytes);
    CHECK(back.to_bytes() == bytes);
    CHECK(back.precision == f.precision);
    CHECK(back.spec.class_count == f.spec.class_count);
    CHECK(back.metadata_json == f.metadata_json);
    REQUIRE(back.tensors.size() == f.tensors.size());
    for (size_t i = 0; i < f.tensors.size(); ++i) {
        CHECK(back.tensors[i].name == f.tensors[i].name);
        CHECK(back.tensors[i].shape == f.tensors[i].shape);
        CHECK(back.tensors[i].data == f.tensors[i].data);
    }

    auto path = (std::filesystem::temp_directory_path() / "caeloc_model_rt.cclm").string();
    f.save(path);
    ModelFile loaded = ModelFile::load(path);
    CHECK(loaded.to_bytes() == bytes);
}

TEST_CASE("container parsing rejects corrupted bytes") {
    CaeCnnModel m(small_spec());
    std::string bytes = pack_model(m, "g.json", "{}").to_bytes();
    SUBCASE("bad magic") {
        std::string b = bytes;
        b[0] = 'X';
        CHECK_THROWS_AS(ModelFile::from_bytes(b), Error);
    }
    SUBCASE("bad version") {
        std::string b = bytes;
        b[4] = 99;
        CHECK_THROWS_AS(ModelFile::from_bytes(b), Error);
    }
    SUBCASE("truncated") {
        CHECK_THROWS_AS(ModelFile::from_bytes(bytes.substr(0, bytes.size() / 2)), Error);
        CHECK_THROWS_AS(ModelFile::from_bytes(bytes.substr(0, 6)), Error);
    }
    SUBCASE("trailing garbage") {
        CHECK_THROWS_AS(ModelFile::from_bytes(bytes + "x"), Error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(ModelFile::load("/nonexistent/m.cclm"), Error);
    }
}

TEST_CASE("unpacking restores a working model") {
    CaeCnnModel m(small_spec(5, 23));
    randomize_bn_stats(m, 5);
    Tensor<float> in = grid_images({3, 17, 17, 1}, 99);
    Tensor<float> want = m.logits(in, Mode::infer);
    ModelFile f = pack_model(m, "grid.json");
    CaeCnnModel back = unpack_model(f);
    Tensor<float> got = back.logits(in, Mode::infer);
    for (size_t i = 0; i < want.size(); ++i) CHECK(got[i] == want[i]);  // bit-exact
    // reconstruction path survived too
    Tensor<float> r1 = m.reconstruct(in, Mode::infer);
    Tensor<float> r2 = back.reconstruct(in, Mode::infer);
    for (size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("f16 conversion halves the payload and keeps logits close") {
    CaeCnnModel m(small_spec(5, 29));
    randomize_bn_stats(m, 7);
    ModelFile f32 = pack_model(m, "grid.json");
    ModelFile f16 = quantize_f16(f32);
    CHECK(f16.precision == "f16");
    CHECK(f16.tensors.size() == f32.tensors.size());
    CHECK(double(f16.payload_bytes()) / double(f32.payload_bytes()) == doctest::Approx(0.5));

    CaeCnnModel back = unpack_model(f16);
    Tensor<float> in = grid_images({4, 17, 17, 1}, 1);
    Tensor<float> a = m.logits(in, Mode::infer);
    Tensor<float> b = back.logits(in, Mode::infer);
    double worst = 0;
    for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
    CHECK(worst < 0.05);  // half precision on small activations
    // and the winners agree
    CHECK(argmax_rows(a) == argmax_rows(b));
}

TEST_CASE("f16 conversion refuses values outside the half range") {
    CaeCnnModel m(small_spec());
    ModelFile f32 = pack_model(m, "grid.json");
    CaeCnnModel m2(small_spec());
    m2.dense().bias()[0] = 1e6f;
    ModelFile bad = pack_model(m2, "grid.json");
    CHECK_THROWS_WITH_AS(quantize_f16(bad), doctest::Contains("head.dense.b"), Error);
    CHECK_NOTHROW(quantize_f16(f32));
}

TEST_CASE("int8 container keeps only the folded deployment graph") {
    CaeCnnModel m(small_spec(5, 31));
    randomize_bn_stats(m, 17);
    ModelFile f32 = pack_model(m, "grid.json");
    ModelFile i8 = quantize_int8(f32);
    CHECK(i8.precision == "i8");
    CHECK(i8.bn_folded);
    REQUIRE(i8.tensors.size() == 8);
    for (const char* name : {"conv1.w", "conv1.b", "conv2.w", "conv2.b", "conv3.w", "conv3.b",
                             "dense.w", "dense.b"}) {
        const TensorEntry& e = i8.entry(name);
        bool is_weight = std::string(name).ends_with(".w");
        CHECK(e.dtype == (is_weight ? "i8" : "f32"));
    }
    // no decoder, no separate batch-norm tensors
    CHECK(i8.find("dec.tconv.w") == nullptr);
    CHECK(i8.find("head.bn2.gamma") == nullptr);
    // weights-only int8 with f32 biases lands near a quarter of the f32 payload
    double ratio = double(i8.payload_bytes()) / double(f32.payload_bytes());
    CHECK(ratio < 0.29);
    CHECK_THROWS_AS(unpack_model(i8), Error);  // integer containers use the integer engine
}

TEST_CASE("integer engine matches a dequantized float oracle") {
    CaeCnnModel m(small_spec(5, 37));
    randomize_bn_stats(m, 19);
    ModelFile f32 = pack_model(m, "grid.json");
    ModelFile i8 = quantize_int8(f32);

    // oracle: run the folded graph in float with the *dequantized* weights,
    // so the only differences left are activation quantization and ordering
    nn::Rng rng(0);
    CaeCnnModel oracle(small_spec(5, 37));
    auto load_conv = [&](nn::Conv2D<float>& conv, const char* wname, const char* bname) {
        std::vector<float> w = decode_entry(i8.entry(wname));
        std::vector<float> b = decode_entry(i8.entry(bname));
        std::copy(w.begin(), w.end(), conv.weights().data());
        std::copy(b.begin(), b.end(), conv.bias().data());
    };
    load_conv(oracle.conv1(), "conv1.w", "conv1.b");
    load_conv(oracle.conv2(), "conv2.w", "conv2.b");
    load_conv(oracle.conv3(), "conv3.w", "conv3.b");
    std::vector<float> dw = decode_entry(i8.entry("dense.w"));
    std::vector<float> db = decode_entry(i8.entry("dense.b"));
    std::copy(dw.begin(), dw.end(), oracle.dense().weights().data());
    std::copy(db.begin(), db.end(), oracle.dense().bias().data());

    nn::Sequential<float> fref;
    fref.add(std::make_shared<nn::Conv2D<float>>(oracle.conv1()));
    fref.add(std::make_shared<nn::ReLU<float>>());
    fref.add(std::make_shared<nn::MaxPool<float>>(3, 3));
    fref.add(std::make_shared<nn::Conv2D<float>>(oracle.conv2()));
    fref.add(std::make_shared<nn::ReLU<float>>());
    fref.add(std::make_shared<nn::Conv2D<float>>(oracle.conv3()));
    fref.add(std::make_shared<nn::ReLU<float>>());
    fref.add(std::make_shared<nn::Flatten<float>>());
    fref.add(std::make_shared<nn::Dense<float>>(oracle.dense()));

    Tensor<float> in = grid_images({6, 17, 17, 1}, 5);
    Tensor<float> want = fref.forward(in, Mode::infer);

    Int8Engine engine(i8);
    Tensor<float> got = engine.logits(in);
    REQUIRE(got.shape() == want.shape());
    double scale = 0;
    for (size_t i = 0; i < want.size(); ++i) scale = std::max(scale, std::abs(double(want[i])));
    for (size_t i = 0; i < want.size(); ++i) {
        CHECK(std::abs(double(got[i]) - double(want[i])) < 0.02 * scale + 0.02);
    }
    CHECK(engine.predict(in) == argmax_rows(got));
}

TEST_CASE("integer engine is deterministic across reloads") {
    CaeCnnModel m(small_spec(4, 41));
    ModelFile i8 = quantize_int8(pack_model(m, "grid.json"));
    auto path = (std::filesystem::temp_directory_path() / "caeloc_i8_rt.cclm").string();
    i8.save(path);
    ModelFile back = ModelFile::load(path);
    Tensor<float> in = grid_images({2, 17, 17, 1}, 77);
    Tensor<float> a = Int8Engine(i8).logits(in);
    Tensor<float> b = Int8Engine(back).logits(in);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("quantize_int8 rejects non-f32 sources") {
    CaeCnnModel m(small_spec());
    ModelFile f32 = pack_model(m, "grid.json");
    ModelFile f16 = quantize_f16(f32);
    CHECK_THROWS_AS(quantize_int8(f16), Error);
    ModelFile i8 = quantize_int8(f32);
    CHECK_THROWS_AS(quantize_int8(i8), Error);
    CHECK_THROWS_AS(quantize_f16(i8), Error);
}
