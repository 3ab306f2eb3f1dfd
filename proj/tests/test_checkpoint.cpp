#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "uprompt/checkpoint.hpp"
#include "uprompt/rng.hpp"

using namespace uprompt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("uprompt_ckpt_" + std::to_string(Rng(std::random_device{}()).raw()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Checkpoint sample_checkpoint() {
    Checkpoint ckpt;
    ckpt.component = "LM";
    ckpt.config_text = "variant = decoder_only\nn_layers = 1\n";
    Rng rng(4);
    ckpt.params.push_back(tensor_to_record("embed", Tensor<float>::randn({5, 3}, rng)));
    ckpt.params.push_back(tensor_to_record("bias", Tensor<double>::randn({4}, rng)));
    return ckpt;
}

}  // namespace

TEST_CASE("fnv1a matches published vectors") {
    CHECK(fnv1a(nullptr, 0) == 14695981039346656037ull);
    const unsigned char a = 'a';
    CHECK(fnv1a(&a, 1) == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("tensor records round trip both dtypes") {
    Rng rng(8);
    auto tf = Tensor<float>::randn({3, 4}, rng);
    auto rec = tensor_to_record("w", tf);
    CHECK(rec.dtype == 'f');
    CHECK(rec.dims == std::vector<int>{3, 4});
    auto back = tensor_from_record<float>(rec);
    CHECK(back.values() == tf.values());

    auto td = Tensor<double>::randn({2}, rng);
    auto recd = tensor_to_record("v", td);
    CHECK(recd.dtype == 'd');
    CHECK(tensor_from_record<double>(recd).values() == td.values());

    CHECK_THROWS_AS(tensor_from_record<double>(rec), CheckpointError);
    CHECK_THROWS_AS(tensor_from_record<float>(recd), CheckpointError);
}

TEST_CASE("serialize then parse preserves everything, twice over") {
    const Checkpoint ckpt = sample_checkpoint();
    const auto bytes = serialize_checkpoint(ckpt);
    const Checkpoint back = parse_checkpoint(bytes);
    CHECK(back.component == ckpt.component);
    CHECK(back.config_text == ckpt.config_text);
    REQUIRE(back.params.size() == 2);
    CHECK(back.params[0].name == "embed");
    CHECK(back.params[0].payload == ckpt.params[0].payload);
    CHECK(serialize_checkpoint(back) == bytes);  // save -> load -> save identical
    CHECK(back.payload_hash() == ckpt.payload_hash());
}

TEST_CASE("find and has address records by name") {
    const Checkpoint ckpt = sample_checkpoint();
    CHECK(ckpt.has("embed"));
    CHECK_FALSE(ckpt.has("missing"));
    CHECK(ckpt.find("bias").dtype == 'd');
    CHECK_THROWS_AS(ckpt.find("missing"), CheckpointError);
}

TEST_CASE("payload hash tracks content") {
    Checkpoint ckpt = sample_checkpoint();
    const auto h = ckpt.payload_hash();
    ckpt.params[0].payload[0] ^= 0xff;
    CHECK(ckpt.payload_hash() != h);
}

TEST_CASE("corrupted containers are rejected") {
    const auto bytes = serialize_checkpoint(sample_checkpoint());

    SUBCASE("bad magic") {
        auto bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(parse_checkpoint(bad), CheckpointError);
    }
    SUBCASE("unknown version") {
        auto bad = bytes;
        bad[4] = 0x7f;
        CHECK_THROWS_AS(parse_checkpoint(bad), CheckpointError);
    }
    SUBCASE("truncated") {
        auto bad = bytes;
        bad.resize(bad.size() / 2);
        CHECK_THROWS_AS(parse_checkpoint(bad), CheckpointError);
    }
    SUBCASE("flipped payload byte breaks the trailing hash") {
        auto bad = bytes;
        bad[bytes.size() - 20] ^= 0x01;
        CHECK_THROWS_AS(parse_checkpoint(bad), CheckpointError);
    }
}

TEST_CASE("file round trip") {
    TempDir dir;
    const Checkpoint ckpt = sample_checkpoint();
    save_checkpoint(ckpt, dir.file("a.spul"));
    const Checkpoint back = load_checkpoint(dir.file("a.spul"));
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(ckpt));
    CHECK_THROWS_AS(load_checkpoint(dir.file("missing.spul")), CheckpointError);
}

TEST_CASE("feature files round trip") {
    TempDir dir;
    FeatureMatrix m;
    m.frames = 3;
    m.dim = 2;
    m.values = {1.f, 2.f, 3.f, 4.f, 5.f, 6.f};
    save_features(m, dir.file("f.spfm"));
    const auto back = load_features(dir.file("f.spfm"));
    CHECK(back.frames == 3);
    CHECK(back.dim == 2);
    CHECK(back.values == m.values);

    // truncation detection
    std::ofstream trunc(dir.file("t.spfm"), std::ios::binary);
    trunc << "SPFM";
    trunc.close();
    CHECK_THROWS_AS(load_features(dir.file("t.spfm")), CheckpointError);
}

TEST_CASE("unit text files round trip including empty utterances") {
    TempDir dir;
    const std::vector<UnitSeq> corpus = {{1, 2, 3}, {}, {42}};
    save_units(corpus, dir.file("u.txt"));
    CHECK(load_units(dir.file("u.txt")) == corpus);
    CHECK_THROWS_AS(load_units(dir.file("missing.txt")), DataError);
}

TEST_CASE("quantizer models round trip") {
    TempDir dir;
    QuantizerModel model;
    model.k = 2;
    model.dim = 3;
    model.seed = 9;
    model.centroids = {1, 2, 3, 4, 5, 6};
    model.inertia_history = {5.0, 2.0};
    model.iters_run = 1;
    save_quantizer(model, dir.file("q.spul"));
    const auto back = load_quantizer(dir.file("q.spul"));
    CHECK(back.k == 2);
    CHECK(back.dim == 3);
    CHECK(back.seed == 9);
    CHECK(back.centroids == model.centroids);
}
