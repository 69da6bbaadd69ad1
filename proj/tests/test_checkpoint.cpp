#include "conceptscope/checkpoint.hpp"
#include "conceptscope/training.hpp"

#include "doctest.h"
#include "fixture.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace conceptscope;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path & p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const fs::path & p, const std::string & bytes) {
    std::ofstream f(p, std::ios::binary);
    f << bytes;
}

struct TempDir {
    fs::path path = fs::temp_directory_path() / ("conceptscope_ckpt_" + std::to_string(::getpid()));
    TempDir() { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("checkpoints round-trip byte for byte") {
    TempDir dir;
    const Transformer m = fixture::tiny_model();
    const auto a = dir.path / "a.ckpt";
    const auto b = dir.path / "b.ckpt";
    save_model(a.string(), m, fixture::vocab(), {{"note", "x"}});
    const LoadedModel loaded = load_model(a.string());
    CHECK(loaded.model.params().tensors() == m.params().tensors());
    CHECK(loaded.vocab.tokens() == fixture::vocab().tokens());
    save_model(b.string(), loaded.model, loaded.vocab, {{"note", "x"}});
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a).substr(0, 4) == "CSCP");
    CHECK(read_checkpoint_header(a.string()).at("extra").at("note") == "x");

    const auto ids = fixture::vocab().tokenize("Q: big A:");
    CHECK(loaded.model.forward(ids).logits == m.forward(ids).logits);
}

TEST_CASE("corrupt checkpoints are rejected") {
    TempDir dir;
    const auto good = dir.path / "good.ckpt";
    save_model(good.string(), fixture::tiny_model(), fixture::vocab());
    const std::string bytes = slurp(good);

    const auto bad = dir.path / "bad.ckpt";
    spit(bad, "XXXX" + bytes.substr(4));
    CHECK_THROWS_AS(load_checkpoint(bad.string()), CheckpointError);
    spit(bad, bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_checkpoint(bad.string()), CheckpointError);
    spit(bad, bytes + "junk");
    CHECK_THROWS_AS(load_checkpoint(bad.string()), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint((dir.path / "missing.ckpt").string()), CheckpointError);
}
