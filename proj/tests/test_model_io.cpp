#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dialogrank/errors.hpp"
#include "dialogrank/model_io.hpp"
#include "support/synthetic.hpp"

using namespace dialogrank;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dialogrank_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

DualEncoderModel random_model(Arch arch, bool shared, std::uint64_t seed) {
  ModelSpec spec;
  spec.lstm_hidden = 5;
  spec.bilstm_hidden = 3;
  spec.cnn.filters = {{1, 2}, {2, 2}, {3, 1}};
  spec.shared_encoders = shared;
  Rng rng(seed);
  Matrix emb(12, 4);
  for (int i = 1; i < emb.rows; ++i)
    for (int j = 0; j < emb.cols; ++j) emb(i, j) = uniform_real(rng, -0.5, 0.5);
  DualEncoderModel model = make_model(arch, spec, std::move(emb), seed + 1);
  for (double& v : model.bilinear.value.data) v += uniform_real(rng, -0.2, 0.2);
  model.bias.value(0, 0) = uniform_real(rng, -0.3, 0.3);
  return model;
}

constexpr std::uint64_t kChecksum = 0x1234abcd5678ef00ULL;

}  // namespace

TEST_CASE("save/load round trip preserves scores within f32 rounding") {
  TempDir tmp;
  for (Arch arch : {Arch::cnn, Arch::lstm, Arch::bilstm}) {
    for (bool shared : {true, false}) {
      CAPTURE(arch_name(arch));
      CAPTURE(shared);
      DualEncoderModel model = random_model(arch, shared, 90);
      const fs::path file = tmp.path / (arch_name(arch) + std::to_string(shared) + ".drnk");
      save_model(model, file, kChecksum);
      DualEncoderModel loaded = load_model(file, kChecksum);
      CHECK(loaded.arch == model.arch);
      CHECK(loaded.shared() == model.shared());

      Rng rng(91);
      double max_delta = 0.0;
      for (int i = 0; i < 100; ++i) {
        TokenSeq ctx = synth::random_seq(rng, 12, 7, 1, 7);
        TokenSeq resp = synth::random_seq(rng, 12, 6, 1, 6);
        max_delta = std::max(
            max_delta, std::abs(score_pair(ctx, resp, model) - score_pair(ctx, resp, loaded)));
      }
      CHECK(max_delta <= 1e-6);
    }
  }
}

TEST_CASE("corrupted magic bytes are rejected") {
  TempDir tmp;
  DualEncoderModel model = random_model(Arch::lstm, true, 92);
  const fs::path file = tmp.path / "model.drnk";
  save_model(model, file, kChecksum);
  {
    std::fstream f(file, std::ios::binary | std::ios::in | std::ios::out);
    f.put('X');
  }
  CHECK_THROWS_AS(load_model(file, kChecksum), ValidationError);
}

TEST_CASE("checksum mismatch refuses to load") {
  TempDir tmp;
  DualEncoderModel model = random_model(Arch::cnn, true, 93);
  const fs::path file = tmp.path / "model.drnk";
  save_model(model, file, kChecksum);
  CHECK_THROWS_WITH_AS(load_model(file, kChecksum + 1), doctest::Contains("checksum"),
                       ValidationError);
}

TEST_CASE("truncated payload is an error") {
  TempDir tmp;
  DualEncoderModel model = random_model(Arch::lstm, true, 94);
  const fs::path file = tmp.path / "model.drnk";
  save_model(model, file, kChecksum);
  const auto size = fs::file_size(file);
  fs::resize_file(file, size - 8);
  CHECK_THROWS_AS(load_model(file, kChecksum), IoError);
}

TEST_CASE("trailing bytes are an error") {
  TempDir tmp;
  DualEncoderModel model = random_model(Arch::lstm, true, 95);
  const fs::path file = tmp.path / "model.drnk";
  save_model(model, file, kChecksum);
  {
    std::ofstream f(file, std::ios::binary | std::ios::app);
    f.put('\0');
  }
  CHECK_THROWS_WITH_AS(load_model(file, kChecksum), doctest::Contains("trailing"),
                       ValidationError);
}

TEST_CASE("non-finite parameters refuse to save") {
  TempDir tmp;
  DualEncoderModel model = random_model(Arch::lstm, true, 96);
  model.bilinear.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(save_model(model, tmp.path / "bad.drnk", kChecksum), ValidationError);
}

TEST_CASE("fnv1a_file changes when one byte changes") {
  TempDir tmp;
  const fs::path a = tmp.path / "vocab_a.txt";
  const fs::path b = tmp.path / "vocab_b.txt";
  std::ofstream(a) << "__pad__\n__unk__\nalpha\n";
  std::ofstream(b) << "__pad__\n__unk__\nalphb\n";
  CHECK(fnv1a_file(a) != fnv1a_file(b));
  CHECK(fnv1a_file(a) == fnv1a_file(a));
  CHECK_THROWS_AS(fnv1a_file(tmp.path / "missing.txt"), IoError);
}

TEST_CASE("manifest parsing skips comments and resolves relative paths") {
  TempDir tmp;
  DualEncoderModel m1 = random_model(Arch::lstm, true, 97);
  DualEncoderModel m2 = random_model(Arch::cnn, true, 98);
  save_model(m1, tmp.path / "m1.drnk", kChecksum);
  save_model(m2, tmp.path / "m2.drnk", kChecksum);
  const fs::path manifest = tmp.path / "ensemble.txt";
  std::ofstream(manifest) << "# members\nm1.drnk\n\n  m2.drnk  # trailing comment\n";
  auto paths = read_manifest(manifest);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0].filename() == "m1.drnk");

  Ensemble ensemble = load_ensemble(manifest, kChecksum);
  CHECK(ensemble.members.size() == 2);
  CHECK(ensemble.members[0].arch == Arch::lstm);
  CHECK(ensemble.members[1].arch == Arch::cnn);
}

TEST_CASE("empty manifest is rejected") {
  TempDir tmp;
  const fs::path manifest = tmp.path / "empty.txt";
  std::ofstream(manifest) << "# nothing here\n";
  CHECK_THROWS_AS(read_manifest(manifest), ValidationError);
}

TEST_CASE("ensembles evaluate identically regardless of manifest order") {
  TempDir tmp;
  DualEncoderModel m1 = random_model(Arch::lstm, true, 99);
  DualEncoderModel m2 = random_model(Arch::cnn, true, 100);
  DualEncoderModel m3 = random_model(Arch::bilstm, true, 101);
  save_model(m1, tmp.path / "m1.drnk", kChecksum);
  save_model(m2, tmp.path / "m2.drnk", kChecksum);
  save_model(m3, tmp.path / "m3.drnk", kChecksum);
  const fs::path fwd = tmp.path / "fwd.txt";
  const fs::path rev = tmp.path / "rev.txt";
  std::ofstream(fwd) << "m1.drnk\nm2.drnk\nm3.drnk\n";
  std::ofstream(rev) << "m3.drnk\nm1.drnk\nm2.drnk\n";
  Ensemble a = load_ensemble(fwd, kChecksum);
  Ensemble b = load_ensemble(rev, kChecksum);
  Rng rng(102);
  for (int i = 0; i < 50; ++i) {
    TokenSeq ctx = synth::random_seq(rng, 12, 6, 1, 6);
    TokenSeq resp = synth::random_seq(rng, 12, 6, 1, 6);
    CHECK(ensemble_score(ctx, resp, a) == ensemble_score(ctx, resp, b));
  }
}
