#include <doctest.h>

#include <filesystem>
#include <random>

#include "lfm/checkpoint.hpp"
#include "lfm/error.hpp"
#include "support.hpp"

using namespace lfm;

namespace {

Checkpoint sample(ModelKind kind) {
  Hyperparams hp;
  hp.dim = 3;
  hp.seed = 9;
  auto arch = NcfArchitecture::tower(3, {5, 2}, Activation::kTanh);
  Checkpoint cp;
  cp.hp = hp;
  cp.ids = support::ids(4, 6);
  cp.params = init_params(kind, 4, 6, hp, arch);
  // Arbitrary float-representable values so every bit pattern matters.
  std::mt19937_64 rng(1);
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (auto& v : cp.params.values()) v = static_cast<double>(d(rng));
  cp.training.epoch_rmse = {1.5, 1.2, 1.1};
  cp.training.final_epoch = 3;
  cp.training.final_rmse = 1.05;
  cp.run_config = {{"note", "x"}};
  return cp;
}

std::string error_of(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kFormat);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("round trip is bit-identical") {
  for (auto kind : {ModelKind::kMf, ModelKind::kNcf}) {
    const Checkpoint cp = sample(kind);
    const std::string bytes = serialize_checkpoint(cp);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back.params == cp.params);
    CHECK(back.params.architecture() == cp.params.architecture());
    CHECK(back.hp == cp.hp);
    CHECK(back.ids->users.externals() == cp.ids->users.externals());
    CHECK(back.ids->items.externals() == cp.ids->items.externals());
    CHECK(back.training.epoch_rmse == cp.training.epoch_rmse);
    CHECK(back.training.final_rmse == cp.training.final_rmse);
    CHECK(back.run_config == cp.run_config);
    CHECK(serialize_checkpoint(back) == bytes);
  }
}

TEST_CASE("header layout") {
  const std::string bytes = serialize_checkpoint(sample(ModelKind::kMf));
  CHECK(bytes.substr(0, 4) == "LFMI");
  CHECK(static_cast<unsigned char>(bytes[4]) == kCheckpointVersion);
}

TEST_CASE("corrupt trailing bytes fail the checksum") {
  std::string bytes = serialize_checkpoint(sample(ModelKind::kMf));
  bytes[bytes.size() - 6] ^= 0x5a;
  CHECK(error_of(bytes).find("checksum") != std::string::npos);
}

TEST_CASE("bumped version is rejected explicitly") {
  std::string bytes = serialize_checkpoint(sample(ModelKind::kMf));
  bytes[4] = static_cast<char>(kCheckpointVersion + 1);
  CHECK(error_of(bytes).find("unsupported checkpoint version 2") != std::string::npos);
}

TEST_CASE("truncated and foreign files are rejected") {
  const std::string bytes = serialize_checkpoint(sample(ModelKind::kNcf));
  CHECK(error_of(bytes.substr(0, 6)).find("truncated") != std::string::npos);
  CHECK(!error_of(bytes.substr(0, bytes.size() / 2)).empty());
  CHECK(error_of("XXXX" + bytes.substr(4)).find("magic") != std::string::npos);
}

TEST_CASE("save and load through a file") {
  const auto path = std::filesystem::temp_directory_path() / "lfm_ckpt_test.ckpt";
  const Checkpoint cp = sample(ModelKind::kNcf);
  save_checkpoint(cp, path);
  CHECK(load_checkpoint(path).params == cp.params);
  std::filesystem::remove(path);
  try {
    load_checkpoint(path);
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIo);
  }
}
