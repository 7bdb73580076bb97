#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lfm/cg.hpp"
#include "lfm/error.hpp"
#include "lfm/params.hpp"

namespace lfm::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitIo = 2,
  kExitUnknownId = 3,
  kExitColdStart = 4,
  kExitConfig = 5,
};

int exit_code_for(ErrorKind kind);

/// Everything a command can be configured with. Values come from defaults,
/// then an optional INI file (--config), then flags.
struct RunConfig {
  std::string command;

  std::string data;
  std::string format = "dat";
  Index min_count = 10;
  std::string metadata;

  std::string model = "mf";
  Hyperparams hp;
  std::vector<Index> layers;  // empty: [2K, K]
  std::string activation = "relu";

  CgConfig cg;
  std::string method = "fia";  // fia | ia | fia-exact
  bool hessian_l2 = true;

  std::string style = "item";
  Index top_k = 6;
  std::string user;
  std::string item;

  Index cases = 30;
  Index repeats = 3;
  Index jobs = 1;
  std::uint64_t case_seed = 1;

  std::string checkpoint;
  std::vector<std::string> checkpoints;
  std::vector<Index> ks;
  std::string split;  // empty: split.csv next to the checkpoint

  std::string out;
};

nlohmann::json to_json(const RunConfig& cfg);

/// Applies an INI file over `cfg`. Sections: dataset, model_core, ncf,
/// influence, explain, verify, cli.
void apply_config_file(const std::string& path, RunConfig& cfg);

/// SHA-1 of "blob <size>\0" + bytes, as git computes object ids.
std::string git_blob_sha1(std::string_view bytes);

/// Full command line entry point. Never throws; returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lfm::cli
