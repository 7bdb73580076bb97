#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "lfm/checkpoint.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "lfm-influence");
  std::ostringstream out, err;
  const int code = lfm::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return std::string(LFM_FIXTURE_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lfm_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::vector<std::string> train_args(const fs::path& out, int k = 2) {
  return {"train",  "--data",   fixture("tiny.csv"), "--format", "csv",         "--min-count", "1",
          "--k",    std::to_string(k), "--lr", "0.05",  "--epochs", "400",       "--batch",     "100",
          "--l2",   "0.01",     "--seed", "4",       "--out",    out.string()};
}

fs::path trained(const std::string& name, int k = 2) {
  const fs::path dir = scratch(name);
  const Run r = run(train_args(dir, k));
  REQUIRE(r.code == 0);
  return dir;
}

// A user and item pair from the held-out rows of a split manifest.
std::pair<std::string, std::string> first_test_pair(const fs::path& dir) {
  for (const auto& row : csv_rows(dir / "split.csv")) {
    if (row.size() == 4 && row[3] == "test") return {row[0], row[1]};
  }
  FAIL("no test rows");
  return {};
}

}  // namespace

TEST_CASE("git blob hash matches git hash-object") {
  CHECK(lfm::cli::git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(lfm::cli::git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("exit codes for bad invocations") {
  CHECK(run({}).code == lfm::cli::kExitConfig);
  CHECK(run({"frobnicate"}).code == lfm::cli::kExitConfig);
  CHECK(run({"train", "--k", "abc"}).code == lfm::cli::kExitConfig);
  CHECK(run({"--help"}).code == lfm::cli::kExitOk);

  const auto missing = run({"train", "--data", "/nonexistent/ratings.dat"});
  CHECK(missing.code == lfm::cli::kExitIo);
  CHECK(missing.err.find("/nonexistent/ratings.dat") != std::string::npos);

  CHECK(run({"explain", "--checkpoint", "/nonexistent/model.ckpt", "--user", "a", "--item", "b"}).code ==
        lfm::cli::kExitIo);
}

TEST_CASE("train writes a checkpoint, manifest and log") {
  const fs::path dir = scratch("train");
  const Run r = run(train_args(dir));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("final train RMSE:") != std::string::npos);
  CHECK(r.out.find("split manifest:") != std::string::npos);
  CHECK(fs::exists(dir / "model.ckpt"));
  const auto rows = csv_rows(dir / "split.csv");
  CHECK(rows.front() == std::vector<std::string>{"user", "item", "rating", "role"});
  std::map<std::string, int> tests_per_user;
  for (const auto& row : rows) {
    if (row[3] == "test") ++tests_per_user[row[0]];
  }
  CHECK(tests_per_user.size() == 8);
  for (const auto& [u, n] : tests_per_user) CHECK(n == 1);

  const json log = json::parse(slurp(dir / "train_log.json"));
  CHECK(log["epoch_rmse"].size() == 400);
  CHECK(log["checkpoint_sha1"] == lfm::cli::git_blob_sha1(slurp(dir / "model.ckpt")));
  CHECK(log["run_config"]["hyperparams"]["k"] == 2);
}

TEST_CASE("training twice gives identical bytes") {
  const fs::path dir = scratch("determinism");
  REQUIRE(run(train_args(dir)).code == 0);
  const std::string first = slurp(dir / "model.ckpt");
  const std::string first_split = slurp(dir / "split.csv");
  REQUIRE(run(train_args(dir)).code == 0);
  CHECK(slurp(dir / "model.ckpt") == first);
  CHECK(slurp(dir / "split.csv") == first_split);
}

TEST_CASE("config file values and flag precedence") {
  const fs::path dir = scratch("config");
  const fs::path ini = dir / "run.ini";
  std::ofstream(ini) << "[dataset]\ndata = " << fixture("tiny.csv")
                     << "\nformat = csv\nmin_count = 1\n\n[model_core]\nk = 3\nepochs = 5\nseed = 4\n";
  REQUIRE(run({"train", "--config", ini.string(), "--out", (dir / "a").string()}).code == 0);
  CHECK(lfm::load_checkpoint(dir / "a" / "model.ckpt").hp.dim == 3);
  REQUIRE(run({"--config", ini.string(), "train", "--k", "2", "--out", (dir / "b").string()}).code == 0);
  const auto cp = lfm::load_checkpoint(dir / "b" / "model.ckpt");
  CHECK(cp.hp.dim == 2);
  CHECK(cp.hp.epochs == 5);
  CHECK(cp.run_config["hyperparams"]["k"] == 2);

  std::ofstream(dir / "bad.ini") << "[model_core]\nwidth = 3\n";
  const Run bad = run({"train", "--config", (dir / "bad.ini").string()});
  CHECK(bad.code == lfm::cli::kExitConfig);
  CHECK(bad.err.find("model_core.width") != std::string::npos);
  CHECK(run({"train", "--config", (dir / "absent.ini").string()}).code == lfm::cli::kExitIo);
}

TEST_CASE("explain: contract, styles, metadata, errors") {
  const fs::path dir = trained("explain");
  const std::string ckpt = (dir / "model.ckpt").string();
  const auto [user, item] = first_test_pair(dir);

  const Run r = run({"explain", "--checkpoint", ckpt, "--user", user, "--item", item, "--top-k", "3", "--metadata",
                     fixture("tiny_movies.dat")});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["user"] == user);
  CHECK(doc["target"]["item"] == item);
  CHECK(doc["target"].contains("title"));
  REQUIRE(doc["entries"].size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(doc["entries"][e]["user"] == user);
    CHECK(doc["entries"][e]["rank"] == e + 1);
    if (e > 0) {
      CHECK(std::abs(doc["entries"][e - 1]["delta_g"].get<double>()) >=
            std::abs(doc["entries"][e]["delta_g"].get<double>()));
    }
  }
  CHECK(doc["narrative"].get<std::string>().find("following 3 items") != std::string::npos);
  CHECK(doc["provenance"]["checkpoint_sha1"] == lfm::cli::git_blob_sha1(slurp(ckpt)));
  CHECK(doc["provenance"]["run_config"]["explain"]["top_k"] == 3);

  const Run u = run({"explain", "--checkpoint", ckpt, "--user", user, "--item", item, "--style", "user"});
  REQUIRE(u.code == 0);
  for (const auto& e : json::parse(u.out)["entries"]) CHECK(e["item"] == item);

  const fs::path out_file = dir / "expl.json";
  REQUIRE(run({"explain", "--checkpoint", ckpt, "--user", user, "--item", item, "--out", out_file.string()}).code ==
          0);
  CHECK(json::parse(slurp(out_file))["entries"].size() <= 6);

  CHECK(run({"explain", "--checkpoint", ckpt, "--user", "nobody", "--item", item}).code ==
        lfm::cli::kExitUnknownId);
  CHECK(run({"explain", "--checkpoint", ckpt, "--user", user, "--item", "m99"}).code == lfm::cli::kExitUnknownId);
}

TEST_CASE("explain: an item without training history is a cold start") {
  const fs::path dir = trained("cold");
  // Move every training row of one item into the test role.
  const std::string target = "m8";
  std::ostringstream edited;
  for (const auto& row : csv_rows(dir / "split.csv")) {
    const bool move = row.size() == 4 && row[1] == target && row[3] == "train";
    edited << row[0] << ',' << row[1] << ',' << row[2] << ',' << (move ? "test" : row[3]) << '\n';
  }
  std::ofstream(dir / "cold_split.csv") << edited.str();
  const std::vector<std::string> base{"explain", "--checkpoint", (dir / "model.ckpt").string(), "--split",
                                      (dir / "cold_split.csv").string(), "--user", "u1", "--item", target};
  auto args = base;
  args.insert(args.end(), {"--style", "user"});
  const Run r = run(args);
  CHECK(r.code == lfm::cli::kExitColdStart);
  CHECK(r.err.find("no training history") != std::string::npos);
  // The user side still has history.
  CHECK(run(base).code == 0);
}

TEST_CASE("explain --method ia matches a dense inverse on the bundled fixture") {
  const fs::path dir = trained("ia_oracle");
  const std::string ckpt = (dir / "model.ckpt").string();
  const auto [user, item] = first_test_pair(dir);
  const Run r = run({"explain", "--checkpoint", ckpt, "--user", user, "--item", item, "--method", "ia", "--damping",
                     "0.01", "--cg-tol", "1e-12", "--cg-max-iter", "500", "--top-k", "100"});
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);

  // Oracle: dense Hessian from the checkpoint values and the manifest.
  const auto cp = lfm::load_checkpoint(ckpt);
  const auto& ids = *cp.ids;
  oracle::MfShape s{ids.users.size(), ids.items.size(), cp.params.dim()};
  std::vector<oracle::Rating> data;
  for (const auto& row : csv_rows(dir / "split.csv")) {
    if (row.size() == 4 && row[3] == "train") data.push_back({*ids.users.find(row[0]), *ids.items.find(row[1]),
                                                              std::stod(row[2])});
  }
  const oracle::Vec th = cp.params.values();
  oracle::Mat h = oracle::mf_dense_hessian(th, s, data, cp.hp.l2);
  h.diagonal().array() += 0.01;
  const std::size_t tu = *ids.users.find(user), ti = *ids.items.find(item);
  oracle::Vec grad_g = oracle::Vec::Zero(th.size());
  for (std::size_t a = 0; a < s.k; ++a) {
    grad_g(static_cast<Eigen::Index>(s.p(tu) + a)) = th(static_cast<Eigen::Index>(s.q(ti) + a));
    grad_g(static_cast<Eigen::Index>(s.q(ti) + a)) = th(static_cast<Eigen::Index>(s.p(tu) + a));
  }
  const oracle::Vec sol = h.ldlt().solve(grad_g);
  std::vector<std::pair<double, std::string>> want;
  for (const auto& z : data) {
    if (z.u != tu) continue;
    const double dg = sol.dot(oracle::mf_example_grad(th, s, z, cp.hp.l2)) / static_cast<double>(data.size());
    want.emplace_back(dg, ids.items.external(z.i));
  }
  std::sort(want.begin(), want.end(), [](auto& a, auto& b) { return std::abs(a.first) > std::abs(b.first); });

  REQUIRE(doc["entries"].size() == want.size());
  for (std::size_t e = 0; e < want.size(); ++e) {
    CHECK(doc["entries"][e]["item"] == want[e].second);
    CHECK(oracle::rel_err(doc["entries"][e]["delta_g"].get<double>(), want[e].first, 1e-9) <= 1e-6);
  }
}

TEST_CASE("verify: minimal run, provenance, determinism") {
  const fs::path dir = trained("verify");
  const std::vector<std::string> args{"verify", "--checkpoint", (dir / "model.ckpt").string(), "--cases", "2",
                                      "--repeats", "1", "--out", (dir / "v").string()};
  REQUIRE(run(args).code == 0);
  CHECK(fs::exists(dir / "v" / "scatter.csv"));
  const json a = json::parse(slurp(dir / "v" / "correlation.json"));
  CHECK(a["pairs"].size() == 2);
  CHECK(a["provenance"]["run_config"]["verify"]["cases"] == 2);
  CHECK(a["provenance"]["checkpoint_sha1"] == lfm::cli::git_blob_sha1(slurp(dir / "model.ckpt")));
  CHECK(csv_rows(dir / "v" / "scatter.csv").front() == std::vector<std::string>{"predicted", "actual"});
  REQUIRE(run(args).code == 0);
  const json b = json::parse(slurp(dir / "v" / "correlation.json"));
  CHECK(a["pearson_r"] == b["pearson_r"]);
}

TEST_CASE("bench: rows, speedup column, missing K") {
  const fs::path d2 = trained("bench2", 2);
  const fs::path d3 = trained("bench3", 3);
  const fs::path out = scratch("bench_out");
  const Run r = run({"bench", "--checkpoint", (d2 / "model.ckpt").string(), "--checkpoints",
                     (d3 / "model.ckpt").string(), "--ks", "2,3", "--cases", "3", "--damping", "0.01", "--out",
                     out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("| Speedup MF |") != std::string::npos);
  const auto rows = csv_rows(out / "bench.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"k", "method", "mean_seconds", "test_cases", "speedup"});
  std::map<std::pair<std::string, std::string>, double> secs;
  for (std::size_t i = 1; i < rows.size(); ++i) secs[{rows[i][0], rows[i][1]}] = std::stod(rows[i][2]);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double speedup = std::stod(rows[i][4]);
    CHECK(speedup == doctest::Approx(secs[{rows[i][0], "IA-MF"}] / secs[{rows[i][0], "FIA-MF"}]).epsilon(1e-12));
  }
  const json doc = json::parse(slurp(out / "bench.json"));
  CHECK(doc["provenance"]["checkpoint_sha1"].size() == 2);

  const Run missing = run({"bench", "--checkpoint", (d2 / "model.ckpt").string(), "--ks", "2,8", "--out",
                           out.string()});
  CHECK(missing.code == lfm::cli::kExitConfig);
  CHECK(missing.err.find("K = 8") != std::string::npos);
}

TEST_CASE("distribution: headers, ordering, conservation") {
  const fs::path dir = trained("dist");
  const auto [user, item] = first_test_pair(dir);
  const fs::path out = dir / "d";
  REQUIRE(run({"distribution", "--checkpoint", (dir / "model.ckpt").string(), "--user", user, "--item", item,
               "--out", out.string()})
              .code == 0);
  const auto hist = csv_rows(out / "histogram.csv");
  const auto sorted = csv_rows(out / "sorted_abs.csv");
  CHECK(hist.front() == std::vector<std::string>{"bin_center", "count"});
  CHECK(sorted.front() == std::vector<std::string>{"rank", "abs_influence"});
  for (std::size_t i = 2; i < sorted.size(); ++i) CHECK(std::stod(sorted[i - 1][1]) >= std::stod(sorted[i][1]));

  // |R_t| from the manifest.
  std::size_t rt = 0;
  for (const auto& row : csv_rows(dir / "split.csv")) {
    if (row.size() == 4 && row[3] == "train" && (row[0] == user || row[1] == item)) ++rt;
  }
  std::size_t total = 0;
  for (std::size_t i = 1; i < hist.size(); ++i) total += std::stoul(hist[i][1]);
  CHECK(total == rt);
  CHECK(sorted.size() - 1 == rt);
  const json meta = json::parse(slurp(out / "distribution.json"));
  CHECK(meta["records"] == rt);
  CHECK(meta["provenance"]["run_config"]["command"] == "distribution");
}
