#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "lfm/checkpoint.hpp"
#include "lfm/dataset.hpp"
#include "lfm/explain.hpp"
#include "lfm/influence.hpp"
#include "lfm/log.hpp"
#include "lfm/train.hpp"
#include "lfm/verify.hpp"

namespace lfm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kParse:
    case ErrorKind::kFormat: return kExitIo;
    case ErrorKind::kUnknownId: return kExitUnknownId;
    case ErrorKind::kColdStart: return kExitColdStart;
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kInternal:
    case ErrorKind::kNumeric: break;
  }
  return kExitInternal;
}

json to_json(const RunConfig& c) {
  json arch = {{"layers", c.layers}, {"activation", c.activation}};
  return json{{"command", c.command},
              {"dataset", {{"data", c.data}, {"format", c.format}, {"min_count", c.min_count}, {"metadata", c.metadata}}},
              {"model", c.model},
              {"hyperparams", lfm::to_json(c.hp)},
              {"ncf", arch},
              {"influence",
               {{"method", c.method},
                {"damping", c.cg.damping},
                {"cg_tol", c.cg.tolerance},
                {"cg_max_iter", c.cg.max_iterations},
                {"hessian_l2", c.hessian_l2}}},
              {"explain", {{"style", c.style}, {"top_k", c.top_k}, {"user", c.user}, {"item", c.item}}},
              {"verify", {{"cases", c.cases}, {"repeats", c.repeats}, {"jobs", c.jobs}, {"case_seed", c.case_seed}}},
              {"checkpoint", c.checkpoint},
              {"checkpoints", c.checkpoints},
              {"ks", c.ks},
              {"split", c.split},
              {"out", c.out}};
}

namespace {

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  std::istringstream in(text);
  in >> value;
  if (!in || !(in >> std::ws).eof()) throw Error(ErrorKind::kConfig, "bad value for " + key + ": " + text);
  return value;
}

std::vector<Index> parse_index_list(const std::string& key, const std::string& text) {
  std::vector<Index> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(parse_value<Index>(key, part));
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error(ErrorKind::kConfig, "bad value for " + key + ": " + text);
}

}  // namespace

void apply_config_file(const std::string& path, RunConfig& c) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    if (!fs::exists(path)) throw Error(ErrorKind::kIo, "cannot read config " + path);
    throw Error(ErrorKind::kConfig, e.what());
  }
  for (const auto& [section, entries] : tree) {
    for (const auto& [key, node] : entries) {
      const std::string v = node.data();
      const std::string name = section + "." + key;
      if (name == "dataset.data") c.data = v;
      else if (name == "dataset.format") c.format = v;
      else if (name == "dataset.min_count") c.min_count = parse_value<Index>(name, v);
      else if (name == "dataset.metadata") c.metadata = v;
      else if (name == "model_core.model") c.model = v;
      else if (name == "model_core.k") c.hp.dim = parse_value<Index>(name, v);
      else if (name == "model_core.lr") c.hp.learning_rate = parse_value<double>(name, v);
      else if (name == "model_core.batch") c.hp.batch_size = parse_value<Index>(name, v);
      else if (name == "model_core.l2") c.hp.l2 = parse_value<double>(name, v);
      else if (name == "model_core.epochs") c.hp.epochs = parse_value<Index>(name, v);
      else if (name == "model_core.seed") c.hp.seed = parse_value<std::uint64_t>(name, v);
      else if (name == "model_core.until_converged") c.hp.until_converged = parse_bool(name, v);
      else if (name == "ncf.layers") c.layers = parse_index_list(name, v);
      else if (name == "ncf.activation") c.activation = v;
      else if (name == "influence.method") c.method = v;
      else if (name == "influence.damping") c.cg.damping = parse_value<double>(name, v);
      else if (name == "influence.cg_tol") c.cg.tolerance = parse_value<double>(name, v);
      else if (name == "influence.cg_max_iter") c.cg.max_iterations = parse_value<int>(name, v);
      else if (name == "influence.hessian_l2") c.hessian_l2 = parse_bool(name, v);
      else if (name == "explain.style") c.style = v;
      else if (name == "explain.top_k") c.top_k = parse_value<Index>(name, v);
      else if (name == "verify.cases") c.cases = parse_value<Index>(name, v);
      else if (name == "verify.repeats") c.repeats = parse_value<Index>(name, v);
      else if (name == "verify.jobs") c.jobs = parse_value<Index>(name, v);
      else if (name == "verify.case_seed") c.case_seed = parse_value<std::uint64_t>(name, v);
      else if (name == "cli.out") c.out = v;
      else if (name == "cli.checkpoint") c.checkpoint = v;
      else if (name == "cli.split") c.split = v;
      else throw Error(ErrorKind::kConfig, "unknown config key " + name);
    }
  }
}

std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error(ErrorKind::kInternal, "sha1 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

fs::path output_dir(const RunConfig& c) {
  fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

/// A checkpoint plus the training set it was fitted on.
struct LoadedModel {
  Checkpoint checkpoint;
  std::string sha1;
  std::shared_ptr<Dataset> train;
  std::vector<IndexedRating> test;
};

LoadedModel load_model(const std::string& checkpoint_path, const std::string& split_path) {
  if (checkpoint_path.empty()) throw Error(ErrorKind::kConfig, "--checkpoint is required");
  const std::string bytes = read_file(checkpoint_path);
  LoadedModel m{deserialize_checkpoint(bytes), git_blob_sha1(bytes), nullptr, {}};
  if (!m.checkpoint.ids) throw Error(ErrorKind::kFormat, "checkpoint has no id maps");
  const fs::path manifest =
      split_path.empty() ? fs::path(checkpoint_path).parent_path() / "split.csv" : fs::path(split_path);
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::kIo, "cannot read split manifest " + manifest.string());
  const ManifestRows rows = read_split_manifest(in);
  m.train = std::make_shared<Dataset>(index_with(m.checkpoint.ids, rows.train));
  m.test = index_with(m.checkpoint.ids, rows.test).records();
  return m;
}

json provenance(const RunConfig& c, const LoadedModel& m) {
  return json{{"run_config", to_json(c)}, {"checkpoint_sha1", m.sha1}};
}

InfluenceOptions influence_options(const RunConfig& c, const Checkpoint& cp) {
  c.cg.validate();
  InfluenceOptions opts;
  opts.cg = c.cg;
  opts.l2 = cp.hp.l2;
  opts.hessian_l2 = c.hessian_l2;
  return opts;
}

InfluenceMethod influence_method(const RunConfig& c, const Checkpoint& cp) {
  if (c.method != "fia" && c.method != "ia" && c.method != "fia-exact") {
    throw Error(ErrorKind::kConfig, "unknown method " + c.method);
  }
  return {influence_options(c, cp), c.method == "ia", c.method == "fia-exact"};
}

TestCase resolve_case(const RunConfig& c, const IdMaps& ids) {
  if (c.user.empty() || c.item.empty()) throw Error(ErrorKind::kConfig, "--user and --item are required");
  auto u = ids.users.find(c.user);
  if (!u) throw Error(ErrorKind::kUnknownId, "unknown user " + c.user);
  auto i = ids.items.find(c.item);
  if (!i) throw Error(ErrorKind::kUnknownId, "unknown item " + c.item);
  return {*u, *i, std::nullopt};
}

std::vector<TestCase> sample_cases(const std::vector<IndexedRating>& test, Index count, std::uint64_t seed) {
  std::vector<Index> order(test.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(count, order.size()));
  std::vector<TestCase> cases;
  for (Index o : order) cases.push_back({test[o].user, test[o].item, test[o].rating});
  return cases;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  if (c.data.empty()) throw Error(ErrorKind::kConfig, "--data is required");
  const RatingFormat format = c.format == "csv" ? RatingFormat::kCsv
                              : c.format == "dat" ? RatingFormat::kDat
                                                  : throw Error(ErrorKind::kConfig, "unknown format " + c.format);
  const ModelKind kind = parse_model_kind(c.model);
  c.hp.validate();
  NcfArchitecture arch;
  if (kind == ModelKind::kNcf) {
    const std::vector<Index> hidden = c.layers.empty() ? std::vector<Index>{2 * c.hp.dim, c.hp.dim} : c.layers;
    arch = NcfArchitecture::tower(c.hp.dim, hidden, parse_activation(c.activation));
  }

  std::ifstream in(c.data);
  if (!in) throw Error(ErrorKind::kIo, "cannot read ratings file " + c.data);
  const auto raw = parse_ratings(in, format);
  const auto filtered = filter_min_interactions(raw, c.min_count);
  const Dataset indexed = build_index(filtered);
  const Split split = leave_one_out_split(indexed, c.hp.seed);
  spdlog::info("{} ratings, {} after filtering, {} train", raw.size(), filtered.size(), split.train.size());

  TrainResult trained = train(kind, split.train, c.hp, arch, [](const EpochReport& r) {
    spdlog::info("epoch {} rmse {:.6f}", r.epoch, r.train_rmse);
  });

  const fs::path dir = output_dir(c);
  Checkpoint cp;
  cp.hp = c.hp;
  cp.ids = split.train.shared_id_maps();
  cp.params = std::move(trained.params);
  cp.training = trained.log;
  cp.run_config = to_json(c);
  save_checkpoint(cp, dir / "model.ckpt");

  std::ostringstream manifest;
  write_split_manifest(manifest, split);
  write_file(dir / "split.csv", manifest.str());

  const json log{{"epoch_rmse", trained.log.epoch_rmse},
                 {"final_epoch", trained.log.final_epoch},
                 {"final_train_rmse", trained.log.final_rmse},
                 {"test_rmse", rmse(cp.params, split.test)},
                 {"run_config", to_json(c)},
                 {"checkpoint_sha1", git_blob_sha1(serialize_checkpoint(cp))}};
  write_file(dir / "train_log.json", log.dump(2) + "\n");

  out << "final train RMSE: " << std::setprecision(6) << trained.log.final_rmse << '\n'
      << "checkpoint: " << (dir / "model.ckpt").string() << '\n'
      << "split manifest: " << (dir / "split.csv").string() << '\n';
  return kExitOk;
}

int cmd_explain(const RunConfig& c, std::ostream& out) {
  const LoadedModel m = load_model(c.checkpoint, c.split);
  const TestCase tc = resolve_case(c, *m.checkpoint.ids);
  if (c.style != "item" && c.style != "user") throw Error(ErrorKind::kConfig, "unknown style " + c.style);
  if (c.top_k < 1) throw Error(ErrorKind::kConfig, "--top-k must be >= 1");
  const InfluenceMethod method = influence_method(c, m.checkpoint);

  MetadataMap metadata;
  if (!c.metadata.empty()) {
    std::ifstream in(c.metadata);
    if (!in) throw Error(ErrorKind::kIo, "cannot read metadata file " + c.metadata);
    metadata = load_item_metadata(in);
  }

  // Cold start is reported per requested style, before running any solver.
  const bool item_style = c.style == "item";
  if (item_style && m.train->by_user(tc.user).empty()) {
    throw Error(ErrorKind::kColdStart, "user " + c.user + " has no training history");
  }
  if (!item_style && m.train->by_item(tc.item).empty()) {
    throw Error(ErrorKind::kColdStart, "item " + c.item + " has no training history");
  }

  const InfluenceResult res =
      compute_influence(tc, *m.train, m.checkpoint.params, method.options, method.basic, method.exact);
  const Explanation expl = item_style
                               ? explain_item_based(tc, res.prediction, res.scores, *m.train, c.top_k)
                               : explain_user_based(tc, res.prediction, res.scores, *m.train, c.top_k);
  json doc = render_explanation(expl, *m.checkpoint.ids, metadata);
  doc["method"] = c.method;
  doc["solver"] = {{"iterations", res.solve.iterations},
                   {"relative_residual", res.solve.relative_residual},
                   {"converged", res.solve.converged}};
  doc["provenance"] = provenance(c, m);
  const std::string text = doc.dump(2) + "\n";
  if (c.out.empty()) {
    out << text;
  } else {
    write_file(c.out, text);
  }
  return kExitOk;
}

int cmd_verify(const RunConfig& c, std::ostream& out) {
  const LoadedModel m = load_model(c.checkpoint, c.split);
  const InfluenceMethod method = influence_method(c, m.checkpoint);
  if (c.repeats < 1) throw Error(ErrorKind::kConfig, "--repeats must be >= 1");
  const auto cases = sample_cases(m.test, c.cases, c.case_seed);
  const Checkpoint& cp = m.checkpoint;
  const TrainingRecipe recipe{cp.params.kind(), cp.hp, cp.params.architecture()};
  CorrelationReport report = correlation_study(cp.params, *m.train, cases, recipe, method, c.repeats, c.jobs);

  const fs::path dir = output_dir(c);
  json doc = lfm::to_json(report);
  doc["provenance"] = provenance(c, m);
  write_file(dir / "correlation.json", doc.dump(2) + "\n");
  std::ostringstream scatter;
  write_scatter_csv(scatter, report);
  write_file(dir / "scatter.csv", scatter.str());
  out << "pearson r: " << std::setprecision(6) << report.pearson_r << " over " << report.pairs.size()
      << " test cases\n"
      << "report: " << (dir / "correlation.json").string() << '\n'
      << "scatter: " << (dir / "scatter.csv").string() << '\n';
  return kExitOk;
}

int cmd_bench(const RunConfig& c, std::ostream& out) {
  std::vector<std::string> paths = c.checkpoints;
  if (!c.checkpoint.empty()) paths.insert(paths.begin(), c.checkpoint);
  if (paths.empty()) throw Error(ErrorKind::kConfig, "at least one --checkpoint is required");

  std::vector<LoadedModel> loaded;
  for (const auto& p : paths) loaded.push_back(load_model(p, c.split));
  std::vector<Index> dims = c.ks;
  if (dims.empty()) {
    for (const auto& m : loaded) dims.push_back(m.checkpoint.params.dim());
    std::sort(dims.begin(), dims.end());
    dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  }
  const LoadedModel& first = loaded.front();
  std::vector<BenchmarkModel> models;
  json hashes = json::array();
  for (const auto& m : loaded) {
    if (m.train->records() != first.train->records()) {
      throw Error(ErrorKind::kConfig, "benchmark checkpoints were trained on different splits");
    }
    models.push_back({m.checkpoint.params.dim(), &m.checkpoint.params});
    hashes.push_back(m.sha1);
  }
  std::vector<BenchMethod> methods;
  if (c.method == "fia") {
    methods = {BenchMethod::kFia, BenchMethod::kIa};
  } else if (c.method == "ia") {
    methods = {BenchMethod::kIa};
  } else {
    throw Error(ErrorKind::kConfig, "bench supports --method fia (FIA and IA) or ia");
  }
  const auto cases = sample_cases(first.test, c.cases, c.case_seed);
  BenchmarkReport report =
      benchmark(models, *first.train, cases, dims, methods, influence_options(c, first.checkpoint));

  const fs::path dir = output_dir(c);
  json doc = lfm::to_json(report);
  doc["provenance"] = {{"run_config", to_json(c)}, {"checkpoint_sha1", hashes}};
  write_file(dir / "bench.json", doc.dump(2) + "\n");
  std::ostringstream csv;
  write_benchmark_csv(csv, report);
  write_file(dir / "bench.csv", csv.str());
  std::ostringstream md;
  write_benchmark_markdown(md, report);
  write_file(dir / "bench.md", md.str());
  out << md.str();
  return kExitOk;
}

int cmd_distribution(const RunConfig& c, std::ostream& out) {
  const LoadedModel m = load_model(c.checkpoint, c.split);
  const TestCase tc = resolve_case(c, *m.checkpoint.ids);
  const InfluenceMethod method = influence_method(c, m.checkpoint);
  const InfluenceResult res =
      compute_influence(tc, *m.train, m.checkpoint.params, method.options, method.basic, method.exact);
  const InfluenceDistribution dist = influence_distribution(res.scores);

  const fs::path dir = output_dir(c);
  std::ostringstream hist, sorted, density;
  write_histogram_csv(hist, dist);
  write_sorted_abs_csv(sorted, dist);
  write_density_csv(density, dist);
  write_file(dir / "histogram.csv", hist.str());
  write_file(dir / "sorted_abs.csv", sorted.str());
  write_file(dir / "density.csv", density.str());
  json meta{{"user", c.user},
            {"item", c.item},
            {"records", res.scores.size()},
            {"bins", dist.histogram.size()},
            {"bandwidth", dist.bandwidth},
            {"files", {"histogram.csv", "sorted_abs.csv", "density.csv"}},
            {"provenance", provenance(c, m)}};
  write_file(dir / "distribution.json", meta.dump(2) + "\n");
  out << res.scores.size() << " interacting records; wrote " << (dir / "histogram.csv").string() << ", "
      << (dir / "sorted_abs.csv").string() << ", " << (dir / "density.csv").string() << '\n';
  return kExitOk;
}

void add_model_flags(CLI::App& app, RunConfig& c) {
  app.add_option("--data", c.data, "ratings file");
  app.add_option("--format", c.format, "dat or csv")->check(CLI::IsMember({"dat", "csv"}));
  app.add_option("--min-count", c.min_count, "k-core threshold");
  app.add_option("--model", c.model, "mf or ncf")->check(CLI::IsMember({"mf", "ncf"}));
  app.add_option("--k", c.hp.dim, "latent dimension");
  app.add_option("--lr", c.hp.learning_rate, "Adam learning rate");
  app.add_option("--batch", c.hp.batch_size, "mini-batch size");
  app.add_option("--l2", c.hp.l2, "L2 coefficient");
  app.add_option("--epochs", c.hp.epochs, "maximum epochs");
  app.add_option("--seed", c.hp.seed, "init, shuffle and split seed");
  app.add_flag("--until-converged", c.hp.until_converged, "stop early once train RMSE plateaus");
  app.add_option("--layers", c.layers, "NCF hidden widths")->delimiter(',');
  app.add_option("--activation", c.activation, "NCF hidden activation")
      ->check(CLI::IsMember({"relu", "tanh", "identity"}));
}

void add_influence_flags(CLI::App& app, RunConfig& c) {
  app.add_option("--checkpoint", c.checkpoint, "model checkpoint");
  app.add_option("--split", c.split, "split manifest (default: split.csv next to the checkpoint)");
  app.add_option("--method", c.method, "fia, ia or fia-exact")->check(CLI::IsMember({"fia", "ia", "fia-exact"}));
  app.add_option("--damping", c.cg.damping, "Hessian damping");
  app.add_option("--cg-tol", c.cg.tolerance, "CG relative residual tolerance");
  app.add_option("--cg-max-iter", c.cg.max_iterations, "CG iteration cap");
  app.add_flag("!--no-hessian-l2", c.hessian_l2, "drop the L2 term from the Hessian");
}

/// Returns the value of --config if present.
std::string find_config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].starts_with("--config=")) return args[i].substr(9);
  }
  return {};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  init_logging();
  RunConfig c;
  try {
    if (const std::string path = find_config_path(args); !path.empty()) apply_config_file(path, c);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  }

  CLI::App app{"Influence-based explanations for latent factor recommenders"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "INI file; flags override it");

  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  add_model_flags(*train_cmd, c);
  train_cmd->add_option("--out", c.out, "output directory");

  auto* explain_cmd = app.add_subcommand("explain", "explain one prediction");
  add_influence_flags(*explain_cmd, c);
  explain_cmd->add_option("--user", c.user, "external user id");
  explain_cmd->add_option("--item", c.item, "external item id");
  explain_cmd->add_option("--style", c.style, "item or user")->check(CLI::IsMember({"item", "user"}));
  explain_cmd->add_option("--top-k", c.top_k, "number of records to show");
  explain_cmd->add_option("--metadata", c.metadata, "ItemID::Title::Genres file");
  explain_cmd->add_option("--out", c.out, "output file (default stdout)");

  auto* verify_cmd = app.add_subcommand("verify", "correlate predicted and retrained influence");
  add_influence_flags(*verify_cmd, c);
  verify_cmd->add_option("--cases", c.cases, "number of test cases");
  verify_cmd->add_option("--repeats", c.repeats, "retrains per removal");
  verify_cmd->add_option("--jobs", c.jobs, "parallel retraining jobs");
  verify_cmd->add_option("--case-seed", c.case_seed, "test case sampling seed");
  verify_cmd->add_option("--out", c.out, "output directory");

  auto* bench_cmd = app.add_subcommand("bench", "time FIA against IA");
  add_influence_flags(*bench_cmd, c);
  bench_cmd->add_option("--checkpoints", c.checkpoints, "additional checkpoints")->delimiter(',');
  bench_cmd->add_option("--ks", c.ks, "latent dimensions to report")->delimiter(',');
  bench_cmd->add_option("--cases", c.cases, "number of test cases");
  bench_cmd->add_option("--case-seed", c.case_seed, "test case sampling seed");
  bench_cmd->add_option("--out", c.out, "output directory");

  auto* dist_cmd = app.add_subcommand("distribution", "export the influence distribution of one prediction");
  add_influence_flags(*dist_cmd, c);
  dist_cmd->add_option("--user", c.user, "external user id");
  dist_cmd->add_option("--item", c.item, "external item id");
  dist_cmd->add_option("--out", c.out, "output directory");

  // Already applied above; accepted after the subcommand name as well.
  for (auto* sub : {train_cmd, explain_cmd, verify_cmd, bench_cmd, dist_cmd}) {
    sub->add_option("--config", config_path, "INI file; flags override it");
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (train_cmd->parsed()) {
      c.command = "train";
      return cmd_train(c, out);
    }
    if (explain_cmd->parsed()) {
      c.command = "explain";
      return cmd_explain(c, out);
    }
    if (verify_cmd->parsed()) {
      c.command = "verify";
      return cmd_verify(c, out);
    }
    if (bench_cmd->parsed()) {
      c.command = "bench";
      return cmd_bench(c, out);
    }
    c.command = "distribution";
    return cmd_distribution(c, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace lfm::cli
