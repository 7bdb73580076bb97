#include "lfm/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "lfm/error.hpp"

namespace lfm {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "LFMI";

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorKind::kFormat, "checkpoint is truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::pair<Index, Index>> tensor_ranges(const ModelParams& p) {
  std::vector<std::pair<Index, Index>> out;
  out.emplace_back(0, p.num_users() * p.dim());
  out.emplace_back(p.item_offset(0), p.num_items() * p.dim());
  const auto& arch = p.architecture();
  for (Index l = 0; l < arch.num_layers(); ++l) {
    out.emplace_back(p.weight_offset(l), arch.widths[l] * arch.widths[l + 1]);
    out.emplace_back(p.bias_offset(l), arch.widths[l + 1]);
  }
  return out;
}

}  // namespace

json to_json(const Hyperparams& hp) {
  return json{{"k", hp.dim},
              {"learning_rate", hp.learning_rate},
              {"batch_size", hp.batch_size},
              {"l2", hp.l2},
              {"epochs", hp.epochs},
              {"seed", hp.seed},
              {"adam_beta1", hp.adam_beta1},
              {"adam_beta2", hp.adam_beta2},
              {"adam_eps", hp.adam_eps},
              {"until_converged", hp.until_converged}};
}

Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  hp.dim = j.at("k").get<Index>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.batch_size = j.at("batch_size").get<Index>();
  hp.l2 = j.at("l2").get<double>();
  hp.epochs = j.at("epochs").get<Index>();
  hp.seed = j.at("seed").get<std::uint64_t>();
  hp.adam_beta1 = j.at("adam_beta1").get<double>();
  hp.adam_beta2 = j.at("adam_beta2").get<double>();
  hp.adam_eps = j.at("adam_eps").get<double>();
  hp.until_converged = j.value("until_converged", false);
  return hp;
}

json to_json(const NcfArchitecture& arch) {
  json acts = json::array();
  for (auto a : arch.hidden_activations) acts.push_back(to_string(a));
  return json{{"widths", arch.widths}, {"activations", acts}};
}

NcfArchitecture architecture_from_json(const json& j) {
  NcfArchitecture arch;
  arch.widths = j.at("widths").get<std::vector<Index>>();
  for (const auto& a : j.at("activations")) arch.hidden_activations.push_back(parse_activation(a.get<std::string>()));
  return arch;
}

std::string serialize_checkpoint(const Checkpoint& cp) {
  const ModelParams& p = cp.params;
  json meta;
  meta["hyperparams"] = to_json(cp.hp);
  meta["model"] = {{"kind", to_string(p.kind())}, {"users", p.num_users()}, {"items", p.num_items()}, {"k", p.dim()}};
  if (p.kind() == ModelKind::kNcf) meta["model"]["architecture"] = to_json(p.architecture());
  if (cp.ids) meta["id_maps"] = {{"users", cp.ids->users.externals()}, {"items", cp.ids->items.externals()}};
  meta["training"] = {{"final_epoch", cp.training.final_epoch},
                      {"train_rmse", cp.training.final_rmse},
                      {"epoch_rmse", cp.training.epoch_rmse}};
  meta["run_config"] = cp.run_config;
  const std::string meta_bytes = meta.dump();

  std::string out;
  out.append(kMagic);
  put_le<std::uint32_t>(out, cp.format_version);
  put_le<std::uint64_t>(out, meta_bytes.size());
  out.append(meta_bytes);
  const auto tensors = tensor_ranges(p);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (auto [offset, count] : tensors) {
    put_le<std::uint64_t>(out, count);
    for (Index c = 0; c < count; ++c) {
      const float f = static_cast<float>(p.values()(static_cast<Eigen::Index>(offset + c)));
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  put_le<std::uint32_t>(out, crc32_of(out));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(kMagic.size()) != kMagic) throw Error(ErrorKind::kFormat, "not a checkpoint (bad magic)");
  Checkpoint cp;
  cp.format_version = in.get_le<std::uint32_t>();
  if (cp.format_version != kCheckpointVersion) {
    throw Error(ErrorKind::kFormat, "unsupported checkpoint version " + std::to_string(cp.format_version));
  }
  if (bytes.size() < kMagic.size() + 8) throw Error(ErrorKind::kFormat, "checkpoint is truncated");
  const auto body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  if (crc32_of(body) != tail.get_le<std::uint32_t>()) throw Error(ErrorKind::kFormat, "checkpoint checksum mismatch");

  const auto meta_len = in.get_le<std::uint64_t>();
  json meta;
  try {
    meta = json::parse(in.take(meta_len));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad checkpoint metadata: ") + e.what());
  }

  try {
    cp.hp = hyperparams_from_json(meta.at("hyperparams"));
    const auto& m = meta.at("model");
    const ModelKind kind = parse_model_kind(m.at("kind").get<std::string>());
    const auto users = m.at("users").get<Index>();
    const auto items = m.at("items").get<Index>();
    const auto k = m.at("k").get<Index>();
    cp.params = kind == ModelKind::kMf ? ModelParams::mf(users, items, k)
                                       : ModelParams::ncf(users, items, k, architecture_from_json(m.at("architecture")));
    if (meta.contains("id_maps")) {
      auto ids = std::make_shared<IdMaps>();
      for (const auto& u : meta["id_maps"].at("users")) ids->users.intern(u.get<std::string>());
      for (const auto& i : meta["id_maps"].at("items")) ids->items.intern(i.get<std::string>());
      cp.ids = std::move(ids);
    }
    const auto& t = meta.at("training");
    cp.training.final_epoch = t.at("final_epoch").get<Index>();
    cp.training.final_rmse = t.at("train_rmse").get<double>();
    cp.training.epoch_rmse = t.at("epoch_rmse").get<std::vector<double>>();
    cp.run_config = meta.value("run_config", json::object());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad checkpoint metadata: ") + e.what());
  }

  const auto tensors = tensor_ranges(cp.params);
  if (in.get_le<std::uint32_t>() != tensors.size()) throw Error(ErrorKind::kFormat, "unexpected tensor count");
  for (auto [offset, count] : tensors) {
    if (in.get_le<std::uint64_t>() != count) throw Error(ErrorKind::kFormat, "tensor size does not match metadata");
    for (Index c = 0; c < count; ++c) {
      cp.params.values()(static_cast<Eigen::Index>(offset + c)) =
          static_cast<double>(std::bit_cast<float>(in.get_le<std::uint32_t>()));
    }
  }
  if (in.remaining() != 4) throw Error(ErrorKind::kFormat, "trailing bytes after tensors");
  return cp;
}

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(cp);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace lfm
