#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "randprompt/embedding_store.hpp"
#include "randprompt/errors.hpp"
#include "randprompt/mlp.hpp"

namespace randprompt {

// Model checkpoint layout (all little-endian):
//
//   offset  size  field
//   0       4     magic "RPM1" (52 50 4D 31)
//   4       4     header length H, u32
//   8       H     UTF-8 JSON header
//   8+H     ...   float64 tensors, concatenated in header["tensors"] order
//
// The header records architecture, training config, step count and, for
// every tensor, its name and shape. Tensor order: the trainable tensors in
// visit_tensors order, then bn<l>.running_mean and bn<l>.running_var for each
// hidden layer.

inline constexpr std::array<unsigned char, 4> kModelMagic = {0x52, 0x50, 0x4D, 0x31};

inline nlohmann::json to_json(const MlpArchitecture& a) {
  return {{"input_dim", a.input_dim},
          {"hidden_dims", a.hidden_dims},
          {"dropout_rate", a.dropout_rate},
          {"bn_epsilon", a.bn_epsilon},
          {"bn_momentum", a.bn_momentum}};
}

inline MlpArchitecture architecture_from_json(const nlohmann::json& j) {
  MlpArchitecture a;
  a.input_dim = j.at("input_dim").get<std::size_t>();
  a.hidden_dims = j.at("hidden_dims").get<std::array<std::size_t, kHiddenLayers>>();
  a.dropout_rate = j.at("dropout_rate").get<double>();
  a.bn_epsilon = j.at("bn_epsilon").get<double>();
  a.bn_momentum = j.at("bn_momentum").get<double>();
  a.validate();
  return a;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"lr_decay_factor", c.lr_decay_factor},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"seed", c.seed},
          {"normalize_inputs", c.normalize_inputs}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.lr_decay_factor = j.at("lr_decay_factor").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.normalize_inputs = j.at("normalize_inputs").get<bool>();
  return c;
}

struct Checkpoint {
  MlpParams params;
  TrainConfig config;
  std::vector<double> epoch_losses;
};

namespace detail {

template <typename Fn>
void visit_checkpoint_tensors(MlpParams& p, Fn&& fn) {
  visit_tensors([&](const std::string& name, bool, std::span<double> t) { fn(name, t); }, p.trainable);
  for (std::size_t l = 0; l < kHiddenLayers; ++l) {
    fn("bn" + std::to_string(l) + ".running_mean", std::span(p.running_mean[l]));
    fn("bn" + std::to_string(l) + ".running_var", std::span(p.running_var[l]));
  }
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ck) {
  MlpParams params = ck.params;
  nlohmann::json header;
  header["format"] = "randprompt-model";
  header["version"] = 1;
  header["architecture"] = to_json(params.arch);
  header["train_config"] = to_json(ck.config);
  header["steps"] = params.steps;
  header["epoch_losses"] = ck.epoch_losses;
  header["tensors"] = nlohmann::json::array();
  std::vector<unsigned char> payload;
  detail::visit_checkpoint_tensors(params, [&](const std::string& name, std::span<double> t) {
    header["tensors"].push_back({{"name", name}, {"count", t.size()}});
    for (double v : t) detail::put_le<double>(payload, v);
  });
  const std::string text = header.dump();
  std::vector<unsigned char> out(kModelMagic.begin(), kModelMagic.end());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline Checkpoint decode_checkpoint(std::span<const unsigned char> bytes, const std::string& source = "<buffer>") {
  if (bytes.size() < 8 || !std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin())) {
    throw FormatError(source + ": not a model checkpoint (bad magic)");
  }
  const auto header_len = detail::get_le<std::uint32_t>(bytes.data() + 4);
  if (bytes.size() < 8 + static_cast<std::size_t>(header_len)) throw CorruptionError(source + ": truncated header");
  nlohmann::json header;
  Checkpoint ck;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
    if (header.at("format") != "randprompt-model" || header.at("version") != 1) {
      throw FormatError(source + ": unsupported checkpoint format/version");
    }
    ck.config = train_config_from_json(header.at("train_config"));
    ck.epoch_losses = header.at("epoch_losses").get<std::vector<double>>();
    ck.params = MlpParams::initialize(architecture_from_json(header.at("architecture")), 0);
    ck.params.steps = header.at("steps").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(source + ": bad checkpoint header: " + ex.what());
  }
  const auto& tensors = header.at("tensors");
  std::size_t index = 0;
  std::size_t offset = 8 + header_len;
  detail::visit_checkpoint_tensors(ck.params, [&](const std::string& name, std::span<double> t) {
    if (index >= tensors.size() || tensors[index].at("name") != name ||
        tensors[index].at("count").get<std::size_t>() != t.size()) {
      throw FormatError(source + ": tensor table does not match architecture at " + name);
    }
    if (bytes.size() < offset + 8 * t.size()) throw CorruptionError(source + ": truncated tensor " + name);
    for (auto& v : t) {
      v = detail::get_le<double>(bytes.data() + offset);
      if (!std::isfinite(v)) throw DataError(source + ": non-finite value in " + name);
      offset += 8;
    }
    ++index;
  });
  if (index != tensors.size()) throw FormatError(source + ": extra tensors in table");
  if (offset != bytes.size()) throw FormatError(source + ": trailing bytes after tensors");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  detail::write_all(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_all(path), path.string());
}

}  // namespace randprompt
