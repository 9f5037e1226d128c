#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pegnn/data.hpp"
#include "pegnn/model.hpp"

namespace pegnn {

namespace detail {

inline constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
    i += 3;
  }
  const std::size_t rem = bytes.size() - i;
  if (rem == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rem == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  check(text.size() % 4 == 0, "base64 payload length must be a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        vals[j] = 0;
        ++pad;
      } else {
        vals[j] = value_of(c);
        check(vals[j] >= 0 && pad == 0, "invalid base64 payload");
      }
    }
    const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    out.push_back((v >> 16) & 0xFF);
    if (pad < 2) out.push_back((v >> 8) & 0xFF);
    if (pad < 1) out.push_back(v & 0xFF);
  }
  return out;
}

// f64 values as little-endian bytes, independent of host endianness.
inline std::string encode_f64(const std::vector<double>& values) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes.push_back((u >> (8 * b)) & 0xFF);
  }
  return base64_encode(bytes);
}

inline std::vector<double> decode_f64(const std::string& text) {
  const std::vector<std::uint8_t> bytes = base64_decode(text);
  check(bytes.size() % 8 == 0, "f64 payload must be a multiple of 8 bytes");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b)
      u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    out[i] = std::bit_cast<double>(u);
  }
  return out;
}

}  // namespace detail

inline constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{
      {"backbone", cfg.backbone == Backbone::kGcn ? "gcn" : "sage"},
      {"use_pe", cfg.use_pe},
      {"feature_dim", cfg.feature_dim},
      {"emb_dim", cfg.emb_dim},
      {"hidden_dim", cfg.hidden_dim},
      {"dropout", cfg.dropout_p},
      {"sigma_min", cfg.st.sigma_min},
      {"sigma_max", cfg.st.sigma_max},
      {"num_scales", cfg.st.num_scales},
      {"edge_weighting",
       cfg.edge_weighting == EdgeWeighting::kBinary ? "binary" : "inverse_distance"},
      {"loss_mode", cfg.loss_mode == LossWeightMode::kFixed ? "fixed" : "learned"},
      {"lambda", cfg.lambda},
  };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  const std::string backbone = j.at("backbone").get<std::string>();
  check(backbone == "gcn" || backbone == "sage", "unknown backbone: " + backbone);
  cfg.backbone = backbone == "gcn" ? Backbone::kGcn : Backbone::kSage;
  cfg.use_pe = j.at("use_pe").get<bool>();
  cfg.feature_dim = j.at("feature_dim").get<std::size_t>();
  cfg.emb_dim = j.at("emb_dim").get<std::size_t>();
  cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  cfg.dropout_p = j.at("dropout").get<double>();
  cfg.st.sigma_min = j.at("sigma_min").get<double>();
  cfg.st.sigma_max = j.at("sigma_max").get<double>();
  cfg.st.num_scales = j.at("num_scales").get<std::size_t>();
  const std::string weighting = j.at("edge_weighting").get<std::string>();
  check(weighting == "binary" || weighting == "inverse_distance",
        "unknown edge_weighting: " + weighting);
  cfg.edge_weighting = weighting == "binary" ? EdgeWeighting::kBinary
                                             : EdgeWeighting::kInverseDistance;
  const std::string mode = j.at("loss_mode").get<std::string>();
  check(mode == "fixed" || mode == "learned", "unknown loss_mode: " + mode);
  cfg.loss_mode = mode == "fixed" ? LossWeightMode::kFixed : LossWeightMode::kLearned;
  cfg.lambda = j.at("lambda").get<double>();
  cfg.validate();
  return cfg;
}

inline nlohmann::json normalizers_to_json(const Normalizers& n) {
  auto mm = [](const MinMax& m) { return nlohmann::json{{"lo", m.lo}, {"hi", m.hi}}; };
  nlohmann::json features = nlohmann::json::array();
  for (const MinMax& f : n.features) features.push_back(mm(f));
  return nlohmann::json{{"lon", mm(n.lon)},
                        {"lat", mm(n.lat)},
                        {"target", mm(n.target)},
                        {"features", features}};
}

inline Normalizers normalizers_from_json(const nlohmann::json& j) {
  auto mm = [](const nlohmann::json& m) {
    return MinMax{m.at("lo").get<double>(), m.at("hi").get<double>()};
  };
  Normalizers n;
  n.lon = mm(j.at("lon"));
  n.lat = mm(j.at("lat"));
  n.target = mm(j.at("target"));
  for (const nlohmann::json& f : j.at("features")) n.features.push_back(mm(f));
  return n;
}

// Self-describing checkpoint: {format_version, config, parameters}. The
// caller may fold extra pipeline state (normalizers, schema, k) into the
// config object; everything needed to rebuild the model itself is written by
// this function.
inline nlohmann::json checkpoint_to_json(const PeGnnModel& model,
                                         const nlohmann::json& extra_config = {}) {
  nlohmann::json config = model_config_to_json(model.config());
  if (extra_config.is_object())
    for (auto it = extra_config.begin(); it != extra_config.end(); ++it)
      config[it.key()] = it.value();

  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, tensor] : model.named_parameters())
    params[name] = nlohmann::json{{"shape", tensor.shape()},
                                  {"data", detail::encode_f64(tensor.values())}};

  return nlohmann::json{{"format_version", kCheckpointFormatVersion},
                        {"config", config},
                        {"parameters", params}};
}

struct LoadedCheckpoint {
  PeGnnModel model;
  nlohmann::json config;  // the full config object, extras included
};

inline LoadedCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  check(j.at("format_version").get<int>() == kCheckpointFormatVersion,
        "unsupported checkpoint format_version");
  LoadedCheckpoint out;
  out.config = j.at("config");
  const ModelConfig cfg = model_config_from_json(out.config);

  // Build with an arbitrary seed, then overwrite every parameter from the
  // payload, validating shapes against the config-derived architecture.
  std::mt19937_64 rng(0);
  out.model = PeGnnModel(cfg, rng);

  const nlohmann::json& params = j.at("parameters");
  for (auto& [name, tensor] : out.model.named_parameters()) {
    check(params.contains(name), "checkpoint is missing parameter '" + name + "'");
    const nlohmann::json& entry = params.at(name);
    const std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
    check(shape == tensor.shape(),
          "checkpoint parameter '" + name + "' has shape " + detail::shape_str(shape) +
              ", expected " + detail::shape_str(tensor.shape()));
    std::vector<double> values = detail::decode_f64(entry.at("data").get<std::string>());
    check(values.size() == tensor.size(),
          "checkpoint parameter '" + name + "' has wrong payload size");
    Tensor t = tensor;
    t.values_mut() = std::move(values);
  }
  check(params.size() == out.model.named_parameters().size(),
        "checkpoint carries unexpected extra parameters");
  return out;
}

inline void save_checkpoint(const PeGnnModel& model, const std::string& path,
                            const nlohmann::json& extra_config = {}) {
  std::ofstream out(path);
  check(out.good(), "cannot open checkpoint file for writing: " + path);
  out << checkpoint_to_json(model, extra_config).dump(2) << "\n";
  check(out.good(), "write failed: " + path);
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open checkpoint file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint JSON in " + path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace pegnn
