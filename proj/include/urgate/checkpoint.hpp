// Parameter checkpoints. Layout (version 1):
//
//   8 bytes   magic "URCKPT1\n"
//   4 bytes   little-endian header length
//   N bytes   JSON header: version, precision, cell kind, gate config,
//             input/hidden/output sizes, tensor names + shapes
//   payload   for each tensor in header order: rows*cols little-endian
//             doubles in row-major order

#ifndef URGATE_CHECKPOINT_HPP
#define URGATE_CHECKPOINT_HPP

#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "urgate/train.hpp"

namespace urgate {

inline constexpr char kCheckpointMagic[8] = {'U', 'R', 'C', 'K',
                                             'P', 'T', '1', '\n'};

inline nlohmann::json gate_config_to_json(const GateConfig& cfg) {
  return {{"variant", cfg.name()},
          {"forget_bias", cfg.forget_bias},
          {"t_max", cfg.t_max},
          {"eps", cfg.eps},
          {"downsize_c", cfg.downsize_c}};
}

inline GateConfig gate_config_from_json(const nlohmann::json& j) {
  GateConfig cfg = GateConfig::from_name(j.at("variant").get<std::string>());
  cfg.forget_bias = j.value("forget_bias", cfg.forget_bias);
  cfg.t_max = j.value("t_max", cfg.t_max);
  cfg.eps = j.value("eps", cfg.eps);
  cfg.downsize_c = j.value("downsize_c", cfg.downsize_c);
  return cfg;
}

inline void save_checkpoint(const std::string& path, const Model& model) {
  Model& m = const_cast<Model&>(model);
  nlohmann::json header;
  header["version"] = 1;
  header["precision"] = "f64";
  header["cell"] = cell_name(m.cell.kind);
  header["gate"] = gate_config_to_json(m.cell.cfg);
  header["input"] = m.cell.input;
  header["hidden"] = m.cell.hidden;
  header["output"] = static_cast<int>(m.Wy.rows());
  nlohmann::json tensors = nlohmann::json::array();
  for (auto& [name, mat] : m.named_tensors()) {
    tensors.push_back({{"name", name},
                       {"rows", static_cast<long>(mat->rows())},
                       {"cols", static_cast<long>(mat->cols())}});
  }
  header["tensors"] = tensors;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kCheckpointMagic, 8);
  const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  unsigned char lb[4] = {static_cast<unsigned char>(len),
                         static_cast<unsigned char>(len >> 8),
                         static_cast<unsigned char>(len >> 16),
                         static_cast<unsigned char>(len >> 24)};
  out.write(reinterpret_cast<char*>(lb), 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (auto& [name, mat] : m.named_tensors()) {
    for (Eigen::Index r = 0; r < mat->rows(); ++r)
      for (Eigen::Index c = 0; c < mat->cols(); ++c) {
        const double v = (*mat)(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

inline Model load_checkpoint(const std::string& path, std::uint64_t dummy_seed = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("load_checkpoint: " + path +
                             ": bad magic (not a checkpoint file)");
  }
  unsigned char lb[4];
  in.read(reinterpret_cast<char*>(lb), 4);
  if (!in) throw std::runtime_error("load_checkpoint: truncated header length");
  const std::uint32_t len = std::uint32_t(lb[0]) | (std::uint32_t(lb[1]) << 8) |
                            (std::uint32_t(lb[2]) << 16) |
                            (std::uint32_t(lb[3]) << 24);
  std::string hs(len, '\0');
  in.read(hs.data(), len);
  if (!in) throw std::runtime_error("load_checkpoint: truncated header");
  const nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("version").get<int>() != 1) {
    throw std::runtime_error("load_checkpoint: unsupported version");
  }

  const CellKind kind = cell_from_name(header.at("cell").get<std::string>());
  const GateConfig cfg = gate_config_from_json(header.at("gate"));
  const int input = header.at("input").get<int>();
  const int hidden = header.at("hidden").get<int>();
  const int output = header.at("output").get<int>();
  Rng rng(dummy_seed);  // structure only; values are overwritten below
  Model model = make_model(kind, cfg, input, hidden, output, rng);

  auto named = model.named_tensors();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != named.size()) {
    throw std::runtime_error("load_checkpoint: tensor list mismatch");
  }
  for (std::size_t k = 0; k < named.size(); ++k) {
    const auto& tj = tensors[k];
    auto& [name, mat] = named[k];
    if (tj.at("name").get<std::string>() != name ||
        tj.at("rows").get<long>() != mat->rows() ||
        tj.at("cols").get<long>() != mat->cols()) {
      throw std::runtime_error("load_checkpoint: tensor \"" + name +
                               "\" shape/name mismatch");
    }
    for (Eigen::Index r = 0; r < mat->rows(); ++r)
      for (Eigen::Index c = 0; c < mat->cols(); ++c) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        if (!in) {
          throw std::runtime_error("load_checkpoint: truncated payload in \"" +
                                   name + "\"");
        }
        (*mat)(r, c) = v;
      }
  }
  return model;
}

}  // namespace urgate

#endif  // URGATE_CHECKPOINT_HPP
