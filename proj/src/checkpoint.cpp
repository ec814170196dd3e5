#include "xtal/checkpoint.hpp"

#include <cstring>
#include <json.hpp>
#include <sstream>

#include "xtal/cif.hpp"
#include "xtal/errors.hpp"

namespace xtal {
namespace {

constexpr char kMagic[8] = {'X', 'T', 'A', 'L', 'C', 'K', 'P', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw_data("parse_error", "checkpoint truncated");
  return v;
}

nlohmann::json config_json(const ModelConfig& c) {
  return {{"variant", variant_name(c.variant)},
          {"mode", atom_mode_name(c.mode)},
          {"hidden_dim", c.hidden_dim},
          {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},
          {"mlp_ratio", c.mlp_ratio},
          {"atom_layers", c.atom_layers},
          {"lattice_layers", c.lattice_layers},
          {"joint_layers", c.joint_layers}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto var = variant_from_name(j.at("variant").get<std::string>());
  auto mode = atom_mode_from_name(j.at("mode").get<std::string>());
  if (!var || !mode) throw_data("parse_error", "checkpoint header has unknown variant/mode");
  c.variant = *var;
  c.mode = *mode;
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.mlp_ratio = j.at("mlp_ratio").get<int>();
  c.atom_layers = j.at("atom_layers").get<int>();
  c.lattice_layers = j.at("lattice_layers").get<int>();
  c.joint_layers = j.at("joint_layers").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const CheckpointMeta& meta) {
  nlohmann::json header = {{"format", 1},
                           {"config", config_json(params.config)},
                           {"epoch", meta.epoch},
                           {"seed", meta.seed},
                           {"config_hash", meta.config_hash},
                           {"command", meta.command}};
  std::string header_str = header.dump();

  std::ostringstream out(std::ios::binary);
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header_str.size()));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.layout.size()));
  for (size_t i = 0; i < params.layout.size(); ++i) {
    const auto& spec = params.layout[i];
    put<std::uint16_t>(out, static_cast<std::uint16_t>(spec.name.size()));
    out.write(spec.name.data(), static_cast<std::streamsize>(spec.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.rows));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.cols));
    const auto& m = params.values[i];
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) put<float>(out, static_cast<float>(m(r, c)));
  }
  write_text_atomic(path, out.str());
}

std::pair<ModelParameters, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::istringstream in(read_text_file(path), std::ios::binary);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw_data("parse_error", "'" + path + "' is not a checkpoint");

  auto header_len = get<std::uint32_t>(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw_data("parse_error", "checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw_data("parse_error", std::string("bad checkpoint header: ") + e.what());
  }

  CheckpointMeta meta;
  ModelConfig cfg;
  try {
    cfg = config_from_json(header.at("config"));
    meta.epoch = header.at("epoch").get<int>();
    meta.seed = header.at("seed").get<std::uint64_t>();
    meta.config_hash = header.value("config_hash", "");
    meta.command = header.value("command", "");
  } catch (const nlohmann::json::exception& e) {
    throw_data("parse_error", std::string("bad checkpoint header: ") + e.what());
  }
  cfg.validate();

  ModelParameters params;
  params.config = cfg;
  params.layout = parameter_layout(cfg);
  auto ntensors = get<std::uint32_t>(in);
  if (ntensors != params.layout.size())
    throw_data("checkpoint_mismatch", "checkpoint holds " + std::to_string(ntensors) +
                                          " tensors, config expects " +
                                          std::to_string(params.layout.size()));
  params.values.reserve(ntensors);
  params.grads.reserve(ntensors);
  for (size_t i = 0; i < params.layout.size(); ++i) {
    const auto& spec = params.layout[i];
    auto name_len = get<std::uint16_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    auto rows = get<std::uint32_t>(in);
    auto cols = get<std::uint32_t>(in);
    if (!in || name != spec.name || rows != static_cast<std::uint32_t>(spec.rows) ||
        cols != static_cast<std::uint32_t>(spec.cols))
      throw_data("checkpoint_mismatch",
                 "tensor '" + name + "' does not match expected '" + spec.name + "' [" +
                     std::to_string(spec.rows) + "x" + std::to_string(spec.cols) + "]");
    Eigen::MatrixXd m(spec.rows, spec.cols);
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) m(r, c) = static_cast<double>(get<float>(in));
    params.values.push_back(std::move(m));
    params.grads.push_back(Eigen::MatrixXd::Zero(spec.rows, spec.cols));
    params.index[spec.name] = static_cast<int>(i);
  }
  return {std::move(params), meta};
}

}  // namespace xtal
