#include "ecct/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace ecct {

nlohmann::json config_to_json(const ECCTConfig& cfg) {
  return {{"n", cfg.n},
          {"r", cfg.r},
          {"d", cfg.d},
          {"u", cfg.u},
          {"T", cfg.T},
          {"activation", to_string(cfg.activation)},
          {"masked", cfg.masked},
          {"softmax_scale", cfg.softmax_scale}};
}

ECCTConfig config_from_json(const nlohmann::json& j) {
  ECCTConfig c;
  c.n = j.at("n").get<std::size_t>();
  c.r = j.at("r").get<std::size_t>();
  c.d = j.at("d").get<std::size_t>();
  c.u = j.at("u").get<std::size_t>();
  c.T = j.at("T").get<std::size_t>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.masked = j.at("masked").get<bool>();
  c.softmax_scale = j.value("softmax_scale", false);
  c.validate();
  return c;
}

nlohmann::json checkpoint_to_json(const ECCTConfig& cfg, const ECCTWeights& w) {
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, m] : w.tensors()) {
    tensors[name] = {{"rows", m->rows()},
                     {"cols", m->cols()},
                     {"data", std::vector<double>(m->data(), m->data() + m->size())}};
  }
  return {{"format", "ecct-checkpoint"},
          {"version", kCheckpointVersion},
          {"config", config_to_json(cfg)},
          {"tensors", tensors}};
}

std::pair<ECCTConfig, ECCTWeights> checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ecct-checkpoint") throw std::runtime_error("not an ECCT checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  const auto cfg = config_from_json(j.at("config"));
  auto w = ECCTWeights::zeros(cfg);
  const auto& tensors = j.at("tensors");
  for (auto& [name, m] : w.tensors()) {
    const auto& t = tensors.at(name);
    if (t.at("rows").get<Eigen::Index>() != m->rows() || t.at("cols").get<Eigen::Index>() != m->cols())
      throw std::runtime_error("checkpoint tensor '" + name + "' has the wrong shape");
    const auto data = t.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != m->size())
      throw std::runtime_error("checkpoint tensor '" + name + "' has the wrong size");
    std::copy(data.begin(), data.end(), m->data());
  }
  w.check(cfg);
  return {cfg, std::move(w)};
}

void save_checkpoint(const std::string& path, const ECCTConfig& cfg, const ECCTWeights& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(cfg, w).dump() << '\n';
}

std::pair<ECCTConfig, ECCTWeights> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace ecct
