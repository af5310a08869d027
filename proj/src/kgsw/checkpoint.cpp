#include "kgsw/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "kgsw/error.hpp"

namespace kgsw {

using nlohmann::json;

json state_to_json(const ModelState& state) {
  json tensors = json::array();
  for (const auto& p : state.params()) {
    tensors.push_back({{"name", p.name()},
                       {"partition", std::string(to_string(p.partition()))},
                       {"rows", p.rows()},
                       {"cols", p.cols()},
                       {"regularized", p.regularized()},
                       {"values", std::vector<double>(p.values().begin(), p.values().end())}});
  }
  return tensors;
}

ModelState state_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::parse, "tensors must be a JSON array");
  ModelState state;
  for (const auto& t : j) {
    auto& p = state.add(Parameter(t.at("name").get<std::string>(),
                                  partition_from_string(t.at("partition").get<std::string>()),
                                  t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>(),
                                  t.value("regularized", true)));
    const auto values = t.at("values").get<std::vector<double>>();
    if (values.size() != p.values().size()) {
      throw Error(ErrorKind::parse, "tensor " + p.name() + " has " +
                                        std::to_string(values.size()) + " values, expected " +
                                        std::to_string(p.values().size()));
    }
    std::copy(values.begin(), values.end(), p.values().begin());
  }
  return state;
}

json adam_to_json(const AdamState& adam, const ModelState& state) {
  json moments = json::object();
  for (std::size_t i = 0; i < state.params().size(); ++i) {
    moments[state.params()[i].name()] = {{"m", adam.first_moment.at(i)},
                                         {"v", adam.second_moment.at(i)}};
  }
  return {{"step", adam.step}, {"lr", adam.lr},     {"beta1", adam.beta1},
          {"beta2", adam.beta2}, {"eps", adam.eps}, {"moments", moments}};
}

AdamState adam_from_json(const json& j, const ModelState& state) {
  AdamState adam = AdamState::fresh(state, j.at("lr").get<double>());
  adam.step = j.at("step").get<std::uint64_t>();
  adam.beta1 = j.at("beta1").get<double>();
  adam.beta2 = j.at("beta2").get<double>();
  adam.eps = j.at("eps").get<double>();
  const auto& moments = j.at("moments");
  for (std::size_t i = 0; i < state.params().size(); ++i) {
    const auto& p = state.params()[i];
    if (!moments.contains(p.name())) {
      throw Error(ErrorKind::parse, "missing Adam moments for " + p.name());
    }
    const auto& mv = moments.at(p.name());
    adam.first_moment[i] = mv.at("m").get<std::vector<double>>();
    adam.second_moment[i] = mv.at("v").get<std::vector<double>>();
    if (adam.first_moment[i].size() != p.values().size() ||
        adam.second_moment[i].size() != p.values().size()) {
      throw Error(ErrorKind::parse, "Adam moments for " + p.name() + " have the wrong size");
    }
  }
  return adam;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  json j = {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"id", ckpt.id},
            {"parent", ckpt.parent},
            {"meta", ckpt.meta},
            {"tensors", state_to_json(ckpt.state)},
            {"rng", ckpt.rng}};
  j["adam"] = ckpt.adam ? adam_to_json(*ckpt.adam, ckpt.state) : json(nullptr);
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw Error(ErrorKind::parse, "not a kgsw checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw Error(ErrorKind::parse, "unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.id = j.value("id", "");
    ckpt.parent = j.value("parent", "");
    ckpt.meta = j.value("meta", json::object());
    ckpt.state = state_from_json(j.at("tensors"));
    if (j.contains("adam") && !j.at("adam").is_null()) {
      ckpt.adam = adam_from_json(j.at("adam"), ckpt.state);
    }
    ckpt.rng = j.value("rng", "");
    return ckpt;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("malformed checkpoint: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_json_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return checkpoint_from_json(j);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace kgsw
