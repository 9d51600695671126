#include "tfhtmm/checkpoint.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "tfhtmm/errors.hpp"
#include "tfhtmm/io.hpp"

namespace tfhtmm {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "tfhtmm-checkpoint";
constexpr int kVersion = 1;

json hyper_json(const HyperParams& h) {
  return json{{"C", h.num_states},     {"L", h.max_degree},     {"M", h.alphabet_size},
              {"phi", h.phi},          {"l_min", h.l_min},      {"l_max", h.l_max},
              {"alpha", h.alpha},      {"alpha0", h.alpha0},    {"gamma", h.gamma},
              {"beta", h.beta},        {"t0", h.t0},            {"m0", h.m0},
              {"iterations", h.iterations}, {"seed", h.seed},
              {"acceptance", to_string(h.acceptance)}};
}

HyperParams hyper_from(const json& j) {
  HyperParams h;
  h.num_states = j.at("C").get<int>();
  h.max_degree = j.at("L").get<int>();
  h.alphabet_size = j.at("M").get<int>();
  h.phi = j.at("phi").get<double>();
  h.l_min = j.at("l_min").get<int>();
  h.l_max = j.at("l_max").get<int>();
  h.alpha = j.at("alpha").get<double>();
  h.alpha0 = j.at("alpha0").get<double>();
  h.gamma = j.at("gamma").get<double>();
  h.beta = j.at("beta").get<double>();
  h.t0 = j.at("t0").get<double>();
  h.m0 = j.at("m0").get<int>();
  h.iterations = j.at("iterations").get<int>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.acceptance = latent_acceptance_from_string(j.at("acceptance").get<std::string>());
  return h;
}

json tf_json(const TfModelParams& p) {
  json core = json::array();
  for (const auto& [tuple, row] : p.core_entries())
    core.push_back(json{{"tuple", p.clustering.tuple_of(tuple)}, {"row", row}});
  json clusters = json::array();
  for (int l = 0; l < p.clustering.num_positions(); ++l) clusters.push_back(p.clustering.assignment(l));
  return json{{"C", p.num_states()},
              {"L", p.max_degree()},
              {"M", p.alphabet_size()},
              {"alpha", p.alpha()},
              {"pi", p.pi},
              {"emission", p.emission},
              {"lambda0", p.lambda0},
              {"clustering", clusters},
              {"core", core},
              {"core_rng", rng_to_string(p.core_rng())}};
}

TfModelParams tf_from(const json& j) {
  TfModelParams p(j.at("C").get<int>(), j.at("L").get<int>(), j.at("M").get<int>(),
                  j.at("alpha").get<double>());
  p.pi = j.at("pi").get<std::vector<Simplex>>();
  p.emission = j.at("emission").get<std::vector<Simplex>>();
  p.lambda0 = j.at("lambda0").get<Simplex>();
  const auto clusters = j.at("clustering").get<std::vector<std::vector<int>>>();
  if (clusters.size() != static_cast<std::size_t>(p.max_degree()))
    throw DomainError("checkpoint clustering has wrong number of positions");
  for (std::size_t l = 0; l < clusters.size(); ++l)
    p.clustering.set_assignment(static_cast<int>(l), clusters[l]);
  for (const auto& entry : j.at("core")) {
    const auto tuple = entry.at("tuple").get<std::vector<int>>();
    p.set_core(p.clustering.tuple_index(tuple), entry.at("row").get<Simplex>());
  }
  p.core_rng() = rng_from_string(j.at("core_rng").get<std::string>());
  return p;
}

json sp_json(const SpModelParams& p) {
  return json{{"C", p.num_states},     {"L", p.max_degree},
              {"M", p.alphabet_size},  {"pi", p.pi},
              {"emission", p.emission}, {"switch", p.switch_weights},
              {"elementary", p.elementary}};
}

SpModelParams sp_from(const json& j) {
  SpModelParams p;
  p.num_states = j.at("C").get<int>();
  p.max_degree = j.at("L").get<int>();
  p.alphabet_size = j.at("M").get<int>();
  p.pi = j.at("pi").get<std::vector<Simplex>>();
  p.emission = j.at("emission").get<std::vector<Simplex>>();
  p.switch_weights = j.at("switch").get<Simplex>();
  p.elementary = j.at("elementary").get<std::vector<std::vector<Simplex>>>();
  return p;
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::kTf ? "tf" : "sp"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "tf") return ModelKind::kTf;
  if (name == "sp") return ModelKind::kSp;
  throw ConfigError("unknown model kind '" + name + "' (expected tf or sp)");
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng rng_from_string(const std::string& state) {
  Rng rng;
  std::istringstream in(state);
  in >> rng;
  if (!in) throw DomainError("malformed RNG state");
  return rng;
}

std::string serialise_checkpoint(const Checkpoint& c) {
  json doc{{"format", kFormat},
           {"version", kVersion},
           {"kind", to_string(kind_of(c.model))},
           {"iteration", c.iteration},
           {"hyper", hyper_json(c.hyper)},
           {"rng", c.rng_state}};
  if (const auto* tf = std::get_if<TfModelParams>(&c.model))
    doc["model"] = tf_json(*tf);
  else
    doc["model"] = sp_json(std::get<SpModelParams>(c.model));
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw DomainError("not a tfhtmm checkpoint");
    if (doc.at("version").get<int>() != kVersion)
      throw DomainError("unsupported checkpoint version " + std::to_string(doc.at("version").get<int>()));
    Checkpoint c;
    c.hyper = hyper_from(doc.at("hyper"));
    c.iteration = doc.at("iteration").get<int>();
    c.rng_state = doc.at("rng").get<std::string>();
    const auto kind = model_kind_from_string(doc.at("kind").get<std::string>());
    if (kind == ModelKind::kTf)
      c.model = tf_from(doc.at("model"));
    else
      c.model = sp_from(doc.at("model"));
    return c;
  } catch (const json::exception& e) {
    throw DomainError(std::string("malformed checkpoint: ") + e.what());
  }
}

Checkpoint read_checkpoint_file(const std::string& path) {
  try {
    return parse_checkpoint(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

void write_checkpoint_file(const std::string& path, const Checkpoint& checkpoint) {
  write_text_file_atomic(path, serialise_checkpoint(checkpoint));
}

std::string hyper_to_json_string(const HyperParams& hyper) { return hyper_json(hyper).dump(); }

}  // namespace tfhtmm
