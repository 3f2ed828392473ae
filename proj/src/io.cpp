#include "mdpulab/io.hpp"

#include <fstream>

namespace mdpulab {

namespace {

constexpr const char* kMdpFormat = "mdpulab.mdp/1";
constexpr const char* kMdpuFormat = "mdpulab.mdpu/1";

const Json& field(const Json& doc, const std::string& name, const std::string& where) {
  if (!doc.is_object() || !doc.contains(name)) {
    throw ConfigError(where + ": missing field '" + name + "'");
  }
  return doc.at(name);
}

template <typename T>
T get(const Json& doc, const std::string& name, const std::string& where) {
  try {
    return field(doc, name, where).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": field '" + name + "' has the wrong type (" + e.what() + ")");
  }
}

void check_format(const Json& doc, const char* expected) {
  if (doc.contains("format") && doc.at("format") != expected) {
    throw ConfigError(std::string("format: expected ") + expected);
  }
}

}  // namespace

Json mdp_to_json(const DiscreteMdp& mdp) {
  Json doc;
  doc["format"] = kMdpFormat;
  doc["num_states"] = mdp.num_states();
  doc["num_actions"] = mdp.num_actions();
  Json available = Json::array();
  Json terminal = Json::array();
  Json transitions = Json::array();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    available.push_back(mdp.available(s));
    if (mdp.is_terminal(s)) terminal.push_back(s);
    for (ActionId a : mdp.available(s)) {
      for (const auto& o : mdp.outcomes(s, a)) {
        transitions.push_back({s, a, o.next, o.probability, o.reward});
      }
    }
  }
  doc["available"] = available;
  doc["terminal"] = terminal;
  doc["transitions"] = transitions;
  return doc;
}

DiscreteMdp mdp_from_json(const Json& doc) {
  check_format(doc, kMdpFormat);
  const auto n = get<std::size_t>(doc, "num_states", "mdp");
  const auto m = get<std::size_t>(doc, "num_actions", "mdp");
  DiscreteMdp mdp(n, m);
  try {
    if (doc.contains("available")) {
      const auto available = doc.at("available").get<std::vector<std::vector<ActionId>>>();
      if (available.size() != n) throw ConfigError("mdp.available: one entry per state required");
      for (StateId s = 0; s < n; ++s) mdp.set_available(s, available[s]);
    }
    if (doc.contains("terminal")) {
      for (StateId s : doc.at("terminal").get<std::vector<StateId>>()) mdp.set_terminal(s);
    }
    for (const auto& row : field(doc, "transitions", "mdp")) {
      if (!row.is_array() || row.size() != 5) {
        throw ConfigError("mdp.transitions: rows are [state, action, next, probability, reward]");
      }
      mdp.add_outcome(row[0].get<StateId>(), row[1].get<ActionId>(), row[2].get<StateId>(),
                      row[3].get<double>(), row[4].get<double>());
    }
    mdp.validate();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mdp: ") + e.what());
  } catch (const ModelError& e) {
    throw ConfigError(std::string("mdp: ") + e.what());
  }
  return mdp;
}

Json discovery_to_json(const DiscoveryModel& model) {
  Json doc;
  switch (model.kind()) {
    case DiscoveryKind::Constant:
      doc = {{"kind", "constant"}, {"beta", model.beta()}};
      break;
    case DiscoveryKind::PowerLaw:
      doc = {{"kind", "power_law"}, {"c", model.c()}, {"p", model.p()}};
      break;
    case DiscoveryKind::BruteForceSystematic:
      doc = {{"kind", "brute_force_systematic"}, {"total", model.total()}, {"useful", model.useful()}};
      if (!model.useful_positions().empty()) doc["positions"] = model.useful_positions();
      break;
    case DiscoveryKind::BruteForceRandom:
      doc = {{"kind", "brute_force_random"}, {"total", model.total()}, {"useful", model.useful()}};
      break;
    case DiscoveryKind::Table:
      doc = {{"kind", "table"}, {"values", model.values()}};
      if (const auto& tail = model.tail()) {
        doc["tail"] = {{"kind", tail->kind == TailModel::Kind::PowerLaw ? "power_law" : "log_harmonic"},
                       {"c", tail->c},
                       {"p", tail->p}};
      }
      break;
  }
  if (model.j_dependence() == JDependence::Linear) doc["j_dependence"] = "linear";
  return doc;
}

DiscoveryModel discovery_from_json(const Json& doc) {
  const auto kind = get<std::string>(doc, "kind", "discovery");
  auto build = [&]() -> DiscoveryModel {
    if (kind == "constant") return DiscoveryModel::constant(get<double>(doc, "beta", "discovery"));
    if (kind == "power_law") {
      return DiscoveryModel::power_law(get<double>(doc, "c", "discovery"),
                                       get<double>(doc, "p", "discovery"));
    }
    if (kind == "brute_force_systematic") {
      std::vector<std::uint64_t> positions;
      if (doc.contains("positions")) positions = doc.at("positions").get<std::vector<std::uint64_t>>();
      return DiscoveryModel::brute_force_systematic(get<std::uint64_t>(doc, "total", "discovery"),
                                                    get<std::uint64_t>(doc, "useful", "discovery"),
                                                    positions);
    }
    if (kind == "brute_force_random") {
      return DiscoveryModel::brute_force_random(get<std::uint64_t>(doc, "total", "discovery"),
                                                get<std::uint64_t>(doc, "useful", "discovery"));
    }
    if (kind == "table") {
      std::optional<TailModel> tail;
      if (doc.contains("tail")) {
        const Json& t = doc.at("tail");
        const auto tail_kind = get<std::string>(t, "kind", "discovery.tail");
        TailModel model;
        if (tail_kind == "power_law") {
          model.kind = TailModel::Kind::PowerLaw;
        } else if (tail_kind == "log_harmonic") {
          model.kind = TailModel::Kind::LogHarmonic;
        } else {
          throw ConfigError("discovery.tail.kind: unknown value '" + tail_kind + "'");
        }
        model.c = get<double>(t, "c", "discovery.tail");
        model.p = t.value("p", 0.0);
        tail = model;
      }
      return DiscoveryModel::table(get<std::vector<double>>(doc, "values", "discovery"), tail);
    }
    throw ConfigError("discovery.kind: unknown value '" + kind + "'");
  };
  try {
    DiscoveryModel model = build();
    const std::string rule = doc.value("j_dependence", "independent");
    if (rule == "linear") return model.with_j_dependence(JDependence::Linear);
    if (rule != "independent") throw ConfigError("discovery.j_dependence: unknown value '" + rule + "'");
    return model;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Json mdpu_to_json(const Mdpu& mdpu) {
  Json doc;
  doc["format"] = kMdpuFormat;
  doc["mdp"] = mdp_to_json(mdpu.underlying);
  doc["known_actions"] = mdpu.known_actions;
  doc["aware"] = mdpu.aware;
  doc["hidden_useful"] = mdpu.hidden_useful;
  doc["discovery"] = discovery_to_json(mdpu.discovery);
  return doc;
}

Mdpu mdpu_from_json(const Json& doc) {
  check_format(doc, kMdpuFormat);
  Mdpu mdpu;
  mdpu.underlying = mdp_from_json(field(doc, "mdp", "mdpu"));
  const std::size_t n = mdpu.underlying.num_states();
  if (doc.contains("known_actions")) {
    mdpu.known_actions = get<std::vector<ActionId>>(doc, "known_actions", "mdpu");
  } else {
    for (ActionId a = 0; a < mdpu.underlying.num_actions(); ++a) mdpu.known_actions.push_back(a);
  }
  if (doc.contains("aware")) {
    mdpu.aware = get<std::vector<std::vector<ActionId>>>(doc, "aware", "mdpu");
  } else {
    mdpu.aware.resize(n);
    for (StateId s = 0; s < n; ++s) mdpu.aware[s] = mdpu.underlying.available(s);
  }
  mdpu.hidden_useful = doc.contains("hidden_useful")
                           ? get<std::vector<std::vector<ActionId>>>(doc, "hidden_useful", "mdpu")
                           : std::vector<std::vector<ActionId>>(n);
  if (doc.contains("discovery")) mdpu.discovery = discovery_from_json(doc.at("discovery"));
  try {
    mdpu.validate();
  } catch (const ModelError& e) {
    throw ConfigError(std::string("mdpu: ") + e.what());
  }
  return mdpu;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace mdpulab
