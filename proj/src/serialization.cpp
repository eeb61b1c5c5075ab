#include "earnet/serialization.hpp"

#include <cmath>

#include "json_fields.hpp"

namespace earnet {

using detail::Fields;
using detail::json;

SimulationConfig detail::read_config(Fields& f) {
  SimulationConfig c;
  const auto& room = f.at("roomSize");
  if (room.is_string()) {
    c.roomClass = parse_room_class(room.get<std::string>());
    if (!c.roomClass) f.fail("roomSize", "expected \"small\", \"medium\" or \"large\"");
  } else if (room.is_array() && room.size() == 2 && room[0].is_number() && room[1].is_number()) {
    c.roomWidth = room[0].get<double>();
    c.roomHeight = room[1].get<double>();
  } else {
    f.fail("roomSize", "expected [width, height] in meters or a room class name");
  }
  c.numNodes = f.uint("numNodes", c.numNodes);
  c.groupSize = f.uint("groupSize", c.groupSize);
  c.conversationRadiusM = f.number("conversationRadiusM", c.conversationRadiusM);
  c.speed = f.number("speed", c.speed);
  c.durationS = f.number("durationS", c.durationS);
  c.frameS = f.number("frameS", c.frameS);
  c.maxSimultaneous = f.uint("maxSimultaneous", c.maxSimultaneous);
  c.overlapProb = f.number("overlapProb", c.overlapProb);
  if (f.has("turnS")) {
    const auto& t = f.at("turnS");
    if (!(t.is_array() && t.size() == 2 && t[0].is_number() && t[1].is_number())) {
      f.fail("turnS", "expected [min, max] in seconds");
    }
    c.turnMinS = t[0].get<double>();
    c.turnMaxS = t[1].get<double>();
  }
  c.gapMaxS = f.number("gapMaxS", c.gapMaxS);
  c.embeddingDim = f.uint("embeddingDim", c.embeddingDim);
  c.txLevelDb = f.number("txLevelDb", c.txLevelDb);
  if (f.has("noise")) {
    auto n = f.object("noise");
    c.noise.doaSigmaDeg = n.number("doaSigmaDeg", 0.0);
    c.noise.distanceSigmaRel = n.number("distanceSigmaRel", 0.0);
    c.noise.embeddingSigma = n.number("embeddingSigma", 0.0);
    c.noise.missProb = n.number("missProb", 0.0);
    c.noise.imuDriftRadPerS = n.number("imuDriftRadPerS", 0.0);
    c.noise.imuDriftMPerS = n.number("imuDriftMPerS", 0.0);
    n.finish();
  }
  c.seed = f.uint("seed", c.seed);
  f.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    // validate() reports "field: reason"; add the location.
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    const std::string field = msg.substr(0, colon);
    const auto leaf = field.substr(field.rfind('.') + 1);
    std::string where(f.source());
    if (const auto line = detail::line_of_key(f.text(), leaf)) where += ":" + std::to_string(line);
    throw Error(ErrorCode::InvalidConfig, where + ": field '" + field + "': " + msg.substr(colon + 2));
  }
  return c;
}

namespace {

json config_json(const SimulationConfig& c) {
  json j;
  if (c.roomClass) {
    j["roomSize"] = to_string(*c.roomClass);
  } else {
    j["roomSize"] = {c.roomWidth, c.roomHeight};
  }
  j["numNodes"] = c.numNodes;
  j["groupSize"] = c.groupSize;
  j["conversationRadiusM"] = c.conversationRadiusM;
  j["speed"] = c.speed;
  j["durationS"] = c.durationS;
  j["frameS"] = c.frameS;
  j["maxSimultaneous"] = c.maxSimultaneous;
  j["overlapProb"] = c.overlapProb;
  j["turnS"] = {c.turnMinS, c.turnMaxS};
  j["gapMaxS"] = c.gapMaxS;
  j["embeddingDim"] = c.embeddingDim;
  j["txLevelDb"] = c.txLevelDb;
  j["noise"] = {{"doaSigmaDeg", c.noise.doaSigmaDeg},
                {"distanceSigmaRel", c.noise.distanceSigmaRel},
                {"embeddingSigma", c.noise.embeddingSigma},
                {"missProb", c.noise.missProb},
                {"imuDriftRadPerS", c.noise.imuDriftRadPerS},
                {"imuDriftMPerS", c.noise.imuDriftMPerS}};
  j["seed"] = c.seed;
  return j;
}

json pose_json(const Pose2& p) { return {p.translation.x, p.translation.y, p.rotation.angle()}; }

std::vector<double> numbers(const json& j, std::size_t n, Fields& f, std::string_view key) {
  if (!j.is_array() || (n > 0 && j.size() != n)) f.fail(key, "expected an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) f.fail(key, "expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

SimulationConfig parse_simulation_config(std::string_view text, std::string_view source) {
  const json j = detail::parse_json(text, source);
  Fields f(j, "", text, source);
  return read_config(f);
}

std::string simulation_config_to_json(const SimulationConfig& config) { return config_json(config).dump(2) + "\n"; }

std::string scenario_to_json(const Scenario& sc) {
  json j;
  j["schema"] = kScenarioSchema;
  j["config"] = config_json(sc.config);
  j["room"] = {sc.roomWidth, sc.roomHeight};
  j["groups"] = sc.groups;
  json nodes = json::array();
  for (std::size_t i = 0; i < sc.num_nodes(); ++i) {
    json speech = json::array();
    for (const auto& iv : sc.speech[i]) speech.push_back({iv.start, iv.end});
    nodes.push_back({{"id", i},
                     {"txLevelDb", sc.txLevelDb[i]},
                     {"speech", speech},
                     {"embedding", sc.embeddings[i].values()}});
  }
  j["nodes"] = nodes;
  json frames = json::array();
  for (std::size_t f = 0; f < sc.num_frames(); ++f) {
    json poses = json::array();
    for (const auto& p : sc.poses[f]) poses.push_back(pose_json(p));
    frames.push_back(poses);
  }
  j["poses"] = frames;
  return j.dump() + "\n";
}

Scenario scenario_from_json(std::string_view text, std::string_view source) {
  const json j = detail::parse_json(text, source);
  Fields f(j, "", text, source);
  if (f.string("schema") != kScenarioSchema) f.fail("schema", "expected \"" + std::string(kScenarioSchema) + "\"");
  Scenario sc;
  {
    auto cf = f.object("config");
    sc.config = read_config(cf);
  }
  const auto room = numbers(f.at("room"), 2, f, "room");
  sc.roomWidth = room[0];
  sc.roomHeight = room[1];

  const auto& nodes = f.at("nodes");
  if (!nodes.is_array()) f.fail("nodes", "expected an array");
  if (nodes.size() != sc.config.numNodes) f.fail("nodes", "expected one entry per node");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Fields nf(nodes[i], "/nodes/" + std::to_string(i), text, source);
    if (nf.uint("id") != i) nf.fail("id", "node ids must be 0, 1, ... in order");
    sc.txLevelDb.push_back(nf.number("txLevelDb"));
    std::vector<Interval> speech;
    const auto& sp = nf.at("speech");
    if (!sp.is_array()) nf.fail("speech", "expected an array of [start, end]");
    for (const auto& iv : sp) {
      const auto v = numbers(iv, 2, nf, "speech");
      if (!(v[0] < v[1])) nf.fail("speech", "interval start must precede end");
      speech.push_back({v[0], v[1]});
    }
    sc.speech.push_back(std::move(speech));
    const auto e = numbers(nf.at("embedding"), sc.config.embeddingDim, nf, "embedding");
    try {
      sc.embeddings.push_back(Embedding::from_unit(e));
    } catch (const Error&) {
      nf.fail("embedding", "expected a unit-norm vector");
    }
    nf.finish();
  }

  const auto& groups = f.at("groups");
  std::vector<int> member(sc.config.numNodes, 0);
  if (!groups.is_array()) f.fail("groups", "expected an array of id arrays");
  for (const auto& g : groups) {
    if (!g.is_array() || g.empty()) f.fail("groups", "expected nonempty id arrays");
    std::vector<std::size_t> ids;
    for (const auto& id : g) {
      if (!id.is_number_unsigned() || id.get<std::size_t>() >= member.size()) f.fail("groups", "bad node id");
      ++member[id.get<std::size_t>()];
      ids.push_back(id.get<std::size_t>());
    }
    sc.groups.push_back(std::move(ids));
  }
  for (int m : member) {
    if (m != 1) f.fail("groups", "every node must belong to exactly one group");
  }

  const auto& poses = f.at("poses");
  if (!poses.is_array()) f.fail("poses", "expected an array of frames");
  for (const auto& frame : poses) {
    if (!frame.is_array() || frame.size() != sc.config.numNodes) f.fail("poses", "expected one pose per node");
    std::vector<Pose2> ps;
    for (const auto& p : frame) {
      const auto v = numbers(p, 3, f, "poses");
      ps.push_back({Rotation2(v[2]), {v[0], v[1]}});
    }
    sc.poses.push_back(std::move(ps));
  }
  f.finish();
  return sc;
}

std::string ground_truth_to_json(const Scenario& sc) {
  json j;
  j["schema"] = kGroundTruthSchema;
  j["frameS"] = sc.config.frameS;
  json frames = json::array();
  for (std::size_t f = 0; f < sc.num_frames(); ++f) {
    const auto ft = frame_truth(sc, f);
    json nodes = json::array();
    for (const auto& s : ft.snapshots) nodes.push_back({s.position.x, s.position.y, s.orientation});
    json sources = json::array();
    for (const auto& p : ft.sourcePositions) sources.push_back({p.x, p.y});
    frames.push_back({{"t", ft.time},
                      {"nodes", nodes},
                      {"activeSpeakers", ft.activeSpeakers},
                      {"sources", sources},
                      {"conversationGroups", build_graph(ft.snapshots).groups}});
  }
  j["frames"] = frames;
  return j.dump() + "\n";
}

}  // namespace earnet
