#include "kolb/tree/tree.hpp"

#include <cmath>

#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"

namespace kolb::tree {

std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::draft: return "draft";
    case NodeKind::improve: return "improve";
    case NodeKind::debug: return "debug";
  }
  return "draft";
}

std::string to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::valid: return "valid";
    case NodeStatus::buggy: return "buggy";
    case NodeStatus::unevaluated: return "unevaluated";
  }
  return "unevaluated";
}

NodeKind parse_node_kind(const std::string& s) {
  if (s == "draft") return NodeKind::draft;
  if (s == "improve") return NodeKind::improve;
  if (s == "debug") return NodeKind::debug;
  throw ConfigError("unknown node kind: " + s);
}

NodeStatus parse_node_status(const std::string& s) {
  if (s == "valid") return NodeStatus::valid;
  if (s == "buggy") return NodeStatus::buggy;
  if (s == "unevaluated") return NodeStatus::unevaluated;
  throw ConfigError("unknown node status: " + s);
}

std::string to_string(TreeAction::Kind k) {
  switch (k) {
    case TreeAction::Kind::new_draft: return "draft";
    case TreeAction::Kind::debug: return "debug";
    case TreeAction::Kind::improve: return "improve";
    case TreeAction::Kind::stop: return "stop";
  }
  return "stop";
}

Json SolutionNode::to_json() const {
  Json j{{"node_id", node_id},
         {"parent", parent ? Json(*parent) : Json()},
         {"kind", to_string(kind)},
         {"code", code},
         {"exec", exec ? exec->to_json() : Json()},
         {"status", to_string(status)},
         {"debug_depth", debug_depth},
         {"note", note},
         {"submission", submission ? Json(*submission) : Json()}};
  if (metric) {
    j["metric"] = {{"value", metric->value}, {"direction", core::to_string(metric->direction)},
                   {"source", metric->source}};
  } else {
    j["metric"] = nullptr;
  }
  return j;
}

SolutionNode SolutionNode::from_json(const Json& j) {
  SolutionNode n;
  n.node_id = j.at("node_id").get<int>();
  if (!j.at("parent").is_null()) n.parent = j.at("parent").get<int>();
  n.kind = parse_node_kind(j.at("kind").get<std::string>());
  n.code = j.at("code").get<std::string>();
  if (!j.at("exec").is_null()) n.exec = exec::ExecResult::from_json(j.at("exec"));
  if (!j.at("metric").is_null()) {
    const auto& m = j.at("metric");
    n.metric = MetricReading{m.at("value").get<double>(), core::parse_direction(m.at("direction").get<std::string>()),
                             m.at("source").get<std::string>()};
  }
  n.status = parse_node_status(j.at("status").get<std::string>());
  n.debug_depth = j.at("debug_depth").get<int>();
  n.note = j.value("note", "");
  if (j.contains("submission") && !j.at("submission").is_null()) n.submission = j.at("submission").get<std::string>();
  return n;
}

TreePolicy TreePolicy::for_runtime(double total_runtime_s, std::uint64_t seed) {
  TreePolicy p;
  p.tau_node = total_runtime_s * 3.0 / 16.0;
  p.rng_seed = seed;
  p.validate();
  return p;
}

void TreePolicy::validate() const {
  if (n_max <= 0 || n_draft <= 0 || max_debug_depth <= 0 || retained <= 0) {
    throw ConfigError("tree policy counts must be positive");
  }
  if (!(tau_node > 0.0) || !std::isfinite(tau_node)) throw ConfigError("tau_node must be positive");
  if (!(p_debug >= 0.0 && p_debug <= 1.0)) throw ConfigError("p_debug must lie in [0,1]");
}

std::string render_past_submissions(const AbstractionSeed& seeds) {
  if (seeds.empty()) return "";
  std::string out = "\n## Summary of Past Submissions\n";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += "-----\n";
    out += "\n### Submission " + std::to_string(i) + " summary and validation score:\n";
    out += seeds[i].summary + "\n";
    out += canonical_dump(seeds[i].scores) + "\n";
  }
  return out;
}

void SolutionTree::check(const SolutionNode& n, int max_debug_depth) const {
  auto fail = [&](const std::string& what) {
    throw ConfigError("node " + std::to_string(n.node_id) + " (" + to_string(n.kind) + "): " + what);
  };
  if (n.metric && !std::isfinite(n.metric->value)) fail("metric must be finite");
  if (n.metric && n.status != NodeStatus::valid) fail("only valid nodes carry a metric");
  if (n.kind == NodeKind::draft) {
    if (n.parent) fail("a draft has no parent");
    if (n.debug_depth != 0) fail("a draft has debug depth 0");
    return;
  }
  if (!n.parent || *n.parent < 0 || *n.parent >= n.node_id || *n.parent >= static_cast<int>(nodes_.size())) {
    fail("parent must be an earlier node");
  }
  const SolutionNode& p = nodes_[static_cast<std::size_t>(*n.parent)];
  if (n.kind == NodeKind::improve) {
    if (p.status != NodeStatus::valid) fail("improve needs a valid parent");
    if (n.debug_depth != 0) fail("an improvement restarts the debug depth");
  } else {
    if (p.status != NodeStatus::buggy) fail("debug needs a buggy parent");
    if (n.debug_depth != p.debug_depth + 1) fail("debug depth must be the parent's plus one");
    if (n.debug_depth > max_debug_depth) fail("debug depth exceeds the maximum");
  }
}

int SolutionTree::add(SolutionNode node, int max_debug_depth) {
  node.node_id = static_cast<int>(nodes_.size());
  check(node, max_debug_depth);
  if (!direction_ && node.metric) direction_ = node.metric->direction;
  nodes_.push_back(std::move(node));
  return nodes_.back().node_id;
}

void SolutionTree::update(const SolutionNode& node, int max_debug_depth) {
  if (node.node_id < 0 || node.node_id >= static_cast<int>(nodes_.size())) {
    throw ConfigError("update of unknown node " + std::to_string(node.node_id));
  }
  const auto& old = nodes_[static_cast<std::size_t>(node.node_id)];
  // Status is what children were checked against, so it is frozen once set.
  if (has_children(node.node_id) && old.status != node.status) {
    throw ConfigError("status of node " + std::to_string(node.node_id) + " is fixed by its children");
  }
  check(node, max_debug_depth);
  if (!direction_ && node.metric) direction_ = node.metric->direction;
  nodes_[static_cast<std::size_t>(node.node_id)] = node;
}

const SolutionNode& SolutionTree::node(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) throw ConfigError("unknown node " + std::to_string(id));
  return nodes_[static_cast<std::size_t>(id)];
}

int SolutionTree::draft_count() const {
  int n = 0;
  for (const auto& x : nodes_) n += x.kind == NodeKind::draft;
  return n;
}

bool SolutionTree::has_children(int id) const {
  for (const auto& x : nodes_) {
    if (x.parent && *x.parent == id) return true;
  }
  return false;
}

std::optional<std::string> SolutionTree::verify(int max_debug_depth) const {
  SolutionTree replay(direction_);
  for (const auto& n : nodes_) {
    if (n.node_id != static_cast<int>(replay.size())) return "node ids must be dense and ordered";
    try {
      replay.check(n, max_debug_depth);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    replay.nodes_.push_back(n);
  }
  return std::nullopt;
}

std::string SolutionTree::digest() const {
  Json all = Json::array();
  for (const auto& n : nodes_) all.push_back(n.to_json());
  return sha256_hex(canonical_dump(all));
}

void SolutionTree::save(const std::filesystem::path& path) const {
  std::vector<Json> records;
  records.push_back({{"type", "tree"},
                     {"direction", direction_ ? Json(core::to_string(*direction_)) : Json()},
                     {"nodes", nodes_.size()}});
  for (const auto& n : nodes_) {
    Json j = n.to_json();
    j["type"] = "node";
    records.push_back(std::move(j));
  }
  for (const auto& n : nodes_) {
    if (n.parent) records.push_back({{"type", "edge"}, {"from", *n.parent}, {"to", n.node_id}, {"kind", to_string(n.kind)}});
  }
  write_jsonl(path, records);
}

SolutionTree SolutionTree::load(const std::filesystem::path& path) {
  auto records = read_jsonl(path);
  if (records.empty() || records[0].value("type", "") != "tree") throw ConfigError("not a tree file: " + path.string());
  SolutionTree t;
  if (!records[0].at("direction").is_null()) t.direction_ = core::parse_direction(records[0].at("direction"));
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].value("type", "") != "node") continue;
    t.nodes_.push_back(SolutionNode::from_json(records[i]));
  }
  if (auto err = t.verify(1 << 20)) throw ConfigError("corrupt tree file " + path.string() + ": " + *err);
  return t;
}

namespace {

bool improvable(const SolutionNode& n, const std::optional<core::Direction>& dir) {
  return n.status == NodeStatus::valid && n.metric && (!dir || n.metric->direction == *dir);
}

}  // namespace

const SolutionNode* best_node(const SolutionTree& tree) {
  const SolutionNode* best = nullptr;
  const auto dir = tree.direction();
  for (const auto& n : tree.nodes()) {
    if (!improvable(n, dir)) continue;
    if (!best || core::better(n.metric->value, best->metric->value, n.metric->direction)) best = &n;
  }
  return best;
}

std::vector<const SolutionNode*> top_nodes(const SolutionTree& tree, int k) {
  std::vector<const SolutionNode*> pool;
  const auto dir = tree.direction();
  for (const auto& n : tree.nodes()) {
    if (improvable(n, dir) && n.submission) pool.push_back(&n);
  }
  std::stable_sort(pool.begin(), pool.end(), [](const SolutionNode* a, const SolutionNode* b) {
    return core::better(a->metric->value, b->metric->value, a->metric->direction);
  });
  if (k >= 0 && pool.size() > static_cast<std::size_t>(k)) pool.resize(static_cast<std::size_t>(k));
  return pool;
}

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

TreeAction select_next_action(const SolutionTree& tree, const TreePolicy& policy, std::mt19937_64& rng,
                              int steps, double remaining_runtime) {
  if (steps >= policy.n_max) return {TreeAction::Kind::stop, std::nullopt, "iteration limit reached"};
  if (remaining_runtime < 2.0 * policy.tau_node) {
    return {TreeAction::Kind::stop, std::nullopt, "remaining runtime below the reserve"};
  }
  const double u = unit_draw(rng);
  // Leaves only: a debugged node already has its fix attempt.
  std::optional<int> debuggable;
  for (auto it = tree.nodes().rbegin(); it != tree.nodes().rend(); ++it) {
    if (it->status == NodeStatus::buggy && it->debug_depth < policy.max_debug_depth && !tree.has_children(it->node_id)) {
      debuggable = it->node_id;
      break;
    }
  }
  if (u < policy.p_debug && debuggable) return {TreeAction::Kind::debug, debuggable, ""};
  if (const auto* best = best_node(tree)) return {TreeAction::Kind::improve, best->node_id, ""};
  if (tree.draft_count() < policy.n_draft) return {TreeAction::Kind::new_draft, std::nullopt, ""};
  if (debuggable) return {TreeAction::Kind::debug, debuggable, ""};
  return {TreeAction::Kind::stop, std::nullopt, "no expandable node"};
}

}  // namespace kolb::tree
