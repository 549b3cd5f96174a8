#include <cmath>
#include <regex>
#include <sstream>

#include "kolb/llm/parse.hpp"
#include "kolb/tree/tree.hpp"
#include "kolb/util/error.hpp"
#include "kolb/util/text.hpp"

namespace kolb::tree {
namespace {

std::string fmt_metric(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string resources(const TreeEnv& tenv, int steps) {
  std::ostringstream os;
  os << "Remaining runtime: " << static_cast<long long>(tenv.env.budget.remaining()) << " s of "
     << static_cast<long long>(tenv.env.budget.total()) << " s. Iterations used: " << steps << " of "
     << tenv.policy.n_max << ". Each run is stopped after " << static_cast<long long>(tenv.policy.tau_node) << " s.";
  if (!tenv.metric_hint.empty()) os << " Competition metric: " << tenv.metric_hint << ".";
  return os.str();
}

std::string complete_with_retries(TreeEnv& tenv, const std::string& template_id, const llm::SlotMap& slots,
                                  const llm::ParseSpec& spec, Json* parsed) {
  const auto& tmpl = tenv.env.templates.get(template_id);
  const std::string prompt = llm::render_prompt(tmpl, slots);
  auto reprompt = [&](const std::string& err) {
    return tenv.env.gateway.complete(prompt + "\n\n# Formatting error\nYour previous response could not be used: " +
                                         err + ". Reply again and follow the required output format exactly.",
                                     template_id);
  };
  auto out = llm::parse_structured(tenv.env.gateway.complete(prompt, template_id), spec, reprompt);
  *parsed = out.value;
  return out.raw;
}

std::filesystem::path node_dir(const TreeEnv& tenv, int id) { return tenv.tree_dir / ("node_" + std::to_string(id)); }

// Log line showing the reported value, so the metric has provenance.
std::string metric_source(const std::string& log, double value) {
  static const std::regex number(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)");
  const auto lines = split(log, '\n');
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    for (std::sregex_iterator m(it->begin(), it->end(), number), end; m != end; ++m) {
      double x = 0.0;
      try {
        x = std::stod(m->str());
      } catch (const std::exception&) {
        continue;
      }
      if (std::fabs(x - value) <= 1e-9 * std::max(1.0, std::fabs(value))) return trim(*it);
    }
  }
  return "review";
}

}  // namespace

SolutionNode generate_node(const TreeAction& action, const SolutionTree& tree, TreeEnv& tenv,
                           const std::string& past_submissions, int steps) {
  SolutionNode n;
  llm::SlotMap slots = tenv.env.extra;
  slots["resources"] = resources(tenv, steps);
  slots["data_dir"] = tenv.env.workspace.data_dir;
  if (!slots.count("task")) slots["task"] = "";
  std::string template_id;
  switch (action.kind) {
    case TreeAction::Kind::new_draft:
      n.kind = NodeKind::draft;
      template_id = "tree_draft";
      slots["past_submissions"] = past_submissions;
      break;
    case TreeAction::Kind::improve: {
      const auto& p = tree.node(action.target.value());
      n.kind = NodeKind::improve;
      n.parent = p.node_id;
      template_id = "tree_improve";
      slots["best_code"] = p.code;
      slots["best_metric"] = p.metric ? fmt_metric(p.metric->value) : "unknown";
      break;
    }
    case TreeAction::Kind::debug: {
      const auto& p = tree.node(action.target.value());
      n.kind = NodeKind::debug;
      n.parent = p.node_id;
      n.debug_depth = p.debug_depth + 1;
      template_id = "tree_debug";
      slots["buggy_code"] = p.code;
      slots["error_log"] = p.exec ? p.exec->log() : p.note;
      if (p.exec && !p.note.empty()) slots["error_log"] = p.note + "\n" + slots["error_log"];
      break;
    }
    case TreeAction::Kind::stop:
      throw ConfigError("generate_node called with a stop action");
  }
  llm::ParseSpec spec;
  spec.kind = llm::ParseKind::fenced_code_block;
  try {
    Json parsed;
    complete_with_retries(tenv, template_id, slots, spec, &parsed);
    n.code = parsed.get<std::string>();
  } catch (const FormatError& e) {
    n.status = NodeStatus::buggy;
    n.note = "format failure: " + std::string(e.what());
  }
  return n;
}

void record_result(SolutionNode& node, TreeEnv& tenv) {
  if (!node.exec) throw ConfigError("record_result on a node that was not executed");
  const auto& r = *node.exec;
  node.metric.reset();
  if (r.timed_out) {
    node.status = NodeStatus::buggy;
    node.note = "timeout: execution exceeded " + fmt_metric(tenv.policy.tau_node) + " s and was killed";
    return;
  }
  if (r.exit_status != 0) {
    node.status = NodeStatus::buggy;
    node.note = "exit status " + std::to_string(r.exit_status);
    return;
  }
  llm::ParseSpec spec;
  spec.kind = llm::ParseKind::structured_mapping;
  spec.required_keys = {"success"};
  spec.validate = [](const Json& j) -> std::optional<std::string> {
    if (!j.at("success").is_boolean()) return "\"success\" must be a boolean";
    if (j.contains("direction") && !j.at("direction").is_null()) {
      const auto d = j.at("direction");
      if (!d.is_string() || (d != "maximize" && d != "minimize")) return "\"direction\" must be maximize or minimize";
    }
    return std::nullopt;
  };
  llm::SlotMap slots = tenv.env.extra;
  slots["exec_log"] = r.log();
  Json review;
  try {
    complete_with_retries(tenv, "tree_review", slots, spec, &review);
  } catch (const FormatError& e) {
    node.status = NodeStatus::buggy;
    node.note = "review unparseable: " + std::string(e.what());
    return;
  }
  if (!review.at("success").get<bool>()) {
    node.status = NodeStatus::buggy;
    node.note = "review: run failed";
    return;
  }
  if (!node.submission) {
    node.status = NodeStatus::buggy;
    node.note = "submission.csv was not written";
    return;
  }
  node.status = NodeStatus::valid;
  const Json m = review.value("metric", Json());
  const Json d = review.value("direction", Json());
  if (m.is_number() && std::isfinite(m.get<double>()) && d.is_string()) {
    node.metric = MetricReading{m.get<double>(), core::parse_direction(d.get<std::string>()),
                                metric_source(r.log(), m.get<double>())};
  } else {
    node.note = "valid without a parseable metric";
  }
}

void evaluate_node(SolutionNode& node, SolutionTree& tree, TreeEnv& tenv) {
  if (node.status != NodeStatus::unevaluated) return;
  const auto dir = node_dir(tenv, node.node_id);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "solution.py", node.code);
  const auto produced = tenv.env.workspace.path("submission.csv");
  std::filesystem::remove(produced);
  scaffold::ScaffoldEnv run_env = tenv.env;
  run_env.exec_time_cap = tenv.policy.tau_node;
  node.exec = run_env.run(node.code, {{"KOLB_SCRIPT", "_node_" + std::to_string(node.node_id) + ".py"}});
  if (std::filesystem::exists(produced)) {
    std::filesystem::rename(produced, dir / "submission.csv");
    node.submission = "node_" + std::to_string(node.node_id) + "/submission.csv";
  }
  record_result(node, tenv);
  if (node.metric && tree.direction() && node.metric->direction != *tree.direction()) {
    node.note = "metric direction disagrees with the tree; not used for selection";
  }
  tree.update(node, tenv.policy.max_debug_depth);
}

std::vector<int> seed_drafts(SolutionTree& tree, const AbstractionSeed& seeds, TreeEnv& tenv) {
  std::vector<int> ids;
  const std::string past = render_past_submissions(seeds);
  while (tree.draft_count() < tenv.policy.n_draft && static_cast<int>(tree.size()) < tenv.policy.n_max) {
    auto n = generate_node({TreeAction::Kind::new_draft, std::nullopt, ""}, tree, tenv, past,
                           static_cast<int>(tree.size()));
    ids.push_back(tree.add(std::move(n), tenv.policy.max_debug_depth));
  }
  return ids;
}

int expand_node(const TreeAction& action, SolutionTree& tree, TreeEnv& tenv, int steps) {
  auto n = generate_node(action, tree, tenv, "", steps);
  const int id = tree.add(n, tenv.policy.max_debug_depth);
  SolutionNode stored = tree.node(id);
  evaluate_node(stored, tree, tenv);
  return id;
}

SearchResult run_search(const AbstractionSeed& seeds, TreeEnv& tenv) {
  tenv.policy.validate();
  std::filesystem::create_directories(tenv.tree_dir);
  SearchResult res;
  std::mt19937_64 rng(tenv.policy.rng_seed);
  seed_drafts(res.tree, seeds, tenv);
  for (std::size_t i = 0; i < res.tree.size(); ++i) {
    if (res.tree.nodes()[i].status != NodeStatus::unevaluated) continue;
    if (tenv.env.budget.remaining() < 2.0 * tenv.policy.tau_node) {
      res.stop_reason = "remaining runtime below the reserve";
      break;
    }
    SolutionNode n = res.tree.nodes()[i];
    evaluate_node(n, res.tree, tenv);
  }
  res.steps = static_cast<int>(res.tree.size());
  while (res.stop_reason.empty()) {
    auto action = select_next_action(res.tree, tenv.policy, rng, res.steps, tenv.env.budget.remaining());
    if (action.kind == TreeAction::Kind::stop) {
      res.stop_reason = action.reason;
      break;
    }
    expand_node(action, res.tree, tenv, res.steps);
    ++res.steps;
  }
  res.tree.save(tenv.tree_dir / "tree.jsonl");
  const auto sub_dir = tenv.tree_dir / "submissions";
  std::filesystem::create_directories(sub_dir);
  int rank = 0;
  for (const auto* n : top_nodes(res.tree, tenv.policy.retained)) {
    auto dst = sub_dir / ("rank" + std::to_string(++rank) + "_node" + std::to_string(n->node_id) + ".csv");
    std::filesystem::copy_file(tenv.tree_dir / *n->submission, dst, std::filesystem::copy_options::overwrite_existing);
    res.exported.push_back(dst);
  }
  return res;
}

}  // namespace kolb::tree
