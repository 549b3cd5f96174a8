#include "kolb/orch/config.hpp"

#include <set>

#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"

namespace kolb::orch {

std::string to_string(CompetitionClass c) {
  switch (c) {
    case CompetitionClass::tabular: return "tabular";
    case CompetitionClass::cv: return "cv";
    case CompetitionClass::nlp: return "nlp";
  }
  return "tabular";
}

CompetitionClass parse_competition_class(const std::string& s) {
  if (s == "tabular") return CompetitionClass::tabular;
  if (s == "cv" || s == "image") return CompetitionClass::cv;
  if (s == "nlp" || s == "text") return CompetitionClass::nlp;
  throw ConfigError("unknown competition class: " + s);
}

double BudgetPolicy::total(CompetitionClass c) const {
  return c == CompetitionClass::tabular ? tabular_total : deep_total;
}

double BudgetPolicy::scaffold_share(CompetitionClass c) const {
  return c == CompetitionClass::tabular ? tabular_scaffold : deep_scaffold;
}

double BudgetPolicy::open_ended_share(CompetitionClass c) const { return total(c) - scaffold_share(c); }

void BudgetPolicy::validate() const {
  if (!(scale > 0.0)) throw ConfigError("budget.scale must be > 0");
  if (!(tabular_scaffold >= 0.0 && tabular_scaffold <= tabular_total)) {
    throw ConfigError("budget.tabular_scaffold must lie within budget.tabular_total");
  }
  if (!(deep_scaffold >= 0.0 && deep_scaffold <= deep_total)) {
    throw ConfigError("budget.deep_scaffold must lie within budget.deep_total");
  }
  if (!(grace >= 0.0)) throw ConfigError("budget.grace must be >= 0");
  const auto& t = training;
  if (t.n_trials < 1 || t.k_folds < 2 || t.max_epochs < 1 || !(t.max_time > 0.0) || t.blend_after < 2 ||
      t.tta_rounds < 0 || t.batch_size < 1) {
    throw ConfigError("training caps need n_trials >= 1, k_folds >= 2, max_epochs >= 1, max_time > 0, "
                      "blend_after >= 2, batch_size >= 1");
  }
  if (!(t.lr_min > 0.0 && t.lr_min < t.lr_max)) throw ConfigError("training.lr range must satisfy 0 < lr_min < lr_max");
  if (t.optimizers.empty()) throw ConfigError("training.optimizers must not be empty");
}

Json BudgetPolicy::to_json() const {
  const auto& t = training;
  return Json{{"tabular_total", tabular_total},
              {"tabular_scaffold", tabular_scaffold},
              {"deep_total", deep_total},
              {"deep_scaffold", deep_scaffold},
              {"grace", grace},
              {"scale", scale},
              {"training",
               {{"max_epochs", t.max_epochs},
                {"max_time", t.max_time},
                {"batch_size", t.batch_size},
                {"n_trials", t.n_trials},
                {"k_folds", t.k_folds},
                {"blend_after", t.blend_after},
                {"tta_rounds", t.tta_rounds},
                {"lr_min", t.lr_min},
                {"lr_max", t.lr_max},
                {"optimizers", t.optimizers}}}};
}

namespace {

std::string file_digest(const std::filesystem::path& p) {
  if (p.empty()) return "";
  if (!std::filesystem::exists(p)) return "missing";
  return sha256_hex(read_text_file(p));
}

// Reads the keys of `j` through `fn`, rejecting any it did not consume.
template <class Fn>
void read_section(const Json& j, const std::string& where, Fn fn) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> used;
  auto get = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    used.insert(key);
    try {
      out = j.at(key).get<std::decay_t<decltype(out)>>();
    } catch (const Json::exception&) {
      throw ConfigError(where + "." + key + " has the wrong type");
    }
  };
  fn(get, used);
  for (const auto& [k, v] : j.items()) {
    if (!used.count(k)) throw ConfigError("unknown configuration key " + where + "." + k);
  }
}

}  // namespace

Json RunConfig::to_json() const {
  return Json{{"provider", provider.to_json()},
              {"cassette", {{"mode", to_string(cassette_mode)}, {"path", cassette_path.string()}}},
              {"seed", seed},
              {"budget", budget.to_json()},
              {"graph",
               {{"stage_retry_budget", graph.stage_retry_budget}, {"group_retry_budget", graph.group_retry_budget}}},
              {"search",
               {{"strategy", search.strategy},
                {"solution_rounds", search.solution_rounds},
                {"tool_runs", search.tool_runs},
                {"blend_method", eval::to_string(search.blend_method)},
                {"p_debug", search.p_debug},
                {"n_draft", search.n_draft},
                {"max_debug_depth", search.max_debug_depth},
                {"n_max", search.n_max}}},
              {"executor",
               {{"kind", executor},
                {"sim_script", sim_script.string()},
                {"interpreter", interpreter},
                {"confine_writes", confine_writes}}},
              {"tabular_tool", tabular_tool.string()},
              {"run_dir", run_dir.string()}};
}

std::string RunConfig::digest() const {
  Json j = to_json();
  // Location-independent: files by content, run_dir dropped. The cassette
  // is transport, so recording and replaying share a digest.
  j.erase("cassette");
  j["executor"]["sim_script"] = file_digest(sim_script);
  j["tabular_tool"] = file_digest(tabular_tool);
  j.erase("run_dir");
  j["provider"] = provider.digest();
  return sha256_hex(canonical_dump(j));
}

RunConfig RunConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  auto path_of = [&](const std::string& s) -> std::filesystem::path {
    if (s.empty()) return {};
    std::filesystem::path p(s);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  read_section(j, "config", [&](auto& get, std::set<std::string>& used) {
    if (j.contains("provider")) {
      used.insert("provider");
      c.provider = llm::ProviderConfig::from_json(j.at("provider"));
      if (!c.provider.script_path.empty()) c.provider.script_path = path_of(c.provider.script_path).string();
    }
    if (j.contains("cassette")) {
      used.insert("cassette");
      read_section(j.at("cassette"), "cassette", [&](auto& g, auto&) {
        std::string mode = to_string(c.cassette_mode), path;
        g("mode", mode);
        g("path", path);
        c.cassette_mode = llm::parse_cassette_mode(mode);
        c.cassette_path = path_of(path);
      });
    }
    get("seed", c.seed);
    if (j.contains("budget")) {
      used.insert("budget");
      read_section(j.at("budget"), "budget", [&](auto& g, std::set<std::string>& u) {
        g("tabular_total", c.budget.tabular_total);
        g("tabular_scaffold", c.budget.tabular_scaffold);
        g("deep_total", c.budget.deep_total);
        g("deep_scaffold", c.budget.deep_scaffold);
        g("grace", c.budget.grace);
        g("scale", c.budget.scale);
        const Json& b = j.at("budget");
        if (b.contains("training")) {
          u.insert("training");
          auto& t = c.budget.training;
          read_section(b.at("training"), "budget.training", [&](auto& gt, auto&) {
            gt("max_epochs", t.max_epochs);
            gt("max_time", t.max_time);
            gt("batch_size", t.batch_size);
            gt("n_trials", t.n_trials);
            gt("k_folds", t.k_folds);
            gt("blend_after", t.blend_after);
            gt("tta_rounds", t.tta_rounds);
            gt("lr_min", t.lr_min);
            gt("lr_max", t.lr_max);
            gt("optimizers", t.optimizers);
          });
        }
      });
    }
    if (j.contains("graph")) {
      used.insert("graph");
      read_section(j.at("graph"), "graph", [&](auto& g, auto&) {
        g("stage_retry_budget", c.graph.stage_retry_budget);
        g("group_retry_budget", c.graph.group_retry_budget);
      });
    }
    if (j.contains("search")) {
      used.insert("search");
      read_section(j.at("search"), "search", [&](auto& g, auto&) {
        std::string blend = eval::to_string(c.search.blend_method);
        g("strategy", c.search.strategy);
        g("solution_rounds", c.search.solution_rounds);
        g("tool_runs", c.search.tool_runs);
        g("blend_method", blend);
        g("p_debug", c.search.p_debug);
        g("n_draft", c.search.n_draft);
        g("max_debug_depth", c.search.max_debug_depth);
        g("n_max", c.search.n_max);
        c.search.blend_method = eval::parse_blend_method(blend);
      });
    }
    if (j.contains("executor")) {
      used.insert("executor");
      read_section(j.at("executor"), "executor", [&](auto& g, auto&) {
        std::string sim;
        g("kind", c.executor);
        g("sim_script", sim);
        g("interpreter", c.interpreter);
        g("confine_writes", c.confine_writes);
        c.sim_script = path_of(sim);
      });
    }
    std::string tool, run_dir = c.run_dir.string();
    get("tabular_tool", tool);
    get("run_dir", run_dir);
    c.tabular_tool = path_of(tool);
    c.run_dir = path_of(run_dir);
  });
  if (c.executor != "process" && c.executor != "simulated") {
    throw ConfigError("executor.kind must be process or simulated");
  }
  if (c.executor == "simulated" && c.sim_script.empty()) throw ConfigError("executor.sim_script is required");
  if (c.search.strategy != "random" && c.search.strategy != "local") {
    throw ConfigError("search.strategy must be random or local");
  }
  if (c.search.solution_rounds < 1 || c.search.tool_runs < 1) {
    throw ConfigError("search.solution_rounds and search.tool_runs must be >= 1");
  }
  c.budget.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void apply_cassette_flag(RunConfig& cfg, const std::string& flag) {
  const auto colon = flag.find(':');
  if (colon == std::string::npos) throw ConfigError("--cassette expects <mode>:<path>");
  cfg.cassette_mode = llm::parse_cassette_mode(flag.substr(0, colon));
  cfg.cassette_path = flag.substr(colon + 1);
  if (cfg.cassette_path.empty() && cfg.cassette_mode != llm::CassetteMode::passthrough) {
    throw ConfigError("--cassette needs a path for " + flag.substr(0, colon));
  }
}

}  // namespace kolb::orch
