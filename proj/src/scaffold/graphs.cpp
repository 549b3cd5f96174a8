#include "kolb/scaffold/scaffold.hpp"

namespace kolb::scaffold {

using core::ActionKind;
using core::IntrinsicKind;
using core::IntrinsicStep;

namespace {

const IntrinsicStep kPlan{"plan", IntrinsicKind::plan, "plan_stage", "stage_plan"};
const IntrinsicStep kIdentify{"identify", IntrinsicKind::identify, "identify_stage", "stage_identify"};

struct ModalityInfo {
  const char* tag;   // file-name infix
  const char* name;  // human name
  bool Modalities::*flag;
};
constexpr ModalityInfo kModalities[] = {
    {"tab", "tabular", &Modalities::tabular},
    {"img", "image", &Modalities::image},
    {"txt", "text", &Modalities::text},
};

Applicability has(bool Modalities::*flag) {
  return [flag](const Modalities& m) { return m.*flag; };
}

StageSpec code_stage(std::string id, StageKind kind, Phase phase, std::string unit_test, std::string code_file,
                     std::string instructions, int budget) {
  StageSpec s;
  s.stage_id = std::move(id);
  s.name = kind;
  s.phase = phase;
  s.intrinsic_chain = {kPlan};
  s.action_kind = ActionKind::emit_code;
  s.action_template = "write_stage_code";
  s.unit_test_id = std::move(unit_test);
  s.code_file = std::move(code_file);
  s.instructions = std::move(instructions);
  s.retry_budget = budget;
  return s;
}

std::string map_instructions(const std::string& split, const ModalityInfo& m) {
  std::string file = input_map_name(split, m.tag);
  std::string body = "Create `" + file + "` from the " + split + " split. The first column must be named \"id\" " +
                     "and hold a unique identifier per sample; the same identifiers must be used by every other map " +
                     "of this split. ";
  if (std::string(m.tag) == "img") {
    body += "The subsequent columns are the paths to the " + split +
            " input images, relative to the working directory. Do not include target columns.";
  } else {
    body += std::string("The subsequent columns are the ") + m.name + " input features of the " + split +
            " set. Do not include target columns.";
  }
  return body + " Save it with index=False.";
}

}  // namespace

StageGraph workspace_graph(const GraphOptions& options) {
  const int budget = options.stage_retry_budget;
  StageGraph g;
  g.add_group(MetaGroup{"train_maps", "join:train", options.group_retry_budget, false});
  g.add_group(MetaGroup{"test_maps", "join:test", options.group_retry_budget, false});

  StageSpec understanding;
  understanding.stage_id = "competition_understanding";
  understanding.name = StageKind::competition_understanding;
  understanding.intrinsic_chain = {{"summarise", IntrinsicKind::summarise, "summarise_competition", "competition_notes"}};
  understanding.action_kind = ActionKind::emit_structured;
  understanding.action_template = "understand_competition";
  understanding.retry_budget = budget;
  understanding.outputs = {"summary_task.md", "summary_data.md"};
  g.add(understanding);

  StageSpec modality;
  modality.stage_id = "modality_identification";
  modality.name = StageKind::modality_identification;
  modality.intrinsic_chain = {{"think", IntrinsicKind::think, "think_modalities", "modality_analysis"},
                              {"summarise", IntrinsicKind::summarise, "plan_setup", "setup_plan"}};
  modality.action_kind = ActionKind::emit_structured;
  modality.action_template = "detect_modalities";
  modality.retry_budget = budget;
  modality.outputs = {"summary_plan.md"};
  g.add(modality);

  for (const auto& m : kModalities) {
    std::string file = input_map_name("train", m.tag);
    std::string test = (std::string(m.tag) == "img" ? "image_map:" : "map:") + file;
    StageSpec s = code_stage("train_" + std::string(m.tag) + "_input_map", StageKind::create_maps, Phase::workspace,
                             test, "code_" + file.substr(0, file.size() - 4) + ".py", map_instructions("train", m),
                             budget);
    s.applicable_when = has(m.flag);
    s.group_id = "train_maps";
    s.outputs = {file};
    g.add(s);
  }
  {
    std::string file = target_map_name("train");
    StageSpec s = code_stage("train_target_map", StageKind::create_maps, Phase::workspace, "map:" + file,
                             "code_" + file.substr(0, file.size() - 4) + ".py",
                             "Create `" + file +
                                 "` holding the training targets. The first column must be named \"id\" and use the "
                                 "same identifiers as the input maps; the remaining columns are the target columns "
                                 "exactly as they appear in the raw data. Save it with index=False.",
                             budget);
    s.group_id = "train_maps";
    s.outputs = {file};
    g.add(s);
  }
  {
    StageSpec s = code_stage(
        "target_transform", StageKind::create_target_transform, Phase::workspace,
        "transform_roundtrip:" + target_map_name("train"), kTransformCode,
        "Write a Python module defining `transform(df)` and `inverse_transform(df)`. `transform` maps the target "
        "columns of a DataFrame (no id column) into a representation suitable for training; `inverse_transform` "
        "maps it back so that inverse_transform(transform(df)) reproduces df exactly, column names included. "
        "Do not run anything at import time.",
        budget);
    s.intrinsic_chain = {kIdentify, kPlan};
    s.execute_code = false;
    s.group_id = "train_maps";
    s.outputs = {kTransformCode};
    g.add(s);
  }
  for (const auto& m : kModalities) {
    std::string file = input_map_name("test", m.tag);
    std::string test = (std::string(m.tag) == "img" ? "image_map:" : "map:") + file;
    StageSpec s = code_stage("test_" + std::string(m.tag) + "_input_map", StageKind::create_maps, Phase::workspace,
                             test, "code_" + file.substr(0, file.size() - 4) + ".py", map_instructions("test", m),
                             budget);
    s.applicable_when = has(m.flag);
    s.group_id = "test_maps";
    s.outputs = {file};
    g.add(s);
  }
  {
    StageSpec s = code_stage(
        "submission_format", StageKind::create_submission_format, Phase::workspace, "submission_format:", kSubmissionFormatCode,
        "Write a Python module defining `format_submission(preds)`. `preds` is a DataFrame with an \"id\" column and "
        "one column per target, in the original target format. Return a DataFrame with exactly the columns, column "
        "order and ids of the sample submission. Do not run anything at import time.",
        budget);
    s.execute_code = false;
    s.outputs = {kSubmissionFormatCode};
    g.add(s);
  }
  {
    StageSpec s = code_stage(
        "metric", StageKind::select_metric, Phase::workspace, "metric:" + target_map_name("train"), kMetricCode,
        "Write a Python module defining `metric(y_true, y_pred)` implementing the competition's evaluation metric. "
        "Both arguments are DataFrames of target columns without the id column. Return a float. Do not run anything "
        "at import time.",
        budget);
    s.execute_code = false;
    s.outputs = {kMetricCode};
    g.add(s);
  }
  return g;
}

StageSpec solution_summary_stage(const std::string& stage_id, int retry_budget) {
  StageSpec s;
  s.stage_id = stage_id;
  s.name = StageKind::create_solution_summary;
  s.phase = Phase::solution;
  s.intrinsic_chain = {{"summarise", IntrinsicKind::summarise, "summarise_solution", "solution_summary_draft"}};
  s.action_kind = ActionKind::emit_text;
  s.action_template = "output_solution_summary";
  s.retry_budget = retry_budget;
  return s;
}

StageSpec ensemble_stage(int retry_budget) {
  StageSpec s;
  s.stage_id = "ensemble";
  s.name = StageKind::ensemble;
  s.phase = Phase::solution;
  s.intrinsic_chain = {{"think", IntrinsicKind::think, "think_ensemble", "ensemble_analysis"}};
  s.action_kind = ActionKind::select_subset;
  s.action_template = "select_ensemble";
  s.retry_budget = retry_budget;
  return s;
}

StageGraph solution_design_graph(const GraphOptions& options, int round) {
  const int budget = options.stage_retry_budget;
  const std::string sfx = "_r" + std::to_string(round);
  StageGraph g;
  auto check = [](const std::string& id) { return "_check_" + id + ".json"; };
  auto design = [&](const std::string& base, StageKind kind, const std::string& what) {
    std::string id = base + sfx;
    std::string module = "code_" + base + ".py";
    StageSpec s = code_stage(id, kind, Phase::solution, "outputs:" + check(base), module,
                             what + " Save nothing else at import time; when run as a script it must smoke-test "
                                    "itself on a small batch from the maps and write `" +
                                 check(base) + "` with a JSON summary of the output shapes.",
                             budget);
    s.outputs = {module, check(base)};
    return s;
  };
  for (const auto& m : kModalities) {
    std::string tag = m.tag;
    StageSpec fe = design("feature_engineering_" + tag, StageKind::feature_engineering,
                          std::string("Write the ") + m.name + " preprocessing (feature engineering or augmentation) "
                                                               "applied before the embedder, as `transform(df)` "
                                                               "returning a numeric array.");
    fe.applicable_when = has(m.flag);
    g.add(fe);
    StageSpec emb = design("embedder_" + tag, StageKind::create_embedders,
                           std::string("Write a PyTorch module embedding the ") + m.name +
                               " inputs of a batch into a fixed-size vector. Define `make_embedder(example)` "
                               "returning the module with an integer `out_dim` attribute.");
    emb.applicable_when = has(m.flag);
    g.add(emb);
  }
  StageSpec imbalance = design("class_imbalance", StageKind::class_imbalance,
                               "Identify whether the targets are imbalanced and write the loss weighting or sampling "
                               "strategy to use during training, as `sample_weights(targets_df)` returning one weight per "
                               "row or None.");
  imbalance.intrinsic_chain = {kIdentify, kPlan};
  g.add(imbalance);
  g.add(design("model_head", StageKind::create_model_head,
               "Write the model head mapping the concatenated embeddings to the targets: "
               "`make_head(in_dim, n_targets)` returning a module and `loss_fn(pred, target)`."));
  g.add(solution_summary_stage("solution_summary" + sfx, budget));
  return g;
}

}  // namespace kolb::scaffold
