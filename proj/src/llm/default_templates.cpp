#include "kolb/llm/prompt_template.hpp"

namespace kolb::llm {
namespace {

struct Builtin {
  const char* id;
  const char* body;
};

// Stage prompts receive the slots built by the scaffold: stage_name,
// stage_instructions, data_listing, the stage's scratch outputs and the
// windowed history of earlier attempts.
constexpr Builtin kBuiltins[] = {
    {"summarise_competition",
     R"(You are preparing to solve a data-science competition.

# Competition description
{task}

# Files in the data directory
{data_listing}

Summarise the objective, the evaluation metric, the submission format and the structure of
the data (files, columns, identifiers, targets).)"},

    {"understand_competition",
     R"(# Notes on the competition
{competition_notes}

Turn the notes into two summaries. Reply with a JSON object with exactly the keys
"task_summary" (objective, evaluation metric, submission format) and
"data_summary" (files, columns, identifiers, targets).)"},

    {"think_modalities",
     R"(# Competition
{summaries}

# Files in the data directory
{data_listing}

Think step by step about which input modalities (tabular columns, image files, free text)
the training data contains and which columns hold identifiers and targets.)"},

    {"plan_setup",
     R"(# Competition
{summaries}

# Modality analysis
{modality_analysis}

Write a short plan for preparing the workspace: which input maps, target map, target
transform, submission format and metric implementation are needed.)"},

    {"detect_modalities",
     R"(# Modality analysis
{modality_analysis}

Reply with a JSON object with boolean keys "tabular", "image" and "text" stating which
input modalities are present.)"},

    {"plan_stage",
     R"(# Competition
{summaries}

# Current stage: {stage_name}
{stage_instructions}

# Previous attempts at this stage
{history}

Plan how to complete this stage. Be concrete about file names and columns.)"},

    {"identify_stage",
     R"(# Current stage: {stage_name}
{stage_instructions}

# Files in the data directory
{data_listing}

Identify the exact files, columns and identifiers this stage must read and write.)"},

    {"write_stage_code",
     R"(# Competition
{summaries}

# Current stage: {stage_name}
{stage_instructions}

# Plan
{stage_plan}

# Relevant inputs
{stage_identify}

# Previous attempts at this stage
{history}

# Analysis of the last error
{error_analysis}

Write one self-contained Python script that completes the stage. Paths are relative to the
working directory; the raw data is under {data_dir}. Reply with the script in a single
```python fenced block.)"},

    {"analyse_error",
     R"(# Current stage: {stage_name}

# Code that failed
```python
{last_code}
```

# Error output
{last_error}

Explain the root cause of the failure and how the next attempt should fix it.)"},

    {"summarise_solution",
     R"(# Competition
{summaries}

# Solution code
```python
{last_code}
```

# Validation output
{last_log}

Summarise the approach of this solution step by step: preprocessing, model, training
schedule and the validation result.)"},

    {"output_solution_summary",
     R"(# Draft summary
{solution_summary_draft}

Condense the summary into a short chain of reasoning that a later attempt can reuse as
guidance. Reply with plain text only.)"},

    {"think_ensemble",
     R"(# Competition
{summaries}

# Candidate solutions
{candidates}

Reason about which candidates are complementary and worth blending.)"},

    {"select_ensemble",
     R"(# Candidate solutions
{candidates}

# Analysis
{ensemble_analysis}

Reply with a JSON object {"selected": [candidate ids], "method": "mean" | "weighted_fit" | "small_network"}.)"},

    {"tree_draft",
     R"(# Competition
{task}
{past_submissions}
# Resources
{resources}

Write a complete Python solution that trains a model, prints the validation metric as
"Validation <metric name>: <value>" and writes submission.csv in the sample-submission
format. The raw data is under {data_dir}. Reply with the script in a single ```python
fenced block.)"},

    {"tree_improve",
     R"(# Competition
{task}

# Resources
{resources}

# Best solution so far (validation metric {best_metric})
```python
{best_code}
```

Propose one concrete improvement and write the full improved script. Keep printing the
validation metric and writing submission.csv. Reply with a single ```python fenced block.)"},

    {"tree_debug",
     R"(# Competition
{task}

# Resources
{resources}

# Buggy implementation
```python
{buggy_code}
```

# Error message
{error_log}

Fix the bug and write the full corrected script. Reply with a single ```python fenced block.)"},

    {"tree_review",
     R"(# Execution log
{exec_log}

Decide whether the run succeeded and, if so, which validation metric it reports. Reply with a
JSON object with keys "success" (boolean), "metric" (number or null) and "direction"
("maximize" or "minimize").)"},
};

}  // namespace

TemplateCatalog TemplateCatalog::with_defaults() {
  TemplateCatalog catalog;
  for (const auto& b : kBuiltins) catalog.add(PromptTemplate(b.id, b.body));
  return catalog;
}

}  // namespace kolb::llm
