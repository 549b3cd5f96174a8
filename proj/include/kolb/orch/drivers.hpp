#pragma once

namespace kolb::orch {

// Engine-side Python run in the workspace. Neither carries sim tags; the
// caller prepends the tags naming the run.
extern const char* const kTrainDriver;
extern const char* const kTabularBaseline;

}  // namespace kolb::orch
