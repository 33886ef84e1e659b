#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/solver.hpp"

namespace tmsgd {

// Grid experiment: methods x (p values x ell values), R replications each.
// Replicate seeds derive from (seed, model cell index, replicate index) only,
// never from the method, so methods within a model cell run with paired
// randomness (same system, same row/mask stream).
struct ExperimentSpec {
  std::string name;
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<double> p_values;
  std::vector<std::size_t> ell_values;
  // "sgd" | "msgd" | "tuple-msgd" | "column-mean" | "knn"
  std::vector<std::string> methods;
  double alpha = 1e-3;
  std::size_t iterations = 0;   // 0 means the 5*m default
  std::size_t replications = 20;
  std::uint64_t seed = 1;
  std::size_t knn_k = 5;
};

void validate_spec(const ExperimentSpec& spec);

// Built-in presets: fig1, fig2, fig3 and their -mini variants (m scaled by
// 1/10 for fast runs). Iteration counts default to 5*m. Step sizes are part
// of the preset and recorded in the emitted spec.json.
ExperimentSpec preset(const std::string& name);
bool is_preset(const std::string& name);

ExperimentSpec spec_from_json(const std::string& json_text);
std::string spec_to_json(const ExperimentSpec& spec);

struct AveragedTrace {
  std::vector<double> mean_errors;
  std::vector<double> per_replicate_final;
};

// Pointwise mean of equal-length traces.
AveragedTrace average_traces(const std::vector<std::vector<double>>& traces);

struct ExperimentResult {
  bool ok = false;
  std::string summary_json;
};

// Writes <out>/spec.json, per-cell rep<r>.csv + mean.csv
// (cell = <method>_p<p>_ell<ell>), summary.json and manifest.json with
// output checksums. Replications run in parallel across up to `workers`
// threads; outputs are identical regardless of scheduling. thin only affects
// rep CSV emission (mean.csv is always full).
ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const std::string& out_dir,
                                std::size_t workers = 1, std::size_t thin = 1);

}  // namespace tmsgd
