#pragma once

#include <string>
#include <vector>

#include "groundlex/lattice.hpp"
#include "groundlex/param_table.hpp"

namespace groundlex {

// One training pair: a clip (by index into the clip list) and a sentence
// known to be true of it.
struct TrainSample {
  int clip_index = 0;
  SentenceTemplate sentence;
};

struct MlConfig {
  int max_iterations = 50;
  double tolerance = 1e-6;  // relative log-likelihood change
  double prob_floor = kProbFloor;
  int jobs = 1;
};

struct ObjectiveResult {
  double value = 0.0;
  std::vector<int> offending;  // sample indices with log-zero scores
};

// Joint log-likelihood of the corpus: sum of per-sample forward scores.
ObjectiveResult ml_objective(const std::vector<VideoClip>& clips,
                             const std::vector<TrainSample>& samples,
                             const Lexicon& lexicon,
                             const ScoringConfig& scoring, int jobs = 1);

// Adds the sentence's posterior tables into per-entry expected counts,
// scaled by `weight`. Occurrences of the same entry in several word slots
// (or sentences) pool together.
void accumulate_counts(ParamTable& counts, const Posteriors& posterior,
                       const SentenceTemplate& sentence, double weight);

struct BwStepResult {
  Lexicon lexicon;
  double objective = 0.0;  // log-likelihood of the *input* lexicon
  std::vector<std::string> untouched;  // distributions left unchanged
};

// One expected-count reestimation sweep. Distributions with zero pooled
// occupancy are left unchanged and flagged.
BwStepResult bw_step(const std::vector<VideoClip>& clips,
                     const std::vector<TrainSample>& samples,
                     const Lexicon& lexicon, const ScoringConfig& scoring,
                     const MlConfig& config);

struct MlTrainResult {
  Lexicon lexicon;
  std::vector<double> trace;  // objective before each accepted sweep
  bool converged = false;
  int iterations = 0;
};

MlTrainResult train_ml(const std::vector<VideoClip>& clips,
                       const std::vector<TrainSample>& samples,
                       const Lexicon& initial, const MlConfig& config,
                       const ScoringConfig& scoring);

}  // namespace groundlex
