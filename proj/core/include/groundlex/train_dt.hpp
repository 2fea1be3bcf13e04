#pragma once

#include <string>
#include <vector>

#include "groundlex/train_ml.hpp"

namespace groundlex {

// Which score enters the discrimination machinery: the raw video-sentence
// score, or the per-frame-normalized score with the sentence prior.
enum class ScoreKind { kRaw, kNormalized };

// One discriminative training sample: a clip plus its competition set.
struct DtSample {
  int clip_index = 0;
  CompetitionSet competition;
};

struct DtConfig {
  int max_iterations = 100;
  double tolerance = 1e-6;     // relative objective change at acceptance
  int max_retries = 30;        // damping escalations per iteration
  double punishment = 2.0;     // step-shrink factor after a failed iteration
  double damping_floor = 1e-4; // used when the previous damping was zero
  double prob_floor = kProbFloor;
  enum class Optimizer { kGrowthTransform, kExtendedBaumWelch };
  Optimizer optimizer = Optimizer::kGrowthTransform;
  int jobs = 1;
};

// Sum over samples of (positive log score - log sum of competition scores),
// with raw scores; always <= 0.
ObjectiveResult discrimination_objective(const std::vector<VideoClip>& clips,
                                         const std::vector<DtSample>& samples,
                                         const Lexicon& lexicon,
                                         const ScoringConfig& scoring,
                                         int jobs = 1);

// Same with per-frame-normalized scores (the smoother objective).
ObjectiveResult smoothed_objective(const std::vector<VideoClip>& clips,
                                   const std::vector<DtSample>& samples,
                                   const Lexicon& lexicon,
                                   const ScoringConfig& scoring, int jobs = 1);

// Discrimination weight per sentence in the competition set:
// 1 for the positive minus the sentence's share of the total score mass.
// Weights sum to zero over the set.
std::vector<double> discrimination_weights(const std::vector<VideoClip>& clips,
                                           const DtSample& sample,
                                           const Lexicon& lexicon,
                                           const ScoringConfig& scoring,
                                           ScoreKind kind);

// Gradient of the discrimination objective with respect to every raw
// parameter (no sum-to-one projection). kNormalized differentiates the
// smoothed objective, kRaw the plain one.
ParamTable gradient(const std::vector<VideoClip>& clips,
                    const std::vector<DtSample>& samples,
                    const Lexicon& lexicon, const ScoringConfig& scoring,
                    ScoreKind kind, const ParamLayout& layout, int jobs = 1);

// Per-distribution damping constants with the adaptive schedule: after a
// successful iteration the damping is the smallest value keeping the update
// nonnegative; after a failure the previous damping is multiplied up.
struct DampingState {
  std::vector<double> row_damping;  // per distribution
  int iteration = 0;                // index of the previous iteration (w)
  int last_success = 0;             // last iteration that grew the objective (y)
  double punishment = 2.0;
  double floor = 1e-4;
};

DampingState make_damping(const ParamLayout& layout, const DtConfig& config);
DampingState adapt_damping(const DampingState& damping,
                           const ParamTable& gradient);

// Multiplicative reestimation: each parameter is scaled by (gradient + C)
// and the distribution renormalized. Rows with an all-zero gradient are
// copied verbatim.
struct ReestimateOutcome {
  Lexicon lexicon;
  bool ok = true;
  std::string failure;
};
ReestimateOutcome reestimate(const Lexicon& previous, const ParamTable& gradient,
                             const std::vector<double>& row_damping,
                             double prob_floor);

struct GtStepResult {
  Lexicon lexicon;
  bool accepted = false;
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::string note;
};

// One growth-transformation step against the smoothed objective; rejected
// steps leave the lexicon unchanged and report why.
GtStepResult gt_step(const std::vector<VideoClip>& clips,
                     const std::vector<DtSample>& samples,
                     const Lexicon& lexicon, const ParamTable& gradient_table,
                     const std::vector<double>& row_damping,
                     const ScoringConfig& scoring, double prob_floor,
                     int jobs = 1);

// One extended Baum-Welch step against the raw objective. Throws TrainError
// if the damping constants fail to keep the update nonnegative.
Lexicon ebw_step(const std::vector<VideoClip>& clips,
                 const std::vector<DtSample>& samples, const Lexicon& lexicon,
                 const std::vector<double>& row_damping,
                 const ScoringConfig& scoring, double prob_floor, int jobs = 1);

struct DtIterationRecord {
  int iteration = 0;
  double objective = 0.0;
  bool accepted = false;
  int retries = 0;
  double max_damping = 0.0;
};

struct DtTrainResult {
  Lexicon lexicon;
  std::vector<DtIterationRecord> trace;
  bool converged = false;
  double objective = 0.0;
};

DtTrainResult train_dt(const std::vector<VideoClip>& clips,
                       const std::vector<DtSample>& samples,
                       const Lexicon& initial, const DtConfig& config,
                       const ScoringConfig& scoring);

// Builds competition sets for the restricted-grammar positives of each
// training clip: the negative population is the restricted enumeration minus
// the clip's positives, sampled without replacement. The sample size is
// negative_count, lowered to the population size when the population is
// smaller.
std::vector<DtSample> build_competition_sets(
    const std::vector<VideoClip>& clips,
    const std::vector<std::vector<SentenceTemplate>>& positives,
    const GrammarSpec& grammar, const Lexicon& lexicon, int negative_count,
    std::uint64_t seed);

struct TwoPhaseConfig {
  int negative_count = 47;
  std::uint64_t seed = 0;
  DtConfig dt;
  MlConfig ml;
};

struct TwoPhaseResult {
  Lexicon lexicon;
  DtTrainResult phase1;
  MlTrainResult phase2;
};

// Discriminative phase over the restricted fragment, then maximum-likelihood
// phase over the full corpus seeded with the phase-1 entries.
TwoPhaseResult train_two_phase(
    const std::vector<VideoClip>& clips,
    const std::vector<std::vector<SentenceTemplate>>& positives,
    const GrammarSpec& grammar, const Lexicon& initial,
    const TwoPhaseConfig& config, const ScoringConfig& scoring);

}  // namespace groundlex
