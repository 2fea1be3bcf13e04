#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "groundlex/lattice.hpp"

namespace groundlex {

struct PairJudgment {
  int clip_id = 0;
  int sentence_index = 0;
  double log_score = 0.0;
  bool truth = false;
  int predicted = -1;  // -1 when the method emits scores rather than decisions
};

using TruthFn = std::function<bool(int clip_index, const SentenceTemplate&)>;

// Scores every (clip, sentence) pair with the per-frame-normalized score.
std::vector<PairJudgment> score_pairs(const std::vector<VideoClip>& clips,
                                      const std::vector<SentenceTemplate>& sentences,
                                      const Lexicon& lexicon,
                                      const ScoringConfig& scoring,
                                      const TruthFn& truth, int jobs = 1);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
};

// Threshold sweep over the distinct scores (ties grouped), trapezoidal AUC.
// Requires both classes to be present.
RocCurve roc(const std::vector<PairJudgment>& judgments);

struct OperatingPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct BaselineResult {
  std::vector<PairJudgment> judgments;  // predicted field filled in
  OperatingPoint point;
  double f1 = 0.0;
};

// Classifies each pair as a hit with probability one half.
BaselineResult baseline_chance(const std::vector<PairJudgment>& pairs,
                               std::uint64_t seed);

// Best per-sentence constant decision by F1: every distinct sentence maps to
// hit or miss uniformly across clips; the video is never consulted.
BaselineResult baseline_blind(const std::vector<PairJudgment>& pairs);

// The scoring pipeline with the generator's hand-engineered lexicon.
std::vector<PairJudgment> baseline_hand(const std::vector<VideoClip>& clips,
                                        const std::vector<SentenceTemplate>& sentences,
                                        const Lexicon& hand_lexicon,
                                        const ScoringConfig& scoring,
                                        const TruthFn& truth, int jobs = 1);

// Rotation splits: the plan's folds partition the clips; for a ratio, each
// fold trains on the first round(ratio * clip_count) clips of its training
// side and tests on every remaining clip.
struct FoldSplit {
  std::vector<int> train_clips;
  std::vector<int> test_clips;
};

std::vector<FoldSplit> make_folds(int clip_count, int folds, double ratio,
                                  std::uint64_t seed);

// Trains on each fold's training clips and pools the held-out judgments.
using TrainerFn = std::function<Lexicon(
    const std::vector<VideoClip>& train_clips,
    const std::vector<std::vector<SentenceTemplate>>& train_positives)>;

std::vector<PairJudgment> cross_validate(
    const std::vector<VideoClip>& clips,
    const std::vector<std::vector<SentenceTemplate>>& positives,
    const std::vector<FoldSplit>& folds,
    const std::vector<SentenceTemplate>& test_sentences, const TrainerFn& trainer,
    const ScoringConfig& scoring, const TruthFn& truth, int jobs = 1);

}  // namespace groundlex
