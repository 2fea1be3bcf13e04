#include "groundlex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace groundlex {

std::vector<PairJudgment> score_pairs(const std::vector<VideoClip>& clips,
                                      const std::vector<SentenceTemplate>& sentences,
                                      const Lexicon& lexicon,
                                      const ScoringConfig& scoring,
                                      const TruthFn& truth, int jobs) {
  std::vector<PairJudgment> judgments(clips.size() * sentences.size());
  parallel_for(judgments.size(), jobs, [&](std::size_t index) {
    const std::size_t c = index / sentences.size();
    const std::size_t s = index % sentences.size();
    PairJudgment& judgment = judgments[index];
    judgment.clip_id = clips[c].clip_id;
    judgment.sentence_index = static_cast<int>(s);
    judgment.log_score = normalized_score(clips[c], sentences[s], lexicon, scoring);
    judgment.truth = truth(static_cast<int>(c), sentences[s]);
  });
  return judgments;
}

RocCurve roc(const std::vector<PairJudgment>& judgments) {
  std::size_t positives = 0, negatives = 0;
  for (const PairJudgment& j : judgments) {
    (j.truth ? positives : negatives) += 1;
  }
  if (positives == 0 || negatives == 0) {
    throw ConfigError("roc: both classes must be present");
  }

  std::vector<const PairJudgment*> sorted;
  sorted.reserve(judgments.size());
  for (const PairJudgment& j : judgments) sorted.push_back(&j);
  std::sort(sorted.begin(), sorted.end(),
            [](const PairJudgment* a, const PairJudgment* b) {
              return a->log_score > b->log_score;
            });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  double auc = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    // everything tied at this score flips together
    std::size_t j = i;
    while (j < sorted.size() && sorted[j]->log_score == sorted[i]->log_score) ++j;
    std::size_t tp_before = tp, fp_before = fp;
    for (std::size_t k = i; k < j; ++k) {
      (sorted[k]->truth ? tp : fp) += 1;
    }
    double fpr0 = static_cast<double>(fp_before) / negatives;
    double fpr1 = static_cast<double>(fp) / negatives;
    double tpr0 = static_cast<double>(tp_before) / positives;
    double tpr1 = static_cast<double>(tp) / positives;
    auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
    curve.points.push_back({fpr1, tpr1});
    i = j;
  }
  curve.auc = auc;
  return curve;
}

namespace {

OperatingPoint point_from_predictions(const std::vector<PairJudgment>& judgments) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const PairJudgment& j : judgments) {
    if (j.predicted == 1) {
      (j.truth ? tp : fp) += 1;
    } else {
      (j.truth ? fn : tn) += 1;
    }
  }
  OperatingPoint point;
  point.tpr = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  point.fpr = fp + tn > 0 ? static_cast<double>(fp) / (fp + tn) : 0.0;
  return point;
}

double f1_from_predictions(const std::vector<PairJudgment>& judgments) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const PairJudgment& j : judgments) {
    if (j.predicted == 1) {
      (j.truth ? tp : fp) += 1;
    } else if (j.truth) {
      ++fn;
    }
  }
  double denom = 2.0 * tp + fp + fn;
  return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

}  // namespace

BaselineResult baseline_chance(const std::vector<PairJudgment>& pairs,
                               std::uint64_t seed) {
  BaselineResult result;
  result.judgments = pairs;
  Rng rng(seed);
  for (PairJudgment& j : result.judgments) {
    j.predicted = rng.uniform() < 0.5 ? 1 : 0;
  }
  result.point = point_from_predictions(result.judgments);
  result.f1 = f1_from_predictions(result.judgments);
  return result;
}

BaselineResult baseline_blind(const std::vector<PairJudgment>& pairs) {
  // Per-sentence hit counts. A per-sentence constant decision adds the
  // sentence's true pairs to TP and false pairs to FP when answering hit, so
  // the F1-optimal decision set takes sentences in precision order.
  std::map<int, std::pair<std::size_t, std::size_t>> by_sentence;  // tp, fp
  for (const PairJudgment& j : pairs) {
    auto& counts = by_sentence[j.sentence_index];
    (j.truth ? counts.first : counts.second) += 1;
  }
  std::size_t total_positive = 0;
  for (const PairJudgment& j : pairs) total_positive += j.truth ? 1 : 0;

  std::vector<std::pair<double, int>> ranked;  // precision, sentence
  for (const auto& [sentence, counts] : by_sentence) {
    double denom = static_cast<double>(counts.first + counts.second);
    ranked.push_back({denom > 0.0 ? counts.first / denom : 0.0, sentence});
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  double best_f1 = 0.0;
  std::size_t best_cut = 0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t cut = 1; cut <= ranked.size(); ++cut) {
    const auto& counts = by_sentence[ranked[cut - 1].second];
    tp += counts.first;
    fp += counts.second;
    double denom = 2.0 * tp + fp + (total_positive - tp);
    double f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    if (f1 > best_f1) {
      best_f1 = f1;
      best_cut = cut;
    }
  }

  std::map<int, bool> decision;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    decision[ranked[r].second] = r < best_cut;
  }

  BaselineResult result;
  result.judgments = pairs;
  for (PairJudgment& j : result.judgments) {
    j.predicted = decision[j.sentence_index] ? 1 : 0;
  }
  result.point = point_from_predictions(result.judgments);
  result.f1 = best_f1;
  return result;
}

std::vector<PairJudgment> baseline_hand(const std::vector<VideoClip>& clips,
                                        const std::vector<SentenceTemplate>& sentences,
                                        const Lexicon& hand_lexicon,
                                        const ScoringConfig& scoring,
                                        const TruthFn& truth, int jobs) {
  return score_pairs(clips, sentences, hand_lexicon, scoring, truth, jobs);
}

std::vector<FoldSplit> make_folds(int clip_count, int folds, double ratio,
                                  std::uint64_t seed) {
  if (folds < 2 || clip_count < folds) {
    throw ConfigError("make_folds: need at least two folds and one clip per fold");
  }
  if (!(ratio > 0.0) || ratio >= 1.0) {
    throw ConfigError("make_folds: ratio must be in (0, 1)");
  }
  std::vector<int> order(static_cast<std::size_t>(clip_count));
  for (int i = 0; i < clip_count; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const int train_size = std::max(
      1, static_cast<int>(std::lround(ratio * static_cast<double>(clip_count))));

  std::vector<FoldSplit> splits;
  for (int f = 0; f < folds; ++f) {
    // block f is held out; the training subset comes from the other blocks
    std::vector<int> train_side;
    for (int i = 0; i < clip_count; ++i) {
      if (i % folds != f) train_side.push_back(order[static_cast<std::size_t>(i)]);
    }
    FoldSplit split;
    const int usable = std::min<int>(train_size, static_cast<int>(train_side.size()));
    split.train_clips.assign(train_side.begin(), train_side.begin() + usable);
    std::vector<bool> in_train(static_cast<std::size_t>(clip_count), false);
    for (int c : split.train_clips) in_train[static_cast<std::size_t>(c)] = true;
    for (int c = 0; c < clip_count; ++c) {
      if (!in_train[static_cast<std::size_t>(c)]) split.test_clips.push_back(c);
    }
    splits.push_back(std::move(split));
  }
  return splits;
}

std::vector<PairJudgment> cross_validate(
    const std::vector<VideoClip>& clips,
    const std::vector<std::vector<SentenceTemplate>>& positives,
    const std::vector<FoldSplit>& folds,
    const std::vector<SentenceTemplate>& test_sentences, const TrainerFn& trainer,
    const ScoringConfig& scoring, const TruthFn& truth, int jobs) {
  std::vector<PairJudgment> pooled;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const FoldSplit& fold = folds[f];
    std::vector<VideoClip> train_clips;
    std::vector<std::vector<SentenceTemplate>> train_positives;
    for (int c : fold.train_clips) {
      train_clips.push_back(clips[static_cast<std::size_t>(c)]);
      train_positives.push_back(positives[static_cast<std::size_t>(c)]);
    }
    Lexicon model;
    try {
      model = trainer(train_clips, train_positives);
    } catch (const TrainError& e) {
      throw TrainError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("fold " + std::to_string(f) + ": " + e.what());
    }

    std::vector<VideoClip> test_clips;
    for (int c : fold.test_clips) {
      test_clips.push_back(clips[static_cast<std::size_t>(c)]);
    }
    TruthFn test_truth = [&](int local_index, const SentenceTemplate& sentence) {
      return truth(fold.test_clips[static_cast<std::size_t>(local_index)], sentence);
    };
    std::vector<PairJudgment> judgments =
        score_pairs(test_clips, test_sentences, model, scoring, test_truth, jobs);
    pooled.insert(pooled.end(), judgments.begin(), judgments.end());
  }
  return pooled;
}

}  // namespace groundlex
