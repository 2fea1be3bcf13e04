#include "groundlex/train_ml.hpp"

#include <algorithm>
#include <numeric>

namespace groundlex {

namespace {

// Reduction order must not depend on the order samples arrive in, so sums are
// taken over indices sorted by a content key.
std::vector<std::size_t> canonical_order(const std::vector<VideoClip>& clips,
                                         const std::vector<TrainSample>& samples) {
  std::vector<std::pair<std::string, std::size_t>> keys;
  keys.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const TrainSample& sample = samples[i];
    std::string key =
        std::to_string(clips[static_cast<std::size_t>(sample.clip_index)].clip_id) +
        "#" + template_key(sample.sentence);
    keys.emplace_back(std::move(key), i);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::size_t> order;
  order.reserve(keys.size());
  for (const auto& [key, index] : keys) order.push_back(index);
  return order;
}

}  // namespace

ObjectiveResult ml_objective(const std::vector<VideoClip>& clips,
                             const std::vector<TrainSample>& samples,
                             const Lexicon& lexicon,
                             const ScoringConfig& scoring, int jobs) {
  std::vector<double> scores(samples.size(), 0.0);
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const TrainSample& sample = samples[i];
    scores[i] = forward_score(clips[static_cast<std::size_t>(sample.clip_index)],
                              sample.sentence, lexicon, scoring);
  });
  ObjectiveResult result;
  for (std::size_t index : canonical_order(clips, samples)) {
    if (is_log_zero(scores[index])) {
      result.offending.push_back(static_cast<int>(index));
      result.value = kLogZero;
    } else if (!is_log_zero(result.value)) {
      result.value += scores[index];
    }
  }
  return result;
}

void accumulate_counts(ParamTable& counts, const Posteriors& posterior,
                       const SentenceTemplate& sentence, double weight) {
  for (std::size_t l = 0; l < sentence.words.size(); ++l) {
    const int entry = sentence.words[l];
    const WordPosteriors& wp = posterior.words[l];
    const int frames = static_cast<int>(wp.gamma.size());
    const int states = static_cast<int>(wp.gamma[0].size());
    for (int i = 0; i < states; ++i) {
      counts.initial(entry, i) += weight * wp.gamma[0][static_cast<std::size_t>(i)];
    }
    for (int t = 1; t < frames; ++t) {
      const auto& xi = wp.transition[static_cast<std::size_t>(t - 1)];
      for (int i = 0; i < states; ++i) {
        for (int k = 0; k < states; ++k) {
          counts.transition(entry, i, k) +=
              weight * xi[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
        }
      }
    }
    for (int t = 0; t < frames; ++t) {
      const auto& occ = wp.occupancy[static_cast<std::size_t>(t)];
      for (int i = 0; i < states; ++i) {
        for (std::size_t n = 0; n < occ[static_cast<std::size_t>(i)].size(); ++n) {
          const auto& bins = occ[static_cast<std::size_t>(i)][n];
          for (std::size_t h = 0; h < bins.size(); ++h) {
            counts.output(entry, i, static_cast<int>(n), static_cast<int>(h)) +=
                weight * bins[h];
          }
        }
      }
    }
  }
}

namespace {

// Normalizes pooled counts into a new lexicon; rows with zero pooled mass
// keep their previous values.
Lexicon counts_to_lexicon(const Lexicon& previous, const ParamTable& counts,
                          double floor, std::vector<std::string>* untouched) {
  Lexicon next = previous;
  auto note = [&](const WordModel& entry, const std::string& what) {
    if (untouched) untouched->push_back("entry '" + entry.word + "' " + what);
  };
  for (WordModel& entry : next.entries) {
    const int m = entry.entry_id;
    const PosConfig& pos = next.pos_table[static_cast<std::size_t>(entry.pos_index)];
    const int states = pos.state_count;

    double init_total = 0.0;
    for (int k = 0; k < states; ++k) init_total += counts.initial(m, k);
    if (init_total > 0.0) {
      for (int k = 0; k < states; ++k) {
        entry.initial[static_cast<std::size_t>(k)] =
            counts.initial(m, k) / init_total;
      }
    } else {
      note(entry, "initial unchanged (zero occupancy)");
    }

    for (int i = 0; i < states; ++i) {
      double row_total = 0.0;
      for (int k = 0; k < states; ++k) row_total += counts.transition(m, i, k);
      if (row_total > 0.0) {
        for (int k = 0; k < states; ++k) {
          entry.transition[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] =
              counts.transition(m, i, k) / row_total;
        }
      } else {
        note(entry, "transition row " + std::to_string(i) +
                        " unchanged (zero occupancy)");
      }
    }

    for (int i = 0; i < states; ++i) {
      for (int n = 0; n < pos.feature_count(); ++n) {
        double total = 0.0;
        for (int h = 0; h < pos.bins(n); ++h) total += counts.output(m, i, n, h);
        if (total > 0.0) {
          for (int h = 0; h < pos.bins(n); ++h) {
            entry.output[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)]
                        [static_cast<std::size_t>(h)] =
                counts.output(m, i, n, h) / total;
          }
        } else {
          note(entry, "output state " + std::to_string(i) + " feature " +
                          std::to_string(n) + " unchanged (zero occupancy)");
        }
      }
    }
  }
  floor_and_renormalize(next, floor);
  return next;
}

}  // namespace

BwStepResult bw_step(const std::vector<VideoClip>& clips,
                     const std::vector<TrainSample>& samples,
                     const Lexicon& lexicon, const ScoringConfig& scoring,
                     const MlConfig& config) {
  ParamLayout layout(lexicon);
  std::vector<ParamTable> per_sample(samples.size());
  std::vector<double> scores(samples.size(), 0.0);
  parallel_for(samples.size(), config.jobs, [&](std::size_t i) {
    const TrainSample& sample = samples[i];
    Posteriors post;
    try {
      post = posteriors(clips[static_cast<std::size_t>(sample.clip_index)],
                        sample.sentence, lexicon, scoring);
    } catch (const ScoreError&) {
      throw TrainError("sample " + std::to_string(i) +
                       " has zero score; cannot reestimate");
    }
    scores[i] = post.log_likelihood;
    per_sample[i] = ParamTable(layout);
    accumulate_counts(per_sample[i], post, sample.sentence, 1.0);
  });

  BwStepResult result;
  ParamTable counts(layout);
  result.objective = 0.0;
  for (std::size_t index : canonical_order(clips, samples)) {
    counts.add_scaled(per_sample[index], 1.0);
    result.objective += scores[index];
  }
  result.lexicon =
      counts_to_lexicon(lexicon, counts, config.prob_floor, &result.untouched);
  return result;
}

MlTrainResult train_ml(const std::vector<VideoClip>& clips,
                       const std::vector<TrainSample>& samples,
                       const Lexicon& initial, const MlConfig& config,
                       const ScoringConfig& scoring) {
  MlTrainResult result;
  result.lexicon = initial;
  if (samples.empty()) {
    result.converged = true;
    return result;
  }
  double previous = 0.0;
  bool have_previous = false;
  for (int iteration = 0; iteration < config.max_iterations; ++iteration) {
    BwStepResult step = bw_step(clips, samples, result.lexicon, scoring, config);
    result.lexicon = std::move(step.lexicon);
    result.trace.push_back(step.objective);
    result.iterations = iteration + 1;
    if (have_previous) {
      double change = std::abs(step.objective - previous) /
                      std::max(1.0, std::abs(previous));
      if (change < config.tolerance) {
        result.converged = true;
        break;
      }
    }
    previous = step.objective;
    have_previous = true;
  }
  return result;
}

}  // namespace groundlex
