#include "groundlex/train_dt.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace groundlex {

namespace {

std::vector<std::size_t> canonical_order(const std::vector<VideoClip>& clips,
                                         const std::vector<DtSample>& samples) {
  std::vector<std::pair<std::string, std::size_t>> keys;
  keys.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const DtSample& sample = samples[i];
    std::string key =
        std::to_string(clips[static_cast<std::size_t>(sample.clip_index)].clip_id) +
        "#" + template_key(sample.competition.positive());
    keys.emplace_back(std::move(key), i);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::size_t> order;
  order.reserve(keys.size());
  for (const auto& [key, index] : keys) order.push_back(index);
  return order;
}

double score_sentence(const VideoClip& clip, const SentenceTemplate& sentence,
                      const Lexicon& lexicon, const ScoringConfig& scoring,
                      ScoreKind kind) {
  return kind == ScoreKind::kRaw
             ? forward_score(clip, sentence, lexicon, scoring)
             : normalized_score(clip, sentence, lexicon, scoring);
}

// positive log score minus log-sum of competition scores for one sample
double sample_term(const std::vector<VideoClip>& clips, const DtSample& sample,
                   const Lexicon& lexicon, const ScoringConfig& scoring,
                   ScoreKind kind) {
  const VideoClip& clip = clips[static_cast<std::size_t>(sample.clip_index)];
  std::vector<double> scores;
  scores.reserve(sample.competition.sentences.size());
  for (const SentenceTemplate& sentence : sample.competition.sentences) {
    scores.push_back(score_sentence(clip, sentence, lexicon, scoring, kind));
  }
  double positive =
      scores[static_cast<std::size_t>(sample.competition.positive_index)];
  if (is_log_zero(positive)) return kLogZero;
  return positive - log_sum(scores);
}

ObjectiveResult objective_impl(const std::vector<VideoClip>& clips,
                               const std::vector<DtSample>& samples,
                               const Lexicon& lexicon,
                               const ScoringConfig& scoring, ScoreKind kind,
                               int jobs) {
  std::vector<double> terms(samples.size(), 0.0);
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    terms[i] = sample_term(clips, samples[i], lexicon, scoring, kind);
  });
  ObjectiveResult result;
  for (std::size_t index : canonical_order(clips, samples)) {
    if (is_log_zero(terms[index])) {
      result.offending.push_back(static_cast<int>(index));
      result.value = kLogZero;
    } else if (!is_log_zero(result.value)) {
      result.value += terms[index];
    }
  }
  return result;
}

}  // namespace

ObjectiveResult discrimination_objective(const std::vector<VideoClip>& clips,
                                         const std::vector<DtSample>& samples,
                                         const Lexicon& lexicon,
                                         const ScoringConfig& scoring,
                                         int jobs) {
  return objective_impl(clips, samples, lexicon, scoring, ScoreKind::kRaw, jobs);
}

ObjectiveResult smoothed_objective(const std::vector<VideoClip>& clips,
                                   const std::vector<DtSample>& samples,
                                   const Lexicon& lexicon,
                                   const ScoringConfig& scoring, int jobs) {
  return objective_impl(clips, samples, lexicon, scoring, ScoreKind::kNormalized,
                        jobs);
}

std::vector<double> discrimination_weights(const std::vector<VideoClip>& clips,
                                           const DtSample& sample,
                                           const Lexicon& lexicon,
                                           const ScoringConfig& scoring,
                                           ScoreKind kind) {
  const VideoClip& clip = clips[static_cast<std::size_t>(sample.clip_index)];
  const std::size_t count = sample.competition.sentences.size();
  std::vector<double> scores(count);
  double peak = kLogZero;
  for (std::size_t g = 0; g < count; ++g) {
    scores[g] = score_sentence(clip, sample.competition.sentences[g], lexicon,
                               scoring, kind);
    peak = std::max(peak, scores[g]);
  }
  if (is_log_zero(peak)) {
    throw TrainError("degenerate competition set: every sentence has zero score");
  }
  double total = 0.0;
  for (double s : scores) {
    if (!is_log_zero(s)) total += std::exp(s - peak);
  }
  std::vector<double> weights(count);
  for (std::size_t g = 0; g < count; ++g) {
    double share = is_log_zero(scores[g]) ? 0.0 : std::exp(scores[g] - peak) / total;
    weights[g] =
        (static_cast<int>(g) == sample.competition.positive_index ? 1.0 : 0.0) -
        share;
  }
  return weights;
}

ParamTable gradient(const std::vector<VideoClip>& clips,
                    const std::vector<DtSample>& samples,
                    const Lexicon& lexicon, const ScoringConfig& scoring,
                    ScoreKind kind, const ParamLayout& layout, int jobs) {
  std::vector<ParamTable> per_sample(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t s) {
    const DtSample& sample = samples[s];
    const VideoClip& clip = clips[static_cast<std::size_t>(sample.clip_index)];
    std::vector<double> weights =
        discrimination_weights(clips, sample, lexicon, scoring, kind);
    const double frame_scale =
        kind == ScoreKind::kNormalized
            ? 1.0 / static_cast<double>(clip.frame_count())
            : 1.0;
    per_sample[s] = ParamTable(layout);
    for (std::size_t g = 0; g < sample.competition.sentences.size(); ++g) {
      if (weights[g] == 0.0) continue;
      Posteriors post;
      try {
        post = posteriors(clip, sample.competition.sentences[g], lexicon, scoring);
      } catch (const ScoreError&) {
        // zero-score sentences carry zero weight and are skipped above, so a
        // throw here means the positive itself is unscorable
        throw TrainError("cannot differentiate: sentence " + std::to_string(g) +
                         " in competition set of clip " +
                         std::to_string(clip.clip_id) + " has zero score");
      }
      accumulate_counts(per_sample[s], post, sample.competition.sentences[g],
                        weights[g] * frame_scale);
    }
  });

  ParamTable counts(layout);
  for (std::size_t index : canonical_order(clips, samples)) {
    counts.add_scaled(per_sample[index], 1.0);
  }
  counts.divide_by_parameters(lexicon);
  return counts;
}

DampingState make_damping(const ParamLayout& layout, const DtConfig& config) {
  DampingState damping;
  damping.row_damping.assign(layout.row_count(), 0.0);
  damping.punishment = config.punishment;
  damping.floor = config.damping_floor;
  return damping;
}

DampingState adapt_damping(const DampingState& damping,
                           const ParamTable& gradient) {
  DampingState next = damping;
  const ParamLayout& layout = gradient.layout();
  if (damping.iteration == damping.last_success) {
    for (std::size_t r = 0; r < layout.row_count(); ++r) {
      double lowest = 0.0;
      for (std::size_t j = 0; j < layout.row_size(r); ++j) {
        lowest = std::min(lowest, gradient[layout.row_offset(r) + j]);
      }
      next.row_damping[r] = std::max(0.0, -lowest);
    }
  } else {
    for (std::size_t r = 0; r < layout.row_count(); ++r) {
      next.row_damping[r] =
          std::max(damping.row_damping[r], damping.floor) * damping.punishment;
    }
  }
  return next;
}

ReestimateOutcome reestimate(const Lexicon& previous, const ParamTable& gradient,
                             const std::vector<double>& row_damping,
                             double prob_floor) {
  const ParamLayout& layout = gradient.layout();
  if (row_damping.size() != layout.row_count()) {
    throw ConfigError("reestimate: damping vector does not match layout");
  }
  std::vector<double> flat = flatten_parameters(previous, layout);
  ReestimateOutcome outcome;

  for (std::size_t r = 0; r < layout.row_count(); ++r) {
    const std::size_t offset = layout.row_offset(r);
    const std::size_t size = layout.row_size(r);

    bool all_zero = true;
    for (std::size_t j = 0; j < size; ++j) {
      if (gradient[offset + j] != 0.0) {
        all_zero = false;
        break;
      }
    }
    if (all_zero) continue;  // fixed point for this distribution

    double denom = 0.0;
    bool negative = false;
    for (std::size_t j = 0; j < size; ++j) {
      double numerator = flat[offset + j] * (gradient[offset + j] + row_damping[r]);
      if (numerator < 0.0) negative = true;
      denom += numerator;
    }
    if (negative || !(denom > 0.0)) {
      outcome.ok = false;
      outcome.failure = negative ? "negative numerator in distribution " +
                                       std::to_string(r)
                                 : "nonpositive normalizer in distribution " +
                                       std::to_string(r);
      outcome.lexicon = previous;
      return outcome;
    }
    for (std::size_t j = 0; j < size; ++j) {
      flat[offset + j] =
          flat[offset + j] * (gradient[offset + j] + row_damping[r]) / denom;
    }
  }

  outcome.lexicon = previous;
  unflatten_parameters(outcome.lexicon, layout, flat);
  floor_and_renormalize(outcome.lexicon, prob_floor);
  return outcome;
}

GtStepResult gt_step(const std::vector<VideoClip>& clips,
                     const std::vector<DtSample>& samples,
                     const Lexicon& lexicon, const ParamTable& gradient_table,
                     const std::vector<double>& row_damping,
                     const ScoringConfig& scoring, double prob_floor, int jobs) {
  GtStepResult result;
  result.objective_before =
      smoothed_objective(clips, samples, lexicon, scoring, jobs).value;
  ReestimateOutcome outcome =
      reestimate(lexicon, gradient_table, row_damping, prob_floor);
  if (!outcome.ok) {
    result.lexicon = lexicon;
    result.accepted = false;
    result.objective_after = result.objective_before;
    result.note = outcome.failure;
    return result;
  }
  result.lexicon = std::move(outcome.lexicon);
  result.objective_after =
      smoothed_objective(clips, samples, result.lexicon, scoring, jobs).value;
  result.accepted = result.objective_after >= result.objective_before;
  return result;
}

Lexicon ebw_step(const std::vector<VideoClip>& clips,
                 const std::vector<DtSample>& samples, const Lexicon& lexicon,
                 const std::vector<double>& row_damping,
                 const ScoringConfig& scoring, double prob_floor, int jobs) {
  ParamLayout layout(lexicon);
  ParamTable grad =
      gradient(clips, samples, lexicon, scoring, ScoreKind::kRaw, layout, jobs);
  ReestimateOutcome outcome = reestimate(lexicon, grad, row_damping, prob_floor);
  if (!outcome.ok) {
    throw TrainError("extended Baum-Welch produced an invalid update (" +
                     outcome.failure + "); damping constants too small");
  }
  return outcome.lexicon;
}

DtTrainResult train_dt(const std::vector<VideoClip>& clips,
                       const std::vector<DtSample>& samples,
                       const Lexicon& initial, const DtConfig& config,
                       const ScoringConfig& scoring) {
  const ScoreKind kind =
      config.optimizer == DtConfig::Optimizer::kGrowthTransform
          ? ScoreKind::kNormalized
          : ScoreKind::kRaw;

  DtTrainResult result;
  result.lexicon = initial;
  if (samples.empty() || config.max_iterations == 0) {
    result.converged = samples.empty();
    return result;
  }

  ParamLayout layout(initial);
  DampingState damping = make_damping(layout, config);

  double objective =
      objective_impl(clips, samples, result.lexicon, scoring, kind, config.jobs)
          .value;
  if (is_log_zero(objective)) {
    throw TrainError("discrimination objective is log-zero at initialization");
  }
  result.objective = objective;

  for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
    ParamTable grad = gradient(clips, samples, result.lexicon, scoring, kind,
                               layout, config.jobs);
    bool accepted = false;
    int retries = 0;
    double candidate_objective = objective;
    Lexicon candidate;
    while (!accepted) {
      damping = adapt_damping(damping, grad);
      damping.iteration += 1;
      ReestimateOutcome outcome =
          reestimate(result.lexicon, grad, damping.row_damping, config.prob_floor);
      bool step_ok = outcome.ok;
      if (step_ok) {
        candidate = std::move(outcome.lexicon);
        candidate_objective =
            objective_impl(clips, samples, candidate, scoring, kind, config.jobs)
                .value;
        step_ok = candidate_objective >= objective;
      }
      double max_damping = 0.0;
      for (double c : damping.row_damping) max_damping = std::max(max_damping, c);
      result.trace.push_back({damping.iteration,
                              step_ok ? candidate_objective : objective, step_ok,
                              retries, max_damping});
      if (step_ok) {
        accepted = true;
        damping.last_success = damping.iteration;
      } else {
        ++retries;
        if (retries > config.max_retries) {
          throw TrainError(
              "discriminative training stalled at iteration " +
              std::to_string(iteration) + ": " + std::to_string(retries) +
              " damping escalations without growth (objective " +
              format_double(objective) + ")");
        }
      }
    }
    double change =
        std::abs(candidate_objective - objective) / std::max(1.0, std::abs(objective));
    result.lexicon = std::move(candidate);
    objective = candidate_objective;
    result.objective = objective;
    if (change < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::vector<DtSample> build_competition_sets(
    const std::vector<VideoClip>& clips,
    const std::vector<std::vector<SentenceTemplate>>& positives,
    const GrammarSpec& grammar, const Lexicon& lexicon, int negative_count,
    std::uint64_t seed) {
  if (clips.size() != positives.size()) {
    throw ConfigError("clips and positive annotations do not line up");
  }
  const std::vector<SentenceTemplate> enumeration =
      enumerate_restricted(grammar, lexicon);
  std::vector<DtSample> samples;
  Rng rng(seed);
  for (std::size_t c = 0; c < clips.size(); ++c) {
    std::set<std::string> positive_keys;
    for (const SentenceTemplate& sentence : positives[c]) {
      positive_keys.insert(template_key(sentence));
    }
    std::vector<bool> truths(enumeration.size(), false);
    int negatives_available = 0;
    for (std::size_t i = 0; i < enumeration.size(); ++i) {
      truths[i] = positive_keys.count(template_key(enumeration[i])) > 0;
      if (!truths[i]) ++negatives_available;
    }
    const int count = std::min(negative_count, negatives_available);
    for (const SentenceTemplate& sentence : positives[c]) {
      if (!positive_keys.count(template_key(sentence))) continue;
      // restricted-grammar positives only
      if (std::none_of(enumeration.begin(), enumeration.end(),
                       [&](const SentenceTemplate& e) { return e == sentence; })) {
        continue;
      }
      DtSample sample;
      sample.clip_index = static_cast<int>(c);
      sample.competition =
          sample_negatives(truths, enumeration, sentence, count,
                           rng.fork(samples.size()).next_u64(),
                           clips[c].clip_id);
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

TwoPhaseResult train_two_phase(
    const std::vector<VideoClip>& clips,
    const std::vector<std::vector<SentenceTemplate>>& positives,
    const GrammarSpec& grammar, const Lexicon& initial,
    const TwoPhaseConfig& config, const ScoringConfig& scoring) {
  TwoPhaseResult result;
  std::vector<DtSample> dt_samples = build_competition_sets(
      clips, positives, grammar, initial, config.negative_count, config.seed);
  result.phase1 = train_dt(clips, dt_samples, initial, config.dt, scoring);

  std::vector<TrainSample> ml_samples;
  for (std::size_t c = 0; c < positives.size(); ++c) {
    for (const SentenceTemplate& sentence : positives[c]) {
      ml_samples.push_back({static_cast<int>(c), sentence});
    }
  }
  result.phase2 =
      train_ml(clips, ml_samples, result.phase1.lexicon, config.ml, scoring);
  result.lexicon = result.phase2.lexicon;
  return result;
}

}  // namespace groundlex
