#include "groundlex/experiment.hpp"

#include <algorithm>
#include <set>

namespace groundlex {

std::vector<SentenceTemplate> sample_sentences(
    const std::vector<SentenceTemplate>& enumeration, int count,
    std::uint64_t seed) {
  std::vector<std::size_t> indices(enumeration.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  Rng rng(seed);
  rng.shuffle(indices);
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(0, count)),
                            indices.size());
  std::vector<std::size_t> chosen(indices.begin(), indices.begin() + take);
  std::sort(chosen.begin(), chosen.end());  // keep enumeration order
  std::vector<SentenceTemplate> sentences;
  for (std::size_t i : chosen) sentences.push_back(enumeration[i]);
  return sentences;
}

namespace {

// Positive samples restricted to the restricted-grammar fragment, for the
// first phase of the two-phase maximum-likelihood regimen.
std::vector<std::vector<SentenceTemplate>> restricted_positives(
    const std::vector<std::vector<SentenceTemplate>>& positives,
    const GrammarSpec& grammar, const Lexicon& lexicon) {
  std::set<std::string> keys;
  for (const SentenceTemplate& s : enumerate_restricted(grammar, lexicon)) {
    keys.insert(template_key(s));
  }
  std::vector<std::vector<SentenceTemplate>> out(positives.size());
  for (std::size_t c = 0; c < positives.size(); ++c) {
    for (const SentenceTemplate& s : positives[c]) {
      if (keys.count(template_key(s))) out[c].push_back(s);
    }
  }
  return out;
}

std::vector<TrainSample> flatten_samples(
    const std::vector<std::vector<SentenceTemplate>>& positives) {
  std::vector<TrainSample> samples;
  for (std::size_t c = 0; c < positives.size(); ++c) {
    for (const SentenceTemplate& s : positives[c]) {
      samples.push_back({static_cast<int>(c), s});
    }
  }
  return samples;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.ratios.empty()) throw ConfigError("experiment: empty ratio list");
  if (config.methods.empty()) throw ConfigError("experiment: no methods");
  for (const std::string& method : config.methods) {
    if (method != "ml" && method != "ml+ml" && method != "dt+ml") {
      throw ConfigError("experiment: unknown method '" + method + "'");
    }
  }

  ExperimentReport report;
  report.ratios = config.ratios;
  report.methods = config.methods;
  report.methods.push_back("hand");

  for (std::size_t seed_index = 0; seed_index < config.corpus_seeds.size();
       ++seed_index) {
    const std::uint64_t corpus_seed = config.corpus_seeds[seed_index];
    SimWorld world = generate_corpus(config.sim, config.scoring, corpus_seed);

    const std::vector<SentenceTemplate> nv_sentences = sample_sentences(
        enumerate_restricted(world.grammar, world.hand_lexicon),
        config.nv_sentence_count, config.sentence_seed ^ corpus_seed);
    std::vector<SentenceTemplate> test_sentences = sample_sentences(
        enumerate_full(world.grammar, world.hand_lexicon),
        config.all_sentence_count, (config.sentence_seed * 31) ^ corpus_seed);
    test_sentences.insert(test_sentences.end(), nv_sentences.begin(),
                          nv_sentences.end());

    TruthFn truth = [&](int clip_index, const SentenceTemplate& sentence) {
      return oracle_label(world.ground_truth()[static_cast<std::size_t>(clip_index)],
                          sentence, world.meanings, world.config);
    };

    SeedResult seed_result;
    seed_result.corpus_seed = corpus_seed;

    for (std::size_t ratio_index = 0; ratio_index < config.ratios.size();
         ++ratio_index) {
      const double ratio = config.ratios[ratio_index];
      const std::vector<FoldSplit> folds =
          make_folds(static_cast<int>(world.clips.size()), config.folds, ratio,
                     config.fold_seed ^ corpus_seed);

      RatioResult ratio_result;
      ratio_result.ratio = ratio;

      const Lexicon initial = init_uniform(
          world.pos_table, world.vocabulary, config.init_jitter,
          config.init_seed ^ corpus_seed ^ static_cast<std::uint64_t>(
                                               1000 * ratio_index + 1));

      for (const std::string& method : config.methods) {
        TrainerFn trainer = [&](const std::vector<VideoClip>& train_clips,
                                const std::vector<std::vector<SentenceTemplate>>&
                                    train_positives) -> Lexicon {
          if (method == "ml") {
            return train_ml(train_clips, flatten_samples(train_positives),
                            initial, config.ml, config.scoring)
                .lexicon;
          }
          if (method == "ml+ml") {
            auto phase1_positives = restricted_positives(
                train_positives, world.grammar, world.hand_lexicon);
            Lexicon phase1 =
                train_ml(train_clips, flatten_samples(phase1_positives), initial,
                         config.ml, config.scoring)
                    .lexicon;
            return train_ml(train_clips, flatten_samples(train_positives), phase1,
                            config.ml, config.scoring)
                .lexicon;
          }
          TwoPhaseConfig two_phase;
          two_phase.negative_count = config.negative_count;
          two_phase.seed = config.negative_seed ^ corpus_seed;
          two_phase.dt = config.dt;
          two_phase.ml = config.ml;
          return train_two_phase(train_clips, train_positives, world.grammar,
                                 initial, two_phase, config.scoring)
              .lexicon;
        };

        std::vector<PairJudgment> pooled =
            cross_validate(world.clips, world.positives, folds, test_sentences,
                           trainer, config.scoring, truth, config.jobs);
        RocCurve curve = roc(pooled);
        ratio_result.by_method[method] = {curve.auc, std::move(curve)};
      }

      // hand baseline on the same pooled pairs
      std::vector<PairJudgment> hand_pooled;
      for (const FoldSplit& fold : folds) {
        std::vector<VideoClip> test_clips;
        for (int c : fold.test_clips) {
          test_clips.push_back(world.clips[static_cast<std::size_t>(c)]);
        }
        TruthFn test_truth = [&](int local_index, const SentenceTemplate& sentence) {
          return truth(fold.test_clips[static_cast<std::size_t>(local_index)],
                       sentence);
        };
        std::vector<PairJudgment> judgments =
            baseline_hand(test_clips, test_sentences, world.hand_lexicon,
                          config.scoring, test_truth, config.jobs);
        hand_pooled.insert(hand_pooled.end(), judgments.begin(), judgments.end());
      }
      RocCurve hand_curve = roc(hand_pooled);
      ratio_result.by_method["hand"] = {hand_curve.auc, std::move(hand_curve)};

      BaselineResult chance = baseline_chance(
          hand_pooled, (corpus_seed * 7919) ^ static_cast<std::uint64_t>(
                                                  ratio_index + 1));
      ratio_result.chance = chance.point;
      BaselineResult blind = baseline_blind(hand_pooled);
      ratio_result.blind = blind.point;
      ratio_result.blind_f1 = blind.f1;

      seed_result.ratios.push_back(std::move(ratio_result));
    }
    report.seeds.push_back(std::move(seed_result));
  }

  report.mean_auc.resize(report.ratios.size());
  for (std::size_t r = 0; r < report.ratios.size(); ++r) {
    for (const std::string& method : report.methods) {
      double total = 0.0;
      for (const SeedResult& seed : report.seeds) {
        total += seed.ratios[r].by_method.at(method).auc;
      }
      report.mean_auc[r][method] = total / static_cast<double>(report.seeds.size());
    }
  }
  return report;
}

}  // namespace groundlex
