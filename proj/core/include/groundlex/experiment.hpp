#pragma once

#include <map>
#include <string>
#include <vector>

#include "groundlex/eval.hpp"
#include "groundlex/train_dt.hpp"
#include "groundlex/worldsim.hpp"

namespace groundlex {

// The full comparison: generate a corpus per seed, run three-fold
// cross-validation at each training ratio for every trainer, and judge the
// held-out pairs together with the chance/blind/hand baselines.
struct ExperimentConfig {
  SimConfig sim;
  ScoringConfig scoring;

  std::vector<std::uint64_t> corpus_seeds{101, 202, 303};
  std::vector<double> ratios{0.17, 0.33, 0.67};
  int folds = 3;
  std::uint64_t fold_seed = 17;

  int nv_sentence_count = 12;   // test sentences from the restricted fragment
  int all_sentence_count = 12;  // test sentences from the full grammar
  std::uint64_t sentence_seed = 7;

  std::uint64_t init_seed = 23;     // jittered-uniform initialization
  double init_jitter = 0.01;
  int negative_count = 47;          // lowered to the population when smaller
  std::uint64_t negative_seed = 29;

  std::vector<std::string> methods{"ml", "ml+ml", "dt+ml"};
  DtConfig dt;
  MlConfig ml;
  int jobs = 1;
};

struct MethodResult {
  double auc = 0.0;
  RocCurve curve;
};

struct RatioResult {
  double ratio = 0.0;
  std::map<std::string, MethodResult> by_method;  // trained methods + "hand"
  OperatingPoint chance;
  OperatingPoint blind;
  double blind_f1 = 0.0;
};

struct SeedResult {
  std::uint64_t corpus_seed = 0;
  std::vector<RatioResult> ratios;
};

struct ExperimentReport {
  std::vector<SeedResult> seeds;
  // mean over corpus seeds: [ratio][method] -> AUC
  std::vector<std::map<std::string, double>> mean_auc;
  std::vector<double> ratios;
  std::vector<std::string> methods;  // trained methods + "hand"
};

ExperimentReport run_experiment(const ExperimentConfig& config);

// Seeded sample (without replacement) of test sentences from an enumeration.
std::vector<SentenceTemplate> sample_sentences(
    const std::vector<SentenceTemplate>& enumeration, int count,
    std::uint64_t seed);

}  // namespace groundlex
