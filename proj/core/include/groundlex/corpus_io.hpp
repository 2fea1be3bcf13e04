#pragma once

#include <filesystem>

#include "groundlex/experiment.hpp"
#include "groundlex/worldsim.hpp"

namespace groundlex {

// On-disk corpus layout under one directory:
//   world.json         part-of-speech table, vocabulary, grammar, sim config
//   clips/clip_NNNN.tsv  frame-major detection records: frame class strength x y
//   annotations.tsv    clip_id <tab> positive sentence tokens
//   hand_lexicon.json  the generator's scoring reference
//   ground_truth.json  trajectories, events, word meanings (optional at use)
void save_world(const SimWorld& world, const std::filesystem::path& directory,
                bool include_ground_truth = true);

// `require_ground_truth` controls whether a missing ground_truth.json is an
// error; without it the oracle and the hand/eval baselines are unavailable.
SimWorld load_world(const std::filesystem::path& directory,
                    bool require_ground_truth = false);

void save_experiment_config(const ExperimentConfig& config,
                            const std::filesystem::path& path);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

void save_experiment_report(const ExperimentReport& report,
                            const std::filesystem::path& directory);

}  // namespace groundlex
