#pragma once

// Test-only brute-force reference implementations. These enumerate every
// participant-to-detection assignment sequence and every joint state sequence
// literally and accumulate path weights in log space, independently of the
// lattice recursions they are used to check.

#include <vector>

#include "groundlex/lattice.hpp"
#include "groundlex/param_table.hpp"
#include "groundlex/train_dt.hpp"

namespace groundlex::testing {

struct Instance {
  VideoClip clip;
  SentenceTemplate sentence;
  Lexicon lexicon;
  ScoringConfig scoring;
};

// Every assignment sequence: one detection index per participant per frame.
std::vector<AssignmentSequence> all_assignment_sequences(const VideoClip& clip,
                                                         int participants);

// Every joint state sequence: states[word][frame].
std::vector<std::vector<std::vector<int>>> all_state_sequences(
    const Instance& instance);

// log weight of a single path: strengths, coherence, initial/transition
// probabilities, and output probabilities of the quantized features.
double path_log_weight(const Instance& instance,
                       const AssignmentSequence& assignment,
                       const std::vector<std::vector<int>>& states);

double brute_force_forward(const Instance& instance);
double brute_force_viterbi(const Instance& instance);

struct BrutePosteriors {
  double log_likelihood;
  // same shapes as the production tables
  std::vector<std::vector<std::vector<double>>> gamma;  // [word][frame][state]
  std::vector<std::vector<std::vector<std::vector<double>>>> transition;
  // [word][frame][state][feature][bin]
  std::vector<std::vector<std::vector<std::vector<std::vector<double>>>>> occupancy;
};

BrutePosteriors brute_force_posteriors(const Instance& instance);

// Central finite differences of the smoothed discrimination objective with
// respect to every raw parameter.
std::vector<double> finite_difference_gradient(
    const std::vector<VideoClip>& clips, const std::vector<DtSample>& samples,
    const Lexicon& lexicon, const ScoringConfig& scoring, ScoreKind kind,
    double step);

struct InstanceBounds {
  int max_frames = 3;
  int max_detections = 3;
  int max_participants = 2;
  int max_words = 3;
  int max_states = 2;
};

// Random instance within the bounds; parameters are bounded away from zero.
Instance random_instance(Rng& rng, const InstanceBounds& bounds = {});

}  // namespace groundlex::testing
