#pragma once

#include <array>
#include <vector>

#include "groundlex/grammar.hpp"
#include "groundlex/lexicon.hpp"
#include "groundlex/worldsim_types.hpp"

namespace groundlex {

// Scoring-side configuration: feature quantizer edges, track coherence, and
// the complexity guard. The same values must be used for training and
// evaluation of a given model.
struct ScoringConfig {
  // speed bins: [0, edge0) [edge0, edge1) ... [edgeN, inf)
  std::vector<double> speed_edges{0.06, 0.35};
  // |distance change| <= epsilon counts as stable
  double distance_change_epsilon = 0.05;
  // angle sectors for pair features; sector 0 is centered on +x
  int angle_sectors = 4;
  // coherence factor exp(-kappa * displacement^2) between adjacent frames
  double coherence_kappa = 0.25;

  int max_participants = 3;
  int max_words = 6;

  int speed_bins() const { return static_cast<int>(speed_edges.size()) + 1; }
};

int quantize_speed(double speed, const ScoringConfig& config);
// 0 = decreasing, 1 = stable, 2 = increasing
int quantize_distance_change(double delta, const ScoringConfig& config);
// sector of atan2(dy, dx); sector 0 covers [-pi/Z, pi/Z)
int quantize_angle(double dx, double dy, int sectors);

// One detection index per participant per frame.
using AssignmentSequence = std::vector<std::vector<int>>;

// Quantized feature values, 0-based: values[word][frame][feature].
struct FeatureTensor {
  std::vector<std::vector<std::vector<int>>> values;
};

// Features of every word at every frame under a fixed assignment sequence.
// Velocity-like features use the backward difference; frame 0 uses the
// one-sided forward difference (zero for single-frame clips).
FeatureTensor compute_features(const VideoClip& clip,
                               const AssignmentSequence& assignment,
                               const SentenceTemplate& sentence,
                               const Lexicon& lexicon,
                               const ScoringConfig& config);

// log of the unnormalized track weight: detection strengths per frame times
// exp(-kappa * displacement^2) per adjacent frame pair, per participant.
double track_weight_log(const VideoClip& clip,
                        const AssignmentSequence& assignment,
                        const ScoringConfig& config);

// log of the video-sentence score: sum over participant-to-track assignments
// and joint HMM state sequences of track weight times word HMM likelihoods.
// Returns kLogZero (flagged via is_log_zero) when no path has positive weight.
double forward_score(const VideoClip& clip, const SentenceTemplate& sentence,
                     const Lexicon& lexicon, const ScoringConfig& config);

struct ViterbiResult {
  double log_score = kLogZero;
  AssignmentSequence assignment;          // [frame][participant]
  std::vector<std::vector<int>> states;   // [word][frame]
};

// Same recursion as forward_score with max in place of sum; also returns the
// argmax assignment and per-word state sequences.
ViterbiResult viterbi_score(const VideoClip& clip,
                            const SentenceTemplate& sentence,
                            const Lexicon& lexicon,
                            const ScoringConfig& config);

// log of the sentence prior: sum over words of log(state count) plus the sum
// of log(bin count) over features.
double sentence_prior_log(const SentenceTemplate& sentence,
                          const Lexicon& lexicon);

// Per-frame-normalized score with sentence prior:
// (1/frame_count) * forward + prior.
double normalized_score(const VideoClip& clip, const SentenceTemplate& sentence,
                        const Lexicon& lexicon, const ScoringConfig& config);

// Posterior tables for one word slot. Transition posteriors index the move
// into frame t (so transition[t-1] covers frames t-1 -> t). Output occupancy
// splits state occupancy by observed feature bin; summing it over bins
// recovers gamma for every feature.
struct WordPosteriors {
  std::vector<std::vector<double>> gamma;  // [frame][state]
  std::vector<std::vector<std::vector<double>>> transition;  // [frame-1][i][k]
  // [frame][state][feature][bin]
  std::vector<std::vector<std::vector<std::vector<double>>>> occupancy;
};

struct Posteriors {
  double log_likelihood = kLogZero;
  std::vector<WordPosteriors> words;  // one per word slot
};

// Forward-backward pass. Throws ScoreError when the total score is zero.
Posteriors posteriors(const VideoClip& clip, const SentenceTemplate& sentence,
                      const Lexicon& lexicon, const ScoringConfig& config);

}  // namespace groundlex
