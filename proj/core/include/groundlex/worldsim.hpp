#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "groundlex/grammar.hpp"
#include "groundlex/lattice.hpp"
#include "groundlex/lexicon.hpp"
#include "groundlex/worldsim_types.hpp"

namespace groundlex {

// Synthetic world generator. Objects move along scripted piecewise-linear
// trajectories in a 2D box; the detector reports every true object per frame
// (with position jitter and a strength draw) plus uniformly placed false
// positives.
struct SimConfig {
  // vocabulary: nouns name object classes (class id = position in the list)
  std::vector<std::string> nouns{"person", "backpack", "trash-can", "chair"};
  struct Verb {
    std::string word;
    std::string kind;  // approach | depart | move
  };
  std::vector<Verb> verbs{{"approached", "approach"},
                          {"departed", "depart"},
                          {"moved", "move"}};
  struct Adverb {
    std::string word;
    std::string kind;  // fast | slow
  };
  std::vector<Adverb> adverbs{{"quickly", "fast"}, {"slowly", "slow"}};
  struct Prep {
    std::string word;
    int sector = 0;  // angle sector of (second arg - first arg)
  };
  std::vector<Prep> preps;  // empty by default

  // corpus shape
  int clip_count = 61;
  int min_frames = 18;
  int max_frames = 24;
  int distractor_count = 1;
  double intransitive_only_prob = 0.15;
  double adverb_positive_prob = 0.6;

  // world dynamics (units per frame for speeds)
  double world_size = 12.0;
  double slow_speed = 0.18;
  double fast_speed = 0.55;
  double stop_radius = 0.8;

  // detector noise
  double position_jitter = 0.08;
  double false_positive_rate = 0.6;
  double min_strength = 0.7;
  double fp_min_strength = 0.25;
  double fp_max_strength = 0.7;

  // ground-truth predicate thresholds
  double oracle_travel = 1.0;
  double oracle_near_radius = 1.6;
  double oracle_move_travel = 1.0;
  double oracle_fast_speed = 0.4;
  double oracle_prep_fraction = 0.8;
  int oracle_speed_window = 5;
};

// Hidden per-clip ground truth. Never read by the trainers; the oracle and
// the evaluation harness are its only consumers.
struct ObjectTruth {
  int object_id = 0;
  int class_id = 0;
  std::vector<std::array<double, 2>> positions;  // per frame
};

struct EventTruth {
  int verb_entry = -1;
  std::vector<int> objects;  // object ids, subject first
  int begin_frame = 0;
  int end_frame = 0;
};

struct ClipTruth {
  std::vector<ObjectTruth> objects;
  std::vector<EventTruth> events;
};

// Generator-side meaning of a lexical entry, used by the oracle.
struct WordMeaning {
  enum class Kind { kNoun, kApproach, kDepart, kMove, kFast, kSlow, kSector };
  Kind kind = Kind::kNoun;
  int value = 0;  // class id for nouns, sector for preps
};

struct SimWorld {
  SimConfig config;
  std::vector<PosConfig> pos_table;
  std::vector<VocabEntry> vocabulary;
  GrammarSpec grammar;
  Lexicon hand_lexicon;                 // hand-engineered scoring reference
  std::vector<WordMeaning> meanings;    // by entry id

  std::vector<VideoClip> clips;
  std::vector<std::vector<SentenceTemplate>> positives;  // per clip

  // Ground truth, kept behind its own accessor so training call sites are
  // easy to audit: they must never touch it.
  const std::vector<ClipTruth>& ground_truth() const { return truths_; }
  std::vector<ClipTruth>& mutable_ground_truth() { return truths_; }

 private:
  std::vector<ClipTruth> truths_;
};

std::vector<PosConfig> build_pos_table(const SimConfig& config,
                                       const ScoringConfig& scoring);
std::vector<VocabEntry> build_vocabulary(const SimConfig& config);
GrammarSpec build_grammar(const SimConfig& config);
Lexicon build_hand_lexicon(const SimConfig& config, const ScoringConfig& scoring);
std::vector<WordMeaning> build_meanings(const SimConfig& config,
                                        const Lexicon& lexicon);

// Deterministic for a fixed seed: same seed, same corpus, byte for byte.
SimWorld generate_corpus(const SimConfig& config, const ScoringConfig& scoring,
                         std::uint64_t seed);

// True iff some injective assignment of participants to ground-truth objects
// satisfies every word's predicate.
bool oracle_label(const ClipTruth& truth, const SentenceTemplate& sentence,
                  const std::vector<WordMeaning>& meanings,
                  const SimConfig& config);

}  // namespace groundlex
