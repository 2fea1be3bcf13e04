#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "groundlex/common.hpp"

namespace groundlex {

// Applied after every renormalization so that log-space scoring stays finite.
inline constexpr double kProbFloor = 1e-12;

// What a word model observes per frame. Pair features read the word's first
// two arguments; actor features read the first argument.
enum class FeatureKind {
  kObjectClass,     // class id of the assigned detection
  kDistanceChange,  // sign-quantized change of inter-participant distance
  kActorSpeed,      // quantized displacement magnitude per frame
  kPairAngle,       // quantized angle of the vector between participants
};

std::string feature_kind_name(FeatureKind kind);
FeatureKind feature_kind_from_name(std::string_view name);

struct FeatureSpec {
  FeatureKind kind = FeatureKind::kObjectClass;
  int bins = 1;  // Z for this feature
};

// Per part-of-speech model configuration. Entries sharing a part of speech
// share state count, feature layout, and arity.
struct PosConfig {
  std::string pos_id;    // model configuration id, e.g. "noun", "tverb"
  std::string category;  // grammatical category: noun | verb | prep | adverb
  int state_count = 1;
  int arity = 1;
  std::vector<FeatureSpec> features;

  int feature_count() const { return static_cast<int>(features.size()); }
  int bins(int n) const { return features[static_cast<std::size_t>(n)].bins; }
};

// One lexical entry: a surface word plus its meaning HMM.
struct WordModel {
  int entry_id = 0;
  std::string word;
  int pos_index = 0;  // into Lexicon::pos_table

  std::vector<double> initial;                           // [I]
  std::vector<std::vector<double>> transition;           // [I][I]
  std::vector<std::vector<std::vector<double>>> output;  // [I][N][Z_n]
};

struct Lexicon {
  std::vector<PosConfig> pos_table;
  std::vector<WordModel> entries;

  const PosConfig& pos_of(const WordModel& entry) const {
    return pos_table[static_cast<std::size_t>(entry.pos_index)];
  }
  const PosConfig& pos_of_entry(int entry_id) const {
    return pos_of(entries[static_cast<std::size_t>(entry_id)]);
  }
  // -1 when absent.
  int find_entry(std::string_view word) const;
  int find_pos(std::string_view pos_id) const;
};

struct VocabEntry {
  std::string word;
  std::string pos_id;
};

// Uniform distributions, optionally perturbed by a seeded multiplicative
// jitter and renormalized. Amplitude 0 gives exactly uniform rows.
Lexicon init_uniform(const std::vector<PosConfig>& pos_table,
                     const std::vector<VocabEntry>& vocabulary,
                     double jitter_amplitude = 0.01, std::uint64_t seed = 0);

struct Violation {
  int entry_id = -1;       // -1 for table-level problems
  std::string where;       // e.g. "transition row 1"
  std::string detail;
};

// Reports every invariant violation; empty result means the lexicon is valid.
std::vector<Violation> validate(const Lexicon& lexicon);

std::string violation_summary(const std::vector<Violation>& violations);

// Clamps every probability to at least `floor` and renormalizes each
// distribution to sum to one.
void floor_and_renormalize(Lexicon& lexicon, double floor = kProbFloor);

void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path);
Lexicon load_lexicon(const std::filesystem::path& path);

// Exact comparison of all distributions (structure and bit pattern).
bool same_parameters(const Lexicon& a, const Lexicon& b);

// Largest absolute difference over all distributions; requires same shape.
double max_parameter_delta(const Lexicon& a, const Lexicon& b);

}  // namespace groundlex
