#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "groundlex/lexicon.hpp"

namespace groundlex {

// A parsed sentence: words bound to lexical entries, each with the tuple of
// participant indices its predicate applies to.
struct SentenceTemplate {
  std::vector<int> words;                // entry ids
  std::vector<std::vector<int>> args;    // per word, participant indices
  int participant_count = 0;
  bool ambiguous_parse = false;          // set when several rules matched

  friend bool operator==(const SentenceTemplate& a, const SentenceTemplate& b) {
    return a.words == b.words && a.args == b.args &&
           a.participant_count == b.participant_count;
  }
};

// Stable ordering key (used for deduplication and canonical sort).
std::string template_key(const SentenceTemplate& sentence);

// One production pattern: a sequence of category slots with fixed
// participant wiring. A slot accepts any entry whose part-of-speech category
// matches and whose arity equals the slot's argument count.
struct TemplateRule {
  struct Slot {
    std::string category;
    std::vector<int> args;
  };
  std::vector<Slot> slots;
  bool in_restricted = false;

  int participant_count() const;
};

struct GrammarSpec {
  std::vector<TemplateRule> rules;
};

GrammarSpec load_grammar(const std::filesystem::path& path);
void save_grammar(const GrammarSpec& grammar, const std::filesystem::path& path);

// Matches the token sequence against the rules in order; the first match
// wins and further matches only set the ambiguity flag.
SentenceTemplate parse(const std::vector<std::string>& tokens,
                       const GrammarSpec& grammar, const Lexicon& lexicon);

// Surface form of a template (one token per word).
std::vector<std::string> realize(const SentenceTemplate& sentence,
                                 const Lexicon& lexicon);

std::string realize_joined(const SentenceTemplate& sentence,
                           const Lexicon& lexicon);

// Complete, duplicate-free enumeration of the restricted fragment, in rule
// order then lexicographic entry order.
std::vector<SentenceTemplate> enumerate_restricted(const GrammarSpec& grammar,
                                                   const Lexicon& lexicon,
                                                   std::size_t cap = 100000);

// Full-grammar enumeration (every rule); same ordering and cap semantics.
std::vector<SentenceTemplate> enumerate_full(const GrammarSpec& grammar,
                                             const Lexicon& lexicon,
                                             std::size_t cap = 100000);

// One clip's positive sentence plus sampled negatives.
struct CompetitionSet {
  int clip_id = -1;
  std::vector<SentenceTemplate> sentences;
  int positive_index = 0;

  int size() const { return static_cast<int>(sentences.size()); }
  const SentenceTemplate& positive() const {
    return sentences[static_cast<std::size_t>(positive_index)];
  }
};

// Uniform sample, without replacement, of `count` sentences that are false
// for the clip (clip_truths[i] labels enumeration[i]); the positive sentence
// is pooled in. Deterministic for a fixed seed.
CompetitionSet sample_negatives(const std::vector<bool>& clip_truths,
                                const std::vector<SentenceTemplate>& enumeration,
                                const SentenceTemplate& positive, int count,
                                std::uint64_t seed, int clip_id = -1);

}  // namespace groundlex
