#include "groundlex/grammar.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace groundlex {

std::string template_key(const SentenceTemplate& sentence) {
  std::ostringstream key;
  key << sentence.participant_count << "|";
  for (std::size_t l = 0; l < sentence.words.size(); ++l) {
    key << sentence.words[l] << "(";
    for (std::size_t a = 0; a < sentence.args[l].size(); ++a) {
      if (a) key << ",";
      key << sentence.args[l][a];
    }
    key << ")";
  }
  return key.str();
}

int TemplateRule::participant_count() const {
  int max_index = -1;
  for (const Slot& slot : slots) {
    for (int p : slot.args) max_index = std::max(max_index, p);
  }
  return max_index + 1;
}

namespace {

using nlohmann::json;

void check_rule(const TemplateRule& rule) {
  const int participants = rule.participant_count();
  std::vector<bool> seen(static_cast<std::size_t>(participants), false);
  for (const TemplateRule::Slot& slot : rule.slots) {
    if (slot.args.empty()) {
      throw ConfigError("grammar rule slot '" + slot.category +
                        "' has no arguments");
    }
    for (int p : slot.args) {
      if (p < 0) throw ConfigError("grammar rule has negative participant index");
      seen[static_cast<std::size_t>(p)] = true;
    }
  }
  for (std::size_t p = 0; p < seen.size(); ++p) {
    if (!seen[p]) {
      throw ConfigError("grammar rule never mentions participant " +
                        std::to_string(p));
    }
  }
}

}  // namespace

GrammarSpec load_grammar(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw ParseError("cannot open grammar file: " + path.string());
  json root;
  try {
    root = json::parse(file);
  } catch (const json::parse_error& e) {
    throw ParseError("grammar file " + path.string() + ": " + e.what());
  }
  GrammarSpec grammar;
  try {
    for (const json& r : root.at("rules")) {
      TemplateRule rule;
      rule.in_restricted = r.value("restricted", false);
      for (const json& s : r.at("slots")) {
        TemplateRule::Slot slot;
        slot.category = s.at("category").get<std::string>();
        slot.args = s.at("args").get<std::vector<int>>();
        rule.slots.push_back(std::move(slot));
      }
      check_rule(rule);
      grammar.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw ParseError("grammar file " + path.string() + ": " + e.what());
  }
  return grammar;
}

void save_grammar(const GrammarSpec& grammar, const std::filesystem::path& path) {
  json rules = json::array();
  for (const TemplateRule& rule : grammar.rules) {
    json slots = json::array();
    for (const TemplateRule::Slot& slot : rule.slots) {
      slots.push_back({{"category", slot.category}, {"args", slot.args}});
    }
    rules.push_back({{"restricted", rule.in_restricted}, {"slots", slots}});
  }
  std::ofstream file(path);
  if (!file) throw ParseError("cannot open for writing: " + path.string());
  file << json{{"rules", rules}}.dump(1) << "\n";
}

namespace {

bool rule_matches(const TemplateRule& rule, const std::vector<int>& entry_ids,
                  const Lexicon& lexicon) {
  if (rule.slots.size() != entry_ids.size()) return false;
  for (std::size_t i = 0; i < rule.slots.size(); ++i) {
    const PosConfig& pos = lexicon.pos_of_entry(entry_ids[i]);
    if (pos.category != rule.slots[i].category) return false;
    if (pos.arity != static_cast<int>(rule.slots[i].args.size())) return false;
  }
  return true;
}

SentenceTemplate instantiate(const TemplateRule& rule,
                             const std::vector<int>& entry_ids) {
  SentenceTemplate sentence;
  sentence.words = entry_ids;
  for (const TemplateRule::Slot& slot : rule.slots) {
    sentence.args.push_back(slot.args);
  }
  sentence.participant_count = rule.participant_count();
  return sentence;
}

}  // namespace

SentenceTemplate parse(const std::vector<std::string>& tokens,
                       const GrammarSpec& grammar, const Lexicon& lexicon) {
  if (tokens.empty()) throw ParseError("empty sentence");
  std::vector<int> entry_ids;
  entry_ids.reserve(tokens.size());
  for (const std::string& token : tokens) {
    int id = lexicon.find_entry(token);
    if (id < 0) throw ParseError("out-of-vocabulary token '" + token + "'");
    entry_ids.push_back(id);
  }
  const TemplateRule* matched = nullptr;
  bool ambiguous = false;
  for (const TemplateRule& rule : grammar.rules) {
    if (rule_matches(rule, entry_ids, lexicon)) {
      if (matched == nullptr) {
        matched = &rule;
      } else {
        ambiguous = true;
        break;
      }
    }
  }
  if (matched == nullptr) {
    std::ostringstream msg;
    msg << "no parse for sentence:";
    for (const std::string& t : tokens) msg << " " << t;
    throw ParseError(msg.str());
  }
  SentenceTemplate sentence = instantiate(*matched, entry_ids);
  sentence.ambiguous_parse = ambiguous;
  return sentence;
}

std::vector<std::string> realize(const SentenceTemplate& sentence,
                                 const Lexicon& lexicon) {
  std::vector<std::string> tokens;
  tokens.reserve(sentence.words.size());
  for (int id : sentence.words) {
    tokens.push_back(lexicon.entries[static_cast<std::size_t>(id)].word);
  }
  return tokens;
}

std::string realize_joined(const SentenceTemplate& sentence,
                           const Lexicon& lexicon) {
  std::ostringstream out;
  const std::vector<std::string> tokens = realize(sentence, lexicon);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out << " ";
    out << tokens[i];
  }
  return out.str();
}

namespace {

std::vector<SentenceTemplate> enumerate_rules(const GrammarSpec& grammar,
                                              const Lexicon& lexicon,
                                              bool restricted_only,
                                              std::size_t cap) {
  std::vector<SentenceTemplate> out;
  std::set<std::string> seen;
  for (const TemplateRule& rule : grammar.rules) {
    if (restricted_only && !rule.in_restricted) continue;
    // candidate entries per slot
    std::vector<std::vector<int>> candidates(rule.slots.size());
    for (std::size_t s = 0; s < rule.slots.size(); ++s) {
      for (const WordModel& entry : lexicon.entries) {
        const PosConfig& pos = lexicon.pos_of(entry);
        if (pos.category == rule.slots[s].category &&
            pos.arity == static_cast<int>(rule.slots[s].args.size())) {
          candidates[s].push_back(entry.entry_id);
        }
      }
    }
    bool any_empty = false;
    for (const auto& c : candidates) any_empty = any_empty || c.empty();
    if (any_empty) continue;

    std::vector<std::size_t> pick(rule.slots.size(), 0);
    while (true) {
      std::vector<int> entry_ids(rule.slots.size());
      for (std::size_t s = 0; s < rule.slots.size(); ++s) {
        entry_ids[s] = candidates[s][pick[s]];
      }
      SentenceTemplate sentence = instantiate(rule, entry_ids);
      if (seen.insert(template_key(sentence)).second) {
        out.push_back(std::move(sentence));
        if (out.size() > cap) {
          throw ConfigError("restricted grammar too large: enumeration exceeds " +
                            std::to_string(cap) + " sentences");
        }
      }
      // odometer
      std::size_t s = rule.slots.size();
      while (s > 0) {
        --s;
        if (++pick[s] < candidates[s].size()) break;
        pick[s] = 0;
        if (s == 0) goto rule_done;
      }
    }
  rule_done:;
  }
  return out;
}

}  // namespace

std::vector<SentenceTemplate> enumerate_restricted(const GrammarSpec& grammar,
                                                   const Lexicon& lexicon,
                                                   std::size_t cap) {
  return enumerate_rules(grammar, lexicon, true, cap);
}

std::vector<SentenceTemplate> enumerate_full(const GrammarSpec& grammar,
                                             const Lexicon& lexicon,
                                             std::size_t cap) {
  return enumerate_rules(grammar, lexicon, false, cap);
}

CompetitionSet sample_negatives(const std::vector<bool>& clip_truths,
                                const std::vector<SentenceTemplate>& enumeration,
                                const SentenceTemplate& positive, int count,
                                std::uint64_t seed, int clip_id) {
  if (clip_truths.size() != enumeration.size()) {
    throw ConfigError("sample_negatives: truth labels do not match enumeration");
  }
  if (count < 0) throw ConfigError("sample_negatives: negative count < 0");

  std::vector<std::size_t> false_indices;
  for (std::size_t i = 0; i < enumeration.size(); ++i) {
    if (!clip_truths[i]) false_indices.push_back(i);
  }
  if (static_cast<std::size_t>(count) > false_indices.size()) {
    std::ostringstream msg;
    msg << "negative population too small: need " << count << ", have "
        << false_indices.size();
    throw ConfigError(msg.str());
  }

  // Partial Fisher-Yates: the first `count` slots are a uniform sample
  // without replacement.
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    int remaining = static_cast<int>(false_indices.size()) - i;
    int j = i + rng.uniform_int(remaining);
    std::swap(false_indices[static_cast<std::size_t>(i)],
              false_indices[static_cast<std::size_t>(j)]);
  }

  CompetitionSet set;
  set.clip_id = clip_id;
  set.sentences.push_back(positive);
  set.positive_index = 0;
  for (int i = 0; i < count; ++i) {
    set.sentences.push_back(enumeration[false_indices[static_cast<std::size_t>(i)]]);
  }
  return set;
}

}  // namespace groundlex
