#include "groundlex/lexicon.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace groundlex {

namespace {

constexpr const char* kFormatTag = "groundlex-lexicon";
constexpr int kFormatVersion = 1;

void normalize(std::vector<double>& row, double floor) {
  double sum = 0.0;
  for (double& v : row) {
    if (v < floor) v = floor;
    sum += v;
  }
  for (double& v : row) v /= sum;
}

}  // namespace

std::string feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kObjectClass: return "object_class";
    case FeatureKind::kDistanceChange: return "distance_change";
    case FeatureKind::kActorSpeed: return "actor_speed";
    case FeatureKind::kPairAngle: return "pair_angle";
  }
  throw ConfigError("unknown feature kind");
}

FeatureKind feature_kind_from_name(std::string_view name) {
  if (name == "object_class") return FeatureKind::kObjectClass;
  if (name == "distance_change") return FeatureKind::kDistanceChange;
  if (name == "actor_speed") return FeatureKind::kActorSpeed;
  if (name == "pair_angle") return FeatureKind::kPairAngle;
  throw ParseError("unknown feature kind: " + std::string(name));
}

int Lexicon::find_entry(std::string_view word) const {
  for (const WordModel& entry : entries) {
    if (entry.word == word) return entry.entry_id;
  }
  return -1;
}

int Lexicon::find_pos(std::string_view pos_id) const {
  for (std::size_t i = 0; i < pos_table.size(); ++i) {
    if (pos_table[i].pos_id == pos_id) return static_cast<int>(i);
  }
  return -1;
}

Lexicon init_uniform(const std::vector<PosConfig>& pos_table,
                     const std::vector<VocabEntry>& vocabulary,
                     double jitter_amplitude, std::uint64_t seed) {
  for (const PosConfig& pos : pos_table) {
    if (pos.state_count < 1) {
      throw ConfigError("pos " + pos.pos_id + ": state_count must be >= 1");
    }
    if (pos.arity < 1) {
      throw ConfigError("pos " + pos.pos_id + ": arity must be >= 1");
    }
    for (const FeatureSpec& f : pos.features) {
      if (f.bins < 1) {
        throw ConfigError("pos " + pos.pos_id + ": feature bins must be >= 1");
      }
    }
  }

  Lexicon lexicon;
  lexicon.pos_table = pos_table;
  Rng rng(seed);

  auto jitter_row = [&](std::vector<double>& row) {
    if (jitter_amplitude > 0.0) {
      for (double& v : row) {
        v *= 1.0 + jitter_amplitude * rng.uniform(-1.0, 1.0);
      }
    }
    normalize(row, kProbFloor);
  };

  int next_id = 0;
  for (const VocabEntry& vocab : vocabulary) {
    int pos_index = -1;
    for (std::size_t i = 0; i < pos_table.size(); ++i) {
      if (pos_table[i].pos_id == vocab.pos_id) {
        pos_index = static_cast<int>(i);
        break;
      }
    }
    if (pos_index < 0) {
      throw ConfigError("word '" + vocab.word + "' has unknown part-of-speech '" +
                        vocab.pos_id + "'");
    }
    const PosConfig& pos = pos_table[static_cast<std::size_t>(pos_index)];
    const std::size_t states = static_cast<std::size_t>(pos.state_count);

    WordModel entry;
    entry.entry_id = next_id++;
    entry.word = vocab.word;
    entry.pos_index = pos_index;
    entry.initial.assign(states, 1.0 / static_cast<double>(states));
    jitter_row(entry.initial);
    entry.transition.assign(states, std::vector<double>(states, 1.0 / states));
    for (auto& row : entry.transition) jitter_row(row);
    entry.output.resize(states);
    for (auto& per_state : entry.output) {
      per_state.resize(pos.features.size());
      for (std::size_t n = 0; n < pos.features.size(); ++n) {
        const std::size_t z = static_cast<std::size_t>(pos.features[n].bins);
        per_state[n].assign(z, 1.0 / static_cast<double>(z));
        jitter_row(per_state[n]);
      }
    }
    lexicon.entries.push_back(std::move(entry));
  }
  return lexicon;
}

namespace {

void check_row(std::vector<Violation>& out, int entry_id, const std::string& where,
               const std::vector<double>& row) {
  double sum = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!(row[i] >= 0.0)) {
      std::ostringstream msg;
      msg << "negative or NaN probability " << row[i] << " at index " << i;
      out.push_back({entry_id, where, msg.str()});
    }
    sum += row[i];
  }
  if (std::abs(sum - 1.0) > 1e-10) {
    std::ostringstream msg;
    msg << "row sums to " << format_double(sum) << ", expected 1";
    out.push_back({entry_id, where, msg.str()});
  }
}

}  // namespace

std::vector<Violation> validate(const Lexicon& lexicon) {
  std::vector<Violation> out;
  for (std::size_t m = 0; m < lexicon.entries.size(); ++m) {
    const WordModel& entry = lexicon.entries[m];
    if (entry.entry_id != static_cast<int>(m)) {
      out.push_back({entry.entry_id, "entry ordering",
                     "entry_id not dense at position " + std::to_string(m)});
    }
    if (entry.pos_index < 0 ||
        entry.pos_index >= static_cast<int>(lexicon.pos_table.size())) {
      out.push_back({entry.entry_id, "pos_index", "not in pos_table"});
      continue;
    }
    const PosConfig& pos = lexicon.pos_of(entry);
    const std::size_t states = static_cast<std::size_t>(pos.state_count);
    if (entry.initial.size() != states) {
      out.push_back({entry.entry_id, "initial", "length mismatch"});
    } else {
      check_row(out, entry.entry_id, "initial", entry.initial);
    }
    if (entry.transition.size() != states) {
      out.push_back({entry.entry_id, "transition", "row count mismatch"});
    } else {
      for (std::size_t i = 0; i < states; ++i) {
        if (entry.transition[i].size() != states) {
          out.push_back({entry.entry_id, "transition row " + std::to_string(i),
                         "length mismatch"});
        } else {
          check_row(out, entry.entry_id, "transition row " + std::to_string(i),
                    entry.transition[i]);
        }
      }
    }
    if (entry.output.size() != states) {
      out.push_back({entry.entry_id, "output", "state count mismatch"});
      continue;
    }
    for (std::size_t i = 0; i < states; ++i) {
      if (entry.output[i].size() != pos.features.size()) {
        out.push_back({entry.entry_id, "output state " + std::to_string(i),
                       "feature count mismatch"});
        continue;
      }
      for (std::size_t n = 0; n < pos.features.size(); ++n) {
        const std::size_t z = static_cast<std::size_t>(pos.features[n].bins);
        std::string where =
            "output state " + std::to_string(i) + " feature " + std::to_string(n);
        if (entry.output[i][n].size() != z) {
          out.push_back({entry.entry_id, where, "bin count mismatch"});
        } else {
          check_row(out, entry.entry_id, where, entry.output[i][n]);
        }
      }
    }
  }
  return out;
}

std::string violation_summary(const std::vector<Violation>& violations) {
  std::ostringstream msg;
  for (const Violation& v : violations) {
    msg << "entry " << v.entry_id << " " << v.where << ": " << v.detail << "\n";
  }
  return msg.str();
}

void floor_and_renormalize(Lexicon& lexicon, double floor) {
  for (WordModel& entry : lexicon.entries) {
    normalize(entry.initial, floor);
    for (auto& row : entry.transition) normalize(row, floor);
    for (auto& per_state : entry.output) {
      for (auto& dist : per_state) normalize(dist, floor);
    }
  }
}

namespace {

using nlohmann::json;

json pos_to_json(const PosConfig& pos) {
  json features = json::array();
  for (const FeatureSpec& f : pos.features) {
    features.push_back({{"kind", feature_kind_name(f.kind)}, {"bins", f.bins}});
  }
  return {{"pos_id", pos.pos_id},
          {"category", pos.category},
          {"state_count", pos.state_count},
          {"arity", pos.arity},
          {"features", features}};
}

PosConfig pos_from_json(const json& j) {
  PosConfig pos;
  pos.pos_id = j.at("pos_id").get<std::string>();
  pos.category = j.at("category").get<std::string>();
  pos.state_count = j.at("state_count").get<int>();
  pos.arity = j.at("arity").get<int>();
  for (const json& f : j.at("features")) {
    pos.features.push_back({feature_kind_from_name(f.at("kind").get<std::string>()),
                            f.at("bins").get<int>()});
  }
  return pos;
}

}  // namespace

void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path) {
  json root;
  root["format"] = kFormatTag;
  root["version"] = kFormatVersion;
  root["pos_table"] = json::array();
  for (const PosConfig& pos : lexicon.pos_table) {
    root["pos_table"].push_back(pos_to_json(pos));
  }
  root["entries"] = json::array();
  for (const WordModel& entry : lexicon.entries) {
    json e;
    e["entry_id"] = entry.entry_id;
    e["word"] = entry.word;
    e["pos"] = lexicon.pos_of(entry).pos_id;
    e["initial"] = entry.initial;
    e["transition"] = entry.transition;
    e["output"] = entry.output;
    root["entries"].push_back(std::move(e));
  }
  std::ofstream file(path);
  if (!file) throw ParseError("cannot open for writing: " + path.string());
  file << root.dump(1) << "\n";
  if (!file) throw ParseError("write failed: " + path.string());
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw ParseError("cannot open: " + path.string());
  json root;
  try {
    root = json::parse(file);
  } catch (const json::parse_error& e) {
    throw ParseError("lexicon file " + path.string() + ": " + e.what());
  }
  try {
    if (root.value("format", "") != kFormatTag) {
      throw ParseError("lexicon file " + path.string() +
                       ": missing or wrong format tag");
    }
    if (root.at("version").get<int>() != kFormatVersion) {
      throw ParseError("lexicon file " + path.string() +
                       ": unsupported version " +
                       root.at("version").dump());
    }
    Lexicon lexicon;
    for (const json& p : root.at("pos_table")) {
      lexicon.pos_table.push_back(pos_from_json(p));
    }
    for (const json& e : root.at("entries")) {
      WordModel entry;
      entry.entry_id = e.at("entry_id").get<int>();
      entry.word = e.at("word").get<std::string>();
      const std::string pos_id = e.at("pos").get<std::string>();
      entry.pos_index = lexicon.find_pos(pos_id);
      if (entry.pos_index < 0) {
        throw ParseError("lexicon file " + path.string() + ": entry '" +
                         entry.word + "' references unknown pos '" + pos_id + "'");
      }
      entry.initial = e.at("initial").get<std::vector<double>>();
      entry.transition = e.at("transition").get<std::vector<std::vector<double>>>();
      entry.output =
          e.at("output").get<std::vector<std::vector<std::vector<double>>>>();
      lexicon.entries.push_back(std::move(entry));
    }
    return lexicon;
  } catch (const json::exception& e) {
    throw ParseError("lexicon file " + path.string() + ": " + e.what());
  }
}

namespace {

template <typename Visit>
void visit_rows(const Lexicon& lexicon, Visit visit) {
  for (const WordModel& entry : lexicon.entries) {
    visit(entry.initial);
    for (const auto& row : entry.transition) visit(row);
    for (const auto& per_state : entry.output) {
      for (const auto& dist : per_state) visit(dist);
    }
  }
}

}  // namespace

bool same_parameters(const Lexicon& a, const Lexicon& b) {
  if (a.entries.size() != b.entries.size()) return false;
  std::vector<const std::vector<double>*> rows_a, rows_b;
  visit_rows(a, [&](const std::vector<double>& r) { rows_a.push_back(&r); });
  visit_rows(b, [&](const std::vector<double>& r) { rows_b.push_back(&r); });
  if (rows_a.size() != rows_b.size()) return false;
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    if (*rows_a[i] != *rows_b[i]) return false;
  }
  return true;
}

double max_parameter_delta(const Lexicon& a, const Lexicon& b) {
  std::vector<const std::vector<double>*> rows_a, rows_b;
  visit_rows(a, [&](const std::vector<double>& r) { rows_a.push_back(&r); });
  visit_rows(b, [&](const std::vector<double>& r) { rows_b.push_back(&r); });
  if (rows_a.size() != rows_b.size()) {
    throw ConfigError("max_parameter_delta: shape mismatch");
  }
  double delta = 0.0;
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    if (rows_a[i]->size() != rows_b[i]->size()) {
      throw ConfigError("max_parameter_delta: row length mismatch");
    }
    for (std::size_t k = 0; k < rows_a[i]->size(); ++k) {
      delta = std::max(delta, std::abs((*rows_a[i])[k] - (*rows_b[i])[k]));
    }
  }
  return delta;
}

}  // namespace groundlex
