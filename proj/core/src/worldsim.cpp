#include "groundlex/worldsim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace groundlex {

namespace {

constexpr const char* kNounPos = "noun";
constexpr const char* kTVerbPos = "tverb";
constexpr const char* kIVerbPos = "iverb";
constexpr const char* kAdverbPos = "adverb";
constexpr const char* kPrepPos = "prep";

}  // namespace

std::vector<PosConfig> build_pos_table(const SimConfig& config,
                                       const ScoringConfig& scoring) {
  const int class_count = static_cast<int>(config.nouns.size());
  const int speed_bins = scoring.speed_bins();
  std::vector<PosConfig> table;
  table.push_back({kNounPos, "noun", 1, 1,
                   {{FeatureKind::kObjectClass, class_count}}});
  table.push_back({kTVerbPos, "verb", 3, 2,
                   {{FeatureKind::kDistanceChange, 3},
                    {FeatureKind::kActorSpeed, speed_bins}}});
  table.push_back({kIVerbPos, "verb", 2, 1,
                   {{FeatureKind::kActorSpeed, speed_bins}}});
  table.push_back({kAdverbPos, "adverb", 1, 1,
                   {{FeatureKind::kActorSpeed, speed_bins}}});
  table.push_back({kPrepPos, "prep", 1, 2,
                   {{FeatureKind::kPairAngle, scoring.angle_sectors}}});
  return table;
}

std::vector<VocabEntry> build_vocabulary(const SimConfig& config) {
  std::vector<VocabEntry> vocab;
  for (const std::string& noun : config.nouns) vocab.push_back({noun, kNounPos});
  for (const SimConfig::Verb& verb : config.verbs) {
    vocab.push_back({verb.word, verb.kind == "move" ? kIVerbPos : kTVerbPos});
  }
  for (const SimConfig::Adverb& adverb : config.adverbs) {
    vocab.push_back({adverb.word, kAdverbPos});
  }
  for (const SimConfig::Prep& prep : config.preps) {
    vocab.push_back({prep.word, kPrepPos});
  }
  return vocab;
}

GrammarSpec build_grammar(const SimConfig& config) {
  GrammarSpec grammar;
  bool has_iverb = false, has_tverb = false;
  for (const SimConfig::Verb& verb : config.verbs) {
    (verb.kind == "move" ? has_iverb : has_tverb) = true;
  }
  auto add = [&](bool restricted, std::vector<TemplateRule::Slot> slots) {
    TemplateRule rule;
    rule.in_restricted = restricted;
    rule.slots = std::move(slots);
    grammar.rules.push_back(std::move(rule));
  };
  if (has_iverb) add(true, {{"noun", {0}}, {"verb", {0}}});
  if (has_tverb) add(true, {{"noun", {0}}, {"verb", {0, 1}}, {"noun", {1}}});
  if (!config.adverbs.empty()) {
    if (has_iverb) add(false, {{"noun", {0}}, {"verb", {0}}, {"adverb", {0}}});
    if (has_tverb) {
      add(false,
          {{"noun", {0}}, {"verb", {0, 1}}, {"noun", {1}}, {"adverb", {0}}});
    }
  }
  if (!config.preps.empty()) {
    if (has_iverb) {
      add(false,
          {{"noun", {0}}, {"prep", {0, 1}}, {"noun", {1}}, {"verb", {0}}});
    }
    if (has_tverb) {
      add(false, {{"noun", {0}},
                  {"prep", {0, 1}},
                  {"noun", {1}},
                  {"verb", {0, 2}},
                  {"noun", {2}}});
    }
  }
  return grammar;
}

namespace {

// Hand-engineered emission and transition mass. The distributions describe
// the scripted motion regimes: an idle phase, a motion phase, and (for the
// transitive verbs) an arrival phase.
struct HandNumbers {
  // speed distributions: {still, slow, fast}
  static std::vector<double> speed_still() { return {0.80, 0.15, 0.05}; }
  static std::vector<double> speed_slow() { return {0.15, 0.75, 0.10}; }
  static std::vector<double> speed_fast() { return {0.15, 0.10, 0.75}; }
  static std::vector<double> speed_moving() { return {0.10, 0.45, 0.45}; }
  // distance-change distributions: {decreasing, stable, increasing}
  static std::vector<double> dist_stable() { return {0.15, 0.70, 0.15}; }
  static std::vector<double> dist_down() { return {0.75, 0.20, 0.05}; }
  static std::vector<double> dist_up() { return {0.05, 0.20, 0.75}; }
};

std::vector<double> class_dist(int class_count, int target, double mass) {
  std::vector<double> dist(static_cast<std::size_t>(class_count),
                           class_count > 1 ? (1.0 - mass) / (class_count - 1)
                                           : 1.0);
  dist[static_cast<std::size_t>(target)] = class_count > 1 ? mass : 1.0;
  return dist;
}

std::vector<double> sector_dist(int sectors, int target, double mass) {
  std::vector<double> dist(static_cast<std::size_t>(sectors),
                           sectors > 1 ? (1.0 - mass) / (sectors - 1) : 1.0);
  dist[static_cast<std::size_t>(target)] = sectors > 1 ? mass : 1.0;
  return dist;
}

}  // namespace

Lexicon build_hand_lexicon(const SimConfig& config,
                           const ScoringConfig& scoring) {
  Lexicon lexicon =
      init_uniform(build_pos_table(config, scoring), build_vocabulary(config),
                   /*jitter_amplitude=*/0.0, /*seed=*/0);
  const int class_count = static_cast<int>(config.nouns.size());

  for (WordModel& entry : lexicon.entries) {
    const PosConfig& pos = lexicon.pos_of(entry);
    if (pos.pos_id == kNounPos) {
      int class_id = -1;
      for (int c = 0; c < class_count; ++c) {
        if (config.nouns[static_cast<std::size_t>(c)] == entry.word) class_id = c;
      }
      entry.output[0][0] = class_dist(class_count, class_id, 0.9);
    } else if (pos.pos_id == kTVerbPos) {
      std::string kind;
      for (const SimConfig::Verb& verb : config.verbs) {
        if (verb.word == entry.word) kind = verb.kind;
      }
      // states: 0 idle, 1 in motion, 2 settled
      entry.initial = {0.55, 0.40, 0.05};
      entry.transition = {{0.75, 0.24, 0.01},
                          {0.02, 0.83, 0.15},
                          {0.01, 0.04, 0.95}};
      const bool approaching = kind == "approach";
      entry.output[0] = {HandNumbers::dist_stable(), HandNumbers::speed_still()};
      entry.output[1] = {approaching ? HandNumbers::dist_down()
                                     : HandNumbers::dist_up(),
                         HandNumbers::speed_moving()};
      entry.output[2] = {HandNumbers::dist_stable(), HandNumbers::speed_still()};
    } else if (pos.pos_id == kIVerbPos) {
      // states: 0 idle, 1 in motion
      entry.initial = {0.6, 0.4};
      entry.transition = {{0.8, 0.2}, {0.15, 0.85}};
      entry.output[0] = {HandNumbers::speed_still()};
      entry.output[1] = {HandNumbers::speed_moving()};
    } else if (pos.pos_id == kAdverbPos) {
      std::string kind;
      for (const SimConfig::Adverb& adverb : config.adverbs) {
        if (adverb.word == entry.word) kind = adverb.kind;
      }
      // one state mixing the idle and motion phases of the clip
      entry.output[0] = {kind == "fast" ? std::vector<double>{0.40, 0.08, 0.52}
                                        : std::vector<double>{0.40, 0.52, 0.08}};
    } else if (pos.pos_id == kPrepPos) {
      int sector = 0;
      for (const SimConfig::Prep& prep : config.preps) {
        if (prep.word == entry.word) sector = prep.sector;
      }
      entry.output[0] = {sector_dist(scoring.angle_sectors, sector, 0.85)};
    }
  }
  floor_and_renormalize(lexicon);
  return lexicon;
}

std::vector<WordMeaning> build_meanings(const SimConfig& config,
                                        const Lexicon& lexicon) {
  std::vector<WordMeaning> meanings(lexicon.entries.size());
  for (const WordModel& entry : lexicon.entries) {
    WordMeaning& meaning = meanings[static_cast<std::size_t>(entry.entry_id)];
    const std::string& word = entry.word;
    bool found = false;
    for (std::size_t c = 0; c < config.nouns.size(); ++c) {
      if (config.nouns[c] == word) {
        meaning = {WordMeaning::Kind::kNoun, static_cast<int>(c)};
        found = true;
      }
    }
    for (const SimConfig::Verb& verb : config.verbs) {
      if (verb.word == word) {
        meaning.kind = verb.kind == "approach" ? WordMeaning::Kind::kApproach
                       : verb.kind == "depart" ? WordMeaning::Kind::kDepart
                                               : WordMeaning::Kind::kMove;
        found = true;
      }
    }
    for (const SimConfig::Adverb& adverb : config.adverbs) {
      if (adverb.word == word) {
        meaning.kind = adverb.kind == "fast" ? WordMeaning::Kind::kFast
                                             : WordMeaning::Kind::kSlow;
        found = true;
      }
    }
    for (const SimConfig::Prep& prep : config.preps) {
      if (prep.word == word) {
        meaning = {WordMeaning::Kind::kSector, prep.sector};
        found = true;
      }
    }
    if (!found) throw ConfigError("no meaning for word '" + word + "'");
  }
  return meanings;
}

namespace {

double dist(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

double path_length(const ObjectTruth& object, int begin, int end) {
  double total = 0.0;
  for (int t = begin + 1; t <= end; ++t) {
    total += dist(object.positions[static_cast<std::size_t>(t)],
                  object.positions[static_cast<std::size_t>(t - 1)]);
  }
  return total;
}

bool approach_like(const ObjectTruth& actor, const ObjectTruth& target,
                   const SimConfig& config, bool toward) {
  const int frames = static_cast<int>(actor.positions.size());
  for (int u = 0; u < frames; ++u) {
    for (int v = u + 1; v < frames; ++v) {
      double d_u = dist(actor.positions[static_cast<std::size_t>(u)],
                        target.positions[static_cast<std::size_t>(u)]);
      double d_v = dist(actor.positions[static_cast<std::size_t>(v)],
                        target.positions[static_cast<std::size_t>(v)]);
      double change = toward ? d_u - d_v : d_v - d_u;
      double near = toward ? d_v : d_u;
      if (change >= config.oracle_travel && near <= config.oracle_near_radius &&
          path_length(actor, u, v) >= 0.7 * change) {
        return true;
      }
    }
  }
  return false;
}

double max_window_speed(const ObjectTruth& object, const SimConfig& config) {
  const int frames = static_cast<int>(object.positions.size());
  const int window = std::max(1, std::min(config.oracle_speed_window, frames - 1));
  double best = 0.0;
  for (int u = 0; u + window < frames; ++u) {
    double mean = path_length(object, u, u + window) / window;
    best = std::max(best, mean);
  }
  if (frames >= 2 && best == 0.0) {
    best = path_length(object, 0, frames - 1) / (frames - 1);
  }
  return best;
}

bool holds(const WordMeaning& meaning, const std::vector<const ObjectTruth*>& args,
           const SimConfig& config, int angle_sectors) {
  switch (meaning.kind) {
    case WordMeaning::Kind::kNoun:
      return args[0]->class_id == meaning.value;
    case WordMeaning::Kind::kApproach:
      return approach_like(*args[0], *args[1], config, /*toward=*/true);
    case WordMeaning::Kind::kDepart:
      return approach_like(*args[0], *args[1], config, /*toward=*/false);
    case WordMeaning::Kind::kMove: {
      const int frames = static_cast<int>(args[0]->positions.size());
      return path_length(*args[0], 0, frames - 1) >= config.oracle_move_travel;
    }
    case WordMeaning::Kind::kFast:
      return max_window_speed(*args[0], config) >= config.oracle_fast_speed;
    case WordMeaning::Kind::kSlow: {
      const int frames = static_cast<int>(args[0]->positions.size());
      return path_length(*args[0], 0, frames - 1) >= config.oracle_move_travel &&
             max_window_speed(*args[0], config) < config.oracle_fast_speed;
    }
    case WordMeaning::Kind::kSector: {
      const int frames = static_cast<int>(args[0]->positions.size());
      int hits = 0;
      for (int t = 0; t < frames; ++t) {
        double dx = args[1]->positions[static_cast<std::size_t>(t)][0] -
                    args[0]->positions[static_cast<std::size_t>(t)][0];
        double dy = args[1]->positions[static_cast<std::size_t>(t)][1] -
                    args[0]->positions[static_cast<std::size_t>(t)][1];
        if (quantize_angle(dx, dy, angle_sectors) == meaning.value) ++hits;
      }
      return hits >= config.oracle_prep_fraction * frames;
    }
  }
  return false;
}

bool assignment_satisfies(const ClipTruth& truth,
                          const SentenceTemplate& sentence,
                          const std::vector<WordMeaning>& meanings,
                          const SimConfig& config,
                          const std::vector<int>& participant_to_object) {
  for (std::size_t l = 0; l < sentence.words.size(); ++l) {
    const WordMeaning& meaning =
        meanings[static_cast<std::size_t>(sentence.words[l])];
    std::vector<const ObjectTruth*> args;
    for (int p : sentence.args[l]) {
      args.push_back(&truth.objects[static_cast<std::size_t>(
          participant_to_object[static_cast<std::size_t>(p)])]);
    }
    if (!holds(meaning, args, config, 4)) return false;
  }
  return true;
}

bool try_assignments(const ClipTruth& truth, const SentenceTemplate& sentence,
                     const std::vector<WordMeaning>& meanings,
                     const SimConfig& config, std::vector<int>& mapping,
                     std::vector<bool>& used, std::size_t participant) {
  if (participant == mapping.size()) {
    return assignment_satisfies(truth, sentence, meanings, config, mapping);
  }
  for (std::size_t o = 0; o < truth.objects.size(); ++o) {
    if (used[o]) continue;
    used[o] = true;
    mapping[participant] = static_cast<int>(o);
    if (try_assignments(truth, sentence, meanings, config, mapping, used,
                        participant + 1)) {
      used[o] = false;
      return true;
    }
    used[o] = false;
  }
  return false;
}

}  // namespace

bool oracle_label(const ClipTruth& truth, const SentenceTemplate& sentence,
                  const std::vector<WordMeaning>& meanings,
                  const SimConfig& config) {
  if (truth.objects.size() <
      static_cast<std::size_t>(sentence.participant_count)) {
    return false;
  }
  std::vector<int> mapping(static_cast<std::size_t>(sentence.participant_count));
  std::vector<bool> used(truth.objects.size(), false);
  return try_assignments(truth, sentence, meanings, config, mapping, used, 0);
}

namespace {

struct Script {
  // per object: class id and full trajectory
  std::vector<int> classes;
  std::vector<std::vector<std::array<double, 2>>> paths;
  std::vector<EventTruth> events;
};

std::array<double, 2> sample_point(Rng& rng, const SimConfig& config,
                                   double margin) {
  return {rng.uniform(margin, config.world_size - margin),
          rng.uniform(margin, config.world_size - margin)};
}

// Straight-line move of `who` toward `goal` at `speed`, stopping at
// `stop_radius`; the object idles once it arrives.
void walk_toward(std::vector<std::array<double, 2>>& path, int from_frame,
                 int to_frame, const std::array<double, 2>& goal, double speed,
                 double stop_radius) {
  for (int t = from_frame + 1; t <= to_frame; ++t) {
    std::array<double, 2> at = path[static_cast<std::size_t>(t - 1)];
    double dx = goal[0] - at[0];
    double dy = goal[1] - at[1];
    double remaining = std::hypot(dx, dy);
    if (remaining > stop_radius) {
      double step = std::min(speed, remaining - stop_radius);
      at[0] += dx / remaining * step;
      at[1] += dy / remaining * step;
    }
    path[static_cast<std::size_t>(t)] = at;
  }
}

Script make_script(Rng& rng, const SimConfig& config, int frames) {
  const int class_count = static_cast<int>(config.nouns.size());
  const int object_count = 2 + config.distractor_count;
  if (object_count > class_count) {
    throw ConfigError("script needs " + std::to_string(object_count) +
                      " distinct classes but only " +
                      std::to_string(class_count) + " nouns are configured");
  }

  // distinct classes per clip
  std::vector<int> classes(static_cast<std::size_t>(class_count));
  for (int c = 0; c < class_count; ++c) classes[static_cast<std::size_t>(c)] = c;
  rng.shuffle(classes);
  classes.resize(static_cast<std::size_t>(object_count));

  Script script;
  script.classes = classes;
  script.paths.assign(static_cast<std::size_t>(object_count),
                      std::vector<std::array<double, 2>>(
                          static_cast<std::size_t>(frames)));

  const bool fast = rng.uniform() < 0.5;
  const double speed = (fast ? config.fast_speed : config.slow_speed) *
                       (1.0 + 0.1 * rng.uniform(-1.0, 1.0));
  const bool intransitive_only = rng.uniform() < config.intransitive_only_prob;

  const int duration = frames / 2 + rng.uniform_int(std::max(1, frames / 4));
  const int begin = 1 + rng.uniform_int(std::max(1, frames - duration - 1));
  const int end = std::min(frames - 1, begin + duration);

  // patient and distractors idle at fixed spots
  for (int o = 1; o < object_count; ++o) {
    std::array<double, 2> spot = sample_point(rng, config, 1.0);
    for (int t = 0; t < frames; ++t) {
      script.paths[static_cast<std::size_t>(o)][static_cast<std::size_t>(t)] = spot;
    }
  }

  auto& actor = script.paths[0];
  if (intransitive_only) {
    // wander between waypoints for the event span
    std::array<double, 2> at = sample_point(rng, config, 1.0);
    for (int t = 0; t <= begin; ++t) actor[static_cast<std::size_t>(t)] = at;
    int t = begin;
    while (t < end) {
      std::array<double, 2> waypoint = sample_point(rng, config, 1.0);
      int leg = std::min(end, t + 4 + rng.uniform_int(4));
      walk_toward(actor, t, leg, waypoint, speed, 0.0);
      t = leg;
    }
    for (int u = end + 1; u < frames; ++u) {
      actor[static_cast<std::size_t>(u)] = actor[static_cast<std::size_t>(end)];
    }
    int move_entry_object = 0;
    script.events.push_back({-1, {move_entry_object}, begin, end});
    return script;
  }

  const bool toward = rng.uniform() < 0.5;
  const std::array<double, 2> patient = script.paths[1][0];
  const double travel = speed * (end - begin);

  std::array<double, 2> start{};
  const double start_distance =
      toward ? config.stop_radius + travel
             : std::max(0.2, config.stop_radius * 0.5);
  for (int attempt = 0;; ++attempt) {
    double angle = rng.uniform(0.0, 2.0 * M_PI);
    start = {patient[0] + start_distance * std::cos(angle),
             patient[1] + start_distance * std::sin(angle)};
    if (start[0] > 0.5 && start[0] < config.world_size - 0.5 && start[1] > 0.5 &&
        start[1] < config.world_size - 0.5) {
      break;
    }
    if (attempt > 200) {
      throw ConfigError("cannot place actor inside the world; "
                        "world_size too small for the configured speeds");
    }
  }
  for (int t = 0; t <= begin; ++t) actor[static_cast<std::size_t>(t)] = start;
  if (toward) {
    walk_toward(actor, begin, end, patient, speed, config.stop_radius);
  } else {
    // flee along the ray away from the patient
    double dx = start[0] - patient[0];
    double dy = start[1] - patient[1];
    double norm = std::max(1e-9, std::hypot(dx, dy));
    std::array<double, 2> away{patient[0] + dx / norm * (start_distance + travel),
                               patient[1] + dy / norm * (start_distance + travel)};
    away[0] = std::clamp(away[0], 0.5, config.world_size - 0.5);
    away[1] = std::clamp(away[1], 0.5, config.world_size - 0.5);
    walk_toward(actor, begin, end, away, speed, 0.0);
  }
  for (int u = end + 1; u < frames; ++u) {
    actor[static_cast<std::size_t>(u)] = actor[static_cast<std::size_t>(end)];
  }
  script.events.push_back({toward ? -2 : -3, {0, 1}, begin, end});
  return script;
}

}  // namespace

SimWorld generate_corpus(const SimConfig& config, const ScoringConfig& scoring,
                         std::uint64_t seed) {
  SimWorld world;
  world.config = config;
  world.pos_table = build_pos_table(config, scoring);
  world.vocabulary = build_vocabulary(config);
  world.grammar = build_grammar(config);
  world.hand_lexicon = build_hand_lexicon(config, scoring);
  world.meanings = build_meanings(config, world.hand_lexicon);

  // entry ids of the verbs, for event records
  int approach_entry = -1, depart_entry = -1, move_entry = -1;
  for (const WordModel& entry : world.hand_lexicon.entries) {
    const WordMeaning& meaning =
        world.meanings[static_cast<std::size_t>(entry.entry_id)];
    if (meaning.kind == WordMeaning::Kind::kApproach) approach_entry = entry.entry_id;
    if (meaning.kind == WordMeaning::Kind::kDepart) depart_entry = entry.entry_id;
    if (meaning.kind == WordMeaning::Kind::kMove) move_entry = entry.entry_id;
  }

  const std::vector<SentenceTemplate> all_sentences =
      enumerate_full(world.grammar, world.hand_lexicon);
  std::set<std::string> restricted_keys;
  for (const SentenceTemplate& s :
       enumerate_restricted(world.grammar, world.hand_lexicon)) {
    restricted_keys.insert(template_key(s));
  }

  Rng corpus_rng(seed);
  for (int c = 0; c < config.clip_count; ++c) {
    Rng rng = corpus_rng.fork(static_cast<std::uint64_t>(c));
    const int frames =
        config.min_frames +
        rng.uniform_int(config.max_frames - config.min_frames + 1);

    Script script = make_script(rng, config, frames);

    ClipTruth truth;
    for (std::size_t o = 0; o < script.paths.size(); ++o) {
      ObjectTruth object;
      object.object_id = static_cast<int>(o);
      object.class_id = script.classes[o];
      object.positions = script.paths[o];
      truth.objects.push_back(std::move(object));
    }
    for (EventTruth event : script.events) {
      event.verb_entry = event.verb_entry == -2   ? approach_entry
                         : event.verb_entry == -3 ? depart_entry
                                                  : move_entry;
      truth.events.push_back(event);
    }

    VideoClip clip;
    clip.clip_id = c;
    clip.frames.resize(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
      auto& detections = clip.frames[static_cast<std::size_t>(t)];
      for (const ObjectTruth& object : truth.objects) {
        Detection d;
        d.class_id = object.class_id;
        d.x = object.positions[static_cast<std::size_t>(t)][0] +
              (config.position_jitter > 0.0
                   ? rng.normal(0.0, config.position_jitter)
                   : 0.0);
        d.y = object.positions[static_cast<std::size_t>(t)][1] +
              (config.position_jitter > 0.0
                   ? rng.normal(0.0, config.position_jitter)
                   : 0.0);
        d.strength = rng.uniform(config.min_strength, 1.0);
        detections.push_back(d);
      }
      int false_positives = rng.poisson(config.false_positive_rate);
      for (int f = 0; f < false_positives; ++f) {
        Detection d;
        d.class_id = rng.uniform_int(static_cast<int>(config.nouns.size()));
        std::array<double, 2> spot = sample_point(rng, config, 0.0);
        d.x = spot[0];
        d.y = spot[1];
        d.strength = rng.uniform(config.fp_min_strength, config.fp_max_strength);
        detections.push_back(d);
      }
    }

    std::vector<SentenceTemplate> positives;
    for (const SentenceTemplate& sentence : all_sentences) {
      if (!oracle_label(truth, sentence, world.meanings, config)) continue;
      if (restricted_keys.count(template_key(sentence))) {
        positives.push_back(sentence);
      } else if (rng.uniform() < config.adverb_positive_prob) {
        positives.push_back(sentence);
      }
    }

    world.clips.push_back(std::move(clip));
    world.positives.push_back(std::move(positives));
    world.mutable_ground_truth().push_back(std::move(truth));
  }
  return world;
}

}  // namespace groundlex
