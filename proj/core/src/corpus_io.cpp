#include "groundlex/corpus_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace groundlex {

namespace {

using nlohmann::json;

std::string clip_file_name(int clip_id) {
  std::ostringstream name;
  name << "clip_" << std::setw(4) << std::setfill('0') << clip_id << ".tsv";
  return name.str();
}

json sim_config_to_json(const SimConfig& config) {
  json verbs = json::array();
  for (const auto& v : config.verbs) verbs.push_back({{"word", v.word}, {"kind", v.kind}});
  json adverbs = json::array();
  for (const auto& a : config.adverbs) adverbs.push_back({{"word", a.word}, {"kind", a.kind}});
  json preps = json::array();
  for (const auto& p : config.preps) preps.push_back({{"word", p.word}, {"sector", p.sector}});
  return {{"nouns", config.nouns},
          {"verbs", verbs},
          {"adverbs", adverbs},
          {"preps", preps},
          {"clip_count", config.clip_count},
          {"min_frames", config.min_frames},
          {"max_frames", config.max_frames},
          {"distractor_count", config.distractor_count},
          {"intransitive_only_prob", config.intransitive_only_prob},
          {"adverb_positive_prob", config.adverb_positive_prob},
          {"world_size", config.world_size},
          {"slow_speed", config.slow_speed},
          {"fast_speed", config.fast_speed},
          {"stop_radius", config.stop_radius},
          {"position_jitter", config.position_jitter},
          {"false_positive_rate", config.false_positive_rate},
          {"min_strength", config.min_strength},
          {"fp_min_strength", config.fp_min_strength},
          {"fp_max_strength", config.fp_max_strength},
          {"oracle_travel", config.oracle_travel},
          {"oracle_near_radius", config.oracle_near_radius},
          {"oracle_move_travel", config.oracle_move_travel},
          {"oracle_fast_speed", config.oracle_fast_speed},
          {"oracle_prep_fraction", config.oracle_prep_fraction},
          {"oracle_speed_window", config.oracle_speed_window}};
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig config;
  config.nouns = j.at("nouns").get<std::vector<std::string>>();
  config.verbs.clear();
  for (const json& v : j.at("verbs")) {
    config.verbs.push_back({v.at("word").get<std::string>(),
                            v.at("kind").get<std::string>()});
  }
  config.adverbs.clear();
  for (const json& a : j.at("adverbs")) {
    config.adverbs.push_back({a.at("word").get<std::string>(),
                              a.at("kind").get<std::string>()});
  }
  config.preps.clear();
  for (const json& p : j.at("preps")) {
    config.preps.push_back({p.at("word").get<std::string>(),
                            p.at("sector").get<int>()});
  }
  config.clip_count = j.at("clip_count").get<int>();
  config.min_frames = j.at("min_frames").get<int>();
  config.max_frames = j.at("max_frames").get<int>();
  config.distractor_count = j.at("distractor_count").get<int>();
  config.intransitive_only_prob = j.at("intransitive_only_prob").get<double>();
  config.adverb_positive_prob = j.at("adverb_positive_prob").get<double>();
  config.world_size = j.at("world_size").get<double>();
  config.slow_speed = j.at("slow_speed").get<double>();
  config.fast_speed = j.at("fast_speed").get<double>();
  config.stop_radius = j.at("stop_radius").get<double>();
  config.position_jitter = j.at("position_jitter").get<double>();
  config.false_positive_rate = j.at("false_positive_rate").get<double>();
  config.min_strength = j.at("min_strength").get<double>();
  config.fp_min_strength = j.at("fp_min_strength").get<double>();
  config.fp_max_strength = j.at("fp_max_strength").get<double>();
  config.oracle_travel = j.at("oracle_travel").get<double>();
  config.oracle_near_radius = j.at("oracle_near_radius").get<double>();
  config.oracle_move_travel = j.at("oracle_move_travel").get<double>();
  config.oracle_fast_speed = j.at("oracle_fast_speed").get<double>();
  config.oracle_prep_fraction = j.at("oracle_prep_fraction").get<double>();
  config.oracle_speed_window = j.at("oracle_speed_window").get<int>();
  return config;
}

json scoring_config_to_json(const ScoringConfig& config) {
  return {{"speed_edges", config.speed_edges},
          {"distance_change_epsilon", config.distance_change_epsilon},
          {"angle_sectors", config.angle_sectors},
          {"coherence_kappa", config.coherence_kappa},
          {"max_participants", config.max_participants},
          {"max_words", config.max_words}};
}

ScoringConfig scoring_config_from_json(const json& j) {
  ScoringConfig config;
  config.speed_edges = j.at("speed_edges").get<std::vector<double>>();
  config.distance_change_epsilon = j.at("distance_change_epsilon").get<double>();
  config.angle_sectors = j.at("angle_sectors").get<int>();
  config.coherence_kappa = j.at("coherence_kappa").get<double>();
  config.max_participants = j.at("max_participants").get<int>();
  config.max_words = j.at("max_words").get<int>();
  return config;
}

json grammar_to_json(const GrammarSpec& grammar) {
  json rules = json::array();
  for (const TemplateRule& rule : grammar.rules) {
    json slots = json::array();
    for (const TemplateRule::Slot& slot : rule.slots) {
      slots.push_back({{"category", slot.category}, {"args", slot.args}});
    }
    rules.push_back({{"restricted", rule.in_restricted}, {"slots", slots}});
  }
  return {{"rules", rules}};
}

GrammarSpec grammar_from_json(const json& j) {
  GrammarSpec grammar;
  for (const json& r : j.at("rules")) {
    TemplateRule rule;
    rule.in_restricted = r.value("restricted", false);
    for (const json& s : r.at("slots")) {
      rule.slots.push_back({s.at("category").get<std::string>(),
                            s.at("args").get<std::vector<int>>()});
    }
    grammar.rules.push_back(std::move(rule));
  }
  return grammar;
}

}  // namespace

void save_world(const SimWorld& world, const std::filesystem::path& directory,
                bool include_ground_truth) {
  namespace fs = std::filesystem;
  fs::create_directories(directory / "clips");

  json root;
  root["format"] = "groundlex-world";
  root["version"] = 1;
  root["sim"] = sim_config_to_json(world.config);
  root["grammar"] = grammar_to_json(world.grammar);
  json vocab = json::array();
  for (const VocabEntry& v : world.vocabulary) {
    vocab.push_back({{"word", v.word}, {"pos", v.pos_id}});
  }
  root["vocabulary"] = vocab;
  root["clip_count"] = static_cast<int>(world.clips.size());
  {
    std::ofstream file(directory / "world.json");
    if (!file) throw ParseError("cannot write " + (directory / "world.json").string());
    file << root.dump(1) << "\n";
  }

  save_lexicon(world.hand_lexicon, directory / "hand_lexicon.json");

  for (const VideoClip& clip : world.clips) {
    std::ofstream file(directory / "clips" / clip_file_name(clip.clip_id));
    if (!file) throw ParseError("cannot write clip file for clip " +
                                std::to_string(clip.clip_id));
    for (int t = 0; t < clip.frame_count(); ++t) {
      for (const Detection& d : clip.frames[static_cast<std::size_t>(t)]) {
        file << t << "\t" << d.class_id << "\t" << format_double(d.strength)
             << "\t" << format_double(d.x) << "\t" << format_double(d.y) << "\n";
      }
    }
  }

  {
    std::ofstream file(directory / "annotations.tsv");
    if (!file) throw ParseError("cannot write annotations.tsv");
    for (std::size_t c = 0; c < world.positives.size(); ++c) {
      for (const SentenceTemplate& sentence : world.positives[c]) {
        file << world.clips[c].clip_id << "\t"
             << realize_joined(sentence, world.hand_lexicon) << "\n";
      }
    }
  }

  if (include_ground_truth) {
    json truth_root;
    truth_root["format"] = "groundlex-ground-truth";
    truth_root["version"] = 1;
    json meanings = json::array();
    for (std::size_t m = 0; m < world.meanings.size(); ++m) {
      const WordMeaning& meaning = world.meanings[m];
      meanings.push_back({{"entry", static_cast<int>(m)},
                          {"kind", static_cast<int>(meaning.kind)},
                          {"value", meaning.value}});
    }
    truth_root["meanings"] = meanings;
    json clips = json::array();
    for (std::size_t c = 0; c < world.ground_truth().size(); ++c) {
      const ClipTruth& truth = world.ground_truth()[c];
      json objects = json::array();
      for (const ObjectTruth& object : truth.objects) {
        json positions = json::array();
        for (const auto& p : object.positions) positions.push_back({p[0], p[1]});
        objects.push_back({{"object_id", object.object_id},
                           {"class_id", object.class_id},
                           {"positions", positions}});
      }
      json events = json::array();
      for (const EventTruth& event : truth.events) {
        events.push_back({{"verb_entry", event.verb_entry},
                          {"objects", event.objects},
                          {"begin", event.begin_frame},
                          {"end", event.end_frame}});
      }
      clips.push_back({{"clip_id", world.clips[c].clip_id},
                       {"objects", objects},
                       {"events", events}});
    }
    truth_root["clips"] = clips;
    std::ofstream file(directory / "ground_truth.json");
    if (!file) throw ParseError("cannot write ground_truth.json");
    file << truth_root.dump(1) << "\n";
  }
}

SimWorld load_world(const std::filesystem::path& directory,
                    bool require_ground_truth) {
  namespace fs = std::filesystem;
  json root;
  {
    std::ifstream file(directory / "world.json");
    if (!file) throw ParseError("cannot open " + (directory / "world.json").string());
    try {
      root = json::parse(file);
    } catch (const json::parse_error& e) {
      throw ParseError("world.json: " + std::string(e.what()));
    }
  }
  if (root.value("format", "") != "groundlex-world") {
    throw ParseError("world.json: missing or wrong format tag");
  }
  if (root.at("version").get<int>() != 1) {
    throw ParseError("world.json: unsupported version");
  }

  SimWorld world;
  world.config = sim_config_from_json(root.at("sim"));
  world.grammar = grammar_from_json(root.at("grammar"));
  world.vocabulary.clear();
  for (const json& v : root.at("vocabulary")) {
    world.vocabulary.push_back({v.at("word").get<std::string>(),
                                v.at("pos").get<std::string>()});
  }
  world.hand_lexicon = load_lexicon(directory / "hand_lexicon.json");
  world.pos_table = world.hand_lexicon.pos_table;

  const int clip_count = root.at("clip_count").get<int>();
  for (int c = 0; c < clip_count; ++c) {
    const fs::path path = directory / "clips" / clip_file_name(c);
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open " + path.string());
    VideoClip clip;
    clip.clip_id = c;
    std::string line;
    int line_number = 0;
    while (std::getline(file, line)) {
      ++line_number;
      if (line.empty()) continue;
      std::istringstream fields(line);
      int frame = 0;
      Detection d;
      if (!(fields >> frame >> d.class_id >> d.strength >> d.x >> d.y)) {
        throw ParseError(path.string() + ":" + std::to_string(line_number) +
                         ": expected 'frame class strength x y'");
      }
      if (frame < 0) {
        throw ParseError(path.string() + ":" + std::to_string(line_number) +
                         ": negative frame index");
      }
      if (frame >= static_cast<int>(clip.frames.size())) {
        clip.frames.resize(static_cast<std::size_t>(frame) + 1);
      }
      clip.frames[static_cast<std::size_t>(frame)].push_back(d);
    }
    world.clips.push_back(std::move(clip));
  }

  world.positives.assign(world.clips.size(), {});
  {
    const fs::path path = directory / "annotations.tsv";
    std::ifstream file(path);
    if (!file) throw ParseError("cannot open " + path.string());
    std::string line;
    int line_number = 0;
    while (std::getline(file, line)) {
      ++line_number;
      if (line.empty()) continue;
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos) {
        throw ParseError(path.string() + ":" + std::to_string(line_number) +
                         ": expected 'clip_id<TAB>sentence'");
      }
      const int clip_id = std::stoi(line.substr(0, tab));
      if (clip_id < 0 || clip_id >= static_cast<int>(world.clips.size())) {
        throw ParseError(path.string() + ":" + std::to_string(line_number) +
                         ": unknown clip id " + std::to_string(clip_id));
      }
      std::istringstream tokens_in(line.substr(tab + 1));
      std::vector<std::string> tokens;
      std::string token;
      while (tokens_in >> token) tokens.push_back(token);
      world.positives[static_cast<std::size_t>(clip_id)].push_back(
          parse(tokens, world.grammar, world.hand_lexicon));
    }
  }

  const fs::path truth_path = directory / "ground_truth.json";
  if (fs::exists(truth_path)) {
    std::ifstream file(truth_path);
    json truth_root;
    try {
      truth_root = json::parse(file);
    } catch (const json::parse_error& e) {
      throw ParseError("ground_truth.json: " + std::string(e.what()));
    }
    world.meanings.assign(world.hand_lexicon.entries.size(), {});
    for (const json& m : truth_root.at("meanings")) {
      WordMeaning meaning;
      meaning.kind = static_cast<WordMeaning::Kind>(m.at("kind").get<int>());
      meaning.value = m.at("value").get<int>();
      world.meanings[static_cast<std::size_t>(m.at("entry").get<int>())] = meaning;
    }
    for (const json& c : truth_root.at("clips")) {
      ClipTruth truth;
      for (const json& o : c.at("objects")) {
        ObjectTruth object;
        object.object_id = o.at("object_id").get<int>();
        object.class_id = o.at("class_id").get<int>();
        for (const json& p : o.at("positions")) {
          object.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        truth.objects.push_back(std::move(object));
      }
      for (const json& e : c.at("events")) {
        truth.events.push_back({e.at("verb_entry").get<int>(),
                                e.at("objects").get<std::vector<int>>(),
                                e.at("begin").get<int>(), e.at("end").get<int>()});
      }
      world.mutable_ground_truth().push_back(std::move(truth));
    }
  } else if (require_ground_truth) {
    throw ParseError("ground truth required but " + truth_path.string() +
                     " does not exist");
  }
  return world;
}

namespace {

json dt_config_to_json(const DtConfig& config) {
  return {{"max_iterations", config.max_iterations},
          {"tolerance", config.tolerance},
          {"max_retries", config.max_retries},
          {"punishment", config.punishment},
          {"damping_floor", config.damping_floor},
          {"prob_floor", config.prob_floor},
          {"optimizer",
           config.optimizer == DtConfig::Optimizer::kGrowthTransform ? "gt" : "ebw"}};
}

DtConfig dt_config_from_json(const json& j) {
  DtConfig config;
  config.max_iterations = j.value("max_iterations", config.max_iterations);
  config.tolerance = j.value("tolerance", config.tolerance);
  config.max_retries = j.value("max_retries", config.max_retries);
  config.punishment = j.value("punishment", config.punishment);
  config.damping_floor = j.value("damping_floor", config.damping_floor);
  config.prob_floor = j.value("prob_floor", config.prob_floor);
  const std::string optimizer = j.value("optimizer", "gt");
  if (optimizer == "gt") {
    config.optimizer = DtConfig::Optimizer::kGrowthTransform;
  } else if (optimizer == "ebw") {
    config.optimizer = DtConfig::Optimizer::kExtendedBaumWelch;
  } else {
    throw ParseError("unknown optimizer '" + optimizer + "'");
  }
  return config;
}

json ml_config_to_json(const MlConfig& config) {
  return {{"max_iterations", config.max_iterations},
          {"tolerance", config.tolerance},
          {"prob_floor", config.prob_floor}};
}

MlConfig ml_config_from_json(const json& j) {
  MlConfig config;
  config.max_iterations = j.value("max_iterations", config.max_iterations);
  config.tolerance = j.value("tolerance", config.tolerance);
  config.prob_floor = j.value("prob_floor", config.prob_floor);
  return config;
}

}  // namespace

void save_experiment_config(const ExperimentConfig& config,
                            const std::filesystem::path& path) {
  json root;
  root["format"] = "groundlex-experiment";
  root["version"] = 1;
  root["sim"] = sim_config_to_json(config.sim);
  root["scoring"] = scoring_config_to_json(config.scoring);
  root["corpus_seeds"] = config.corpus_seeds;
  root["ratios"] = config.ratios;
  root["folds"] = config.folds;
  root["fold_seed"] = config.fold_seed;
  root["nv_sentence_count"] = config.nv_sentence_count;
  root["all_sentence_count"] = config.all_sentence_count;
  root["sentence_seed"] = config.sentence_seed;
  root["init_seed"] = config.init_seed;
  root["init_jitter"] = config.init_jitter;
  root["negative_count"] = config.negative_count;
  root["negative_seed"] = config.negative_seed;
  root["methods"] = config.methods;
  root["dt"] = dt_config_to_json(config.dt);
  root["ml"] = ml_config_to_json(config.ml);
  std::ofstream file(path);
  if (!file) throw ParseError("cannot write " + path.string());
  file << root.dump(1) << "\n";
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw ParseError("cannot open " + path.string());
  json root;
  try {
    root = json::parse(file);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (root.value("format", "") != "groundlex-experiment") {
    throw ParseError(path.string() + ": missing or wrong format tag");
  }
  if (root.at("version").get<int>() != 1) {
    throw ParseError(path.string() + ": unsupported version");
  }
  ExperimentConfig config;
  try {
    config.sim = sim_config_from_json(root.at("sim"));
    config.scoring = scoring_config_from_json(root.at("scoring"));
    config.corpus_seeds = root.at("corpus_seeds").get<std::vector<std::uint64_t>>();
    config.ratios = root.at("ratios").get<std::vector<double>>();
    config.folds = root.at("folds").get<int>();
    config.fold_seed = root.at("fold_seed").get<std::uint64_t>();
    config.nv_sentence_count = root.at("nv_sentence_count").get<int>();
    config.all_sentence_count = root.at("all_sentence_count").get<int>();
    config.sentence_seed = root.at("sentence_seed").get<std::uint64_t>();
    config.init_seed = root.at("init_seed").get<std::uint64_t>();
    config.init_jitter = root.at("init_jitter").get<double>();
    config.negative_count = root.at("negative_count").get<int>();
    config.negative_seed = root.at("negative_seed").get<std::uint64_t>();
    config.methods = root.at("methods").get<std::vector<std::string>>();
    config.dt = dt_config_from_json(root.at("dt"));
    config.ml = ml_config_from_json(root.at("ml"));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config;
}

void save_experiment_report(const ExperimentReport& report,
                            const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);

  std::ofstream summary(directory / "auc_summary.tsv");
  if (!summary) throw ParseError("cannot write auc_summary.tsv");
  summary << "ratio\tmethod\tmean_auc";
  for (const SeedResult& seed : report.seeds) {
    summary << "\tseed_" << seed.corpus_seed;
  }
  summary << "\n";
  for (std::size_t r = 0; r < report.ratios.size(); ++r) {
    for (const std::string& method : report.methods) {
      summary << format_double(report.ratios[r]) << "\t" << method << "\t"
              << format_double(report.mean_auc[r].at(method));
      for (const SeedResult& seed : report.seeds) {
        summary << "\t" << format_double(seed.ratios[r].by_method.at(method).auc);
      }
      summary << "\n";
    }
    for (const SeedResult& seed : report.seeds) {
      const RatioResult& rr = seed.ratios[r];
      summary << format_double(report.ratios[r]) << "\tchance\tpoint"
              << "\t(" << format_double(rr.chance.fpr) << ","
              << format_double(rr.chance.tpr) << ")\n";
      summary << format_double(report.ratios[r]) << "\tblind\tpoint"
              << "\t(" << format_double(rr.blind.fpr) << ","
              << format_double(rr.blind.tpr) << ") f1="
              << format_double(rr.blind_f1) << "\n";
    }
  }

  for (const SeedResult& seed : report.seeds) {
    for (std::size_t r = 0; r < seed.ratios.size(); ++r) {
      for (const auto& [method, result] : seed.ratios[r].by_method) {
        std::ostringstream name;
        name << "curve_seed" << seed.corpus_seed << "_ratio"
             << report.ratios[r] << "_" << method << ".tsv";
        std::ofstream curve(directory / name.str());
        for (const RocPoint& point : result.curve.points) {
          curve << format_double(point.fpr) << "\t" << format_double(point.tpr)
                << "\n";
        }
      }
    }
  }
}

}  // namespace groundlex
