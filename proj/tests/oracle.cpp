#include "oracle.hpp"

#include <cmath>

namespace groundlex::testing {

namespace {

long long int_pow(int base, int exponent) {
  long long value = 1;
  for (int i = 0; i < exponent; ++i) value *= base;
  return value;
}

}  // namespace

std::vector<AssignmentSequence> all_assignment_sequences(const VideoClip& clip,
                                                         int participants) {
  const int frames = clip.frame_count();
  std::vector<AssignmentSequence> sequences;
  std::vector<long long> frame_counts(static_cast<std::size_t>(frames));
  long long total = 1;
  for (int t = 0; t < frames; ++t) {
    frame_counts[static_cast<std::size_t>(t)] = int_pow(
        static_cast<int>(clip.frames[static_cast<std::size_t>(t)].size()),
        participants);
    total *= frame_counts[static_cast<std::size_t>(t)];
  }
  sequences.reserve(static_cast<std::size_t>(total));
  for (long long index = 0; index < total; ++index) {
    AssignmentSequence assignment(static_cast<std::size_t>(frames),
                                  std::vector<int>(static_cast<std::size_t>(participants)));
    long long rest = index;
    for (int t = frames - 1; t >= 0; --t) {
      const int dets =
          static_cast<int>(clip.frames[static_cast<std::size_t>(t)].size());
      long long frame_id = rest % frame_counts[static_cast<std::size_t>(t)];
      rest /= frame_counts[static_cast<std::size_t>(t)];
      for (int p = participants - 1; p >= 0; --p) {
        assignment[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] =
            static_cast<int>(frame_id % dets);
        frame_id /= dets;
      }
    }
    sequences.push_back(std::move(assignment));
  }
  return sequences;
}

std::vector<std::vector<std::vector<int>>> all_state_sequences(
    const Instance& instance) {
  const int frames = instance.clip.frame_count();
  const int words = static_cast<int>(instance.sentence.words.size());
  std::vector<int> state_counts;
  long long per_frame = 1;
  for (int entry : instance.sentence.words) {
    int states = instance.lexicon.pos_of_entry(entry).state_count;
    state_counts.push_back(states);
    per_frame *= states;
  }
  long long total = 1;
  for (int t = 0; t < frames; ++t) total *= per_frame;

  std::vector<std::vector<std::vector<int>>> sequences;
  sequences.reserve(static_cast<std::size_t>(total));
  for (long long index = 0; index < total; ++index) {
    std::vector<std::vector<int>> states(
        static_cast<std::size_t>(words),
        std::vector<int>(static_cast<std::size_t>(frames)));
    long long rest = index;
    for (int t = frames - 1; t >= 0; --t) {
      for (int l = words - 1; l >= 0; --l) {
        states[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)] =
            static_cast<int>(rest % state_counts[static_cast<std::size_t>(l)]);
        rest /= state_counts[static_cast<std::size_t>(l)];
      }
    }
    sequences.push_back(std::move(states));
  }
  return sequences;
}

double path_log_weight(const Instance& instance,
                       const AssignmentSequence& assignment,
                       const std::vector<std::vector<int>>& states) {
  const VideoClip& clip = instance.clip;
  const int frames = clip.frame_count();
  const int participants = instance.sentence.participant_count;
  double log_weight = 0.0;

  // track factors, written out longhand
  for (int t = 0; t < frames; ++t) {
    for (int p = 0; p < participants; ++p) {
      const Detection& d =
          clip.frames[static_cast<std::size_t>(t)][static_cast<std::size_t>(
              assignment[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)])];
      if (!(d.strength > 0.0)) return kLogZero;
      log_weight += std::log(d.strength);
    }
  }
  for (int t = 1; t < frames; ++t) {
    for (int p = 0; p < participants; ++p) {
      const Detection& a =
          clip.frames[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(
              assignment[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(p)])];
      const Detection& b =
          clip.frames[static_cast<std::size_t>(t)][static_cast<std::size_t>(
              assignment[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)])];
      const double dx = b.x - a.x;
      const double dy = b.y - a.y;
      log_weight -= instance.scoring.coherence_kappa * (dx * dx + dy * dy);
    }
  }

  const FeatureTensor features = compute_features(
      clip, assignment, instance.sentence, instance.lexicon, instance.scoring);
  for (std::size_t l = 0; l < instance.sentence.words.size(); ++l) {
    const WordModel& model =
        instance.lexicon.entries[static_cast<std::size_t>(instance.sentence.words[l])];
    const auto& path = states[l];
    double p0 = model.initial[static_cast<std::size_t>(path[0])];
    if (!(p0 > 0.0)) return kLogZero;
    log_weight += std::log(p0);
    for (int t = 1; t < frames; ++t) {
      double a = model.transition[static_cast<std::size_t>(path[static_cast<std::size_t>(t - 1)])]
                                 [static_cast<std::size_t>(path[static_cast<std::size_t>(t)])];
      if (!(a > 0.0)) return kLogZero;
      log_weight += std::log(a);
    }
    for (int t = 0; t < frames; ++t) {
      const auto& values = features.values[l][static_cast<std::size_t>(t)];
      for (std::size_t n = 0; n < values.size(); ++n) {
        double b = model.output[static_cast<std::size_t>(path[static_cast<std::size_t>(t)])][n]
                               [static_cast<std::size_t>(values[n])];
        if (!(b > 0.0)) return kLogZero;
        log_weight += std::log(b);
      }
    }
  }
  return log_weight;
}

double brute_force_forward(const Instance& instance) {
  double total = kLogZero;
  for (const AssignmentSequence& assignment :
       all_assignment_sequences(instance.clip, instance.sentence.participant_count)) {
    for (const auto& states : all_state_sequences(instance)) {
      total = log_add(total, path_log_weight(instance, assignment, states));
    }
  }
  return total;
}

double brute_force_viterbi(const Instance& instance) {
  double best = kLogZero;
  for (const AssignmentSequence& assignment :
       all_assignment_sequences(instance.clip, instance.sentence.participant_count)) {
    for (const auto& states : all_state_sequences(instance)) {
      best = std::max(best, path_log_weight(instance, assignment, states));
    }
  }
  return best;
}

BrutePosteriors brute_force_posteriors(const Instance& instance) {
  BrutePosteriors post;
  post.log_likelihood = brute_force_forward(instance);
  const int frames = instance.clip.frame_count();
  const std::size_t words = instance.sentence.words.size();

  post.gamma.resize(words);
  post.transition.resize(words);
  post.occupancy.resize(words);
  for (std::size_t l = 0; l < words; ++l) {
    const PosConfig& pos =
        instance.lexicon.pos_of_entry(instance.sentence.words[l]);
    const std::size_t states = static_cast<std::size_t>(pos.state_count);
    post.gamma[l].assign(static_cast<std::size_t>(frames),
                         std::vector<double>(states, 0.0));
    post.transition[l].assign(
        static_cast<std::size_t>(frames > 0 ? frames - 1 : 0),
        std::vector<std::vector<double>>(states,
                                         std::vector<double>(states, 0.0)));
    post.occupancy[l].resize(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
      post.occupancy[l][static_cast<std::size_t>(t)].resize(states);
      for (std::size_t i = 0; i < states; ++i) {
        post.occupancy[l][static_cast<std::size_t>(t)][i].resize(
            pos.features.size());
        for (std::size_t n = 0; n < pos.features.size(); ++n) {
          post.occupancy[l][static_cast<std::size_t>(t)][i][n].assign(
              static_cast<std::size_t>(pos.features[n].bins), 0.0);
        }
      }
    }
  }

  for (const AssignmentSequence& assignment :
       all_assignment_sequences(instance.clip, instance.sentence.participant_count)) {
    const FeatureTensor features =
        compute_features(instance.clip, assignment, instance.sentence,
                         instance.lexicon, instance.scoring);
    for (const auto& states : all_state_sequences(instance)) {
      double w = path_log_weight(instance, assignment, states);
      if (is_log_zero(w)) continue;
      double mass = std::exp(w - post.log_likelihood);
      for (std::size_t l = 0; l < words; ++l) {
        for (int t = 0; t < frames; ++t) {
          int i = states[l][static_cast<std::size_t>(t)];
          post.gamma[l][static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] +=
              mass;
          const auto& values = features.values[l][static_cast<std::size_t>(t)];
          for (std::size_t n = 0; n < values.size(); ++n) {
            post.occupancy[l][static_cast<std::size_t>(t)]
                          [static_cast<std::size_t>(i)][n]
                          [static_cast<std::size_t>(values[n])] += mass;
          }
          if (t > 0) {
            int prev = states[l][static_cast<std::size_t>(t - 1)];
            post.transition[l][static_cast<std::size_t>(t - 1)]
                           [static_cast<std::size_t>(prev)]
                           [static_cast<std::size_t>(i)] += mass;
          }
        }
      }
    }
  }
  return post;
}

std::vector<double> finite_difference_gradient(
    const std::vector<VideoClip>& clips, const std::vector<DtSample>& samples,
    const Lexicon& lexicon, const ScoringConfig& scoring, ScoreKind kind,
    double step) {
  ParamLayout layout(lexicon);
  std::vector<double> flat = flatten_parameters(lexicon, layout);
  std::vector<double> grad(flat.size(), 0.0);
  auto objective = [&](const std::vector<double>& values) {
    Lexicon probe = lexicon;
    unflatten_parameters(probe, layout, values);
    return kind == ScoreKind::kNormalized
               ? smoothed_objective(clips, samples, probe, scoring).value
               : discrimination_objective(clips, samples, probe, scoring).value;
  };
  for (std::size_t i = 0; i < flat.size(); ++i) {
    std::vector<double> probe = flat;
    probe[i] = flat[i] + step;
    double up = objective(probe);
    probe[i] = flat[i] - step;
    double down = objective(probe);
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

Instance random_instance(Rng& rng, const InstanceBounds& bounds) {
  Instance instance;
  instance.scoring.speed_edges = {0.3, 0.9};
  instance.scoring.distance_change_epsilon = 0.1;
  instance.scoring.angle_sectors = 4;
  instance.scoring.coherence_kappa = rng.uniform(0.05, 0.5);

  const int class_count = 3;
  const int participants = 1 + rng.uniform_int(bounds.max_participants);
  const int frames = 1 + rng.uniform_int(bounds.max_frames);
  const int words = 1 + rng.uniform_int(bounds.max_words);

  // one pos per word so shapes can vary freely
  std::vector<PosConfig> pos_table;
  std::vector<VocabEntry> vocabulary;
  SentenceTemplate sentence;
  sentence.participant_count = participants;
  for (int l = 0; l < words; ++l) {
    PosConfig pos;
    pos.pos_id = "pos" + std::to_string(l);
    pos.category = "test";
    pos.state_count = 1 + rng.uniform_int(bounds.max_states);
    // word 0 spans all participants so every index is mentioned
    pos.arity = participants >= 2 && (l == 0 || rng.uniform() < 0.5) ? 2 : 1;
    const int feature_count = 1 + rng.uniform_int(2);
    for (int n = 0; n < feature_count; ++n) {
      const int kind_draw = rng.uniform_int(pos.arity >= 2 ? 4 : 2);
      switch (kind_draw) {
        case 0:
          pos.features.push_back({FeatureKind::kObjectClass, class_count});
          break;
        case 1:
          pos.features.push_back(
              {FeatureKind::kActorSpeed, instance.scoring.speed_bins()});
          break;
        case 2:
          pos.features.push_back({FeatureKind::kDistanceChange, 3});
          break;
        default:
          pos.features.push_back(
              {FeatureKind::kPairAngle, instance.scoring.angle_sectors});
          break;
      }
    }
    pos_table.push_back(pos);
    vocabulary.push_back({"w" + std::to_string(l), pos.pos_id});

    std::vector<int> args;
    if (l == 0) {
      for (int p = 0; p < pos.arity; ++p) args.push_back(p);
    } else {
      args.push_back(rng.uniform_int(participants));
      if (pos.arity == 2) args.push_back(rng.uniform_int(participants));
    }
    sentence.words.push_back(l);
    sentence.args.push_back(args);
  }

  instance.lexicon = init_uniform(pos_table, vocabulary, 0.0, 0);
  // random distributions bounded away from zero
  for (WordModel& entry : instance.lexicon.entries) {
    auto randomize = [&](std::vector<double>& row) {
      double total = 0.0;
      for (double& v : row) {
        v = rng.uniform(0.15, 1.0);
        total += v;
      }
      for (double& v : row) v /= total;
    };
    randomize(entry.initial);
    for (auto& row : entry.transition) randomize(row);
    for (auto& per_state : entry.output) {
      for (auto& dist : per_state) randomize(dist);
    }
  }

  instance.clip.clip_id = 0;
  instance.clip.frames.resize(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    const int dets = 1 + rng.uniform_int(bounds.max_detections);
    for (int d = 0; d < dets; ++d) {
      Detection det;
      det.class_id = rng.uniform_int(class_count);
      det.strength = rng.uniform(0.3, 1.0);
      det.x = rng.uniform(0.0, 4.0);
      det.y = rng.uniform(0.0, 4.0);
      instance.clip.frames[static_cast<std::size_t>(t)].push_back(det);
    }
  }
  instance.sentence = sentence;
  return instance;
}

}  // namespace groundlex::testing
