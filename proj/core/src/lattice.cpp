#include "groundlex/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace groundlex {

int quantize_speed(double speed, const ScoringConfig& config) {
  int bin = 0;
  for (double edge : config.speed_edges) {
    if (speed < edge) break;
    ++bin;
  }
  return bin;
}

int quantize_distance_change(double delta, const ScoringConfig& config) {
  if (delta < -config.distance_change_epsilon) return 0;
  if (delta > config.distance_change_epsilon) return 2;
  return 1;
}

int quantize_angle(double dx, double dy, int sectors) {
  if (dx == 0.0 && dy == 0.0) return 0;
  double angle = std::atan2(dy, dx);  // (-pi, pi]
  double width = 2.0 * M_PI / sectors;
  double shifted = angle + width / 2.0;
  if (shifted < 0.0) shifted += 2.0 * M_PI;
  int sector = static_cast<int>(shifted / width);
  return sector >= sectors ? 0 : sector;
}

namespace {

constexpr double kMaxCoherenceExponent = 690.0;  // keeps exp() above underflow

struct WordSlot {
  const WordModel* model = nullptr;
  const PosConfig* pos = nullptr;
  int states = 0;
  std::vector<int> participants;  // the word's argument tuple
};

// Per-pass working buffers, reused across edges.
struct Scratch {
  std::vector<std::vector<int>> features;    // frame-t features per word
  std::vector<std::vector<int>> features0;   // frame-0 features (first edge)
  std::vector<double> word_emis;
  std::vector<double> emis;                  // [q]
  std::vector<double> emis0;                 // [q]
  std::vector<double> pair_acc;              // [q]
};

void validate_sentence(const SentenceTemplate& sentence, const Lexicon& lexicon,
                       const ScoringConfig& config) {
  if (sentence.words.empty()) throw ConfigError("sentence has no words");
  if (sentence.words.size() != sentence.args.size()) {
    throw ConfigError("sentence words/args length mismatch");
  }
  if (static_cast<int>(sentence.words.size()) > config.max_words) {
    throw ConfigError("sentence has " + std::to_string(sentence.words.size()) +
                      " words, above the configured cap of " +
                      std::to_string(config.max_words));
  }
  if (sentence.participant_count > config.max_participants) {
    throw ConfigError("sentence has " +
                      std::to_string(sentence.participant_count) +
                      " participants, above the configured cap of " +
                      std::to_string(config.max_participants));
  }
  if (sentence.participant_count < 1) {
    throw ConfigError("sentence has no participants");
  }
  for (std::size_t l = 0; l < sentence.words.size(); ++l) {
    int entry_id = sentence.words[l];
    if (entry_id < 0 || entry_id >= static_cast<int>(lexicon.entries.size())) {
      throw ConfigError("sentence references unknown entry " +
                        std::to_string(entry_id));
    }
    const PosConfig& pos = lexicon.pos_of_entry(entry_id);
    if (static_cast<int>(sentence.args[l].size()) != pos.arity) {
      throw ConfigError("word '" +
                        lexicon.entries[static_cast<std::size_t>(entry_id)].word +
                        "' arity mismatch");
    }
    for (int p : sentence.args[l]) {
      if (p < 0 || p >= sentence.participant_count) {
        throw ConfigError("participant index out of range");
      }
    }
    for (const FeatureSpec& f : pos.features) {
      switch (f.kind) {
        case FeatureKind::kActorSpeed:
          if (f.bins != config.speed_bins()) {
            throw ConfigError("pos " + pos.pos_id +
                              ": actor_speed bins do not match quantizer");
          }
          break;
        case FeatureKind::kDistanceChange:
          if (f.bins != 3) {
            throw ConfigError("pos " + pos.pos_id +
                              ": distance_change requires 3 bins");
          }
          if (pos.arity < 2) {
            throw ConfigError("pos " + pos.pos_id +
                              ": distance_change needs arity >= 2");
          }
          break;
        case FeatureKind::kPairAngle:
          if (f.bins != config.angle_sectors) {
            throw ConfigError("pos " + pos.pos_id +
                              ": pair_angle bins do not match angle_sectors");
          }
          if (pos.arity < 2) {
            throw ConfigError("pos " + pos.pos_id +
                              ": pair_angle needs arity >= 2");
          }
          break;
        case FeatureKind::kObjectClass:
          break;
      }
    }
  }
}

// Everything fixed for one (clip, sentence, lexicon) scoring problem. The
// hidden state at frame t is the pair of a participant-to-detection tuple and
// a per-word HMM state tuple; transition, coherence, strength, and emission
// factors are combined on the arcs between consecutive frames. Emissions for
// frame 0 sit on the first arc because frame-0 motion features use the
// one-sided difference toward frame 1.
class JointLattice {
 public:
  JointLattice(const VideoClip& clip, const SentenceTemplate& sentence,
               const Lexicon& lexicon, const ScoringConfig& config);

  double forward() const;
  ViterbiResult viterbi() const;
  Posteriors forward_backward() const;

  bool empty_frame() const { return empty_frame_; }
  int participant_count() const { return participant_count_; }

  void edge_features(int frame_a, int a_prev, int frame_b, int a_cur,
                     bool static_at_a, Scratch& scratch,
                     std::vector<std::vector<int>>& out) const;

 private:
  struct FramePack {
    std::vector<double> x, y, strength;
    std::vector<int> cls;
    int det_count = 0;
    int assign_count = 0;                // det_count^participants
    std::vector<int> det_of;             // [assignment * P + p]
    std::vector<double> strength_prod;   // [assignment]
  };

  void build_frames(const VideoClip& clip);
  void emissions_from_features(const std::vector<std::vector<int>>& features,
                               Scratch& scratch,
                               std::vector<double>& emis) const;
  double move_factor(int frame_a, int a_prev, int frame_b, int a_cur) const;

  const ScoringConfig& config_;
  const Lexicon& lexicon_;
  int frame_count_ = 0;
  int participant_count_ = 0;
  int word_count_ = 0;
  int joint_states_ = 0;  // product of per-word state counts

  std::vector<WordSlot> words_;
  std::vector<int> state_decode_;   // [q * L + l] -> per-word state
  std::vector<double> init_q_;      // [q]
  std::vector<double> trans_q_;     // [q_prev * Q + q]
  std::vector<FramePack> frames_;
  bool empty_frame_ = false;
};

JointLattice::JointLattice(const VideoClip& clip,
                           const SentenceTemplate& sentence,
                           const Lexicon& lexicon, const ScoringConfig& config)
    : config_(config), lexicon_(lexicon) {
  validate_sentence(sentence, lexicon, config);
  if (clip.frame_count() < 1) throw ConfigError("clip has no frames");

  frame_count_ = clip.frame_count();
  participant_count_ = sentence.participant_count;
  word_count_ = static_cast<int>(sentence.words.size());

  joint_states_ = 1;
  for (std::size_t l = 0; l < sentence.words.size(); ++l) {
    WordSlot slot;
    slot.model = &lexicon.entries[static_cast<std::size_t>(sentence.words[l])];
    slot.pos = &lexicon.pos_of(*slot.model);
    slot.states = slot.pos->state_count;
    slot.participants = sentence.args[l];
    joint_states_ *= slot.states;
    words_.push_back(std::move(slot));
  }

  state_decode_.resize(static_cast<std::size_t>(joint_states_) * word_count_);
  for (int q = 0; q < joint_states_; ++q) {
    int rest = q;
    for (int l = word_count_ - 1; l >= 0; --l) {
      state_decode_[static_cast<std::size_t>(q) * word_count_ + l] =
          rest % words_[static_cast<std::size_t>(l)].states;
      rest /= words_[static_cast<std::size_t>(l)].states;
    }
  }

  init_q_.assign(static_cast<std::size_t>(joint_states_), 1.0);
  for (int q = 0; q < joint_states_; ++q) {
    for (int l = 0; l < word_count_; ++l) {
      int i = state_decode_[static_cast<std::size_t>(q) * word_count_ + l];
      init_q_[static_cast<std::size_t>(q)] *=
          words_[static_cast<std::size_t>(l)].model->initial[static_cast<std::size_t>(i)];
    }
  }

  trans_q_.assign(static_cast<std::size_t>(joint_states_) * joint_states_, 1.0);
  for (int qp = 0; qp < joint_states_; ++qp) {
    for (int q = 0; q < joint_states_; ++q) {
      double value = 1.0;
      for (int l = 0; l < word_count_; ++l) {
        int i = state_decode_[static_cast<std::size_t>(qp) * word_count_ + l];
        int k = state_decode_[static_cast<std::size_t>(q) * word_count_ + l];
        value *= words_[static_cast<std::size_t>(l)]
                     .model->transition[static_cast<std::size_t>(i)]
                                       [static_cast<std::size_t>(k)];
      }
      trans_q_[static_cast<std::size_t>(qp) * joint_states_ + q] = value;
    }
  }

  build_frames(clip);
}

void JointLattice::build_frames(const VideoClip& clip) {
  frames_.resize(static_cast<std::size_t>(frame_count_));
  for (int t = 0; t < frame_count_; ++t) {
    const auto& detections = clip.frames[static_cast<std::size_t>(t)];
    FramePack& pack = frames_[static_cast<std::size_t>(t)];
    pack.det_count = static_cast<int>(detections.size());
    if (pack.det_count == 0) {
      empty_frame_ = true;
      return;
    }
    for (const Detection& d : detections) {
      pack.x.push_back(d.x);
      pack.y.push_back(d.y);
      pack.strength.push_back(d.strength);
      pack.cls.push_back(d.class_id);
    }
    long long assign_count = 1;
    for (int p = 0; p < participant_count_; ++p) assign_count *= pack.det_count;
    if (assign_count * joint_states_ > 50'000'000LL) {
      throw ConfigError("joint lattice too large at frame " + std::to_string(t));
    }
    pack.assign_count = static_cast<int>(assign_count);
    pack.det_of.resize(static_cast<std::size_t>(pack.assign_count) *
                       participant_count_);
    pack.strength_prod.resize(static_cast<std::size_t>(pack.assign_count));
    for (int a = 0; a < pack.assign_count; ++a) {
      int rest = a;
      double sp = 1.0;
      for (int p = participant_count_ - 1; p >= 0; --p) {
        int det = rest % pack.det_count;
        rest /= pack.det_count;
        pack.det_of[static_cast<std::size_t>(a) * participant_count_ + p] = det;
        sp *= pack.strength[static_cast<std::size_t>(det)];
      }
      pack.strength_prod[static_cast<std::size_t>(a)] = sp;
    }
  }
}

void JointLattice::edge_features(int frame_a, int a_prev, int frame_b, int a_cur,
                                 bool static_at_a, Scratch&,
                                 std::vector<std::vector<int>>& out) const {
  const FramePack& fa = frames_[static_cast<std::size_t>(frame_a)];
  const FramePack& fb = frames_[static_cast<std::size_t>(frame_b)];
  out.resize(static_cast<std::size_t>(word_count_));
  for (int l = 0; l < word_count_; ++l) {
    const WordSlot& slot = words_[static_cast<std::size_t>(l)];
    auto& values = out[static_cast<std::size_t>(l)];
    values.resize(slot.pos->features.size());
    const int p0 = slot.participants[0];
    const int da =
        fa.det_of[static_cast<std::size_t>(a_prev) * participant_count_ + p0];
    const int db =
        fb.det_of[static_cast<std::size_t>(a_cur) * participant_count_ + p0];
    for (std::size_t n = 0; n < slot.pos->features.size(); ++n) {
      const FeatureSpec& f = slot.pos->features[n];
      switch (f.kind) {
        case FeatureKind::kObjectClass: {
          int cls = static_at_a ? fa.cls[static_cast<std::size_t>(da)]
                                : fb.cls[static_cast<std::size_t>(db)];
          if (cls < 0 || cls >= f.bins) {
            throw ConfigError("detection class " + std::to_string(cls) +
                              " outside the noun bin range");
          }
          values[n] = cls;
          break;
        }
        case FeatureKind::kActorSpeed: {
          double dx = fb.x[static_cast<std::size_t>(db)] -
                      fa.x[static_cast<std::size_t>(da)];
          double dy = fb.y[static_cast<std::size_t>(db)] -
                      fa.y[static_cast<std::size_t>(da)];
          values[n] = quantize_speed(std::hypot(dx, dy), config_);
          break;
        }
        case FeatureKind::kDistanceChange: {
          const int p1 = slot.participants[1];
          const int da1 = fa.det_of[static_cast<std::size_t>(a_prev) *
                                        participant_count_ + p1];
          const int db1 = fb.det_of[static_cast<std::size_t>(a_cur) *
                                        participant_count_ + p1];
          double dist_a = std::hypot(fa.x[static_cast<std::size_t>(da)] -
                                         fa.x[static_cast<std::size_t>(da1)],
                                     fa.y[static_cast<std::size_t>(da)] -
                                         fa.y[static_cast<std::size_t>(da1)]);
          double dist_b = std::hypot(fb.x[static_cast<std::size_t>(db)] -
                                         fb.x[static_cast<std::size_t>(db1)],
                                     fb.y[static_cast<std::size_t>(db)] -
                                         fb.y[static_cast<std::size_t>(db1)]);
          values[n] = quantize_distance_change(dist_b - dist_a, config_);
          break;
        }
        case FeatureKind::kPairAngle: {
          const int p1 = slot.participants[1];
          const FramePack& fs = static_at_a ? fa : fb;
          const int s0 = static_at_a ? da : db;
          const int s1 = static_at_a
                             ? fa.det_of[static_cast<std::size_t>(a_prev) *
                                             participant_count_ + p1]
                             : fb.det_of[static_cast<std::size_t>(a_cur) *
                                             participant_count_ + p1];
          double dx = fs.x[static_cast<std::size_t>(s1)] -
                      fs.x[static_cast<std::size_t>(s0)];
          double dy = fs.y[static_cast<std::size_t>(s1)] -
                      fs.y[static_cast<std::size_t>(s0)];
          values[n] = quantize_angle(dx, dy, f.bins);
          break;
        }
      }
    }
  }
}

void JointLattice::emissions_from_features(
    const std::vector<std::vector<int>>& features, Scratch& scratch,
    std::vector<double>& emis) const {
  emis.assign(static_cast<std::size_t>(joint_states_), 1.0);
  for (int l = 0; l < word_count_; ++l) {
    const WordSlot& slot = words_[static_cast<std::size_t>(l)];
    scratch.word_emis.assign(static_cast<std::size_t>(slot.states), 1.0);
    const auto& values = features[static_cast<std::size_t>(l)];
    for (int i = 0; i < slot.states; ++i) {
      double e = 1.0;
      for (std::size_t n = 0; n < values.size(); ++n) {
        e *= slot.model->output[static_cast<std::size_t>(i)][n]
                               [static_cast<std::size_t>(values[n])];
      }
      scratch.word_emis[static_cast<std::size_t>(i)] = e;
    }
    const int* decode = &state_decode_[l];
    for (int q = 0; q < joint_states_; ++q) {
      emis[static_cast<std::size_t>(q)] *=
          scratch.word_emis[static_cast<std::size_t>(decode[q * word_count_])];
    }
  }
}

double JointLattice::move_factor(int frame_a, int a_prev, int frame_b,
                                 int a_cur) const {
  const FramePack& fa = frames_[static_cast<std::size_t>(frame_a)];
  const FramePack& fb = frames_[static_cast<std::size_t>(frame_b)];
  double exponent = 0.0;
  for (int p = 0; p < participant_count_; ++p) {
    const int da =
        fa.det_of[static_cast<std::size_t>(a_prev) * participant_count_ + p];
    const int db =
        fb.det_of[static_cast<std::size_t>(a_cur) * participant_count_ + p];
    double dx = fb.x[static_cast<std::size_t>(db)] -
                fa.x[static_cast<std::size_t>(da)];
    double dy = fb.y[static_cast<std::size_t>(db)] -
                fa.y[static_cast<std::size_t>(da)];
    exponent += dx * dx + dy * dy;
  }
  exponent *= config_.coherence_kappa;
  if (exponent > kMaxCoherenceExponent) exponent = kMaxCoherenceExponent;
  return std::exp(-exponent);
}

double JointLattice::forward() const {
  if (empty_frame_) return kLogZero;
  const int Q = joint_states_;
  const FramePack& f0 = frames_[0];
  Scratch scratch;

  std::vector<double> alpha(static_cast<std::size_t>(f0.assign_count) * Q);
  for (int a = 0; a < f0.assign_count; ++a) {
    for (int q = 0; q < Q; ++q) {
      alpha[static_cast<std::size_t>(a) * Q + q] =
          f0.strength_prod[static_cast<std::size_t>(a)] *
          init_q_[static_cast<std::size_t>(q)];
    }
  }

  if (frame_count_ == 1) {
    double total = 0.0;
    for (int a = 0; a < f0.assign_count; ++a) {
      edge_features(0, a, 0, a, true, scratch, scratch.features);
      emissions_from_features(scratch.features, scratch, scratch.emis);
      for (int q = 0; q < Q; ++q) {
        total += alpha[static_cast<std::size_t>(a) * Q + q] *
                 scratch.emis[static_cast<std::size_t>(q)];
      }
    }
    return total > 0.0 ? std::log(total) : kLogZero;
  }

  double log_scale = 0.0;
  std::vector<double> next;
  scratch.pair_acc.resize(static_cast<std::size_t>(Q));
  for (int t = 1; t < frame_count_; ++t) {
    const FramePack& prev = frames_[static_cast<std::size_t>(t - 1)];
    const FramePack& cur = frames_[static_cast<std::size_t>(t)];
    next.assign(static_cast<std::size_t>(cur.assign_count) * Q, 0.0);

    for (int ap = 0; ap < prev.assign_count; ++ap) {
      const double* arow = &alpha[static_cast<std::size_t>(ap) * Q];
      for (int ac = 0; ac < cur.assign_count; ++ac) {
        double move = move_factor(t - 1, ap, t, ac);
        if (move == 0.0) continue;
        edge_features(t - 1, ap, t, ac, false, scratch, scratch.features);
        emissions_from_features(scratch.features, scratch, scratch.emis);
        if (t == 1) {
          edge_features(0, ap, 1, ac, true, scratch, scratch.features0);
          emissions_from_features(scratch.features0, scratch, scratch.emis0);
        }

        std::fill(scratch.pair_acc.begin(), scratch.pair_acc.end(), 0.0);
        for (int qp = 0; qp < Q; ++qp) {
          double v = arow[qp];
          if (t == 1) v *= scratch.emis0[static_cast<std::size_t>(qp)];
          if (v == 0.0) continue;
          const double* trow = &trans_q_[static_cast<std::size_t>(qp) * Q];
          for (int q = 0; q < Q; ++q) {
            scratch.pair_acc[static_cast<std::size_t>(q)] += v * trow[q];
          }
        }
        double* nrow = &next[static_cast<std::size_t>(ac) * Q];
        for (int q = 0; q < Q; ++q) {
          nrow[q] += scratch.pair_acc[static_cast<std::size_t>(q)] *
                     scratch.emis[static_cast<std::size_t>(q)] * move;
        }
      }
    }
    for (int ac = 0; ac < cur.assign_count; ++ac) {
      double s = cur.strength_prod[static_cast<std::size_t>(ac)];
      double* nrow = &next[static_cast<std::size_t>(ac) * Q];
      for (int q = 0; q < Q; ++q) nrow[q] *= s;
    }
    double peak = *std::max_element(next.begin(), next.end());
    if (!(peak > 0.0)) return kLogZero;
    double inv = 1.0 / peak;
    for (double& v : next) v *= inv;
    log_scale += std::log(peak);
    alpha.swap(next);
  }

  double total = 0.0;
  for (double v : alpha) total += v;
  return total > 0.0 ? std::log(total) + log_scale : kLogZero;
}

ViterbiResult JointLattice::viterbi() const {
  ViterbiResult result;
  if (empty_frame_) return result;
  const int Q = joint_states_;
  const int P = participant_count_;
  const FramePack& f0 = frames_[0];
  Scratch scratch;

  std::vector<double> best(static_cast<std::size_t>(f0.assign_count) * Q);
  for (int a = 0; a < f0.assign_count; ++a) {
    for (int q = 0; q < Q; ++q) {
      best[static_cast<std::size_t>(a) * Q + q] =
          f0.strength_prod[static_cast<std::size_t>(a)] *
          init_q_[static_cast<std::size_t>(q)];
    }
  }

  if (frame_count_ == 1) {
    double top = 0.0;
    int top_a = 0, top_q = 0;
    for (int a = 0; a < f0.assign_count; ++a) {
      edge_features(0, a, 0, a, true, scratch, scratch.features);
      emissions_from_features(scratch.features, scratch, scratch.emis);
      for (int q = 0; q < Q; ++q) {
        double v = best[static_cast<std::size_t>(a) * Q + q] *
                   scratch.emis[static_cast<std::size_t>(q)];
        if (v > top) {
          top = v;
          top_a = a;
          top_q = q;
        }
      }
    }
    if (top <= 0.0) return result;
    result.log_score = std::log(top);
    result.assignment.resize(1);
    for (int p = 0; p < P; ++p) {
      result.assignment[0].push_back(
          f0.det_of[static_cast<std::size_t>(top_a) * P + p]);
    }
    result.states.assign(static_cast<std::size_t>(word_count_),
                         std::vector<int>(1));
    for (int l = 0; l < word_count_; ++l) {
      result.states[static_cast<std::size_t>(l)][0] =
          state_decode_[static_cast<std::size_t>(top_q) * word_count_ + l];
    }
    return result;
  }

  double log_scale = 0.0;
  std::vector<std::vector<int>> back_a(static_cast<std::size_t>(frame_count_));
  std::vector<std::vector<int>> back_q(static_cast<std::size_t>(frame_count_));
  std::vector<double> next;
  for (int t = 1; t < frame_count_; ++t) {
    const FramePack& prev = frames_[static_cast<std::size_t>(t - 1)];
    const FramePack& cur = frames_[static_cast<std::size_t>(t)];
    next.assign(static_cast<std::size_t>(cur.assign_count) * Q, 0.0);
    back_a[static_cast<std::size_t>(t)].assign(
        static_cast<std::size_t>(cur.assign_count) * Q, -1);
    back_q[static_cast<std::size_t>(t)].assign(
        static_cast<std::size_t>(cur.assign_count) * Q, -1);

    for (int ap = 0; ap < prev.assign_count; ++ap) {
      const double* brow = &best[static_cast<std::size_t>(ap) * Q];
      for (int ac = 0; ac < cur.assign_count; ++ac) {
        double move = move_factor(t - 1, ap, t, ac);
        if (move == 0.0) continue;
        edge_features(t - 1, ap, t, ac, false, scratch, scratch.features);
        emissions_from_features(scratch.features, scratch, scratch.emis);
        if (t == 1) {
          edge_features(0, ap, 1, ac, true, scratch, scratch.features0);
          emissions_from_features(scratch.features0, scratch, scratch.emis0);
        }
        double scale = move * cur.strength_prod[static_cast<std::size_t>(ac)];
        for (int qp = 0; qp < Q; ++qp) {
          double v = brow[qp];
          if (t == 1) v *= scratch.emis0[static_cast<std::size_t>(qp)];
          if (v == 0.0) continue;
          const double* trow = &trans_q_[static_cast<std::size_t>(qp) * Q];
          for (int q = 0; q < Q; ++q) {
            double cand = v * trow[q] * scratch.emis[static_cast<std::size_t>(q)] *
                          scale;
            std::size_t slot = static_cast<std::size_t>(ac) * Q + q;
            if (cand > next[slot]) {
              next[slot] = cand;
              back_a[static_cast<std::size_t>(t)][slot] = ap;
              back_q[static_cast<std::size_t>(t)][slot] = qp;
            }
          }
        }
      }
    }
    double peak = *std::max_element(next.begin(), next.end());
    if (!(peak > 0.0)) return result;
    double inv = 1.0 / peak;
    for (double& v : next) v *= inv;
    log_scale += std::log(peak);
    best.swap(next);
  }

  double top = 0.0;
  int cur_a = -1, cur_q = -1;
  const FramePack& last = frames_[static_cast<std::size_t>(frame_count_ - 1)];
  for (int a = 0; a < last.assign_count; ++a) {
    for (int q = 0; q < Q; ++q) {
      double v = best[static_cast<std::size_t>(a) * Q + q];
      if (v > top) {
        top = v;
        cur_a = a;
        cur_q = q;
      }
    }
  }
  if (cur_a < 0) return result;
  result.log_score = std::log(top) + log_scale;

  std::vector<int> a_path(static_cast<std::size_t>(frame_count_));
  std::vector<int> q_path(static_cast<std::size_t>(frame_count_));
  for (int t = frame_count_ - 1; t >= 0; --t) {
    a_path[static_cast<std::size_t>(t)] = cur_a;
    q_path[static_cast<std::size_t>(t)] = cur_q;
    if (t > 0) {
      std::size_t slot = static_cast<std::size_t>(cur_a) * Q + cur_q;
      int pa = back_a[static_cast<std::size_t>(t)][slot];
      int pq = back_q[static_cast<std::size_t>(t)][slot];
      cur_a = pa;
      cur_q = pq;
    }
  }
  result.assignment.resize(static_cast<std::size_t>(frame_count_));
  for (int t = 0; t < frame_count_; ++t) {
    const FramePack& pack = frames_[static_cast<std::size_t>(t)];
    for (int p = 0; p < P; ++p) {
      result.assignment[static_cast<std::size_t>(t)].push_back(
          pack.det_of[static_cast<std::size_t>(
                          a_path[static_cast<std::size_t>(t)]) * P + p]);
    }
  }
  result.states.assign(static_cast<std::size_t>(word_count_),
                       std::vector<int>(static_cast<std::size_t>(frame_count_)));
  for (int t = 0; t < frame_count_; ++t) {
    for (int l = 0; l < word_count_; ++l) {
      result.states[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)] =
          state_decode_[static_cast<std::size_t>(
                            q_path[static_cast<std::size_t>(t)]) * word_count_ + l];
    }
  }
  return result;
}

Posteriors JointLattice::forward_backward() const {
  if (empty_frame_) {
    throw ScoreError("posteriors undefined: frame without detections");
  }
  const int Q = joint_states_;
  const int T = frame_count_;
  const int L = word_count_;
  Scratch scratch;

  Posteriors post;
  post.words.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    WordPosteriors& wp = post.words[static_cast<std::size_t>(l)];
    const WordSlot& slot = words_[static_cast<std::size_t>(l)];
    wp.gamma.assign(static_cast<std::size_t>(T),
                    std::vector<double>(static_cast<std::size_t>(slot.states), 0.0));
    if (T > 1) {
      wp.transition.assign(
          static_cast<std::size_t>(T - 1),
          std::vector<std::vector<double>>(
              static_cast<std::size_t>(slot.states),
              std::vector<double>(static_cast<std::size_t>(slot.states), 0.0)));
    }
    wp.occupancy.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      auto& per_state = wp.occupancy[static_cast<std::size_t>(t)];
      per_state.resize(static_cast<std::size_t>(slot.states));
      for (int i = 0; i < slot.states; ++i) {
        per_state[static_cast<std::size_t>(i)].resize(slot.pos->features.size());
        for (std::size_t n = 0; n < slot.pos->features.size(); ++n) {
          per_state[static_cast<std::size_t>(i)][n].assign(
              static_cast<std::size_t>(slot.pos->features[n].bins), 0.0);
        }
      }
    }
  }

  const FramePack& f0 = frames_[0];
  std::vector<std::vector<double>> alphas(static_cast<std::size_t>(T));
  std::vector<double> scales(static_cast<std::size_t>(T), 1.0);
  alphas[0].resize(static_cast<std::size_t>(f0.assign_count) * Q);
  for (int a = 0; a < f0.assign_count; ++a) {
    for (int q = 0; q < Q; ++q) {
      alphas[0][static_cast<std::size_t>(a) * Q + q] =
          f0.strength_prod[static_cast<std::size_t>(a)] *
          init_q_[static_cast<std::size_t>(q)];
    }
  }

  if (T == 1) {
    double total = 0.0;
    std::vector<double> node(static_cast<std::size_t>(f0.assign_count) * Q);
    for (int a = 0; a < f0.assign_count; ++a) {
      edge_features(0, a, 0, a, true, scratch, scratch.features);
      emissions_from_features(scratch.features, scratch, scratch.emis);
      for (int q = 0; q < Q; ++q) {
        double v = alphas[0][static_cast<std::size_t>(a) * Q + q] *
                   scratch.emis[static_cast<std::size_t>(q)];
        node[static_cast<std::size_t>(a) * Q + q] = v;
        total += v;
      }
    }
    if (!(total > 0.0)) throw ScoreError("posteriors undefined: zero total score");
    post.log_likelihood = std::log(total);
    for (int a = 0; a < f0.assign_count; ++a) {
      edge_features(0, a, 0, a, true, scratch, scratch.features);
      for (int q = 0; q < Q; ++q) {
        double mass = node[static_cast<std::size_t>(a) * Q + q] / total;
        if (mass == 0.0) continue;
        for (int l = 0; l < L; ++l) {
          int i = state_decode_[static_cast<std::size_t>(q) * L + l];
          WordPosteriors& wp = post.words[static_cast<std::size_t>(l)];
          wp.gamma[0][static_cast<std::size_t>(i)] += mass;
          const auto& values = scratch.features[static_cast<std::size_t>(l)];
          for (std::size_t n = 0; n < values.size(); ++n) {
            wp.occupancy[0][static_cast<std::size_t>(i)][n]
                        [static_cast<std::size_t>(values[n])] += mass;
          }
        }
      }
    }
    return post;
  }

  scratch.pair_acc.resize(static_cast<std::size_t>(Q));
  for (int t = 1; t < T; ++t) {
    const FramePack& prev = frames_[static_cast<std::size_t>(t - 1)];
    const FramePack& cur = frames_[static_cast<std::size_t>(t)];
    std::vector<double>& next = alphas[static_cast<std::size_t>(t)];
    next.assign(static_cast<std::size_t>(cur.assign_count) * Q, 0.0);
    const std::vector<double>& alpha = alphas[static_cast<std::size_t>(t - 1)];

    for (int ap = 0; ap < prev.assign_count; ++ap) {
      const double* arow = &alpha[static_cast<std::size_t>(ap) * Q];
      for (int ac = 0; ac < cur.assign_count; ++ac) {
        double move = move_factor(t - 1, ap, t, ac);
        if (move == 0.0) continue;
        edge_features(t - 1, ap, t, ac, false, scratch, scratch.features);
        emissions_from_features(scratch.features, scratch, scratch.emis);
        if (t == 1) {
          edge_features(0, ap, 1, ac, true, scratch, scratch.features0);
          emissions_from_features(scratch.features0, scratch, scratch.emis0);
        }
        std::fill(scratch.pair_acc.begin(), scratch.pair_acc.end(), 0.0);
        for (int qp = 0; qp < Q; ++qp) {
          double v = arow[qp];
          if (t == 1) v *= scratch.emis0[static_cast<std::size_t>(qp)];
          if (v == 0.0) continue;
          const double* trow = &trans_q_[static_cast<std::size_t>(qp) * Q];
          for (int q = 0; q < Q; ++q) {
            scratch.pair_acc[static_cast<std::size_t>(q)] += v * trow[q];
          }
        }
        double* nrow = &next[static_cast<std::size_t>(ac) * Q];
        for (int q = 0; q < Q; ++q) {
          nrow[q] += scratch.pair_acc[static_cast<std::size_t>(q)] *
                     scratch.emis[static_cast<std::size_t>(q)] * move;
        }
      }
    }
    for (int ac = 0; ac < cur.assign_count; ++ac) {
      double s = cur.strength_prod[static_cast<std::size_t>(ac)];
      double* nrow = &next[static_cast<std::size_t>(ac) * Q];
      for (int q = 0; q < Q; ++q) nrow[q] *= s;
    }
    double peak = *std::max_element(next.begin(), next.end());
    if (!(peak > 0.0)) throw ScoreError("posteriors undefined: zero total score");
    double inv = 1.0 / peak;
    for (double& v : next) v *= inv;
    scales[static_cast<std::size_t>(t)] = peak;
  }

  double z = 0.0;
  for (double v : alphas[static_cast<std::size_t>(T - 1)]) z += v;
  if (!(z > 0.0)) throw ScoreError("posteriors undefined: zero total score");
  double log_likelihood = std::log(z);
  for (int t = 1; t < T; ++t) {
    log_likelihood += std::log(scales[static_cast<std::size_t>(t)]);
  }
  post.log_likelihood = log_likelihood;

  const FramePack& flast = frames_[static_cast<std::size_t>(T - 1)];
  std::vector<double> beta(static_cast<std::size_t>(flast.assign_count) * Q, 1.0);

  for (int a = 0; a < flast.assign_count; ++a) {
    for (int q = 0; q < Q; ++q) {
      double mass = alphas[static_cast<std::size_t>(T - 1)]
                          [static_cast<std::size_t>(a) * Q + q] / z;
      if (mass == 0.0) continue;
      for (int l = 0; l < L; ++l) {
        int i = state_decode_[static_cast<std::size_t>(q) * L + l];
        post.words[static_cast<std::size_t>(l)]
            .gamma[static_cast<std::size_t>(T - 1)][static_cast<std::size_t>(i)] +=
            mass;
      }
    }
  }

  std::vector<double> wq(static_cast<std::size_t>(Q));
  std::vector<double> beta_prev;
  for (int t = T - 1; t >= 1; --t) {
    const FramePack& prev = frames_[static_cast<std::size_t>(t - 1)];
    const FramePack& cur = frames_[static_cast<std::size_t>(t)];
    const std::vector<double>& alpha = alphas[static_cast<std::size_t>(t - 1)];
    beta_prev.assign(static_cast<std::size_t>(prev.assign_count) * Q, 0.0);
    const double edge_norm = 1.0 / (scales[static_cast<std::size_t>(t)] * z);

    for (int ap = 0; ap < prev.assign_count; ++ap) {
      const double* arow = &alpha[static_cast<std::size_t>(ap) * Q];
      double* bprow = &beta_prev[static_cast<std::size_t>(ap) * Q];
      for (int ac = 0; ac < cur.assign_count; ++ac) {
        double move = move_factor(t - 1, ap, t, ac);
        if (move == 0.0) continue;
        edge_features(t - 1, ap, t, ac, false, scratch, scratch.features);
        emissions_from_features(scratch.features, scratch, scratch.emis);
        if (t == 1) {
          edge_features(0, ap, 1, ac, true, scratch, scratch.features0);
          emissions_from_features(scratch.features0, scratch, scratch.emis0);
        }
        const double scale = move * cur.strength_prod[static_cast<std::size_t>(ac)];
        const double* brow = &beta[static_cast<std::size_t>(ac) * Q];
        for (int q = 0; q < Q; ++q) {
          wq[static_cast<std::size_t>(q)] =
              scratch.emis[static_cast<std::size_t>(q)] * brow[q] * scale;
        }

        for (int qp = 0; qp < Q; ++qp) {
          double e0 = t == 1 ? scratch.emis0[static_cast<std::size_t>(qp)] : 1.0;
          const double* trow = &trans_q_[static_cast<std::size_t>(qp) * Q];
          double acc = 0.0;
          for (int q = 0; q < Q; ++q) {
            acc += trow[q] * wq[static_cast<std::size_t>(q)];
          }
          bprow[qp] += acc * e0;

          double av = arow[qp] * e0;
          if (av == 0.0) continue;
          for (int q = 0; q < Q; ++q) {
            double mass = av * trow[q] * wq[static_cast<std::size_t>(q)] * edge_norm;
            if (mass == 0.0) continue;
            for (int l = 0; l < L; ++l) {
              int i = state_decode_[static_cast<std::size_t>(qp) * L + l];
              int k = state_decode_[static_cast<std::size_t>(q) * L + l];
              WordPosteriors& wp = post.words[static_cast<std::size_t>(l)];
              wp.transition[static_cast<std::size_t>(t - 1)]
                           [static_cast<std::size_t>(i)]
                           [static_cast<std::size_t>(k)] += mass;
              const auto& values = scratch.features[static_cast<std::size_t>(l)];
              for (std::size_t n = 0; n < values.size(); ++n) {
                wp.occupancy[static_cast<std::size_t>(t)]
                            [static_cast<std::size_t>(k)][n]
                            [static_cast<std::size_t>(values[n])] += mass;
              }
              if (t == 1) {
                const auto& values0 =
                    scratch.features0[static_cast<std::size_t>(l)];
                for (std::size_t n = 0; n < values0.size(); ++n) {
                  wp.occupancy[0][static_cast<std::size_t>(i)][n]
                              [static_cast<std::size_t>(values0[n])] += mass;
                }
              }
            }
          }
        }
      }
    }
    double inv = 1.0 / scales[static_cast<std::size_t>(t)];
    for (double& v : beta_prev) v *= inv;
    beta.swap(beta_prev);

    for (int a = 0; a < prev.assign_count; ++a) {
      for (int q = 0; q < Q; ++q) {
        double mass = alpha[static_cast<std::size_t>(a) * Q + q] *
                      beta[static_cast<std::size_t>(a) * Q + q] / z;
        if (mass == 0.0) continue;
        for (int l = 0; l < L; ++l) {
          int i = state_decode_[static_cast<std::size_t>(q) * L + l];
          post.words[static_cast<std::size_t>(l)]
              .gamma[static_cast<std::size_t>(t - 1)]
                    [static_cast<std::size_t>(i)] += mass;
        }
      }
    }
  }
  return post;
}

}  // namespace

FeatureTensor compute_features(const VideoClip& clip,
                               const AssignmentSequence& assignment,
                               const SentenceTemplate& sentence,
                               const Lexicon& lexicon,
                               const ScoringConfig& config) {
  JointLattice lattice(clip, sentence, lexicon, config);
  if (lattice.empty_frame()) {
    throw ConfigError("compute_features: frame without detections");
  }
  const int T = clip.frame_count();
  if (static_cast<int>(assignment.size()) != T) {
    throw ConfigError("assignment sequence length does not match frame count");
  }
  const int P = sentence.participant_count;
  auto encode = [&](int t) {
    const auto& tuple = assignment[static_cast<std::size_t>(t)];
    if (static_cast<int>(tuple.size()) != P) {
      throw ConfigError("assignment tuple arity mismatch at frame " +
                        std::to_string(t));
    }
    const int dets =
        static_cast<int>(clip.frames[static_cast<std::size_t>(t)].size());
    int id = 0;
    for (int p = 0; p < P; ++p) {
      int det = tuple[static_cast<std::size_t>(p)];
      if (det < 0 || det >= dets) {
        throw ConfigError("detection index out of range at frame " +
                          std::to_string(t));
      }
      id = id * dets + det;
    }
    return id;
  };

  FeatureTensor tensor;
  tensor.values.assign(sentence.words.size(), {});
  for (auto& per_word : tensor.values) {
    per_word.resize(static_cast<std::size_t>(T));
  }
  Scratch scratch;
  std::vector<std::vector<int>> values;
  for (int t = 0; t < T; ++t) {
    if (T == 1) {
      lattice.edge_features(0, encode(0), 0, encode(0), true, scratch, values);
    } else if (t == 0) {
      lattice.edge_features(0, encode(0), 1, encode(1), true, scratch, values);
    } else {
      lattice.edge_features(t - 1, encode(t - 1), t, encode(t), false, scratch,
                            values);
    }
    for (std::size_t l = 0; l < sentence.words.size(); ++l) {
      tensor.values[l][static_cast<std::size_t>(t)] = values[l];
    }
  }
  return tensor;
}

double track_weight_log(const VideoClip& clip,
                        const AssignmentSequence& assignment,
                        const ScoringConfig& config) {
  const int T = clip.frame_count();
  if (static_cast<int>(assignment.size()) != T || T == 0) {
    throw ConfigError("assignment sequence length does not match frame count");
  }
  const int P = static_cast<int>(assignment[0].size());
  double log_weight = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto& frame = clip.frames[static_cast<std::size_t>(t)];
    for (int p = 0; p < P; ++p) {
      int det = assignment[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
      if (det < 0 || det >= static_cast<int>(frame.size())) {
        throw ConfigError("detection index out of range");
      }
      double s = frame[static_cast<std::size_t>(det)].strength;
      if (s <= 0.0) return kLogZero;
      log_weight += std::log(s);
    }
    if (t > 0) {
      const auto& prev = clip.frames[static_cast<std::size_t>(t - 1)];
      for (int p = 0; p < P; ++p) {
        const Detection& a = prev[static_cast<std::size_t>(
            assignment[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(p)])];
        const Detection& b = frame[static_cast<std::size_t>(
            assignment[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)])];
        double dx = b.x - a.x;
        double dy = b.y - a.y;
        log_weight -= config.coherence_kappa * (dx * dx + dy * dy);
      }
    }
  }
  return log_weight;
}

double forward_score(const VideoClip& clip, const SentenceTemplate& sentence,
                     const Lexicon& lexicon, const ScoringConfig& config) {
  JointLattice lattice(clip, sentence, lexicon, config);
  return lattice.forward();
}

ViterbiResult viterbi_score(const VideoClip& clip,
                            const SentenceTemplate& sentence,
                            const Lexicon& lexicon,
                            const ScoringConfig& config) {
  JointLattice lattice(clip, sentence, lexicon, config);
  return lattice.viterbi();
}

double sentence_prior_log(const SentenceTemplate& sentence,
                          const Lexicon& lexicon) {
  double log_prior = 0.0;
  for (int entry_id : sentence.words) {
    const PosConfig& pos = lexicon.pos_of_entry(entry_id);
    log_prior += std::log(static_cast<double>(pos.state_count));
    for (const FeatureSpec& f : pos.features) {
      log_prior += std::log(static_cast<double>(f.bins));
    }
  }
  return log_prior;
}

double normalized_score(const VideoClip& clip, const SentenceTemplate& sentence,
                        const Lexicon& lexicon, const ScoringConfig& config) {
  const int T = clip.frame_count();
  if (T < 1) throw ConfigError("clip has no frames");
  double raw = forward_score(clip, sentence, lexicon, config);
  if (is_log_zero(raw)) return kLogZero;
  return raw / static_cast<double>(T) + sentence_prior_log(sentence, lexicon);
}

Posteriors posteriors(const VideoClip& clip, const SentenceTemplate& sentence,
                      const Lexicon& lexicon, const ScoringConfig& config) {
  JointLattice lattice(clip, sentence, lexicon, config);
  return lattice.forward_backward();
}

}  // namespace groundlex
