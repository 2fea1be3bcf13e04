#include "doctest.h"

#include <cmath>

#include "groundlex/lattice.hpp"
#include "oracle.hpp"

using namespace groundlex;
using groundlex::testing::Instance;

namespace {

// single-frame detection helper
Detection det(int cls, double strength, double x, double y) {
  Detection d;
  d.class_id = cls;
  d.strength = strength;
  d.x = x;
  d.y = y;
  return d;
}

// one word, one participant, class feature only
Instance tiny_instance() {
  Instance instance;
  instance.scoring.coherence_kappa = 0.3;
  PosConfig pos{"p", "test", 1, 1, {{FeatureKind::kObjectClass, 2}}};
  instance.lexicon = init_uniform({pos}, {{"w", "p"}}, 0.0, 0);
  instance.sentence.words = {0};
  instance.sentence.args = {{0}};
  instance.sentence.participant_count = 1;
  instance.clip.frames = {{det(0, 1.0, 0.0, 0.0)}};
  return instance;
}

}  // namespace

TEST_CASE("quantizers behave on the fixed cases") {
  ScoringConfig config;
  config.speed_edges = {0.06, 0.35};
  config.distance_change_epsilon = 0.05;

  SUBCASE("stationary participant lands in the lowest speed bin") {
    CHECK(quantize_speed(0.0, config) == 0);
    CHECK(quantize_speed(0.05, config) == 0);
    CHECK(quantize_speed(0.2, config) == 1);
    CHECK(quantize_speed(1.0, config) == 2);
  }
  SUBCASE("distance 5 then 3 quantizes as decreasing") {
    CHECK(quantize_distance_change(3.0 - 5.0, config) == 0);
    CHECK(quantize_distance_change(0.0, config) == 1);
    CHECK(quantize_distance_change(0.2, config) == 2);
  }
  SUBCASE("due-east pair lands in the first sector") {
    // B at (5,0) relative to A at the origin
    CHECK(quantize_angle(5.0, 0.0, 4) == 0);
    CHECK(quantize_angle(0.0, 5.0, 4) == 1);
    CHECK(quantize_angle(-5.0, 0.0, 4) == 2);
    CHECK(quantize_angle(0.0, -5.0, 4) == 3);
    // sector boundaries: [-45, 45) degrees is sector 0
    CHECK(quantize_angle(1.0, 0.99, 4) == 0);
    CHECK(quantize_angle(1.0, 1.01, 4) == 1);
  }
}

TEST_CASE("compute_features on hand-placed points") {
  ScoringConfig scoring;
  PosConfig verb{"v", "test", 1, 2,
                 {{FeatureKind::kDistanceChange, 3},
                  {FeatureKind::kActorSpeed, scoring.speed_bins()}}};
  PosConfig prep{"pr", "test", 1, 2,
                 {{FeatureKind::kPairAngle, scoring.angle_sectors}}};
  Lexicon lexicon = init_uniform({verb, prep}, {{"v", "v"}, {"pr", "pr"}}, 0.0, 0);
  SentenceTemplate sentence;
  sentence.words = {0, 1};
  sentence.args = {{0, 1}, {0, 1}};
  sentence.participant_count = 2;

  VideoClip clip;
  // participant 0 closes from distance 5 to 3; participant 1 due east
  clip.frames = {{det(0, 1.0, 0.0, 0.0), det(0, 1.0, 5.0, 0.0)},
                 {det(0, 1.0, 2.0, 0.0), det(0, 1.0, 5.0, 0.0)}};
  AssignmentSequence assignment = {{0, 1}, {0, 1}};
  FeatureTensor features =
      compute_features(clip, assignment, sentence, lexicon, scoring);

  // frame 0 uses the one-sided difference toward frame 1
  CHECK(features.values[0][0][0] == 0);  // distance 5 -> 3: decreasing
  CHECK(features.values[0][1][0] == 0);
  CHECK(features.values[0][0][1] == 2);  // actor moved 2 units: fast bin
  CHECK(features.values[0][1][1] == 2);
  CHECK(features.values[1][0][0] == 0);  // east sector at frame 0
  CHECK(features.values[1][1][0] == 0);

  SUBCASE("stationary clip gives lowest speed and stable distance") {
    VideoClip still;
    still.frames = {{det(0, 1.0, 0.0, 0.0), det(0, 1.0, 5.0, 0.0)},
                    {det(0, 1.0, 0.0, 0.0), det(0, 1.0, 5.0, 0.0)}};
    FeatureTensor f = compute_features(still, assignment, sentence, lexicon, scoring);
    CHECK(f.values[0][0][0] == 1);
    CHECK(f.values[0][0][1] == 0);
    CHECK(f.values[0][1][1] == 0);
  }
}

TEST_CASE("track weight product form") {
  ScoringConfig scoring;
  scoring.coherence_kappa = 1.0;
  SUBCASE("strengths one, zero motion: weight one") {
    VideoClip clip;
    clip.frames = {{det(0, 1.0, 2.0, 2.0)}, {det(0, 1.0, 2.0, 2.0)}};
    CHECK(track_weight_log(clip, {{0}, {0}}, scoring) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("one strength 0.5 halves the weight") {
    VideoClip clip;
    clip.frames = {{det(0, 1.0, 2.0, 2.0)}, {det(0, 0.5, 2.0, 2.0)}};
    CHECK(track_weight_log(clip, {{0}, {0}}, scoring) ==
          doctest::Approx(std::log(0.5)).epsilon(1e-12));
  }
  SUBCASE("two-frame displacement d contributes exp(-kappa d^2)") {
    VideoClip clip;
    clip.frames = {{det(0, 1.0, 0.0, 0.0)}, {det(0, 1.0, 1.5, 0.0)}};
    CHECK(track_weight_log(clip, {{0}, {0}}, scoring) ==
          doctest::Approx(-1.0 * 1.5 * 1.5).epsilon(1e-12));
  }
}

TEST_CASE("forward score on the one-path lattice") {
  Instance instance = tiny_instance();
  // b(x) = 0.5 by uniform construction over two bins, track weight 1
  double score = forward_score(instance.clip, instance.sentence,
                               instance.lexicon, instance.scoring);
  CHECK(score == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  // single-path lattice: viterbi equals forward
  CHECK(viterbi_score(instance.clip, instance.sentence, instance.lexicon,
                      instance.scoring)
            .log_score == doctest::Approx(score).epsilon(1e-12));
}

TEST_CASE("forward equals brute force on randomized instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    Instance instance = testing::random_instance(rng);
    double fast = forward_score(instance.clip, instance.sentence,
                                instance.lexicon, instance.scoring);
    double slow = testing::brute_force_forward(instance);
    REQUIRE(!is_log_zero(fast));
    CHECK(fast == doctest::Approx(slow).epsilon(1e-9));

    double vit_fast = viterbi_score(instance.clip, instance.sentence,
                                    instance.lexicon, instance.scoring)
                          .log_score;
    double vit_slow = testing::brute_force_viterbi(instance);
    CHECK(vit_fast == doctest::Approx(vit_slow).epsilon(1e-9));
    CHECK(vit_fast <= fast + 1e-9);
  }
}

TEST_CASE("viterbi witnesses reproduce the reported score") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    Instance instance = testing::random_instance(rng);
    ViterbiResult result = viterbi_score(instance.clip, instance.sentence,
                                         instance.lexicon, instance.scoring);
    double recomputed =
        testing::path_log_weight(instance, result.assignment, result.states);
    CHECK(recomputed == doctest::Approx(result.log_score).epsilon(1e-9));
  }
}

TEST_CASE("forward is invariant to detection reordering within a frame") {
  Rng rng(7);
  Instance instance = testing::random_instance(rng);
  double before = forward_score(instance.clip, instance.sentence,
                                instance.lexicon, instance.scoring);
  // reverse detections in every frame
  for (auto& frame : instance.clip.frames) {
    std::reverse(frame.begin(), frame.end());
  }
  double after = forward_score(instance.clip, instance.sentence,
                               instance.lexicon, instance.scoring);
  CHECK(after == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("scaling an output used on the MAP path cannot lower viterbi") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Instance instance = testing::random_instance(rng);
    ViterbiResult before = viterbi_score(instance.clip, instance.sentence,
                                         instance.lexicon, instance.scoring);
    REQUIRE(!is_log_zero(before.log_score));
    // feature value observed by word 0 at frame 0 on the MAP path
    FeatureTensor features =
        compute_features(instance.clip, before.assignment, instance.sentence,
                         instance.lexicon, instance.scoring);
    const int entry = instance.sentence.words[0];
    const int state = before.states[0][0];
    const int bin = features.values[0][0][0];
    instance.lexicon.entries[static_cast<std::size_t>(entry)]
        .output[static_cast<std::size_t>(state)][0][static_cast<std::size_t>(bin)] *=
        1.5;
    ViterbiResult after = viterbi_score(instance.clip, instance.sentence,
                                        instance.lexicon, instance.scoring);
    CHECK(after.log_score >= before.log_score - 1e-12);
  }
}

TEST_CASE("sentence prior") {
  PosConfig empty_feature{"p1", "test", 1, 1, {}};
  PosConfig one_bin{"p2", "test", 1, 1, {{FeatureKind::kObjectClass, 1}}};
  PosConfig rich{"p3", "test", 2, 1, {{FeatureKind::kObjectClass, 8}}};
  Lexicon lexicon = init_uniform({empty_feature, one_bin, rich},
                                 {{"a", "p1"}, {"b", "p2"}, {"c", "p3"}}, 0.0, 0);
  SentenceTemplate one_word;
  one_word.words = {1};
  one_word.args = {{0}};
  one_word.participant_count = 1;
  CHECK(sentence_prior_log(one_word, lexicon) == doctest::Approx(0.0));

  SentenceTemplate rich_word;
  rich_word.words = {2};
  rich_word.args = {{0}};
  rich_word.participant_count = 1;
  CHECK(sentence_prior_log(rich_word, lexicon) ==
        doctest::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("normalized score is per-frame forward plus prior") {
  Rng rng(5);
  Instance instance = testing::random_instance(rng);
  double raw = forward_score(instance.clip, instance.sentence, instance.lexicon,
                             instance.scoring);
  double normalized = normalized_score(instance.clip, instance.sentence,
                                       instance.lexicon, instance.scoring);
  CHECK(normalized ==
        doctest::Approx(raw / instance.clip.frame_count() +
                        sentence_prior_log(instance.sentence, instance.lexicon))
            .epsilon(1e-12));
}

TEST_CASE("posteriors normalize and match brute force") {
  Rng rng(404);
  for (int trial = 0; trial < 25; ++trial) {
    Instance instance = testing::random_instance(rng);
    Posteriors post = posteriors(instance.clip, instance.sentence,
                                 instance.lexicon, instance.scoring);
    testing::BrutePosteriors slow = testing::brute_force_posteriors(instance);
    CHECK(post.log_likelihood ==
          doctest::Approx(slow.log_likelihood).epsilon(1e-9));

    const int frames = instance.clip.frame_count();
    for (std::size_t l = 0; l < instance.sentence.words.size(); ++l) {
      const WordPosteriors& wp = post.words[l];
      for (int t = 0; t < frames; ++t) {
        double gamma_total = 0.0;
        for (std::size_t i = 0; i < wp.gamma[static_cast<std::size_t>(t)].size();
             ++i) {
          double value = wp.gamma[static_cast<std::size_t>(t)][i];
          gamma_total += value;
          CHECK(value ==
                doctest::Approx(slow.gamma[l][static_cast<std::size_t>(t)][i])
                    .epsilon(1e-8));
          // occupancy summed over bins recovers gamma, every feature
          for (std::size_t n = 0;
               n < wp.occupancy[static_cast<std::size_t>(t)][i].size(); ++n) {
            double occ_total = 0.0;
            for (double b : wp.occupancy[static_cast<std::size_t>(t)][i][n]) {
              occ_total += b;
            }
            CHECK(occ_total == doctest::Approx(value).epsilon(1e-10));
          }
        }
        CHECK(gamma_total == doctest::Approx(1.0).epsilon(1e-10));
      }
      for (int t = 1; t < frames; ++t) {
        double xi_total = 0.0;
        const auto& xi = wp.transition[static_cast<std::size_t>(t - 1)];
        for (std::size_t i = 0; i < xi.size(); ++i) {
          for (std::size_t k = 0; k < xi[i].size(); ++k) {
            xi_total += xi[i][k];
            CHECK(xi[i][k] ==
                  doctest::Approx(
                      slow.transition[l][static_cast<std::size_t>(t - 1)][i][k])
                      .epsilon(1e-8));
          }
        }
        CHECK(xi_total == doctest::Approx(1.0).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("single-state word has unit gamma") {
  Instance instance = tiny_instance();
  instance.clip.frames.push_back({det(1, 0.8, 1.0, 0.0)});
  Posteriors post = posteriors(instance.clip, instance.sentence,
                               instance.lexicon, instance.scoring);
  for (const auto& per_frame : post.words[0].gamma) {
    CHECK(per_frame.size() == 1);
    CHECK(per_frame[0] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("empty frame yields a flagged log-zero score, not an error") {
  Instance instance = tiny_instance();
  instance.clip.frames.push_back({});
  CHECK(is_log_zero(forward_score(instance.clip, instance.sentence,
                                  instance.lexicon, instance.scoring)));
  CHECK_THROWS_AS(posteriors(instance.clip, instance.sentence, instance.lexicon,
                             instance.scoring),
                  ScoreError);
}

TEST_CASE("complexity guard rejects oversized sentences") {
  Instance instance = tiny_instance();
  instance.scoring.max_participants = 1;
  SentenceTemplate wide = instance.sentence;
  wide.participant_count = 2;
  wide.args = {{1}};
  CHECK_THROWS_AS(forward_score(instance.clip, wide, instance.lexicon,
                                instance.scoring),
                  ConfigError);
}
