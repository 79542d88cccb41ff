#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "subprobe/errors.hpp"
#include "subprobe/sim.hpp"

using namespace subprobe;
using namespace subprobe::sim;

namespace {

ErpTemplate bump(double latency_ms, double width_ms, double amplitude_uv,
                 std::initializer_list<double> weights) {
  ErpComponent component;
  component.latency_ms = latency_ms;
  component.width_ms = width_ms;
  component.amplitude_uv = amplitude_uv;
  component.channel_weights =
      Eigen::Map<const Eigen::VectorXd>(weights.begin(),
                                        static_cast<Eigen::Index>(weights.size()));
  ErpTemplate tpl;
  tpl.components.push_back(component);
  return tpl;
}

protocol::StimulusSchedule one_event(double onset_s, protocol::ClassLabel label,
                                     double total_s) {
  protocol::StimulusSchedule schedule;
  protocol::StimulusEvent event;
  event.onset_s = onset_s;
  event.duration_s = 0.1;
  event.candidate_id = label == protocol::ClassLabel::Target ? "t" : "n";
  event.class_label = label;
  schedule.events.push_back(event);
  schedule.total_duration_s = total_s;
  return schedule;
}

SubjectProfile clean_profile(const ErpTemplate& target) {
  SubjectProfile profile;
  profile.target_erp = target;
  profile.nontarget_erp = ErpTemplate{};
  profile.noise_std_uv = 0.0;
  profile.latency_jitter_ms = 0.0;
  profile.amplitude_scale = 1.0;
  return profile;
}

}  // namespace

TEST_CASE("erp waveform peaks at the latency and decays as a Gaussian") {
  const auto tpl = bump(300.0, 60.0, 5.0, {1.0, 0.25});
  CHECK(erp_waveform(tpl, 300.0, 0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(erp_waveform(tpl, 300.0, 1) == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(erp_waveform(tpl, 360.0, 0) ==
        doctest::Approx(5.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(erp_waveform(tpl, 240.0, 0) ==
        doctest::Approx(5.0 * std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("erp waveform has compact support of six widths") {
  const auto tpl = bump(300.0, 60.0, 5.0, {1.0});
  // At exactly six widths the bump is still evaluated (it is ~1.5e-8 of the
  // peak); one step beyond it is identically zero.
  CHECK(erp_waveform(tpl, 300.0 + 6.0 * 60.0, 0) ==
        doctest::Approx(5.0 * std::exp(-18.0)).epsilon(1e-9));
  CHECK(erp_waveform(tpl, 300.0 + 6.0 * 60.0, 0) < 1e-6);
  CHECK(erp_waveform(tpl, 300.0 + 6.0 * 60.0 + 1e-9, 0) == 0.0);
  CHECK(erp_waveform(tpl, 300.0 - 6.0 * 60.0 - 1e-9, 0) == 0.0);
  CHECK(erp_waveform(tpl, -1000.0, 0) == 0.0);
}

TEST_CASE("components superpose and out-of-range channels contribute nothing") {
  auto tpl = bump(300.0, 60.0, 8.0, {1.0, 0.5});
  const auto n200 = bump(200.0, 40.0, -4.0, {0.2, 1.0});
  tpl.components.push_back(n200.components.front());

  const double expect =
      8.0 * 1.0 * std::exp(-0.5 * std::pow((250.0 - 300.0) / 60.0, 2)) +
      -4.0 * 0.2 * std::exp(-0.5 * std::pow((250.0 - 200.0) / 40.0, 2));
  CHECK(erp_waveform(tpl, 250.0, 0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(erp_waveform(tpl, 250.0, 2) == 0.0);   // beyond both weight vectors
  CHECK(erp_waveform(tpl, 250.0, -1) == 0.0);  // defensive
}

TEST_CASE("shifted moves latencies and nothing else") {
  const auto tpl = bump(300.0, 60.0, 8.0, {1.0});
  const auto moved = shifted(tpl, 25.0);
  CHECK(moved.components[0].latency_ms == 325.0);
  CHECK(moved.components[0].width_ms == 60.0);
  CHECK(moved.components[0].amplitude_uv == 8.0);
  CHECK(tpl.components[0].latency_ms == 300.0);  // original untouched
  CHECK(erp_waveform(moved, 325.0, 0) == doctest::Approx(8.0));
}

TEST_CASE("default templates cover the ten-channel montage") {
  CHECK(default_montage().size() == 10);
  const auto target = default_target_erp();
  const auto nontarget = default_nontarget_erp();
  REQUIRE(target.components.size() == 2);
  for (const auto& component : target.components) {
    CHECK(component.channel_weights.size() == 10);
  }
  // The nontarget response is the same family at one fifth the strength.
  for (std::size_t c = 0; c < target.components.size(); ++c) {
    CHECK(nontarget.components[c].amplitude_uv ==
          doctest::Approx(0.2 * target.components[c].amplitude_uv));
    CHECK(nontarget.components[c].latency_ms == target.components[c].latency_ms);
  }
  // Strongest p300 at Pz (index 2), strongest N200 at PO7/PO8 (5, 6).
  const auto& p300 = target.components[0];
  const auto& n200 = target.components[1];
  CHECK(p300.amplitude_uv > 0.0);
  CHECK(n200.amplitude_uv < 0.0);
  CHECK(p300.channel_weights[2] == doctest::Approx(1.0));
  CHECK(n200.channel_weights[5] == doctest::Approx(1.0));
  CHECK(n200.channel_weights[6] == doctest::Approx(1.0));
}

TEST_CASE("background noise hits the requested std exactly") {
  for (const double requested : {1.0, 4.0, 6.5}) {
    const auto noise = background_noise(4096, 1024.0, requested, 99);
    REQUIRE(noise.size() == 4096);
    CHECK(std::abs(noise.mean()) < 1e-9);
    const double sd = std::sqrt(noise.squaredNorm() / 4096.0);
    CHECK(sd == doctest::Approx(requested).epsilon(1e-12));
  }
}

TEST_CASE("background noise is deterministic and seed-sensitive") {
  const auto a = background_noise(1000, 512.0, 3.0, 7);
  const auto b = background_noise(1000, 512.0, 3.0, 7);
  const auto c = background_noise(1000, 512.0, 3.0, 8);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("background noise is low-pass shaped") {
  const auto noise = background_noise(32768, 1024.0, 1.0, 123);
  double lag1 = 0.0;
  for (Eigen::Index i = 1; i < noise.size(); ++i) lag1 += noise[i] * noise[i - 1];
  lag1 /= noise.squaredNorm();
  // An 8 Hz pole at 1024 Hz sampling keeps neighboring samples highly
  // correlated; white noise would sit near zero.
  CHECK(lag1 > 0.9);
}

TEST_CASE("background noise edge cases") {
  CHECK(background_noise(0, 1024.0, 3.0, 1).size() == 0);
  const auto silent = background_noise(64, 1024.0, 0.0, 1);
  CHECK(silent.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(background_noise(64, 1024.0, -1.0, 1), ConfigError);
}

TEST_CASE("a noiseless recording reproduces the waveform oracle") {
  // fs that does not divide 1000 keeps the six-width support boundary away
  // from exact sample indices, so both sides agree on which samples are in.
  const double fs = 512.0;
  const auto tpl = bump(300.0, 60.0, 5.0, {1.0, 0.25});
  const auto schedule = one_event(1.0, protocol::ClassLabel::Target, 3.0);
  const auto recording =
      synthesize_recording(schedule, clean_profile(tpl), fs, {"a", "b"}, 5);

  REQUIRE(recording.samples.rows() == 2);
  REQUIRE(recording.samples.cols() ==
          static_cast<Eigen::Index>(std::ceil((3.0 + 1.5) * fs)));
  for (Eigen::Index s = 0; s < recording.samples.cols(); ++s) {
    const double t_ms = (static_cast<double>(s) / fs - 1.0) * 1000.0;
    for (Eigen::Index c = 0; c < 2; ++c) {
      const double expected = erp_waveform(tpl, t_ms, c);
      CHECK(recording.samples(c, s) ==
            doctest::Approx(expected).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("amplitude scale multiplies the evoked response") {
  const auto tpl = bump(300.0, 60.0, 5.0, {1.0});
  auto profile = clean_profile(tpl);
  profile.amplitude_scale = 0.5;
  const auto schedule = one_event(1.0, protocol::ClassLabel::Target, 3.0);
  const auto recording =
      synthesize_recording(schedule, profile, 1000.0, {"a"}, 5);
  const auto peak = static_cast<Eigen::Index>(1.3 * 1000.0);
  CHECK(recording.samples(0, peak) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("blank events and zero templates add no signal") {
  auto profile = clean_profile(bump(300.0, 60.0, 5.0, {1.0}));
  auto schedule = one_event(1.0, protocol::ClassLabel::NonTarget, 3.0);
  // NonTarget uses the (empty) nontarget template here.
  auto recording = synthesize_recording(schedule, profile, 1000.0, {"a"}, 5);
  CHECK(recording.samples.cwiseAbs().maxCoeff() == 0.0);

  schedule.events[0].class_label = protocol::ClassLabel::Unknown;
  schedule.events[0].candidate_id = protocol::kBlankCandidate;
  // Unknown events are skipped even when the target template is loud.
  profile.nontarget_erp = profile.target_erp;
  recording = synthesize_recording(schedule, profile, 1000.0, {"a"}, 5);
  CHECK(recording.samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("recordings superpose event by event over shared noise") {
  SubjectProfile profile;
  profile.target_erp = bump(300.0, 60.0, 8.0, {1.0, 0.5});
  profile.nontarget_erp = bump(200.0, 40.0, -2.0, {0.5, 1.0});
  profile.noise_std_uv = 2.0;
  profile.latency_jitter_ms = 10.0;  // jitter is keyed per event onset
  profile.amplitude_scale = 1.3;

  auto a = one_event(2.0, protocol::ClassLabel::Target, 8.0);
  auto b = one_event(2.3, protocol::ClassLabel::NonTarget, 8.0);  // overlapping
  protocol::StimulusSchedule both = a;
  both.events.push_back(b.events[0]);

  protocol::StimulusSchedule empty;
  empty.total_duration_s = 8.0;

  const std::vector<std::string> montage = {"x", "y"};
  const auto rec_a = synthesize_recording(a, profile, 512.0, montage, 77);
  const auto rec_b = synthesize_recording(b, profile, 512.0, montage, 77);
  const auto rec_ab = synthesize_recording(both, profile, 512.0, montage, 77);
  const auto noise = synthesize_recording(empty, profile, 512.0, montage, 77);

  const Eigen::MatrixXd reconstructed =
      rec_a.samples + rec_b.samples - noise.samples;
  CHECK((rec_ab.samples - reconstructed).cwiseAbs().maxCoeff() < 1e-9);
  // And the noise itself is nonzero, so the identity is not vacuous.
  CHECK(noise.samples.cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("synthesize_recording validates the montage") {
  const auto schedule = one_event(1.0, protocol::ClassLabel::Target, 3.0);
  const auto profile = clean_profile(bump(300.0, 60.0, 5.0, {1.0}));
  CHECK_THROWS_AS(synthesize_recording(schedule, profile, 1000.0, {}, 1),
                  ConfigError);
  // Weight vector sized for one channel cannot drive a two-channel montage.
  CHECK_THROWS_AS(
      synthesize_recording(schedule, profile, 1000.0, {"a", "b"}, 1),
      ConfigError);
  CHECK_THROWS_AS(synthesize_recording(schedule, profile, 0.0, {"a"}, 1),
                  ConfigError);
}

TEST_CASE("profiles are drawn inside the configured ranges") {
  const ProfileDistribution dist;
  std::set<Awareness> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto profile = draw_profile(dist, seed);
    CHECK(profile.noise_std_uv >= 3.0);
    CHECK(profile.noise_std_uv <= 6.0);
    CHECK(profile.amplitude_scale >= 0.7);
    CHECK(profile.amplitude_scale <= 1.3);
    CHECK(profile.latency_jitter_ms == 10.0);
    CHECK(profile.target_erp.components.size() ==
          dist.target_erp.components.size());
    seen.insert(profile.awareness);
  }
  CHECK(seen.size() == 4);  // all survey levels appear across 200 draws

  const auto again = draw_profile(dist, 42);
  const auto same = draw_profile(dist, 42);
  CHECK(again.noise_std_uv == same.noise_std_uv);
  CHECK(again.amplitude_scale == same.amplitude_scale);
  CHECK(again.awareness == same.awareness);
}

TEST_CASE("awareness labels round-trip to strings") {
  CHECK(std::string(to_string(Awareness::Nothing)) == "Nothing");
  CHECK(std::string(to_string(Awareness::Identified)) == "Identified");
  CHECK(std::string(to_string(CohortVariant::CountingTrained)) ==
        "counting-trained");
  CHECK(std::string(to_string(CohortVariant::FaceTrained)) == "face-trained");
}

TEST_CASE("a small cohort runs end to end deterministically") {
  CohortConfig config;
  config.n_subjects = 2;
  config.seed = 2468;
  config.fs = 320.0;  // keeps the epoch length divisible by the decimator

  const auto report = run_cohort(config);
  REQUIRE(report.subjects.size() == 2);
  CHECK(report.variant == CohortVariant::CountingTrained);
  CHECK(report.accuracy ==
        doctest::Approx(static_cast<double>(report.n_correct) / 2.0));
  CHECK(report.sweep.points.size() == 41);
  CHECK(report.sweep.n_subjects == 2);
  for (const auto& subject : report.subjects) {
    CHECK(subject.true_target == protocol::kVideoTargetCandidate);
    // The probe ranks exactly the three-way vocabulary.
    REQUIRE(subject.scores.size() == 3);
    CHECK(subject.scores.count(protocol::kVideoTargetCandidate) == 1);
    CHECK(subject.scores.count(protocol::kVideoContrastCandidate) == 1);
    CHECK(subject.scores.count(protocol::kBlankCandidate) == 1);
    CHECK(subject.scores.at(protocol::kVideoTargetCandidate).epoch_count == 45);
    CHECK(subject.scores.at(protocol::kVideoContrastCandidate).epoch_count == 135);
    CHECK(subject.scores.at(protocol::kBlankCandidate).epoch_count == 135);
    CHECK((subject.predicted == subject.true_target) == subject.correct);
  }

  // Byte-identical reports on a re-run.
  std::ostringstream first, second;
  write_cohort_report(report, first);
  write_cohort_report(run_cohort(config), second);
  CHECK(first.str() == second.str());
  CHECK(first.str().rfind("subprobe-cohort v1\nvariant counting-trained\n"
                          "subjects 2\n", 0) == 0);

  std::ostringstream scores;
  write_scores_csv(report, scores);
  CHECK(scores.str().rfind("subject,candidate,mean_score,epoch_count,true_target",
                           0) == 0);
}

TEST_CASE("the face-trained variant splits the video session") {
  CohortConfig config;
  config.n_subjects = 1;
  config.seed = 1357;
  config.fs = 320.0;
  config.variant = CohortVariant::FaceTrained;

  const auto report = run_cohort(config);
  REQUIRE(report.subjects.size() == 1);
  const auto& scores = report.subjects[0].scores;
  // Probing only the second half leaves half the epochs per candidate.
  long total = 0;
  for (const auto& [id, stat] : scores) total += stat.epoch_count;
  CHECK(total == (45 + 135 + 135) / 2 + 1);  // 158: ceil of an odd split
}

TEST_CASE("cohorts validate their configuration") {
  CohortConfig config;
  config.n_subjects = 0;
  CHECK_THROWS_AS(run_cohort(config), ConfigError);
}
