#include "subprobe/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>

#include "subprobe/errors.hpp"
#include "subprobe/rng.hpp"

namespace subprobe::sim {

namespace {

constexpr double kGaussSupportWidths = 6.0;
constexpr double kNoisePoleHz = 8.0;
constexpr double kRecordingTailS = 1.5;

std::string format_f9(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9f", value);
  return buffer;
}

Eigen::VectorXd montage_weights(std::initializer_list<double> weights) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(weights.size()));
  Eigen::Index i = 0;
  for (const double w : weights) v[i++] = w;
  return v;
}

ErpTemplate attenuated(ErpTemplate tpl, double factor) {
  for (auto& component : tpl.components) component.amplitude_uv *= factor;
  return tpl;
}

}  // namespace

double erp_waveform(const ErpTemplate& tpl, double t_ms, Eigen::Index channel) {
  double total = 0.0;
  for (const auto& component : tpl.components) {
    if (channel < 0 || channel >= component.channel_weights.size()) continue;
    const double u = (t_ms - component.latency_ms) / component.width_ms;
    if (std::abs(u) > kGaussSupportWidths) continue;
    total += component.amplitude_uv * component.channel_weights[channel] *
             std::exp(-0.5 * u * u);
  }
  return total;
}

ErpTemplate shifted(const ErpTemplate& tpl, double shift_ms) {
  ErpTemplate out = tpl;
  for (auto& component : out.components) component.latency_ms += shift_ms;
  return out;
}

const char* to_string(Awareness awareness) {
  switch (awareness) {
    case Awareness::Nothing: return "Nothing";
    case Awareness::Something: return "Something";
    case Awareness::Face: return "Face";
    case Awareness::Identified: return "Identified";
  }
  return "Nothing";
}

const std::vector<std::string>& default_montage() {
  static const std::vector<std::string> names = {
      "Fz", "Cz", "Pz", "P3", "P4", "PO7", "PO8", "Oz", "C3", "C4"};
  return names;
}

ErpTemplate default_target_erp() {
  ErpTemplate tpl;
  // p300: parietal-central positivity.
  //                     Fz   Cz   Pz   P3   P4   PO7  PO8  Oz   C3   C4
  tpl.components.push_back(
      {300.0, 60.0, 8.0,
       montage_weights({0.4, 0.7, 1.0, 0.8, 0.8, 0.5, 0.5, 0.6, 0.5, 0.5})});
  // N200: occipito-temporal negativity.
  tpl.components.push_back(
      {200.0, 40.0, -4.0,
       montage_weights({0.2, 0.3, 0.5, 0.4, 0.4, 1.0, 1.0, 0.8, 0.2, 0.2})});
  return tpl;
}

ErpTemplate default_nontarget_erp() { return attenuated(default_target_erp(), 0.2); }

Eigen::VectorXd background_noise(Eigen::Index n_samples, double fs,
                                 double noise_std, std::uint64_t seed) {
  if (noise_std < 0.0) throw ConfigError("noise std must be >= 0");
  if (n_samples < 0) throw ConfigError("sample count must be >= 0");
  Eigen::VectorXd noise = Eigen::VectorXd::Zero(n_samples);
  if (n_samples == 0 || noise_std == 0.0) return noise;

  rng::Prng gen(seed);
  const double pole = std::exp(-2.0 * std::numbers::pi * kNoisePoleHz / fs);
  double state = 0.0;
  for (Eigen::Index i = 0; i < n_samples; ++i) {
    state = pole * state + (1.0 - pole) * gen.normal();
    noise[i] = state;
  }

  const double mean = noise.mean();
  noise.array() -= mean;
  const double sd = std::sqrt(noise.squaredNorm() / static_cast<double>(n_samples));
  if (sd > 0.0) noise *= noise_std / sd;
  return noise;
}

signal::Recording synthesize_recording(const protocol::StimulusSchedule& schedule,
                                       const SubjectProfile& profile, double fs,
                                       const std::vector<std::string>& channels,
                                       std::uint64_t seed) {
  if (!(fs > 0.0)) throw ConfigError("sampling rate must be > 0");
  if (channels.empty()) throw ConfigError("montage must have at least one channel");
  const auto n_channels = static_cast<Eigen::Index>(channels.size());
  const auto n_samples = static_cast<Eigen::Index>(
      std::ceil((schedule.total_duration_s + kRecordingTailS) * fs));

  signal::Recording recording;
  recording.fs = fs;
  recording.channel_labels = channels;
  recording.samples.resize(n_channels, n_samples);
  for (Eigen::Index c = 0; c < n_channels; ++c) {
    recording.samples.row(c) =
        background_noise(n_samples, fs, profile.noise_std_uv,
                         rng::derive_seed(seed, rng::Stream::Noise,
                                          static_cast<std::uint64_t>(c)))
            .transpose();
  }

  for (const auto& event : schedule.events) {
    if (event.class_label == protocol::ClassLabel::Unknown) continue;
    const ErpTemplate& tpl = event.class_label == protocol::ClassLabel::Target
                                 ? profile.target_erp
                                 : profile.nontarget_erp;

    double jitter_ms = 0.0;
    if (profile.latency_jitter_ms > 0.0) {
      // Keyed by the onset value itself so an event's jitter does not depend
      // on what else is in the schedule; single-event and full schedules
      // superpose exactly.
      rng::Prng jitter_gen(rng::derive_seed(
          seed, rng::Stream::Jitter, std::bit_cast<std::uint64_t>(event.onset_s)));
      jitter_ms = profile.latency_jitter_ms * jitter_gen.normal();
    }
    const double onset_s = event.onset_s + jitter_ms / 1000.0;

    for (const auto& component : tpl.components) {
      if (component.channel_weights.size() != n_channels) {
        throw ConfigError("component has " +
                          std::to_string(component.channel_weights.size()) +
                          " channel weights for a montage of " +
                          std::to_string(n_channels));
      }
      const double center_s = onset_s + component.latency_ms / 1000.0;
      const double width_s = component.width_ms / 1000.0;
      const auto lo = std::max<Eigen::Index>(
          0, static_cast<Eigen::Index>(
                 std::ceil((center_s - kGaussSupportWidths * width_s) * fs)));
      const auto hi = std::min<Eigen::Index>(
          n_samples - 1, static_cast<Eigen::Index>(std::floor(
                             (center_s + kGaussSupportWidths * width_s) * fs)));
      for (Eigen::Index s = lo; s <= hi; ++s) {
        const double u = (static_cast<double>(s) / fs - center_s) / width_s;
        const double bump =
            profile.amplitude_scale * component.amplitude_uv * std::exp(-0.5 * u * u);
        for (Eigen::Index c = 0; c < n_channels; ++c) {
          recording.samples(c, s) += bump * component.channel_weights[c];
        }
      }
    }
  }
  return recording;
}

SubjectProfile draw_profile(const ProfileDistribution& dist, std::uint64_t seed) {
  rng::Prng gen(rng::derive_seed(seed, rng::Stream::Profile));
  SubjectProfile profile;
  profile.target_erp = dist.target_erp;
  profile.nontarget_erp = dist.nontarget_erp;
  profile.noise_std_uv =
      gen.uniform(dist.noise_std_range.first, dist.noise_std_range.second);
  profile.latency_jitter_ms = dist.latency_jitter_ms;
  profile.amplitude_scale =
      gen.uniform(dist.amplitude_range.first, dist.amplitude_range.second);
  profile.awareness = static_cast<Awareness>(gen.uniform_below(4));
  return profile;
}

const char* to_string(CohortVariant variant) {
  return variant == CohortVariant::CountingTrained ? "counting-trained"
                                                   : "face-trained";
}

namespace {

signal::LabeledDataset dataset_rows(const signal::LabeledDataset& data,
                                    Eigen::Index first, Eigen::Index count) {
  signal::LabeledDataset out;
  out.X = data.X.middleRows(first, count);
  out.y = data.y.segment(first, count);
  out.candidate_ids.assign(
      data.candidate_ids.begin() + first,
      data.candidate_ids.begin() + first + count);
  return out;
}

SubjectResult run_subject(const CohortConfig& config, int subject_index,
                          const blr::TrainConfig& train_config) {
  const std::uint64_t subject_seed =
      rng::derive_seed(config.seed, rng::Stream::Subject,
                       static_cast<std::uint64_t>(subject_index));
  const SubjectProfile profile = draw_profile(config.profiles, subject_seed);

  const protocol::StimulusSchedule video =
      build_video_schedule(subject_seed, config.video);
  const protocol::StimulusSchedule video_with_blanks =
      probe::with_blank_events(video, subject_seed);
  const signal::Recording video_rec = synthesize_recording(
      video_with_blanks, profile, config.fs, config.channels,
      rng::derive_seed(subject_seed, rng::Stream::Recording, 1));
  const signal::LabeledDataset video_data =
      signal::preprocess(video_rec, video_with_blanks,
                         protocol::kVideoTargetCandidate, config.preprocess);

  blr::BoostedModel model;
  probe::CandidateScores scores;
  if (config.variant == CohortVariant::CountingTrained) {
    // The counting digits evoke the same response family, but later (see
    // ProfileDistribution::counting_latency_shift_ms).
    SubjectProfile counting_profile = profile;
    counting_profile.target_erp =
        shifted(profile.target_erp, config.profiles.counting_latency_shift_ms);
    counting_profile.nontarget_erp =
        shifted(profile.nontarget_erp, config.profiles.counting_latency_shift_ms);

    const protocol::StimulusSchedule counting =
        build_counting_schedule(subject_seed, config.counting);
    const signal::Recording counting_rec = synthesize_recording(
        counting, counting_profile, config.fs, config.channels,
        rng::derive_seed(subject_seed, rng::Stream::Recording, 0));
    const signal::LabeledDataset counting_data =
        signal::preprocess(counting_rec, counting, protocol::kCountedCandidate,
                           config.preprocess);
    model = blr::train(counting_data, train_config);
    scores = probe::candidate_scores(model, video_data);
  } else {
    const Eigen::Index half = video_data.n_rows() / 2;
    model = blr::train(dataset_rows(video_data, 0, half), train_config);
    scores = probe::candidate_scores(
        model, dataset_rows(video_data, half, video_data.n_rows() - half));
  }

  SubjectResult result;
  result.subject_index = subject_index;
  result.true_target = protocol::kVideoTargetCandidate;
  result.predicted = probe::predict_target(scores);
  result.confidence = probe::confidence(scores, probe::Mode::agnostic());
  result.correct = result.predicted == result.true_target;
  result.awareness = profile.awareness;
  result.scores = std::move(scores);
  return result;
}

}  // namespace

CohortReport run_cohort(const CohortConfig& config) {
  if (config.n_subjects < 1) throw ConfigError("cohort needs at least 1 subject");

  blr::TrainConfig train_config = config.train;
  train_config.preprocessing_fingerprint =
      signal::preprocessing_fingerprint(config.preprocess);

  CohortReport report;
  report.variant = config.variant;
  report.subjects.reserve(static_cast<std::size_t>(config.n_subjects));
  for (int i = 0; i < config.n_subjects; ++i) {
    report.subjects.push_back(run_subject(config, i, train_config));
    if (report.subjects.back().correct) ++report.n_correct;
  }
  report.accuracy = static_cast<double>(report.n_correct) /
                    static_cast<double>(config.n_subjects);

  std::vector<probe::SubjectOutcome> outcomes;
  outcomes.reserve(report.subjects.size());
  for (const auto& subject : report.subjects) {
    outcomes.push_back({subject.scores, subject.true_target});
  }
  const std::vector<double> grid =
      probe::default_grid(outcomes, probe::Mode::agnostic(), config.sweep_points);
  report.sweep = probe::threshold_sweep(outcomes, probe::Mode::agnostic(), grid);
  return report;
}

void write_cohort_report(const CohortReport& report, std::ostream& out) {
  out << "subprobe-cohort v1\n";
  out << "variant " << to_string(report.variant) << '\n';
  out << "subjects " << report.subjects.size() << '\n';
  out << "correct " << report.n_correct << '\n';
  out << "accuracy " << format_f9(report.accuracy) << '\n';
  out << "subject true_target predicted confidence correct awareness\n";
  for (const auto& subject : report.subjects) {
    out << subject.subject_index << ' ' << subject.true_target << ' '
        << subject.predicted << ' ' << format_f9(subject.confidence) << ' '
        << (subject.correct ? 1 : 0) << ' ' << to_string(subject.awareness)
        << '\n';
  }
}

void write_cohort_report(const CohortReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_cohort_report(report, out);
  if (!out) throw IoError("failed writing cohort report to '" + path + "'");
}

void write_scores_csv(const CohortReport& report, std::ostream& out) {
  std::vector<probe::SubjectOutcome> outcomes;
  outcomes.reserve(report.subjects.size());
  for (const auto& subject : report.subjects) {
    outcomes.push_back({subject.scores, subject.true_target});
  }
  probe::write_scores_csv(outcomes, out);
}

void write_scores_csv(const CohortReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_scores_csv(report, out);
  if (!out) throw IoError("failed writing scores to '" + path + "'");
}

}  // namespace subprobe::sim
