// Command-line front end: schedules, synthetic recordings, training, probing,
// cohorts and threshold sweeps. Every subcommand takes --seed and produces
// byte-identical outputs for identical inputs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "subprobe/blr.hpp"
#include "subprobe/errors.hpp"
#include "subprobe/probe.hpp"
#include "subprobe/protocol.hpp"
#include "subprobe/rng.hpp"
#include "subprobe/signal.hpp"
#include "subprobe/sim.hpp"

namespace {

namespace proto = subprobe::protocol;
namespace sig = subprobe::signal;
namespace blr = subprobe::blr;
namespace probe = subprobe::probe;
namespace sim = subprobe::sim;
namespace rng = subprobe::rng;

std::string format_f9(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9f", value);
  return buffer;
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

// Shared preprocessing flags; train and probe must agree on these, which the
// model fingerprint enforces.
struct PreprocessFlags {
  double pre_s = 0.2;
  double post_s = 1.0;
  double passband = 0.35;
  double stopband = 0.40;
  std::string convention = "nyquist";
  int decimate = 4;
  std::string channels;

  void attach(CLI::App* cmd) {
    cmd->add_option("--pre", pre_s, "Epoch window before onset, seconds");
    cmd->add_option("--post", post_s, "Epoch window after onset, seconds");
    cmd->add_option("--passband", passband, "Low-pass passband edge");
    cmd->add_option("--stopband", stopband, "Low-pass stopband edge");
    cmd->add_option("--freq-convention", convention,
                    "Band edge units: nyquist or samplerate")
        ->check(CLI::IsMember({"nyquist", "samplerate"}));
    cmd->add_option("--decimate", decimate, "Median decimation factor");
    cmd->add_option("--channels", channels,
                    "Comma-separated channel subset used for features");
  }

  sig::PreprocessConfig config() const {
    sig::PreprocessConfig cfg;
    cfg.window = {pre_s, post_s};
    cfg.filter.passband_edge = passband;
    cfg.filter.stopband_edge = stopband;
    cfg.filter.convention = convention == "samplerate"
                                ? sig::FreqConvention::SampleRate
                                : sig::FreqConvention::Nyquist;
    cfg.decimate_factor = decimate;
    if (!channels.empty()) cfg.channels = split_csv_list(channels);
    return cfg;
  }
};

struct TrainFlags {
  int rounds = 10;
  double lambda = 1.0;
  double gamma_max = 4.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--rounds", rounds, "Boosting rounds");
    cmd->add_option("--lambda", lambda, "Ridge penalty for the weak learners");
    cmd->add_option("--gamma-max", gamma_max, "Upper bound of the gamma search");
  }

  blr::TrainConfig config() const {
    blr::TrainConfig cfg;
    cfg.rounds = rounds;
    cfg.ridge_lambda = lambda;
    cfg.gamma_max = gamma_max;
    return cfg;
  }
};

struct ProfileFlags {
  double noise_min = 3.0;
  double noise_max = 6.0;
  double amplitude_min = 0.7;
  double amplitude_max = 1.3;
  double jitter_ms = 10.0;
  double counting_shift_ms = 25.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--noise-min", noise_min, "Noise std lower bound, uV");
    cmd->add_option("--noise-max", noise_max, "Noise std upper bound, uV");
    cmd->add_option("--amplitude-min", amplitude_min,
                    "Response amplitude scale lower bound");
    cmd->add_option("--amplitude-max", amplitude_max,
                    "Response amplitude scale upper bound");
    cmd->add_option("--jitter", jitter_ms, "Response latency jitter std, ms");
    cmd->add_option("--counting-shift", counting_shift_ms,
                    "Extra response latency of the counting digits, ms");
  }

  sim::ProfileDistribution distribution() const {
    sim::ProfileDistribution dist;
    dist.noise_std_range = {noise_min, noise_max};
    dist.amplitude_range = {amplitude_min, amplitude_max};
    dist.latency_jitter_ms = jitter_ms;
    dist.counting_latency_shift_ms = counting_shift_ms;
    return dist;
  }
};

void check_violations(const proto::StimulusSchedule& schedule,
                      const std::string& what) {
  const auto report = proto::validate_schedule(schedule);
  if (!report.empty()) {
    throw subprobe::DataError(what + ": " + report.front().message + " (" +
                              std::to_string(report.size()) + " violations)");
  }
}

int cmd_schedule(const std::string& kind, std::uint64_t seed, double duration,
                 const std::string& out) {
  proto::StimulusSchedule schedule;
  if (kind == "counting") {
    schedule = proto::build_counting_schedule(seed);
  } else {
    proto::VideoConfig cfg;
    cfg.duration_s = duration;
    schedule = proto::build_video_schedule(seed, cfg);
  }
  check_violations(schedule, "generated schedule");
  proto::write_schedule_csv(schedule, out);
  std::cout << kind << " schedule: " << schedule.events.size() << " events, "
            << format_f9(schedule.total_duration_s) << " s -> " << out << '\n';
  return 0;
}

int cmd_simulate(int subjects, std::uint64_t seed, const std::string& out_dir,
                 double fs, const ProfileFlags& profile_flags) {
  std::filesystem::create_directories(out_dir);
  const sim::ProfileDistribution dist = profile_flags.distribution();
  for (int i = 0; i < subjects; ++i) {
    const std::uint64_t subject_seed = rng::derive_seed(
        seed, rng::Stream::Subject, static_cast<std::uint64_t>(i));
    const sim::SubjectProfile profile = sim::draw_profile(dist, subject_seed);

    char stem[32];
    std::snprintf(stem, sizeof(stem), "subject%03d", i);
    const std::string base = out_dir + "/" + stem;

    const proto::StimulusSchedule counting =
        proto::build_counting_schedule(subject_seed);
    sim::SubjectProfile counting_profile = profile;
    counting_profile.target_erp =
        sim::shifted(profile.target_erp, dist.counting_latency_shift_ms);
    counting_profile.nontarget_erp =
        sim::shifted(profile.nontarget_erp, dist.counting_latency_shift_ms);
    proto::write_schedule_csv(counting, base + "_counting.csv");
    sig::write_recording(
        sim::synthesize_recording(
            counting, counting_profile, fs, sim::default_montage(),
            rng::derive_seed(subject_seed, rng::Stream::Recording, 0)),
        base + "_counting");

    const proto::StimulusSchedule video = probe::with_blank_events(
        proto::build_video_schedule(subject_seed), subject_seed);
    proto::write_schedule_csv(video, base + "_video.csv");
    sig::write_recording(
        sim::synthesize_recording(
            video, profile, fs, sim::default_montage(),
            rng::derive_seed(subject_seed, rng::Stream::Recording, 1)),
        base + "_video");

    std::cout << stem << ": noise " << format_f9(profile.noise_std_uv)
              << " uV, amplitude x" << format_f9(profile.amplitude_scale)
              << ", awareness " << sim::to_string(profile.awareness) << '\n';
  }
  return 0;
}

int cmd_train(const std::string& recording_base, const std::string& schedule_path,
              const std::string& target, const std::string& out,
              const PreprocessFlags& pre_flags, const TrainFlags& train_flags) {
  const sig::Recording recording = sig::read_recording(recording_base);
  const proto::StimulusSchedule schedule =
      proto::read_schedule_csv_file(schedule_path);
  const bool target_present =
      std::any_of(schedule.events.begin(), schedule.events.end(),
                  [&](const auto& e) { return e.candidate_id == target; });
  if (!target_present) {
    throw subprobe::DataError("target '" + target +
                              "' does not occur in the schedule");
  }

  const sig::PreprocessConfig pre_cfg = pre_flags.config();
  blr::TrainConfig train_cfg = train_flags.config();
  train_cfg.preprocessing_fingerprint = sig::preprocessing_fingerprint(pre_cfg);

  const sig::LabeledDataset data =
      sig::preprocess(recording, schedule, target, pre_cfg);
  blr::TrainTrace trace;
  const blr::BoostedModel model = blr::train(data, train_cfg, &trace);
  for (std::size_t m = 0; m < trace.log_likelihood.size(); ++m) {
    std::cout << "round " << (m + 1) << " gamma " << format_f9(trace.gamma[m])
              << " log-likelihood " << format_f9(trace.log_likelihood[m]) << '\n';
  }
  blr::save_model(model, out);
  std::cout << "model: " << data.n_rows() << " epochs, K = " << model.feature_dim
            << " -> " << out << '\n';
  return 0;
}

int cmd_probe(const std::string& model_path, const std::string& recording_base,
              const std::string& schedule_path, const std::string& mode_name,
              const std::string& target, double threshold, const std::string& out,
              const PreprocessFlags& pre_flags) {
  const blr::BoostedModel model = blr::load_model(model_path);
  const sig::PreprocessConfig pre_cfg = pre_flags.config();
  const std::uint64_t fingerprint = sig::preprocessing_fingerprint(pre_cfg);
  if (model.preprocessing_fingerprint != 0 &&
      model.preprocessing_fingerprint != fingerprint) {
    throw subprobe::ConfigError(
        "model was trained with preprocessing fingerprint " +
        std::to_string(model.preprocessing_fingerprint) +
        " but the current configuration hashes to " + std::to_string(fingerprint) +
        "; refusing to score");
  }

  const sig::Recording recording = sig::read_recording(recording_base);
  const proto::StimulusSchedule schedule =
      proto::read_schedule_csv_file(schedule_path);
  const probe::Mode mode = mode_name == "targeted" ? probe::Mode::targeted(target)
                                                   : probe::Mode::agnostic();
  const sig::LabeledDataset data = sig::preprocess(
      recording, schedule, mode.is_targeted() ? target : std::string(), pre_cfg);

  const probe::CandidateScores scores = probe::candidate_scores(model, data);
  const probe::Decision decision = probe::decide(scores, mode, threshold);

  std::ostringstream text;
  for (const auto& [id, stat] : scores) {
    text << "candidate " << id << " mean " << format_f9(stat.mean_score)
         << " epochs " << stat.epoch_count << '\n';
  }
  text << "predicted " << probe::predict_target(scores) << '\n';
  text << "confidence " << format_f9(decision.confidence) << '\n';
  if (decision.accepted()) {
    text << "decision accept " << *decision.accepted_candidate << '\n';
  } else {
    text << "decision reject\n";
  }

  std::cout << text.str();
  if (!out.empty()) {
    std::ofstream file(out, std::ios::binary);
    if (!file) throw subprobe::IoError("cannot open '" + out + "' for writing");
    file << text.str();
  }
  return 0;
}

int cmd_cohort(int subjects, std::uint64_t seed, const std::string& variant,
               const std::string& out_dir, double fs, double threshold,
               int sweep_points, const ProfileFlags& profile_flags,
               const PreprocessFlags& pre_flags, const TrainFlags& train_flags) {
  sim::CohortConfig cfg;
  cfg.n_subjects = subjects;
  cfg.seed = seed;
  cfg.variant = variant == "face-trained" ? sim::CohortVariant::FaceTrained
                                          : sim::CohortVariant::CountingTrained;
  cfg.fs = fs;
  cfg.profiles = profile_flags.distribution();
  cfg.preprocess = pre_flags.config();
  cfg.train = train_flags.config();
  cfg.decision_threshold = threshold;
  cfg.sweep_points = sweep_points;

  const sim::CohortReport report = sim::run_cohort(cfg);

  std::filesystem::create_directories(out_dir);
  sim::write_cohort_report(report, out_dir + "/report.txt");
  sim::write_scores_csv(report, out_dir + "/scores.csv");
  probe::write_sweep_csv(report.sweep, out_dir + "/sweep.csv");

  std::cout << "variant " << sim::to_string(report.variant) << ", "
            << report.subjects.size() << " subjects, " << report.n_correct
            << " correct, accuracy " << format_f9(report.accuracy) << '\n';
  std::cout << "report.txt, scores.csv, sweep.csv -> " << out_dir << '\n';
  return 0;
}

int cmd_sweep(const std::string& scores_path, const std::string& mode_name,
              const std::string& out, int points, double grid_min,
              double grid_max, bool custom_grid) {
  const std::vector<probe::SubjectOutcome> subjects =
      probe::read_scores_csv_file(scores_path);
  const probe::Mode mode = mode_name == "targeted"
                               ? probe::Mode::targeted(std::string())
                               : probe::Mode::agnostic();

  std::vector<double> grid;
  if (custom_grid) {
    if (points < 2 || !(grid_max > grid_min)) {
      throw subprobe::ConfigError("custom grid needs --points >= 2 and max > min");
    }
    grid.resize(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
      grid[static_cast<std::size_t>(i)] =
          grid_min + (grid_max - grid_min) * static_cast<double>(i) /
                         static_cast<double>(points - 1);
    }
  } else {
    grid = probe::default_grid(subjects, mode, points);
  }

  const probe::SweepCurve curve = probe::threshold_sweep(subjects, mode, grid);
  probe::write_sweep_csv(curve, out);
  std::cout << "sweep over " << curve.points.size() << " thresholds, "
            << curve.n_subjects << " subjects -> " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subliminal-probe EEG pipeline: schedules, synthetic cohorts, "
               "boosted logistic regression, confidence decisions"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Structured-text config file overriding defaults");

  // schedule
  auto* schedule_cmd = app.add_subcommand("schedule", "Generate a stimulus schedule");
  std::string schedule_kind;
  std::uint64_t schedule_seed = 0;
  double schedule_duration = 900.0;
  std::string schedule_out = "schedule.csv";
  schedule_cmd->add_option("--kind", schedule_kind, "counting or video")
      ->required()
      ->check(CLI::IsMember({"counting", "video"}));
  schedule_cmd->add_option("--seed", schedule_seed, "Master seed");
  schedule_cmd->add_option("--duration", schedule_duration,
                           "Video session length, seconds");
  schedule_cmd->add_option("--out", schedule_out, "Output CSV path");

  // simulate
  auto* simulate_cmd =
      app.add_subcommand("simulate", "Synthesize per-subject session recordings");
  int simulate_subjects = 1;
  std::uint64_t simulate_seed = 0;
  std::string simulate_out = "simulated";
  double simulate_fs = 1024.0;
  ProfileFlags simulate_profile;
  simulate_cmd->add_option("--subjects", simulate_subjects, "Subject count");
  simulate_cmd->add_option("--seed", simulate_seed, "Master seed");
  simulate_cmd->add_option("--out", simulate_out, "Output directory");
  simulate_cmd->add_option("--fs", simulate_fs, "Sampling rate, Hz");
  simulate_profile.attach(simulate_cmd);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model from a recording");
  std::string train_recording, train_schedule, train_target = "1";
  std::string train_out = "model.blr";
  PreprocessFlags train_pre;
  TrainFlags train_flags;
  train_cmd->add_option("--recording", train_recording,
                        "Recording base path (without .hdr/.raw)")
      ->required();
  train_cmd->add_option("--schedule", train_schedule, "Schedule CSV")->required();
  train_cmd->add_option("--target", train_target, "Candidate trained as positive");
  train_cmd->add_option("--out", train_out, "Output model path");
  train_pre.attach(train_cmd);
  train_flags.attach(train_cmd);

  // probe
  auto* probe_cmd =
      app.add_subcommand("probe", "Score a recording against a trained model");
  std::string probe_model, probe_recording, probe_schedule;
  std::string probe_mode = "targeted", probe_target, probe_out;
  double probe_threshold = 0.0;
  PreprocessFlags probe_pre;
  probe_cmd->add_option("--model", probe_model, "Trained model file")->required();
  probe_cmd->add_option("--recording", probe_recording, "Recording base path")
      ->required();
  probe_cmd->add_option("--schedule", probe_schedule, "Schedule CSV")->required();
  probe_cmd->add_option("--mode", probe_mode, "targeted or agnostic")
      ->check(CLI::IsMember({"targeted", "agnostic"}));
  probe_cmd->add_option("--target", probe_target,
                        "Probed hypothesis (targeted mode)");
  probe_cmd->add_option("--threshold", probe_threshold,
                        "Minimal confidence for acceptance");
  probe_cmd->add_option("--out", probe_out, "Also write the report to this file");
  probe_pre.attach(probe_cmd);

  // cohort
  auto* cohort_cmd =
      app.add_subcommand("cohort", "Run a full synthetic cohort end to end");
  int cohort_subjects = 50;
  std::uint64_t cohort_seed = 0;
  std::string cohort_variant = "counting-trained";
  std::string cohort_out = "cohort";
  double cohort_fs = 1024.0;
  double cohort_threshold = 0.0;
  int cohort_sweep_points = 41;
  ProfileFlags cohort_profile;
  PreprocessFlags cohort_pre;
  TrainFlags cohort_train;
  cohort_cmd->add_option("--subjects", cohort_subjects, "Subject count");
  cohort_cmd->add_option("--seed", cohort_seed, "Master seed");
  cohort_cmd->add_option("--variant", cohort_variant,
                         "counting-trained or face-trained")
      ->check(CLI::IsMember({"counting-trained", "face-trained"}));
  cohort_cmd->add_option("--out", cohort_out, "Output directory");
  cohort_cmd->add_option("--fs", cohort_fs, "Sampling rate, Hz");
  cohort_cmd->add_option("--threshold", cohort_threshold,
                         "Decision threshold recorded in the report");
  cohort_cmd->add_option("--sweep-points", cohort_sweep_points,
                         "Threshold grid size for the sweep");
  cohort_profile.attach(cohort_cmd);
  cohort_pre.attach(cohort_cmd);
  cohort_train.attach(cohort_cmd);

  // sweep
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Recompute a threshold sweep from scores");
  std::string sweep_scores, sweep_mode = "agnostic", sweep_out = "sweep.csv";
  int sweep_points = 41;
  double sweep_min = 0.0, sweep_max = 0.0;
  sweep_cmd->add_option("--scores", sweep_scores, "scores.csv from a cohort run")
      ->required();
  sweep_cmd->add_option("--mode", sweep_mode, "targeted or agnostic")
      ->check(CLI::IsMember({"targeted", "agnostic"}));
  sweep_cmd->add_option("--out", sweep_out, "Output CSV path");
  sweep_cmd->add_option("--points", sweep_points, "Grid size");
  auto* opt_min = sweep_cmd->add_option("--min", sweep_min, "Grid lower bound");
  auto* opt_max = sweep_cmd->add_option("--max", sweep_max, "Grid upper bound");
  opt_min->needs(opt_max);
  opt_max->needs(opt_min);

  CLI11_PARSE(app, argc, argv);

  try {
    if (schedule_cmd->parsed()) {
      return cmd_schedule(schedule_kind, schedule_seed, schedule_duration,
                          schedule_out);
    }
    if (simulate_cmd->parsed()) {
      return cmd_simulate(simulate_subjects, simulate_seed, simulate_out,
                          simulate_fs, simulate_profile);
    }
    if (train_cmd->parsed()) {
      return cmd_train(train_recording, train_schedule, train_target, train_out,
                       train_pre, train_flags);
    }
    if (probe_cmd->parsed()) {
      if (probe_mode == "targeted" && probe_target.empty()) {
        throw subprobe::ConfigError("targeted mode needs --target");
      }
      return cmd_probe(probe_model, probe_recording, probe_schedule, probe_mode,
                       probe_target, probe_threshold, probe_out, probe_pre);
    }
    if (cohort_cmd->parsed()) {
      return cmd_cohort(cohort_subjects, cohort_seed, cohort_variant, cohort_out,
                        cohort_fs, cohort_threshold, cohort_sweep_points,
                        cohort_profile, cohort_pre, cohort_train);
    }
    if (sweep_cmd->parsed()) {
      const bool custom = opt_min->count() > 0;
      return cmd_sweep(sweep_scores, sweep_mode, sweep_out, sweep_points,
                       sweep_min, sweep_max, custom);
    }
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << '\n';
    return 1;
  }
  return 0;
}
