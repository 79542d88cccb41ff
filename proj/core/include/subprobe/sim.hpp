#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "subprobe/blr.hpp"
#include "subprobe/probe.hpp"
#include "subprobe/protocol.hpp"
#include "subprobe/signal.hpp"

namespace subprobe::sim {

// One Gaussian bump: amplitude * weight[ch] * exp(-u^2/2) with
// u = (t - latency) / width; treated as zero beyond six widths.
struct ErpComponent {
  double latency_ms = 0.0;
  double width_ms = 1.0;
  double amplitude_uv = 0.0;
  Eigen::VectorXd channel_weights;  // one entry per montage channel
};

struct ErpTemplate {
  std::vector<ErpComponent> components;
};

// Evoked value in microvolts at t_ms after stimulus onset. Channels beyond a
// component's weight vector contribute nothing.
double erp_waveform(const ErpTemplate& tpl, double t_ms, Eigen::Index channel);

// Copy with every component latency moved by shift_ms; models the latency
// difference between stimulus modalities.
ErpTemplate shifted(const ErpTemplate& tpl, double shift_ms);

// Post-session survey level; metadata only, never feeds signal generation.
enum class Awareness { Nothing, Something, Face, Identified };

const char* to_string(Awareness awareness);

struct SubjectProfile {
  ErpTemplate target_erp;
  ErpTemplate nontarget_erp;
  double noise_std_uv = 4.0;
  double latency_jitter_ms = 10.0;
  double amplitude_scale = 1.0;
  Awareness awareness = Awareness::Nothing;
};

// Simulated electrode set: the eight classification channels plus two
// fillers, so channel selection does real work.
const std::vector<std::string>& default_montage();

// p300 bump (+8 uV, 300 ms, posterior-central) plus an N200 (-4 uV, 200 ms,
// occipito-temporal), weighted for the default montage.
ErpTemplate default_target_erp();
// The same shape attenuated to 20%: common visual response without the
// relevance effect.
ErpTemplate default_nontarget_erp();

// Seeded Gaussian noise shaped by a single-pole low-pass (pole at 8 Hz),
// then centered and rescaled so the sample standard deviation equals
// noise_std exactly.
Eigen::VectorXd background_noise(Eigen::Index n_samples, double fs,
                                 double noise_std, std::uint64_t seed);

// Background noise per channel plus one jittered, amplitude-scaled evoked
// response per Target/NonTarget event; Unknown events (blank probes) get
// nothing. Deterministic per seed, and built so that a schedule's recording
// equals the sum of its single-event recordings minus the shared noise.
signal::Recording synthesize_recording(const protocol::StimulusSchedule& schedule,
                                       const SubjectProfile& profile, double fs,
                                       const std::vector<std::string>& channels,
                                       std::uint64_t seed);

// Cohort-level randomization of the per-subject knobs.
struct ProfileDistribution {
  ErpTemplate target_erp = default_target_erp();
  ErpTemplate nontarget_erp = default_nontarget_erp();
  std::pair<double, double> noise_std_range{3.0, 6.0};
  std::pair<double, double> amplitude_range{0.7, 1.3};
  double latency_jitter_ms = 10.0;
  // The counting digits are clearly visible and attended; their response
  // peaks later than the brief video flashes. The calibration model
  // therefore meets a small domain gap at probe time, which is exactly what
  // in-session training avoids.
  double counting_latency_shift_ms = 25.0;
};

SubjectProfile draw_profile(const ProfileDistribution& dist, std::uint64_t seed);

// counting-trained: calibrate on the counting session, probe the video
// session. face-trained: train on the chronological first half of the video
// epochs, probe the second half.
enum class CohortVariant { CountingTrained, FaceTrained };

const char* to_string(CohortVariant variant);

struct CohortConfig {
  int n_subjects = 50;
  std::uint64_t seed = 0;
  CohortVariant variant = CohortVariant::CountingTrained;
  double fs = 1024.0;
  std::vector<std::string> channels = default_montage();
  protocol::CountingConfig counting;
  protocol::VideoConfig video;
  ProfileDistribution profiles;
  signal::PreprocessConfig preprocess;
  blr::TrainConfig train;
  double decision_threshold = 0.0;
  int sweep_points = 41;
};

struct SubjectResult {
  int subject_index = 0;
  std::string true_target;
  std::string predicted;
  double confidence = 0.0;  // agnostic margin of the three-way decision
  bool correct = false;
  Awareness awareness = Awareness::Nothing;
  probe::CandidateScores scores;
};

struct CohortReport {
  CohortVariant variant = CohortVariant::CountingTrained;
  std::vector<SubjectResult> subjects;
  long n_correct = 0;
  double accuracy = 0.0;
  probe::SweepCurve sweep;
};

// Full per-subject pipeline: schedules, synthetic recordings, training,
// three-way probe {target, contrast, blank}, then the cohort-wide agnostic
// threshold sweep. Subjects are seeded independently, so reports from the
// two variants at the same master seed are paired run for run.
CohortReport run_cohort(const CohortConfig& config);

// Structured text: aggregate lines, then one line per subject.
void write_cohort_report(const CohortReport& report, std::ostream& out);
void write_cohort_report(const CohortReport& report, const std::string& path);

// Per-candidate means in the probe scores CSV format.
void write_scores_csv(const CohortReport& report, std::ostream& out);
void write_scores_csv(const CohortReport& report, const std::string& path);

}  // namespace subprobe::sim
