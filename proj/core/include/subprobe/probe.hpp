#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subprobe/blr.hpp"
#include "subprobe/protocol.hpp"
#include "subprobe/signal.hpp"

namespace subprobe::probe {

struct CandidateStat {
  double mean_score = 0.0;
  long epoch_count = 0;
};

// Keyed by candidate id; the ordered map gives lexicographic iteration,
// which is what the documented tie-breaks rely on.
using CandidateScores = std::map<std::string, CandidateStat>;

// Mean decision value per candidate over that candidate's epochs.
CandidateScores candidate_scores(const blr::BoostedModel& model,
                                 const signal::LabeledDataset& data);

// Candidate with the highest mean score; exact ties go to the
// lexicographically smallest id.
std::string predict_target(const CandidateScores& scores);

// Targeted probing tests one named hypothesis; agnostic probing ranks all
// candidates and asks only for a margin.
struct Mode {
  static Mode targeted(std::string target_id) {
    return Mode{std::move(target_id)};
  }
  static Mode agnostic() { return Mode{std::nullopt}; }

  bool is_targeted() const { return target_id.has_value(); }

  std::optional<std::string> target_id;
};

// Targeted: mean(target) - best other mean (negative when the target is not
// ranked first). Agnostic: best mean - second-best mean (always >= 0).
double confidence(const CandidateScores& scores, const Mode& mode);

struct Decision {
  std::optional<std::string> accepted_candidate;
  double confidence = 0.0;

  bool accepted() const { return accepted_candidate.has_value(); }
};

// Accepts the hypothesis (targeted) or the argmax candidate (agnostic) iff
// the confidence reaches the threshold; the comparison is inclusive, so the
// conventional threshold of 0 accepts a zero-margin argmax.
Decision decide(const CandidateScores& scores, const Mode& mode,
                double threshold = 0.0);

struct SubjectOutcome {
  CandidateScores scores;
  std::string true_target;
};

struct SweepPoint {
  double threshold = 0.0;
  long accepted_correct = 0;
  long accepted_wrong = 0;
};

struct SweepCurve {
  std::vector<SweepPoint> points;
  long n_subjects = 0;
};

// For each threshold, count subjects whose decision accepts the true target
// vs. accepts anything else. Targeted mode probes each subject's true target,
// so its wrong column is structurally zero; the agnostic curve is the
// interesting one.
SweepCurve threshold_sweep(const std::vector<SubjectOutcome>& subjects,
                           const Mode& mode, const std::vector<double>& grid);

// Evenly spaced thresholds spanning [-m, +m] where m is the largest absolute
// confidence in the cohort; odd point counts place one threshold exactly at 0.
std::vector<double> default_grid(const std::vector<SubjectOutcome>& subjects,
                                 const Mode& mode, int points = 41);

// CSV with header threshold,accepted_correct,accepted_wrong,n_subjects.
void write_sweep_csv(const SweepCurve& curve, std::ostream& out);
void write_sweep_csv(const SweepCurve& curve, const std::string& path);

// Per-candidate means, one row per (subject, candidate):
// subject,candidate,mean_score,epoch_count,true_target. Scores keep full
// precision so a sweep recomputed from the file matches the original.
void write_scores_csv(const std::vector<SubjectOutcome>& subjects,
                      std::ostream& out);
std::vector<SubjectOutcome> read_scores_csv(std::istream& in);
std::vector<SubjectOutcome> read_scores_csv_file(const std::string& path);

// Copy of the schedule with unmanipulated "blank" probe events inserted at
// gap midpoints — as many as there are NonTarget events, gaps chosen by the
// seeded generator. Blanks carry the Unknown class so no response is
// synthesized for them.
protocol::StimulusSchedule with_blank_events(
    const protocol::StimulusSchedule& schedule, std::uint64_t seed);

}  // namespace subprobe::probe
