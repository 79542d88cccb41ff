#include "subprobe/probe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "subprobe/errors.hpp"
#include "subprobe/rng.hpp"

namespace subprobe::probe {

CandidateScores candidate_scores(const blr::BoostedModel& model,
                                 const signal::LabeledDataset& data) {
  if (data.n_rows() == 0) throw DataError("cannot score an empty dataset");
  const Eigen::VectorXd scores = blr::decision_values(model, data.X);

  CandidateScores result;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    auto& stat = result[data.candidate_ids[static_cast<std::size_t>(i)]];
    stat.mean_score += scores[i];
    stat.epoch_count += 1;
  }
  for (auto& [id, stat] : result) {
    stat.mean_score /= static_cast<double>(stat.epoch_count);
  }
  return result;
}

std::string predict_target(const CandidateScores& scores) {
  if (scores.empty()) throw DataError("no candidates to rank");
  // Map iteration is in id order, and only a strictly greater score replaces
  // the incumbent, so ties resolve to the smallest id.
  auto best = scores.begin();
  for (auto it = std::next(scores.begin()); it != scores.end(); ++it) {
    if (it->second.mean_score > best->second.mean_score) best = it;
  }
  return best->first;
}

double confidence(const CandidateScores& scores, const Mode& mode) {
  if (scores.size() < 2) {
    throw DataError("confidence needs at least two candidates");
  }
  if (mode.is_targeted()) {
    const auto target = scores.find(*mode.target_id);
    if (target == scores.end()) {
      throw DataError("target candidate '" + *mode.target_id +
                      "' has no scored epochs");
    }
    double best_other = -std::numeric_limits<double>::infinity();
    for (const auto& [id, stat] : scores) {
      if (id != target->first) best_other = std::max(best_other, stat.mean_score);
    }
    return target->second.mean_score - best_other;
  }

  double best = -std::numeric_limits<double>::infinity();
  double second = -std::numeric_limits<double>::infinity();
  for (const auto& [id, stat] : scores) {
    if (stat.mean_score > best) {
      second = best;
      best = stat.mean_score;
    } else if (stat.mean_score > second) {
      second = stat.mean_score;
    }
  }
  return best - second;
}

Decision decide(const CandidateScores& scores, const Mode& mode,
                double threshold) {
  const double margin = confidence(scores, mode);
  Decision decision;
  decision.confidence = margin;
  if (margin >= threshold) {
    decision.accepted_candidate =
        mode.is_targeted() ? *mode.target_id : predict_target(scores);
  }
  return decision;
}

SweepCurve threshold_sweep(const std::vector<SubjectOutcome>& subjects,
                           const Mode& mode, const std::vector<double>& grid) {
  if (subjects.empty()) throw DataError("threshold sweep over zero subjects");
  if (grid.empty()) throw DataError("threshold sweep over an empty grid");

  SweepCurve curve;
  curve.n_subjects = static_cast<long>(subjects.size());
  curve.points.reserve(grid.size());
  for (const double threshold : grid) {
    SweepPoint point;
    point.threshold = threshold;
    for (const auto& subject : subjects) {
      const Mode subject_mode =
          mode.is_targeted() ? Mode::targeted(subject.true_target) : mode;
      const Decision decision = decide(subject.scores, subject_mode, threshold);
      if (!decision.accepted()) continue;
      if (*decision.accepted_candidate == subject.true_target) {
        ++point.accepted_correct;
      } else {
        ++point.accepted_wrong;
      }
    }
    curve.points.push_back(point);
  }
  return curve;
}

std::vector<double> default_grid(const std::vector<SubjectOutcome>& subjects,
                                 const Mode& mode, int points) {
  if (points < 2) throw ConfigError("threshold grid needs at least 2 points");
  double span = 0.0;
  for (const auto& subject : subjects) {
    const Mode subject_mode =
        mode.is_targeted() ? Mode::targeted(subject.true_target) : mode;
    span = std::max(span, std::abs(confidence(subject.scores, subject_mode)));
  }
  std::vector<double> grid(static_cast<std::size_t>(points));
  const int last = points - 1;
  for (int i = 0; i < points; ++i) {
    // (2i - last) / last runs -1..1 and hits exactly 0 at the middle of an
    // odd-length grid.
    grid[static_cast<std::size_t>(i)] =
        span * (static_cast<double>(2 * i - last) / static_cast<double>(last));
  }
  return grid;
}

void write_sweep_csv(const SweepCurve& curve, std::ostream& out) {
  out << "threshold,accepted_correct,accepted_wrong,n_subjects\n";
  char buffer[64];
  for (const auto& point : curve.points) {
    std::snprintf(buffer, sizeof(buffer), "%.9f", point.threshold);
    out << buffer << ',' << point.accepted_correct << ',' << point.accepted_wrong
        << ',' << curve.n_subjects << '\n';
  }
}

void write_sweep_csv(const SweepCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_sweep_csv(curve, out);
  if (!out) throw IoError("failed writing sweep to '" + path + "'");
}

void write_scores_csv(const std::vector<SubjectOutcome>& subjects,
                      std::ostream& out) {
  out << "subject,candidate,mean_score,epoch_count,true_target\n";
  char buffer[64];
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    for (const auto& [id, stat] : subjects[i].scores) {
      std::snprintf(buffer, sizeof(buffer), "%.17e", stat.mean_score);
      out << i << ',' << id << ',' << buffer << ',' << stat.epoch_count << ','
          << subjects[i].true_target << '\n';
    }
  }
}

std::vector<SubjectOutcome> read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty scores file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "subject,candidate,mean_score,epoch_count,true_target") {
    throw IoError("unexpected scores CSV header: '" + line + "'");
  }

  std::vector<SubjectOutcome> subjects;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::array<std::string, 5> fields;
    std::size_t start = 0;
    for (std::size_t f = 0; f < 5; ++f) {
      const std::size_t comma = line.find(',', start);
      if ((comma == std::string::npos) != (f == 4)) {
        throw IoError("scores CSV line " + std::to_string(line_no) +
                      ": expected 5 fields");
      }
      fields[f] = line.substr(start, comma - start);
      start = comma + 1;
    }

    std::size_t subject = 0;
    CandidateStat stat;
    try {
      subject = std::stoul(fields[0]);
      stat.mean_score = std::stod(fields[2]);
      stat.epoch_count = std::stol(fields[3]);
    } catch (const std::exception&) {
      throw IoError("scores CSV line " + std::to_string(line_no) +
                    ": unparsable numeric field");
    }
    if (subject >= subjects.size()) subjects.resize(subject + 1);
    subjects[subject].scores[fields[1]] = stat;
    if (!subjects[subject].true_target.empty() &&
        subjects[subject].true_target != fields[4]) {
      throw IoError("scores CSV line " + std::to_string(line_no) +
                    ": conflicting true_target for subject " + fields[0]);
    }
    subjects[subject].true_target = fields[4];
  }
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].scores.empty()) {
      throw IoError("scores CSV has no rows for subject " + std::to_string(i));
    }
  }
  return subjects;
}

std::vector<SubjectOutcome> read_scores_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scores file '" + path + "'");
  return read_scores_csv(in);
}

protocol::StimulusSchedule with_blank_events(
    const protocol::StimulusSchedule& schedule, std::uint64_t seed) {
  const auto& events = schedule.events;
  long wanted = static_cast<long>(
      std::count_if(events.begin(), events.end(), [](const auto& e) {
        return e.class_label == protocol::ClassLabel::NonTarget;
      }));
  const auto n_gaps =
      events.size() >= 2 ? static_cast<long>(events.size()) - 1 : 0;
  if (wanted > n_gaps) {
    throw DataError("schedule has " + std::to_string(n_gaps) +
                    " gaps but needs " + std::to_string(wanted) +
                    " blank probes");
  }

  std::vector<long> gaps(static_cast<std::size_t>(n_gaps));
  std::iota(gaps.begin(), gaps.end(), 0L);
  rng::Prng gen(rng::derive_seed(seed, rng::Stream::Blank));
  gen.shuffle(gaps);
  gaps.resize(static_cast<std::size_t>(wanted));
  std::sort(gaps.begin(), gaps.end());

  protocol::StimulusSchedule out = schedule;
  for (const long g : gaps) {
    const auto& before = events[static_cast<std::size_t>(g)];
    const auto& after = events[static_cast<std::size_t>(g) + 1];
    protocol::StimulusEvent blank;
    blank.onset_s = 0.5 * (before.end_s() + after.onset_s);
    blank.duration_s = before.duration_s;
    blank.candidate_id = protocol::kBlankCandidate;
    blank.class_label = protocol::ClassLabel::Unknown;
    blank.position = protocol::Position::Center;
    out.events.push_back(std::move(blank));
  }
  std::sort(out.events.begin(), out.events.end(),
            [](const auto& a, const auto& b) { return a.onset_s < b.onset_s; });
  return out;
}

}  // namespace subprobe::probe
