#include "subprobe/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "subprobe/errors.hpp"
#include "subprobe/rng.hpp"

namespace subprobe::protocol {

namespace {

constexpr int kRepeatsPerDigit = 16;
constexpr int kCountedMin = 14;
constexpr int kCountedMax = 18;
constexpr int kTargetCadence = 4;  // every 4th video stimulus is the target

const Position kContrastCorners[3] = {Position::TopLeft, Position::BottomLeft,
                                      Position::BottomRight};

std::string format_seconds(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9f", value);
  return buffer;
}

}  // namespace

const char* to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::Target: return "Target";
    case ClassLabel::NonTarget: return "NonTarget";
    case ClassLabel::Unknown: return "Unknown";
  }
  return "Unknown";
}

const char* to_string(Position position) {
  switch (position) {
    case Position::TopLeft: return "TopLeft";
    case Position::TopRight: return "TopRight";
    case Position::BottomLeft: return "BottomLeft";
    case Position::BottomRight: return "BottomRight";
    case Position::Center: return "Center";
  }
  return "Center";
}

ClassLabel class_label_from_string(const std::string& text) {
  if (text == "Target") return ClassLabel::Target;
  if (text == "NonTarget") return ClassLabel::NonTarget;
  if (text == "Unknown") return ClassLabel::Unknown;
  throw IoError("unknown class label '" + text + "'");
}

Position position_from_string(const std::string& text) {
  if (text == "TopLeft") return Position::TopLeft;
  if (text == "TopRight") return Position::TopRight;
  if (text == "BottomLeft") return Position::BottomLeft;
  if (text == "BottomRight") return Position::BottomRight;
  if (text == "Center") return Position::Center;
  throw IoError("unknown position '" + text + "'");
}

StimulusSchedule build_counting_schedule(std::uint64_t seed,
                                         const CountingConfig& config) {
  const auto [isi_lo, isi_hi] = config.isi_range_s;
  if (!(config.stim_duration_s > 0.0)) {
    throw ConfigError("counting stimulus duration must be > 0");
  }
  if (!(isi_lo >= 0.0) || !(isi_lo <= isi_hi)) {
    throw ConfigError("invalid inter-stimulus interval [" +
                      std::to_string(isi_lo) + ", " + std::to_string(isi_hi) + "]");
  }

  rng::Prng gen(rng::derive_seed(seed, rng::Stream::Schedule));

  // Draw order is fixed: counted-digit repeat count, then the permutation,
  // then one pause per flash.
  const auto counted_repeats = gen.uniform_int(kCountedMin, kCountedMax);

  std::vector<std::string> bag;
  for (int digit = 0; digit <= 10; ++digit) {
    const std::string id = std::to_string(digit);
    const int repeats =
        (id == kCountedCandidate) ? static_cast<int>(counted_repeats) : kRepeatsPerDigit;
    for (int r = 0; r < repeats; ++r) bag.push_back(id);
  }
  gen.shuffle(bag);

  StimulusSchedule schedule;
  schedule.kind = SessionKind::Counting;
  schedule.events.reserve(bag.size());

  double clock = 0.0;
  for (const auto& candidate : bag) {
    clock += gen.uniform(isi_lo, isi_hi);
    StimulusEvent event;
    event.onset_s = clock;
    event.duration_s = config.stim_duration_s;
    event.candidate_id = candidate;
    event.class_label = (candidate == kCountedCandidate) ? ClassLabel::Target
                                                         : ClassLabel::NonTarget;
    event.position = Position::Center;
    clock += config.stim_duration_s;
    schedule.events.push_back(std::move(event));
  }
  schedule.total_duration_s = clock;
  return schedule;
}

StimulusSchedule build_video_schedule(std::uint64_t /*seed*/,
                                      const VideoConfig& config) {
  if (!(config.period_s > 0.0)) {
    throw ConfigError("video period must be > 0");
  }
  if (!(config.stim_duration_s > 0.0)) {
    throw ConfigError("video stimulus duration must be > 0");
  }
  if (config.duration_s < config.period_s) {
    throw ConfigError("video duration shorter than one stimulus period");
  }

  const auto count = static_cast<long>(
      std::floor(config.duration_s / config.period_s + 1e-9));

  StimulusSchedule schedule;
  schedule.kind = SessionKind::Video;
  schedule.events.reserve(static_cast<std::size_t>(count));

  long contrast_seen = 0;
  for (long k = 1; k <= count; ++k) {
    StimulusEvent event;
    event.onset_s = static_cast<double>(k) * config.period_s;
    event.duration_s = config.stim_duration_s;
    if (k % kTargetCadence == 0) {
      event.candidate_id = kVideoTargetCandidate;
      event.class_label = ClassLabel::Target;
      event.position = Position::TopRight;
    } else {
      event.candidate_id = kVideoContrastCandidate;
      event.class_label = ClassLabel::NonTarget;
      event.position = kContrastCorners[contrast_seen % 3];
      ++contrast_seen;
    }
    schedule.events.push_back(std::move(event));
  }

  schedule.total_duration_s =
      std::max(config.duration_s, schedule.events.back().end_s());
  return schedule;
}

ValidationReport validate_schedule(const StimulusSchedule& schedule) {
  ValidationReport report;
  const auto add = [&report](ViolationKind kind, std::size_t index,
                             std::string message) {
    report.push_back({kind, index, std::move(message)});
  };

  for (std::size_t i = 0; i < schedule.events.size(); ++i) {
    const auto& event = schedule.events[i];
    if (event.onset_s < 0.0) {
      add(ViolationKind::NegativeOnset, i,
          "event " + std::to_string(i) + " has negative onset");
    }
    if (!(event.duration_s > 0.0)) {
      add(ViolationKind::NonPositiveDuration, i,
          "event " + std::to_string(i) + " has non-positive duration");
    }
    if (i > 0) {
      const auto& prev = schedule.events[i - 1];
      if (event.onset_s < prev.onset_s) {
        add(ViolationKind::OutOfOrder, i,
            "event " + std::to_string(i) + " onset precedes event " +
                std::to_string(i - 1));
      } else if (event.onset_s < prev.end_s()) {
        add(ViolationKind::Overlap, i,
            "event " + std::to_string(i) + " overlaps event " +
                std::to_string(i - 1));
      }
    }
    if (event.end_s() > schedule.total_duration_s) {
      add(ViolationKind::BeyondTotalDuration, i,
          "event " + std::to_string(i) + " extends beyond total duration");
    }

    if (event.class_label != ClassLabel::Unknown) {
      bool allowed = true;
      if (schedule.kind == SessionKind::Counting) {
        int digit = -1;
        try {
          std::size_t used = 0;
          digit = std::stoi(event.candidate_id, &used);
          if (used != event.candidate_id.size()) digit = -1;
        } catch (const std::exception&) {
          digit = -1;
        }
        allowed = digit >= 0 && digit <= 10;
      } else {
        allowed = event.candidate_id == kVideoTargetCandidate ||
                  event.candidate_id == kVideoContrastCandidate;
      }
      if (!allowed) {
        add(ViolationKind::ForeignCandidate, i,
            "event " + std::to_string(i) + " candidate '" + event.candidate_id +
                "' not allowed in this session kind");
      }
    }
  }
  return report;
}

void write_schedule_csv(const StimulusSchedule& schedule, std::ostream& out) {
  out << "onset_s,duration_s,candidate_id,class_label,position\n";
  for (const auto& event : schedule.events) {
    if (event.candidate_id.find_first_of(",\n\r") != std::string::npos) {
      throw IoError("candidate id '" + event.candidate_id +
                    "' contains CSV delimiter characters");
    }
    out << format_seconds(event.onset_s) << ',' << format_seconds(event.duration_s)
        << ',' << event.candidate_id << ',' << to_string(event.class_label) << ','
        << to_string(event.position) << '\n';
  }
}

void write_schedule_csv(const StimulusSchedule& schedule, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_schedule_csv(schedule, out);
  if (!out) throw IoError("failed writing schedule to '" + path + "'");
}

StimulusSchedule read_schedule_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty schedule file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "onset_s,duration_s,candidate_id,class_label,position") {
    throw IoError("unexpected schedule CSV header: '" + line + "'");
  }

  StimulusSchedule schedule;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 5) {
      throw IoError("schedule CSV line " + std::to_string(line_no) +
                    ": expected 5 fields, got " + std::to_string(fields.size()));
    }

    StimulusEvent event;
    try {
      event.onset_s = std::stod(fields[0]);
      event.duration_s = std::stod(fields[1]);
    } catch (const std::exception&) {
      throw IoError("schedule CSV line " + std::to_string(line_no) +
                    ": unparsable time field");
    }
    event.candidate_id = fields[2];
    event.class_label = class_label_from_string(fields[3]);
    event.position = position_from_string(fields[4]);
    schedule.events.push_back(std::move(event));
  }

  // The CSV carries no session metadata; kind is recovered from the candidate
  // vocabulary and the total duration from the last event.
  const bool video_vocabulary = std::all_of(
      schedule.events.begin(), schedule.events.end(), [](const StimulusEvent& e) {
        return e.candidate_id == kVideoTargetCandidate ||
               e.candidate_id == kVideoContrastCandidate ||
               e.candidate_id == kBlankCandidate;
      });
  schedule.kind = (video_vocabulary && !schedule.events.empty())
                      ? SessionKind::Video
                      : SessionKind::Counting;
  schedule.total_duration_s =
      schedule.events.empty() ? 0.0 : schedule.events.back().end_s();
  return schedule;
}

StimulusSchedule read_schedule_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open schedule file '" + path + "'");
  return read_schedule_csv(in);
}

}  // namespace subprobe::protocol
