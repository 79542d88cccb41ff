#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace subprobe::protocol {

enum class ClassLabel { Target, NonTarget, Unknown };
enum class Position { TopLeft, TopRight, BottomLeft, BottomRight, Center };
enum class SessionKind { Counting, Video };

const char* to_string(ClassLabel label);
const char* to_string(Position position);
ClassLabel class_label_from_string(const std::string& text);
Position position_from_string(const std::string& text);

struct StimulusEvent {
  double onset_s = 0.0;
  double duration_s = 0.0;
  std::string candidate_id;
  ClassLabel class_label = ClassLabel::Unknown;
  Position position = Position::Center;

  double end_s() const { return onset_s + duration_s; }
};

struct StimulusSchedule {
  SessionKind kind = SessionKind::Counting;
  std::vector<StimulusEvent> events;
  double total_duration_s = 0.0;
};

// Candidate ids used by the two session kinds. The counting session flashes
// the digits "0".."10" and the subject counts occurrences of "1"; the video
// session interleaves the probed "target" image with a scrambled "contrast"
// image. "blank" marks sampled no-stimulus windows (see probe).
inline constexpr const char* kCountedCandidate = "1";
inline constexpr const char* kVideoTargetCandidate = "target";
inline constexpr const char* kVideoContrastCandidate = "contrast";
inline constexpr const char* kBlankCandidate = "blank";

struct CountingConfig {
  double stim_duration_s = 0.25;
  std::pair<double, double> isi_range_s{0.25, 0.375};
};

struct VideoConfig {
  double duration_s = 900.0;
  double period_s = 5.0;
  double stim_duration_s = 0.0133;
};

// Randomly permuted digit sequence: every digit except the counted one
// appears exactly 16 times, the counted digit 14..18 times, with a uniform
// inter-stimulus pause before each flash. Deterministic per seed.
StimulusSchedule build_counting_schedule(std::uint64_t seed,
                                         const CountingConfig& config = {});

// One stimulus per period; every 4th (1-based) is the target at the top-right
// corner, the rest are the contrast image cycling over the other three
// corners. The layout is fixed, so the seed does not influence the output;
// it is kept for interface symmetry with the counting generator.
StimulusSchedule build_video_schedule(std::uint64_t seed,
                                      const VideoConfig& config = {});

enum class ViolationKind {
  NegativeOnset,
  NonPositiveDuration,
  OutOfOrder,
  Overlap,
  BeyondTotalDuration,
  ForeignCandidate,
};

struct Violation {
  ViolationKind kind;
  std::size_t event_index;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

// Empty report iff all schedule invariants hold. Unknown-class events (blank
// markers) are exempt from the per-kind candidate id restriction.
ValidationReport validate_schedule(const StimulusSchedule& schedule);

// CSV with header onset_s,duration_s,candidate_id,class_label,position;
// decimal seconds with 9 fractional digits, UTF-8, LF line endings.
void write_schedule_csv(const StimulusSchedule& schedule, std::ostream& out);
void write_schedule_csv(const StimulusSchedule& schedule, const std::string& path);
StimulusSchedule read_schedule_csv(std::istream& in);
StimulusSchedule read_schedule_csv_file(const std::string& path);

}  // namespace subprobe::protocol
