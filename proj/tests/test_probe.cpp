#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "subprobe/errors.hpp"
#include "subprobe/probe.hpp"
#include "subprobe/protocol.hpp"

using namespace subprobe;
using namespace subprobe::probe;

namespace {

// Identity model over one feature: the decision value of a row is the row.
blr::BoostedModel identity_model() {
  blr::BoostedModel model;
  model.feature_dim = 1;
  blr::BoostedRound round;
  round.gamma = 1.0;
  round.learner.w = Eigen::Vector2d(1.0, 0.0);
  model.rounds.push_back(round);
  return model;
}

signal::LabeledDataset scored_dataset(
    const std::vector<std::pair<std::string, double>>& rows) {
  signal::LabeledDataset data;
  data.X.resize(static_cast<Eigen::Index>(rows.size()), 1);
  data.y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.candidate_ids.push_back(rows[i].first);
    data.X(static_cast<Eigen::Index>(i), 0) = rows[i].second;
  }
  return data;
}

CandidateScores fixed_scores(
    const std::vector<std::pair<std::string, double>>& means) {
  CandidateScores scores;
  for (const auto& [id, mean] : means) {
    scores[id] = CandidateStat{mean, 10};
  }
  return scores;
}

}  // namespace

TEST_CASE("candidate scores average decision values per candidate") {
  const auto data = scored_dataset({{"a", 1.0},
                                    {"b", -2.0},
                                    {"a", 3.0},
                                    {"b", 0.0},
                                    {"b", -1.0}});
  const auto scores = candidate_scores(identity_model(), data);
  REQUIRE(scores.size() == 2);
  CHECK(scores.at("a").mean_score == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(scores.at("a").epoch_count == 2);
  CHECK(scores.at("b").mean_score == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(scores.at("b").epoch_count == 3);
}

TEST_CASE("prediction picks the best mean and breaks ties lexicographically") {
  CHECK(predict_target(fixed_scores({{"2", 0.1}, {"5", 0.3}, {"9", -0.2}})) == "5");
  CHECK(predict_target(fixed_scores({{"b", 1.0}, {"a", 1.0}, {"c", 0.5}})) == "a");
  CHECK_THROWS_AS(predict_target(CandidateScores{}), DataError);
}

TEST_CASE("targeted confidence is the margin over the best rival") {
  const auto scores = fixed_scores({{"A", 0.5}, {"B", 0.3}, {"C", -0.1}});
  CHECK(confidence(scores, Mode::targeted("A")) ==
        doctest::Approx(0.2).epsilon(1e-12));
  CHECK(confidence(scores, Mode::targeted("B")) ==
        doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(confidence(scores, Mode::targeted("C")) ==
        doctest::Approx(-0.6).epsilon(1e-12));
  CHECK_THROWS_AS(confidence(scores, Mode::targeted("missing")), DataError);
}

TEST_CASE("agnostic confidence is the top-two gap and never negative") {
  const auto scores = fixed_scores({{"A", 0.5}, {"B", 0.3}, {"C", -0.1}});
  CHECK(confidence(scores, Mode::agnostic()) ==
        doctest::Approx(0.2).epsilon(1e-12));
  // When the probed candidate is the argmax the two modes agree.
  CHECK(confidence(scores, Mode::agnostic()) ==
        doctest::Approx(confidence(scores, Mode::targeted("A"))).epsilon(1e-15));
  const auto tied = fixed_scores({{"A", 1.0}, {"B", 1.0}});
  CHECK(confidence(tied, Mode::agnostic()) == 0.0);
  CHECK_THROWS_AS(confidence(fixed_scores({{"only", 1.0}}), Mode::agnostic()),
                  DataError);
}

TEST_CASE("confidence is invariant to shifting all means") {
  const auto base = fixed_scores({{"A", 0.5}, {"B", 0.3}, {"C", -0.1}});
  auto shifted = base;
  for (auto& [id, stat] : shifted) stat.mean_score += 17.25;
  CHECK(confidence(shifted, Mode::agnostic()) ==
        doctest::Approx(confidence(base, Mode::agnostic())).epsilon(1e-12));
  CHECK(confidence(shifted, Mode::targeted("B")) ==
        doctest::Approx(confidence(base, Mode::targeted("B"))).epsilon(1e-12));
}

TEST_CASE("decisions accept exactly when the margin clears the threshold") {
  const auto scores = fixed_scores({{"A", 0.5}, {"B", 0.3}});

  const auto accept = decide(scores, Mode::agnostic(), 0.1);
  CHECK(accept.accepted());
  CHECK(*accept.accepted_candidate == "A");
  CHECK(accept.confidence == doctest::Approx(0.2));

  const auto boundary = decide(scores, Mode::agnostic(), 0.2);
  CHECK(boundary.accepted());  // inclusive threshold

  const auto reject = decide(scores, Mode::agnostic(), 0.2000001);
  CHECK_FALSE(reject.accepted());
  CHECK_FALSE(reject.accepted_candidate.has_value());
  CHECK(reject.confidence == doctest::Approx(0.2));

  // Negative thresholds can accept a targeted candidate that lost.
  const auto lenient = decide(scores, Mode::targeted("B"), -0.5);
  CHECK(lenient.accepted());
  CHECK(*lenient.accepted_candidate == "B");
  CHECK(lenient.confidence == doctest::Approx(-0.2));
}

TEST_CASE("threshold sweep counts match hand tallies") {
  // Three subjects, agnostic mode:
  //   s0: argmax == truth, margin 0.4
  //   s1: argmax != truth, margin 0.3
  //   s2: argmax == truth, margin 0.1
  std::vector<SubjectOutcome> outcomes(3);
  outcomes[0].scores = fixed_scores({{"t", 0.9}, {"x", 0.5}});
  outcomes[0].true_target = "t";
  outcomes[1].scores = fixed_scores({{"t", 0.2}, {"x", 0.5}});
  outcomes[1].true_target = "t";
  outcomes[2].scores = fixed_scores({{"t", 0.6}, {"x", 0.5}});
  outcomes[2].true_target = "t";

  const auto curve =
      threshold_sweep(outcomes, Mode::agnostic(), {-1.0, 0.0, 0.2, 0.35, 1.0});
  REQUIRE(curve.points.size() == 5);
  CHECK(curve.n_subjects == 3);

  CHECK(curve.points[0].threshold == -1.0);
  CHECK(curve.points[0].accepted_correct == 2);
  CHECK(curve.points[0].accepted_wrong == 1);
  CHECK(curve.points[1].accepted_correct == 2);
  CHECK(curve.points[1].accepted_wrong == 1);
  CHECK(curve.points[2].accepted_correct == 1);  // s2 drops below 0.2? no: 0.1 < 0.2
  CHECK(curve.points[2].accepted_wrong == 1);    // s1 margin 0.3 still in
  CHECK(curve.points[3].accepted_correct == 1);  // only s0
  CHECK(curve.points[3].accepted_wrong == 0);
  CHECK(curve.points[4].accepted_correct == 0);
  CHECK(curve.points[4].accepted_wrong == 0);
}

TEST_CASE("accepted counts never increase with the threshold") {
  std::vector<SubjectOutcome> outcomes;
  for (int i = 0; i < 12; ++i) {
    SubjectOutcome outcome;
    outcome.scores = fixed_scores(
        {{"t", 0.1 * i - 0.4}, {"u", 0.05 * i}, {"v", -0.3}});
    outcome.true_target = i % 2 == 0 ? "t" : "u";
    outcomes.push_back(outcome);
  }
  std::vector<double> grid;
  for (int g = -20; g <= 20; ++g) grid.push_back(0.05 * g);
  const auto curve = threshold_sweep(outcomes, Mode::agnostic(), grid);
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    CHECK(curve.points[i].accepted_correct <= curve.points[i - 1].accepted_correct);
    CHECK(curve.points[i].accepted_wrong <= curve.points[i - 1].accepted_wrong);
  }
}

TEST_CASE("targeted sweeps probe the true target so wrong stays zero") {
  std::vector<SubjectOutcome> outcomes(2);
  outcomes[0].scores = fixed_scores({{"t", 0.9}, {"x", 0.5}});
  outcomes[0].true_target = "t";
  outcomes[1].scores = fixed_scores({{"t", 0.2}, {"x", 0.5}});  // truth loses
  outcomes[1].true_target = "t";
  const auto curve =
      threshold_sweep(outcomes, Mode::targeted("ignored"), {-10.0, 0.0, 10.0});
  for (const auto& point : curve.points) CHECK(point.accepted_wrong == 0);
  CHECK(curve.points[0].accepted_correct == 2);  // -10 admits the negative margin
  CHECK(curve.points[1].accepted_correct == 1);
  CHECK(curve.points[2].accepted_correct == 0);
}

TEST_CASE("sweep validates inputs") {
  CHECK_THROWS_AS(threshold_sweep({}, Mode::agnostic(), {0.0}), DataError);
  std::vector<SubjectOutcome> outcomes(1);
  outcomes[0].scores = fixed_scores({{"a", 1.0}, {"b", 0.0}});
  outcomes[0].true_target = "a";
  CHECK_THROWS_AS(threshold_sweep(outcomes, Mode::agnostic(), {}), DataError);
}

TEST_CASE("default grid is symmetric with an exact zero in the middle") {
  // One subject with agnostic margin 1.7 pins the span.
  std::vector<SubjectOutcome> outcomes(1);
  outcomes[0].scores = fixed_scores({{"a", 1.7}, {"b", 0.0}});
  outcomes[0].true_target = "a";

  const auto grid = default_grid(outcomes, Mode::agnostic());
  REQUIRE(grid.size() == 41);
  CHECK(grid.front() == doctest::Approx(-1.7).epsilon(1e-12));
  CHECK(grid.back() == doctest::Approx(1.7).epsilon(1e-12));
  CHECK(grid[20] == 0.0);  // bitwise zero, not just approximately
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(grid[i] == doctest::Approx(-grid[40 - i]).epsilon(1e-12));
  }
  CHECK(default_grid(outcomes, Mode::agnostic(), 5).size() == 5);
  CHECK_THROWS_AS(default_grid(outcomes, Mode::agnostic(), 1), ConfigError);
}

TEST_CASE("blank events fill schedule gaps at their midpoints") {
  protocol::VideoConfig config;
  const auto video = protocol::build_video_schedule(99, config);
  const auto with_blanks = with_blank_events(video, 12345);

  const auto n_nontarget = static_cast<std::size_t>(
      std::count_if(video.events.begin(), video.events.end(),
                    [](const protocol::StimulusEvent& e) {
                      return e.class_label == protocol::ClassLabel::NonTarget;
                    }));
  std::size_t n_blank = 0;
  for (const auto& event : with_blanks.events) {
    if (event.class_label != protocol::ClassLabel::Unknown) continue;
    ++n_blank;
    CHECK(event.candidate_id == protocol::kBlankCandidate);
    CHECK(event.position == protocol::Position::Center);
    // Blank probes mirror the stimulus duration of the surrounding events.
    CHECK(event.duration_s == doctest::Approx(0.0133));
  }
  CHECK(n_blank == n_nontarget);
  CHECK(n_blank == 135);
  CHECK(with_blanks.events.size() == video.events.size() + n_blank);

  // Chronologically sorted, and every blank sits at the midpoint of a gap
  // between two consecutive real events.
  for (std::size_t i = 1; i < with_blanks.events.size(); ++i) {
    CHECK(with_blanks.events[i].onset_s >= with_blanks.events[i - 1].onset_s);
  }
  for (std::size_t i = 0; i < with_blanks.events.size(); ++i) {
    const auto& event = with_blanks.events[i];
    if (event.class_label != protocol::ClassLabel::Unknown) continue;
    REQUIRE(i > 0);
    REQUIRE(i + 1 < with_blanks.events.size());
    const auto& before = with_blanks.events[i - 1];
    const auto& after = with_blanks.events[i + 1];
    const double expected =
        ((before.onset_s + before.duration_s) + after.onset_s) / 2.0;
    CHECK(event.onset_s == doctest::Approx(expected).epsilon(1e-12));
  }

  // The validator accepts the augmented schedule.
  CHECK(protocol::validate_schedule(with_blanks).empty());
}

TEST_CASE("blank placement is deterministic in the seed") {
  const auto video = protocol::build_video_schedule(7);
  const auto a = with_blank_events(video, 42);
  const auto b = with_blank_events(video, 42);
  const auto c = with_blank_events(video, 43);
  REQUIRE(a.events.size() == b.events.size());
  bool same = true;
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    if (a.events[i].onset_s != b.events[i].onset_s ||
        a.events[i].candidate_id != b.events[i].candidate_id) {
      same = false;
    }
  }
  CHECK(same);
  bool different = a.events.size() != c.events.size();
  for (std::size_t i = 0; !different && i < a.events.size(); ++i) {
    different = a.events[i].onset_s != c.events[i].onset_s;
  }
  CHECK(different);
}

TEST_CASE("blank insertion needs enough gaps") {
  protocol::StimulusSchedule tiny;
  protocol::StimulusEvent event;
  event.onset_s = 1.0;
  event.duration_s = 0.1;
  event.candidate_id = "x";
  event.class_label = protocol::ClassLabel::NonTarget;
  tiny.events.push_back(event);
  tiny.total_duration_s = 2.0;
  // One NonTarget event wants one blank, but a single event has no
  // between-event gap.
  CHECK_THROWS_AS(with_blank_events(tiny, 1), DataError);
}

TEST_CASE("sweep CSV uses the documented four-column layout") {
  SweepCurve curve;
  curve.n_subjects = 12;
  curve.points.push_back({-0.5, 10, 3});
  curve.points.push_back({0.0, 8, 1});
  std::ostringstream out;
  write_sweep_csv(curve, out);
  CHECK(out.str() ==
        "threshold,accepted_correct,accepted_wrong,n_subjects\n"
        "-0.500000000,10,3,12\n"
        "0.000000000,8,1,12\n");
}

TEST_CASE("score tables round-trip through CSV") {
  std::vector<SubjectOutcome> outcomes(2);
  outcomes[0].scores = fixed_scores({{"t", 0.25}, {"x", -1.5}});
  outcomes[0].scores["t"].epoch_count = 45;
  outcomes[0].true_target = "t";
  outcomes[1].scores = fixed_scores({{"t", 1e-9}, {"x", 0.125}});
  outcomes[1].true_target = "x";

  std::ostringstream out;
  write_scores_csv(outcomes, out);
  std::istringstream in(out.str());
  const auto loaded = read_scores_csv(in);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].true_target == "t");
  CHECK(loaded[0].scores.at("t").mean_score == 0.25);
  CHECK(loaded[0].scores.at("t").epoch_count == 45);
  CHECK(loaded[0].scores.at("x").mean_score == -1.5);
  CHECK(loaded[1].scores.at("t").mean_score == 1e-9);
  CHECK(loaded[1].true_target == "x");
}

TEST_CASE("score CSV reader rejects malformed tables") {
  {
    std::istringstream in("wrong,header\n");
    CHECK_THROWS_AS(read_scores_csv(in), IoError);
  }
  {
    std::istringstream in("subject,candidate,mean_score,epoch_count,true_target\n");
    CHECK(read_scores_csv(in).empty());
  }
  {
    std::istringstream in(
        "subject,candidate,mean_score,epoch_count,true_target\n"
        "0,t,not_a_number,3,t\n");
    CHECK_THROWS_AS(read_scores_csv(in), IoError);
  }
  {
    // Conflicting true_target for the same subject.
    std::istringstream in(
        "subject,candidate,mean_score,epoch_count,true_target\n"
        "0,t,0.5,3,t\n"
        "0,x,0.1,3,x\n");
    CHECK_THROWS_AS(read_scores_csv(in), IoError);
  }
}
