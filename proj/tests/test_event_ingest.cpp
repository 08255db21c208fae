#include <gtest/gtest.h>

#include <sstream>

#include "fuma/event_ingest.hpp"
#include "fuma/rng.hpp"
#include "fuma/synth.hpp"

using namespace fuma;

namespace {

EventLog parse(const std::string& text, bool strict = false, const VideoCatalog* cat = nullptr) {
  std::istringstream in(text);
  return parse_event_log(in, strict, cat);
}

}  // namespace

TEST(ParseEventLog, EmptyStream) {
  const auto log = parse("");
  EXPECT_TRUE(log.events.empty());
  EXPECT_EQ(log.report.accepted, 0u);
  EXPECT_EQ(log.report.rejected, 0u);
}

TEST(ParseEventLog, ThreeLinesRoundTripFieldByField) {
  const auto log = parse(
      "s1\tv1\tLOAD\t100\t\t\t\n"
      "s1\tv1\tPLAY\t101.5\t0\t\t\n"
      "s1\tv1\tSTOP\t201.5\t100\t\t\n");
  ASSERT_EQ(log.events.size(), 3u);
  EXPECT_EQ(log.report.accepted, 3u);
  EXPECT_EQ(log.events[0].action, Action::Load);
  EXPECT_FALSE(log.events[0].position);
  EXPECT_EQ(log.events[1].action, Action::Play);
  EXPECT_DOUBLE_EQ(log.events[1].wall_time, 101.5);
  EXPECT_DOUBLE_EQ(*log.events[1].position, 0.0);
  EXPECT_EQ(log.events[2].action, Action::Stop);
  EXPECT_DOUBLE_EQ(*log.events[2].position, 100.0);
  for (const auto& ev : log.events) {
    EXPECT_EQ(ev.student_id, "s1");
    EXPECT_EQ(ev.video_id, "v1");
    EXPECT_FALSE(ev.new_position);
    EXPECT_FALSE(ev.new_speed);
  }
}

TEST(ParseEventLog, NegativeSpeedRejected) {
  const auto log = parse("s1\tv1\tSPEED\t10\t5\t\t-1\n");
  EXPECT_TRUE(log.events.empty());
  EXPECT_EQ(log.report.rejected, 1u);
  EXPECT_EQ(log.report.reasons.at("nonpositive speed"), 1u);
}

TEST(ParseEventLog, StrictAbortsWithLineNumber) {
  try {
    parse("s1\tv1\tPLAY\t1\t0\t\t\nbroken line\n", true);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.reason(), "field count");
  }
}

TEST(ParseEventLog, ContractViolations) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"s\tv\tJUMP\t1\t0\t\t", "unknown action"},
      {"s\tv\tPLAY\tx\t0\t\t", "bad wall time"},
      {"s\tv\tPLAY\t1\t\t\t", "missing position"},
      {"s\tv\tPLAY\t1\t-2\t\t", "negative position"},
      {"s\tv\tSEEK\t1\t2\t\t", "missing new position"},
      {"s\tv\tPLAY\t1\t2\t3\t", "unexpected new position"},
      {"s\tv\tSPEED\t1\t2\t\t", "missing speed"},
      {"s\tv\tPLAY\t1\t2\t\t1.5", "unexpected speed"},
      {"s\tv\tSPEED\t1\t2\t\t0", "nonpositive speed"},
  };
  for (const auto& [line, reason] : cases) {
    const auto log = parse(line + "\n");
    EXPECT_EQ(log.report.rejected, 1u) << line;
    EXPECT_EQ(log.report.reasons.count(reason), 1u) << line << " expected " << reason;
  }
}

TEST(ParseEventLog, GroupedByStudentStableInWallTime) {
  const auto log = parse(
      "b\tv1\tPLAY\t5\t0\t\t\n"
      "a\tv1\tPLAY\t7\t0\t\t\n"
      "a\tv1\tPAUSE\t3\t1\t\t\n"
      "a\tv2\tLOAD\t7\t\t\t\n");
  ASSERT_EQ(log.events.size(), 4u);
  EXPECT_EQ(log.events[0].student_id, "a");
  EXPECT_EQ(log.events[0].wall_time, 3.0);
  // Equal wall times keep input order.
  EXPECT_EQ(log.events[1].action, Action::Play);
  EXPECT_EQ(log.events[2].action, Action::Load);
  EXPECT_EQ(log.events[3].student_id, "b");
}

TEST(ParseEventLog, OrphanEventsDroppedAndPositionsClamped) {
  VideoCatalog cat;
  cat.add("v1", {100.0, 1, "intro"});
  const auto log = parse(
      "s\tv1\tSTOP\t10\t104.2\t\t\n"
      "s\tghost\tPLAY\t11\t0\t\t\n",
      true, &cat);
  ASSERT_EQ(log.events.size(), 1u);
  EXPECT_DOUBLE_EQ(*log.events[0].position, 100.0);
  EXPECT_EQ(log.report.reasons.at("unknown video"), 1u);
}

TEST(ParseEventLog, AcceptedPlusRejectedEqualsLineCount) {
  Rng rng(3);
  std::string text;
  std::size_t lines = 0;
  for (int i = 0; i < 200; ++i, ++lines) {
    if (rng.bernoulli(0.3)) {
      text += "garbage\t" + std::to_string(i) + "\n";
    } else {
      text += "s" + std::to_string(i % 7) + "\tv\tPLAY\t" + std::to_string(rng.uniform(0, 1e6)) + "\t1\t\t\n";
    }
  }
  const auto log = parse(text);
  EXPECT_EQ(log.report.accepted + log.report.rejected, lines);
}

TEST(ParseEventLog, SerializeReparseRoundTrip) {
  auto cfg = default_cohort_config();
  cfg.n_students = 20;
  cfg.seed = 11;
  const auto cohort = generate_cohort(cfg);
  std::ostringstream out;
  write_event_log(out, cohort.events);
  const auto log = parse(out.str(), true);
  EXPECT_EQ(log.events, cohort.events);
  std::ostringstream again;
  write_event_log(again, log.events);
  EXPECT_EQ(again.str(), out.str());
}

TEST(LoadCatalog, ThirtyThreeVideosSixWeeks) {
  std::ostringstream out;
  write_catalog(out, default_catalog());
  std::istringstream in(out.str());
  const auto cat = load_catalog(in);
  EXPECT_EQ(cat.size(), 33u);
  EXPECT_EQ(cat.weeks(), 6);
}

TEST(LoadCatalog, Singleton) {
  std::istringstream in("video_id,duration_s,week,title\nv1,600,1,Welcome, and overview\n");
  const auto cat = load_catalog(in);
  ASSERT_EQ(cat.size(), 1u);
  EXPECT_TRUE(cat.contains("v1"));
  EXPECT_EQ(cat.at("v1").title, "Welcome, and overview");
  EXPECT_DOUBLE_EQ(cat.at("v1").duration, 600.0);
}

TEST(LoadCatalog, Errors) {
  auto reason = [](const std::string& text) {
    std::istringstream in(text);
    try {
      load_catalog(in);
    } catch (const ParseError& e) {
      return e.reason();
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_EQ(reason("video_id,duration_s,week,title\nv1,10,1,a\nv1,20,1,b\n"), "duplicate video id");
  EXPECT_EQ(reason("video_id,duration_s,week,title\nv1,0,1,a\n"), "nonpositive duration");
  EXPECT_EQ(reason("video_id,duration_s,week,title\nv1,10,,a\n"), "missing week");
  EXPECT_EQ(reason("video_id,duration_s,week,title\nv1,10,1,a\nv2,10,3,b\n"), "missing week 2");
}

TEST(Outcomes, RoundTripAndDropoutMonotone) {
  const std::vector<OutcomeRecord> recs = {{"a", 0.85, true, 6}, {"b", 0.3, false, 2}, {"c", 0.0, false, 0}};
  std::ostringstream out;
  write_outcomes(out, recs);
  std::istringstream in(out.str());
  EXPECT_EQ(read_outcomes(in), recs);
  for (const auto& r : recs) {
    const auto d = r.dropped_by_week(6);
    bool dropped = false;
    for (const auto& [w, flag] : d) {
      if (dropped) { EXPECT_TRUE(flag); }
      dropped = flag;
    }
  }
  EXPECT_FALSE(recs[1].dropped_by(1));
  EXPECT_TRUE(recs[1].dropped_by(2));
}

TEST(Outcomes, PassedFlagMustMatchGrade) {
  std::istringstream in("student_id,final_grade,passed,last_active_week\na,0.5,1,3\n");
  EXPECT_THROW(read_outcomes(in), ParseError);
}

TEST(Calendar, SevenDayWeeks) {
  CourseCalendar cal{1000.0};
  EXPECT_EQ(cal.week_of(1000.0), 1);
  EXPECT_EQ(cal.week_of(1000.0 + 7 * 86400 - 0.001), 1);
  EXPECT_EQ(cal.week_of(1000.0 + 7 * 86400), 2);
  EXPECT_DOUBLE_EQ(cal.week_end(2), 1000.0 + 14 * 86400);
}
