#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fuma/error.hpp"

namespace fuma {

enum class Action { Load, Play, Pause, Seek, SpeedChange, Stop };

inline constexpr std::string_view action_code(Action a) noexcept {
  switch (a) {
    case Action::Load: return "LOAD";
    case Action::Play: return "PLAY";
    case Action::Pause: return "PAUSE";
    case Action::Seek: return "SEEK";
    case Action::SpeedChange: return "SPEED";
    case Action::Stop: return "STOP";
  }
  return "?";
}

inline std::optional<Action> parse_action(std::string_view code) noexcept {
  for (Action a : {Action::Load, Action::Play, Action::Pause, Action::Seek, Action::SpeedChange,
                   Action::Stop}) {
    if (action_code(a) == code) return a;
  }
  return std::nullopt;
}

/// One clickstream record from the video player.
struct VideoEvent {
  std::string student_id;
  std::string video_id;
  Action action = Action::Load;
  double wall_time = 0.0;              // UTC epoch seconds
  std::optional<double> position;      // seconds into the video
  std::optional<double> new_position;  // seek target, Seek only
  std::optional<double> new_speed;     // playback rate, SpeedChange only

  friend bool operator==(const VideoEvent&, const VideoEvent&) = default;
};

struct VideoInfo {
  double duration = 0.0;
  int week = 0;
  std::string title;
};

/// Course video catalog. Weeks are numbered 1..weeks().
class VideoCatalog {
 public:
  const std::map<std::string, VideoInfo>& entries() const noexcept { return entries_; }
  int weeks() const noexcept { return weeks_; }
  std::size_t size() const noexcept { return entries_.size(); }

  bool contains(const std::string& id) const { return entries_.count(id) != 0; }
  const VideoInfo& at(const std::string& id) const { return entries_.at(id); }

  std::vector<std::string> videos_in_week(int week) const {
    std::vector<std::string> out;
    for (const auto& [id, info] : entries_) {
      if (info.week == week) out.push_back(id);
    }
    return out;
  }

  /// Validating insert; throws on duplicate id or nonpositive duration.
  void add(std::string id, VideoInfo info) {
    if (!(info.duration > 0.0) || !std::isfinite(info.duration)) {
      throw InvalidArgument("nonpositive duration for video " + id);
    }
    if (info.week < 1) throw InvalidArgument("missing week for video " + id);
    if (entries_.count(id)) throw InvalidArgument("duplicate video id " + id);
    weeks_ = std::max(weeks_, info.week);
    entries_.emplace(std::move(id), std::move(info));
  }

  /// Every week 1..weeks() must hold at least one video.
  void validate() const {
    if (entries_.empty()) throw InvalidArgument("empty catalog");
    std::set<int> seen;
    for (const auto& [id, info] : entries_) seen.insert(info.week);
    for (int w = 1; w <= weeks_; ++w) {
      if (!seen.count(w)) throw InvalidArgument("missing week " + std::to_string(w));
    }
  }

 private:
  std::map<std::string, VideoInfo> entries_;
  int weeks_ = 0;
};

/// Maps wall time to 7-day course weeks starting at course_start.
struct CourseCalendar {
  static constexpr double kWeekSeconds = 7.0 * 24.0 * 3600.0;
  double course_start = 1404172800.0;  // 2014-07-01T00:00:00Z

  /// 1-based week containing t; events before the start fall into week 1.
  int week_of(double t) const {
    const double w = std::floor((t - course_start) / kWeekSeconds);
    return std::max(1, static_cast<int>(w) + 1);
  }
  double week_end(int week) const { return course_start + kWeekSeconds * week; }
};

struct OutcomeRecord {
  std::string student_id;
  double final_grade = 0.0;
  bool passed = false;
  int last_active_week = 0;

  /// Dropped by week w: no activity in any week after w.
  bool dropped_by(int week) const noexcept { return last_active_week <= week; }

  std::map<int, bool> dropped_by_week(int weeks) const {
    std::map<int, bool> out;
    for (int w = 1; w <= weeks; ++w) out[w] = dropped_by(w);
    return out;
  }

  friend bool operator==(const OutcomeRecord&, const OutcomeRecord&) = default;
};

struct ParseReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> reasons;
  std::vector<std::pair<std::size_t, std::string>> first_rejections;  // (line, reason), capped

  void reject(std::size_t line, const std::string& reason) {
    ++rejected;
    ++reasons[reason];
    if (first_rejections.size() < 50) first_rejections.emplace_back(line, reason);
  }
};

struct EventLog {
  std::vector<VideoEvent> events;  // grouped by student_id, wall_time order within student
  ParseReport report;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Returns an empty string when the line is a valid event, else the reject reason.
inline std::string parse_event_line(std::string_view line, VideoEvent& ev) {
  const auto fields = split(line, '\t');
  if (fields.size() != 7) return "field count";
  if (fields[0].empty()) return "empty student id";
  if (fields[1].empty()) return "empty video id";
  const auto action = parse_action(fields[2]);
  if (!action) return "unknown action";
  const auto wall = parse_double(fields[3]);
  if (!wall) return "bad wall time";

  auto optional_number = [](std::string_view f, std::optional<double>& out) {
    if (f.empty()) {
      out.reset();
      return true;
    }
    out = parse_double(f);
    return out.has_value();
  };
  ev.student_id = std::string(fields[0]);
  ev.video_id = std::string(fields[1]);
  ev.action = *action;
  ev.wall_time = *wall;
  if (!optional_number(fields[4], ev.position)) return "bad position";
  if (!optional_number(fields[5], ev.new_position)) return "bad new position";
  if (!optional_number(fields[6], ev.new_speed)) return "bad speed";

  if (ev.action != Action::Load && !ev.position) return "missing position";
  if (ev.position && *ev.position < 0.0) return "negative position";
  if (ev.action == Action::Seek) {
    if (!ev.new_position) return "missing new position";
    if (*ev.new_position < 0.0) return "negative new position";
  } else if (ev.new_position) {
    return "unexpected new position";
  }
  if (ev.action == Action::SpeedChange) {
    if (!ev.new_speed) return "missing speed";
    if (*ev.new_speed <= 0.0) return "nonpositive speed";
  } else if (ev.new_speed) {
    return "unexpected speed";
  }
  return {};
}

}  // namespace detail

/// Stable-sorts events by (student_id, wall_time); input order breaks ties.
inline void sort_events(std::vector<VideoEvent>& events) {
  std::stable_sort(events.begin(), events.end(), [](const VideoEvent& a, const VideoEvent& b) {
    if (a.student_id != b.student_id) return a.student_id < b.student_id;
    return a.wall_time < b.wall_time;
  });
}

/// Parses a tab-separated event log. With a catalog, events on unknown videos
/// are dropped (counted as rejected with reason "unknown video", never fatal)
/// and positions past the video end are clamped to its duration.
inline EventLog parse_event_log(std::istream& in, bool strict,
                                const VideoCatalog* catalog = nullptr) {
  EventLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    VideoEvent ev;
    const std::string reason = detail::parse_event_line(detail::strip_cr(line), ev);
    if (!reason.empty()) {
      if (strict) throw ParseError(line_no, reason);
      log.report.reject(line_no, reason);
      continue;
    }
    if (catalog) {
      const auto it = catalog->entries().find(ev.video_id);
      if (it == catalog->entries().end()) {
        log.report.reject(line_no, "unknown video");
        continue;
      }
      const double duration = it->second.duration;
      if (ev.position) ev.position = std::min(*ev.position, duration);
      if (ev.new_position) ev.new_position = std::min(*ev.new_position, duration);
    }
    ++log.report.accepted;
    log.events.push_back(std::move(ev));
  }
  sort_events(log.events);
  return log;
}

inline std::string format_event(const VideoEvent& ev) {
  auto opt = [](const std::optional<double>& v) {
    return v ? detail::format_double(*v) : std::string();
  };
  std::string out;
  out += ev.student_id;
  out += '\t';
  out += ev.video_id;
  out += '\t';
  out += action_code(ev.action);
  out += '\t';
  out += detail::format_double(ev.wall_time);
  out += '\t';
  out += opt(ev.position);
  out += '\t';
  out += opt(ev.new_position);
  out += '\t';
  out += opt(ev.new_speed);
  return out;
}

inline void write_event_log(std::ostream& out, const std::vector<VideoEvent>& events) {
  for (const auto& ev : events) out << format_event(ev) << '\n';
}

/// Per-student slices of a sorted event vector.
inline std::map<std::string, std::vector<VideoEvent>> group_by_student(
    const std::vector<VideoEvent>& events) {
  std::map<std::string, std::vector<VideoEvent>> out;
  for (const auto& ev : events) out[ev.student_id].push_back(ev);
  for (auto& [id, evs] : out) {
    std::stable_sort(evs.begin(), evs.end(),
                     [](const VideoEvent& a, const VideoEvent& b) { return a.wall_time < b.wall_time; });
  }
  return out;
}

/// Reads `video_id,duration_s,week,title`. The title is everything after the
/// third comma so it may itself contain commas.
inline VideoCatalog load_catalog(std::istream& in) {
  VideoCatalog catalog;
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::strip_cr(line);
    if (header) {
      header = false;
      if (text.rfind("video_id,duration_s,week", 0) != 0) throw ParseError(line_no, "bad catalog header");
      continue;
    }
    if (text.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = text;
    for (int i = 0; i < 3; ++i) {
      const auto pos = rest.find(',');
      if (pos == std::string_view::npos) {
        fields.push_back(rest);
        rest = {};
        break;
      }
      fields.push_back(rest.substr(0, pos));
      rest = rest.substr(pos + 1);
    }
    if (fields.size() < 3) throw ParseError(line_no, "missing week");
    const auto duration = detail::parse_double(fields[1]);
    if (!duration || *duration <= 0.0) throw ParseError(line_no, "nonpositive duration");
    const auto week = detail::parse_int(fields[2]);
    if (!week || *week < 1) throw ParseError(line_no, "missing week");
    if (fields[0].empty()) throw ParseError(line_no, "empty video id");
    if (catalog.contains(std::string(fields[0]))) throw ParseError(line_no, "duplicate video id");
    catalog.add(std::string(fields[0]), VideoInfo{*duration, static_cast<int>(*week), std::string(rest)});
  }
  catalog.validate();
  return catalog;
}

inline void write_catalog(std::ostream& out, const VideoCatalog& catalog) {
  out << "video_id,duration_s,week,title\n";
  for (const auto& [id, info] : catalog.entries()) {
    out << id << ',' << detail::format_double(info.duration) << ',' << info.week << ',' << info.title
        << '\n';
  }
}

/// Reads `student_id,final_grade,passed,last_active_week`.
inline std::vector<OutcomeRecord> read_outcomes(std::istream& in, double pass_threshold = 0.8) {
  std::vector<OutcomeRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::strip_cr(line);
    if (line_no == 1) {
      if (text.rfind("student_id,final_grade", 0) != 0) throw ParseError(line_no, "bad outcomes header");
      continue;
    }
    if (text.empty()) continue;
    const auto f = detail::split(text, ',');
    if (f.size() != 4) throw ParseError(line_no, "field count");
    OutcomeRecord r;
    r.student_id = std::string(f[0]);
    const auto grade = detail::parse_double(f[1]);
    if (!grade || *grade < 0.0 || *grade > 1.0) throw ParseError(line_no, "grade outside [0,1]");
    r.final_grade = *grade;
    if (f[2] == "1" || f[2] == "true") {
      r.passed = true;
    } else if (f[2] == "0" || f[2] == "false") {
      r.passed = false;
    } else {
      throw ParseError(line_no, "bad passed flag");
    }
    if (r.passed != (r.final_grade >= pass_threshold)) throw ParseError(line_no, "passed flag inconsistent with grade");
    const auto week = detail::parse_int(f[3]);
    if (!week || *week < 0) throw ParseError(line_no, "bad last_active_week");
    r.last_active_week = static_cast<int>(*week);
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_outcomes(std::ostream& out, const std::vector<OutcomeRecord>& records) {
  out << "student_id,final_grade,passed,last_active_week\n";
  for (const auto& r : records) {
    out << r.student_id << ',' << detail::format_double(r.final_grade) << ',' << (r.passed ? 1 : 0)
        << ',' << r.last_active_week << '\n';
  }
}

}  // namespace fuma
