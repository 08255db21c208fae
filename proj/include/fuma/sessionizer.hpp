#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fuma/error.hpp"
#include "fuma/event_ingest.hpp"

namespace fuma {

/// Half-open in-video interval [start, end), seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;
  double length() const noexcept { return end - start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Clamps to [0, duration], drops empty pieces, sorts and merges overlapping
/// or touching intervals.
inline std::vector<Interval> merge_intervals(std::vector<Interval> intervals, double duration) {
  std::vector<Interval> clipped;
  clipped.reserve(intervals.size());
  for (auto iv : intervals) {
    iv.start = std::clamp(iv.start, 0.0, duration);
    iv.end = std::clamp(iv.end, 0.0, duration);
    if (iv.end > iv.start) clipped.push_back(iv);
  }
  std::sort(clipped.begin(), clipped.end(),
            [](const Interval& a, const Interval& b) { return a.start < b.start || (a.start == b.start && a.end < b.end); });
  std::vector<Interval> merged;
  for (const auto& iv : clipped) {
    if (!merged.empty() && iv.start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, iv.end);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

inline double coverage_fraction(std::span<const Interval> covered, double duration) {
  if (!(duration > 0.0)) throw InvalidArgument("coverage_fraction: duration must be positive");
  const auto merged = merge_intervals({covered.begin(), covered.end()}, duration);
  double total = 0.0;
  for (const auto& iv : merged) total += iv.length();
  return std::clamp(total / duration, 0.0, 1.0);
}

inline bool interval_contains(std::span<const Interval> merged, double pos) {
  return std::any_of(merged.begin(), merged.end(),
                     [pos](const Interval& iv) { return pos >= iv.start && pos < iv.end; });
}

struct WatchSession {
  double start_wall = 0.0;
  double end_wall = 0.0;
  std::vector<double> pauses;  // wall seconds
  std::vector<double> seeks;   // signed in-video seconds, backward negative
  double speedup_time = 0.0;   // wall seconds playing at rate > 1
  std::array<std::size_t, 6> action_counts{};  // indexed by Action
  double coverage_at_end = 0.0;                // cumulative, for the video

  std::size_t count(Action a) const { return action_counts[static_cast<std::size_t>(a)]; }
};

struct WatchRecord {
  std::string student_id;
  std::string video_id;
  std::vector<WatchSession> sessions;
  std::vector<Interval> covered;  // disjoint, sorted, within [0, duration]
  double coverage_fraction = 0.0;
  int rewatch_count = 0;
  bool watched = false;  // at least one Play
  bool interrupted = false;
  bool completed_ever = false;

  double speedup_time() const {
    double s = 0.0;
    for (const auto& sess : sessions) s += sess.speedup_time;
    return s;
  }
};

struct SessionizerParams {
  double session_gap = 1800.0;
  double completion_threshold = 0.95;
  double rewatch_threshold = 0.5;
  CourseCalendar calendar;
};

namespace detail {

class StudentTimeline {
 public:
  StudentTimeline(const VideoCatalog& catalog, const SessionizerParams& params)
      : catalog_(catalog), params_(params) {}

  void consume(const VideoEvent& ev) {
    if (open_ && ev.wall_time - open_->last_wall > params_.session_gap) {
      close(open_->last_wall + params_.session_gap, /*extrapolate=*/true);
    }
    if (open_ && (ev.action == Action::Load || ev.video_id != open_->video_id)) {
      close(ev.wall_time, /*extrapolate=*/true);
    }
    if (!open_) begin(ev);

    OpenSession& s = *open_;
    ++s.session.action_counts[static_cast<std::size_t>(ev.action)];
    const double pos = ev.position.value_or(s.seg_pos);
    switch (ev.action) {
      case Action::Load:
        break;
      case Action::Play: {
        if (s.playing) end_segment(pos, ev.wall_time);
        if (s.pause_wall) {
          s.session.pauses.push_back(ev.wall_time - *s.pause_wall);
          s.pause_wall.reset();
        }
        auto& rec = records_[s.video_id];
        if (!s.rewatch_counted && !rec.sessions.empty() && interval_contains(rec.covered, pos)) {
          ++rec.rewatch_count;
          s.rewatch_counted = true;
        }
        rec.watched = true;
        s.playing = true;
        s.seg_pos = pos;
        s.seg_wall = ev.wall_time;
        break;
      }
      case Action::Pause:
        if (s.playing) {
          end_segment(pos, ev.wall_time);
          s.playing = false;
        }
        if (!s.pause_wall) s.pause_wall = ev.wall_time;
        break;
      case Action::Seek: {
        const double target = *ev.new_position;
        s.session.seeks.push_back(target - pos);
        if (s.playing) end_segment(pos, ev.wall_time);
        s.seg_pos = target;
        s.seg_wall = ev.wall_time;
        break;
      }
      case Action::SpeedChange:
        if (s.playing) {
          end_segment(pos, ev.wall_time);
          s.seg_pos = pos;
          s.seg_wall = ev.wall_time;
        }
        s.rate = *ev.new_speed;
        break;
      case Action::Stop:
        if (s.playing) {
          end_segment(pos, ev.wall_time);
          s.playing = false;
        }
        s.last_wall = ev.wall_time;
        close(ev.wall_time, /*extrapolate=*/false);
        return;
    }
    s.last_wall = ev.wall_time;
  }

  /// Closes any session still open at the end of the considered window.
  std::map<std::string, WatchRecord> finish(double horizon) {
    if (open_) close(std::min(open_->last_wall + params_.session_gap, std::max(horizon, open_->last_wall)), true);
    return std::move(records_);
  }

 private:
  struct OpenSession {
    std::string video_id;
    WatchSession session;
    double duration = 0.0;
    bool playing = false;
    double seg_pos = 0.0;
    double seg_wall = 0.0;
    double rate = 1.0;
    std::optional<double> pause_wall;
    double last_wall = 0.0;
    bool rewatch_counted = false;
    std::vector<Interval> pieces;
  };

  void begin(const VideoEvent& ev) {
    OpenSession s;
    s.video_id = ev.video_id;
    s.duration = catalog_.at(ev.video_id).duration;
    s.session.start_wall = ev.wall_time;
    s.last_wall = ev.wall_time;
    s.seg_pos = ev.position.value_or(0.0);
    auto& rec = records_[ev.video_id];
    if (rec.video_id.empty()) {
      rec.video_id = ev.video_id;
      rec.student_id = ev.student_id;
    }
    if (!rec.sessions.empty() && rec.coverage_fraction > params_.rewatch_threshold) {
      ++rec.rewatch_count;
      s.rewatch_counted = true;
    }
    open_ = std::move(s);
  }

  void end_segment(double pos, double wall) {
    OpenSession& s = *open_;
    if (pos > s.seg_pos) s.pieces.push_back({s.seg_pos, std::min(pos, s.duration)});
    if (s.rate > 1.0 && wall > s.seg_wall) s.session.speedup_time += wall - s.seg_wall;
  }

  void close(double t, bool extrapolate) {
    OpenSession& s = *open_;
    double end_wall = s.last_wall;
    if (s.playing && extrapolate) {
      const double pos = std::min(s.seg_pos + (t - s.seg_wall) * s.rate, s.duration);
      end_segment(pos, t);
      end_wall = std::max(t, s.last_wall);
    } else if (!extrapolate) {
      end_wall = t;
    }
    s.session.end_wall = std::max(end_wall, s.session.start_wall);

    auto& rec = records_[s.video_id];
    auto all = rec.covered;
    all.insert(all.end(), s.pieces.begin(), s.pieces.end());
    rec.covered = merge_intervals(std::move(all), s.duration);
    rec.coverage_fraction = coverage_fraction(rec.covered, s.duration);
    s.session.coverage_at_end = rec.coverage_fraction;
    if (rec.coverage_fraction >= params_.completion_threshold) rec.completed_ever = true;
    rec.interrupted = rec.watched && !rec.completed_ever;
    rec.sessions.push_back(std::move(s.session));
    open_.reset();
  }

  const VideoCatalog& catalog_;
  const SessionizerParams& params_;
  std::optional<OpenSession> open_;
  std::map<std::string, WatchRecord> records_;
};

}  // namespace detail

/// Watch records for one student, keyed by video id. `events` must be the
/// student's events in wall-time order; events at or after the end of
/// `week_cutoff`, and events on videos missing from the catalog, are ignored.
inline std::map<std::string, WatchRecord> build_student_records(std::span<const VideoEvent> events,
                                                                const VideoCatalog& catalog,
                                                                int week_cutoff,
                                                                const SessionizerParams& params = {}) {
  const double horizon = params.calendar.week_end(week_cutoff);
  detail::StudentTimeline timeline(catalog, params);
  for (const auto& ev : events) {
    if (ev.wall_time >= horizon) break;
    if (!catalog.contains(ev.video_id)) continue;
    timeline.consume(ev);
  }
  return timeline.finish(horizon);
}

using WatchRecordMap = std::map<std::pair<std::string, std::string>, WatchRecord>;

/// Watch records for every (student, video) pair with at least one event
/// before the end of `week_cutoff`. `events` must be sorted as produced by
/// parse_event_log.
inline WatchRecordMap build_watch_records(const std::vector<VideoEvent>& events,
                                          const VideoCatalog& catalog, int week_cutoff,
                                          const SessionizerParams& params = {}) {
  WatchRecordMap out;
  std::size_t begin = 0;
  while (begin < events.size()) {
    std::size_t end = begin;
    while (end < events.size() && events[end].student_id == events[begin].student_id) ++end;
    auto records = build_student_records(std::span(events).subspan(begin, end - begin), catalog,
                                         week_cutoff, params);
    for (auto& [video, rec] : records) {
      out.emplace(std::make_pair(events[begin].student_id, video), std::move(rec));
    }
    begin = end;
  }
  return out;
}

}  // namespace fuma
