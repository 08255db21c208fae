#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fuma/error.hpp"
#include "fuma/event_ingest.hpp"
#include "fuma/rng.hpp"
#include "fuma/sessionizer.hpp"

namespace fuma {

/// Population mean and between-student SD of one generative knob.
struct Knob {
  double mean = 0.0;
  double sd = 0.0;
};

/// A planted behavioral profile.
struct ArchetypeSpec {
  std::string name;
  double weight = 1.0;
  Knob watch_prob;          // P(watch each video of an active week)
  Knob interruption_prob;   // P(a viewing stops early)
  Knob rewatch_prob;        // P(another viewing of a watched video)
  Knob pause_rate;          // pauses per video-minute
  Knob pause_log_mean;      // log of typical pause length (s)
  double pause_log_sd = 0.6;
  Knob seek_rate;           // seeks per video-minute
  double seek_back_prob = 0.5;
  double seek_log_mean = 3.0;  // log of typical seek length (s)
  double seek_log_sd = 0.7;
  Knob speed_change_prob;   // P(speed-up at the start of a viewing)
  double grade_mean = 0.5;
  double grade_sd = 0.15;
  double hazard_first_week = 0.0;
  double hazard_weekly = 0.0;

  void validate() const {
    auto prob = [&](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument(name + ": " + what + " must be in [0,1]");
    };
    prob(watch_prob.mean, "watch_prob");
    prob(interruption_prob.mean, "interruption_prob");
    prob(rewatch_prob.mean, "rewatch_prob");
    prob(speed_change_prob.mean, "speed_change_prob");
    prob(seek_back_prob, "seek_back_prob");
    prob(hazard_first_week, "hazard_first_week");
    prob(hazard_weekly, "hazard_weekly");
    prob(grade_mean, "grade_mean");
    if (pause_rate.mean < 0.0 || seek_rate.mean < 0.0) throw InvalidArgument(name + ": rates must be >= 0");
    if (weight < 0.0) throw InvalidArgument(name + ": weight must be >= 0");
    for (const Knob* k : {&watch_prob, &interruption_prob, &rewatch_prob, &pause_rate, &pause_log_mean, &seek_rate,
                          &speed_change_prob}) {
      if (k->sd < 0.0) throw InvalidArgument(name + ": knob SDs must be >= 0");
    }
    if (grade_sd < 0.0 || pause_log_sd < 0.0 || seek_log_sd < 0.0) throw InvalidArgument(name + ": SDs must be >= 0");
  }
};

struct CohortConfig {
  std::vector<ArchetypeSpec> archetypes;
  std::size_t n_students = 500;
  VideoCatalog course;
  double pass_threshold = 0.8;
  std::uint64_t seed = 0;
  /// Scales every archetype's deviation from the weighted centre; 0 makes
  /// all archetypes identical.
  double separation = 1.0;
  double grade_engagement_weight = 0.5;
  double course_start = CourseCalendar{}.course_start;

  void validate() const {
    if (archetypes.empty()) throw InvalidArgument("cohort: no archetypes");
    if (n_students < 1) throw InvalidArgument("cohort: n_students must be >= 1");
    double total = 0.0;
    for (const auto& a : archetypes) {
      a.validate();
      total += a.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw InvalidArgument("cohort: mixture weights must sum to 1");
    if (separation < 0.0) throw InvalidArgument("cohort: separation must be >= 0");
    if (!(grade_engagement_weight >= 0.0 && grade_engagement_weight <= 1.0)) {
      throw InvalidArgument("cohort: grade_engagement_weight must be in [0,1]");
    }
    course.validate();
  }
};

struct Cohort {
  std::vector<VideoEvent> events;        // sorted by student, then time
  std::vector<OutcomeRecord> outcomes;   // one per student, id order
  std::vector<std::size_t> truth;        // archetype index per student
  std::vector<std::string> archetype_names;
  VideoCatalog catalog;
};

/// 33 videos over 6 weeks (6, 6, 6, 5, 5, 5), 4 to 15 minutes each.
inline VideoCatalog default_catalog() {
  VideoCatalog c;
  const std::array<int, 6> per_week{6, 6, 6, 5, 5, 5};
  int idx = 0;
  for (int w = 1; w <= 6; ++w) {
    for (int i = 0; i < per_week[w - 1]; ++i, ++idx) {
      char id[16];
      std::snprintf(id, sizeof id, "v%02d", idx + 1);
      const double duration = 240.0 + static_cast<double>((idx * 137) % 661);
      c.add(id, {duration, w, "Week " + std::to_string(w) + " lecture " + std::to_string(i + 1)});
    }
  }
  return c;
}

/// The shipped two-archetype configuration (also in data/default_cohort.json).
inline CohortConfig default_cohort_config() {
  CohortConfig cfg;
  cfg.course = default_catalog();
  cfg.separation = 2.0;

  ArchetypeSpec engaged;
  engaged.name = "Engaged";
  engaged.weight = 0.3;
  engaged.watch_prob = {0.72, 0.08};
  engaged.interruption_prob = {0.15, 0.05};
  engaged.rewatch_prob = {0.24, 0.04};
  engaged.pause_rate = {0.2, 0.05};
  engaged.pause_log_mean = {3.3, 0.15};
  engaged.pause_log_sd = 0.6;
  engaged.seek_rate = {0.16, 0.04};
  engaged.seek_back_prob = 0.55;
  engaged.seek_log_mean = 3.2;
  engaged.speed_change_prob = {0.18, 0.06};
  engaged.grade_mean = 0.67;
  engaged.grade_sd = 0.12;
  engaged.hazard_first_week = 0.25;
  engaged.hazard_weekly = 0.12;

  ArchetypeSpec disengaged;
  disengaged.name = "Disengaged";
  disengaged.weight = 0.7;
  disengaged.watch_prob = {0.54, 0.1};
  disengaged.interruption_prob = {0.15, 0.05};
  disengaged.rewatch_prob = {0.1, 0.03};
  disengaged.pause_rate = {0.14, 0.04};
  disengaged.pause_log_mean = {2.9, 0.15};
  disengaged.pause_log_sd = 0.6;
  disengaged.seek_rate = {0.16, 0.04};
  disengaged.seek_back_prob = 0.45;
  disengaged.seek_log_mean = 3.2;
  disengaged.speed_change_prob = {0.32, 0.08};
  disengaged.grade_mean = 0.5;
  disengaged.grade_sd = 0.15;
  disengaged.hazard_first_week = 0.55;
  disengaged.hazard_weekly = 0.3;

  cfg.archetypes = {engaged, disengaged};
  return cfg;
}

namespace detail {

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Archetypes with every scalar pulled toward (s < 1) or pushed away from
// (s > 1) the mixture-weighted centre, then clamped to its valid range.
inline std::vector<ArchetypeSpec> apply_separation(const std::vector<ArchetypeSpec>& in, double s) {
  auto centre = [&](auto get) {
    double c = 0.0;
    for (const auto& a : in) c += a.weight * get(a);
    return c;
  };
  std::vector<ArchetypeSpec> out = in;
  auto scale = [&](auto member_ptr_get, double lo, double hi) {
    const double c = centre(member_ptr_get);
    for (std::size_t i = 0; i < in.size(); ++i) {
      member_ptr_get(out[i]) = std::clamp(c + s * (member_ptr_get(in[i]) - c), lo, hi);
    }
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  scale([](auto& a) -> auto& { return a.watch_prob.mean; }, 0.0, 1.0);
  scale([](auto& a) -> auto& { return a.interruption_prob.mean; }, 0.0, 1.0);
  scale([](auto& a) -> auto& { return a.rewatch_prob.mean; }, 0.0, 1.0);
  scale([](auto& a) -> auto& { return a.pause_rate.mean; }, 0.0, inf);
  scale([](auto& a) -> auto& { return a.pause_log_mean.mean; }, -inf, inf);
  scale([](auto& a) -> auto& { return a.seek_rate.mean; }, 0.0, inf);
  scale([](auto& a) -> auto& { return a.seek_back_prob; }, 0.0, 1.0);
  scale([](auto& a) -> auto& { return a.seek_log_mean; }, -inf, inf);
  scale([](auto& a) -> auto& { return a.speed_change_prob.mean; }, 0.0, 1.0);
  scale([](auto& a) -> auto& { return a.grade_mean; }, 0.0, 1.0);
  scale([](auto& a) -> auto& { return a.hazard_first_week; }, 0.0, 1.0);
  scale([](auto& a) -> auto& { return a.hazard_weekly; }, 0.0, 1.0);
  return out;
}

// Per-student draws of every knob.
struct StudentKnobs {
  double watch_prob, interruption_prob, rewatch_prob, pause_rate, pause_log_mean, seek_rate, speed_change_prob;
};

inline StudentKnobs draw_knobs(const ArchetypeSpec& a, Rng& rng) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto draw = [&](const Knob& k, double lo, double hi) { return rng.truncated_normal(k.mean, k.sd, lo, hi); };
  return {draw(a.watch_prob, 0.0, 1.0),       draw(a.interruption_prob, 0.0, 1.0), draw(a.rewatch_prob, 0.0, 1.0),
          draw(a.pause_rate, 0.0, inf),       draw(a.pause_log_mean, -inf, inf),   draw(a.seek_rate, 0.0, inf),
          draw(a.speed_change_prob, 0.0, 1.0)};
}

inline double round_ms(double x) { return std::round(x * 1000.0) / 1000.0; }

class ViewingSimulator {
 public:
  ViewingSimulator(const std::string& student, const ArchetypeSpec& arch, const StudentKnobs& knobs, Rng& rng,
                   std::vector<VideoEvent>& sink)
      : student_(student), arch_(arch), knobs_(knobs), rng_(rng), sink_(sink) {}

  // Simulates one viewing starting at wall time t; returns the end wall time
  // and appends the covered in-video intervals.
  double view(const std::string& video, double duration, double start_pos, double t, std::vector<Interval>& covered) {
    emit(video, Action::Load, t, std::nullopt);
    t += rng_.uniform(1.0, 5.0);
    double rate = 1.0;
    if (rng_.bernoulli(knobs_.speed_change_prob)) {
      static constexpr std::array<double, 4> speeds{1.25, 1.5, 1.75, 2.0};
      rate = speeds[rng_.index(speeds.size())];
      emit(video, Action::SpeedChange, t, start_pos, std::nullopt, rate);
      t += rng_.uniform(0.5, 2.0);
    }
    emit(video, Action::Play, t, start_pos);

    const bool interrupted = rng_.bernoulli(knobs_.interruption_prob);
    const double stop_pos =
        interrupted ? round_ms(start_pos + (duration - start_pos) * rng_.uniform(0.05, 0.85)) : duration;
    const double minutes = (stop_pos - start_pos) / 60.0;
    struct Planned {
      double at;
      bool pause;
    };
    std::vector<Planned> plan;
    const int pauses = rng_.poisson(knobs_.pause_rate * minutes);
    const int seeks = rng_.poisson(knobs_.seek_rate * minutes);
    for (int i = 0; i < pauses; ++i) plan.push_back({round_ms(rng_.uniform(start_pos, stop_pos)), true});
    for (int i = 0; i < seeks; ++i) plan.push_back({round_ms(rng_.uniform(start_pos, stop_pos)), false});
    std::sort(plan.begin(), plan.end(), [](const Planned& a, const Planned& b) { return a.at < b.at; });

    double pos = start_pos;
    double seg = start_pos;
    for (const auto& p : plan) {
      if (p.at <= pos || p.at >= stop_pos) continue;
      t += (p.at - pos) / rate;
      pos = p.at;
      if (p.pause) {
        emit(video, Action::Pause, t, pos);
        covered.push_back({seg, pos});
        t += rng_.lognormal(knobs_.pause_log_mean, arch_.pause_log_sd);
        emit(video, Action::Play, t, pos);
        seg = pos;
      } else {
        const double len = rng_.lognormal(arch_.seek_log_mean, arch_.seek_log_sd);
        const bool back = rng_.bernoulli(arch_.seek_back_prob);
        const double target = round_ms(back ? std::max(0.0, pos - len) : std::min(stop_pos, pos + len));
        emit(video, Action::Seek, t, pos, target);
        covered.push_back({seg, pos});
        pos = target;
        seg = pos;
        t += rng_.uniform(0.2, 1.5);
      }
    }
    if (stop_pos > pos) t += (stop_pos - pos) / rate;
    emit(video, Action::Stop, t, std::max(pos, stop_pos));
    covered.push_back({seg, std::max(pos, stop_pos)});
    return t;
  }

 private:
  void emit(const std::string& video, Action a, double t, std::optional<double> pos,
            std::optional<double> new_pos = std::nullopt, std::optional<double> speed = std::nullopt) {
    VideoEvent ev;
    ev.student_id = student_;
    ev.video_id = video;
    ev.action = a;
    ev.wall_time = round_ms(t);
    if (pos) ev.position = round_ms(*pos);
    if (new_pos) ev.new_position = round_ms(*new_pos);
    ev.new_speed = speed;
    sink_.push_back(std::move(ev));
  }

  const std::string& student_;
  const ArchetypeSpec& arch_;
  const StudentKnobs& knobs_;
  Rng& rng_;
  std::vector<VideoEvent>& sink_;
};

}  // namespace detail

inline std::string synthetic_student_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%06zu", i + 1);
  return buf;
}

/// Generates event logs, outcomes and planted archetype labels. Each student
/// uses its own RNG stream derived from the master seed.
inline Cohort generate_cohort(const CohortConfig& config) {
  config.validate();
  const auto archetypes = detail::apply_separation(config.archetypes, config.separation);
  std::vector<double> weights;
  for (const auto& a : archetypes) weights.push_back(a.weight);
  const VideoCatalog& course = config.course;
  const int weeks = course.weeks();
  const CourseCalendar calendar{config.course_start};

  Cohort cohort;
  cohort.catalog = course;
  for (const auto& a : archetypes) cohort.archetype_names.push_back(a.name);

  for (std::size_t s = 0; s < config.n_students; ++s) {
    Rng rng(derive_seed(config.seed, s));
    const std::string id = synthetic_student_id(s);
    const std::size_t arch_idx = rng.weighted(weights);
    const ArchetypeSpec& arch = archetypes[arch_idx];
    const auto knobs = detail::draw_knobs(arch, rng);

    int last_week = 1;
    while (last_week < weeks) {
      const double hazard = last_week == 1 ? arch.hazard_first_week : arch.hazard_weekly;
      if (rng.bernoulli(hazard)) break;
      ++last_week;
    }

    std::vector<VideoEvent> events;
    std::map<std::string, std::vector<Interval>> covered;
    detail::ViewingSimulator sim(id, arch, knobs, rng, events);
    for (int w = 1; w <= last_week; ++w) {
      const auto videos = course.videos_in_week(w);
      std::vector<std::string> chosen;
      for (const auto& v : videos) {
        if (rng.bernoulli(knobs.watch_prob)) chosen.push_back(v);
      }
      if (chosen.empty()) chosen.push_back(videos[rng.index(videos.size())]);

      double t = calendar.week_end(w - 1) + rng.uniform(1.0, 48.0) * 3600.0;
      for (const auto& v : chosen) {
        const double duration = course.at(v).duration;
        t = sim.view(v, duration, 0.0, t, covered[v]) + rng.uniform(60.0, 4.0 * 3600.0);
      }
      for (const auto& v : chosen) {
        for (int r = 0; r < 3 && rng.bernoulli(knobs.rewatch_prob); ++r) {
          const double duration = course.at(v).duration;
          const double start = rng.bernoulli(0.5) ? 0.0 : detail::round_ms(rng.uniform(0.0, 0.5 * duration));
          t = sim.view(v, duration, start, t, covered[v]) + rng.uniform(60.0, 4.0 * 3600.0);
        }
      }
    }

    double coverage_total = 0.0;
    for (int w = 1; w <= weeks; ++w) {
      const auto videos = course.videos_in_week(w);
      double week_cov = 0.0;
      for (const auto& v : videos) {
        const auto it = covered.find(v);
        if (it != covered.end()) week_cov += coverage_fraction(it->second, course.at(v).duration);
      }
      coverage_total += week_cov / static_cast<double>(videos.size());
    }
    const double coverage = coverage_total / static_cast<double>(weeks);
    const double draw = rng.truncated_normal(arch.grade_mean, arch.grade_sd, 0.0, 1.0);
    const double grade =
        detail::clamp01((1.0 - config.grade_engagement_weight) * draw + config.grade_engagement_weight * coverage);

    cohort.outcomes.push_back({id, grade, grade >= config.pass_threshold, last_week});
    cohort.truth.push_back(arch_idx);
    cohort.events.insert(cohort.events.end(), std::make_move_iterator(events.begin()),
                         std::make_move_iterator(events.end()));
  }
  sort_events(cohort.events);
  return cohort;
}

namespace detail {

inline Knob knob_from_json(const nlohmann::json& j, const char* key, Knob fallback) {
  if (!j.contains(key)) return fallback;
  const auto& k = j.at(key);
  return {k.value("mean", fallback.mean), k.value("sd", fallback.sd)};
}

}  // namespace detail

/// Reads a cohort configuration (JSON). Missing fields keep the defaults of
/// default_cohort_config(); a missing "course" uses default_catalog().
inline CohortConfig read_cohort_config(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("cohort config: ") + e.what());
  }
  try {
    CohortConfig cfg = default_cohort_config();
    cfg.n_students = j.value("n_students", cfg.n_students);
    cfg.separation = j.value("separation", cfg.separation);
    cfg.pass_threshold = j.value("pass_threshold", cfg.pass_threshold);
    cfg.grade_engagement_weight = j.value("grade_engagement_weight", cfg.grade_engagement_weight);
    cfg.course_start = j.value("course_start", cfg.course_start);
    if (j.contains("course")) {
      VideoCatalog course;
      for (const auto& v : j.at("course").at("videos")) {
        course.add(v.at("id").get<std::string>(),
                   {v.at("duration").get<double>(), v.at("week").get<int>(), v.value("title", std::string())});
      }
      cfg.course = std::move(course);
    }
    if (j.contains("archetypes")) {
      const auto defaults = default_cohort_config().archetypes;
      cfg.archetypes.clear();
      for (const auto& aj : j.at("archetypes")) {
        ArchetypeSpec a = defaults.front();
        a.name = aj.value("name", std::string("archetype") + std::to_string(cfg.archetypes.size() + 1));
        a.weight = aj.value("weight", a.weight);
        a.watch_prob = detail::knob_from_json(aj, "watch_prob", a.watch_prob);
        a.interruption_prob = detail::knob_from_json(aj, "interruption_prob", a.interruption_prob);
        a.rewatch_prob = detail::knob_from_json(aj, "rewatch_prob", a.rewatch_prob);
        a.pause_rate = detail::knob_from_json(aj, "pause_rate", a.pause_rate);
        a.pause_log_mean = detail::knob_from_json(aj, "pause_log_mean", a.pause_log_mean);
        a.pause_log_sd = aj.value("pause_log_sd", a.pause_log_sd);
        a.seek_rate = detail::knob_from_json(aj, "seek_rate", a.seek_rate);
        a.seek_back_prob = aj.value("seek_back_prob", a.seek_back_prob);
        a.seek_log_mean = aj.value("seek_log_mean", a.seek_log_mean);
        a.seek_log_sd = aj.value("seek_log_sd", a.seek_log_sd);
        a.speed_change_prob = detail::knob_from_json(aj, "speed_change_prob", a.speed_change_prob);
        a.grade_mean = aj.value("grade_mean", a.grade_mean);
        a.grade_sd = aj.value("grade_sd", a.grade_sd);
        a.hazard_first_week = aj.value("hazard_first_week", a.hazard_first_week);
        a.hazard_weekly = aj.value("hazard_weekly", a.hazard_weekly);
        cfg.archetypes.push_back(std::move(a));
      }
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("cohort config: ") + e.what());
  }
}

inline nlohmann::json cohort_config_to_json(const CohortConfig& cfg) {
  using nlohmann::json;
  auto knob = [](const Knob& k) { return json{{"mean", k.mean}, {"sd", k.sd}}; };
  json j;
  j["n_students"] = cfg.n_students;
  j["separation"] = cfg.separation;
  j["pass_threshold"] = cfg.pass_threshold;
  j["grade_engagement_weight"] = cfg.grade_engagement_weight;
  j["course_start"] = cfg.course_start;
  json videos = json::array();
  for (const auto& [id, v] : cfg.course.entries()) {
    videos.push_back({{"id", id}, {"duration", v.duration}, {"week", v.week}, {"title", v.title}});
  }
  j["course"] = {{"videos", videos}};
  json archetypes = json::array();
  for (const auto& a : cfg.archetypes) {
    archetypes.push_back({{"name", a.name},
                          {"weight", a.weight},
                          {"watch_prob", knob(a.watch_prob)},
                          {"interruption_prob", knob(a.interruption_prob)},
                          {"rewatch_prob", knob(a.rewatch_prob)},
                          {"pause_rate", knob(a.pause_rate)},
                          {"pause_log_mean", knob(a.pause_log_mean)},
                          {"pause_log_sd", a.pause_log_sd},
                          {"seek_rate", knob(a.seek_rate)},
                          {"seek_back_prob", a.seek_back_prob},
                          {"seek_log_mean", a.seek_log_mean},
                          {"seek_log_sd", a.seek_log_sd},
                          {"speed_change_prob", knob(a.speed_change_prob)},
                          {"grade_mean", a.grade_mean},
                          {"grade_sd", a.grade_sd},
                          {"hazard_first_week", a.hazard_first_week},
                          {"hazard_weekly", a.hazard_weekly}});
  }
  j["archetypes"] = archetypes;
  return j;
}

inline void write_truth(std::ostream& out, const Cohort& cohort) {
  out << "student_id,archetype_index,archetype\n";
  for (std::size_t i = 0; i < cohort.outcomes.size(); ++i) {
    out << cohort.outcomes[i].student_id << ',' << cohort.truth[i] << ',' << cohort.archetype_names[cohort.truth[i]]
        << '\n';
  }
}

}  // namespace fuma
