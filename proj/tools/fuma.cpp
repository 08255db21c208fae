// fuma command-line driver.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "fuma/fuma.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fuma;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

std::string read_file(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// FNV-1a, enough to tell whether an input changed between runs.
std::string fingerprint(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Writes through a sibling temp file and renames it into place.
void write_atomic(const std::string& path, const std::function<void(std::ostream&)>& fill) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    fill(out);
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("write failed for " + path);
    }
  }
  fs::rename(tmp, target);
}

/// Run record: every input (with a fingerprint), output, seed and parameter.
class Manifest {
 public:
  Manifest(std::string command, int argc, char** argv) : command_(std::move(command)) {
    j_["tool"] = "fuma";
    j_["version"] = kVersion;
    j_["command"] = command_;
    json args = json::array();
    for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
    j_["argv"] = args;
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
    j_["parameters"] = json::object();
  }

  void input(const std::string& path, const std::string& bytes) {
    j_["inputs"].push_back({{"path", path}, {"bytes", bytes.size()}, {"fnv1a64", fingerprint(bytes)}});
  }
  void output(const std::string& path) {
    j_["outputs"].push_back(path);
    if (primary_.empty()) primary_ = path;
  }
  json& parameters() { return j_["parameters"]; }
  void seed(std::uint64_t s) { j_["seed"] = s; }

  void write(const std::string& explicit_path) const {
    std::string path = explicit_path;
    if (path.empty()) path = primary_.empty() ? "fuma-" + command_ + ".manifest.json" : primary_ + ".manifest.json";
    write_atomic(path, [&](std::ostream& out) { out << j_.dump(2) << '\n'; });
  }

 private:
  std::string command_;
  std::string primary_;
  json j_;
};

std::string read_input(Manifest& m, const std::string& path) {
  std::string bytes = read_file(path);
  m.input(path, bytes);
  return bytes;
}

VideoCatalog catalog_from(Manifest& m, const std::string& path) {
  std::istringstream in(read_input(m, path));
  return load_catalog(in);
}

EventLog events_from(Manifest& m, const std::string& path, bool strict, const VideoCatalog& catalog) {
  std::istringstream in(read_input(m, path));
  return parse_event_log(in, strict, &catalog);
}

std::vector<OutcomeRecord> outcomes_from(Manifest& m, const std::string& path) {
  std::istringstream in(read_input(m, path));
  return read_outcomes(in);
}

FeatureTable features_from(Manifest& m, const std::string& path) {
  std::istringstream in(read_input(m, path));
  return read_feature_table(in);
}

ClusterModel model_from(Manifest& m, const std::string& path) {
  std::istringstream in(read_input(m, path));
  return load_model(in);
}

std::pair<std::size_t, std::size_t> parse_k_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    std::size_t lo = 0;
    std::size_t hi = 0;
    if (dots == std::string::npos) {
      lo = hi = std::stoul(text);
    } else {
      lo = std::stoul(text.substr(0, dots));
      hi = std::stoul(text.substr(dots + 2));
    }
    if (lo < 2) throw UsageError("--k-range: k must be >= 2");
    if (hi < lo) throw UsageError("--k-range: upper bound below lower bound");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError("--k-range: expected a..b, got '" + text + "'");
  }
}

std::vector<int> parse_weeks(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const int w = std::stoi(item);
      if (w < 1) throw UsageError("--weeks: week numbers start at 1");
      out.push_back(w);
    } catch (const std::logic_error&) {
      throw UsageError("--weeks: expected a comma-separated list, got '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("--weeks: no weeks given");
  return out;
}

FrequencyBasis parse_basis(const std::string& s) {
  if (s == "active-hour") return FrequencyBasis::PerActiveHour;
  if (s == "watched-video") return FrequencyBasis::PerWatchedVideo;
  if (s == "week") return FrequencyBasis::PerWeek;
  throw UsageError("--basis must be active-hour, watched-video or week");
}

// Runs a parameter validation and reports failures as usage errors.
template <class Fn>
void check_params(Fn&& fn) {
  try {
    fn();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

json session_to_json(const WatchSession& s) {
  json counts;
  for (std::size_t a = 0; a < s.action_counts.size(); ++a) {
    counts[std::string(action_code(static_cast<Action>(a)))] = s.action_counts[a];
  }
  return {{"start_wall", s.start_wall}, {"end_wall", s.end_wall},   {"pauses", s.pauses},
          {"seeks", s.seeks},           {"speedup_time", s.speedup_time}, {"action_counts", counts},
          {"coverage_at_end", s.coverage_at_end}};
}

json record_to_json(const WatchRecord& r) {
  json covered = json::array();
  for (const auto& iv : r.covered) covered.push_back({iv.start, iv.end});
  json sessions = json::array();
  for (const auto& s : r.sessions) sessions.push_back(session_to_json(s));
  return {{"student_id", r.student_id},
          {"video_id", r.video_id},
          {"coverage_fraction", r.coverage_fraction},
          {"rewatch_count", r.rewatch_count},
          {"watched", r.watched},
          {"interrupted", r.interrupted},
          {"completed_ever", r.completed_ever},
          {"covered", covered},
          {"sessions", sessions}};
}

std::string series_path(const std::string& report, const std::string& name) {
  fs::path p(report);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + "." + name + ".csv")).string();
}

struct Options {
  std::size_t jobs = 1;
  std::string manifest;

  std::string config, events, catalog, outcomes, truth, out, features, model, report, figure, dump_sessions;
  std::string k_range = "2..6";
  std::string weeks = "2,3,4";
  std::string basis = "active-hour";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_students;
  std::optional<double> separation;
  std::optional<double> course_start;
  std::optional<int> week;
  bool strict = false;
  std::size_t folds = 10;
  std::size_t generations = 100;
  std::size_t population = 30;
  double min_support = 0.1;
  double improvement = 0.01;
  std::size_t max_len = 3;
  std::size_t branching = 3;
  double min_actions = 0.0;
};

DiscoveryParams discovery_params(const Options& o, Manifest& m) {
  DiscoveryParams p;
  const auto [lo, hi] = parse_k_range(o.k_range);
  p.k_min = lo;
  p.k_max = hi;
  if (lo == hi) p.fixed_k = lo;
  p.ga.generations = o.generations;
  p.ga.population_size = o.population;
  p.mining.min_support_frac = o.min_support;
  p.mining.min_confidence_improvement = o.improvement;
  p.mining.max_len = o.max_len;
  p.mining.max_branching = o.branching;
  p.jobs = o.jobs;
  check_params([&] { p.validate(); });
  auto& j = m.parameters();
  j["k_range"] = {lo, hi};
  j["ga"] = {{"generations", p.ga.generations},
             {"population_size", p.ga.population_size},
             {"mutation_prob", p.ga.mutation_prob},
             {"elitism_count", p.ga.elitism_count}};
  j["mining"] = {{"min_support_frac", p.mining.min_support_frac},
                 {"min_confidence_improvement", p.mining.min_confidence_improvement},
                 {"max_len", p.mining.max_len},
                 {"max_branching", p.mining.max_branching}};
  return p;
}

SessionizerParams sessionizer_params(const Options& o, Manifest& m) {
  SessionizerParams sp;
  if (o.course_start) sp.calendar.course_start = *o.course_start;
  m.parameters()["course_start"] = sp.calendar.course_start;
  m.parameters()["session_gap"] = sp.session_gap;
  return sp;
}

// ---- subcommands ----

void run_simulate(const Options& o, Manifest& m) {
  CohortConfig cfg = default_cohort_config();
  if (!o.config.empty()) {
    std::istringstream in(read_input(m, o.config));
    cfg = read_cohort_config(in);
  }
  if (o.n_students) cfg.n_students = *o.n_students;
  if (o.separation) cfg.separation = *o.separation;
  cfg.seed = *o.seed;
  check_params([&] { cfg.validate(); });
  m.seed(cfg.seed);
  m.parameters()["cohort"] = cohort_config_to_json(cfg);

  const Cohort cohort = generate_cohort(cfg);
  write_atomic(o.out, [&](std::ostream& out) { write_event_log(out, cohort.events); });
  m.output(o.out);
  if (!o.outcomes.empty()) {
    write_atomic(o.outcomes, [&](std::ostream& out) { write_outcomes(out, cohort.outcomes); });
    m.output(o.outcomes);
  }
  if (!o.truth.empty()) {
    write_atomic(o.truth, [&](std::ostream& out) { write_truth(out, cohort); });
    m.output(o.truth);
  }
  if (!o.catalog.empty()) {
    write_atomic(o.catalog, [&](std::ostream& out) { write_catalog(out, cohort.catalog); });
    m.output(o.catalog);
  }
  std::cerr << "simulated " << cohort.outcomes.size() << " students, " << cohort.events.size() << " events\n";
}

void run_ingest(const Options& o, Manifest& m) {
  const auto catalog = catalog_from(m, o.catalog);
  const auto log = events_from(m, o.events, o.strict, catalog);
  m.parameters()["strict"] = o.strict;
  json report = {{"accepted", log.report.accepted}, {"rejected", log.report.rejected}, {"reasons", log.report.reasons}};
  json first = json::array();
  for (const auto& [line, reason] : log.report.first_rejections) first.push_back({{"line", line}, {"reason", reason}});
  report["first_rejections"] = first;
  std::cout << report.dump(2) << '\n';

  if (!o.out.empty()) {
    write_atomic(o.out, [&](std::ostream& out) { write_event_log(out, log.events); });
    m.output(o.out);
  }
  if (!o.dump_sessions.empty()) {
    const auto sp = sessionizer_params(o, m);
    const int week = o.week.value_or(catalog.weeks());
    m.parameters()["week"] = week;
    const auto records = build_watch_records(log.events, catalog, week, sp);
    write_atomic(o.dump_sessions, [&](std::ostream& out) {
      for (const auto& [key, rec] : records) out << record_to_json(rec).dump() << '\n';
    });
    m.output(o.dump_sessions);
  }
}

void run_featurize(const Options& o, Manifest& m) {
  const auto catalog = catalog_from(m, o.catalog);
  const auto log = events_from(m, o.events, o.strict, catalog);
  const auto sp = sessionizer_params(o, m);
  ExtractOptions eo;
  eo.basis = parse_basis(o.basis);
  const int week = *o.week;
  if (week > catalog.weeks()) throw UsageError("--week exceeds the catalog's " + std::to_string(catalog.weeks()) + " weeks");
  m.parameters()["week"] = week;
  m.parameters()["basis"] = o.basis;
  const auto table = extract_feature_table(log.events, catalog, week, sp, eo);
  write_atomic(o.out, [&](std::ostream& out) { write_feature_table(out, table); });
  m.output(o.out);
  std::cerr << "featurized " << table.student_ids.size() << " students at week " << week << '\n';
}

void run_discover(const Options& o, Manifest& m) {
  DiscoveryParams p = discovery_params(o, m);
  p.ga.seed = *o.seed;
  m.seed(*o.seed);
  const auto table = features_from(m, o.features);
  const auto all_outcomes = outcomes_from(m, o.outcomes);
  auto outcomes = align_outcomes(table.student_ids, all_outcomes);

  // With --week, keep only students still active at that week.
  Matrix raw = table.values;
  if (o.week) {
    p.dropout_week = *o.week;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].last_active_week >= *o.week) keep.push_back(i);
    }
    raw = table.values.select_rows(keep);
    std::vector<OutcomeRecord> kept;
    for (auto i : keep) kept.push_back(outcomes[i]);
    outcomes = std::move(kept);
  }
  m.parameters()["dropout_week"] = p.dropout_week;
  if (raw.rows() < 3) throw Error("discover: fewer than 3 students to cluster");

  const auto d = discover(raw, outcomes, p);
  write_atomic(o.out, [&](std::ostream& out) { save_model(out, d.model); });
  m.output(o.out);
  std::cerr << "k = " << d.model.k();
  for (std::size_t c = 0; c < d.model.k(); ++c) {
    std::cerr << "  [" << c << "] " << d.model.labels[c] << " n=" << d.model.outcome_summary[c].members
              << " rules=" << d.model.rulesets[c].rules.size();
  }
  std::cerr << '\n';
}

void run_rules(const Options& o, Manifest& m) {
  const auto model = model_from(m, o.model);
  auto fill = [&](std::ostream& out) {
    out << "rule_id\tcluster\tlabel\tconditions\tsupport\tconfidence\n";
    for (std::size_t c = 0; c < model.k(); ++c) {
      for (std::size_t i = 0; i < model.rulesets[c].rules.size(); ++i) {
        const auto& r = model.rulesets[c].rules[i];
        out << rule_id({c, i}) << '\t' << c << '\t' << model.labels[c] << '\t' << format_conditions(r) << '\t'
            << r.support << '\t' << detail::fmt(r.confidence, 6) << '\n';
      }
    }
  };
  if (o.out.empty()) {
    fill(std::cout);
  } else {
    write_atomic(o.out, fill);
    m.output(o.out);
  }
}

std::vector<std::pair<std::string, ClassificationResult>> classify_all(const Options& o, Manifest& m,
                                                                       const ClusterModel& model) {
  const auto table = features_from(m, o.features);
  ClassifyOptions co;
  co.min_action_count = o.min_actions;
  m.parameters()["min_action_count"] = co.min_action_count;
  std::vector<std::pair<std::string, ClassificationResult>> out;
  for (std::size_t i = 0; i < table.student_ids.size(); ++i) {
    out.emplace_back(table.student_ids[i], classify(table.values.row(i), model, co));
  }
  return out;
}

void run_classify(const Options& o, Manifest& m) {
  const auto model = model_from(m, o.model);
  const auto results = classify_all(o, m, model);
  write_atomic(o.out, [&](std::ostream& out) {
    out << "student_id,assigned,score_per_cluster,ambiguity,matched_rule_ids\n";
    for (const auto& [id, r] : results) {
      out << id << ',' << (r.assigned ? model.labels[*r.assigned] : std::string("Unclassified")) << ',';
      for (std::size_t c = 0; c < r.scores.size(); ++c) out << (c ? ";" : "") << detail::fmt(r.scores[c].score, 6);
      out << ',' << (r.ambiguity_flag ? 1 : 0) << ',';
      for (std::size_t k = 0; k < r.matched_rules.size(); ++k) out << (k ? ";" : "") << rule_id(r.matched_rules[k]);
      out << '\n';
    }
  });
  m.output(o.out);
}

void run_intervene(const Options& o, Manifest& m) {
  const auto model = model_from(m, o.model);
  const auto results = classify_all(o, m, model);
  auto fill = [&](std::ostream& out) {
    for (const auto& [id, r] : results) {
      json list = json::array();
      for (const auto& iv : suggest_interventions(r, model)) {
        list.push_back({{"feature", kFeatureNames[iv.feature]},
                        {"direction", direction_name(iv.direction)},
                        {"threshold", iv.threshold},
                        {"confidence", iv.confidence},
                        {"source_rule", rule_id(iv.source_rule)},
                        {"message_template", iv.message_template}});
      }
      json rec = {{"student_id", id},
                  {"assigned", r.assigned ? json(model.labels[*r.assigned]) : json("Unclassified")},
                  {"interventions", list}};
      out << rec.dump() << '\n';
    }
  };
  if (o.out.empty()) {
    fill(std::cout);
  } else {
    write_atomic(o.out, fill);
    m.output(o.out);
  }
}

void run_evaluate(const Options& o, Manifest& m) {
  EvaluationOptions eo;
  eo.discovery = discovery_params(o, m);
  eo.folds = o.folds;
  if (o.folds == 1) throw UsageError("--folds must be 0 (skip) or >= 2");
  eo.seed = *o.seed;
  eo.sessionizer = sessionizer_params(o, m);
  eo.extract.basis = parse_basis(o.basis);
  eo.cv.jobs = o.jobs;
  const auto weeks = parse_weeks(o.weeks);
  m.seed(eo.seed);
  m.parameters()["weeks"] = weeks;
  m.parameters()["folds"] = eo.folds;
  m.parameters()["basis"] = o.basis;
  m.parameters()["cv"] = {{"inner_folds", eo.cv.inner_folds},
                          {"support_grid", eo.cv.support_grid},
                          {"branching_grid", eo.cv.branching_grid}};

  const auto catalog = catalog_from(m, o.catalog);
  for (int w : weeks) {
    if (w > catalog.weeks()) throw UsageError("--weeks: week " + std::to_string(w) + " is past the last course week");
  }
  const auto log = events_from(m, o.events, o.strict, catalog);
  const auto outcomes = outcomes_from(m, o.outcomes);

  std::vector<std::size_t> truth;
  if (!o.truth.empty()) {
    std::istringstream in(read_input(m, o.truth));
    std::map<std::string, std::size_t> by_id;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string id, idx;
      std::getline(ss, id, ',');
      std::getline(ss, idx, ',');
      by_id[id] = std::stoul(idx);
    }
    for (const auto& oc : outcomes) {
      const auto it = by_id.find(oc.student_id);
      if (it == by_id.end()) throw Error("truth file has no row for " + oc.student_id);
      truth.push_back(it->second);
    }
  }

  std::vector<WeekAnalysis> analyses;
  for (int w : weeks) {
    std::cerr << "week " << w << "...\n";
    analyses.push_back(analyze_week(log.events, catalog, outcomes, w, eo,
                                    truth.empty() ? std::nullopt
                                                  : std::optional<std::span<const std::size_t>>(truth)));
  }
  write_atomic(o.report, [&](std::ostream& out) { write_report(out, analyses, outcomes, catalog.weeks(), eo.seed); });
  m.output(o.report);
  for (const auto& s : report_series(analyses, outcomes, catalog.weeks())) {
    const auto path = series_path(o.report, s.name);
    write_atomic(path, [&](std::ostream& out) { write_series_csv(out, s); });
    m.output(path);
  }
}

void run_plotdata(const Options& o, Manifest& m) {
  std::istringstream in(read_input(m, o.report));
  const std::string csv = extract_series(in, o.figure);
  m.parameters()["figure"] = o.figure;
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_atomic(o.out, [&](std::ostream& out) { out << csv; });
    m.output(o.out);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fuma: clickstream behavior discovery, rule mining and classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;
  app.add_option("--jobs", o.jobs, "Worker threads")->envname("FUMA_JOBS")->check(CLI::Range(1, 1024));
  app.add_option("--manifest", o.manifest, "Manifest path (default: <first output>.manifest.json)");

  auto seed_opt = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Master seed")->required(); };
  auto discovery_opts = [&](CLI::App* sub) {
    sub->add_option("--k-range", o.k_range, "Candidate k, a..b (a single value fixes k)")->capture_default_str();
    sub->add_option("--generations", o.generations, "GA generations")->capture_default_str();
    sub->add_option("--population", o.population, "GA population size")->capture_default_str();
    sub->add_option("--min-support", o.min_support, "Rule support floor, fraction of the cluster")->capture_default_str();
    sub->add_option("--min-improvement", o.improvement, "Confidence gain needed to extend a rule")->capture_default_str();
    sub->add_option("--max-len", o.max_len, "Maximum conditions per rule")->capture_default_str();
    sub->add_option("--max-branching", o.branching, "Extensions kept per rule node")->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort");
  simulate->add_option("--config", o.config, "Cohort config JSON (default: built-in)");
  seed_opt(simulate);
  simulate->add_option("--out", o.out, "Event log TSV")->required();
  simulate->add_option("--outcomes", o.outcomes, "Outcomes CSV");
  simulate->add_option("--truth", o.truth, "Planted archetype CSV");
  simulate->add_option("--catalog", o.catalog, "Video catalog CSV");
  simulate->add_option("--n", o.n_students, "Override the number of students");
  simulate->add_option("--separation", o.separation, "Override the archetype separation multiplier");

  auto* ingest = app.add_subcommand("ingest", "Validate an event log");
  ingest->add_option("--events", o.events, "Event log TSV")->required();
  ingest->add_option("--catalog", o.catalog, "Video catalog CSV")->required();
  ingest->add_flag("--strict", o.strict, "Abort on the first malformed line");
  ingest->add_option("--out", o.out, "Write the cleaned, sorted log here");
  ingest->add_option("--dump-sessions", o.dump_sessions, "Write watch records as JSON lines");
  ingest->add_option("--week", o.week, "Cutoff week for --dump-sessions (default: last)");
  ingest->add_option("--course-start", o.course_start, "Course start, epoch seconds");

  auto* featurize = app.add_subcommand("featurize", "Extract the 21 features per student");
  featurize->add_option("--events", o.events, "Event log TSV")->required();
  featurize->add_option("--catalog", o.catalog, "Video catalog CSV")->required();
  featurize->add_option("--week", o.week, "Cutoff week (cumulative from course start)")->required()->check(CLI::PositiveNumber);
  featurize->add_option("--out", o.out, "Feature CSV")->required();
  featurize->add_option("--course-start", o.course_start, "Course start, epoch seconds");
  featurize->add_option("--basis", o.basis, "Frequency basis: active-hour, watched-video or week")->capture_default_str();
  featurize->add_flag("--strict", o.strict, "Abort on the first malformed line");

  auto* discover_cmd = app.add_subcommand("discover", "Cluster students, label clusters and mine rules");
  discover_cmd->add_option("--features", o.features, "Feature CSV")->required();
  discover_cmd->add_option("--outcomes", o.outcomes, "Outcomes CSV")->required();
  seed_opt(discover_cmd);
  discover_cmd->add_option("--out", o.out, "Model file")->required();
  discover_cmd->add_option("--week", o.week, "Keep students active at this week; dropout is measured from it")
      ->check(CLI::PositiveNumber);
  discovery_opts(discover_cmd);

  auto* rules = app.add_subcommand("rules", "Print a model's rules");
  rules->add_option("--model", o.model, "Model file")->required();
  rules->add_option("--out", o.out, "Write here instead of stdout");

  auto* classify_cmd = app.add_subcommand("classify", "Assign students to clusters");
  classify_cmd->add_option("--model", o.model, "Model file")->required();
  classify_cmd->add_option("--features", o.features, "Feature CSV")->required();
  classify_cmd->add_option("--out", o.out, "Results CSV")->required();
  classify_cmd->add_option("--min-actions", o.min_actions, "Leave students with fewer actions Unclassified");

  auto* intervene = app.add_subcommand("intervene", "Suggest interventions as JSON lines");
  intervene->add_option("--model", o.model, "Model file")->required();
  intervene->add_option("--features", o.features, "Feature CSV")->required();
  intervene->add_option("--out", o.out, "Write here instead of stdout");
  intervene->add_option("--min-actions", o.min_actions, "Leave students with fewer actions Unclassified");

  auto* evaluate = app.add_subcommand("evaluate", "Per-week analysis, statistics and nested cross-validation");
  evaluate->add_option("--events", o.events, "Event log TSV")->required();
  evaluate->add_option("--catalog", o.catalog, "Video catalog CSV")->required();
  evaluate->add_option("--outcomes", o.outcomes, "Outcomes CSV")->required();
  evaluate->add_option("--weeks", o.weeks, "Comma-separated cutoff weeks")->capture_default_str();
  evaluate->add_option("--folds", o.folds, "Outer CV folds (0 skips CV)")->capture_default_str();
  seed_opt(evaluate);
  evaluate->add_option("--report", o.report, "Report text file")->required();
  evaluate->add_option("--truth", o.truth, "Planted labels CSV, scored when given");
  evaluate->add_option("--course-start", o.course_start, "Course start, epoch seconds");
  evaluate->add_option("--basis", o.basis, "Frequency basis")->capture_default_str();
  evaluate->add_flag("--strict", o.strict, "Abort on the first malformed line");
  discovery_opts(evaluate);

  auto* plotdata = app.add_subcommand("plotdata", "Extract a figure's data series from a report");
  plotdata->add_option("--report", o.report, "Report text file")->required();
  plotdata->add_option("--figure", o.figure,
                       "active-per-week, cluster-outcomes, discriminative-features or cross-validation")
      ->required();
  plotdata->add_option("--out", o.out, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::vector<std::pair<CLI::App*, void (*)(const Options&, Manifest&)>> table = {
      {simulate, run_simulate},   {ingest, run_ingest},     {featurize, run_featurize},
      {discover_cmd, run_discover}, {rules, run_rules},     {classify_cmd, run_classify},
      {intervene, run_intervene}, {evaluate, run_evaluate}, {plotdata, run_plotdata}};
  for (const auto& [sub, fn] : table) {
    if (!sub->parsed()) continue;
    Manifest manifest(sub->get_name(), argc, argv);
    manifest.parameters()["jobs"] = o.jobs;
    try {
      fn(o, manifest);
      manifest.write(o.manifest);
      return 0;
    } catch (const UsageError& e) {
      std::cerr << "fuma " << sub->get_name() << ": " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "fuma " << sub->get_name() << ": " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}
