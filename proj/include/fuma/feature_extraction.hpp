#pragma once

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fuma/error.hpp"
#include "fuma/event_ingest.hpp"
#include "fuma/features.hpp"
#include "fuma/matrix.hpp"
#include "fuma/sessionizer.hpp"

namespace fuma {

/// The 21 features for one student, cumulative to a week cutoff.
struct FeatureVector {
  std::array<double, kNumFeatures> values{};

  double& operator[](Feature f) { return values[index_of(f)]; }
  double operator[](Feature f) const { return values[index_of(f)]; }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  std::span<const double> span() const { return values; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Denominator for the action-frequency features.
enum class FrequencyBasis { PerActiveHour, PerWatchedVideo, PerWeek };

struct ExtractOptions {
  FrequencyBasis basis = FrequencyBasis::PerActiveHour;
};

/// Mean of a sample; 0 for an empty sample.
inline double sample_mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Sample (n-1) standard deviation; 0 for fewer than two items.
inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline FeatureVector extract_features(std::span<const WatchRecord> records, const VideoCatalog& catalog,
                                      int week_cutoff, const ExtractOptions& options = {}) {
  FeatureVector fv;
  std::array<double, 6> action_totals{};
  double active_seconds = 0.0;
  double n_seek_back = 0.0;
  double n_seek_fwd = 0.0;
  std::vector<double> pauses;
  std::vector<double> seeks;
  std::vector<double> rewatches;
  std::vector<double> speedups;
  double n_rewatched = 0.0;
  double n_interrupted = 0.0;

  for (const auto& rec : records) {
    for (const auto& s : rec.sessions) {
      for (std::size_t a = 0; a < 6; ++a) action_totals[a] += static_cast<double>(s.action_counts[a]);
      active_seconds += s.end_wall - s.start_wall;
      pauses.insert(pauses.end(), s.pauses.begin(), s.pauses.end());
      for (double len : s.seeks) {
        seeks.push_back(len);
        (len >= 0.0 ? n_seek_fwd : n_seek_back) += 1.0;
      }
    }
    if (!rec.watched) continue;
    rewatches.push_back(static_cast<double>(rec.rewatch_count));
    speedups.push_back(rec.speedup_time());
    if (rec.rewatch_count >= 1) n_rewatched += 1.0;
    if (rec.interrupted) n_interrupted += 1.0;
  }

  const double n_watched = static_cast<double>(rewatches.size());
  double denom = 0.0;
  switch (options.basis) {
    case FrequencyBasis::PerActiveHour: denom = active_seconds / 3600.0; break;
    case FrequencyBasis::PerWatchedVideo: denom = n_watched; break;
    case FrequencyBasis::PerWeek: denom = static_cast<double>(std::max(week_cutoff, 0)); break;
  }
  auto freq = [denom](double count) { return denom > 0.0 ? count / denom : 0.0; };
  auto count = [&](Action a) { return action_totals[static_cast<std::size_t>(a)]; };

  double all = 0.0;
  for (double c : action_totals) all += c;

  fv[Feature::FreqPlay] = freq(count(Action::Play));
  fv[Feature::FreqPause] = freq(count(Action::Pause));
  fv[Feature::FreqSeekBack] = freq(n_seek_back);
  fv[Feature::FreqSeekFwd] = freq(n_seek_fwd);
  fv[Feature::FreqSpeedChange] = freq(count(Action::SpeedChange));
  fv[Feature::FreqStop] = freq(count(Action::Stop));
  fv[Feature::FreqAll] = freq(all);
  fv[Feature::CountAll] = all;
  fv[Feature::NVideosWatched] = n_watched;
  fv[Feature::PropRewatched] = n_watched > 0 ? n_rewatched / n_watched : 0.0;
  fv[Feature::RewatchMean] = sample_mean(rewatches);
  fv[Feature::RewatchSd] = sample_sd(rewatches);
  fv[Feature::PropInterrupted] = n_watched > 0 ? n_interrupted / n_watched : 0.0;

  // Week-w coverage: mean coverage over the catalog videos assigned to week w.
  std::vector<double> weekly;
  const int last_week = std::min(week_cutoff, catalog.weeks());
  if (!records.empty()) {
    for (int w = 1; w <= last_week; ++w) {
      const auto videos = catalog.videos_in_week(w);
      double total = 0.0;
      for (const auto& id : videos) {
        for (const auto& rec : records) {
          if (rec.video_id == id) {
            total += rec.coverage_fraction;
            break;
          }
        }
      }
      weekly.push_back(videos.empty() ? 0.0 : total / static_cast<double>(videos.size()));
    }
  }
  fv[Feature::WeeklyCoverageMean] = sample_mean(weekly);
  fv[Feature::WeeklyCoverageSd] = sample_sd(weekly);
  fv[Feature::PauseDurMean] = sample_mean(pauses);
  fv[Feature::PauseDurSd] = sample_sd(pauses);
  fv[Feature::SeekLenMean] = sample_mean(seeks);
  fv[Feature::SeekLenSd] = sample_sd(seeks);
  fv[Feature::SpeedupMean] = sample_mean(speedups);
  fv[Feature::SpeedupSd] = sample_sd(speedups);
  return fv;
}

/// Per-feature mean and sample SD fitted on a training matrix.
struct NormalizationParams {
  std::vector<double> mean;
  std::vector<double> sd;

  std::size_t size() const noexcept { return mean.size(); }
  bool is_constant(std::size_t j) const { return sd[j] == 0.0; }

  friend bool operator==(const NormalizationParams&, const NormalizationParams&) = default;
};

inline NormalizationParams fit_normalizer(const Matrix& training) {
  if (training.rows() < 2) throw InvalidArgument("fit_normalizer: need at least 2 rows");
  NormalizationParams p;
  p.mean.resize(training.cols());
  p.sd.resize(training.cols());
  for (std::size_t j = 0; j < training.cols(); ++j) {
    const auto col = training.column(j);
    p.mean[j] = sample_mean(col);
    p.sd[j] = sample_sd(col);
  }
  return p;
}

inline double normalize_value(double x, const NormalizationParams& p, std::size_t j) {
  return p.sd[j] > 0.0 ? (x - p.mean[j]) / p.sd[j] : 0.0;
}

inline Matrix apply_normalizer(const Matrix& m, const NormalizationParams& p) {
  if (m.cols() != p.size()) throw InvalidArgument("apply_normalizer: column count mismatch");
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = normalize_value(m(i, j), p, j);
  }
  return out;
}

inline std::vector<double> apply_normalizer(std::span<const double> row, const NormalizationParams& p) {
  if (row.size() != p.size()) throw InvalidArgument("apply_normalizer: column count mismatch");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = normalize_value(row[j], p, j);
  return out;
}

/// Student ids plus their raw feature rows (canonical column order).
struct FeatureTable {
  std::vector<std::string> student_ids;
  Matrix values{0, kNumFeatures};

  FeatureVector vector_at(std::size_t i) const {
    FeatureVector fv;
    const auto r = values.row(i);
    std::copy(r.begin(), r.end(), fv.values.begin());
    return fv;
  }
};

/// Featurizes every student appearing in `events` (sorted per parse_event_log).
inline FeatureTable extract_feature_table(const std::vector<VideoEvent>& events, const VideoCatalog& catalog,
                                          int week_cutoff, const SessionizerParams& sp = {},
                                          const ExtractOptions& eo = {}) {
  FeatureTable table;
  table.values = Matrix(0, kNumFeatures);
  std::size_t begin = 0;
  while (begin < events.size()) {
    std::size_t end = begin;
    while (end < events.size() && events[end].student_id == events[begin].student_id) ++end;
    const auto records = build_student_records(std::span(events).subspan(begin, end - begin), catalog,
                                               week_cutoff, sp);
    std::vector<WatchRecord> flat;
    flat.reserve(records.size());
    for (const auto& [video, rec] : records) flat.push_back(rec);
    const auto fv = extract_features(flat, catalog, week_cutoff, eo);
    table.student_ids.push_back(events[begin].student_id);
    table.values.append_row(fv.span());
    begin = end;
  }
  return table;
}

inline void write_feature_table(std::ostream& out, const FeatureTable& table) {
  out << "student_id";
  for (auto name : kFeatureNames) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < table.student_ids.size(); ++i) {
    out << table.student_ids[i];
    for (double v : table.values.row(i)) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

inline FeatureTable read_feature_table(std::istream& in) {
  FeatureTable table;
  table.values = Matrix(0, kNumFeatures);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::strip_cr(line);
    const auto fields = detail::split(text, ',');
    if (line_no == 1) {
      if (fields.size() != kNumFeatures + 1 || fields[0] != "student_id") {
        throw ParseError(line_no, "feature header must be student_id plus the 21 feature names");
      }
      for (std::size_t j = 0; j < kNumFeatures; ++j) {
        if (fields[j + 1] != kFeatureNames[j]) {
          throw ParseError(line_no, "unexpected feature column " + std::string(fields[j + 1]));
        }
      }
      continue;
    }
    if (text.empty()) continue;
    if (fields.size() != kNumFeatures + 1) throw ParseError(line_no, "field count");
    std::array<double, kNumFeatures> row{};
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const auto v = detail::parse_double(fields[j + 1]);
      if (!v) throw ParseError(line_no, "bad number in column " + std::string(kFeatureNames[j]));
      row[j] = *v;
    }
    table.student_ids.emplace_back(fields[0]);
    table.values.append_row(row);
  }
  return table;
}

}  // namespace fuma
