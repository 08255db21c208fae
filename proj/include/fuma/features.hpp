#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace fuma {

/// The 21 video-watching features, in canonical (column) order.
enum class Feature : std::size_t {
  FreqPlay,
  FreqPause,
  FreqSeekBack,
  FreqSeekFwd,
  FreqSpeedChange,
  FreqStop,
  FreqAll,
  CountAll,
  NVideosWatched,
  PropRewatched,
  RewatchMean,
  RewatchSd,
  PropInterrupted,
  WeeklyCoverageMean,
  WeeklyCoverageSd,
  PauseDurMean,
  PauseDurSd,
  SeekLenMean,
  SeekLenSd,
  SpeedupMean,
  SpeedupSd,
};

inline constexpr std::size_t kNumFeatures = 21;

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "freq_play",          "freq_pause",         "freq_seek_back", "freq_seek_fwd",
    "freq_speed_change",  "freq_stop",          "freq_all",       "count_all",
    "n_videos_watched",   "prop_rewatched",     "rewatch_mean",   "rewatch_sd",
    "prop_interrupted",   "weekly_coverage_mean", "weekly_coverage_sd", "pause_dur_mean",
    "pause_dur_sd",       "seek_len_mean",      "seek_len_sd",    "speedup_mean",
    "speedup_sd",
};

constexpr std::size_t index_of(Feature f) noexcept { return static_cast<std::size_t>(f); }

constexpr std::string_view feature_name(Feature f) noexcept { return kFeatureNames[index_of(f)]; }
constexpr std::string_view feature_name(std::size_t i) noexcept { return kFeatureNames[i]; }

inline std::optional<std::size_t> feature_index(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  return std::nullopt;
}

}  // namespace fuma
