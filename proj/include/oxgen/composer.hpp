#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oxgen/annotations.hpp"

namespace oxgen {

enum class Schedule { BL, ZS1, ZS2, ZS3, ZS4, ZS5, FS1, FS2, FS3, FS4, FS5, custom };

struct ScheduleCounts {
  int real = 0;
  int synthetic = 0;
  int total() const { return real + synthetic; }
  friend bool operator==(const ScheduleCounts&, const ScheduleCounts&) = default;
};

inline constexpr std::array<Schedule, 11> kNamedSchedules = {
    Schedule::BL,  Schedule::ZS1, Schedule::ZS2, Schedule::ZS3,
    Schedule::ZS4, Schedule::ZS5, Schedule::FS1, Schedule::FS2,
    Schedule::FS3, Schedule::FS4, Schedule::FS5};

std::string_view to_string(Schedule s);
std::optional<Schedule> parse_schedule(std::string_view s);
/// Real/synthetic image counts of a named schedule. Throws ConfigError
/// for Schedule::custom.
ScheduleCounts schedule_counts(Schedule s);

struct DatasetManifest {
  std::string name;
  Schedule schedule = Schedule::custom;
  std::uint64_t seed = 0;
  std::vector<SurveyImage> real_images;
  std::vector<SurveyImage> synthetic_images;

  std::size_t size() const { return real_images.size() + synthetic_images.size(); }
  std::vector<std::string> image_ids() const;
};

struct ComposeOptions {
  /// Required for Schedule::custom, ignored otherwise.
  std::optional<ScheduleCounts> custom_counts;
  /// Take whatever the pools hold instead of failing on a shortfall.
  bool allow_short_pool = false;
};

/// Seeded shuffle of each pool, then the first N of each. Throws InputError
/// naming the shortfall when a pool is too small.
DatasetManifest compose(Schedule schedule, std::span<const SurveyImage> real_pool,
                        std::span<const SurveyImage> synthetic_pool, std::uint64_t seed,
                        const ComposeOptions& options = {});

/// round-half-up(ratio * n), the train-side size of a split.
std::size_t train_size(std::size_t n, double ratio);

/// Image-level split stratified by kind. Throws InputError for n < 2 and
/// ConfigError for a ratio outside (0, 1) or one leaving a side empty.
std::pair<DatasetManifest, DatasetManifest> split_train_val(const DatasetManifest& manifest,
                                                            double ratio, std::uint64_t seed);

struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;  // image id -> fold

  std::vector<std::size_t> fold_sizes() const;
};

/// Seeded shuffle then round-robin assignment. Throws InputError for n < k.
FoldPlan plan_folds(const DatasetManifest& manifest, int k, std::uint64_t seed);

/// (train, validation) manifests for the given fold serving as validation.
std::pair<DatasetManifest, DatasetManifest> fold_split(const DatasetManifest& manifest,
                                                       const FoldPlan& plan, int fold);

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json fold_plan_to_json(const FoldPlan& plan, const std::string& manifest_name);
FoldPlan fold_plan_from_json(const nlohmann::json& j);

}  // namespace oxgen
