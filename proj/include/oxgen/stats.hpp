#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace oxgen {

struct TestResult {
  double statistic = 0.0;
  double p = 1.0;
};

struct Group {
  std::string label;
  std::vector<double> values;
};

/// Groups of observations of one metric, e.g. five fold F1 values per model.
struct GroupedSamples {
  std::vector<Group> groups;
  std::string metric_name;

  /// Throws InputError unless there are >= 2 groups of >= 3 values.
  void validate() const;
};

/// Shapiro-Wilk W with Royston's normal approximation for p. Requires
/// 3 <= n <= 5000 and a non-constant sample (InputError otherwise).
TestResult shapiro_wilk(std::span<const double> sample);

enum class LeveneCenter { mean, median };

/// One-way ANOVA on absolute deviations from each group's centre.
/// All-zero deviations give F = 0, p = 1.
TestResult levene(std::span<const std::vector<double>> groups,
                  LeveneCenter center = LeveneCenter::mean);

/// Throws InputError when the pooled within-group sum of squares is zero.
TestResult anova_oneway(std::span<const std::vector<double>> groups);

/// H with mid-ranks and tie correction; p from chi-square(k - 1).
/// Throws InputError when every observation is tied.
TestResult kruskal_wallis(std::span<const std::vector<double>> groups);

struct PairwiseResult {
  std::size_t a = 0;
  std::size_t b = 0;
  double statistic = 0.0;  // Tukey q or Dunn z
  double p = 1.0;          // reported p (adjusted for Dunn when requested)
  bool significant = false;
};

std::vector<PairwiseResult> tukey_hsd(std::span<const std::vector<double>> groups,
                                      double alpha = 0.05);

enum class DunnAdjustment { none, bonferroni };

std::vector<PairwiseResult> dunn(std::span<const std::vector<double>> groups,
                                 DunnAdjustment adjustment = DunnAdjustment::bonferroni,
                                 double alpha = 0.05);

enum class Omnibus { anova, kruskal_wallis };

struct StatOptions {
  double alpha = 0.05;
  LeveneCenter levene_center = LeveneCenter::mean;
  DunnAdjustment dunn_adjustment = DunnAdjustment::bonferroni;
};

struct StatReport {
  std::string metric_name;
  std::vector<std::string> labels;
  double alpha = 0.05;
  std::vector<TestResult> normality;  // one per group
  TestResult levene;
  Omnibus omnibus = Omnibus::anova;
  TestResult omnibus_result;
  std::optional<std::vector<PairwiseResult>> posthoc;
  StatOptions options;
};

/// ANOVA + Tukey when every group passes Shapiro-Wilk and Levene passes,
/// Kruskal-Wallis + Dunn otherwise. Post-hoc runs only when the omnibus
/// p is below alpha.
StatReport compare_models(const GroupedSamples& samples, const StatOptions& options = {});

/// The path the decision rule selects for the recorded p-values.
Omnibus select_omnibus(std::span<const TestResult> normality, const TestResult& levene,
                       double alpha);

std::string_view to_string(Omnibus o);
nlohmann::json stat_report_to_json(const StatReport& report);

}  // namespace oxgen
