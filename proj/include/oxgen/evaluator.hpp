#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oxgen/annotations.hpp"

namespace oxgen {

struct Detection {
  std::string patch_id;
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
};

enum class MatchMode { greedy, optimal };

struct MatchConfig {
  double radius_px = 30.0;
  MatchMode mode = MatchMode::greedy;
};

struct MatchPair {
  std::size_t detection;
  std::size_t ground_truth;
  double distance;
};

/// Indices refer to the spans passed to match_points.
struct MatchResult {
  std::vector<MatchPair> tp_pairs;
  std::vector<std::size_t> fp;  // unmatched detections
  std::vector<std::size_t> fn;  // unmatched ground truths

  std::size_t tp() const { return tp_pairs.size(); }
  double total_distance() const;
};

/// Greedy: detections by descending score (ties: x asc, y asc), each taking
/// its nearest unmatched ground truth within the radius. Optimal:
/// maximum-cardinality, minimum-total-distance assignment.
MatchResult match_points(std::span<const PointLabel> gt, std::span<const Detection> det,
                         const MatchConfig& cfg);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators yield 0.
PrecisionRecall compute_prf(std::int64_t tp, std::int64_t fp, std::int64_t fn);
/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

struct PatchEval {
  std::string patch_id;
  std::vector<PointLabel> gt;
  std::vector<Detection> detections;
};

/// All-point interpolated area under the precision envelope of the
/// score-threshold sweep. Throws InputError when there is no ground truth.
double compute_ap(std::span<const PatchEval> patches, const MatchConfig& cfg);

struct CountMetrics {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
};

struct CountPair {
  double true_count = 0.0;
  double predicted_count = 0.0;
};

/// Throws InputError for an empty list.
CountMetrics count_metrics(std::span<const CountPair> per_patch);

struct PatchCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct DetectionStats {
  std::int64_t n_patches = 0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double avg_tp = 0.0;
  double avg_fp = 0.0;
  double avg_fn = 0.0;
};

/// Sums the per-patch counts; averages are totals / n_patches. Throws
/// InputError for n_patches < 1.
DetectionStats detection_stats(std::span<const PatchCounts> per_patch, std::int64_t n_patches);

struct MetricsRow {
  std::string model;
  std::string fold;
  double ap = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class PatchScope { nonempty_only, all };

struct EvaluationConfig {
  MatchConfig match;
  double score_threshold = 0.0;  // operating point for P/R/F1 and counts
  PatchScope scope = PatchScope::nonempty_only;
  unsigned jobs = 1;
};

struct Evaluation {
  MetricsRow metrics;
  DetectionStats stats;
  std::vector<PatchCounts> per_patch;
  std::vector<std::string> patch_ids;
};

Evaluation evaluate(std::span<const PatchEval> patches, const EvaluationConfig& cfg,
                    std::string model, std::string fold);

// Interchange formats.
inline constexpr std::string_view kMetricsCsvHeader =
    "model,fold,ap,mae,mse,rmse,precision,recall,f1";
inline constexpr std::string_view kDetectionStatsCsvHeader =
    "model,patches,tp_total,fp_total,fn_total,tp_avg,fp_avg,fn_avg";

/// One JSON object per line: {"patch_id", "x", "y", "score"}.
std::vector<Detection> parse_detections_jsonl(std::string_view text);
std::string write_detections_jsonl(std::span<const Detection> dets);

std::string write_metrics_csv(std::span<const MetricsRow> rows, const std::string& comment);
/// Lines beginning with '#' are skipped.
std::vector<MetricsRow> parse_metrics_csv(std::string_view text);

struct DetectionStatsRow {
  std::string model;
  std::int64_t n_patches = 0;
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  double avg_tp = 0.0;
  double avg_fp = 0.0;
  double avg_fn = 0.0;
};
std::string write_detection_stats_csv(std::span<const DetectionStatsRow> rows,
                                      const std::string& comment);

}  // namespace oxgen
