#include "oxgen/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "oxgen/error.hpp"
#include "oxgen/fileio.hpp"
#include "oxgen/parallel.hpp"

namespace oxgen {

using nlohmann::json;

double MatchResult::total_distance() const {
  double d = 0.0;
  for (const auto& p : tp_pairs) d += p.distance;
  return d;
}

namespace {

double distance(const PointLabel& g, const Detection& d) {
  return std::hypot(d.x - g.x, d.y - g.y);
}

/// Score descending, then x ascending, then y ascending, then input order.
std::vector<std::size_t> detection_order(std::span<const Detection> det) {
  std::vector<std::size_t> order(det.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (det[a].score != det[b].score) return det[a].score > det[b].score;
    if (det[a].x != det[b].x) return det[a].x < det[b].x;
    return det[a].y < det[b].y;
  });
  return order;
}

MatchResult finish(std::vector<MatchPair> pairs, std::size_t n_gt, std::size_t n_det) {
  MatchResult r;
  std::vector<char> gt_used(n_gt, 0);
  std::vector<char> det_used(n_det, 0);
  for (const auto& p : pairs) {
    gt_used[p.ground_truth] = 1;
    det_used[p.detection] = 1;
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.detection < b.detection; });
  r.tp_pairs = std::move(pairs);
  for (std::size_t i = 0; i < n_det; ++i)
    if (!det_used[i]) r.fp.push_back(i);
  for (std::size_t i = 0; i < n_gt; ++i)
    if (!gt_used[i]) r.fn.push_back(i);
  return r;
}

MatchResult match_greedy(std::span<const PointLabel> gt, std::span<const Detection> det,
                         double radius) {
  std::vector<char> taken(gt.size(), 0);
  std::vector<MatchPair> pairs;
  for (std::size_t d : detection_order(det)) {
    std::size_t best = gt.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      const double dist = distance(gt[g], det[d]);
      if (dist <= radius && dist < best_dist) {
        best = g;
        best_dist = dist;
      }
    }
    if (best < gt.size()) {
      taken[best] = 1;
      pairs.push_back({d, best, best_dist});
    }
  }
  return finish(std::move(pairs), gt.size(), det.size());
}

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// O(rows^2 * cols) potentials method. Returns the column for each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const std::size_t m = n == 0 ? 0 : cost[0].size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

MatchResult match_optimal(std::span<const PointLabel> gt, std::span<const Detection> det,
                          double radius) {
  if (gt.empty() || det.empty()) return finish({}, gt.size(), det.size());
  const bool gt_rows = gt.size() <= det.size();
  const std::size_t rows = gt_rows ? gt.size() : det.size();
  const std::size_t cols = gt_rows ? det.size() : gt.size();
  // Each admissible pair earns -bonus, with bonus above any achievable
  // distance total, so cardinality dominates and distance breaks ties.
  const double bonus = radius * static_cast<double>(rows) + 1.0;
  std::vector<std::vector<double>> cost(rows, std::vector<double>(cols, 0.0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t g = gt_rows ? r : c;
      const std::size_t d = gt_rows ? c : r;
      const double dist = distance(gt[g], det[d]);
      if (dist <= radius) cost[r][c] = dist - bonus;
    }
  const auto assignment = hungarian(cost);
  std::vector<MatchPair> pairs;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = assignment[r];
    const std::size_t g = gt_rows ? r : c;
    const std::size_t d = gt_rows ? c : r;
    const double dist = distance(gt[g], det[d]);
    if (dist <= radius) pairs.push_back({d, g, dist});
  }
  return finish(std::move(pairs), gt.size(), det.size());
}

}  // namespace

MatchResult match_points(std::span<const PointLabel> gt, std::span<const Detection> det,
                         const MatchConfig& cfg) {
  if (!(cfg.radius_px > 0.0)) throw ConfigError("match radius must be positive");
  return cfg.mode == MatchMode::greedy ? match_greedy(gt, det, cfg.radius_px)
                                       : match_optimal(gt, det, cfg.radius_px);
}

PrecisionRecall compute_prf(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw InputError("counts must be non-negative");
  PrecisionRecall r;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

namespace {

struct PrPoint {
  double recall;
  double precision;
};

double area_under_envelope(const std::vector<PrPoint>& points) {
  std::vector<double> rec{0.0};
  std::vector<double> prec{0.0};
  for (const auto& p : points) {
    rec.push_back(p.recall);
    prec.push_back(p.precision);
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i)
    if (rec[i] != rec[i - 1]) ap += (rec[i] - rec[i - 1]) * prec[i];
  return ap;
}

}  // namespace

double compute_ap(std::span<const PatchEval> patches, const MatchConfig& cfg) {
  std::size_t total_gt = 0;
  for (const auto& p : patches) total_gt += p.gt.size();
  if (total_gt == 0) throw InputError("AP undefined: no ground truth");

  std::vector<PrPoint> points;
  if (cfg.mode == MatchMode::greedy) {
    // Greedy matching of a score-prefix equals the prefix of the full greedy
    // run, so one pass per patch yields every threshold's outcome.
    struct Flag {
      double score;
      bool tp;
    };
    std::vector<Flag> flags;
    for (const auto& p : patches) {
      const auto res = match_points(p.gt, p.detections, cfg);
      std::vector<char> is_tp(p.detections.size(), 0);
      for (const auto& pair : res.tp_pairs) is_tp[pair.detection] = 1;
      for (std::size_t i = 0; i < p.detections.size(); ++i)
        flags.push_back({p.detections[i].score, is_tp[i] != 0});
    }
    std::stable_sort(flags.begin(), flags.end(),
                     [](const Flag& a, const Flag& b) { return a.score > b.score; });
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      (flags[i].tp ? tp : fp) += 1;
      if (i + 1 == flags.size() || flags[i + 1].score != flags[i].score)
        points.push_back({static_cast<double>(tp) / static_cast<double>(total_gt),
                          static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }
  } else {
    std::vector<double> thresholds;
    for (const auto& p : patches)
      for (const auto& d : p.detections) thresholds.push_back(d.score);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    for (double t : thresholds) {
      std::int64_t tp = 0;
      std::int64_t n_det = 0;
      for (const auto& p : patches) {
        std::vector<Detection> kept;
        for (const auto& d : p.detections)
          if (d.score >= t) kept.push_back(d);
        tp += static_cast<std::int64_t>(match_points(p.gt, kept, cfg).tp());
        n_det += static_cast<std::int64_t>(kept.size());
      }
      points.push_back({static_cast<double>(tp) / static_cast<double>(total_gt),
                        static_cast<double>(tp) / static_cast<double>(n_det)});
    }
  }
  return area_under_envelope(points);
}

CountMetrics count_metrics(std::span<const CountPair> per_patch) {
  if (per_patch.empty()) throw InputError("count metrics need at least one patch");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (const auto& p : per_patch) {
    const double e = p.predicted_count - p.true_count;
    abs_sum += std::fabs(e);
    sq_sum += e * e;
  }
  const double n = static_cast<double>(per_patch.size());
  CountMetrics m;
  m.mae = abs_sum / n;
  m.mse = sq_sum / n;
  m.rmse = std::sqrt(m.mse);
  return m;
}

DetectionStats detection_stats(std::span<const PatchCounts> per_patch, std::int64_t n_patches) {
  if (n_patches < 1) throw InputError("detection statistics need at least one patch");
  DetectionStats s;
  s.n_patches = n_patches;
  for (const auto& c : per_patch) {
    s.tp += c.tp;
    s.fp += c.fp;
    s.fn += c.fn;
  }
  const double n = static_cast<double>(n_patches);
  s.avg_tp = static_cast<double>(s.tp) / n;
  s.avg_fp = static_cast<double>(s.fp) / n;
  s.avg_fn = static_cast<double>(s.fn) / n;
  return s;
}

Evaluation evaluate(std::span<const PatchEval> patches, const EvaluationConfig& cfg,
                    std::string model, std::string fold) {
  std::vector<PatchEval> scoped;
  for (const auto& p : patches)
    if (cfg.scope == PatchScope::all || !p.gt.empty()) scoped.push_back(p);
  if (scoped.empty()) throw InputError("no patches to evaluate");

  Evaluation ev;
  ev.per_patch.resize(scoped.size());
  std::vector<CountPair> counts(scoped.size());
  parallel_for(scoped.size(), cfg.jobs, [&](std::size_t i) {
    const auto& p = scoped[i];
    std::vector<Detection> kept;
    for (const auto& d : p.detections)
      if (d.score >= cfg.score_threshold) kept.push_back(d);
    const auto res = match_points(p.gt, kept, cfg.match);
    OXGEN_ENSURE(res.tp() + res.fn.size() == p.gt.size(), "tp + fn != |gt| for " + p.patch_id);
    OXGEN_ENSURE(res.tp() + res.fp.size() == kept.size(), "tp + fp != |det| for " + p.patch_id);
    ev.per_patch[i] = {static_cast<std::int64_t>(res.tp()), static_cast<std::int64_t>(res.fp.size()),
                       static_cast<std::int64_t>(res.fn.size())};
    counts[i] = {static_cast<double>(p.gt.size()), static_cast<double>(kept.size())};
  });
  for (const auto& p : scoped) ev.patch_ids.push_back(p.patch_id);

  ev.stats = detection_stats(ev.per_patch, static_cast<std::int64_t>(scoped.size()));
  const auto prf = compute_prf(ev.stats.tp, ev.stats.fp, ev.stats.fn);
  const auto cm = count_metrics(counts);
  ev.metrics.model = std::move(model);
  ev.metrics.fold = std::move(fold);
  ev.metrics.ap = compute_ap(scoped, cfg.match);
  ev.metrics.mae = cm.mae;
  ev.metrics.mse = cm.mse;
  ev.metrics.rmse = cm.rmse;
  ev.metrics.precision = prf.precision;
  ev.metrics.recall = prf.recall;
  ev.metrics.f1 = prf.f1;
  return ev;
}

std::vector<Detection> parse_detections_jsonl(std::string_view text) {
  std::vector<Detection> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1);
    if (lines[i].find_first_not_of(" \t") == std::string_view::npos) continue;
    json obj;
    try {
      obj = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw ParseError(where, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(where, "expected an object");
    auto field = [&](const char* key) -> const json& {
      auto it = obj.find(key);
      if (it == obj.end()) throw ParseError(where + "." + key, "missing");
      return *it;
    };
    Detection d;
    const auto& pid = field("patch_id");
    if (!pid.is_string()) throw ParseError(where + ".patch_id", "expected a string");
    d.patch_id = pid.get<std::string>();
    for (auto [key, target] : {std::pair{"x", &d.x}, std::pair{"y", &d.y}, std::pair{"score", &d.score}}) {
      const auto& v = field(key);
      if (!v.is_number()) throw ParseError(where + "." + key, "expected a number");
      *target = v.get<double>();
    }
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw ParseError(where + ".score", "must lie in [0, 1]");
    out.push_back(std::move(d));
  }
  return out;
}

std::string write_detections_jsonl(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    out += json{{"patch_id", d.patch_id}, {"x", d.x}, {"y", d.y}, {"score", d.score}}.dump();
    out += '\n';
  }
  return out;
}

namespace {

std::string comment_line(const std::string& comment) {
  return comment.empty() ? std::string() : "# " + comment + "\n";
}

}  // namespace

std::string write_metrics_csv(std::span<const MetricsRow> rows, const std::string& comment) {
  std::string out = comment_line(comment);
  out += kMetricsCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += csv_escape(r.model) + ',' + csv_escape(r.fold);
    for (double v : {r.ap, r.mae, r.mse, r.rmse, r.precision, r.recall, r.f1})
      out += ',' + format_fixed(v, 6);
    out += '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  std::vector<MetricsRow> rows;
  bool header_seen = false;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1);
    const auto line = lines[i];
    if (line.empty() || line.starts_with('#')) continue;
    if (!header_seen) {
      if (line != kMetricsCsvHeader)
        throw ParseError(where, "expected header '" + std::string(kMetricsCsvHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto f = split_csv_record(line);
    if (f.size() != 9) throw ParseError(where, "expected 9 fields");
    MetricsRow r;
    r.model = f[0];
    r.fold = f[1];
    double* targets[] = {&r.ap, &r.mae, &r.mse, &r.rmse, &r.precision, &r.recall, &r.f1};
    for (int k = 0; k < 7; ++k)
      if (!parse_real(f[k + 2], *targets[k])) throw ParseError(where, "non-numeric metric");
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError("line 1", "missing metrics header");
  return rows;
}

std::string write_detection_stats_csv(std::span<const DetectionStatsRow> rows,
                                      const std::string& comment) {
  auto total = [](double v) { return format_fixed(v, v == std::floor(v) ? 0 : 2); };
  std::string out = comment_line(comment);
  out += kDetectionStatsCsvHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += csv_escape(r.model) + ',' + std::to_string(r.n_patches) + ',' + total(r.tp) + ',' +
           total(r.fp) + ',' + total(r.fn) + ',' + format_fixed(r.avg_tp, 2) + ',' +
           format_fixed(r.avg_fp, 2) + ',' + format_fixed(r.avg_fn, 2) + '\n';
  }
  return out;
}

}  // namespace oxgen
