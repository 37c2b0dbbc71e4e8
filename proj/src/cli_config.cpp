#include <charconv>
#include <cstdlib>
#include <initializer_list>
#include <set>

#include "oxgen/cli.hpp"
#include "oxgen/error.hpp"

namespace oxgen {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

void read_range(const json& obj, const char* key, Range& r, const std::string& where) {
  if (!obj.contains(key)) return;
  std::array<double, 2> v{};
  read(obj, key, v, where);
  r = {v[0], v[1]};
}

// Shortest decimal form of the float, so 0.485f prints as 0.485.
json float_json(float f) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, f);
  return std::strtod(std::string(buf, res.ptr).c_str(), nullptr);
}

json floats_json(const std::array<float, 3>& v) {
  return json::array({float_json(v[0]), float_json(v[1]), float_json(v[2])});
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

MatchMode parse_match_mode(const std::string& s) {
  if (s == "greedy") return MatchMode::greedy;
  if (s == "optimal") return MatchMode::optimal;
  throw ConfigError("match mode must be greedy or optimal, got '" + s + "'");
}

PatchScope parse_scope(const std::string& s) {
  if (s == "nonempty") return PatchScope::nonempty_only;
  if (s == "all") return PatchScope::all;
  throw ConfigError("patch scope must be nonempty or all, got '" + s + "'");
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  check_keys(j,
             {"seed", "schedule", "jobs", "resize", "tile", "augment", "match", "evaluation",
              "stats", "split", "folds", "training", "gen", "schema_version"},
             "config");
  read(j, "seed", c.seed, "config");
  read(j, "schedule", c.schedule, "config");
  read(j, "jobs", c.jobs, "config");
  if (j.contains("resize")) {
    const auto& s = j["resize"];
    check_keys(s, {"target_length_px"}, "config.resize");
    read(s, "target_length_px", c.target_length_px, "config.resize");
  }
  if (j.contains("tile")) {
    const auto& s = j["tile"];
    check_keys(s, {"patch_w", "patch_h", "overlap", "retention_fraction", "keep_empty"},
               "config.tile");
    read(s, "patch_w", c.tile.patch_w, "config.tile");
    read(s, "patch_h", c.tile.patch_h, "config.tile");
    read(s, "overlap", c.tile.overlap, "config.tile");
    read(s, "retention_fraction", c.tile.retention_fraction, "config.tile");
    read(s, "keep_empty", c.keep_empty_patches, "config.tile");
  }
  if (j.contains("augment")) {
    const auto& s = j["augment"];
    const std::string w = "config.augment";
    check_keys(s,
               {"probability", "brightness", "contrast", "hue_shift", "sat_shift", "val_shift",
                "scale_limit", "blur", "pad", "crop", "mean", "stddev"},
               w);
    auto& a = c.augment;
    read(s, "probability", a.probability, w);
    read_range(s, "brightness", a.brightness, w);
    read_range(s, "contrast", a.contrast, w);
    read_range(s, "hue_shift", a.hue_shift, w);
    read_range(s, "sat_shift", a.sat_shift, w);
    read_range(s, "val_shift", a.val_shift, w);
    read_range(s, "scale_limit", a.scale_limit, w);
    std::array<int, 2> pair{a.blur_min, a.blur_max};
    read(s, "blur", pair, w);
    a.blur_min = pair[0];
    a.blur_max = pair[1];
    pair = {a.pad_min_width, a.pad_min_height};
    read(s, "pad", pair, w);
    a.pad_min_width = pair[0];
    a.pad_min_height = pair[1];
    pair = {a.crop_width, a.crop_height};
    read(s, "crop", pair, w);
    a.crop_width = pair[0];
    a.crop_height = pair[1];
    read(s, "mean", a.mean, w);
    read(s, "stddev", a.stddev, w);
  }
  if (j.contains("match")) {
    const auto& s = j["match"];
    check_keys(s, {"radius_px", "mode"}, "config.match");
    read(s, "radius_px", c.match.radius_px, "config.match");
    std::string mode = "greedy";
    read(s, "mode", mode, "config.match");
    c.match.mode = parse_match_mode(mode);
  }
  if (j.contains("evaluation")) {
    const auto& s = j["evaluation"];
    check_keys(s, {"score_threshold", "scope"}, "config.evaluation");
    read(s, "score_threshold", c.score_threshold, "config.evaluation");
    std::string scope = "nonempty";
    read(s, "scope", scope, "config.evaluation");
    c.scope = parse_scope(scope);
  }
  if (j.contains("stats")) {
    const auto& s = j["stats"];
    check_keys(s, {"alpha", "levene_center", "dunn_adjustment"}, "config.stats");
    read(s, "alpha", c.stats.alpha, "config.stats");
    std::string center = "mean";
    read(s, "levene_center", center, "config.stats");
    if (center == "mean") c.stats.levene_center = LeveneCenter::mean;
    else if (center == "median") c.stats.levene_center = LeveneCenter::median;
    else throw ConfigError("config.stats.levene_center must be mean or median");
    std::string adj = "bonferroni";
    read(s, "dunn_adjustment", adj, "config.stats");
    if (adj == "bonferroni") c.stats.dunn_adjustment = DunnAdjustment::bonferroni;
    else if (adj == "none") c.stats.dunn_adjustment = DunnAdjustment::none;
    else throw ConfigError("config.stats.dunn_adjustment must be bonferroni or none");
  }
  if (j.contains("split")) {
    check_keys(j["split"], {"ratio"}, "config.split");
    read(j["split"], "ratio", c.split_ratio, "config.split");
  }
  if (j.contains("folds")) {
    check_keys(j["folds"], {"k"}, "config.folds");
    read(j["folds"], "k", c.folds, "config.folds");
  }
  if (j.contains("training")) {
    check_keys(j["training"], {"epochs", "learning_rate"}, "config.training");
    read(j["training"], "epochs", c.epochs, "config.training");
    read(j["training"], "learning_rate", c.learning_rate, "config.training");
  }
  if (j.contains("gen")) {
    const auto& s = j["gen"];
    check_keys(s, {"unit_cost_cents", "retry", "backends"}, "config.gen");
    if (s.contains("unit_cost_cents")) {
      check_keys(s["unit_cost_cents"], {"256", "512", "1024"}, "config.gen.unit_cost_cents");
      for (const auto& [size, cents] : s["unit_cost_cents"].items()) {
        if (!cents.is_number_integer() || cents.get<std::int64_t>() < 0)
          throw ConfigError("config.gen.unit_cost_cents." + size + ": expected whole cents >= 0");
        c.costs.unit_cost_cents[std::stoi(size)] = cents.get<std::int64_t>();
      }
    }
    if (s.contains("retry")) {
      const auto& r = s["retry"];
      check_keys(r, {"max_retries", "initial_delay_ms", "max_delay_ms"}, "config.gen.retry");
      read(r, "max_retries", c.retry.max_retries, "config.gen.retry");
      std::int64_t ms = c.retry.initial_delay.count();
      read(r, "initial_delay_ms", ms, "config.gen.retry");
      c.retry.initial_delay = std::chrono::milliseconds(ms);
      ms = c.retry.max_delay.count();
      read(r, "max_delay_ms", ms, "config.gen.retry");
      c.retry.max_delay = std::chrono::milliseconds(ms);
      if (c.retry.max_retries < 0) throw ConfigError("config.gen.retry.max_retries must be >= 0");
    }
    if (s.contains("backends")) {
      if (!s["backends"].is_object()) throw ConfigError("config.gen.backends: expected an object");
      for (const auto& [name, b] : s["backends"].items()) {
        const std::string w = "config.gen.backends." + name;
        if (name == "stub") throw ConfigError(w + ": the name 'stub' is reserved");
        check_keys(b, {"base_url", "endpoint", "model", "timeout_seconds"}, w);
        HttpBackendSettings h;
        read(b, "base_url", h.base_url, w);
        read(b, "endpoint", h.endpoint, w);
        read(b, "model", h.model, w);
        read(b, "timeout_seconds", h.timeout_seconds, w);
        c.backends[name] = h;
      }
    }
  }
  return c;
}

json run_config_to_json(const RunConfig& c) {
  const auto& a = c.augment;
  json unit = json::object();
  for (const auto& [size, cents] : c.costs.unit_cost_cents) unit[std::to_string(size)] = cents;
  json backends = json::object();
  for (const auto& [name, b] : c.backends)
    backends[name] = {{"base_url", b.base_url},
                      {"endpoint", b.endpoint},
                      {"model", b.model},
                      {"timeout_seconds", b.timeout_seconds}};
  return {
      {"seed", c.seed},
      {"schedule", c.schedule},
      {"jobs", c.jobs},
      {"resize", {{"target_length_px", c.target_length_px}}},
      {"tile",
       {{"patch_w", c.tile.patch_w},
        {"patch_h", c.tile.patch_h},
        {"overlap", c.tile.overlap},
        {"retention_fraction", c.tile.retention_fraction},
        {"keep_empty", c.keep_empty_patches}}},
      {"augment",
       {{"probability", a.probability},
        {"brightness", range_json(a.brightness)},
        {"contrast", range_json(a.contrast)},
        {"hue_shift", range_json(a.hue_shift)},
        {"sat_shift", range_json(a.sat_shift)},
        {"val_shift", range_json(a.val_shift)},
        {"scale_limit", range_json(a.scale_limit)},
        {"blur", {a.blur_min, a.blur_max}},
        {"pad", {a.pad_min_width, a.pad_min_height}},
        {"crop", {a.crop_width, a.crop_height}},
        {"mean", floats_json(a.mean)},
        {"stddev", floats_json(a.stddev)}}},
      {"match",
       {{"radius_px", c.match.radius_px},
        {"mode", c.match.mode == MatchMode::greedy ? "greedy" : "optimal"}}},
      {"evaluation",
       {{"score_threshold", c.score_threshold},
        {"scope", c.scope == PatchScope::all ? "all" : "nonempty"}}},
      {"stats",
       {{"alpha", c.stats.alpha},
        {"levene_center", c.stats.levene_center == LeveneCenter::mean ? "mean" : "median"},
        {"dunn_adjustment",
         c.stats.dunn_adjustment == DunnAdjustment::bonferroni ? "bonferroni" : "none"}}},
      {"split", {{"ratio", c.split_ratio}}},
      {"folds", {{"k", c.folds}}},
      {"training", {{"epochs", c.epochs}, {"learning_rate", c.learning_rate}}},
      {"gen",
       {{"unit_cost_cents", unit},
        {"retry",
         {{"max_retries", c.retry.max_retries},
          {"initial_delay_ms", c.retry.initial_delay.count()},
          {"max_delay_ms", c.retry.max_delay.count()}}},
        {"backends", backends}}},
  };
}

}  // namespace oxgen
