#include "oxgen/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "oxgen/annotations.hpp"
#include "oxgen/composer.hpp"
#include "oxgen/error.hpp"
#include "oxgen/fileio.hpp"
#include "oxgen/parallel.hpp"
#include "oxgen/triage.hpp"

namespace oxgen {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kSchemaVersion = 1;

struct Options {
  // shared
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> schedule;
  std::optional<double> radius;
  std::optional<double> alpha;
  std::optional<unsigned> jobs;
  std::string out = ".";

  // per command
  std::string input;
  std::vector<std::string> inputs;
  std::string annotations;
  std::string format = "auto";
  std::string images_dir;
  std::string kind = "real";
  std::string source_tag;
  std::optional<double> target_length;
  std::string real_pool;
  std::string synthetic_pool;
  bool allow_short_pool = false;
  std::optional<double> ratio;
  std::optional<int> k;
  int count = 8;
  std::string detections;
  std::string model = "model";
  std::string fold = "1";
  std::optional<double> threshold;
  std::optional<std::string> match_mode;
  std::optional<std::string> scope;
  bool keep_empty = false;
  std::string metric = "f1";
  std::vector<std::string> models;
  std::string store;
  std::string prompt{kDefaultPrompt};
  int n = kMaxBatchSize;
  int size = 1024;
  std::string backend = "stub";
  std::string export_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

json artifact_header(const std::string& kind, const std::string& command, const RunConfig& cfg) {
  return {{"schema_version", kSchemaVersion},
          {"kind", kind},
          {"command", command},
          {"config", run_config_to_json(cfg)}};
}

std::string csv_comment(const std::string& command, const RunConfig& cfg) {
  return json{{"schema_version", kSchemaVersion},
              {"command", command},
              {"config", run_config_to_json(cfg)}}
      .dump();
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), e.what());
  }
}

json read_artifact(const fs::path& path, const std::string& kind) {
  json j = read_json(path);
  if (!j.is_object() || j.value("schema_version", 0) != kSchemaVersion)
    throw InputError(path.string() + ": unsupported or missing schema_version");
  if (j.value("kind", "") != kind)
    throw InputError(path.string() + ": expected a '" + kind + "' artifact, found '" +
                     j.value("kind", "") + "'");
  return j;
}

struct ImageSet {
  std::vector<SurveyImage> images;
  std::vector<BoxAnnotation> boxes;
};

ImageSet load_image_set(const fs::path& path) {
  const json j = read_artifact(path, "image_set");
  ImageSet s;
  try {
    s.images = j.at("images").get<std::vector<SurveyImage>>();
    s.boxes = j.at("boxes").get<std::vector<BoxAnnotation>>();
  } catch (const json::exception& e) {
    throw ParseError(path.string(), e.what());
  }
  return s;
}

json image_set_json(const ImageSet& s, const std::string& command, const RunConfig& cfg) {
  json j = artifact_header("image_set", command, cfg);
  j["images"] = s.images;
  j["boxes"] = s.boxes;
  return j;
}

std::map<std::string, std::vector<BoxAnnotation>> boxes_by_image(const ImageSet& s) {
  std::map<std::string, std::vector<BoxAnnotation>> m;
  for (const auto& b : s.boxes) m[b.image_id].push_back(b);
  return m;
}

void report_issues(std::ostream& err, const char* what, const std::vector<IngestIssue>& issues) {
  for (const auto& i : issues) err << what << ": " << i.path << ": " << i.message << "\n";
}

json issues_json(const std::vector<IngestIssue>& issues) {
  json a = json::array();
  for (const auto& i : issues) a.push_back({{"path", i.path}, {"message", i.message}});
  return a;
}

// ---------------------------------------------------------------- ingest

int cmd_ingest(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path ann(o.annotations);
  std::string format = o.format;
  if (format == "auto") format = ann.extension() == ".csv" ? "csv" : "labelstudio";
  const auto kind = parse_image_kind(o.kind);
  if (!kind) throw ConfigError("--kind must be real or synthetic");
  const fs::path images_dir(o.images_dir);

  ImageSet set;
  std::vector<IngestIssue> warnings;
  std::vector<IngestIssue> errors;
  const std::string text = read_text_file(ann);
  if (format == "labelstudio") {
    LabelStudioOptions lo;
    lo.kind = *kind;
    lo.source_tag = o.source_tag;
    if (!o.images_dir.empty())
      lo.dimension_resolver = [&](const std::string& ref) -> std::optional<std::array<int, 2>> {
        const fs::path p = images_dir / fs::path(ref).filename();
        if (!fs::exists(p)) return std::nullopt;
        return png_dimensions(p);
      };
    auto imp = parse_labelstudio(text, lo);
    warnings = std::move(imp.warnings);
    errors = std::move(imp.errors);
    for (auto& item : imp.images) {
      if (!o.images_dir.empty()) item.image.path = images_dir / item.image.path.filename();
      set.images.push_back(item.image);
      set.boxes.insert(set.boxes.end(), item.boxes.begin(), item.boxes.end());
    }
  } else if (format == "csv") {
    if (o.images_dir.empty()) throw ConfigError("box CSV ingestion needs --images for dimensions");
    auto imp = parse_box_csv(text);
    errors = std::move(imp.errors);
    std::set<std::string> seen;
    for (const auto& b : imp.boxes) {
      if (!seen.insert(b.image_id).second) continue;
      SurveyImage img;
      img.id = b.image_id;
      img.path = images_dir / (b.image_id + ".png");
      if (!fs::exists(img.path)) {
        errors.push_back({b.image_id, "no raster at " + img.path.string()});
        continue;
      }
      const auto dims = png_dimensions(img.path);
      img.width_px = dims[0];
      img.height_px = dims[1];
      img.kind = *kind;
      img.source_tag = o.source_tag;
      set.images.push_back(img);
    }
    for (const auto& b : imp.boxes) {
      if (!std::any_of(set.images.begin(), set.images.end(),
                       [&](const SurveyImage& i) { return i.id == b.image_id; }))
        continue;
      const auto& img = *std::find_if(set.images.begin(), set.images.end(),
                                      [&](const SurveyImage& i) { return i.id == b.image_id; });
      if (b.x_max() > img.width_px || b.y_max() > img.height_px) {
        warnings.push_back({b.image_id, "box extends past the image; clamped"});
        BoxAnnotation c = b;
        const double x1 = std::min(c.x_max(), static_cast<double>(img.width_px));
        const double y1 = std::min(c.y_max(), static_cast<double>(img.height_px));
        c.box_w = x1 - c.x_min;
        c.box_h = y1 - c.y_min;
        if (c.box_w <= 0 || c.box_h <= 0) {
          warnings.push_back({b.image_id, "box outside the image; rejected"});
          continue;
        }
        set.boxes.push_back(c);
      } else {
        set.boxes.push_back(b);
      }
    }
  } else {
    throw ConfigError("--format must be auto, labelstudio or csv");
  }
  report_issues(err, "warning", warnings);
  report_issues(err, "error", errors);
  if (set.images.empty()) throw InputError("no images could be ingested from " + ann.string());

  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_json(dir / "images.json", image_set_json(set, "ingest", cfg));
  json issues = artifact_header("ingest_issues", "ingest", cfg);
  issues["warnings"] = issues_json(warnings);
  issues["errors"] = issues_json(errors);
  write_json(dir / "ingest_issues.json", issues);
  out << "ingested " << set.images.size() << " images, " << set.boxes.size() << " boxes ("
      << warnings.size() << " warnings, " << errors.size() << " errors)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- resize

int cmd_resize(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream& err) {
  if (!(cfg.target_length_px > 0)) throw ConfigError("target length must be > 0");
  const ImageSet in = load_image_set(o.input);
  const auto by_image = boxes_by_image(in);
  std::optional<double> global;
  if (!in.boxes.empty()) global = estimate_scale(in.boxes, cfg.target_length_px);

  const fs::path dir(o.out);
  fs::create_directories(dir / "resized");
  ImageSet res;
  res.images.resize(in.images.size());
  std::vector<std::vector<BoxAnnotation>> scaled(in.images.size());
  std::vector<double> scales(in.images.size());
  for (std::size_t i = 0; i < in.images.size(); ++i) {
    auto it = by_image.find(in.images[i].id);
    if (it != by_image.end()) {
      scales[i] = estimate_scale(it->second, cfg.target_length_px);
    } else if (global) {
      err << "warning: " << in.images[i].id << " has no boxes; using the set-wide scale\n";
      scales[i] = *global;
    } else {
      throw InputError(in.images[i].id + ": no animals to calibrate");
    }
  }
  parallel_for(in.images.size(), cfg.jobs, [&](std::size_t i) {
    const auto& src = in.images[i];
    const Image raster = read_png(src.path);
    const Image r = resize_bilinear(raster, scales[i]);
    SurveyImage dst = src;
    dst.path = dir / "resized" / (src.id + ".png");
    dst.width_px = r.width;
    dst.height_px = r.height;
    if (dst.gsd_cm_per_px) *dst.gsd_cm_per_px /= scales[i];
    write_png(dst.path, r);
    res.images[i] = dst;
    if (auto it = by_image.find(src.id); it != by_image.end())
      for (const auto& b : it->second) scaled[i].push_back(scale_box(b, scales[i]));
  });
  json scale_map = json::object();
  for (std::size_t i = 0; i < in.images.size(); ++i) {
    res.boxes.insert(res.boxes.end(), scaled[i].begin(), scaled[i].end());
    scale_map[in.images[i].id] = scales[i];
  }
  json j = image_set_json(res, "resize", cfg);
  j["scales"] = scale_map;
  write_json(dir / "images.json", j);
  out << "resized " << res.images.size() << " images to a " << cfg.target_length_px
      << " px animal length\n";
  return kExitOk;
}

// ---------------------------------------------------------------- patch

json point_json(const PointLabel& p) { return json::array({p.x, p.y}); }

int cmd_patch(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream&) {
  cfg.tile.validate();
  const ImageSet in = load_image_set(o.input);
  const auto by_image = boxes_by_image(in);
  const fs::path dir(o.out);
  fs::create_directories(dir / "patches");

  std::vector<std::vector<Patch>> per_image(in.images.size());
  parallel_for(in.images.size(), cfg.jobs, [&](std::size_t i) {
    const auto& img = in.images[i];
    const Image raster = read_png(img.path);
    if (raster.width != img.width_px || raster.height != img.height_px)
      throw InputError(img.id + ": raster is " + std::to_string(raster.width) + "x" +
                       std::to_string(raster.height) + " but the image set records " +
                       std::to_string(img.width_px) + "x" + std::to_string(img.height_px));
    static const std::vector<BoxAnnotation> none;
    auto it = by_image.find(img.id);
    auto patches = extract_patches(raster, it == by_image.end() ? none : it->second, cfg.tile,
                                   img.id);
    if (!cfg.keep_empty_patches) patches = filter_nonempty(std::move(patches));
    for (auto& p : patches) {
      write_png(dir / "patches" / (p.id + ".png"), p.raster);
      p.raster = Image();
    }
    per_image[i] = std::move(patches);
  });

  json list = json::array();
  std::string points = "# " + csv_comment("patch", cfg) + "\npatch_id,x,y\n";
  std::size_t n_labels = 0;
  for (const auto& patches : per_image)
    for (const auto& p : patches) {
      json labels = json::array();
      for (const auto& l : p.labels) {
        labels.push_back(point_json(l));
        points += csv_escape(p.id) + "," + format_real(l.x) + "," + format_real(l.y) + "\n";
      }
      n_labels += p.labels.size();
      list.push_back({{"id", p.id},
                      {"parent_image_id", p.parent_image_id},
                      {"origin_x", p.origin_x},
                      {"origin_y", p.origin_y},
                      {"width", cfg.tile.patch_w},
                      {"height", cfg.tile.patch_h},
                      {"file", "patches/" + p.id + ".png"},
                      {"labels", labels}});
    }
  json j = artifact_header("patch_manifest", "patch", cfg);
  j["patches"] = list;
  write_json(dir / "patches.json", j);
  write_file_atomic(dir / "points.csv", points);
  out << "wrote " << list.size() << " patches with " << n_labels << " labels\n";
  return kExitOk;
}

struct PatchEntry {
  std::string id;
  fs::path file;
  std::vector<PointLabel> labels;
};

std::vector<PatchEntry> load_patch_manifest(const fs::path& path) {
  const json j = read_artifact(path, "patch_manifest");
  std::vector<PatchEntry> out;
  std::set<std::string> ids;
  try {
    for (const auto& p : j.at("patches")) {
      PatchEntry e;
      e.id = p.at("id").get<std::string>();
      if (!ids.insert(e.id).second) throw InputError(path.string() + ": duplicate patch " + e.id);
      e.file = path.parent_path() / p.at("file").get<std::string>();
      for (const auto& l : p.at("labels")) {
        PointLabel pl;
        pl.x = l.at(0).get<double>();
        pl.y = l.at(1).get<double>();
        e.labels.push_back(pl);
      }
      out.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string(), e.what());
  }
  return out;
}

// ---------------------------------------------------------------- compose / split / folds

std::vector<SurveyImage> pool_of(const std::string& path, ImageKind kind) {
  if (path.empty()) return {};
  auto images = load_image_set(path).images;
  for (const auto& i : images)
    if (i.kind != kind)
      throw InputError(path + ": image '" + i.id + "' is " + std::string(to_string(i.kind)) +
                       ", expected " + std::string(to_string(kind)));
  return images;
}

json manifest_artifact(const DatasetManifest& m, const std::string& command, const RunConfig& cfg) {
  json j = manifest_to_json(m);
  j["kind"] = "dataset_manifest";
  j["command"] = command;
  j["config"] = run_config_to_json(cfg);
  return j;
}

DatasetManifest load_manifest(const fs::path& path) {
  const json j = read_artifact(path, "dataset_manifest");
  try {
    return manifest_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), e.what());
  }
}

int cmd_compose(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream&) {
  const auto schedule = parse_schedule(cfg.schedule);
  if (!schedule || *schedule == Schedule::custom)
    throw ConfigError("unknown schedule '" + cfg.schedule + "'");
  const auto real = pool_of(o.real_pool, ImageKind::real);
  const auto synthetic = pool_of(o.synthetic_pool, ImageKind::synthetic);
  ComposeOptions co;
  co.allow_short_pool = o.allow_short_pool;
  const auto m = compose(*schedule, real, synthetic, cfg.seed, co);
  fs::create_directories(o.out);
  write_json(fs::path(o.out) / "manifest.json", manifest_artifact(m, "compose", cfg));
  out << m.name << ": " << m.real_images.size() << " real + " << m.synthetic_images.size()
      << " synthetic\n";
  return kExitOk;
}

int cmd_split(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream&) {
  const auto m = load_manifest(o.input);
  const auto [train, val] = split_train_val(m, cfg.split_ratio, cfg.seed);
  fs::create_directories(o.out);
  write_json(fs::path(o.out) / "train.json", manifest_artifact(train, "split", cfg));
  write_json(fs::path(o.out) / "val.json", manifest_artifact(val, "split", cfg));
  out << "train " << train.size() << ", val " << val.size() << "\n";
  return kExitOk;
}

int cmd_folds(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream&) {
  const auto m = load_manifest(o.input);
  const auto plan = plan_folds(m, cfg.folds, cfg.seed);
  json j = fold_plan_to_json(plan, m.name);
  j["kind"] = "fold_plan";
  j["command"] = "folds";
  j["config"] = run_config_to_json(cfg);
  fs::create_directories(o.out);
  write_json(fs::path(o.out) / "folds.json", j);
  out << "fold sizes:";
  for (auto s : plan.fold_sizes()) out << " " << s;
  out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- augment-preview

int cmd_augment_preview(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream&) {
  cfg.augment.validate();
  if (o.count < 1) throw ConfigError("--count must be >= 1");
  const auto patches = load_patch_manifest(o.input);
  const std::size_t n = std::min<std::size_t>(patches.size(), static_cast<std::size_t>(o.count));
  const fs::path dir = fs::path(o.out) / "augment";
  fs::create_directories(dir);
  std::vector<json> traces(n);
  parallel_for(n, cfg.jobs, [&](std::size_t i) {
    const auto& p = patches[i];
    const auto r = augment(read_png(p.file), p.labels, cfg.augment, p.id);
    write_png(dir / (p.id + ".png"), r.raster);
    write_file_atomic(dir / (p.id + ".oxt"), std::span<const std::uint8_t>(encode_tensor(r.tensor)));
    json fired = json::array();
    for (const auto& f : r.trace.fired)
      fired.push_back({{"stage", to_string(f.stage)}, {"params", f.params}});
    json labels = json::array();
    for (const auto& l : r.labels) labels.push_back(point_json(l));
    traces[i] = {{"patch_id", p.id},
                 {"image", "augment/" + p.id + ".png"},
                 {"tensor", "augment/" + p.id + ".oxt"},
                 {"fired", fired},
                 {"labels", labels}};
  });
  json j = artifact_header("augment_preview", "augment-preview", cfg);
  j["items"] = traces;
  write_json(fs::path(o.out) / "augment_preview.json", j);
  out << "augmented " << n << " patches\n";
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate / report

json metrics_json(const MetricsRow& m) {
  return {{"model", m.model}, {"fold", m.fold},           {"ap", m.ap},
          {"mae", m.mae},     {"mse", m.mse},             {"rmse", m.rmse},
          {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

int cmd_evaluate(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream&) {
  if (!(cfg.match.radius_px > 0)) throw ConfigError("radius must be > 0");
  const auto patches = load_patch_manifest(o.input);
  const auto dets = parse_detections_jsonl(read_text_file(o.detections));
  std::map<std::string, std::size_t> index;
  std::vector<PatchEval> evals;
  for (const auto& p : patches) {
    index[p.id] = evals.size();
    evals.push_back({p.id, p.labels, {}});
  }
  for (const auto& d : dets) {
    auto it = index.find(d.patch_id);
    if (it == index.end())
      throw InputError(o.detections + ": detection for unknown patch '" + d.patch_id + "'");
    evals[it->second].detections.push_back(d);
  }
  EvaluationConfig ec;
  ec.match = cfg.match;
  ec.score_threshold = cfg.score_threshold;
  ec.scope = cfg.scope;
  ec.jobs = cfg.jobs;
  const auto ev = evaluate(evals, ec, o.model, o.fold);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  const std::vector<MetricsRow> rows{ev.metrics};
  write_file_atomic(dir / "metrics.csv", write_metrics_csv(rows, csv_comment("evaluate", cfg)));
  json j = artifact_header("evaluation", "evaluate", cfg);
  j["metrics"] = metrics_json(ev.metrics);
  j["stats"] = {{"patches", ev.stats.n_patches}, {"tp", ev.stats.tp},
                {"fp", ev.stats.fp},             {"fn", ev.stats.fn},
                {"tp_avg", ev.stats.avg_tp},     {"fp_avg", ev.stats.avg_fp},
                {"fn_avg", ev.stats.avg_fn}};
  json per_patch = json::array();
  for (std::size_t i = 0; i < ev.per_patch.size(); ++i)
    per_patch.push_back({{"patch_id", ev.patch_ids[i]},
                         {"tp", ev.per_patch[i].tp},
                         {"fp", ev.per_patch[i].fp},
                         {"fn", ev.per_patch[i].fn}});
  j["per_patch"] = per_patch;
  write_json(dir / "evaluation.json", j);
  out << o.model << " fold " << o.fold << ": P " << format_fixed(ev.metrics.precision, 3)
      << " R " << format_fixed(ev.metrics.recall, 3) << " F1 " << format_fixed(ev.metrics.f1, 3)
      << " AP " << format_fixed(ev.metrics.ap, 3) << "\n";
  return kExitOk;
}

int cmd_report(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream&) {
  if (o.inputs.empty()) throw ConfigError("report needs at least one evaluation.json");
  std::vector<MetricsRow> rows;
  std::vector<std::string> order;
  std::map<std::string, std::vector<json>> stats;
  for (const auto& path : o.inputs) {
    const json j = read_artifact(path, "evaluation");
    try {
      const auto& m = j.at("metrics");
      MetricsRow r;
      r.model = m.at("model").get<std::string>();
      r.fold = m.at("fold").get<std::string>();
      r.ap = m.at("ap").get<double>();
      r.mae = m.at("mae").get<double>();
      r.mse = m.at("mse").get<double>();
      r.rmse = m.at("rmse").get<double>();
      r.precision = m.at("precision").get<double>();
      r.recall = m.at("recall").get<double>();
      r.f1 = m.at("f1").get<double>();
      if (!stats.count(r.model)) order.push_back(r.model);
      stats[r.model].push_back(j.at("stats"));
      rows.push_back(r);
    } catch (const json::exception& e) {
      throw ParseError(path, e.what());
    }
  }
  std::vector<DetectionStatsRow> det;
  for (const auto& model : order) {
    const auto& folds = stats[model];
    DetectionStatsRow d;
    d.model = model;
    d.n_patches = folds.front().at("patches").get<std::int64_t>();
    for (const auto& s : folds) {
      if (s.at("patches").get<std::int64_t>() != d.n_patches)
        throw InputError("model '" + model + "': folds were evaluated on different patch counts");
      d.tp += s.at("tp").get<double>();
      d.fp += s.at("fp").get<double>();
      d.fn += s.at("fn").get<double>();
    }
    const double k = static_cast<double>(folds.size());
    d.tp /= k;
    d.fp /= k;
    d.fn /= k;
    const double np = static_cast<double>(d.n_patches);
    d.avg_tp = d.tp / np;
    d.avg_fp = d.fp / np;
    d.avg_fn = d.fn / np;
    det.push_back(d);
  }
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const std::string comment = csv_comment("report", cfg);
  write_file_atomic(dir / "metrics.csv", write_metrics_csv(rows, comment));
  write_file_atomic(dir / "detection_stats.csv", write_detection_stats_csv(det, comment));
  out << "report: " << rows.size() << " metric rows, " << det.size() << " models\n";
  return kExitOk;
}

// ---------------------------------------------------------------- stats

double metric_of(const MetricsRow& r, const std::string& metric) {
  if (metric == "ap") return r.ap;
  if (metric == "mae") return r.mae;
  if (metric == "mse") return r.mse;
  if (metric == "rmse") return r.rmse;
  if (metric == "precision") return r.precision;
  if (metric == "recall") return r.recall;
  if (metric == "f1") return r.f1;
  throw ConfigError("unknown metric '" + metric + "'");
}

int cmd_stats(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream&) {
  metric_of(MetricsRow{}, o.metric);
  const auto rows = parse_metrics_csv(read_text_file(o.input));
  GroupedSamples samples;
  samples.metric_name = o.metric;
  std::vector<std::string> models = o.models;
  if (models.empty())
    for (const auto& r : rows)
      if (std::find(models.begin(), models.end(), r.model) == models.end())
        models.push_back(r.model);
  for (const auto& m : models) {
    Group g;
    g.label = m;
    for (const auto& r : rows)
      if (r.model == m) g.values.push_back(metric_of(r, o.metric));
    if (g.values.empty()) throw InputError("model '" + m + "' has no rows in " + o.input);
    samples.groups.push_back(std::move(g));
  }
  const auto rep = compare_models(samples, cfg.stats);
  json j = stat_report_to_json(rep);
  j["kind"] = "stat_report";
  j["command"] = "stats";
  j["config"] = run_config_to_json(cfg);
  fs::create_directories(o.out);
  write_json(fs::path(o.out) / "stats.json", j);
  out << o.metric << ": " << to_string(rep.omnibus) << " p = "
      << format_real(rep.omnibus_result.p)
      << (rep.omnibus_result.p < rep.alpha ? " (significant)" : " (not significant)") << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- gen / curate / serve

int cmd_gen(const RunConfig& cfg, const Options& o, std::ostream& out, std::ostream&) {
  GenRequest req;
  req.prompt = o.prompt;
  req.n = o.n;
  req.size = o.size;
  req.backend = o.backend;
  req.seed = cfg.seed;
  req.validate();
  const fs::path store(o.store.empty() ? o.out : o.store);
  CurationLedger ledger(store);
  BatchGenerator gen(ledger, store, cfg.costs, cfg.retry);
  if (o.backend == "stub") {
    gen.add_backend(std::make_shared<StubBackend>());
  } else {
    auto it = cfg.backends.find(o.backend);
    if (it == cfg.backends.end())
      throw ConfigError("backend '" + o.backend + "' is not configured (config gen.backends)");
    const char* key = std::getenv("OXGEN_API_KEY");
    if (!key || !*key) throw ConfigError("OXGEN_API_KEY is not set");
    HttpBackendConfig hc;
    hc.name = o.backend;
    hc.base_url = it->second.base_url;
    hc.endpoint = it->second.endpoint;
    hc.model = it->second.model;
    hc.timeout_seconds = it->second.timeout_seconds;
    hc.api_key = key;
    gen.add_backend(std::make_shared<HttpImageBackend>(hc));
  }
  const auto res = gen.generate_batch(req);
  ledger.compact();
  const auto state = ledger.snapshot();
  out << "generated " << res.images.size() << " images (" << format_cents(res.cost.total_cents)
      << "); ledger total " << format_cents(state->total_cost_cents()) << "\n";
  return kExitOk;
}

int cmd_curate_import(const RunConfig&, const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path store(o.store.empty() ? o.out : o.store);
  if (!fs::exists(store / "ledger.jsonl") && !fs::exists(store / "ledger.snapshot.json"))
    throw InputError("no curation ledger in " + store.string());
  CurationLedger ledger(store);
  int status = kExitOk;
  if (!o.input.empty()) {
    const auto rep = import_decisions_csv(ledger, read_text_file(o.input));
    report_issues(err, "error", rep.errors);
    out << "applied " << rep.applied << " decisions";
    if (!rep.errors.empty()) {
      out << ", " << rep.errors.size() << " rows rejected";
      status = kExitInput;
    }
    out << "\n";
    ledger.compact();
  }
  if (!o.export_path.empty()) {
    write_file_atomic(o.export_path, export_decisions_csv(*ledger.snapshot()));
    out << "exported decisions to " << o.export_path << "\n";
  }
  if (o.input.empty() && o.export_path.empty())
    throw ConfigError("curate-import needs a CSV to import or --export");
  const auto totals = selection_totals(records_in_order(*ledger.snapshot()));
  out << "kept " << totals.kept << " of " << totals.generated << " ("
      << format_fraction(totals.fraction) << ")\n";
  return status;
}

int cmd_serve_triage(const RunConfig&, const Options& o, std::ostream& out, std::ostream&) {
  const fs::path store(o.store.empty() ? o.out : o.store);
  // Block termination signals before the server spawns threads so only
  // this thread receives them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  CurationLedger ledger(store);
  std::optional<fs::path> static_dir;
  if (!o.static_dir.empty()) static_dir = o.static_dir;
  TriageServer server(ledger, static_dir);
  server.start(o.host, o.port);
  out << "serving triage API on http://" << o.host << ":" << server.port() << "\n" << std::flush;
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  ledger.compact();
  out << "stopped\n";
  return kExitOk;
}

// ---------------------------------------------------------------- dispatch

RunConfig resolve_config(const Options& o) {
  RunConfig cfg;
  if (o.config_path) cfg = run_config_from_json(read_json(*o.config_path));
  if (o.seed) cfg.seed = *o.seed;
  if (o.schedule) cfg.schedule = *o.schedule;
  if (o.radius) cfg.match.radius_px = *o.radius;
  if (o.alpha) cfg.stats.alpha = *o.alpha;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.target_length) cfg.target_length_px = *o.target_length;
  if (o.ratio) cfg.split_ratio = *o.ratio;
  if (o.k) cfg.folds = *o.k;
  if (o.threshold) cfg.score_threshold = *o.threshold;
  if (o.keep_empty) cfg.keep_empty_patches = true;
  if (o.match_mode) {
    if (*o.match_mode == "greedy") cfg.match.mode = MatchMode::greedy;
    else if (*o.match_mode == "optimal") cfg.match.mode = MatchMode::optimal;
    else throw ConfigError("--match must be greedy or optimal");
  }
  if (o.scope) {
    if (*o.scope == "nonempty") cfg.scope = PatchScope::nonempty_only;
    else if (*o.scope == "all") cfg.scope = PatchScope::all;
    else throw ConfigError("--scope must be nonempty or all");
  }
  if (cfg.jobs == 0) cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
  cfg.augment.seed = cfg.seed;
  return cfg;
}

using Handler = int (*)(const RunConfig&, const Options&, std::ostream&, std::ostream&);

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config: return kExitConfig;
    case ErrorKind::input: return kExitInput;
    case ErrorKind::invariant: return kExitInvariant;
  }
  return kExitInvariant;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"oxgen: aerial wildlife survey dataset and evaluation toolkit", "oxgen"};
  app.require_subcommand(1);
  std::map<CLI::App*, Handler> handlers;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config_path, "JSON run configuration");
    s->add_option("--seed", o.seed, "global seed");
    s->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
    s->add_option("--out", o.out, "output directory")->capture_default_str();
  };

  auto* ingest = app.add_subcommand("ingest", "import annotations into an image set");
  common(ingest);
  ingest->add_option("annotations", o.annotations, "Label Studio JSON export or box CSV")
      ->required();
  ingest->add_option("--format", o.format, "auto, labelstudio or csv")->capture_default_str();
  ingest->add_option("--images", o.images_dir, "directory holding the rasters");
  ingest->add_option("--kind", o.kind, "real or synthetic")->capture_default_str();
  ingest->add_option("--source-tag", o.source_tag, "provenance tag");
  handlers[ingest] = cmd_ingest;

  auto* resize = app.add_subcommand("resize", "rescale images to the target animal length");
  common(resize);
  resize->add_option("input", o.input, "image set (images.json)")->required();
  resize->add_option("--target-length", o.target_length, "target animal length in px");
  handlers[resize] = cmd_resize;

  auto* patch = app.add_subcommand("patch", "tile images into labelled patches");
  common(patch);
  patch->add_option("input", o.input, "image set (images.json)")->required();
  patch->add_flag("--keep-empty", o.keep_empty, "keep patches without animals");
  handlers[patch] = cmd_patch;

  auto* comp = app.add_subcommand("compose", "compose a dataset from real and synthetic pools");
  common(comp);
  comp->add_option("--schedule", o.schedule, "BL, ZS1..ZS5 or FS1..FS5");
  comp->add_option("--real", o.real_pool, "image set of real images");
  comp->add_option("--synthetic", o.synthetic_pool, "image set of synthetic images");
  comp->add_flag("--allow-short-pool", o.allow_short_pool,
                 "take what the pools hold instead of failing");
  handlers[comp] = cmd_compose;

  auto* split = app.add_subcommand("split", "stratified train/validation split");
  common(split);
  split->add_option("input", o.input, "dataset manifest")->required();
  split->add_option("--ratio", o.ratio, "train fraction");
  handlers[split] = cmd_split;

  auto* folds = app.add_subcommand("folds", "k-fold assignment");
  common(folds);
  folds->add_option("input", o.input, "dataset manifest")->required();
  folds->add_option("-k,--k", o.k, "number of folds");
  handlers[folds] = cmd_folds;

  auto* aug = app.add_subcommand("augment-preview", "run the augmentation pipeline on patches");
  common(aug);
  aug->add_option("input", o.input, "patch manifest (patches.json)")->required();
  aug->add_option("--count", o.count, "number of patches")->capture_default_str();
  handlers[aug] = cmd_augment_preview;

  auto* eval = app.add_subcommand("evaluate", "score detections against patch labels");
  common(eval);
  eval->add_option("input", o.input, "patch manifest (patches.json)")->required();
  eval->add_option("--detections", o.detections, "detections JSONL")->required();
  eval->add_option("--model", o.model, "model name")->capture_default_str();
  eval->add_option("--fold", o.fold, "fold label")->capture_default_str();
  eval->add_option("--radius", o.radius, "match radius in px");
  eval->add_option("--threshold", o.threshold, "score threshold for P/R/F1");
  eval->add_option("--match", o.match_mode, "greedy or optimal");
  eval->add_option("--scope", o.scope, "nonempty or all");
  handlers[eval] = cmd_evaluate;

  auto* report = app.add_subcommand("report", "assemble metrics and detection statistics");
  common(report);
  report->add_option("inputs", o.inputs, "evaluation.json files")->required();
  handlers[report] = cmd_report;

  auto* stats = app.add_subcommand("stats", "compare models on one metric");
  common(stats);
  stats->add_option("input", o.input, "metrics CSV")->required();
  stats->add_option("--metric", o.metric, "ap, mae, mse, rmse, precision, recall or f1")
      ->capture_default_str();
  stats->add_option("--models", o.models, "models to compare, in order")->delimiter(',');
  stats->add_option("--alpha", o.alpha, "significance level");
  handlers[stats] = cmd_stats;

  auto* gen = app.add_subcommand("gen", "generate a batch of synthetic images");
  common(gen);
  gen->add_option("--store", o.store, "image store and ledger directory (default: --out)");
  gen->add_option("--prompt", o.prompt, "text prompt");
  gen->add_option("-n,--n", o.n, "images in the batch (1-10)")->capture_default_str();
  gen->add_option("--size", o.size, "256, 512 or 1024")->capture_default_str();
  gen->add_option("--backend", o.backend, "stub or a configured HTTP backend")
      ->capture_default_str();
  handlers[gen] = cmd_gen;

  auto* cur = app.add_subcommand("curate-import", "import or export curation decisions");
  common(cur);
  cur->add_option("input", o.input, "decisions CSV (image_id,decision,reason)");
  cur->add_option("--store", o.store, "image store and ledger directory (default: --out)");
  cur->add_option("--export", o.export_path, "write the current decisions CSV here");
  handlers[cur] = cmd_curate_import;

  auto* serve = app.add_subcommand("serve-triage", "serve the curation API");
  common(serve);
  serve->add_option("--store", o.store, "image store and ledger directory (default: --out)");
  serve->add_option("--host", o.host)->capture_default_str();
  serve->add_option("--port", o.port, "0 picks a free port")->capture_default_str();
  serve->add_option("--static", o.static_dir, "directory of built UI assets");
  handlers[serve] = cmd_serve_triage;

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "oxgen: " << e.what() << "\n";
    return kExitConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    const RunConfig cfg = resolve_config(o);
    return handlers.at(chosen)(cfg, o, out, err);
  } catch (const Error& e) {
    err << "oxgen " << name << ": " << e.what() << "\n";
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    err << "oxgen " << name << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    err << "oxgen " << name << ": malformed input: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "oxgen " << name << ": " << e.what() << "\n";
    return kExitInvariant;
  }
}

}  // namespace oxgen
