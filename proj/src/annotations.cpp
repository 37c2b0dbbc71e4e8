#include "oxgen/annotations.hpp"

#include <algorithm>
#include <set>

#include "oxgen/error.hpp"
#include "oxgen/fileio.hpp"

namespace oxgen {

using nlohmann::json;

std::string_view to_string(ImageKind kind) {
  return kind == ImageKind::real ? "real" : "synthetic";
}

std::optional<ImageKind> parse_image_kind(std::string_view s) {
  if (s == "real") return ImageKind::real;
  if (s == "synthetic") return ImageKind::synthetic;
  return std::nullopt;
}

namespace {

bool is_rectangle(const std::string& type) {
  return type == "rectanglelabels" || type == "rectangle";
}

double require_number(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key, "missing");
  if (!it->is_number()) throw ParseError(path + "." + key, "expected a number");
  return it->get<double>();
}

std::string image_id_from_ref(std::string ref) {
  if (auto q = ref.find('?'); q != std::string::npos) ref.resize(q);
  std::filesystem::path p(ref);
  auto stem = p.stem().string();
  return stem.empty() ? ref : stem;
}

std::optional<int> positive_int(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) return std::nullopt;
  const double v = it->get<double>();
  if (v < 1.0) return std::nullopt;
  return static_cast<int>(v);
}

const json* chosen_annotation(const json& task, const std::string& path) {
  for (const char* key : {"annotations", "completions"}) {
    auto it = task.find(key);
    if (it == task.end() || it->is_null()) continue;
    if (!it->is_array()) throw ParseError(path + "." + key, "expected an array");
    for (const auto& ann : *it) {
      if (!ann.is_object()) throw ParseError(path + "." + key, "expected annotation objects");
      if (ann.value("was_cancelled", false)) continue;
      return &ann;
    }
    return nullptr;
  }
  return nullptr;
}

}  // namespace

LabelStudioImport parse_labelstudio(std::string_view document,
                                    const LabelStudioOptions& options) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("$", "expected an array of tasks");

  LabelStudioImport out;
  std::set<std::string> seen_ids;
  for (std::size_t t = 0; t < doc.size(); ++t) {
    const std::string tpath = "$[" + std::to_string(t) + "]";
    const json& task = doc[t];
    if (!task.is_object()) throw ParseError(tpath, "expected a task object");

    auto data = task.find("data");
    if (data == task.end() || !data->is_object())
      throw ParseError(tpath + ".data", "missing task data");
    std::string ref;
    if (auto img = data->find("image"); img != data->end() && img->is_string()) {
      ref = img->get<std::string>();
    } else {
      out.errors.push_back({tpath + ".data.image", "missing image reference"});
      continue;
    }

    AnnotatedImage item;
    item.image.id = image_id_from_ref(ref);
    item.image.path = ref;
    item.image.kind = options.kind;
    item.image.source_tag = options.source_tag;

    std::optional<int> width = positive_int(*data, "width");
    std::optional<int> height = positive_int(*data, "height");

    struct RawRect {
      std::string path;
      double x, y, w, h;
      std::string label;
    };
    std::vector<RawRect> rects;

    const json* ann = chosen_annotation(task, tpath);
    if (ann != nullptr) {
      auto results = ann->find("result");
      const std::string rpath = tpath + ".annotations.result";
      if (results != ann->end() && !results->is_null()) {
        if (!results->is_array()) throw ParseError(rpath, "expected an array");
        for (std::size_t r = 0; r < results->size(); ++r) {
          const std::string path = rpath + "[" + std::to_string(r) + "]";
          const json& res = (*results)[r];
          if (!res.is_object()) throw ParseError(path, "expected a result object");
          if (auto w = positive_int(res, "original_width")) width = w;
          if (auto h = positive_int(res, "original_height")) height = h;
          const std::string type = res.value("type", "");
          if (!is_rectangle(type)) {
            out.warnings.push_back({path, "ignored result of type '" + type + "'"});
            continue;
          }
          auto value = res.find("value");
          if (value == res.end() || !value->is_object())
            throw ParseError(path + ".value", "expected an object");
          const std::string vpath = path + ".value";
          RawRect rect{path, require_number(*value, "x", vpath),
                       require_number(*value, "y", vpath),
                       require_number(*value, "width", vpath),
                       require_number(*value, "height", vpath), "muskox"};
          if (value->contains("rotation") && (*value)["rotation"].is_number() &&
              (*value)["rotation"].get<double>() != 0.0) {
            out.warnings.push_back({path, "rotated rectangle read as axis-aligned"});
          }
          if (auto labels = value->find("rectanglelabels");
              labels != value->end() && labels->is_array() && !labels->empty() &&
              (*labels)[0].is_string()) {
            rect.label = (*labels)[0].get<std::string>();
          }
          rects.push_back(std::move(rect));
        }
      }
    }

    if ((!width || !height) && options.dimension_resolver) {
      if (auto dims = options.dimension_resolver(ref)) {
        width = (*dims)[0];
        height = (*dims)[1];
      }
    }
    if (!width || !height) {
      out.errors.push_back({tpath, "missing original dimensions for '" + ref + "'"});
      continue;
    }
    if (!seen_ids.insert(item.image.id).second) {
      out.errors.push_back({tpath, "duplicate image id '" + item.image.id + "'"});
      continue;
    }
    item.image.width_px = *width;
    item.image.height_px = *height;

    const double W = *width;
    const double H = *height;
    for (const auto& rect : rects) {
      const double x0 = std::max(0.0, rect.x / 100.0 * W);
      const double y0 = std::max(0.0, rect.y / 100.0 * H);
      const double x1 = std::min(W, (rect.x + rect.w) / 100.0 * W);
      const double y1 = std::min(H, (rect.y + rect.h) / 100.0 * H);
      if (!(x1 > x0) || !(y1 > y0)) {
        out.warnings.push_back({rect.path, "box empty after clamping; rejected"});
        continue;
      }
      BoxAnnotation box{item.image.id, x0, y0, x1 - x0, y1 - y0, rect.label};
      if (x0 != rect.x / 100.0 * W || y0 != rect.y / 100.0 * H ||
          x1 != (rect.x + rect.w) / 100.0 * W || y1 != (rect.y + rect.h) / 100.0 * H) {
        out.warnings.push_back({rect.path, "box clamped to image bounds"});
      }
      item.boxes.push_back(std::move(box));
    }
    out.images.push_back(std::move(item));
  }
  return out;
}

BoxCsvImport parse_box_csv(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kBoxCsvHeader)
    throw ParseError("line 1", "expected header '" + std::string(kBoxCsvHeader) + "'");

  BoxCsvImport out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1);
    if (lines[i].empty()) continue;
    const auto fields = split_csv_record(lines[i]);
    if (fields.size() != 6) {
      out.errors.push_back({where, "expected 6 fields, got " + std::to_string(fields.size())});
      continue;
    }
    BoxAnnotation box;
    box.image_id = fields[0];
    box.class_label = fields[5];
    static constexpr const char* kNames[] = {"x_min", "y_min", "width", "height"};
    double* targets[] = {&box.x_min, &box.y_min, &box.box_w, &box.box_h};
    bool ok = true;
    for (int f = 0; f < 4 && ok; ++f) {
      if (!parse_real(fields[f + 1], *targets[f])) {
        out.errors.push_back({where, std::string("non-numeric ") + kNames[f]});
        ok = false;
      }
    }
    if (!ok) continue;
    if (box.image_id.empty()) {
      out.errors.push_back({where, "empty image_id"});
    } else if (!(box.box_w > 0.0) || !(box.box_h > 0.0)) {
      out.errors.push_back({where, "width and height must be positive"});
    } else if (box.x_min < 0.0 || box.y_min < 0.0) {
      out.errors.push_back({where, "negative box origin"});
    } else {
      out.boxes.push_back(std::move(box));
    }
  }
  return out;
}

std::string write_box_csv(const std::vector<BoxAnnotation>& boxes) {
  std::string out(kBoxCsvHeader);
  out += '\n';
  for (const auto& b : boxes) {
    out += csv_escape(b.image_id) + ',' + format_real(b.x_min) + ',' + format_real(b.y_min) +
           ',' + format_real(b.box_w) + ',' + format_real(b.box_h) + ',' +
           csv_escape(b.class_label) + '\n';
  }
  return out;
}

PointLabel bbox_to_point(const BoxAnnotation& box) {
  return {box.x_min + box.box_w / 2.0, box.y_min + box.box_h / 2.0, box};
}

void to_json(json& j, const SurveyImage& image) {
  j = json{{"id", image.id},
           {"path", image.path.generic_string()},
           {"width", image.width_px},
           {"height", image.height_px},
           {"kind", to_string(image.kind)},
           {"source_tag", image.source_tag},
           {"gsd_cm_per_px", image.gsd_cm_per_px ? json(*image.gsd_cm_per_px) : json()}};
}

void from_json(const json& j, SurveyImage& image) {
  image.id = j.at("id").get<std::string>();
  image.path = j.value("path", "");
  image.width_px = j.at("width").get<int>();
  image.height_px = j.at("height").get<int>();
  const auto kind = parse_image_kind(j.value("kind", "real"));
  if (!kind) throw ParseError("kind", "expected 'real' or 'synthetic'");
  image.kind = *kind;
  image.source_tag = j.value("source_tag", "");
  if (auto g = j.find("gsd_cm_per_px"); g != j.end() && g->is_number())
    image.gsd_cm_per_px = g->get<double>();
  else
    image.gsd_cm_per_px.reset();
  if (image.width_px < 1 || image.height_px < 1)
    throw ParseError(image.id, "image dimensions must be positive");
}

void to_json(json& j, const BoxAnnotation& box) {
  j = json{{"image_id", box.image_id}, {"x_min", box.x_min}, {"y_min", box.y_min},
           {"width", box.box_w},       {"height", box.box_h}, {"label", box.class_label}};
}

void from_json(const json& j, BoxAnnotation& box) {
  box.image_id = j.at("image_id").get<std::string>();
  box.x_min = j.at("x_min").get<double>();
  box.y_min = j.at("y_min").get<double>();
  box.box_w = j.at("width").get<double>();
  box.box_h = j.at("height").get<double>();
  box.class_label = j.value("label", "muskox");
}

}  // namespace oxgen
