#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace oxgen {

enum class ImageKind { real, synthetic };

std::string_view to_string(ImageKind kind);
std::optional<ImageKind> parse_image_kind(std::string_view s);

struct SurveyImage {
  std::string id;
  std::filesystem::path path;
  int width_px = 0;
  int height_px = 0;
  ImageKind kind = ImageKind::real;
  std::string source_tag;
  std::optional<double> gsd_cm_per_px;

  friend bool operator==(const SurveyImage&, const SurveyImage&) = default;
};

/// Pixel-space box, origin top-left, y down.
struct BoxAnnotation {
  std::string image_id;
  double x_min = 0.0;
  double y_min = 0.0;
  double box_w = 0.0;
  double box_h = 0.0;
  std::string class_label = "muskox";

  double x_max() const { return x_min + box_w; }
  double y_max() const { return y_min + box_h; }
  double area() const { return box_w * box_h; }
  double long_side() const { return box_w > box_h ? box_w : box_h; }

  friend bool operator==(const BoxAnnotation&, const BoxAnnotation&) = default;
};

struct PointLabel {
  double x = 0.0;
  double y = 0.0;
  std::optional<BoxAnnotation> origin_box;

  friend bool operator==(const PointLabel&, const PointLabel&) = default;
};

struct AnnotatedImage {
  SurveyImage image;
  std::vector<BoxAnnotation> boxes;
};

/// Non-fatal ingestion record. `path` locates the element in the input.
struct IngestIssue {
  std::string path;
  std::string message;
};

struct LabelStudioImport {
  std::vector<AnnotatedImage> images;
  std::vector<IngestIssue> warnings;  // skipped results, clamped/rejected boxes
  std::vector<IngestIssue> errors;    // tasks that could not be imported
};

struct LabelStudioOptions {
  ImageKind kind = ImageKind::real;
  std::string source_tag;
  /// Consulted when a task carries no original dimensions.
  std::function<std::optional<std::array<int, 2>>(const std::string& image_ref)>
      dimension_resolver;
};

/// Parses a Label Studio JSON export (list of tasks). Only rectangle results
/// are consumed. Percent coordinates are converted to pixels and clamped to
/// the image. Throws ParseError for a malformed document.
LabelStudioImport parse_labelstudio(std::string_view document,
                                    const LabelStudioOptions& options = {});

struct BoxCsvImport {
  std::vector<BoxAnnotation> boxes;
  std::vector<IngestIssue> errors;  // per-row, path is "line N"
};

inline constexpr std::string_view kBoxCsvHeader =
    "image_id,x_min,y_min,width,height,label";

/// Parses `image_id,x_min,y_min,width,height,label` rows. A wrong header
/// throws ParseError; bad rows are reported and skipped.
BoxCsvImport parse_box_csv(std::string_view text);
std::string write_box_csv(const std::vector<BoxAnnotation>& boxes);

PointLabel bbox_to_point(const BoxAnnotation& box);

// JSON forms shared by the artifact files.
void to_json(nlohmann::json& j, const SurveyImage& image);
void from_json(const nlohmann::json& j, SurveyImage& image);
void to_json(nlohmann::json& j, const BoxAnnotation& box);
void from_json(const nlohmann::json& j, BoxAnnotation& box);

}  // namespace oxgen
