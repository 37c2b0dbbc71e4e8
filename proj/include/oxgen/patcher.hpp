#pragma once

#include <span>
#include <string>
#include <vector>

#include "oxgen/annotations.hpp"
#include "oxgen/raster.hpp"

namespace oxgen {

struct TileConfig {
  int patch_w = 512;
  int patch_h = 512;
  int overlap = 256;
  double retention_fraction = 0.5;

  int stride_x() const { return patch_w - overlap; }
  int stride_y() const { return patch_h - overlap; }
  /// Throws ConfigError unless 0 < overlap < patch size and
  /// 0 < retention_fraction <= 1.
  void validate() const;
};

struct TileOrigin {
  int x = 0;
  int y = 0;
  friend bool operator==(const TileOrigin&, const TileOrigin&) = default;
};

struct Patch {
  std::string id;  // {image_id}_{origin_x}_{origin_y}
  std::string parent_image_id;
  int origin_x = 0;
  int origin_y = 0;
  std::vector<PointLabel> labels;  // patch-local
  Image raster;
};

std::string patch_id(const std::string& image_id, int origin_x, int origin_y);

/// Origins along one axis: multiples of the stride, plus a final clamped
/// origin at dim - patch when the regular ones stop short of the edge.
/// Dimensions below the patch size are treated as padded up to it.
std::vector<int> plan_axis(int dim, int patch, int stride);

/// Row-major tile origins for a width x height image.
std::vector<TileOrigin> plan_tiles(int width_px, int height_px, const TileConfig& cfg);

/// Fraction of the box area inside the tile window.
double retained_fraction(const BoxAnnotation& box, const TileOrigin& tile, int patch_w,
                         int patch_h);

/// Full-box centroid in tile-local coordinates, clamped into the patch.
PointLabel tile_local_centroid(const BoxAnnotation& box, const TileOrigin& tile,
                               int patch_w, int patch_h);

/// Tiles the raster (zero-padded bottom/right to at least one patch) and
/// keeps each box in every tile covering >= retention_fraction of its area.
/// Set `with_rasters` false to skip pixel copies.
std::vector<Patch> extract_patches(const Image& raster, std::span<const BoxAnnotation> boxes,
                                   const TileConfig& cfg, const std::string& image_id,
                                   bool with_rasters = true);

/// Label-only variant for images whose pixels are not loaded.
std::vector<Patch> extract_patch_labels(int width_px, int height_px,
                                        std::span<const BoxAnnotation> boxes,
                                        const TileConfig& cfg, const std::string& image_id);

std::vector<Patch> filter_nonempty(std::vector<Patch> patches);

}  // namespace oxgen
