#include "oxgen/patcher.hpp"

#include <algorithm>
#include <cmath>

#include "oxgen/error.hpp"

namespace oxgen {

void TileConfig::validate() const {
  if (patch_w < 1 || patch_h < 1) throw ConfigError("patch size must be positive");
  if (!(overlap > 0 && overlap < patch_w && overlap < patch_h))
    throw ConfigError("overlap must lie strictly between 0 and the patch size");
  if (!(retention_fraction > 0.0 && retention_fraction <= 1.0))
    throw ConfigError("retention fraction must lie in (0, 1]");
}

std::string patch_id(const std::string& image_id, int origin_x, int origin_y) {
  return image_id + "_" + std::to_string(origin_x) + "_" + std::to_string(origin_y);
}

std::vector<int> plan_axis(int dim, int patch, int stride) {
  dim = std::max(dim, patch);
  std::vector<int> origins;
  int last = 0;
  for (int o = 0; o + patch <= dim; o += stride) {
    origins.push_back(o);
    last = o;
  }
  if (last + patch < dim) origins.push_back(dim - patch);
  return origins;
}

std::vector<TileOrigin> plan_tiles(int width_px, int height_px, const TileConfig& cfg) {
  cfg.validate();
  const auto xs = plan_axis(width_px, cfg.patch_w, cfg.stride_x());
  const auto ys = plan_axis(height_px, cfg.patch_h, cfg.stride_y());
  std::vector<TileOrigin> tiles;
  tiles.reserve(xs.size() * ys.size());
  for (int y : ys)
    for (int x : xs) tiles.push_back({x, y});
  return tiles;
}

double retained_fraction(const BoxAnnotation& box, const TileOrigin& tile, int patch_w,
                         int patch_h) {
  const double ix = std::min(box.x_max(), static_cast<double>(tile.x + patch_w)) -
                    std::max(box.x_min, static_cast<double>(tile.x));
  const double iy = std::min(box.y_max(), static_cast<double>(tile.y + patch_h)) -
                    std::max(box.y_min, static_cast<double>(tile.y));
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  return (ix * iy) / box.area();
}

PointLabel tile_local_centroid(const BoxAnnotation& box, const TileOrigin& tile, int patch_w,
                               int patch_h) {
  PointLabel p = bbox_to_point(box);
  // Upper bound keeps points strictly inside [0, patch).
  p.x = std::clamp(p.x - tile.x, 0.0, patch_w - 1e-3);
  p.y = std::clamp(p.y - tile.y, 0.0, patch_h - 1e-3);
  return p;
}

namespace {

std::vector<Patch> tile_labels(int width_px, int height_px, std::span<const BoxAnnotation> boxes,
                               const TileConfig& cfg, const std::string& image_id) {
  const auto tiles = plan_tiles(width_px, height_px, cfg);
  std::vector<Patch> patches;
  patches.reserve(tiles.size());
  for (const auto& t : tiles) {
    Patch p;
    p.id = patch_id(image_id, t.x, t.y);
    p.parent_image_id = image_id;
    p.origin_x = t.x;
    p.origin_y = t.y;
    for (const auto& box : boxes) {
      if (!(box.area() > 0.0)) continue;
      const double fraction = retained_fraction(box, t, cfg.patch_w, cfg.patch_h);
      if (fraction >= cfg.retention_fraction)
        p.labels.push_back(tile_local_centroid(box, t, cfg.patch_w, cfg.patch_h));
    }
    patches.push_back(std::move(p));
  }
  return patches;
}

}  // namespace

std::vector<Patch> extract_patches(const Image& raster, std::span<const BoxAnnotation> boxes,
                                   const TileConfig& cfg, const std::string& image_id,
                                   bool with_rasters) {
  auto patches = tile_labels(raster.width, raster.height, boxes, cfg, image_id);
  if (with_rasters) {
    // Windows past the right/bottom edge read zeros (zero padding).
    for (auto& p : patches)
      p.raster = crop_or_pad(raster, p.origin_x, p.origin_y, cfg.patch_w, cfg.patch_h);
  }
  return patches;
}

std::vector<Patch> extract_patch_labels(int width_px, int height_px,
                                        std::span<const BoxAnnotation> boxes,
                                        const TileConfig& cfg, const std::string& image_id) {
  return tile_labels(width_px, height_px, boxes, cfg, image_id);
}

std::vector<Patch> filter_nonempty(std::vector<Patch> patches) {
  std::erase_if(patches, [](const Patch& p) { return p.labels.empty(); });
  return patches;
}

}  // namespace oxgen
