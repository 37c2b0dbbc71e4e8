#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oxgen/annotations.hpp"
#include "oxgen/raster.hpp"

namespace oxgen {

inline constexpr double kTrainAnimalLengthPx = 100.0;
inline constexpr double kTestAnimalLengthPx = 70.0;

/// target_length_px / median(long side) over the boxes. Throws InputError
/// ("no animals to calibrate") for an empty list.
double estimate_scale(std::span<const BoxAnnotation> boxes, double target_length_px);

/// Output dimension for `dim` under `scale`; throws InputError when it
/// rounds to zero.
int scaled_dimension(int dim, double scale);

/// Bilinear resampling with edge clamping. Output dims are
/// round(dim * scale); source coordinates use pixel-centre alignment.
Image resize_bilinear(const Image& src, double scale);

/// Applies the coordinate map p' = p * scale used alongside resize_bilinear.
BoxAnnotation scale_box(const BoxAnnotation& box, double scale);
PointLabel scale_point(const PointLabel& p, double scale);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

enum class AugmentStage {
  brightness_contrast,
  hue_saturation_value,
  flip,
  rotate90,
  random_scale,
  blur,
};
inline constexpr std::size_t kRandomStageCount = 6;

std::string_view to_string(AugmentStage stage);

struct AugmentConfig {
  // Firing probability per random stage, indexed by AugmentStage.
  std::array<double, kRandomStageCount> probability = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};

  Range brightness{-0.45, 0.55};
  Range contrast{-0.60, 1.00};
  Range hue_shift{-5.0, 5.0};  // on the [0, 180) hue scale
  Range sat_shift{-50.0, 50.0};
  Range val_shift{-20.0, 20.0};
  Range scale_limit{-0.15, 0.15};
  int blur_min = 2;
  int blur_max = 4;

  int pad_min_width = 512;
  int pad_min_height = 512;
  int crop_width = 512;
  int crop_height = 512;

  std::array<float, 3> mean = {0.485f, 0.456f, 0.406f};
  std::array<float, 3> stddev = {0.229f, 0.224f, 0.225f};
  float max_pixel_value = 255.0f;

  std::uint64_t seed = 0;

  static AugmentConfig disabled_random_stages();
  /// Throws ConfigError when a probability is outside [0, 1] or a range
  /// is inverted.
  void validate() const;
};

/// Which stages fired and with what parameters; useful for previews.
struct AugmentTrace {
  struct Fired {
    AugmentStage stage;
    std::vector<double> params;
  };
  std::vector<Fired> fired;
};

struct AugmentResult {
  Image raster;        // 8-bit 512x512 result before normalization
  FloatTensor tensor;  // normalized CHW floats
  std::vector<PointLabel> labels;
  AugmentTrace trace;
};

/// Runs the fixed nine-stage pipeline. The RNG stream is derived from
/// (cfg.seed, stream_key) so results do not depend on processing order.
/// Throws InputError for non-RGB input.
AugmentResult augment(const Image& patch, std::span<const PointLabel> labels,
                      const AugmentConfig& cfg, std::string_view stream_key = {});

// Individual stages, exposed for tests and previews.
namespace stages {

Image brightness_contrast(const Image& img, double brightness, double contrast);
Image hue_saturation_value(const Image& img, double hue, double sat, double val);

enum class FlipAxis { horizontal, vertical };
Image flip(const Image& img, FlipAxis axis);
void flip_labels(std::vector<PointLabel>& labels, FlipAxis axis, int width, int height);

/// Counter-clockwise rotation by quarter_turns * 90 degrees.
Image rotate90(const Image& img, int quarter_turns);
void rotate90_labels(std::vector<PointLabel>& labels, int quarter_turns, int width,
                     int height);

/// Box blur; window for output x spans [x - (k-1)/2, x - (k-1)/2 + k - 1].
Image box_blur(const Image& img, int kernel);

/// Zero-pads symmetrically (extra pixel bottom/right) up to the minimum size.
/// Returns the applied (left, top) offset.
std::array<int, 2> pad_if_needed(Image& img, int min_width, int min_height);
/// Returns the (x0, y0) of the crop window.
std::array<int, 2> center_crop(Image& img, int width, int height);

FloatTensor normalize(const Image& img, const std::array<float, 3>& mean,
                      const std::array<float, 3>& stddev, float max_pixel_value);

}  // namespace stages

}  // namespace oxgen
