#include "oxgen/imaging.hpp"

#include <algorithm>
#include <cmath>

#include "oxgen/error.hpp"
#include "oxgen/random.hpp"

namespace oxgen {

double estimate_scale(std::span<const BoxAnnotation> boxes, double target_length_px) {
  if (!(target_length_px > 0.0)) throw ConfigError("target animal length must be positive");
  if (boxes.empty()) throw InputError("no animals to calibrate");
  std::vector<double> sides;
  sides.reserve(boxes.size());
  for (const auto& b : boxes) sides.push_back(b.long_side());
  std::sort(sides.begin(), sides.end());
  const std::size_t n = sides.size();
  const double median = n % 2 == 1 ? sides[n / 2] : 0.5 * (sides[n / 2 - 1] + sides[n / 2]);
  if (!(median > 0.0)) throw InputError("animal boxes have zero extent");
  return target_length_px / median;
}

int scaled_dimension(int dim, double scale) {
  if (!(scale > 0.0)) throw ConfigError("scale must be positive");
  const long out = std::lround(dim * scale);
  if (out < 1) throw InputError("resized dimension rounds to zero");
  return static_cast<int>(out);
}

namespace {

struct Tap {
  int i0;
  int i1;
  double frac;
};

std::vector<Tap> taps(int out_dim, int in_dim, double scale) {
  std::vector<Tap> t(static_cast<std::size_t>(out_dim));
  for (int o = 0; o < out_dim; ++o) {
    double s = (o + 0.5) / scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_dim - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in_dim - 1);
    t[o] = {i0, i1, s - i0};
  }
  return t;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

}  // namespace

Image resize_bilinear(const Image& src, double scale) {
  if (src.empty()) throw InputError("cannot resize an empty raster");
  const int out_w = scaled_dimension(src.width, scale);
  const int out_h = scaled_dimension(src.height, scale);
  if (scale == 1.0) return src;
  const auto tx = taps(out_w, src.width, scale);
  const auto ty = taps(out_h, src.height, scale);
  Image out(out_w, out_h, src.channels);
  for (int y = 0; y < out_h; ++y) {
    const Tap& vy = ty[y];
    for (int x = 0; x < out_w; ++x) {
      const Tap& vx = tx[x];
      for (int c = 0; c < src.channels; ++c) {
        const double top = src.at(vx.i0, vy.i0, c) * (1.0 - vx.frac) + src.at(vx.i1, vy.i0, c) * vx.frac;
        const double bot = src.at(vx.i0, vy.i1, c) * (1.0 - vx.frac) + src.at(vx.i1, vy.i1, c) * vx.frac;
        out.at(x, y, c) = to_byte(top * (1.0 - vy.frac) + bot * vy.frac);
      }
    }
  }
  return out;
}

BoxAnnotation scale_box(const BoxAnnotation& box, double scale) {
  BoxAnnotation out = box;
  out.x_min *= scale;
  out.y_min *= scale;
  out.box_w *= scale;
  out.box_h *= scale;
  return out;
}

PointLabel scale_point(const PointLabel& p, double scale) {
  PointLabel out = p;
  out.x *= scale;
  out.y *= scale;
  return out;
}

std::string_view to_string(AugmentStage stage) {
  switch (stage) {
    case AugmentStage::brightness_contrast: return "brightness_contrast";
    case AugmentStage::hue_saturation_value: return "hue_saturation_value";
    case AugmentStage::flip: return "flip";
    case AugmentStage::rotate90: return "rotate90";
    case AugmentStage::random_scale: return "random_scale";
    case AugmentStage::blur: return "blur";
  }
  return "?";
}

AugmentConfig AugmentConfig::disabled_random_stages() {
  AugmentConfig cfg;
  cfg.probability.fill(0.0);
  return cfg;
}

void AugmentConfig::validate() const {
  for (double p : probability)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("stage probability must lie in [0, 1]");
  for (const Range* r : {&brightness, &contrast, &hue_shift, &sat_shift, &val_shift, &scale_limit})
    if (!(r->lo <= r->hi)) throw ConfigError("augmentation range is inverted");
  if (scale_limit.lo <= -1.0) throw ConfigError("scale limit must stay above -1");
  if (blur_min < 1 || blur_max < blur_min) throw ConfigError("invalid blur kernel range");
  if (pad_min_width < 1 || pad_min_height < 1 || crop_width < 1 || crop_height < 1)
    throw ConfigError("pad/crop sizes must be positive");
  if (crop_width > pad_min_width || crop_height > pad_min_height)
    throw ConfigError("crop must fit inside the padded size");
  for (float s : stddev)
    if (!(s > 0.0f)) throw ConfigError("normalization deviations must be positive");
}

namespace stages {

Image brightness_contrast(const Image& img, double brightness, double contrast) {
  const double alpha = 1.0 + contrast;
  const double beta = brightness * 255.0;
  std::array<std::uint8_t, 256> lut;
  for (int v = 0; v < 256; ++v) lut[v] = to_byte(alpha * v + beta);
  Image out = img;
  for (auto& p : out.pixels) p = lut[p];
  return out;
}

namespace {

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = 60.0 * std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d + 2.0);
  } else {
    h = 60.0 * ((r - g) / d + 4.0);
  }
  if (h < 0.0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace

Image hue_saturation_value(const Image& img, double hue, double sat, double val) {
  Image out = img;
  // Shifts are on the 8-bit HSV scale: hue in [0, 180), S and V in [0, 255].
  const double dh = hue * 2.0;
  const double ds = sat / 255.0;
  const double dv = val / 255.0;
  for (std::size_t i = 0; i + 2 < out.pixels.size(); i += 3) {
    double h, s, v;
    rgb_to_hsv(out.pixels[i] / 255.0, out.pixels[i + 1] / 255.0, out.pixels[i + 2] / 255.0, h, s, v);
    h = std::fmod(h + dh, 360.0);
    if (h < 0.0) h += 360.0;
    s = std::clamp(s + ds, 0.0, 1.0);
    v = std::clamp(v + dv, 0.0, 1.0);
    double r, g, b;
    hsv_to_rgb(h, s, v, r, g, b);
    out.pixels[i] = to_byte(r * 255.0);
    out.pixels[i + 1] = to_byte(g * 255.0);
    out.pixels[i + 2] = to_byte(b * 255.0);
  }
  return out;
}

Image flip(const Image& img, FlipAxis axis) {
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int sx = axis == FlipAxis::horizontal ? img.width - 1 - x : x;
      const int sy = axis == FlipAxis::vertical ? img.height - 1 - y : y;
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

void flip_labels(std::vector<PointLabel>& labels, FlipAxis axis, int width, int height) {
  for (auto& p : labels) {
    if (axis == FlipAxis::horizontal)
      p.x = (width - 1) - p.x;
    else
      p.y = (height - 1) - p.y;
  }
}

Image rotate90(const Image& img, int quarter_turns) {
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  Image cur = img;
  for (int t = 0; t < quarter_turns; ++t) {
    Image next(cur.height, cur.width, cur.channels);
    for (int y = 0; y < cur.height; ++y)
      for (int x = 0; x < cur.width; ++x)
        for (int c = 0; c < cur.channels; ++c)
          next.at(y, cur.width - 1 - x, c) = cur.at(x, y, c);
    cur = std::move(next);
  }
  return cur;
}

void rotate90_labels(std::vector<PointLabel>& labels, int quarter_turns, int width, int height) {
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  for (int t = 0; t < quarter_turns; ++t) {
    for (auto& p : labels) {
      const double nx = p.y;
      const double ny = (width - 1) - p.x;
      p.x = nx;
      p.y = ny;
    }
    std::swap(width, height);
  }
}

Image box_blur(const Image& img, int kernel) {
  if (kernel <= 1) return img;
  const int before = (kernel - 1) / 2;
  const int W = img.width;
  const int H = img.height;
  const int C = img.channels;
  std::vector<int> rows(static_cast<std::size_t>(W) * H * C);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        int sum = 0;
        for (int k = 0; k < kernel; ++k) {
          const int sx = std::clamp(x - before + k, 0, W - 1);
          sum += img.at(sx, y, c);
        }
        rows[(static_cast<std::size_t>(y) * W + x) * C + c] = sum;
      }
  Image out(W, H, C);
  const int area = kernel * kernel;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        int sum = 0;
        for (int k = 0; k < kernel; ++k) {
          const int sy = std::clamp(y - before + k, 0, H - 1);
          sum += rows[(static_cast<std::size_t>(sy) * W + x) * C + c];
        }
        out.at(x, y, c) = static_cast<std::uint8_t>((sum + area / 2) / area);
      }
  return out;
}

std::array<int, 2> pad_if_needed(Image& img, int min_width, int min_height) {
  const int pad_w = std::max(0, min_width - img.width);
  const int pad_h = std::max(0, min_height - img.height);
  if (pad_w == 0 && pad_h == 0) return {0, 0};
  const int left = pad_w / 2;
  const int top = pad_h / 2;
  img = crop_or_pad(img, -left, -top, img.width + pad_w, img.height + pad_h);
  return {left, top};
}

std::array<int, 2> center_crop(Image& img, int width, int height) {
  if (img.width < width || img.height < height)
    throw InputError("center crop larger than the raster");
  const int x0 = (img.width - width) / 2;
  const int y0 = (img.height - height) / 2;
  img = crop_or_pad(img, x0, y0, width, height);
  return {x0, y0};
}

FloatTensor normalize(const Image& img, const std::array<float, 3>& mean,
                      const std::array<float, 3>& stddev, float max_pixel_value) {
  FloatTensor t;
  t.width = img.width;
  t.height = img.height;
  t.channels = img.channels;
  t.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t.at(c, x, y) = (static_cast<float>(img.at(x, y, c)) / max_pixel_value - mean[c]) / stddev[c];
  return t;
}

}  // namespace stages

AugmentResult augment(const Image& patch, std::span<const PointLabel> labels,
                      const AugmentConfig& cfg, std::string_view stream_key) {
  cfg.validate();
  if (patch.channels != 3) throw InputError("augmentation expects an 8-bit RGB patch");
  if (patch.empty()) throw InputError("augmentation expects a non-empty patch");

  Rng rng(derive_seed(cfg.seed, stream_key));
  AugmentResult out;
  Image img = patch;
  std::vector<PointLabel> pts(labels.begin(), labels.end());
  auto fires = [&](AugmentStage s) {
    return rng.chance(cfg.probability[static_cast<std::size_t>(s)]);
  };
  auto note = [&](AugmentStage s, std::vector<double> params) {
    out.trace.fired.push_back({s, std::move(params)});
  };

  if (fires(AugmentStage::brightness_contrast)) {
    const double b = rng.uniform(cfg.brightness.lo, cfg.brightness.hi);
    const double c = rng.uniform(cfg.contrast.lo, cfg.contrast.hi);
    img = stages::brightness_contrast(img, b, c);
    note(AugmentStage::brightness_contrast, {b, c});
  }
  if (fires(AugmentStage::hue_saturation_value)) {
    const double h = rng.uniform(cfg.hue_shift.lo, cfg.hue_shift.hi);
    const double s = rng.uniform(cfg.sat_shift.lo, cfg.sat_shift.hi);
    const double v = rng.uniform(cfg.val_shift.lo, cfg.val_shift.hi);
    img = stages::hue_saturation_value(img, h, s, v);
    note(AugmentStage::hue_saturation_value, {h, s, v});
  }
  if (fires(AugmentStage::flip)) {
    const auto axis = rng.below(2) == 0 ? stages::FlipAxis::horizontal : stages::FlipAxis::vertical;
    stages::flip_labels(pts, axis, img.width, img.height);
    img = stages::flip(img, axis);
    note(AugmentStage::flip, {axis == stages::FlipAxis::horizontal ? 0.0 : 1.0});
  }
  if (fires(AugmentStage::rotate90)) {
    const int k = static_cast<int>(rng.below(4));
    stages::rotate90_labels(pts, k, img.width, img.height);
    img = stages::rotate90(img, k);
    note(AugmentStage::rotate90, {static_cast<double>(k)});
  }
  if (fires(AugmentStage::random_scale)) {
    const double f = 1.0 + rng.uniform(cfg.scale_limit.lo, cfg.scale_limit.hi);
    img = resize_bilinear(img, f);
    for (auto& p : pts) p = scale_point(p, f);
    note(AugmentStage::random_scale, {f});
  }
  if (fires(AugmentStage::blur)) {
    const int k = rng.between(cfg.blur_min, cfg.blur_max);
    img = stages::box_blur(img, k);
    note(AugmentStage::blur, {static_cast<double>(k)});
  }

  const auto [left, top] = stages::pad_if_needed(img, cfg.pad_min_width, cfg.pad_min_height);
  for (auto& p : pts) {
    p.x += left;
    p.y += top;
  }
  const auto [x0, y0] = stages::center_crop(img, cfg.crop_width, cfg.crop_height);
  out.labels.reserve(pts.size());
  for (auto& p : pts) {
    p.x -= x0;
    p.y -= y0;
    if (p.x >= 0.0 && p.x < cfg.crop_width && p.y >= 0.0 && p.y < cfg.crop_height)
      out.labels.push_back(std::move(p));
  }
  out.tensor = stages::normalize(img, cfg.mean, cfg.stddev, cfg.max_pixel_value);
  out.raster = std::move(img);
  return out;
}

}  // namespace oxgen
