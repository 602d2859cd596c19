#include "densedet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "densedet/error.hpp"

namespace densedet {

namespace {
const double kMaxLogScale = std::log(1000.0 / 16.0);
}  // namespace

bool Box::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
         std::isfinite(y2) && x2 >= x1 && y2 >= y1;
}

Box make_box(double x1, double y1, double x2, double y2) {
  Box b{x1, y1, x2, y2};
  if (!b.valid()) {
    fail_input("invalid box (" + std::to_string(x1) + ", " + std::to_string(y1) + ", " +
               std::to_string(x2) + ", " + std::to_string(y2) + ")");
  }
  return b;
}

Box box_from_xywh(double x, double y, double w, double h) {
  return Box{x, y, x + std::max(0.0, w), y + std::max(0.0, h)};
}

double intersection_area(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

void AnchorSpec::validate() const {
  if (scales.empty() || ratios.empty()) fail_input("anchor spec needs at least one scale and one ratio");
  for (double s : scales)
    if (!(s > 0.0) || !std::isfinite(s)) fail_input("anchor scales must be positive");
  for (double r : ratios)
    if (!(r > 0.0) || !std::isfinite(r)) fail_input("anchor ratios must be positive");
  if (!(base_size > 0.0)) fail_input("anchor base_size must be positive");
  if (stride < 1) fail_input("anchor stride must be a positive integer");
}

std::vector<Box> generate_anchors(const AnchorSpec& spec, int feat_h, int feat_w) {
  spec.validate();
  if (feat_h < 1 || feat_w < 1) fail_input("feature map dimensions must be >= 1");

  // Half extents for one cell, in scale-major then ratio order.
  std::vector<std::pair<double, double>> half;
  half.reserve(spec.anchors_per_cell());
  for (double scale : spec.scales) {
    const double side = spec.base_size * scale;
    for (double ratio : spec.ratios) {
      const double root = std::sqrt(ratio);
      half.emplace_back(0.5 * side / root, 0.5 * side * root);
    }
  }

  std::vector<Box> anchors;
  anchors.reserve(static_cast<std::size_t>(feat_h) * feat_w * half.size());
  for (int row = 0; row < feat_h; ++row) {
    const double cy = (row + 0.5) * spec.stride;
    for (int col = 0; col < feat_w; ++col) {
      const double cx = (col + 0.5) * spec.stride;
      for (const auto& [hw, hh] : half) anchors.push_back(Box{cx - hw, cy - hh, cx + hw, cy + hh});
    }
  }
  return anchors;
}

bool BoxDelta::finite() const {
  return std::isfinite(tx) && std::isfinite(ty) && std::isfinite(tw) && std::isfinite(th);
}

BoxDelta BoxCoder::encode(const Box& anchor, const Box& target) const {
  if (!(anchor.width() > 0.0) || !(anchor.height() > 0.0))
    fail_input("cannot encode against an anchor with zero width or height");
  if (!(target.width() > 0.0) || !(target.height() > 0.0))
    fail_input("cannot encode a target with zero width or height");
  const double aw = anchor.width();
  const double ah = anchor.height();
  return BoxDelta{
      weights_.x * (target.center_x() - anchor.center_x()) / aw,
      weights_.y * (target.center_y() - anchor.center_y()) / ah,
      weights_.w * std::log(target.width() / aw),
      weights_.h * std::log(target.height() / ah),
  };
}

Box BoxCoder::decode(const Box& anchor, const BoxDelta& delta,
                     std::optional<ImageBounds> clip) const {
  if (!(anchor.width() > 0.0) || !(anchor.height() > 0.0))
    fail_input("cannot decode against an anchor with zero width or height");
  if (!delta.finite()) fail_input("cannot decode a non-finite box delta");
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double cx = anchor.center_x() + delta.tx / weights_.x * aw;
  const double cy = anchor.center_y() + delta.ty / weights_.y * ah;
  // Size exponents are capped so untrained regressors cannot overflow.
  const double w = aw * std::exp(std::min(delta.tw / weights_.w, kMaxLogScale));
  const double h = ah * std::exp(std::min(delta.th / weights_.h, kMaxLogScale));
  Box out{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  if (clip) out = clip_box(out, *clip);
  return out;
}

Box clip_box(const Box& box, const ImageBounds& bounds) {
  Box out{std::clamp(box.x1, 0.0, bounds.width), std::clamp(box.y1, 0.0, bounds.height),
          std::clamp(box.x2, 0.0, bounds.width), std::clamp(box.y2, 0.0, bounds.height)};
  return out;
}

}  // namespace densedet
