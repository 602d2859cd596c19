#pragma once

#include <optional>
#include <vector>

namespace densedet {

// Axis-aligned box in corner convention; (x2, y2) is the far edge, so
// width = x2 - x1 with no +1 term.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double center_x() const { return x1 + 0.5 * width(); }
  double center_y() const { return y1 + 0.5 * height(); }
  bool valid() const;

  bool operator==(const Box&) const = default;
};

// Builds a box and throws Error(Input) when the invariants do not hold.
Box make_box(double x1, double y1, double x2, double y2);

// COCO [x, y, w, h] with negative extents clamped to zero.
Box box_from_xywh(double x, double y, double w, double h);

double intersection_area(const Box& a, const Box& b);

// Intersection over union; 0 when the union is empty.
double iou(const Box& a, const Box& b);

struct AnchorSpec {
  double base_size = 16.0;
  std::vector<double> scales{8.0, 16.0, 32.0};
  std::vector<double> ratios{0.5, 1.0, 2.0};  // height / width
  int stride = 16;

  std::size_t anchors_per_cell() const { return scales.size() * ratios.size(); }
  void validate() const;
};

// Anchors for a feat_h x feat_w grid, ordered row-major over cells, then by
// scale, then by ratio. Each anchor has area (base_size * scale)^2.
std::vector<Box> generate_anchors(const AnchorSpec& spec, int feat_h, int feat_w);

struct BoxDelta {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;

  bool finite() const;
};

struct ImageBounds {
  double width = 0.0;
  double height = 0.0;
};

// Center offsets normalised by anchor size and log size ratios, each divided
// by a fixed weight (1 by default).
class BoxCoder {
 public:
  struct Weights {
    double x = 1.0, y = 1.0, w = 1.0, h = 1.0;
  };

  BoxCoder() = default;
  explicit BoxCoder(Weights weights) : weights_(weights) {}

  BoxDelta encode(const Box& anchor, const Box& target) const;
  Box decode(const Box& anchor, const BoxDelta& delta,
             std::optional<ImageBounds> clip = std::nullopt) const;

 private:
  Weights weights_{};
};

inline BoxDelta encode_box(const Box& anchor, const Box& target) {
  return BoxCoder{}.encode(anchor, target);
}

inline Box decode_box(const Box& anchor, const BoxDelta& delta,
                      std::optional<ImageBounds> clip = std::nullopt) {
  return BoxCoder{}.decode(anchor, delta, clip);
}

Box clip_box(const Box& box, const ImageBounds& bounds);

}  // namespace densedet
