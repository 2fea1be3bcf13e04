#pragma once

#include <array>
#include <vector>

namespace groundlex {

// One overgenerated detector hit.
struct Detection {
  int class_id = 0;
  double strength = 1.0;  // in (0, 1]
  double x = 0.0;
  double y = 0.0;
};

struct VideoClip {
  int clip_id = 0;
  std::vector<std::vector<Detection>> frames;  // frame-major

  int frame_count() const { return static_cast<int>(frames.size()); }
};

}  // namespace groundlex
