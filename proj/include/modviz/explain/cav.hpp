#pragma once

#include <string>
#include <vector>

namespace modviz::explain {

/// Per-point significance weights w in [0,1]^{N_x} and where they came from.
struct ClassActivationVector {
  std::vector<double> w;
  int target_class = 0;
  std::string method;  // "gradcam" | "mask"
  std::size_t pre_resize_length = 0;
};

}  // namespace modviz::explain
