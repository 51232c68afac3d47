#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cws {

using Vec = std::vector<double>;

int64_t shape_numel(const std::vector<int>& shape);

// Named parameter block carrying a gradient of the same shape.
struct Tensor {
  std::string name;
  std::vector<int> shape;
  Vec v;  // values
  Vec g;  // gradient

  Tensor() = default;
  Tensor(std::string name, std::vector<int> shape);

  int64_t numel() const { return int64_t(v.size()); }
  void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

}  // namespace cws
