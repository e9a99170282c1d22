#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace pxc {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  int64_t size() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.v.assign(static_cast<size_t>(t.size()), 0.0);
    return t;
  }
};

}  // namespace pxc
