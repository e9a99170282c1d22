#pragma once

#include "pxc/losses.hpp"
#include "pxc/scene.hpp"

namespace pxc {

// What the network predicts for one image, at 1/4 input resolution.
// instance_probs: (n+1)-channel softmax; semantic_probs: (C+1)-channel
// softmax; center_pred: raw per-pixel offset to the object center, in
// full-resolution pixel units (dx, dy).
struct NetworkOutputs {
  ProbMap instance_probs;
  ProbMap semantic_probs;
  CenterOffsetMap center_pred;
};

}  // namespace pxc
