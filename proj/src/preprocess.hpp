#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "natcmd/classifiers.hpp"

namespace natcmd::detail {

inline LandmarkFrame preprocess(const LandmarkFrame& frame, Preprocessing p) {
  return p == Preprocessing::wrist_center ? wrist_centered(frame) : frame;
}

inline void softmax_in_place(std::span<double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
}

}  // namespace natcmd::detail
