#pragma once

#include <Eigen/Dense>

#include "emotrans/error.hpp"

namespace emotrans {

inline constexpr int kFeatureDim = 768;
inline constexpr double kFeatureFrameRate = 50.0;  // frames per second

// Frame-level emotional representation of one utterance: one row per frame.
struct FeatureSequence {
  Eigen::MatrixXf frames;         // T x D
  double frame_rate = kFeatureFrameRate;

  long num_frames() const { return frames.rows(); }
  long dim() const { return frames.cols(); }

  void validate() const {
    if (frames.rows() < 1) throw ValidationError("feature sequence: T must be >= 1");
    if (!(frame_rate > 0)) throw ValidationError("feature sequence: frame_rate must be > 0");
    if (!frames.allFinite()) throw NumericError("feature sequence: non-finite value");
  }
};

}  // namespace emotrans
