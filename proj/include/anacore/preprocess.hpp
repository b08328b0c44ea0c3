#pragma once

#include <string>
#include <vector>

#include "anacore/chip.hpp"

namespace anacore {

struct EcgRecord {
  std::string id;
  double sample_rate_hz = 512.0;
  std::vector<int> samples;  // raw converter counts
  int label = -1;            // -1 when unlabeled
};

struct PreprocConfig {
  int pool_window = 32;
  int pool_stride = 16;
  int target_len = 432;
  double quant_scale = 0.0;  // <= 0 requests calibration before use
  int window_offset = 0;     // first raw sample of the analysis window

  // Raw samples needed: one extra for the derivative, then enough pooled
  // outputs to fill target_len.
  int min_raw_samples() const {
    return target_len * pool_stride + (pool_window - pool_stride) + 1;
  }
  void validate() const;
};

// out[i] = samples[i + 1] - samples[i]
std::vector<int> discrete_derivative(const std::vector<int>& samples);

// Peak-to-peak over sliding windows; emits floor((n - window) / stride) + 1
// values.
std::vector<int> maxmin_pool(const std::vector<int>& values, int window, int stride);

// clamp(round(v * scale), 0, max_act)
ActivationVector quantize5(const std::vector<int>& values, double scale, int max_act = 31);

// derivative -> max-min pooling -> 5-bit quantization over the configured
// analysis window. Throws when the record is too short.
ActivationVector preprocess_record(const EcgRecord& rec, const PreprocConfig& cfg);

// Pooled (pre-quantization) feature values of one record.
std::vector<int> pooled_features(const EcgRecord& rec, const PreprocConfig& cfg);

// Scale placing the given percentile of pooled magnitudes at full code.
double calibrate_quant_scale(const std::vector<const EcgRecord*>& records,
                             const PreprocConfig& cfg, double percentile = 0.99);

}  // namespace anacore
