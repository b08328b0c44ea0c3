#include "anacore/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace anacore {

void PreprocConfig::validate() const {
  if (pool_window < 1 || pool_stride < 1) throw std::invalid_argument("pool parameters must be positive");
  if (pool_stride > pool_window) throw std::invalid_argument("pool_stride must not exceed pool_window");
  if (target_len < 1) throw std::invalid_argument("target_len must be positive");
  if (window_offset < 0) throw std::invalid_argument("window_offset must be non-negative");
}

std::vector<int> discrete_derivative(const std::vector<int>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("derivative needs at least two samples");
  std::vector<int> out(samples.size() - 1);
  for (size_t i = 0; i + 1 < samples.size(); ++i) out[i] = samples[i + 1] - samples[i];
  return out;
}

std::vector<int> maxmin_pool(const std::vector<int>& values, int window, int stride) {
  if (window < 1 || stride < 1) throw std::invalid_argument("pool parameters must be positive");
  if (static_cast<int>(values.size()) < window)
    throw std::invalid_argument("pool window exceeds input length");
  const int n = (static_cast<int>(values.size()) - window) / stride + 1;
  std::vector<int> out(n);
  for (int k = 0; k < n; ++k) {
    int lo = values[k * stride];
    int hi = lo;
    for (int i = 1; i < window; ++i) {
      const int v = values[k * stride + i];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out[k] = hi - lo;
  }
  return out;
}

ActivationVector quantize5(const std::vector<int>& values, double scale, int max_act) {
  if (!(scale > 0.0)) throw std::invalid_argument("quantization scale must be positive");
  ActivationVector out;
  out.values.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    const long long q = std::llround(values[i] * scale);
    out.values[i] = static_cast<int>(std::clamp<long long>(q, 0, max_act));
  }
  return out;
}

std::vector<int> pooled_features(const EcgRecord& rec, const PreprocConfig& cfg) {
  cfg.validate();
  const int need = cfg.min_raw_samples();
  if (static_cast<int>(rec.samples.size()) < cfg.window_offset + need)
    throw std::invalid_argument("record " + rec.id + " too short: need " +
                                std::to_string(cfg.window_offset + need) + " samples, have " +
                                std::to_string(rec.samples.size()));
  std::vector<int> window(rec.samples.begin() + cfg.window_offset,
                          rec.samples.begin() + cfg.window_offset + need);
  return maxmin_pool(discrete_derivative(window), cfg.pool_window, cfg.pool_stride);
}

ActivationVector preprocess_record(const EcgRecord& rec, const PreprocConfig& cfg) {
  const std::vector<int> pooled = pooled_features(rec, cfg);
  if (static_cast<int>(pooled.size()) != cfg.target_len)
    throw std::logic_error("pooled length mismatch");
  return quantize5(pooled, cfg.quant_scale);
}

double calibrate_quant_scale(const std::vector<const EcgRecord*>& records,
                             const PreprocConfig& cfg, double percentile) {
  if (records.empty()) throw std::invalid_argument("calibration needs at least one record");
  if (!(percentile > 0.0 && percentile <= 1.0))
    throw std::invalid_argument("percentile must be in (0, 1]");
  std::vector<int> all;
  for (const EcgRecord* r : records) {
    const std::vector<int> pooled = pooled_features(*r, cfg);
    all.insert(all.end(), pooled.begin(), pooled.end());
  }
  std::sort(all.begin(), all.end());
  const size_t idx = std::min(all.size() - 1,
                              static_cast<size_t>(std::llround(percentile * (all.size() - 1))));
  const int ref = std::max(1, all[idx]);
  return 31.0 / ref;
}

}  // namespace anacore
