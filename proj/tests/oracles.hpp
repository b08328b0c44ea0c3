#pragma once

// Independent re-implementations used as test oracles. Everything here is
// deliberately written as plain loops against first principles, without
// calling into the library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// Integer dot products, one triple loop, no slicing or saturation.
inline std::vector<long long> matvec(const std::vector<int>& w, int rows, int cols,
                                     const std::vector<int>& x) {
  std::vector<long long> out(cols, 0);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i)
      out[j] += static_cast<long long>(w[static_cast<size_t>(i) * cols + j]) * x[i];
  return out;
}

// ADC transfer curve from the definition: clamp, scale to codes, round half
// away from zero.
inline int digitize(double v, double lo, double hi, int bits) {
  const int max_code = (1 << bits) - 1;
  v = std::min(std::max(v, lo), hi);
  const double u = (v - lo) / (hi - lo) * max_code;
  return static_cast<int>(std::llround(u));
}

// Signed-row expansion: row 2i carries |w| when w > 0, row 2i+1 when w < 0.
struct ExpandedRows {
  std::vector<int> values;  // (2*rows) x cols
  int rows2 = 0, cols = 0;
};
inline ExpandedRows expand_signed(const std::vector<int>& w, int rows, int cols) {
  ExpandedRows e;
  e.rows2 = 2 * rows;
  e.cols = cols;
  e.values.assign(static_cast<size_t>(e.rows2) * cols, 0);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const int v = w[static_cast<size_t>(i) * cols + j];
      if (v >= 0)
        e.values[static_cast<size_t>(2 * i) * cols + j] = v;
      else
        e.values[static_cast<size_t>(2 * i + 1) * cols + j] = -v;
    }
  return e;
}

// Operation counting by walking every multiply of the layer explicitly.
inline long long conv_ops(int in_len, int kernel, int stride, int out_channels) {
  long long macs = 0;
  for (int p = 0; p + kernel <= in_len; p += stride)
    for (int ch = 0; ch < out_channels; ++ch)
      for (int k = 0; k < kernel; ++k) ++macs;
  return 2 * macs;
}
inline long long linear_ops(int in_features, int out_features) {
  long long macs = 0;
  for (int j = 0; j < out_features; ++j)
    for (int i = 0; i < in_features; ++i) ++macs;
  return 2 * macs;
}

// Windowed peak-to-peak, scanning each window with independent max/min loops.
inline std::vector<int> maxmin_pool(const std::vector<int>& s, int window, int stride) {
  std::vector<int> out;
  for (size_t k = 0; k + window <= s.size(); k += stride) {
    int mx = s[k], mn = s[k];
    for (int i = 1; i < window; ++i) {
      mx = std::max(mx, s[k + i]);
      mn = std::min(mn, s[k + i]);
    }
    out.push_back(mx - mn);
  }
  return out;
}

// Confusion counting by case enumeration.
struct Confusion {
  long long tp = 0, fn = 0, fp = 0, tn = 0;
};
inline Confusion confusion(const std::vector<int>& labels, const std::vector<int>& preds) {
  Confusion c;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1 && preds[i] == 1) ++c.tp;
    if (labels[i] == 1 && preds[i] == 0) ++c.fn;
    if (labels[i] == 0 && preds[i] == 1) ++c.fp;
    if (labels[i] == 0 && preds[i] == 0) ++c.tn;
  }
  return c;
}

// Central finite differences of f around w, one coordinate at a time.
inline std::vector<double> finite_diff(const std::function<double()>& f, std::vector<double>& w,
                                       double eps = 1e-5) {
  std::vector<double> g(w.size());
  for (size_t i = 0; i < w.size(); ++i) {
    const double keep = w[i];
    w[i] = keep + eps;
    const double up = f();
    w[i] = keep - eps;
    const double dn = f();
    w[i] = keep;
    g[i] = (up - dn) / (2 * eps);
  }
  return g;
}

inline std::uint64_t fnv1a(const std::vector<int>& v) {
  std::uint64_t h = 1469598103934665603ull;
  for (int x : v) {
    for (int b = 0; b < 4; ++b) {
      h ^= static_cast<std::uint64_t>((x >> (8 * b)) & 0xff);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace oracle
