#include "anacore/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace anacore {

bool is_mac_layer(const Layer& l) {
  return std::holds_alternative<Conv1dLayer>(l) || std::holds_alternative<LinearLayer>(l);
}

int layer_out_count(const Layer& l, int in_count) {
  if (const auto* c = std::get_if<Conv1dLayer>(&l)) {
    if (c->in_len != in_count) throw std::invalid_argument("conv input length mismatch");
    return c->out_count();
  }
  if (const auto* f = std::get_if<LinearLayer>(&l)) {
    if (f->in_features != in_count) throw std::invalid_argument("linear input length mismatch");
    return f->out_features;
  }
  if (std::holds_alternative<ReluLayer>(l)) return in_count;
  if (const auto* p = std::get_if<AvgPoolLayer>(&l)) {
    if (p->group_size < 1 || in_count % p->group_size != 0)
      throw std::invalid_argument("pool group must divide input length");
    return in_count / p->group_size;
  }
  if (const auto* p = std::get_if<MaxPoolLayer>(&l)) {
    if (p->group_size < 1 || in_count % p->group_size != 0)
      throw std::invalid_argument("pool group must divide input length");
    return in_count / p->group_size;
  }
  return 1;  // argmax
}

void LayerGraph::validate() const {
  if (input_len < 1) throw std::invalid_argument("graph input length must be positive");
  if (layers.empty()) throw std::invalid_argument("graph has no layers");
  int n = input_len;
  for (size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (const auto* c = std::get_if<Conv1dLayer>(&l)) {
      if (c->kernel < 1 || c->stride < 1 || c->out_channels < 1)
        throw std::invalid_argument("conv shape parameters must be positive");
      if (c->kernel > c->in_len) throw std::invalid_argument("conv kernel exceeds input length");
      if (c->weights.rows != c->kernel || c->weights.cols != c->out_channels)
        throw std::invalid_argument("conv weight shape mismatch");
    } else if (const auto* f = std::get_if<LinearLayer>(&l)) {
      if (f->in_features < 1 || f->out_features < 1)
        throw std::invalid_argument("linear shape parameters must be positive");
      if (f->weights.rows != f->in_features || f->weights.cols != f->out_features)
        throw std::invalid_argument("linear weight shape mismatch");
    } else if (std::holds_alternative<ArgmaxLayer>(l)) {
      if (i + 1 != layers.size()) throw std::invalid_argument("argmax must be the final layer");
    }
    n = layer_out_count(l, n);
  }
}

std::vector<int> LayerGraph::mac_layer_indices() const {
  std::vector<int> out;
  for (size_t i = 0; i < layers.size(); ++i)
    if (is_mac_layer(layers[i])) out.push_back(static_cast<int>(i));
  return out;
}

bool LayerGraph::relu_follows(int index) const {
  return index + 1 < static_cast<int>(layers.size()) &&
         std::holds_alternative<ReluLayer>(layers[index + 1]);
}

int LayerGraph::output_count() const {
  int n = input_len;
  for (const Layer& l : layers) n = layer_out_count(l, n);
  return n;
}

QuantSpec QuantSpec::from_config(const ChipConfig& cfg, double reset_level) {
  QuantSpec s;
  s.gain = cfg.mac_gain;
  s.adc = AdcConfig::signed_linear_for(cfg);
  s.sat_lo = -cfg.membrane_clip();
  s.sat_hi = cfg.membrane_clip();
  s.slice_rows = cfg.signed_rows_per_array();
  s.act_max = cfg.max_activation();
  s.reset_level = reset_level;
  s.zero = zero_code(s.adc, reset_level);
  return s;
}

int slice_to_code(double weighted_sum, const QuantSpec& spec) {
  const double v = spec.reset_level + std::clamp(spec.gain * weighted_sum, spec.sat_lo, spec.sat_hi);
  return digitize(v, spec.adc) - spec.zero;
}

std::vector<int> pool_groups(const std::vector<int>& v, int group, bool use_max) {
  if (group < 1 || v.size() % group != 0)
    throw std::invalid_argument("pool group must divide vector length");
  std::vector<int> out(v.size() / group);
  for (size_t g = 0; g < out.size(); ++g) {
    if (use_max) {
      int m = v[g * group];
      for (int k = 1; k < group; ++k) m = std::max(m, v[g * group + k]);
      out[g] = m;
    } else {
      int s = 0;
      for (int k = 0; k < group; ++k) s += v[g * group + k];
      out[g] = s;
    }
  }
  return out;
}

int argmax_label(const std::vector<int>& v) {
  if (v.empty()) throw std::invalid_argument("argmax of empty vector");
  int best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);  // ties keep the lowest index
  return best;
}

namespace {

void check_acts(const std::vector<int>& acts, int act_max) {
  for (int a : acts)
    if (a < 0 || a > act_max) throw std::invalid_argument("activation out of range");
}

LayerTrace mac_forward(const Layer& layer, const std::vector<int>& input, const QuantSpec& spec,
                       bool relu_after) {
  LayerTrace t;
  t.input = input;

  std::optional<int> shift;
  if (const auto* c = std::get_if<Conv1dLayer>(&layer)) {
    shift = c->requant_shift;
    // Each output position is one independent slice of kernel rows.
    if (c->kernel > spec.slice_rows)
      throw std::invalid_argument("conv kernel exceeds slice capacity");
    t.slice_codes.assign(1, std::vector<int>(c->out_count()));
    for (int p = 0; p < c->out_len(); ++p) {
      for (int ch = 0; ch < c->out_channels; ++ch) {
        long long sum = 0;
        for (int k = 0; k < c->kernel; ++k)
          sum += static_cast<long long>(c->weights.at(k, ch)) * input[p * c->stride + k];
        t.slice_codes[0][p * c->out_channels + ch] =
            slice_to_code(static_cast<double>(sum), spec);
      }
    }
  } else {
    const auto& f = std::get<LinearLayer>(layer);
    shift = f.requant_shift;
    const int n_slices = (f.in_features + spec.slice_rows - 1) / spec.slice_rows;
    t.slice_codes.assign(n_slices, std::vector<int>(f.out_features));
    for (int s = 0; s < n_slices; ++s) {
      const int row_lo = s * spec.slice_rows;
      const int row_hi = std::min(f.in_features, row_lo + spec.slice_rows);
      for (int j = 0; j < f.out_features; ++j) {
        long long sum = 0;
        for (int i = row_lo; i < row_hi; ++i)
          sum += static_cast<long long>(f.weights.at(i, j)) * input[i];
        t.slice_codes[s][j] = slice_to_code(static_cast<double>(sum), spec);
      }
    }
  }

  const size_t n_out = t.slice_codes[0].size();
  t.summed.assign(n_out, 0);
  for (const auto& sc : t.slice_codes)
    for (size_t j = 0; j < n_out; ++j) t.summed[j] += sc[j];

  t.activated = t.summed;
  if (relu_after)
    for (int& v : t.activated) v = std::max(0, v);

  if (shift) {
    if (*shift < 0) throw std::invalid_argument("requant shift must be non-negative");
    t.output.resize(n_out);
    for (size_t j = 0; j < n_out; ++j) {
      const int v = t.activated[j];
      t.output[j] = v <= 0 ? 0 : std::min(v >> *shift, spec.act_max);
    }
  } else {
    t.output = t.activated;
  }
  return t;
}

}  // namespace

bool trace_equal(const ForwardTrace& a, const ForwardTrace& b) {
  if (a.mac.size() != b.mac.size() || a.label != b.label) return false;
  if (a.final_values != b.final_values || a.pooled != b.pooled) return false;
  for (size_t i = 0; i < a.mac.size(); ++i) {
    const LayerTrace& x = a.mac[i];
    const LayerTrace& y = b.mac[i];
    if (x.input != y.input || x.slice_codes != y.slice_codes || x.summed != y.summed ||
        x.activated != y.activated || x.output != y.output)
      return false;
  }
  return true;
}

ForwardTrace reference_forward(const LayerGraph& g, const ActivationVector& input,
                               const QuantSpec& spec) {
  g.validate();
  if (input.size() != g.input_len) throw std::invalid_argument("input length mismatch");
  check_acts(input.values, spec.act_max);

  ForwardTrace trace;
  std::vector<int> cur = input.values;
  for (size_t i = 0; i < g.layers.size(); ++i) {
    const Layer& l = g.layers[i];
    if (is_mac_layer(l)) {
      const bool relu = g.relu_follows(static_cast<int>(i));
      trace.mac.push_back(mac_forward(l, cur, spec, relu));
      cur = trace.mac.back().output;
      trace.final_values = cur;
      if (relu) ++i;
    } else if (std::holds_alternative<ReluLayer>(l)) {
      for (int& v : cur) v = std::max(0, v);
    } else if (const auto* p = std::get_if<AvgPoolLayer>(&l)) {
      cur = pool_groups(cur, p->group_size, false);
      trace.pooled = cur;
    } else if (const auto* p = std::get_if<MaxPoolLayer>(&l)) {
      cur = pool_groups(cur, p->group_size, true);
      trace.pooled = cur;
    } else {
      trace.label = argmax_label(cur);
      cur = {trace.label};
    }
  }
  return trace;
}

int default_requant_shift(int n_slices, const QuantSpec& spec) {
  const int max_centered = spec.adc.max_code() - spec.zero;
  const long long full_scale = static_cast<long long>(n_slices) * max_centered;
  int shift = 0;
  while ((full_scale >> shift) > spec.act_max) ++shift;
  return shift;
}

LayerGraph build_ecg_model(const ChipConfig& cfg) {
  const QuantSpec spec = QuantSpec::from_config(cfg);
  LayerGraph g;
  g.input_len = 432;

  Conv1dLayer conv;
  conv.kernel = 91;
  conv.stride = 11;
  conv.in_len = 432;
  conv.out_channels = 8;
  conv.weights = SignedWeightMatrix(91, 8);
  conv.requant_shift = default_requant_shift(1, spec);

  LinearLayer hidden;
  hidden.in_features = conv.out_count();
  hidden.out_features = 123;
  hidden.weights = SignedWeightMatrix(hidden.in_features, hidden.out_features);
  hidden.requant_shift = default_requant_shift(
      (hidden.in_features + spec.slice_rows - 1) / spec.slice_rows, spec);

  LinearLayer out;
  out.in_features = 123;
  out.out_features = 10;
  out.weights = SignedWeightMatrix(out.in_features, out.out_features);
  out.requant_shift = std::nullopt;  // raw scores feed the pooling stage

  g.layers.push_back(conv);
  g.layers.push_back(ReluLayer{});
  g.layers.push_back(hidden);
  g.layers.push_back(ReluLayer{});
  g.layers.push_back(out);
  g.layers.push_back(AvgPoolLayer{5});
  g.layers.push_back(ArgmaxLayer{});
  g.validate();
  return g;
}

}  // namespace anacore
