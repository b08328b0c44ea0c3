#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "anacore/chip.hpp"

namespace anacore {

// Single-channel 1d convolution; outputs are flattened position-major, i.e.
// output[p * out_channels + ch].
struct Conv1dLayer {
  int kernel = 1;
  int stride = 1;
  int in_len = 1;
  int out_channels = 1;
  SignedWeightMatrix weights;  // kernel x out_channels
  std::optional<int> requant_shift;

  int out_len() const { return (in_len - kernel) / stride + 1; }
  int out_count() const { return out_len() * out_channels; }
};

struct LinearLayer {
  int in_features = 1;
  int out_features = 1;
  SignedWeightMatrix weights;  // in_features x out_features
  std::optional<int> requant_shift;
};

struct ReluLayer {};
struct AvgPoolLayer {
  int group_size = 1;
};
struct MaxPoolLayer {
  int group_size = 1;
};
struct ArgmaxLayer {};

using Layer = std::variant<Conv1dLayer, LinearLayer, ReluLayer, AvgPoolLayer, MaxPoolLayer, ArgmaxLayer>;

bool is_mac_layer(const Layer& l);
int layer_out_count(const Layer& l, int in_count);

// Feed-forward stack. Shapes must chain; validate() checks adjacency and
// weight shapes.
struct LayerGraph {
  std::vector<Layer> layers;
  int input_len = 0;

  void validate() const;
  std::vector<int> mac_layer_indices() const;
  // True when the node right after layer `index` is a ReLU.
  bool relu_follows(int index) const;
  int output_count() const;
};

// Constants of the integer MAC pipeline, shared by the reference evaluator,
// the instruction-stream executor and the training surrogate. Inputs wider
// than `slice_rows` are processed as row slices whose digitized partial
// results are summed digitally.
struct QuantSpec {
  double gain = 1.0;
  AdcConfig adc;          // signed readout used for partial results
  double sat_lo = 0.0;    // membrane clip, ADC input units
  double sat_hi = 0.0;
  int slice_rows = 128;
  int act_max = 31;
  int zero = 0;           // code of a resting membrane
  double reset_level = 0.0;

  static QuantSpec from_config(const ChipConfig& cfg, double reset_level = 0.0);
};

// Saturate, digitize and recenter one weighted sum.
int slice_to_code(double weighted_sum, const QuantSpec& spec);

// Values recorded while evaluating one MAC layer; integer throughout so the
// reference path and the instruction-stream path can be compared bit-exactly.
struct LayerTrace {
  std::vector<int> input;                       // activations fed to the layer
  std::vector<std::vector<int>> slice_codes;    // recentered codes per row slice
  std::vector<int> summed;                      // after partial-sum accumulation
  std::vector<int> activated;                   // after optional ReLU
  std::vector<int> output;                      // after optional 5-bit requantization
};

struct ForwardTrace {
  std::vector<LayerTrace> mac;
  std::vector<int> final_values;  // output of the last MAC layer
  std::vector<int> pooled;        // after trailing pool node, scaled by group size for avg
  int label = -1;                 // argmax result, -1 when the graph has none
};

bool trace_equal(const ForwardTrace& a, const ForwardTrace& b);

// Group reduction over consecutive blocks; avg pooling keeps the group sum
// (same argmax, no rounding loss).
std::vector<int> pool_groups(const std::vector<int>& v, int group, bool use_max);
int argmax_label(const std::vector<int>& v);

// Integer evaluation of the whole graph, no placement machinery involved.
ForwardTrace reference_forward(const LayerGraph& g, const ActivationVector& input,
                               const QuantSpec& spec);

// Smallest shift that brings a full-scale slice sum into the activation range.
int default_requant_shift(int n_slices, const QuantSpec& spec);

// The ECG classifier: Conv1d(91, stride 11, 8 ch) + ReLU, Linear(256, 123) +
// ReLU, Linear(123, 10), AvgPool(5), Argmax. Weights start at zero.
LayerGraph build_ecg_model(const ChipConfig& cfg);

}  // namespace anacore
