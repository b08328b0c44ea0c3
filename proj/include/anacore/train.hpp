#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anacore/execute.hpp"
#include "anacore/model.hpp"

namespace anacore {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_count = 32;  // records per gradient batch
  int epochs = 50;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 1;
  int test_split = 500;  // records held out before training starts
  bool mock_mode = false;
  double logit_scale = 0.05;  // maps integer scores to softmax logits
  int early_stop_patience = 10;
  double early_stop_min_delta = 0.002;  // balanced accuracy, 0.2 pp

  void validate() const;
};

struct Metrics {
  double detection_rate = 0;       // recall on the positive class
  double false_positive_rate = 0;  // share of negatives predicted positive
};

struct ConfusionCounts {
  long long tp = 0, fn = 0, fp = 0, tn = 0;
  Metrics metrics() const;
  double balanced_accuracy() const;
};

struct LabeledExample {
  std::string id;
  ActivationVector input;
  int label = -1;
};

// Forward device abstraction: the simulated chip or the pure surrogate.
class ForwardBackend {
 public:
  virtual ~ForwardBackend() = default;
  virtual void deploy(const LayerGraph& quantized) = 0;
  virtual ForwardTrace forward(const ActivationVector& input) = 0;
  bool deployed() const { return deployed_; }

 protected:
  bool deployed_ = false;
};

// Integer reference evaluation, no chips involved.
class MockBackend final : public ForwardBackend {
 public:
  explicit MockBackend(const ChipConfig& cfg);
  void deploy(const LayerGraph& quantized) override;
  ForwardTrace forward(const ActivationVector& input) override;

 private:
  QuantSpec spec_;
  LayerGraph g_;
};

// Partitions the graph once, then runs the lowered program on simulated chips.
class ChipBackend final : public ForwardBackend {
 public:
  ChipBackend(const LayerGraph& shape, const ChipConfig& cfg, const NoiseModel& noise,
              int n_chips = 1);
  void deploy(const LayerGraph& quantized) override;
  ForwardTrace forward(const ActivationVector& input) override;
  const InstructionStream& stream() const { return stream_; }
  std::vector<ChipState>& chips() { return chips_; }

 private:
  InstructionStream stream_;
  std::vector<ChipState> chips_;
};

std::unique_ptr<ForwardBackend> make_backend(const LayerGraph& shape, const ChipConfig& cfg,
                                             const NoiseModel& noise, int n_chips, bool mock);

struct GradientSet {
  std::vector<std::vector<double>> by_layer;
  double loss = 0;

  void add(const GradientSet& other);
  void scale(double f);
};

// Float shadow network mirroring the chip's integer pipeline. Deployment uses
// symmetric per-layer scaling to the weight range with round-to-nearest;
// backward passes straight through every quantizer, with zero gradient in
// clipped regions.
class SurrogateModel {
 public:
  struct LayerParams {
    bool is_conv = false;
    int rows = 0, cols = 0;  // weight shape
    int kernel = 0, stride = 0, in_len = 0, out_channels = 0;
    std::vector<double> w;
    std::vector<int> w_int;   // integers of the last deployment
    double w_clip = 1.0;      // float magnitude that maps onto the top integer
    double quant_scale = 1.0; // max_weight / w_clip, fixed per layer
    std::optional<int> requant_shift;
    bool relu_after = false;
  };

  SurrogateModel(const LayerGraph& base, const ChipConfig& cfg, std::uint64_t init_seed);

  // Re-quantizes the shadow weights into an integer graph for deployment.
  LayerGraph quantize();
  const LayerGraph& shape() const { return base_; }
  const QuantSpec& spec() const { return spec_; }
  std::vector<LayerParams>& params() { return layers_; }
  int pool_group() const { return pool_group_; }

  // STE gradients evaluated at an integer forward trace (from either backend).
  GradientSet backward(const ForwardTrace& trace, int label, double logit_scale,
                       bool max_pool) const;

  // Smooth float path with all rounding and clipping disabled; reference for
  // finite-difference checks.
  struct SmoothTrace {
    std::vector<std::vector<double>> inputs;  // per MAC layer
    std::vector<std::vector<double>> summed;  // pre-activation
    std::vector<double> final_values;
    std::vector<double> pooled;
    std::vector<double> logits;
  };
  SmoothTrace forward_smooth(const std::vector<double>& input, bool max_pool,
                             double logit_scale) const;
  GradientSet backward_smooth(const SmoothTrace& t, int label, double logit_scale,
                              bool max_pool) const;

 private:
  LayerGraph base_;
  ChipConfig cfg_;
  QuantSpec spec_;
  std::vector<LayerParams> layers_;
  int pool_group_ = 1;
};

double cross_entropy(const std::vector<double>& logits, int label, std::vector<double>* dlogits);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  Metrics val;
  ConfusionCounts counts;
};

struct TrainResult {
  LayerGraph model;  // quantized weights ready for deployment
  std::vector<EpochMetrics> history;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

// Deterministic held-out selection: ids are sorted, shuffled with the seed and
// the first `test_count` become the test split.
std::vector<std::string> split_test_ids(std::vector<std::string> ids, std::uint64_t seed,
                                        int test_count);

TrainResult train(const std::vector<LabeledExample>& data, const LayerGraph& base,
                  const TrainConfig& tc, const ChipConfig& cfg, const NoiseModel& noise,
                  int n_chips = 1);

struct EvalResult {
  ConfusionCounts counts;
  Metrics metrics;
  std::vector<std::pair<std::string, int>> predictions;
};

EvalResult evaluate(ForwardBackend& backend, const std::vector<LabeledExample>& examples);

}  // namespace anacore
