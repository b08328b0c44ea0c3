#include "anacore/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "anacore/partition.hpp"

namespace anacore {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_count < 1) throw std::invalid_argument("batch_count must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (test_split < 1) throw std::invalid_argument("test_split must be >= 1");
  if (!(logit_scale > 0)) throw std::invalid_argument("logit_scale must be positive");
  if (early_stop_patience < 1) throw std::invalid_argument("early_stop_patience must be >= 1");
}

Metrics ConfusionCounts::metrics() const {
  Metrics m;
  m.detection_rate = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.false_positive_rate = fp + tn > 0 ? static_cast<double>(fp) / (fp + tn) : 0.0;
  return m;
}

double ConfusionCounts::balanced_accuracy() const {
  const Metrics m = metrics();
  return 0.5 * (m.detection_rate + (1.0 - m.false_positive_rate));
}

MockBackend::MockBackend(const ChipConfig& cfg) : spec_(QuantSpec::from_config(cfg)) {}

void MockBackend::deploy(const LayerGraph& quantized) {
  quantized.validate();
  g_ = quantized;
  deployed_ = true;
}

ForwardTrace MockBackend::forward(const ActivationVector& input) {
  if (!deployed()) throw std::runtime_error("forward on an undeployed model");
  return reference_forward(g_, input, spec_);
}

ChipBackend::ChipBackend(const LayerGraph& shape, const ChipConfig& cfg, const NoiseModel& noise,
                         int n_chips)
    : stream_(lower(partition(shape, cfg, n_chips), shape)),
      chips_(make_chips(stream_, noise)) {}

void ChipBackend::deploy(const LayerGraph& quantized) {
  stream_.refresh_weights(quantized);
  ActivationVector none;
  execute(stream_, chips_, none, ExecPhase::load_only);
  deployed_ = true;
}

ForwardTrace ChipBackend::forward(const ActivationVector& input) {
  if (!deployed()) throw std::runtime_error("forward on an undeployed model");
  return execute(stream_, chips_, input, ExecPhase::compute_only).trace;
}

std::unique_ptr<ForwardBackend> make_backend(const LayerGraph& shape, const ChipConfig& cfg,
                                             const NoiseModel& noise, int n_chips, bool mock) {
  if (mock) return std::make_unique<MockBackend>(cfg);
  return std::make_unique<ChipBackend>(shape, cfg, noise, n_chips);
}

void GradientSet::add(const GradientSet& other) {
  if (by_layer.empty()) by_layer.resize(other.by_layer.size());
  for (size_t l = 0; l < other.by_layer.size(); ++l) {
    if (by_layer[l].empty()) by_layer[l].assign(other.by_layer[l].size(), 0.0);
    for (size_t i = 0; i < other.by_layer[l].size(); ++i) by_layer[l][i] += other.by_layer[l][i];
  }
  loss += other.loss;
}

void GradientSet::scale(double f) {
  for (auto& g : by_layer)
    for (double& v : g) v *= f;
  loss *= f;
}

SurrogateModel::SurrogateModel(const LayerGraph& base, const ChipConfig& cfg,
                               std::uint64_t init_seed)
    : base_(base), cfg_(cfg), spec_(QuantSpec::from_config(cfg)) {
  base_.validate();
  std::mt19937_64 rng(init_seed);
  for (size_t i = 0; i < base_.layers.size(); ++i) {
    const Layer& l = base_.layers[i];
    if (!is_mac_layer(l)) {
      if (const auto* p = std::get_if<AvgPoolLayer>(&l)) pool_group_ = p->group_size;
      if (const auto* p = std::get_if<MaxPoolLayer>(&l)) pool_group_ = p->group_size;
      continue;
    }
    LayerParams lp;
    if (const auto* c = std::get_if<Conv1dLayer>(&l)) {
      lp.is_conv = true;
      lp.rows = c->kernel;
      lp.cols = c->out_channels;
      lp.kernel = c->kernel;
      lp.stride = c->stride;
      lp.in_len = c->in_len;
      lp.out_channels = c->out_channels;
      lp.requant_shift = c->requant_shift;
    } else {
      const auto& f = std::get<LinearLayer>(l);
      lp.rows = f.in_features;
      lp.cols = f.out_features;
      lp.requant_shift = f.requant_shift;
    }
    lp.relu_after = base_.relu_follows(static_cast<int>(i));
    const double limit = std::sqrt(6.0 / (lp.rows + lp.cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    lp.w.resize(static_cast<size_t>(lp.rows) * lp.cols);
    for (double& v : lp.w) v = u(rng);
    lp.w_int.assign(lp.w.size(), 0);
    // Fixed deployment scale with headroom above the init range: starting
    // integers stay small enough that long analog sums do not rail the ADC,
    // and training can still grow weights to the full 6-bit range.
    lp.w_clip = 4.0 * limit;
    lp.quant_scale = cfg_.max_weight() / lp.w_clip;
    layers_.push_back(std::move(lp));
  }
  if (layers_.empty()) throw std::invalid_argument("graph has no trainable layers");
}

LayerGraph SurrogateModel::quantize() {
  const int w_max = cfg_.max_weight();
  size_t m = 0;
  LayerGraph g = base_;
  for (Layer& l : g.layers) {
    if (!is_mac_layer(l)) continue;
    LayerParams& lp = layers_[m++];
    for (size_t i = 0; i < lp.w.size(); ++i) {
      const long long q = std::llround(lp.w[i] * lp.quant_scale);
      lp.w_int[i] = static_cast<int>(std::clamp<long long>(q, -w_max, w_max));
    }
    if (auto* c = std::get_if<Conv1dLayer>(&l))
      c->weights.values = lp.w_int;
    else
      std::get<LinearLayer>(l).weights.values = lp.w_int;
  }
  return g;
}

double cross_entropy(const std::vector<double>& logits, int label, std::vector<double>* dlogits) {
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw std::invalid_argument("label out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  std::vector<double> p(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= z;
  const double loss = -std::log(std::max(p[label], 1e-300));
  if (dlogits) {
    *dlogits = p;
    (*dlogits)[label] -= 1.0;
  }
  return loss;
}

namespace {

// Distributes logit gradients back onto the pre-pool score vector.
template <typename Value>
std::vector<double> pool_backward(const std::vector<Value>& scores, int group, bool use_max,
                                  const std::vector<double>& dpool, double logit_scale) {
  std::vector<double> d(scores.size(), 0.0);
  const size_t n_groups = scores.size() / group;
  for (size_t g = 0; g < n_groups; ++g) {
    if (use_max) {
      size_t best = g * group;
      for (int k = 1; k < group; ++k)
        if (scores[g * group + k] > scores[best]) best = g * group + k;
      d[best] = dpool[g] * logit_scale;
    } else {
      for (int k = 0; k < group; ++k) d[g * group + k] = dpool[g] * logit_scale;
    }
  }
  return d;
}

}  // namespace

GradientSet SurrogateModel::backward(const ForwardTrace& trace, int label, double logit_scale,
                                     bool max_pool) const {
  if (trace.mac.size() != layers_.size())
    throw std::invalid_argument("trace does not match the model");

  const std::vector<int>& final_values = trace.mac.back().output;
  const std::vector<int> pooled = pool_groups(final_values, pool_group_, max_pool);
  std::vector<double> logits(pooled.size());
  for (size_t i = 0; i < pooled.size(); ++i) logits[i] = logit_scale * pooled[i];

  GradientSet grads;
  grads.by_layer.resize(layers_.size());
  std::vector<double> dlogits;
  grads.loss = cross_entropy(logits, label, &dlogits);

  std::vector<double> dout =
      pool_backward(final_values, pool_group_, max_pool, dlogits, logit_scale);

  const double slope = spec_.gain / spec_.adc.step();
  const int max_code = spec_.adc.max_code();

  for (int m = static_cast<int>(layers_.size()) - 1; m >= 0; --m) {
    const LayerParams& lp = layers_[m];
    const LayerTrace& t = trace.mac[m];
    std::vector<double>& dw = grads.by_layer[m];
    dw.assign(lp.w.size(), 0.0);

    // Requantization: straight through with the shift's scale, blocked where
    // the 5-bit clamp saturated.
    std::vector<double> dsum(t.summed.size(), 0.0);
    for (size_t j = 0; j < t.summed.size(); ++j) {
      double g = dout[j];
      if (lp.requant_shift) {
        const int act = t.activated[j];
        const bool open = act >= 0 && (act >> *lp.requant_shift) <= spec_.act_max;
        g = open ? g * std::ldexp(1.0, -*lp.requant_shift) : 0.0;
      }
      if (lp.relu_after && t.summed[j] <= 0) g = 0.0;
      dsum[j] = g;
    }

    const std::vector<int>& x = t.input;
    std::vector<double> dx(x.size(), 0.0);
    auto rail_open = [&](int centered) {
      const int raw = centered + spec_.zero;
      return raw > 0 && raw < max_code;
    };

    // Weights pushed past the clip bound deploy saturated and receive no
    // gradient; input gradients flow through the deployed integers.
    const auto w_open = [&](size_t idx) { return std::abs(lp.w[idx]) <= lp.w_clip; };

    if (lp.is_conv) {
      const int out_len = (lp.in_len - lp.kernel) / lp.stride + 1;
      for (int p = 0; p < out_len; ++p) {
        for (int ch = 0; ch < lp.out_channels; ++ch) {
          const int o = p * lp.out_channels + ch;
          if (dsum[o] == 0.0 || !rail_open(t.slice_codes[0][o])) continue;
          const double dpre = dsum[o] * slope;
          for (int k = 0; k < lp.kernel; ++k) {
            const int xi = p * lp.stride + k;
            const size_t wi = static_cast<size_t>(k) * lp.out_channels + ch;
            if (w_open(wi)) dw[wi] += dpre * x[xi] * lp.quant_scale;
            dx[xi] += dpre * lp.w_int[wi];
          }
        }
      }
    } else {
      const int n_slices = static_cast<int>(t.slice_codes.size());
      for (int s = 0; s < n_slices; ++s) {
        const int row_lo = s * spec_.slice_rows;
        const int row_hi = std::min(lp.rows, row_lo + spec_.slice_rows);
        for (int j = 0; j < lp.cols; ++j) {
          if (dsum[j] == 0.0 || !rail_open(t.slice_codes[s][j])) continue;
          const double dpre = dsum[j] * slope;
          for (int i = row_lo; i < row_hi; ++i) {
            const size_t wi = static_cast<size_t>(i) * lp.cols + j;
            if (w_open(wi)) dw[wi] += dpre * x[i] * lp.quant_scale;
            dx[i] += dpre * lp.w_int[wi];
          }
        }
      }
    }
    dout = std::move(dx);
  }
  return grads;
}

SurrogateModel::SmoothTrace SurrogateModel::forward_smooth(const std::vector<double>& input,
                                                           bool max_pool,
                                                           double logit_scale) const {
  SmoothTrace t;
  const double slope = spec_.gain / spec_.adc.step();
  std::vector<double> cur = input;
  for (const LayerParams& lp : layers_) {
    t.inputs.push_back(cur);
    std::vector<double> v;
    if (lp.is_conv) {
      const int out_len = (lp.in_len - lp.kernel) / lp.stride + 1;
      v.assign(static_cast<size_t>(out_len) * lp.out_channels, 0.0);
      for (int p = 0; p < out_len; ++p)
        for (int ch = 0; ch < lp.out_channels; ++ch) {
          double s = 0;
          for (int k = 0; k < lp.kernel; ++k)
            s += lp.w[static_cast<size_t>(k) * lp.out_channels + ch] * cur[p * lp.stride + k];
          v[static_cast<size_t>(p) * lp.out_channels + ch] = slope * s;
        }
    } else {
      v.assign(lp.cols, 0.0);
      for (int j = 0; j < lp.cols; ++j) {
        double s = 0;
        for (int i = 0; i < lp.rows; ++i) s += lp.w[static_cast<size_t>(i) * lp.cols + j] * cur[i];
        v[j] = slope * s;
      }
    }
    t.summed.push_back(v);
    if (lp.relu_after)
      for (double& u : v) u = std::max(0.0, u);
    if (lp.requant_shift)
      for (double& u : v) u *= std::ldexp(1.0, -*lp.requant_shift);
    cur = std::move(v);
  }
  t.final_values = cur;

  const size_t n_groups = cur.size() / pool_group_;
  t.pooled.resize(n_groups);
  for (size_t g = 0; g < n_groups; ++g) {
    if (max_pool) {
      double m = cur[g * pool_group_];
      for (int k = 1; k < pool_group_; ++k) m = std::max(m, cur[g * pool_group_ + k]);
      t.pooled[g] = m;
    } else {
      double s = 0;
      for (int k = 0; k < pool_group_; ++k) s += cur[g * pool_group_ + k];
      t.pooled[g] = s;
    }
  }
  t.logits.resize(n_groups);
  for (size_t g = 0; g < n_groups; ++g) t.logits[g] = logit_scale * t.pooled[g];
  return t;
}

GradientSet SurrogateModel::backward_smooth(const SmoothTrace& t, int label, double logit_scale,
                                            bool max_pool) const {
  GradientSet grads;
  grads.by_layer.resize(layers_.size());
  std::vector<double> dlogits;
  grads.loss = cross_entropy(t.logits, label, &dlogits);

  std::vector<double> dout =
      pool_backward(t.final_values, pool_group_, max_pool, dlogits, logit_scale);

  const double slope = spec_.gain / spec_.adc.step();
  for (int m = static_cast<int>(layers_.size()) - 1; m >= 0; --m) {
    const LayerParams& lp = layers_[m];
    std::vector<double>& dw = grads.by_layer[m];
    dw.assign(lp.w.size(), 0.0);

    std::vector<double> dsum(t.summed[m].size());
    for (size_t j = 0; j < dsum.size(); ++j) {
      double g = dout[j];
      if (lp.requant_shift) g *= std::ldexp(1.0, -*lp.requant_shift);
      if (lp.relu_after && t.summed[m][j] <= 0) g = 0.0;
      dsum[j] = g;
    }

    const std::vector<double>& x = t.inputs[m];
    std::vector<double> dx(x.size(), 0.0);
    if (lp.is_conv) {
      const int out_len = (lp.in_len - lp.kernel) / lp.stride + 1;
      for (int p = 0; p < out_len; ++p)
        for (int ch = 0; ch < lp.out_channels; ++ch) {
          const int o = p * lp.out_channels + ch;
          if (dsum[o] == 0.0) continue;
          const double dpre = dsum[o] * slope;
          for (int k = 0; k < lp.kernel; ++k) {
            const int xi = p * lp.stride + k;
            dw[static_cast<size_t>(k) * lp.out_channels + ch] += dpre * x[xi];
            dx[xi] += dpre * lp.w[static_cast<size_t>(k) * lp.out_channels + ch];
          }
        }
    } else {
      for (int j = 0; j < lp.cols; ++j) {
        if (dsum[j] == 0.0) continue;
        const double dpre = dsum[j] * slope;
        for (int i = 0; i < lp.rows; ++i) {
          dw[static_cast<size_t>(i) * lp.cols + j] += dpre * x[i];
          dx[i] += dpre * lp.w[static_cast<size_t>(i) * lp.cols + j];
        }
      }
    }
    dout = std::move(dx);
  }
  return grads;
}

namespace {

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  void step(SurrogateModel& model, const GradientSet& grads) {
    auto& layers = model.params();
    if (m_.empty()) {
      m_.resize(layers.size());
      v_.resize(layers.size());
      for (size_t l = 0; l < layers.size(); ++l) {
        m_[l].assign(layers[l].w.size(), 0.0);
        v_[l].assign(layers[l].w.size(), 0.0);
      }
    }
    ++t_;
    for (size_t l = 0; l < layers.size(); ++l) {
      auto& w = layers[l].w;
      const auto& g = grads.by_layer[l];
      if (kind_ == OptimizerKind::sgd) {
        for (size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
      } else {
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, t_);
        const double c2 = 1.0 - std::pow(b2, t_);
        for (size_t i = 0; i < w.size(); ++i) {
          m_[l][i] = b1 * m_[l][i] + (1.0 - b1) * g[i];
          v_[l][i] = b2 * v_[l][i] + (1.0 - b2) * g[i] * g[i];
          w[i] -= lr_ * (m_[l][i] / c1) / (std::sqrt(v_[l][i] / c2) + eps);
        }
      }
    }
  }

 private:
  OptimizerKind kind_;
  double lr_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace

std::vector<std::string> split_test_ids(std::vector<std::string> ids, std::uint64_t seed,
                                        int test_count) {
  if (test_count < 0 || test_count > static_cast<int>(ids.size()))
    throw std::invalid_argument("test split larger than the dataset");
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed ^ 0x7c0ffee5u);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(test_count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

EvalResult evaluate(ForwardBackend& backend, const std::vector<LabeledExample>& examples) {
  EvalResult r;
  for (const LabeledExample& ex : examples) {
    const ForwardTrace t = backend.forward(ex.input);
    if (t.label < 0) throw std::runtime_error("graph produces no class decision");
    r.predictions.emplace_back(ex.id, t.label);
    if (ex.label < 0) continue;
    if (ex.label > 1 || t.label > 1)
      throw std::invalid_argument("binary metrics expect labels in {0, 1}");
    if (ex.label == 1)
      (t.label == 1 ? r.counts.tp : r.counts.fn)++;
    else
      (t.label == 1 ? r.counts.fp : r.counts.tn)++;
  }
  r.metrics = r.counts.metrics();
  return r;
}

TrainResult train(const std::vector<LabeledExample>& data, const LayerGraph& base,
                  const TrainConfig& tc, const ChipConfig& cfg, const NoiseModel& noise,
                  int n_chips) {
  tc.validate();
  if (static_cast<int>(data.size()) <= tc.test_split)
    throw std::invalid_argument("dataset smaller than the held-out split");

  std::vector<std::string> ids;
  ids.reserve(data.size());
  for (const LabeledExample& ex : data) {
    if (ex.label != 0 && ex.label != 1) throw std::invalid_argument("labels must be 0 or 1");
    ids.push_back(ex.id);
  }
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size())
    throw std::invalid_argument("record ids must be unique");

  const std::vector<std::string> test_ids = split_test_ids(ids, tc.seed, tc.test_split);
  const std::set<std::string> test_set(test_ids.begin(), test_ids.end());

  TrainResult result;
  std::vector<const LabeledExample*> train_set;
  std::vector<LabeledExample> held_out;
  for (const LabeledExample& ex : data) {
    if (test_set.count(ex.id)) {
      held_out.push_back(ex);
    } else {
      train_set.push_back(&ex);
      result.train_ids.push_back(ex.id);
    }
  }
  result.test_ids = test_ids;

  auto has_both = [](auto&& begin, auto&& end, auto&& get) {
    bool c0 = false, c1 = false;
    for (auto it = begin; it != end; ++it) (get(*it) == 0 ? c0 : c1) = true;
    return c0 && c1;
  };
  if (!has_both(train_set.begin(), train_set.end(),
                [](const LabeledExample* e) { return e->label; }) ||
      !has_both(held_out.begin(), held_out.end(), [](const LabeledExample& e) { return e.label; }))
    throw std::invalid_argument("degenerate split: a class is empty");

  SurrogateModel model(base, cfg, tc.seed ^ 0x5dee5eedull);
  auto backend = make_backend(base, cfg, noise, n_chips, tc.mock_mode);
  Optimizer opt(tc.optimizer, tc.learning_rate);
  std::mt19937_64 shuffle_rng(tc.seed ^ 0x0badf00dull);

  double best = -1.0;
  int stall = 0;
  std::vector<std::vector<double>> best_weights;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(train_set.begin(), train_set.end(), shuffle_rng);
    double loss_sum = 0;
    for (size_t lo = 0; lo < train_set.size(); lo += tc.batch_count) {
      const size_t hi = std::min(train_set.size(), lo + tc.batch_count);
      backend->deploy(model.quantize());
      GradientSet batch;
      for (size_t i = lo; i < hi; ++i) {
        const LabeledExample& ex = *train_set[i];
        const ForwardTrace trace = backend->forward(ex.input);
        batch.add(model.backward(trace, ex.label, tc.logit_scale, /*max_pool=*/true));
      }
      loss_sum += batch.loss;
      batch.scale(1.0 / static_cast<double>(hi - lo));
      opt.step(model, batch);
    }

    backend->deploy(model.quantize());
    const EvalResult eval = evaluate(*backend, held_out);
    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(train_set.size());
    em.val = eval.metrics;
    em.counts = eval.counts;
    result.history.push_back(em);

    const double bal = eval.counts.balanced_accuracy();
    if (bal > best) {
      best_weights.clear();
      for (const auto& lp : model.params()) best_weights.push_back(lp.w);
    }
    if (bal > best + tc.early_stop_min_delta) {
      best = bal;
      stall = 0;
    } else if (++stall >= tc.early_stop_patience) {
      break;
    }
    best = std::max(best, bal);
  }

  // Deploy the epoch with the best held-out balanced accuracy.
  if (!best_weights.empty()) {
    auto& layers = model.params();
    for (size_t l = 0; l < layers.size(); ++l) layers[l].w = best_weights[l];
  }
  result.model = model.quantize();
  return result;
}

}  // namespace anacore
