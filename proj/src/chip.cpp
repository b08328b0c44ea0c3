#include "anacore/chip.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace anacore {

void ChipConfig::validate() const {
  if (arrays_per_chip < 1) throw std::invalid_argument("arrays_per_chip must be >= 1");
  if (rows_per_array < 2 || rows_per_array % 2 != 0)
    throw std::invalid_argument("rows_per_array must be even and >= 2");
  if (columns_per_array < 1) throw std::invalid_argument("columns_per_array must be >= 1");
  if (activation_bits < 1 || activation_bits > 16)
    throw std::invalid_argument("activation_bits out of range");
  if (weight_bits < 1 || weight_bits > 16) throw std::invalid_argument("weight_bits out of range");
  if (adc_bits < 1 || adc_bits > 16) throw std::invalid_argument("adc_bits out of range");
  if (!(adc_lo < adc_hi)) throw std::invalid_argument("adc_lo must be below adc_hi");
  if (!(mac_gain > 0.0)) throw std::invalid_argument("mac_gain must be positive");
  if (!(event_period_ns > 0.0)) throw std::invalid_argument("event_period_ns must be positive");
  if (!(integration_cycle_us > 0.0))
    throw std::invalid_argument("integration_cycle_us must be positive");
}

NoiseModel NoiseModel::defaults_for(const ChipConfig& cfg) {
  NoiseModel n;
  const double lsb = (cfg.adc_hi - cfg.adc_lo) / cfg.max_adc_code();
  n.synapse_gain_sigma = 0.02;
  n.neuron_offset_sigma = lsb;
  n.readout_sigma = lsb;
  n.seed = 1;
  return n;
}

void NoiseModel::validate() const {
  if (synapse_gain_sigma < 0 || neuron_offset_sigma < 0 || readout_sigma < 0)
    throw std::invalid_argument("noise sigmas must be non-negative");
}

AdcConfig AdcConfig::signed_linear_for(const ChipConfig& cfg) {
  return AdcConfig{cfg.adc_lo, cfg.adc_hi, AdcMode::signed_linear, cfg.adc_bits};
}

AdcConfig AdcConfig::relu_for(const ChipConfig& cfg, double reset_level) {
  return AdcConfig{reset_level, cfg.adc_hi, AdcMode::relu, cfg.adc_bits};
}

void AdcConfig::validate() const {
  if (!(lo < hi)) throw std::invalid_argument("adc lo must be below hi");
  if (bits < 1 || bits > 16) throw std::invalid_argument("adc bits out of range");
}

int digitize(double value, const AdcConfig& adc) {
  adc.validate();
  const double t = std::clamp(value, adc.lo, adc.hi);
  const double u = (t - adc.lo) / (adc.hi - adc.lo) * adc.max_code();
  return static_cast<int>(std::llround(u));
}

int zero_code(const AdcConfig& adc, double reset_level) { return digitize(reset_level, adc); }

int SignedWeightMatrix::max_abs() const {
  int m = 0;
  for (int v : values) m = std::max(m, std::abs(v));
  return m;
}

ChipState::ChipState(ChipConfig cfg, NoiseModel noise, double reset_level)
    : cfg_(cfg), noise_(noise), reset_level_(reset_level) {
  cfg_.validate();
  noise_.validate();
  weights_.assign(static_cast<size_t>(cfg_.synapses_per_chip()), 0);
  membranes_.assign(cfg_.arrays_per_chip,
                    MembraneState{std::vector<double>(cfg_.columns_per_array, 0.0), reset_level_});

  // Fixed-pattern state is drawn once, in a fixed order, from the seed.
  std::mt19937_64 rng(noise_.seed);
  if (noise_.synapse_gain_sigma > 0.0) {
    std::normal_distribution<double> g(1.0, noise_.synapse_gain_sigma);
    gains_.resize(weights_.size());
    for (double& v : gains_) v = g(rng);
  }
  if (noise_.neuron_offset_sigma > 0.0) {
    std::normal_distribution<double> o(0.0, noise_.neuron_offset_sigma);
    offsets_.resize(static_cast<size_t>(cfg_.arrays_per_chip) * cfg_.columns_per_array);
    for (double& v : offsets_) v = o(rng);
  }
  readout_rng_.seed(noise_.seed ^ 0x9e3779b97f4a7c15ull);
}

void ChipState::check_array(int array_index) const {
  if (array_index < 0 || array_index >= cfg_.arrays_per_chip)
    throw std::out_of_range("array index " + std::to_string(array_index) + " out of range");
}

void ChipState::load_weights(int array_index, const SignedWeightMatrix& w, int row_offset,
                             int col_offset) {
  check_array(array_index);
  if (w.rows < 0 || w.cols < 0 || static_cast<size_t>(w.rows) * w.cols != w.values.size())
    throw std::invalid_argument("weight matrix shape mismatch");
  if (row_offset < 0 || col_offset < 0 || row_offset + w.rows > cfg_.signed_rows_per_array() ||
      col_offset + w.cols > cfg_.columns_per_array)
    throw std::out_of_range("weight block exceeds array bounds");
  if (w.max_abs() > cfg_.max_weight())
    throw std::invalid_argument("weight magnitude exceeds " + std::to_string(cfg_.max_weight()));

  for (int i = 0; i < w.rows; ++i) {
    const int exc = 2 * (row_offset + i);
    const int inh = exc + 1;
    for (int j = 0; j < w.cols; ++j) {
      const int v = w.at(i, j);
      weights_[widx(array_index, exc, col_offset + j)] = v > 0 ? v : 0;
      weights_[widx(array_index, inh, col_offset + j)] = v < 0 ? -v : 0;
    }
  }
}

void ChipState::reset() {
  for (int a = 0; a < cfg_.arrays_per_chip; ++a) reset_array(a);
}

void ChipState::reset_array(int array_index) {
  check_array(array_index);
  auto& m = membranes_[array_index].accumulator;
  std::fill(m.begin(), m.end(), 0.0);
}

void ChipState::accumulate(int array_index, const ActivationVector& x, int row_offset, int col_lo,
                           int col_hi) {
  check_array(array_index);
  if (row_offset < 0 || row_offset + x.size() > cfg_.signed_rows_per_array())
    throw std::out_of_range("input vector exceeds signed row capacity");
  if (col_lo < 0 || col_hi > cfg_.columns_per_array || col_lo >= col_hi)
    throw std::out_of_range("column range invalid");
  for (int v : x.values)
    if (v < 0 || v > cfg_.max_activation())
      throw std::invalid_argument("activation out of " + std::to_string(cfg_.activation_bits) +
                                  "-bit range");

  const int n_cols = col_hi - col_lo;
  std::vector<double> delta(n_cols, 0.0);
  const bool noisy = !gains_.empty();
  for (int i = 0; i < x.size(); ++i) {
    const int a = x.values[i];
    if (a == 0) continue;
    const int exc = 2 * (row_offset + i);
    const size_t exc_base = widx(array_index, exc, col_lo);
    const size_t inh_base = widx(array_index, exc + 1, col_lo);
    if (noisy) {
      for (int j = 0; j < n_cols; ++j) {
        const double w = weights_[exc_base + j] * gains_[exc_base + j] -
                         weights_[inh_base + j] * gains_[inh_base + j];
        delta[j] += w * a;
      }
    } else {
      for (int j = 0; j < n_cols; ++j) {
        const int w = weights_[exc_base + j] - weights_[inh_base + j];
        delta[j] += static_cast<double>(w) * a;
      }
    }
  }

  const double clip = cfg_.membrane_clip();
  auto& m = membranes_[array_index].accumulator;
  for (int j = 0; j < n_cols; ++j) {
    const double v = m[col_lo + j] + cfg_.mac_gain * delta[j];
    m[col_lo + j] = std::clamp(v, -clip, clip);
  }
}

std::vector<int> ChipState::read_adc(int array_index, const AdcConfig& adc, int col_lo,
                                     int col_hi) {
  check_array(array_index);
  adc.validate();
  if (col_lo < 0 || col_hi > cfg_.columns_per_array || col_lo >= col_hi)
    throw std::out_of_range("column range invalid");

  const auto& m = membranes_[array_index];
  std::vector<int> codes(col_hi - col_lo);
  std::normal_distribution<double> jitter(0.0, noise_.readout_sigma);
  for (int j = col_lo; j < col_hi; ++j) {
    double v = m.reset_level + m.accumulator[j];
    if (!offsets_.empty()) v += offsets_[static_cast<size_t>(array_index) * cfg_.columns_per_array + j];
    if (noise_.readout_sigma > 0.0) v += jitter(readout_rng_);
    codes[j - col_lo] = digitize(v, adc);
  }
  return codes;
}

std::vector<int> ChipState::run_mac(int array_index, const ActivationVector& x,
                                    const AdcConfig& adc) {
  reset_array(array_index);
  accumulate(array_index, x, 0, 0, cfg_.columns_per_array);
  return read_adc(array_index, adc, 0, cfg_.columns_per_array);
}

double ChipState::membrane(int array_index, int col) const {
  check_array(array_index);
  if (col < 0 || col >= cfg_.columns_per_array) throw std::out_of_range("column out of range");
  return membranes_[array_index].accumulator[col];
}

int ChipState::weight_at(int array_index, int physical_row, int col) const {
  check_array(array_index);
  if (physical_row < 0 || physical_row >= cfg_.rows_per_array || col < 0 ||
      col >= cfg_.columns_per_array)
    throw std::out_of_range("synapse coordinate out of range");
  return weights_[widx(array_index, physical_row, col)];
}

int ChipState::signed_weight_at(int array_index, int signed_row, int col) const {
  return weight_at(array_index, 2 * signed_row, col) - weight_at(array_index, 2 * signed_row + 1, col);
}

double ChipState::synapse_gain(int array_index, int physical_row, int col) const {
  if (gains_.empty()) return 1.0;
  return gains_[widx(array_index, physical_row, col)];
}

double ChipState::neuron_offset(int array_index, int col) const {
  if (offsets_.empty()) return 0.0;
  return offsets_[static_cast<size_t>(array_index) * cfg_.columns_per_array + col];
}

void ChipState::dump_weights_csv(std::ostream& out, int array_index) const {
  check_array(array_index);
  out << "row,col,value\n";
  for (int r = 0; r < cfg_.rows_per_array; ++r)
    for (int c = 0; c < cfg_.columns_per_array; ++c)
      out << r << ',' << c << ',' << weights_[widx(array_index, r, c)] << '\n';
}

}  // namespace anacore
