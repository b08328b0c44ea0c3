#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace anacore {

// Geometry and conversion constants of one virtual chip. Signed weights are
// realized as excitatory/inhibitory physical row pairs, so a chip with
// rows_per_array physical rows offers rows_per_array/2 signed rows per array.
struct ChipConfig {
  int arrays_per_chip = 2;
  int rows_per_array = 256;  // physical rows, must be even
  int columns_per_array = 256;
  int activation_bits = 5;
  int weight_bits = 6;  // magnitude bits; sign comes from the row pairing
  int adc_bits = 8;
  double mac_gain = 1.0;  // scales the integer dot product to ADC input units
  // Default range: one maximum single-row product (31 * 63 = 1953) spans a
  // quarter of the full conversion range, leaving headroom for long sums.
  double adc_lo = -3906.0;
  double adc_hi = 3906.0;
  double event_period_ns = 8.0;       // back-to-back input event spacing
  double integration_cycle_us = 5.0;  // one membrane integration window

  int signed_rows_per_array() const { return rows_per_array / 2; }
  int max_weight() const { return (1 << weight_bits) - 1; }
  int max_activation() const { return (1 << activation_bits) - 1; }
  int max_adc_code() const { return (1 << adc_bits) - 1; }
  long long synapses_per_chip() const {
    return static_cast<long long>(arrays_per_chip) * rows_per_array * columns_per_array;
  }
  // Accumulators saturate at four full conversion ranges away from reset.
  double membrane_clip() const { return 4.0 * (adc_hi - adc_lo); }

  void validate() const;
};

// Static fixed-pattern deviations plus per-read jitter. Gains and offsets are
// drawn once per chip from `seed`; readout noise is drawn per conversion.
// All sigmas zero reproduces the exact integer path.
struct NoiseModel {
  double synapse_gain_sigma = 0.0;   // relative, multiplicative per synapse
  double neuron_offset_sigma = 0.0;  // additive per column, ADC input units
  double readout_sigma = 0.0;        // additive per conversion, ADC input units
  std::uint64_t seed = 1;

  // 2% gain spread and one ADC code worth of offset/readout noise.
  static NoiseModel defaults_for(const ChipConfig& cfg);
  void validate() const;
};

enum class AdcMode { signed_linear, relu };

struct AdcConfig {
  double lo = -3906.0;
  double hi = 3906.0;
  AdcMode mode = AdcMode::signed_linear;
  int bits = 8;

  static AdcConfig signed_linear_for(const ChipConfig& cfg);
  // relu readout clips the negative branch by placing `lo` at the reset level.
  static AdcConfig relu_for(const ChipConfig& cfg, double reset_level = 0.0);

  int max_code() const { return (1 << bits) - 1; }
  double step() const { return (hi - lo) / max_code(); }
  void validate() const;
};

// Clamp to [lo, hi], then map linearly onto [0, 2^bits - 1] with
// round-half-away-from-zero.
int digitize(double value, const AdcConfig& adc);

// Code a resting membrane converts to; digital post-processing subtracts it.
int zero_code(const AdcConfig& adc, double reset_level = 0.0);

// Dense integer matrix, row-major. Rows index inputs, columns index outputs.
struct SignedWeightMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> values;

  SignedWeightMatrix() = default;
  SignedWeightMatrix(int r, int c) : rows(r), cols(c), values(static_cast<size_t>(r) * c, 0) {}

  int& at(int r, int c) { return values[static_cast<size_t>(r) * cols + c]; }
  int at(int r, int c) const { return values[static_cast<size_t>(r) * cols + c]; }
  int max_abs() const;
};

struct ActivationVector {
  std::vector<int> values;

  ActivationVector() = default;
  explicit ActivationVector(std::vector<int> v) : values(std::move(v)) {}
  int size() const { return static_cast<int>(values.size()); }
};

// Per-array membrane bank.
struct MembraneState {
  std::vector<double> accumulator;  // ADC input units, relative to zero
  double reset_level = 0.0;
};

// Behavioral model of one chip: synapse arrays storing weight magnitudes on
// row pairs, analog accumulation onto membranes and parallel digitization.
class ChipState {
 public:
  explicit ChipState(ChipConfig cfg, NoiseModel noise = NoiseModel{}, double reset_level = 0.0);

  // Writes a signed matrix at (row_offset, col_offset); row_offset counts
  // signed rows. Magnitude goes to the excitatory or inhibitory physical row
  // depending on sign, the partner row is cleared.
  void load_weights(int array_index, const SignedWeightMatrix& w, int row_offset, int col_offset);

  void reset();
  void reset_array(int array_index);

  // Integrates one input vector: x[i] drives signed row row_offset + i, and
  // only columns [col_lo, col_hi) accumulate. The per-send contribution is
  // scaled by mac_gain and the accumulator saturates at the membrane clip.
  void accumulate(int array_index, const ActivationVector& x, int row_offset, int col_lo,
                  int col_hi);

  // Digitizes columns [col_lo, col_hi), adding the fixed per-column offset
  // and fresh readout noise.
  std::vector<int> read_adc(int array_index, const AdcConfig& adc, int col_lo, int col_hi);

  // reset + full-width accumulate + full readout, x starting at signed row 0.
  std::vector<int> run_mac(int array_index, const ActivationVector& x, const AdcConfig& adc);

  double membrane(int array_index, int col) const;
  int weight_at(int array_index, int physical_row, int col) const;
  int signed_weight_at(int array_index, int signed_row, int col) const;
  double synapse_gain(int array_index, int physical_row, int col) const;
  double neuron_offset(int array_index, int col) const;

  // One line per synapse: row,col,value (physical rows, stored magnitudes).
  void dump_weights_csv(std::ostream& out, int array_index) const;

  const ChipConfig& config() const { return cfg_; }
  const NoiseModel& noise() const { return noise_; }
  double reset_level() const { return reset_level_; }

 private:
  void check_array(int array_index) const;
  size_t widx(int array_index, int row, int col) const {
    return (static_cast<size_t>(array_index) * cfg_.rows_per_array + row) * cfg_.columns_per_array +
           col;
  }

  ChipConfig cfg_;
  NoiseModel noise_;
  double reset_level_;
  std::vector<int> weights_;         // magnitudes on physical rows
  std::vector<double> gains_;        // per synapse, empty when sigma == 0
  std::vector<double> offsets_;      // per array column, empty when sigma == 0
  std::vector<MembraneState> membranes_;
  std::mt19937_64 readout_rng_;
};

}  // namespace anacore
