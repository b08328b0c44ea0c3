#pragma once

#include <cstdint>
#include <vector>

#include "anacore/preprocess.hpp"

namespace anacore {

// Parameters of the synthetic two-class ECG generator. Sinus records carry a
// regular beat train with P waves; atrial-fibrillation records have an
// irregularly irregular rhythm, no P wave, a continuous fibrillatory ripple
// and beat-to-beat amplitude variation.
struct SynthConfig {
  int n_records = 1000;
  double afib_fraction = 0.5;
  double sample_rate_hz = 512.0;
  double duration_s = 14.0;
  std::uint64_t seed = 1;

  // Signal shape, in units of the converter's full scale.
  double qrs_amplitude = 0.22;
  double sinus_rr_mean_s = 0.82;
  double sinus_rr_sigma_s = 0.03;
  double afib_rr_lo_s = 0.40;
  double afib_rr_hi_s = 1.15;
  double fibrillation_amplitude = 0.040;  // ~6 Hz atrial ripple
  double wander_amplitude = 0.020;        // slow baseline drift
  double noise_sigma = 0.0010;            // white measurement noise

  int adc_midscale = 2048;  // 12-bit front-end converter
  int adc_max = 4095;

  void validate() const;
};

// One deterministic record; the waveform depends only on (cfg.seed, index).
EcgRecord synth_record(const SynthConfig& cfg, int index, bool afib);

// Full labeled dataset with round(n * afib_fraction) positive records spread
// evenly through the index range. Ids follow "rec%05d".
std::vector<EcgRecord> synth_dataset(const SynthConfig& cfg);

}  // namespace anacore
