#include "anacore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

namespace anacore {

void SynthConfig::validate() const {
  if (n_records < 1) throw std::invalid_argument("n_records must be >= 1");
  if (afib_fraction < 0 || afib_fraction > 1)
    throw std::invalid_argument("afib_fraction must be in [0, 1]");
  if (!(sample_rate_hz > 0) || !(duration_s > 0))
    throw std::invalid_argument("sample rate and duration must be positive");
  if (adc_max <= adc_midscale || adc_midscale < 0)
    throw std::invalid_argument("converter range is inverted");
  if (!(afib_rr_hi_s > afib_rr_lo_s) || afib_rr_lo_s <= 0)
    throw std::invalid_argument("bad RR interval range");
}

namespace {

// Adds amp * exp(-((t - center) / width)^2 / 2) to the waveform, evaluated
// only where the bump is non-negligible.
void add_bump(std::vector<double>& wave, double fs, double center, double width, double amp) {
  const int lo = std::max(0, static_cast<int>(std::floor((center - 4 * width) * fs)));
  const int hi = std::min(static_cast<int>(wave.size()) - 1,
                          static_cast<int>(std::ceil((center + 4 * width) * fs)));
  for (int i = lo; i <= hi; ++i) {
    const double dt = (i / fs - center) / width;
    wave[i] += amp * std::exp(-0.5 * dt * dt);
  }
}

}  // namespace

EcgRecord synth_record(const SynthConfig& cfg, int index, bool afib) {
  cfg.validate();
  const std::uint64_t mix = cfg.seed * 0x9E3779B97F4A7C15ull +
                            static_cast<std::uint64_t>(index + 1) * 0xBF58476D1CE4E5B9ull +
                            (afib ? 0x94D049BB133111EBull : 0ull);
  std::mt19937_64 rng(mix);
  const double fs = cfg.sample_rate_hz;
  const int n = static_cast<int>(std::llround(cfg.duration_s * fs));
  std::vector<double> wave(n, 0.0);

  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::uniform_real_distribution<double> phase(0.0, two_pi);

  // Slow baseline drift common to both classes.
  {
    const double p1 = phase(rng), p2 = phase(rng);
    for (int i = 0; i < n; ++i) {
      const double t = i / fs;
      wave[i] += cfg.wander_amplitude *
                 (std::sin(two_pi * 0.31 * t + p1) + 0.6 * std::sin(two_pi * 0.13 * t + p2));
    }
  }

  // Continuous atrial ripple replaces the organized P wave in fibrillation.
  if (afib) {
    std::uniform_real_distribution<double> f_base(5.0, 7.0);
    std::uniform_real_distribution<double> f_ratio(1.3, 1.6);
    const double f1 = f_base(rng), f2 = f1 * f_ratio(rng);
    const double p1 = phase(rng), p2 = phase(rng), p3 = phase(rng);
    for (int i = 0; i < n; ++i) {
      const double t = i / fs;
      const double mod = 1.0 + 0.3 * std::sin(two_pi * 0.9 * t + p3);
      wave[i] += cfg.fibrillation_amplitude * mod *
                 (0.7 * std::sin(two_pi * f1 * t + p1) + 0.4 * std::sin(two_pi * f2 * t + p2));
    }
  }

  // Beat train.
  std::normal_distribution<double> sinus_rr(cfg.sinus_rr_mean_s, cfg.sinus_rr_sigma_s);
  std::uniform_real_distribution<double> afib_rr(cfg.afib_rr_lo_s, cfg.afib_rr_hi_s);
  std::normal_distribution<double> sinus_amp(1.0, 0.05);
  std::normal_distribution<double> afib_amp(1.0, 0.18);
  std::uniform_real_distribution<double> t_jitter(-0.03, 0.03);
  std::uniform_real_distribution<double> start(0.1, 0.9);

  double tb = start(rng) * cfg.sinus_rr_mean_s;
  while (tb < cfg.duration_s + 0.5) {
    const double a =
        cfg.qrs_amplitude * std::clamp(afib ? afib_amp(rng) : sinus_amp(rng), 0.5, 1.5);
    if (!afib) add_bump(wave, fs, tb - 0.17, 0.028, 0.15 * a);       // P
    add_bump(wave, fs, tb - 0.024, 0.010, -0.10 * a);                // Q
    add_bump(wave, fs, tb, 0.011, a);                                // R
    add_bump(wave, fs, tb + 0.026, 0.011, -0.22 * a);                // S
    const double t_off = afib ? 0.22 + t_jitter(rng) : 0.25;
    add_bump(wave, fs, tb + t_off, 0.055, 0.32 * a);                 // T
    double rr = afib ? afib_rr(rng) : sinus_rr(rng);
    rr = std::clamp(rr, 0.35, 1.3);
    tb += rr;
  }

  // Measurement noise, then conversion to raw counts.
  std::normal_distribution<double> white(0.0, cfg.noise_sigma);
  EcgRecord rec;
  char buf[16];
  std::snprintf(buf, sizeof buf, "rec%05d", index);
  rec.id = buf;
  rec.sample_rate_hz = fs;
  rec.label = afib ? 1 : 0;
  rec.samples.resize(n);
  const double half_scale = (cfg.adc_max + 1) / 2.0;
  for (int i = 0; i < n; ++i) {
    const double v = cfg.adc_midscale + half_scale * (wave[i] + white(rng));
    rec.samples[i] =
        static_cast<int>(std::clamp<long long>(std::llround(v), 0, cfg.adc_max));
  }
  return rec;
}

std::vector<EcgRecord> synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<EcgRecord> out;
  out.reserve(cfg.n_records);
  for (int i = 0; i < cfg.n_records; ++i) {
    const bool afib = static_cast<long long>(std::floor((i + 1) * cfg.afib_fraction)) >
                      static_cast<long long>(std::floor(i * cfg.afib_fraction));
    out.push_back(synth_record(cfg, i, afib));
  }
  return out;
}

}  // namespace anacore
