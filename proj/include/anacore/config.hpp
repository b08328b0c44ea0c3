#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "anacore/chip.hpp"
#include "anacore/perf.hpp"
#include "anacore/preprocess.hpp"
#include "anacore/train.hpp"

namespace anacore {

// Average rail power (watts) while processing; multiplied by measured phase
// durations to produce an energy ledger. Defaults reproduce the reference
// measurement split of a 500-record block in 138 ms.
struct RailPowers {
  double system_w = 0.78 / 0.138;
  double fpga_board_w = 0.35 / 0.138;
  double arm_cpu_w = 0.17 / 0.138;
  double fpga_fabric_w = 0.10 / 0.138;
  double dram_w = 0.056 / 0.138;
  double asic_w = 0.096 / 0.138;
  double asic_io_w = 0.032 / 0.138;
  double asic_analog_w = 0.031 / 0.138;
  double asic_digital_w = 0.033 / 0.138;
};

EnergyLedger ledger_from_rails(const RailPowers& rails, double runtime_s, double total_ops);

// Wall-clock protocol of one inference run: system initialization, input
// transfer, inference and result transfer must appear in that order and the
// inference phase excludes the transfers.
struct Phase {
  std::string name;
  double start_s = 0;
  double duration_s = 0;
};

struct PhaseLog {
  std::vector<Phase> phases;
  long long records = 0;
  double per_record_latency_s = 0;  // inference duration / records

  void validate() const;
  std::string to_json() const;
};

void save_phase_log(const PhaseLog& log, const std::filesystem::path& file);

struct RunPaths {
  std::filesystem::path data_dir;
  std::filesystem::path labels;  // empty: use <data_dir>/labels.csv
  std::filesystem::path checkpoint;
  std::filesystem::path output;  // directory for generated artifacts
};

struct RunConfig {
  RunPaths paths;
  ChipConfig chip;
  NoiseModel noise;  // defaults to the chip's standard deviations
  PreprocConfig preproc;
  TrainConfig train;
  PerfParams perf;
  RailPowers rails;
  std::optional<EnergyLedger> ledger;  // explicit ledger for report generation
  long long ledger_records = 0;
  int block_size = 500;  // records per timing/measurement block
  int n_chips = 1;

  void validate() const;
};

RunConfig default_run_config();

// Strict JSON loader: sections and keys are named exactly after the structs
// and fields above; unknown keys are errors.
RunConfig load_run_config(const std::filesystem::path& file);
RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");

}  // namespace anacore
