#pragma once

#include <optional>
#include <string>

#include "anacore/model.hpp"

namespace anacore {

struct PerfParams {
  double event_rate_hz = 125e6;  // back-to-back input events per row
  int rows = 256;
  int cols = 512;
  int ops_per_mac = 2;  // multiply + add
  double integration_cycle_s = 5e-6;
  double synapse_area_um2 = 96.0;  // 8 um x 12 um
};

// All synapses busy every event slot.
double peak_throughput(const PerfParams& p);
// One full-array MAC per integration cycle.
double effective_throughput(const PerfParams& p);
// Peak throughput per synapse-array silicon area, op/s/mm^2.
double area_efficiency(const PerfParams& p);

// 2 ops per MAC; Conv1d contributes out_len * out_channels * kernel MACs,
// Linear in_features * out_features.
long long op_count(const LayerGraph& g);

// Measured energy split of one processing run, joules.
struct EnergyLedger {
  double system_total_j = 0;
  double fpga_board_j = 0;
  double arm_cpu_j = 0;
  double fpga_fabric_j = 0;
  double dram_j = 0;
  double asic_total_j = 0;
  double asic_io_j = 0;
  double asic_analog_j = 0;
  double asic_digital_j = 0;
  double runtime_s = 0;
  double total_ops = 0;

  // asic components must close against asic_total within `closure_tol_j`
  // and no component may exceed the system total.
  void validate(double closure_tol_j = 1e-3) const;
};

struct EnergyReport {
  double ops_per_second = 0;
  double asic_ops_per_joule = 0;
  double system_ops_per_joule = 0;
  double seconds_per_record = 0;  // 0 when the record count is unknown
};

EnergyReport energy_report(const EnergyLedger& ledger, long long records = 0);

// Aligned text table of the ledger and derived figures. When the layer-formula
// operation count disagrees with the ledger's total, both are printed with a
// note that the counting conventions differ.
std::string format_report_text(const EnergyLedger& ledger, long long records,
                               std::optional<long long> model_ops_per_record = std::nullopt);
std::string format_report_csv(const EnergyLedger& ledger, long long records,
                              std::optional<long long> model_ops_per_record = std::nullopt);

}  // namespace anacore
