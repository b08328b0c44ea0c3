#include "anacore/perf.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace anacore {

double peak_throughput(const PerfParams& p) {
  return p.event_rate_hz * p.rows * p.cols * p.ops_per_mac;
}

double effective_throughput(const PerfParams& p) {
  return (1.0 / p.integration_cycle_s) * p.rows * p.cols * p.ops_per_mac;
}

double area_efficiency(const PerfParams& p) {
  const double area_mm2 = static_cast<double>(p.rows) * p.cols * p.synapse_area_um2 * 1e-6;
  return peak_throughput(p) / area_mm2;
}

long long op_count(const LayerGraph& g) {
  g.validate();
  long long macs = 0;
  for (const Layer& l : g.layers) {
    if (const auto* c = std::get_if<Conv1dLayer>(&l))
      macs += static_cast<long long>(c->out_len()) * c->out_channels * c->kernel;
    else if (const auto* f = std::get_if<LinearLayer>(&l))
      macs += static_cast<long long>(f->in_features) * f->out_features;
  }
  return 2 * macs;
}

void EnergyLedger::validate(double closure_tol_j) const {
  if (!(runtime_s > 0)) throw std::invalid_argument("ledger runtime must be positive");
  if (!(total_ops > 0)) throw std::invalid_argument("ledger operation count must be positive");
  const double parts[] = {system_total_j, fpga_board_j, arm_cpu_j,    fpga_fabric_j, dram_j,
                          asic_total_j,   asic_io_j,    asic_analog_j, asic_digital_j};
  for (double v : parts)
    if (v < 0) throw std::invalid_argument("ledger energies must be non-negative");
  if (std::abs(asic_io_j + asic_analog_j + asic_digital_j - asic_total_j) > closure_tol_j)
    throw std::invalid_argument("asic component energies do not close against the asic total");
  for (double v : parts)
    if (v > system_total_j + closure_tol_j)
      throw std::invalid_argument("component energy exceeds the system total");
}

EnergyReport energy_report(const EnergyLedger& ledger, long long records) {
  ledger.validate();
  EnergyReport r;
  r.ops_per_second = ledger.total_ops / ledger.runtime_s;
  r.asic_ops_per_joule = ledger.asic_total_j > 0 ? ledger.total_ops / ledger.asic_total_j : 0;
  r.system_ops_per_joule = ledger.system_total_j > 0 ? ledger.total_ops / ledger.system_total_j : 0;
  r.seconds_per_record = records > 0 ? ledger.runtime_s / records : 0;
  return r;
}

namespace {

std::string eng(double v, const char* unit) {
  std::ostringstream out;
  out << std::setprecision(4) << std::defaultfloat << v << ' ' << unit;
  return out.str();
}

struct Row {
  std::string name, value;
};

std::vector<Row> report_rows(const EnergyLedger& ledger, long long records,
                             std::optional<long long> model_ops_per_record) {
  const EnergyReport r = energy_report(ledger, records);
  std::vector<Row> rows;
  if (records > 0)
    rows.push_back({"time (" + std::to_string(records) + " records)", eng(ledger.runtime_s, "s")});
  else
    rows.push_back({"time", eng(ledger.runtime_s, "s")});
  rows.push_back({"total energy", eng(ledger.system_total_j, "J")});
  rows.push_back({"energy fpga board", eng(ledger.fpga_board_j, "J")});
  rows.push_back({"energy arm cores", eng(ledger.arm_cpu_j, "J")});
  rows.push_back({"energy fpga fabric", eng(ledger.fpga_fabric_j, "J")});
  rows.push_back({"energy dram", eng(ledger.dram_j, "J")});
  rows.push_back({"total energy asic", eng(ledger.asic_total_j, "J")});
  rows.push_back({"energy asic io", eng(ledger.asic_io_j, "J")});
  rows.push_back({"energy asic analog", eng(ledger.asic_analog_j, "J")});
  rows.push_back({"energy asic digital", eng(ledger.asic_digital_j, "J")});
  rows.push_back({"total operations", eng(ledger.total_ops, "op")});
  rows.push_back({"processing speed", eng(r.ops_per_second, "op/s")});
  if (ledger.asic_total_j > 0)
    rows.push_back({"asic energy efficiency", eng(r.asic_ops_per_joule, "op/J")});
  rows.push_back({"system energy efficiency", eng(r.system_ops_per_joule, "op/J")});
  if (records > 0) rows.push_back({"time per record", eng(r.seconds_per_record, "s")});
  if (records > 0)
    rows.push_back({"operations per record", eng(ledger.total_ops / records, "op")});
  if (model_ops_per_record)
    rows.push_back({"model operations per record", eng(*model_ops_per_record, "op")});
  return rows;
}

bool ops_disagree(const EnergyLedger& ledger, long long records,
                  std::optional<long long> model_ops_per_record) {
  if (!model_ops_per_record || records <= 0) return false;
  const double per_record = ledger.total_ops / records;
  return std::abs(per_record - *model_ops_per_record) > 0.5;
}

}  // namespace

std::string format_report_text(const EnergyLedger& ledger, long long records,
                               std::optional<long long> model_ops_per_record) {
  const std::vector<Row> rows = report_rows(ledger, records, model_ops_per_record);
  size_t w = 0;
  for (const Row& row : rows) w = std::max(w, row.name.size());
  std::ostringstream out;
  for (const Row& row : rows)
    out << std::left << std::setw(static_cast<int>(w) + 2) << row.name << row.value << "\n";
  if (ops_disagree(ledger, records, model_ops_per_record)) {
    out << "note: the ledger operation count implies "
        << static_cast<long long>(std::llround(ledger.total_ops / records))
        << " op/record while the layer formulas give " << *model_ops_per_record
        << " op/record; the counting conventions differ and are reported side by side.\n";
  }
  return out.str();
}

std::string format_report_csv(const EnergyLedger& ledger, long long records,
                              std::optional<long long> model_ops_per_record) {
  const std::vector<Row> rows = report_rows(ledger, records, model_ops_per_record);
  std::ostringstream out;
  out << "quantity,value,unit\n";
  for (const Row& row : rows) {
    const size_t sp = row.value.rfind(' ');
    out << row.name << ',' << row.value.substr(0, sp) << ',' << row.value.substr(sp + 1) << "\n";
  }
  return out.str();
}

}  // namespace anacore
