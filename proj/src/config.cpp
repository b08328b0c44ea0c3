#include "anacore/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace anacore {

using nlohmann::json;

EnergyLedger ledger_from_rails(const RailPowers& rails, double runtime_s, double total_ops) {
  EnergyLedger l;
  l.system_total_j = rails.system_w * runtime_s;
  l.fpga_board_j = rails.fpga_board_w * runtime_s;
  l.arm_cpu_j = rails.arm_cpu_w * runtime_s;
  l.fpga_fabric_j = rails.fpga_fabric_w * runtime_s;
  l.dram_j = rails.dram_w * runtime_s;
  l.asic_total_j = rails.asic_w * runtime_s;
  l.asic_io_j = rails.asic_io_w * runtime_s;
  l.asic_analog_j = rails.asic_analog_w * runtime_s;
  l.asic_digital_j = rails.asic_digital_w * runtime_s;
  l.runtime_s = runtime_s;
  l.total_ops = total_ops;
  return l;
}

void PhaseLog::validate() const {
  if (records < 0) throw std::invalid_argument("negative record count");
  static const char* protocol[] = {"init", "load", "infer", "store"};
  if (phases.size() != 4) throw std::invalid_argument("phase log must have exactly 4 phases");
  double prev_end = 0;
  for (size_t i = 0; i < phases.size(); ++i) {
    const Phase& p = phases[i];
    if (p.name != protocol[i])
      throw std::invalid_argument("phase " + std::to_string(i) + " must be '" + protocol[i] +
                                  "', got '" + p.name + "'");
    if (p.duration_s < 0) throw std::invalid_argument("negative duration in phase " + p.name);
    if (i > 0 && p.start_s + 1e-12 < prev_end)
      throw std::invalid_argument("phase " + p.name + " overlaps its predecessor");
    prev_end = p.start_s + p.duration_s;
  }
}

std::string PhaseLog::to_json() const {
  json j;
  j["records"] = records;
  j["per_record_latency_s"] = per_record_latency_s;
  j["phases"] = json::array();
  for (const Phase& p : phases)
    j["phases"].push_back({{"name", p.name}, {"start_s", p.start_s}, {"duration_s", p.duration_s}});
  return j.dump(2) + "\n";
}

void save_phase_log(const PhaseLog& log, const std::filesystem::path& file) {
  log.validate();
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << log.to_json();
}

void RunConfig::validate() const {
  if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
  if (n_chips < 1) throw std::invalid_argument("n_chips must be >= 1");
  chip.validate();
  noise.validate();
  preproc.validate();
  train.validate();
  for (double w : {rails.system_w, rails.fpga_board_w, rails.arm_cpu_w, rails.fpga_fabric_w,
                   rails.dram_w, rails.asic_w, rails.asic_io_w, rails.asic_analog_w,
                   rails.asic_digital_w})
    if (w < 0) throw std::invalid_argument("rail powers must be non-negative");
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.noise = NoiseModel::defaults_for(cfg.chip);
  return cfg;
}

namespace {

// Applies the keys of one JSON object section and rejects unknown ones.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j.is_object())
      throw std::runtime_error("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (const auto it = j_.find(key); it != j_.end()) {
      try {
        it->get_to(out);
      } catch (const json::exception& e) {
        throw std::runtime_error("config key '" + name_ + "." + key + "': " + e.what());
      }
      seen_.insert(key);
    }
  }

  void get(const char* key, std::filesystem::path& out) {
    std::string s;
    get(key, s);
    if (seen_.count(key)) out = s;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key))
        throw std::runtime_error("unknown config key '" + name_ + "." + key + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void apply_chip(const json& j, ChipConfig& c) {
  Section s(j, "chip");
  s.get("arrays_per_chip", c.arrays_per_chip);
  s.get("rows_per_array", c.rows_per_array);
  s.get("columns_per_array", c.columns_per_array);
  s.get("activation_bits", c.activation_bits);
  s.get("weight_bits", c.weight_bits);
  s.get("adc_bits", c.adc_bits);
  s.get("mac_gain", c.mac_gain);
  s.get("adc_lo", c.adc_lo);
  s.get("adc_hi", c.adc_hi);
  s.get("event_period_ns", c.event_period_ns);
  s.get("integration_cycle_us", c.integration_cycle_us);
  s.finish();
}

void apply_noise(const json& j, NoiseModel& n) {
  Section s(j, "noise");
  s.get("synapse_gain_sigma", n.synapse_gain_sigma);
  s.get("neuron_offset_sigma", n.neuron_offset_sigma);
  s.get("readout_sigma", n.readout_sigma);
  s.get("seed", n.seed);
  s.finish();
}

void apply_preproc(const json& j, PreprocConfig& p) {
  Section s(j, "preproc");
  s.get("pool_window", p.pool_window);
  s.get("pool_stride", p.pool_stride);
  s.get("target_len", p.target_len);
  s.get("quant_scale", p.quant_scale);
  s.get("window_offset", p.window_offset);
  s.finish();
}

void apply_train(const json& j, TrainConfig& t) {
  Section s(j, "train");
  s.get("learning_rate", t.learning_rate);
  s.get("batch_count", t.batch_count);
  s.get("epochs", t.epochs);
  std::string opt;
  s.get("optimizer", opt);
  if (!opt.empty()) {
    if (opt == "adam")
      t.optimizer = OptimizerKind::adam;
    else if (opt == "sgd")
      t.optimizer = OptimizerKind::sgd;
    else
      throw std::runtime_error("config key 'train.optimizer': unknown optimizer '" + opt + "'");
  }
  s.get("seed", t.seed);
  s.get("test_split", t.test_split);
  s.get("mock_mode", t.mock_mode);
  s.get("logit_scale", t.logit_scale);
  s.get("early_stop_patience", t.early_stop_patience);
  s.get("early_stop_min_delta", t.early_stop_min_delta);
  s.finish();
}

void apply_perf(const json& j, PerfParams& p) {
  Section s(j, "perf");
  s.get("event_rate_hz", p.event_rate_hz);
  s.get("rows", p.rows);
  s.get("cols", p.cols);
  s.get("ops_per_mac", p.ops_per_mac);
  s.get("integration_cycle_s", p.integration_cycle_s);
  s.get("synapse_area_um2", p.synapse_area_um2);
  s.finish();
}

void apply_rails(const json& j, RailPowers& r) {
  Section s(j, "rails");
  s.get("system_w", r.system_w);
  s.get("fpga_board_w", r.fpga_board_w);
  s.get("arm_cpu_w", r.arm_cpu_w);
  s.get("fpga_fabric_w", r.fpga_fabric_w);
  s.get("dram_w", r.dram_w);
  s.get("asic_w", r.asic_w);
  s.get("asic_io_w", r.asic_io_w);
  s.get("asic_analog_w", r.asic_analog_w);
  s.get("asic_digital_w", r.asic_digital_w);
  s.finish();
}

void apply_ledger(const json& j, EnergyLedger& l, long long& records) {
  Section s(j, "ledger");
  s.get("system_total_j", l.system_total_j);
  s.get("fpga_board_j", l.fpga_board_j);
  s.get("arm_cpu_j", l.arm_cpu_j);
  s.get("fpga_fabric_j", l.fpga_fabric_j);
  s.get("dram_j", l.dram_j);
  s.get("asic_total_j", l.asic_total_j);
  s.get("asic_io_j", l.asic_io_j);
  s.get("asic_analog_j", l.asic_analog_j);
  s.get("asic_digital_j", l.asic_digital_j);
  s.get("runtime_s", l.runtime_s);
  s.get("total_ops", l.total_ops);
  s.get("records", records);
  s.finish();
}

void apply_paths(const json& j, RunPaths& p) {
  Section s(j, "paths");
  s.get("data_dir", p.data_dir);
  s.get("labels", p.labels);
  s.get("checkpoint", p.checkpoint);
  s.get("output", p.output);
  s.finish();
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error(origin + ": config root must be an object");

  RunConfig cfg = default_run_config();

  // Chip geometry first: the default noise magnitudes derive from it.
  if (const auto it = j.find("chip"); it != j.end()) apply_chip(*it, cfg.chip);
  cfg.noise = NoiseModel::defaults_for(cfg.chip);
  if (const auto it = j.find("noise"); it != j.end()) apply_noise(*it, cfg.noise);
  if (const auto it = j.find("paths"); it != j.end()) apply_paths(*it, cfg.paths);
  if (const auto it = j.find("preproc"); it != j.end()) apply_preproc(*it, cfg.preproc);
  if (const auto it = j.find("train"); it != j.end()) apply_train(*it, cfg.train);
  if (const auto it = j.find("perf"); it != j.end()) apply_perf(*it, cfg.perf);
  if (const auto it = j.find("rails"); it != j.end()) apply_rails(*it, cfg.rails);
  if (const auto it = j.find("ledger"); it != j.end()) {
    cfg.ledger = EnergyLedger{};
    apply_ledger(*it, *cfg.ledger, cfg.ledger_records);
  }

  static const std::set<std::string> sections = {"chip",  "noise", "paths",  "preproc",
                                                 "train", "perf",  "rails",  "ledger",
                                                 "block_size", "n_chips"};
  for (const auto& [key, value] : j.items()) {
    if (!sections.count(key)) throw std::runtime_error("unknown config key '" + key + "'");
    if (key == "block_size") value.get_to(cfg.block_size);
    if (key == "n_chips") value.get_to(cfg.n_chips);
  }

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), file.string());
}

}  // namespace anacore
