#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anacore/checkpoint.hpp"
#include "anacore/config.hpp"
#include "anacore/dataset.hpp"
#include "anacore/execute.hpp"
#include "anacore/partition.hpp"
#include "anacore/perf.hpp"
#include "anacore/preprocess.hpp"
#include "anacore/stream.hpp"
#include "anacore/synth.hpp"
#include "anacore/train.hpp"

namespace fs = std::filesystem;
using namespace anacore;

namespace {

struct CliOverrides {
  std::string config_path;
  std::string data_dir;
  std::string checkpoint;
  std::string out_dir;
  std::string noise_mode = "config";  // config | on | off
  std::uint64_t seed = 0;
  bool has_seed = false;
  bool mock = false;
  int block_size = 0;
};

// Registers the flags shared between subcommands.
void add_common_flags(CLI::App* cmd, CliOverrides& o, bool with_backend_flags) {
  cmd->add_option("--config", o.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out_dir, "output directory");
  if (with_backend_flags) {
    cmd->add_option("--seed", o.seed, "overrides the training and noise seeds")
        ->each([&o](const std::string&) { o.has_seed = true; });
    cmd->add_option("--noise", o.noise_mode, "fixed-pattern/readout noise: on or off")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_flag("--mock", o.mock, "use the integer reference backend instead of the chip");
  }
}

RunConfig resolve_config(const CliOverrides& o) {
  RunConfig cfg =
      o.config_path.empty() ? default_run_config() : load_run_config(o.config_path);
  if (!o.data_dir.empty()) cfg.paths.data_dir = o.data_dir;
  if (!o.checkpoint.empty()) cfg.paths.checkpoint = o.checkpoint;
  if (!o.out_dir.empty()) cfg.paths.output = o.out_dir;
  if (o.has_seed) {
    cfg.train.seed = o.seed;
    cfg.noise.seed = o.seed;
  }
  if (o.noise_mode == "off") {
    cfg.noise.synapse_gain_sigma = 0;
    cfg.noise.neuron_offset_sigma = 0;
    cfg.noise.readout_sigma = 0;
  } else if (o.noise_mode == "on") {
    const NoiseModel defaults = NoiseModel::defaults_for(cfg.chip);
    if (cfg.noise.synapse_gain_sigma == 0) cfg.noise.synapse_gain_sigma = defaults.synapse_gain_sigma;
    if (cfg.noise.neuron_offset_sigma == 0) cfg.noise.neuron_offset_sigma = defaults.neuron_offset_sigma;
    if (cfg.noise.readout_sigma == 0) cfg.noise.readout_sigma = defaults.readout_sigma;
  }
  if (o.mock) cfg.train.mock_mode = true;
  if (o.block_size > 0) cfg.block_size = o.block_size;
  cfg.validate();
  return cfg;
}

fs::path require_out_dir(const RunConfig& cfg) {
  if (cfg.paths.output.empty()) throw std::runtime_error("an output directory is required (--out)");
  fs::create_directories(cfg.paths.output);
  return cfg.paths.output;
}

fs::path require_data_dir(const RunConfig& cfg) {
  if (cfg.paths.data_dir.empty()) throw std::runtime_error("a dataset directory is required (--data)");
  return cfg.paths.data_dir;
}

std::vector<EcgRecord> load_records(const RunConfig& cfg) {
  std::vector<EcgRecord> records = load_dataset(require_data_dir(cfg));
  if (records.empty()) throw std::runtime_error("dataset is empty");
  if (!cfg.paths.labels.empty()) {
    for (const auto& [id, label] : load_labels_csv(cfg.paths.labels)) {
      const auto it = std::find_if(records.begin(), records.end(),
                                   [&](const EcgRecord& r) { return r.id == id; });
      if (it == records.end())
        throw std::runtime_error("label for unknown record '" + id + "'");
      it->label = label;
    }
  }
  return records;
}

fs::path sidecar_path(const fs::path& checkpoint) {
  return checkpoint.string() + ".preproc.json";
}

void write_preproc_sidecar(const PreprocConfig& p, const fs::path& file) {
  nlohmann::json j;
  j["pool_window"] = p.pool_window;
  j["pool_stride"] = p.pool_stride;
  j["target_len"] = p.target_len;
  j["quant_scale"] = p.quant_scale;
  j["window_offset"] = p.window_offset;
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump(2) << "\n";
}

PreprocConfig read_preproc_sidecar(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  nlohmann::json j = nlohmann::json::parse(in);
  PreprocConfig p;
  j.at("pool_window").get_to(p.pool_window);
  j.at("pool_stride").get_to(p.pool_stride);
  j.at("target_len").get_to(p.target_len);
  j.at("quant_scale").get_to(p.quant_scale);
  j.at("window_offset").get_to(p.window_offset);
  p.validate();
  return p;
}

// Calibrates the 5-bit input scale on the training portion of the dataset
// when the configuration does not pin one.
PreprocConfig calibrated_preproc(const RunConfig& cfg, const std::vector<EcgRecord>& records) {
  PreprocConfig p = cfg.preproc;
  if (p.quant_scale > 0) return p;
  std::vector<std::string> ids;
  for (const EcgRecord& r : records) ids.push_back(r.id);
  const std::vector<std::string> test_ids =
      split_test_ids(ids, cfg.train.seed, cfg.train.test_split);
  const std::set<std::string> held_out(test_ids.begin(), test_ids.end());
  std::vector<const EcgRecord*> train_split;
  for (const EcgRecord& r : records)
    if (!held_out.count(r.id)) train_split.push_back(&r);
  p.quant_scale = calibrate_quant_scale(train_split, p);
  std::cout << "calibrated input quantization scale: " << p.quant_scale << "\n";
  return p;
}

int run_synth(const CliOverrides& o, int n_records, double afib_fraction) {
  const RunConfig cfg = resolve_config(o);
  if (n_records < 2) throw std::runtime_error("need at least 2 records");
  if (!(afib_fraction > 0.0 && afib_fraction < 1.0))
    throw std::runtime_error("afib fraction must be inside (0, 1)");
  SynthConfig sc;
  sc.n_records = n_records;
  sc.afib_fraction = afib_fraction;
  sc.seed = o.has_seed ? o.seed : cfg.train.seed;
  const fs::path out = require_out_dir(cfg);
  const std::vector<EcgRecord> records = synth_dataset(sc);
  save_dataset(records, out);
  int positives = 0;
  for (const EcgRecord& r : records) positives += r.label == 1;
  std::cout << "wrote " << records.size() << " records (" << positives
            << " fibrillation) to " << out.string() << "\n";
  return 0;
}

int run_preprocess(const CliOverrides& o) {
  const RunConfig cfg = resolve_config(o);
  const std::vector<EcgRecord> records = load_records(cfg);
  PreprocConfig p = cfg.preproc;
  if (p.quant_scale <= 0) {
    std::vector<const EcgRecord*> all;
    for (const EcgRecord& r : records) all.push_back(&r);
    p.quant_scale = calibrate_quant_scale(all, p);
    std::cout << "calibrated input quantization scale on the full set: " << p.quant_scale
              << "\n";
  }
  std::vector<std::pair<std::string, ActivationVector>> rows;
  for (const EcgRecord& r : records) rows.emplace_back(r.id, preprocess_record(r, p));
  const fs::path out = require_out_dir(cfg);
  save_activations_csv(rows, out / "activations.csv");
  std::cout << "wrote " << rows.size() << " activation rows to "
            << (out / "activations.csv").string() << "\n";
  return 0;
}

int run_train(const CliOverrides& o) {
  const RunConfig cfg = resolve_config(o);
  std::vector<EcgRecord> records = load_records(cfg);
  for (const EcgRecord& r : records)
    if (r.label < 0) throw std::runtime_error("record '" + r.id + "' has no label");

  const PreprocConfig preproc = calibrated_preproc(cfg, records);
  const LayerGraph shape = build_ecg_model(cfg.chip);
  if (shape.input_len != preproc.target_len)
    throw std::runtime_error("preprocessing length does not match the model input");

  std::vector<LabeledExample> examples;
  for (const EcgRecord& r : records)
    examples.push_back({r.id, preprocess_record(r, preproc), r.label});

  const TrainResult result =
      train(examples, shape, cfg.train, cfg.chip, cfg.noise, cfg.n_chips);

  std::cout << std::fixed << std::setprecision(3);
  for (const EpochMetrics& em : result.history)
    std::cout << "epoch " << std::setw(3) << em.epoch << "  loss " << em.train_loss
              << "  detection " << em.val.detection_rate << "  false-positive "
              << em.val.false_positive_rate << "\n";

  const fs::path out = require_out_dir(cfg);
  const fs::path ckpt =
      cfg.paths.checkpoint.empty() ? out / "model.json" : cfg.paths.checkpoint;
  save_checkpoint(result.model, ckpt.string());
  write_preproc_sidecar(preproc, sidecar_path(ckpt));
  save_metrics_csv(result.history, out / "metrics.csv");
  std::cout << "checkpoint: " << ckpt.string() << "\n"
            << "metrics:    " << (out / "metrics.csv").string() << "\n";
  return 0;
}

int run_infer(const CliOverrides& o) {
  const RunConfig cfg = resolve_config(o);
  if (cfg.paths.checkpoint.empty())
    throw std::runtime_error("a checkpoint is required (--checkpoint)");
  const fs::path out = require_out_dir(cfg);

  using clock = std::chrono::steady_clock;
  const clock::time_point t0 = clock::now();
  PhaseLog log;
  const auto phase_start = [&] {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };
  const auto close_phase = [&](const std::string& name, double start) {
    log.phases.push_back({name, start, phase_start() - start});
  };

  // init: model restore, placement and weight deployment.
  double start = phase_start();
  const LayerGraph graph = load_checkpoint(cfg.paths.checkpoint.string());
  PreprocConfig preproc = cfg.preproc;
  if (preproc.quant_scale <= 0) {
    const fs::path sidecar = sidecar_path(cfg.paths.checkpoint);
    if (!fs::exists(sidecar))
      throw std::runtime_error(
          "input quantization scale not configured and no calibration stored beside the "
          "checkpoint");
    preproc = read_preproc_sidecar(sidecar);
  }
  if (graph.input_len != preproc.target_len)
    throw std::runtime_error("checkpoint input length does not match the preprocessing");
  auto backend =
      make_backend(graph, cfg.chip, cfg.noise, cfg.n_chips, cfg.train.mock_mode);
  backend->deploy(graph);
  close_phase("init", start);

  // load: raw records into memory.
  start = phase_start();
  const std::vector<EcgRecord> records = load_records(cfg);
  close_phase("load", start);

  // infer: preprocessing plus the forward pass, batch size one within blocks.
  start = phase_start();
  std::vector<std::pair<std::string, int>> predictions;
  ConfusionCounts counts;
  bool any_labels = false;
  for (size_t lo = 0; lo < records.size(); lo += cfg.block_size) {
    const size_t hi = std::min(records.size(), lo + cfg.block_size);
    for (size_t i = lo; i < hi; ++i) {
      const EcgRecord& rec = records[i];
      const ForwardTrace trace = backend->forward(preprocess_record(rec, preproc));
      if (trace.label < 0) throw std::runtime_error("model produces no class decision");
      predictions.emplace_back(rec.id, trace.label);
      if (rec.label == 0 || rec.label == 1) {
        any_labels = true;
        if (rec.label == 1)
          (trace.label == 1 ? counts.tp : counts.fn)++;
        else
          (trace.label == 1 ? counts.fp : counts.tn)++;
      }
    }
  }
  const double infer_duration = phase_start() - start;
  close_phase("infer", start);

  // store: results to disk.
  start = phase_start();
  save_predictions_csv(predictions, out / "predictions.csv");
  close_phase("store", start);

  log.records = static_cast<long long>(records.size());
  log.per_record_latency_s = infer_duration / static_cast<double>(records.size());
  save_phase_log(log, out / "phases.json");

  const long long model_ops = op_count(graph);
  const EnergyLedger ledger = ledger_from_rails(
      cfg.rails, infer_duration, static_cast<double>(model_ops) * records.size());
  const std::string report = format_report_text(ledger, log.records, model_ops);
  {
    std::ofstream rpt(out / "report.txt");
    rpt << report;
    std::ofstream csv(out / "report.csv");
    csv << format_report_csv(ledger, log.records, model_ops);
  }

  std::cout << report << "\n"
            << "predictions: " << (out / "predictions.csv").string() << "\n";
  if (any_labels) {
    const Metrics m = counts.metrics();
    std::cout << std::fixed << std::setprecision(3) << "detection rate: " << m.detection_rate
              << "  false-positive rate: " << m.false_positive_rate << "\n";
  }
  return 0;
}

int run_report(const CliOverrides& o) {
  const RunConfig cfg = resolve_config(o);
  if (!cfg.ledger) throw std::runtime_error("the configuration has no ledger section");
  cfg.ledger->validate();
  long long model_ops = 0;
  if (!cfg.paths.checkpoint.empty() && fs::exists(cfg.paths.checkpoint))
    model_ops = op_count(load_checkpoint(cfg.paths.checkpoint.string()));
  else
    model_ops = op_count(build_ecg_model(cfg.chip));
  const std::string text = format_report_text(*cfg.ledger, cfg.ledger_records, model_ops);
  std::cout << text;
  if (!cfg.paths.output.empty()) {
    const fs::path out = require_out_dir(cfg);
    std::ofstream rpt(out / "report.txt");
    rpt << text;
    std::ofstream csv(out / "report.csv");
    csv << format_report_csv(*cfg.ledger, cfg.ledger_records, model_ops);
    std::cout << "written to " << (out / "report.txt").string() << " and "
              << (out / "report.csv").string() << "\n";
  }
  return 0;
}

int run_dump_weights(const CliOverrides& o) {
  const RunConfig cfg = resolve_config(o);
  if (cfg.paths.checkpoint.empty())
    throw std::runtime_error("a checkpoint is required (--checkpoint)");
  const fs::path out = require_out_dir(cfg);

  const LayerGraph graph = load_checkpoint(cfg.paths.checkpoint.string());
  const PartitionPlan plan = partition(graph, cfg.chip, cfg.n_chips);
  const InstructionStream stream = lower(plan, graph);
  std::vector<ChipState> chips = make_chips(stream, cfg.noise);
  ActivationVector none;
  execute(stream, chips, none, ExecPhase::load_only);

  {
    std::ofstream f(out / "plan.txt");
    f << plan.to_text();
    std::ofstream g(out / "stream.txt");
    g << stream.to_text();
  }
  for (size_t c = 0; c < chips.size(); ++c)
    for (int a = 0; a < cfg.chip.arrays_per_chip; ++a) {
      const fs::path file =
          out / ("weights_chip" + std::to_string(c) + "_array" + std::to_string(a) + ".csv");
      std::ofstream f(file);
      chips[c].dump_weights_csv(f, a);
    }
  std::cout << "wrote plan.txt, stream.txt and per-array synapse dumps to " << out.string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"analog in-memory ECG inference toolchain"};
  app.require_subcommand(1);

  CliOverrides synth_o, pre_o, train_o, infer_o, report_o, dump_o;
  int synth_records = 1000;
  double synth_fraction = 0.5;

  CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic ECG dataset");
  add_common_flags(synth, synth_o, false);
  synth->add_option("--seed", synth_o.seed, "generator seed")
      ->each([&synth_o](const std::string&) { synth_o.has_seed = true; });
  synth->add_option("--records", synth_records, "number of records");
  synth->add_option("--afib-fraction", synth_fraction, "share of fibrillation records");

  CLI::App* pre = app.add_subcommand("preprocess", "dump 5-bit input activations per record");
  add_common_flags(pre, pre_o, false);
  pre->add_option("--data", pre_o.data_dir, "dataset directory");

  CLI::App* trn = app.add_subcommand("train", "train on labeled records and write a checkpoint");
  add_common_flags(trn, train_o, true);
  trn->add_option("--data", train_o.data_dir, "dataset directory");
  trn->add_option("--checkpoint", train_o.checkpoint, "checkpoint output path");

  CLI::App* inf = app.add_subcommand("infer", "classify records under the four-phase protocol");
  add_common_flags(inf, infer_o, true);
  inf->add_option("--data", infer_o.data_dir, "dataset directory");
  inf->add_option("--checkpoint", infer_o.checkpoint, "trained checkpoint");
  inf->add_option("--block-size", infer_o.block_size, "records per measurement block")
      ->check(CLI::PositiveNumber);

  CLI::App* rpt = app.add_subcommand("report", "derive the throughput/energy table from a ledger");
  add_common_flags(rpt, report_o, false);
  rpt->add_option("--checkpoint", report_o.checkpoint, "checkpoint for the model op count");

  CLI::App* dmp = app.add_subcommand("dump-weights", "write plan, stream and synapse dumps");
  add_common_flags(dmp, dump_o, false);
  dmp->add_option("--checkpoint", dump_o.checkpoint, "trained checkpoint");

  synth->callback([&] { run_synth(synth_o, synth_records, synth_fraction); });
  pre->callback([&] { run_preprocess(pre_o); });
  trn->callback([&] { run_train(train_o); });
  inf->callback([&] { run_infer(infer_o); });
  rpt->callback([&] { run_report(report_o); });
  dmp->callback([&] { run_dump_weights(dump_o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
