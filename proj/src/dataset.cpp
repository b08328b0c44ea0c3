#include "anacore/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace anacore {

namespace {

std::ifstream open_in(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  return in;
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

[[noreturn]] void parse_error(const fs::path& file, int line, const std::string& what) {
  throw std::runtime_error(file.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void save_record_csv(const EcgRecord& rec, const fs::path& file) {
  std::ofstream out = open_out(file);
  out << "sample_rate," << rec.sample_rate_hz << "\n";
  for (int s : rec.samples) out << s << "\n";
  if (!out) throw std::runtime_error("short write to " + file.string());
}

EcgRecord load_record_csv(const fs::path& file) {
  std::ifstream in = open_in(file);
  EcgRecord rec;
  rec.id = file.stem().string();

  std::string line;
  if (!std::getline(in, line)) parse_error(file, 1, "empty record file");
  {
    std::istringstream hs(line);
    std::string key;
    if (!std::getline(hs, key, ',') || key != "sample_rate" || !(hs >> rec.sample_rate_hz) ||
        rec.sample_rate_hz <= 0)
      parse_error(file, 1, "expected 'sample_rate,<hz>' header");
  }
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    try {
      size_t used = 0;
      rec.samples.push_back(std::stoi(line, &used));
      if (used != line.size()) parse_error(file, ln, "trailing characters after sample");
    } catch (const std::logic_error&) {
      parse_error(file, ln, "bad sample value '" + line + "'");
    }
  }
  return rec;
}

void save_labels_csv(const std::vector<std::pair<std::string, int>>& labels,
                     const fs::path& file) {
  std::ofstream out = open_out(file);
  out << "record_id,label\n";
  for (const auto& [id, label] : labels) out << id << "," << label << "\n";
  if (!out) throw std::runtime_error("short write to " + file.string());
}

std::vector<std::pair<std::string, int>> load_labels_csv(const fs::path& file) {
  std::ifstream in = open_in(file);
  std::string line;
  if (!std::getline(in, line) || line != "record_id,label")
    parse_error(file, 1, "expected 'record_id,label' header");
  std::vector<std::pair<std::string, int>> out;
  int ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    if (comma == std::string::npos || comma == 0) parse_error(file, ln, "expected 'id,label'");
    try {
      out.emplace_back(line.substr(0, comma), std::stoi(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      parse_error(file, ln, "bad label in '" + line + "'");
    }
  }
  return out;
}

void save_dataset(const std::vector<EcgRecord>& records, const fs::path& dir) {
  fs::create_directories(dir / "records");
  std::vector<std::pair<std::string, int>> labels;
  for (const EcgRecord& rec : records) {
    save_record_csv(rec, dir / "records" / (rec.id + ".csv"));
    if (rec.label >= 0) labels.emplace_back(rec.id, rec.label);
  }
  save_labels_csv(labels, dir / "labels.csv");
}

std::vector<fs::path> list_record_files(const fs::path& dir) {
  const fs::path records = dir / "records";
  if (!fs::is_directory(records))
    throw std::runtime_error("no records/ directory under " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(records))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<EcgRecord> load_dataset(const fs::path& dir) {
  std::vector<EcgRecord> out;
  for (const fs::path& file : list_record_files(dir)) out.push_back(load_record_csv(file));

  const fs::path labels_file = dir / "labels.csv";
  if (fs::exists(labels_file)) {
    for (const auto& [id, label] : load_labels_csv(labels_file)) {
      const auto it = std::find_if(out.begin(), out.end(),
                                   [&](const EcgRecord& r) { return r.id == id; });
      if (it == out.end())
        throw std::runtime_error("label for unknown record '" + id + "' in " +
                                 labels_file.string());
      it->label = label;
    }
  }
  return out;
}

void save_predictions_csv(const std::vector<std::pair<std::string, int>>& predictions,
                          const fs::path& file) {
  std::ofstream out = open_out(file);
  out << "record_id,prediction\n";
  for (const auto& [id, pred] : predictions) out << id << "," << pred << "\n";
  if (!out) throw std::runtime_error("short write to " + file.string());
}

void save_metrics_csv(const std::vector<EpochMetrics>& history, const fs::path& file,
                      double detection_target, double false_positive_target) {
  std::ofstream out = open_out(file);
  out << "epoch,train_loss,detection_rate,false_positive_rate,detection_target,"
         "false_positive_target\n";
  for (const EpochMetrics& em : history)
    out << em.epoch << "," << em.train_loss << "," << em.val.detection_rate << ","
        << em.val.false_positive_rate << "," << detection_target << ","
        << false_positive_target << "\n";
  if (!out) throw std::runtime_error("short write to " + file.string());
}

void save_activations_csv(const std::vector<std::pair<std::string, ActivationVector>>& rows,
                          const fs::path& file) {
  std::ofstream out = open_out(file);
  for (const auto& [id, act] : rows) {
    out << id;
    for (int v : act.values) out << "," << v;
    out << "\n";
  }
  if (!out) throw std::runtime_error("short write to " + file.string());
}

}  // namespace anacore
