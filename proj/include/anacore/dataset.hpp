#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "anacore/preprocess.hpp"
#include "anacore/train.hpp"

namespace anacore {

// On-disk dataset layout:
//   <dir>/labels.csv          "record_id,label"
//   <dir>/records/<id>.csv    "sample_rate,<hz>" header, then one sample per line

void save_record_csv(const EcgRecord& rec, const std::filesystem::path& file);
EcgRecord load_record_csv(const std::filesystem::path& file);

void save_labels_csv(const std::vector<std::pair<std::string, int>>& labels,
                     const std::filesystem::path& file);
std::vector<std::pair<std::string, int>> load_labels_csv(const std::filesystem::path& file);

void save_dataset(const std::vector<EcgRecord>& records, const std::filesystem::path& dir);
std::vector<EcgRecord> load_dataset(const std::filesystem::path& dir);

// Record files of a dataset directory, sorted by filename.
std::vector<std::filesystem::path> list_record_files(const std::filesystem::path& dir);

void save_predictions_csv(const std::vector<std::pair<std::string, int>>& predictions,
                          const std::filesystem::path& file);

// Per-epoch metrics plus constant target columns so plots can draw the
// reference lines directly from the file.
void save_metrics_csv(const std::vector<EpochMetrics>& history, const std::filesystem::path& file,
                      double detection_target = 0.90, double false_positive_target = 0.20);

// One row per record: id followed by the activation codes.
void save_activations_csv(const std::vector<std::pair<std::string, ActivationVector>>& rows,
                          const std::filesystem::path& file);

}  // namespace anacore
