#pragma once

#include <string>
#include <utility>
#include <vector>

#include "anacore/model.hpp"

namespace anacore {

// One rectangular weight block on one array. Row coordinates count signed
// rows. `input_offset` is the first layer-input element the block consumes,
// `out_col_offset` the first layer-output element its columns produce.
// Weight-shared convolution copies carry distinct replication indices.
struct Placement {
  int id = 0;
  int layer_index = 0;  // index into LayerGraph::layers
  int chip_id = 0;
  int array_index = 0;
  int row_offset = 0;
  int col_offset = 0;
  int signed_rows = 0;
  int cols = 0;
  int replication_index = 0;
  int slice_index = 0;  // row-slice ordinal within the layer
  int input_offset = 0;
  int out_col_offset = 0;
};

// Input-vector element -> signed row, injective onto the allocated rows.
struct LookupTable {
  std::vector<std::pair<int, int>> entries;
  void validate() const;
};

LookupTable lookup_for(const Placement& p);

// Placements whose digitized outputs must be summed digitally (a layer whose
// input spans several row slices).
struct PartialSumGroup {
  int layer_index = 0;
  int out_offset = 0;
  int out_count = 0;
  std::vector<int> placement_ids;
};

struct PartitionPlan {
  ChipConfig cfg;
  int n_chips = 1;
  std::vector<Placement> placements;
  std::vector<PartialSumGroup> groups;

  std::string to_text() const;
};

// Splits every MAC layer into blocks that fit one array and packs them
// first-fit (columns advance fastest). The search for each layer starts on
// the array after the previous layer's last block so consecutive layers can
// run on different arrays; within an array the lowest column/row wins.
PartitionPlan partition(const LayerGraph& g, const ChipConfig& cfg, int n_chips);

// Structural checks: bounds, pairwise disjoint blocks, complete partial-sum
// groups. Throws on violation.
void validate_plan(const PartitionPlan& plan, const LayerGraph& g);

}  // namespace anacore
