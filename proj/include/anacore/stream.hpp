#pragma once

#include <string>
#include <variant>
#include <vector>

#include "anacore/partition.hpp"

namespace anacore {

enum class DigitalKind { relu, avgpool, maxpool, argmax, partial_sum, requant };

struct LoadInputOp {
  int dst = 0;
};
struct LoadWeightsOp {
  int placement = 0;
};
struct ResetNeuronsOp {
  int chip = 0;
  int array = 0;
};
// Sends the input-register slice selected by the placement's lookup table to
// the placement's rows; only its columns integrate.
struct SendVectorOp {
  int chip = 0;
  int array = 0;
  int placement = 0;
  int src = 0;
};
// Digitizes columns [col_lo, col_hi) and stores the recentered codes at
// reg[dst][dst_offset ...]. `layer` tags the MAC layer pass for accounting.
struct ReadAdcOp {
  int chip = 0;
  int array = 0;
  int col_lo = 0;
  int col_hi = 0;
  AdcMode mode = AdcMode::signed_linear;
  int dst = 0;
  int dst_offset = 0;
  int layer = 0;
};
struct DigitalOp {
  DigitalKind kind = DigitalKind::relu;
  int dst = 0;
  std::vector<int> srcs;
  int arg = 0;  // group size for pools, shift for requant
};
struct StoreResultOp {
  int src = 0;
};

using Instruction = std::variant<LoadInputOp, LoadWeightsOp, ResetNeuronsOp, SendVectorOp,
                                 ReadAdcOp, DigitalOp, StoreResultOp>;

// Registers a MAC layer's evaluation occupies; kept for trace extraction and
// for the training loop.
struct LayerIo {
  int layer_index = 0;
  int input_reg = 0;
  std::vector<int> slice_regs;
  int sum_reg = 0;
  int act_reg = 0;
  int out_reg = 0;
  bool relu = false;
  int requant_shift = -1;  // -1 when absent
};

// A complete program for a fixed partition plan: placement table, per-block
// weight blobs and the instruction list. LoadWeights instructions come first
// so deployment can be replayed separately from inference.
struct InstructionStream {
  ChipConfig cfg;
  int n_chips = 1;
  int input_len = 0;
  std::vector<Placement> placements;
  std::vector<SignedWeightMatrix> weight_table;  // indexed by placement id
  std::vector<Instruction> code;
  int n_registers = 0;
  std::vector<LayerIo> layer_io;
  int pooled_reg = -1;
  int label_reg = -1;

  // Re-slices layer weights into the per-placement table after an update.
  void refresh_weights(const LayerGraph& g);
  std::string to_text() const;
};

InstructionStream lower(const PartitionPlan& plan, const LayerGraph& g);

// Instruction-level invariants: every ReadAdc is dominated by a ResetNeurons
// on the same array with at least one SendVector and no other ReadAdc in
// between; registers are written before use; sends follow their weight load.
void check_well_formed(const InstructionStream& s);

// Number of distinct MAC-layer passes that read the ADC.
int read_phase_count(const InstructionStream& s);

}  // namespace anacore
