#pragma once

#include "anacore/stream.hpp"

namespace anacore {

enum class ExecPhase { full, load_only, compute_only };

struct ExecutionResult {
  ForwardTrace trace;
  std::vector<int> output;  // register content of the last StoreResult before argmax
  int label = -1;
  int integration_windows = 0;
};

// Runs a program against a set of chips. `compute_only` assumes weights were
// deployed by a previous `load_only` (or `full`) pass over the same chips.
ExecutionResult execute(const InstructionStream& s, std::vector<ChipState>& chips,
                        const ActivationVector& input, ExecPhase phase = ExecPhase::full);

// Chips matching the stream's config, one noise draw per chip id.
std::vector<ChipState> make_chips(const InstructionStream& s, const NoiseModel& noise);

}  // namespace anacore
