#include "anacore/execute.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace anacore {

std::vector<ChipState> make_chips(const InstructionStream& s, const NoiseModel& noise) {
  std::vector<ChipState> chips;
  chips.reserve(s.n_chips);
  for (int i = 0; i < s.n_chips; ++i) {
    NoiseModel n = noise;
    n.seed = noise.seed + static_cast<std::uint64_t>(i);
    chips.emplace_back(s.cfg, n);
  }
  return chips;
}

ExecutionResult execute(const InstructionStream& s, std::vector<ChipState>& chips,
                        const ActivationVector& input, ExecPhase phase) {
  if (static_cast<int>(chips.size()) < s.n_chips)
    throw std::invalid_argument("stream needs " + std::to_string(s.n_chips) + " chips");
  if (s.weight_table.size() != s.placements.size())
    throw std::runtime_error("stream weight table incomplete");

  ExecutionResult result;
  std::vector<std::vector<int>> regs(s.n_registers);
  std::vector<bool> live(s.n_registers, false);
  std::set<int> loaded;
  const QuantSpec spec = QuantSpec::from_config(s.cfg);
  std::vector<std::vector<int>> stored;

  for (const Instruction& ins : s.code) {
    if (const auto* op = std::get_if<LoadWeightsOp>(&ins)) {
      const Placement& p = s.placements[op->placement];
      if (phase != ExecPhase::compute_only)
        chips[p.chip_id].load_weights(p.array_index, s.weight_table[p.id], p.row_offset,
                                      p.col_offset);
      loaded.insert(p.id);
      continue;
    }
    if (phase == ExecPhase::load_only) continue;

    if (const auto* op = std::get_if<LoadInputOp>(&ins)) {
      if (input.size() != s.input_len) throw std::invalid_argument("input length mismatch");
      regs[op->dst] = input.values;
      live[op->dst] = true;
    } else if (const auto* op = std::get_if<ResetNeuronsOp>(&ins)) {
      chips[op->chip].reset_array(op->array);
      ++result.integration_windows;
    } else if (const auto* op = std::get_if<SendVectorOp>(&ins)) {
      const Placement& p = s.placements[op->placement];
      if (!loaded.count(p.id)) throw std::runtime_error("send references an unloaded placement");
      if (!live[op->src]) throw std::runtime_error("send reads an unwritten register");
      const std::vector<int>& src = regs[op->src];
      if (p.input_offset + p.signed_rows > static_cast<int>(src.size()))
        throw std::runtime_error("send slice exceeds source register");
      ActivationVector x;
      x.values.assign(src.begin() + p.input_offset, src.begin() + p.input_offset + p.signed_rows);
      chips[p.chip_id].accumulate(p.array_index, x, p.row_offset, p.col_offset,
                                  p.col_offset + p.cols);
    } else if (const auto* op = std::get_if<ReadAdcOp>(&ins)) {
      const AdcConfig adc = op->mode == AdcMode::relu
                                ? AdcConfig::relu_for(s.cfg, chips[op->chip].reset_level())
                                : AdcConfig::signed_linear_for(s.cfg);
      const int z = zero_code(adc, chips[op->chip].reset_level());
      const std::vector<int> codes = chips[op->chip].read_adc(op->array, adc, op->col_lo, op->col_hi);
      auto& dst = regs[op->dst];
      if (static_cast<int>(dst.size()) < op->dst_offset + static_cast<int>(codes.size()))
        dst.resize(op->dst_offset + codes.size(), 0);
      for (size_t i = 0; i < codes.size(); ++i) dst[op->dst_offset + i] = codes[i] - z;
      live[op->dst] = true;
    } else if (const auto* op = std::get_if<DigitalOp>(&ins)) {
      for (int r : op->srcs)
        if (!live[r]) throw std::runtime_error("digital op reads an unwritten register");
      std::vector<int>& dst = regs[op->dst];
      switch (op->kind) {
        case DigitalKind::relu: {
          dst = regs[op->srcs.at(0)];
          for (int& v : dst) v = std::max(0, v);
          break;
        }
        case DigitalKind::partial_sum: {
          dst = regs[op->srcs.at(0)];
          for (size_t k = 1; k < op->srcs.size(); ++k) {
            const std::vector<int>& add = regs[op->srcs[k]];
            if (add.size() != dst.size()) throw std::runtime_error("partial-sum size mismatch");
            for (size_t i = 0; i < dst.size(); ++i) dst[i] += add[i];
          }
          break;
        }
        case DigitalKind::requant: {
          const std::vector<int>& src = regs[op->srcs.at(0)];
          dst.resize(src.size());
          for (size_t i = 0; i < src.size(); ++i) {
            const int v = src[i];
            dst[i] = v <= 0 ? 0 : std::min(v >> op->arg, spec.act_max);
          }
          break;
        }
        case DigitalKind::avgpool:
          dst = pool_groups(regs[op->srcs.at(0)], op->arg, false);
          result.trace.pooled = dst;
          break;
        case DigitalKind::maxpool:
          dst = pool_groups(regs[op->srcs.at(0)], op->arg, true);
          result.trace.pooled = dst;
          break;
        case DigitalKind::argmax:
          result.label = argmax_label(regs[op->srcs.at(0)]);
          dst = {result.label};
          break;
      }
      live[op->dst] = true;
    } else if (const auto* op = std::get_if<StoreResultOp>(&ins)) {
      if (!live[op->src]) throw std::runtime_error("store reads an unwritten register");
      stored.push_back(regs[op->src]);
    }
  }

  if (phase == ExecPhase::load_only) return result;

  if (!stored.empty()) result.output = stored.front();
  result.trace.label = result.label;

  // Assemble the per-layer trace from the register map.
  for (const LayerIo& io : s.layer_io) {
    LayerTrace t;
    t.input = regs[io.input_reg];
    for (int r : io.slice_regs) t.slice_codes.push_back(regs[r]);
    t.summed = regs[io.sum_reg];
    t.activated = regs[io.act_reg];
    t.output = regs[io.out_reg];
    result.trace.mac.push_back(std::move(t));
  }
  if (!result.trace.mac.empty()) result.trace.final_values = result.trace.mac.back().output;
  return result;
}

}  // namespace anacore
