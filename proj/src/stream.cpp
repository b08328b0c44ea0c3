#include "anacore/stream.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace anacore {

namespace {

SignedWeightMatrix block_weights(const LayerGraph& g, const Placement& p) {
  const Layer& l = g.layers[p.layer_index];
  SignedWeightMatrix w(p.signed_rows, p.cols);
  if (const auto* c = std::get_if<Conv1dLayer>(&l)) {
    for (int i = 0; i < p.signed_rows; ++i)
      for (int j = 0; j < p.cols; ++j) w.at(i, j) = c->weights.at(i, j);
  } else {
    const auto& f = std::get<LinearLayer>(l);
    for (int i = 0; i < p.signed_rows; ++i)
      for (int j = 0; j < p.cols; ++j)
        w.at(i, j) = f.weights.at(p.input_offset + i, p.out_col_offset + j);
  }
  return w;
}

}  // namespace

void InstructionStream::refresh_weights(const LayerGraph& g) {
  weight_table.resize(placements.size());
  for (const Placement& p : placements) weight_table[p.id] = block_weights(g, p);
}

InstructionStream lower(const PartitionPlan& plan, const LayerGraph& g) {
  g.validate();
  validate_plan(plan, g);

  InstructionStream s;
  s.cfg = plan.cfg;
  s.n_chips = plan.n_chips;
  s.input_len = g.input_len;
  s.placements = plan.placements;
  s.refresh_weights(g);

  for (const Placement& p : s.placements) s.code.push_back(LoadWeightsOp{p.id});

  int next_reg = 0;
  auto alloc = [&next_reg]() { return next_reg++; };

  const int input_reg = alloc();
  s.code.push_back(LoadInputOp{input_reg});

  const QuantSpec spec = QuantSpec::from_config(plan.cfg);
  std::map<int, std::vector<const Placement*>> by_layer;
  for (const Placement& p : s.placements) by_layer[p.layer_index].push_back(&p);

  int cur_reg = input_reg;
  int mac_ordinal = 0;
  const auto mac_indices = g.mac_layer_indices();
  for (int li : mac_indices) {
    auto& blocks = by_layer.at(li);
    std::sort(blocks.begin(), blocks.end(), [](const Placement* a, const Placement* b) {
      if (a->slice_index != b->slice_index) return a->slice_index < b->slice_index;
      return a->out_col_offset < b->out_col_offset;
    });
    int n_slices = 1;
    for (const Placement* p : blocks) n_slices = std::max(n_slices, p->slice_index + 1);

    LayerIo io;
    io.layer_index = li;
    io.input_reg = cur_reg;
    for (int i = 0; i < n_slices; ++i) io.slice_regs.push_back(alloc());

    // One integration window per block: reset, scoped send, scoped read.
    for (const Placement* p : blocks) {
      s.code.push_back(ResetNeuronsOp{p->chip_id, p->array_index});
      s.code.push_back(SendVectorOp{p->chip_id, p->array_index, p->id, cur_reg});
      s.code.push_back(ReadAdcOp{p->chip_id, p->array_index, p->col_offset,
                                 p->col_offset + p->cols, AdcMode::signed_linear,
                                 io.slice_regs[p->slice_index], p->out_col_offset, mac_ordinal});
    }

    if (n_slices > 1) {
      io.sum_reg = alloc();
      s.code.push_back(DigitalOp{DigitalKind::partial_sum, io.sum_reg, io.slice_regs, 0});
    } else {
      io.sum_reg = io.slice_regs[0];
    }

    io.relu = g.relu_follows(li);
    if (io.relu) {
      io.act_reg = alloc();
      s.code.push_back(DigitalOp{DigitalKind::relu, io.act_reg, {io.sum_reg}, 0});
    } else {
      io.act_reg = io.sum_reg;
    }

    std::optional<int> shift;
    if (const auto* c = std::get_if<Conv1dLayer>(&g.layers[li]))
      shift = c->requant_shift;
    else
      shift = std::get<LinearLayer>(g.layers[li]).requant_shift;
    if (shift) {
      io.out_reg = alloc();
      io.requant_shift = *shift;
      s.code.push_back(DigitalOp{DigitalKind::requant, io.out_reg, {io.act_reg}, *shift});
    } else {
      io.out_reg = io.act_reg;
    }

    s.layer_io.push_back(io);
    cur_reg = io.out_reg;
    ++mac_ordinal;
    (void)spec;
  }

  // Trailing digital stages.
  bool stored = false;
  for (size_t i = 0; i < g.layers.size(); ++i) {
    const Layer& l = g.layers[i];
    if (const auto* p = std::get_if<AvgPoolLayer>(&l)) {
      const int r = alloc();
      s.code.push_back(DigitalOp{DigitalKind::avgpool, r, {cur_reg}, p->group_size});
      cur_reg = r;
      s.pooled_reg = r;
    } else if (const auto* p = std::get_if<MaxPoolLayer>(&l)) {
      const int r = alloc();
      s.code.push_back(DigitalOp{DigitalKind::maxpool, r, {cur_reg}, p->group_size});
      cur_reg = r;
      s.pooled_reg = r;
    } else if (std::holds_alternative<ArgmaxLayer>(l)) {
      s.code.push_back(StoreResultOp{cur_reg});
      stored = true;
      const int r = alloc();
      s.code.push_back(DigitalOp{DigitalKind::argmax, r, {cur_reg}, 0});
      s.label_reg = r;
      s.code.push_back(StoreResultOp{r});
      cur_reg = r;
    }
  }
  if (!stored) s.code.push_back(StoreResultOp{cur_reg});

  s.n_registers = next_reg;
  check_well_formed(s);
  return s;
}

void check_well_formed(const InstructionStream& s) {
  struct ArrayState {
    bool reset_seen = false;
    int sends = 0;
    bool read_since_reset = false;
  };
  std::map<std::pair<int, int>, ArrayState> arrays;
  std::set<int> written, loaded;

  for (const Instruction& ins : s.code) {
    if (const auto* op = std::get_if<LoadWeightsOp>(&ins)) {
      if (op->placement < 0 || op->placement >= static_cast<int>(s.placements.size()))
        throw std::runtime_error("load references unknown placement");
      loaded.insert(op->placement);
    } else if (const auto* op = std::get_if<LoadInputOp>(&ins)) {
      written.insert(op->dst);
    } else if (const auto* op = std::get_if<ResetNeuronsOp>(&ins)) {
      auto& st = arrays[{op->chip, op->array}];
      st = ArrayState{true, 0, false};
    } else if (const auto* op = std::get_if<SendVectorOp>(&ins)) {
      if (!loaded.count(op->placement))
        throw std::runtime_error("send references placement with no prior weight load");
      if (!written.count(op->src)) throw std::runtime_error("send reads an unwritten register");
      auto& st = arrays[{op->chip, op->array}];
      if (!st.reset_seen) throw std::runtime_error("send before any neuron reset");
      ++st.sends;
    } else if (const auto* op = std::get_if<ReadAdcOp>(&ins)) {
      auto& st = arrays[{op->chip, op->array}];
      if (!st.reset_seen || st.read_since_reset)
        throw std::runtime_error("read not dominated by a fresh neuron reset");
      if (st.sends < 1) throw std::runtime_error("read without a preceding send");
      st.read_since_reset = true;
      written.insert(op->dst);
    } else if (const auto* op = std::get_if<DigitalOp>(&ins)) {
      for (int r : op->srcs)
        if (!written.count(r)) throw std::runtime_error("digital op reads an unwritten register");
      written.insert(op->dst);
    } else if (const auto* op = std::get_if<StoreResultOp>(&ins)) {
      if (!written.count(op->src)) throw std::runtime_error("store reads an unwritten register");
    }
  }
}

int read_phase_count(const InstructionStream& s) {
  std::set<int> layers;
  for (const Instruction& ins : s.code)
    if (const auto* op = std::get_if<ReadAdcOp>(&ins)) layers.insert(op->layer);
  return static_cast<int>(layers.size());
}

namespace {

const char* kind_name(DigitalKind k) {
  switch (k) {
    case DigitalKind::relu: return "relu";
    case DigitalKind::avgpool: return "avgpool";
    case DigitalKind::maxpool: return "maxpool";
    case DigitalKind::argmax: return "argmax";
    case DigitalKind::partial_sum: return "partial_sum";
    case DigitalKind::requant: return "requant";
  }
  return "?";
}

}  // namespace

std::string InstructionStream::to_text() const {
  std::ostringstream out;
  out << "stream chips=" << n_chips << " input_len=" << input_len
      << " registers=" << n_registers << "\n";
  for (const Instruction& ins : code) {
    if (const auto* op = std::get_if<LoadWeightsOp>(&ins)) {
      out << "load_weights placement=" << op->placement << "\n";
    } else if (const auto* op = std::get_if<LoadInputOp>(&ins)) {
      out << "load_input dst=" << op->dst << "\n";
    } else if (const auto* op = std::get_if<ResetNeuronsOp>(&ins)) {
      out << "reset_neurons chip=" << op->chip << " array=" << op->array << "\n";
    } else if (const auto* op = std::get_if<SendVectorOp>(&ins)) {
      const Placement& p = placements[op->placement];
      out << "send_vector chip=" << op->chip << " array=" << op->array
          << " placement=" << op->placement << " src=" << op->src << " elems="
          << p.input_offset << ":" << p.input_offset + p.signed_rows << " rows=" << p.row_offset
          << ":" << p.row_offset + p.signed_rows << "\n";
    } else if (const auto* op = std::get_if<ReadAdcOp>(&ins)) {
      out << "read_adc chip=" << op->chip << " array=" << op->array << " cols=" << op->col_lo
          << ":" << op->col_hi << " mode="
          << (op->mode == AdcMode::relu ? "relu" : "signed") << " layer=" << op->layer
          << " dst=" << op->dst << " dst_offset=" << op->dst_offset << "\n";
    } else if (const auto* op = std::get_if<DigitalOp>(&ins)) {
      out << "digital op=" << kind_name(op->kind) << " dst=" << op->dst << " srcs=";
      for (size_t i = 0; i < op->srcs.size(); ++i) out << (i ? "," : "") << op->srcs[i];
      if (op->kind == DigitalKind::requant) out << " shift=" << op->arg;
      if (op->kind == DigitalKind::avgpool || op->kind == DigitalKind::maxpool)
        out << " group=" << op->arg;
      out << "\n";
    } else if (const auto* op = std::get_if<StoreResultOp>(&ins)) {
      out << "store_result src=" << op->src << "\n";
    }
  }
  return out.str();
}

}  // namespace anacore
