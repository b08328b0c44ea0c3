#include "anacore/partition.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace anacore {

void LookupTable::validate() const {
  std::set<int> elems, rows;
  for (const auto& [e, r] : entries) {
    if (!elems.insert(e).second) throw std::invalid_argument("lookup maps one element twice");
    if (!rows.insert(r).second) throw std::invalid_argument("lookup reuses a row");
  }
}

LookupTable lookup_for(const Placement& p) {
  LookupTable t;
  t.entries.reserve(p.signed_rows);
  for (int k = 0; k < p.signed_rows; ++k)
    t.entries.emplace_back(p.input_offset + k, p.row_offset + k);
  t.validate();
  return t;
}

namespace {

struct Rect {
  int row_lo, row_hi, col_lo, col_hi;
};

bool overlaps(const Rect& a, const Rect& b) {
  return a.row_lo < b.row_hi && b.row_lo < a.row_hi && a.col_lo < b.col_hi && b.col_lo < a.col_hi;
}

// Block shapes of a layer before they are assigned to arrays.
struct Block {
  int signed_rows, cols, replication_index, slice_index, input_offset, out_col_offset;
};

std::vector<Block> layer_blocks(const Layer& l, const ChipConfig& cfg, int* n_slices_out) {
  const int k = cfg.signed_rows_per_array();
  std::vector<Block> blocks;
  if (const auto* c = std::get_if<Conv1dLayer>(&l)) {
    if (c->kernel > k)
      throw std::invalid_argument("conv kernel exceeds signed row capacity, layer unsplittable");
    if (c->out_channels > cfg.columns_per_array)
      throw std::invalid_argument("conv channel count exceeds array columns");
    for (int p = 0; p < c->out_len(); ++p)
      blocks.push_back({c->kernel, c->out_channels, p, 0, p * c->stride, p * c->out_channels});
    *n_slices_out = 1;
  } else {
    const auto& f = std::get<LinearLayer>(l);
    const int n_slices = (f.in_features + k - 1) / k;
    const int n_col_chunks = (f.out_features + cfg.columns_per_array - 1) / cfg.columns_per_array;
    for (int c = 0; c < n_col_chunks; ++c) {
      const int col_lo = c * cfg.columns_per_array;
      const int cols = std::min(cfg.columns_per_array, f.out_features - col_lo);
      for (int s = 0; s < n_slices; ++s) {
        const int row_lo = s * k;
        const int rows = std::min(k, f.in_features - row_lo);
        blocks.push_back({rows, cols, 0, s, row_lo, col_lo});
      }
    }
    *n_slices_out = n_slices;
  }
  return blocks;
}

}  // namespace

PartitionPlan partition(const LayerGraph& g, const ChipConfig& cfg, int n_chips) {
  g.validate();
  cfg.validate();
  if (n_chips < 1) throw std::invalid_argument("chip count must be >= 1");

  const int n_arrays = n_chips * cfg.arrays_per_chip;
  std::vector<std::vector<Rect>> occupied(n_arrays);

  PartitionPlan plan;
  plan.cfg = cfg;
  plan.n_chips = n_chips;

  int start_array = 0;
  for (int li : g.mac_layer_indices()) {
    int n_slices = 0;
    const std::vector<Block> blocks = layer_blocks(g.layers[li], cfg, &n_slices);

    int layer_last_array = -1;
    std::vector<int> ids;
    for (const Block& b : blocks) {
      bool placed = false;
      for (int k = 0; k < n_arrays && !placed; ++k) {
        const int a = (start_array + k) % n_arrays;
        // Column-major scan: the leftmost fitting column wins, then the
        // lowest row within it.
        for (int col = 0; col + b.cols <= cfg.columns_per_array && !placed; ++col) {
          for (int row = 0; row + b.signed_rows <= cfg.signed_rows_per_array() && !placed; ++row) {
            const Rect cand{row, row + b.signed_rows, col, col + b.cols};
            bool free = true;
            for (const Rect& r : occupied[a])
              if (overlaps(cand, r)) {
                free = false;
                break;
              }
            if (!free) continue;
            occupied[a].push_back(cand);
            Placement p;
            p.id = static_cast<int>(plan.placements.size());
            p.layer_index = li;
            p.chip_id = a / cfg.arrays_per_chip;
            p.array_index = a % cfg.arrays_per_chip;
            p.row_offset = row;
            p.col_offset = col;
            p.signed_rows = b.signed_rows;
            p.cols = b.cols;
            p.replication_index = b.replication_index;
            p.slice_index = b.slice_index;
            p.input_offset = b.input_offset;
            p.out_col_offset = b.out_col_offset;
            plan.placements.push_back(p);
            ids.push_back(p.id);
            layer_last_array = std::max(layer_last_array, k);
            placed = true;
          }
        }
      }
      if (!placed)
        throw std::runtime_error("partition failed: no array can host a " +
                                 std::to_string(b.signed_rows) + "x" + std::to_string(b.cols) +
                                 " block");
    }

    if (n_slices > 1) {
      // One group per column chunk, gathering all of its row slices.
      std::set<int> col_offsets;
      for (const Block& b : blocks) col_offsets.insert(b.out_col_offset);
      for (int off : col_offsets) {
        PartialSumGroup grp;
        grp.layer_index = li;
        grp.out_offset = off;
        for (size_t i = 0; i < blocks.size(); ++i)
          if (blocks[i].out_col_offset == off) {
            grp.placement_ids.push_back(ids[i]);
            grp.out_count = blocks[i].cols;
          }
        std::sort(grp.placement_ids.begin(), grp.placement_ids.end(), [&](int x, int y) {
          return plan.placements[x].slice_index < plan.placements[y].slice_index;
        });
        plan.groups.push_back(grp);
      }
    }

    if (layer_last_array >= 0)
      start_array = (start_array + layer_last_array + 1) % n_arrays;
  }

  validate_plan(plan, g);
  return plan;
}

void validate_plan(const PartitionPlan& plan, const LayerGraph& g) {
  const ChipConfig& cfg = plan.cfg;
  for (const Placement& p : plan.placements) {
    if (p.chip_id < 0 || p.chip_id >= plan.n_chips) throw std::runtime_error("placement chip out of range");
    if (p.array_index < 0 || p.array_index >= cfg.arrays_per_chip)
      throw std::runtime_error("placement array out of range");
    if (p.row_offset < 0 || p.row_offset + p.signed_rows > cfg.signed_rows_per_array())
      throw std::runtime_error("placement exceeds signed rows");
    if (p.col_offset < 0 || p.col_offset + p.cols > cfg.columns_per_array)
      throw std::runtime_error("placement exceeds columns");
    lookup_for(p);  // injectivity
  }
  for (size_t i = 0; i < plan.placements.size(); ++i)
    for (size_t j = i + 1; j < plan.placements.size(); ++j) {
      const Placement& a = plan.placements[i];
      const Placement& b = plan.placements[j];
      if (a.chip_id != b.chip_id || a.array_index != b.array_index) continue;
      const Rect ra{a.row_offset, a.row_offset + a.signed_rows, a.col_offset, a.col_offset + a.cols};
      const Rect rb{b.row_offset, b.row_offset + b.signed_rows, b.col_offset, b.col_offset + b.cols};
      if (overlaps(ra, rb)) throw std::runtime_error("placements overlap");
    }

  // Every multi-slice layer must have complete partial-sum groups.
  const QuantSpec spec = QuantSpec::from_config(cfg);
  for (int li : g.mac_layer_indices()) {
    if (const auto* f = std::get_if<LinearLayer>(&g.layers[li])) {
      const int n_slices = (f->in_features + spec.slice_rows - 1) / spec.slice_rows;
      if (n_slices < 2) continue;
      for (const PartialSumGroup& grp : plan.groups) {
        if (grp.layer_index != li) continue;
        if (static_cast<int>(grp.placement_ids.size()) != n_slices)
          throw std::runtime_error("partial-sum group does not cover all slices");
      }
    }
  }
}

std::string PartitionPlan::to_text() const {
  std::ostringstream out;
  out << "plan chips=" << n_chips << " placements=" << placements.size()
      << " groups=" << groups.size() << "\n";
  for (const Placement& p : placements)
    out << "placement id=" << p.id << " layer=" << p.layer_index << " chip=" << p.chip_id
        << " array=" << p.array_index << " row=" << p.row_offset << " col=" << p.col_offset
        << " rows=" << p.signed_rows << " cols=" << p.cols << " replica=" << p.replication_index
        << " slice=" << p.slice_index << " in=" << p.input_offset << " out=" << p.out_col_offset
        << "\n";
  for (const PartialSumGroup& grp : groups) {
    out << "partial_sum layer=" << grp.layer_index << " out=" << grp.out_offset << ":"
        << grp.out_offset + grp.out_count << " placements=";
    for (size_t i = 0; i < grp.placement_ids.size(); ++i)
      out << (i ? "," : "") << grp.placement_ids[i];
    out << "\n";
  }
  return out.str();
}

}  // namespace anacore
