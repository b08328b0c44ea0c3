#pragma once

#include <iosfwd>
#include <string>

#include "anacore/model.hpp"

namespace anacore {

// Versioned JSON container: layer kinds, shapes, integer weights and
// per-layer requantization shifts. Enough to reproduce inference exactly.
void save_checkpoint(const LayerGraph& g, const std::string& path);
void write_checkpoint(const LayerGraph& g, std::ostream& out);
LayerGraph load_checkpoint(const std::string& path);
LayerGraph read_checkpoint(std::istream& in);

}  // namespace anacore
