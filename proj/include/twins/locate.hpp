#pragma once

// Coarse localization from the jump set J: pick the active connected subgraph
// of the cell lattice and report the centroid of the twins inside it.

#include <optional>
#include <vector>

#include "twins/env.hpp"

namespace twins::locate {

struct ActiveRegion {
  std::vector<int> cells;  // ascending, connected in the lattice
  Vec2 centroid;
  int component_count = 0;  // components of J before selection
};

/// Connected components of a cell set (4-connectivity), each ascending,
/// ordered by their minimum cell id.
std::vector<std::vector<int>> components(const std::vector<int>& cells, const env::Lattice& lattice);

/// Smallest set of extra cells joining all `parts` into one connected set.
/// Exact for up to three parts; beyond that, parts are attached greedily to
/// the growing tree by shortest path, starting from the largest.
std::vector<int> connect_components(const std::vector<std::vector<int>>& parts,
                                    const env::Lattice& lattice);

/// One component: itself. Two: the larger (ties go to the one whose centroid
/// is nearer `previous`, else the lower minimum cell). Three or more: the
/// minimal connected superset. Empty input: nullopt.
std::optional<std::vector<int>> select_subgraph(const std::vector<int>& cells,
                                                const env::TwinsGrid& grid,
                                                const std::optional<Vec2>& previous = std::nullopt);

/// Arithmetic mean of the positions of the twins located in `cells`.
std::optional<Vec2> centroid(const std::vector<int>& cells, const env::TwinsGrid& grid);

/// Cells occupied by the given twins, ascending and unique.
std::vector<int> cells_of(const std::vector<int>& twins, const env::TwinsGrid& grid);

std::optional<ActiveRegion> locate(const std::vector<int>& jump_set, const env::TwinsGrid& grid,
                                   const std::optional<Vec2>& previous = std::nullopt);

bool is_connected(const std::vector<int>& cells, const env::Lattice& lattice);

}  // namespace twins::locate
