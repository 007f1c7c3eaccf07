#include "twins/locate.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <set>

namespace twins::locate {

namespace {

constexpr int kInf = std::numeric_limits<int>::max() / 4;

struct Distances {
  std::vector<int> dist;
  std::vector<int> parent;
};

// 0-1 BFS where entering a cell costs 1 unless it is already in `free_cells`.
Distances zero_one_bfs(const std::vector<int>& sources, const std::vector<char>& free_cells,
                       const env::Lattice& lattice) {
  Distances d{std::vector<int>(static_cast<std::size_t>(lattice.size()), kInf),
              std::vector<int>(static_cast<std::size_t>(lattice.size()), -1)};
  std::deque<int> dq;
  for (int s : sources) {
    d.dist[static_cast<std::size_t>(s)] = 0;
    dq.push_back(s);
  }
  while (!dq.empty()) {
    const int cur = dq.front();
    dq.pop_front();
    const int base = d.dist[static_cast<std::size_t>(cur)];
    for (int nb : lattice.neighbors(cur)) {
      const int w = free_cells[static_cast<std::size_t>(nb)] ? 0 : 1;
      if (base + w < d.dist[static_cast<std::size_t>(nb)]) {
        d.dist[static_cast<std::size_t>(nb)] = base + w;
        d.parent[static_cast<std::size_t>(nb)] = cur;
        if (w == 0) {
          dq.push_front(nb);
        } else {
          dq.push_back(nb);
        }
      }
    }
  }
  return d;
}

void trace_back(int v, const Distances& d, const std::vector<char>& free_cells, std::set<int>& out) {
  while (v >= 0) {
    if (!free_cells[static_cast<std::size_t>(v)]) out.insert(v);
    v = d.parent[static_cast<std::size_t>(v)];
  }
}

Vec2 mean_center(const std::vector<int>& cells, const env::Lattice& lattice) {
  Vec2 acc;
  for (int c : cells) acc = acc + lattice.center(c);
  return acc * (1.0 / static_cast<double>(cells.size()));
}

}  // namespace

std::vector<std::vector<int>> components(const std::vector<int>& cells, const env::Lattice& lattice) {
  std::vector<char> in(static_cast<std::size_t>(lattice.size()), 0);
  for (int c : cells) in[static_cast<std::size_t>(c)] = 1;
  std::vector<char> seen(in.size(), 0);
  std::vector<int> sorted = cells;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::vector<int>> out;
  for (int start : sorted) {
    if (seen[static_cast<std::size_t>(start)]) continue;
    std::vector<int> comp;
    std::deque<int> q{start};
    seen[static_cast<std::size_t>(start)] = 1;
    while (!q.empty()) {
      const int cur = q.front();
      q.pop_front();
      comp.push_back(cur);
      for (int nb : lattice.neighbors(cur)) {
        if (in[static_cast<std::size_t>(nb)] && !seen[static_cast<std::size_t>(nb)]) {
          seen[static_cast<std::size_t>(nb)] = 1;
          q.push_back(nb);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

bool is_connected(const std::vector<int>& cells, const env::Lattice& lattice) {
  if (cells.empty()) return false;
  return components(cells, lattice).size() == 1;
}

std::vector<int> connect_components(const std::vector<std::vector<int>>& parts,
                                    const env::Lattice& lattice) {
  if (parts.size() <= 1) return {};
  std::vector<char> free_cells(static_cast<std::size_t>(lattice.size()), 0);
  for (const auto& p : parts) {
    for (int c : p) free_cells[static_cast<std::size_t>(c)] = 1;
  }

  std::set<int> extra;
  if (parts.size() <= 3) {
    // The optimal connector of three sets is three shortest paths meeting at
    // one junction cell (possibly inside a part).
    std::vector<Distances> dist;
    for (const auto& p : parts) dist.push_back(zero_one_bfs(p, free_cells, lattice));
    const int k = static_cast<int>(parts.size());
    int best = kInf;
    int junction = -1;
    for (int v = 0; v < lattice.size(); ++v) {
      long sum = 0;
      bool reachable = true;
      for (const auto& d : dist) {
        if (d.dist[static_cast<std::size_t>(v)] >= kInf) reachable = false;
        sum += d.dist[static_cast<std::size_t>(v)];
      }
      if (!reachable) continue;
      const int cost_v = free_cells[static_cast<std::size_t>(v)] ? 0 : 1;
      const long total = sum - static_cast<long>(k - 1) * cost_v;
      if (total < best) {
        best = static_cast<int>(total);
        junction = v;
      }
    }
    for (const auto& d : dist) trace_back(junction, d, free_cells, extra);
    return {extra.begin(), extra.end()};
  }

  // Greedy: grow a tree from the largest part, always attaching the nearest.
  std::size_t largest = 0;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].size() > parts[largest].size()) largest = i;
  }
  std::vector<int> tree = parts[largest];
  std::vector<char> attached(parts.size(), 0);
  attached[largest] = 1;
  for (std::size_t step = 1; step < parts.size(); ++step) {
    std::vector<char> tree_free = free_cells;
    for (int c : tree) tree_free[static_cast<std::size_t>(c)] = 1;
    const Distances d = zero_one_bfs(tree, tree_free, lattice);
    std::size_t pick = parts.size();
    int pick_cell = -1;
    int pick_dist = kInf;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (attached[i]) continue;
      for (int c : parts[i]) {
        const int dc = d.dist[static_cast<std::size_t>(c)];
        if (dc < pick_dist) {
          pick_dist = dc;
          pick = i;
          pick_cell = c;
        }
      }
    }
    std::set<int> path;
    trace_back(pick_cell, d, tree_free, path);
    extra.insert(path.begin(), path.end());
    tree.insert(tree.end(), path.begin(), path.end());
    tree.insert(tree.end(), parts[pick].begin(), parts[pick].end());
    attached[pick] = 1;
  }
  return {extra.begin(), extra.end()};
}

std::vector<int> cells_of(const std::vector<int>& twins, const env::TwinsGrid& grid) {
  std::vector<int> out;
  out.reserve(twins.size());
  for (int t : twins) out.push_back(grid.cell_of_twin(t));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<std::vector<int>> select_subgraph(const std::vector<int>& cells,
                                                const env::TwinsGrid& grid,
                                                const std::optional<Vec2>& previous) {
  if (cells.empty()) return std::nullopt;
  const auto& lattice = grid.lattice();
  auto parts = components(cells, lattice);
  if (parts.size() == 1) return parts.front();
  if (parts.size() == 2) {
    const auto& a = parts[0];
    const auto& b = parts[1];
    if (a.size() != b.size()) return a.size() > b.size() ? a : b;
    if (previous) {
      const double da = distance(mean_center(a, lattice), *previous);
      const double db = distance(mean_center(b, lattice), *previous);
      if (da != db) return da < db ? a : b;
    }
    return a.front() < b.front() ? a : b;
  }
  std::vector<int> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  const auto extra = connect_components(parts, lattice);
  out.insert(out.end(), extra.begin(), extra.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<Vec2> centroid(const std::vector<int>& cells, const env::TwinsGrid& grid) {
  Vec2 acc;
  std::size_t n = 0;
  for (int c : cells) {
    for (int t : grid.twins_in_cell(c)) {
      acc = acc + grid.twin(t).position;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return acc * (1.0 / static_cast<double>(n));
}

std::optional<ActiveRegion> locate(const std::vector<int>& jump_set, const env::TwinsGrid& grid,
                                   const std::optional<Vec2>& previous) {
  const auto cells = cells_of(jump_set, grid);
  auto selected = select_subgraph(cells, grid, previous);
  if (!selected) return std::nullopt;
  auto c = centroid(*selected, grid);
  if (!c) return std::nullopt;
  return ActiveRegion{std::move(*selected), *c,
                      static_cast<int>(components(cells, grid.lattice()).size())};
}

}  // namespace twins::locate
