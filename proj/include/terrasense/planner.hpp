// Optimal path search over cost maps: 8-connected A* with an admissible
// straight-line heuristic, plus a Dijkstra reference used to verify
// optimality.
#pragma once

#include <numbers>
#include <queue>

#include "terrasense/costmap.hpp"

namespace terra {

struct GridCell {
  int row = 0, col = 0;
  bool operator==(const GridCell&) const = default;
};

struct Path {
  bool found = false;
  std::vector<GridCell> cells;        // start -> goal
  std::vector<double> segment_cost;   // cells.size() - 1 entries
  double total = 0;
  long expanded = 0;                  // search effort (diagnostics)
};

namespace detail {

constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

inline double edge_cost(const CostMap& m, int r0, int c0, int r1, int c1) {
  double mean = 0.5 * (m.at(r0, c0) + m.at(r1, c1));
  return (r0 != r1 && c0 != c1) ? mean * std::numbers::sqrt2 : mean;
}

inline double min_finite_cost(const CostMap& m) {
  double best = std::numeric_limits<double>::infinity();
  for (double c : m.cells)
    if (std::isfinite(c)) best = std::min(best, c);
  return best;
}

// Entries ordered by f, then h (Dijkstra passes h = 0), then row-major
// index — a fixed total order, so searches are deterministic.
struct QueueEntry {
  double f, h;
  int idx;
  bool operator>(const QueueEntry& o) const {
    if (f != o.f) return f > o.f;
    if (h != o.h) return h > o.h;
    return idx > o.idx;
  }
};

inline Path best_first(const CostMap& map, GridCell start, GridCell goal,
                       bool use_heuristic) {
  map.validate();
  if (!map.inside(start.row, start.col) || !map.inside(goal.row, goal.col))
    throw ConfigError("plan: start or goal outside the map");
  if (!std::isfinite(map.at(start.row, start.col)) ||
      !std::isfinite(map.at(goal.row, goal.col)))
    throw ConfigError("plan: start or goal on an untraversable cell");

  const int n = map.rows * map.cols;
  const double inf = std::numeric_limits<double>::infinity();
  const double h_scale = use_heuristic ? min_finite_cost(map) : 0.0;
  auto heuristic = [&](int idx) {
    if (!use_heuristic) return 0.0;
    double dr = idx / map.cols - goal.row, dc = idx % map.cols - goal.col;
    return std::sqrt(dr * dr + dc * dc) * h_scale;
  };

  std::vector<double> g(n, inf);
  std::vector<int> parent(n, -1);
  std::vector<bool> closed(n, false);
  std::priority_queue<QueueEntry, std::vector<QueueEntry>,
                      std::greater<QueueEntry>>
      open;
  const int s = start.row * map.cols + start.col;
  const int t = goal.row * map.cols + goal.col;
  g[s] = 0.0;
  open.push({heuristic(s), heuristic(s), s});

  Path path;
  while (!open.empty()) {
    QueueEntry e = open.top();
    open.pop();
    if (closed[e.idx]) continue;
    closed[e.idx] = true;
    ++path.expanded;
    if (e.idx == t) break;
    int r = e.idx / map.cols, c = e.idx % map.cols;
    for (int k = 0; k < 8; ++k) {
      int nr = r + kDr[k], nc = c + kDc[k];
      if (!map.inside(nr, nc)) continue;
      if (!std::isfinite(map.at(nr, nc))) continue;
      int ni = nr * map.cols + nc;
      if (closed[ni]) continue;
      double cand = g[e.idx] + edge_cost(map, r, c, nr, nc);
      if (cand < g[ni]) {
        g[ni] = cand;
        parent[ni] = e.idx;
        double h = heuristic(ni);
        open.push({cand + h, h, ni});
      }
    }
  }

  if (!closed[t]) return path;  // found = false: no finite-cost route
  path.found = true;
  std::vector<int> rev;
  for (int i = t; i != -1; i = parent[i]) rev.push_back(i);
  for (auto it = rev.rbegin(); it != rev.rend(); ++it)
    path.cells.push_back({*it / map.cols, *it % map.cols});
  for (std::size_t i = 1; i < path.cells.size(); ++i) {
    double ec = edge_cost(map, path.cells[i - 1].row, path.cells[i - 1].col,
                          path.cells[i].row, path.cells[i].col);
    path.segment_cost.push_back(ec);
    path.total += ec;
  }
  return path;
}

}  // namespace detail

// Edge cost between 8-adjacent cells = mean of the two cell costs, times
// sqrt(2) for diagonal moves. Heuristic: Euclidean cell distance times the
// cheapest finite cell — admissible and consistent, so the first goal
// expansion is optimal.
inline Path astar(const CostMap& map, GridCell start, GridCell goal) {
  return detail::best_first(map, start, goal, true);
}

// Reference search without a heuristic; same edge arithmetic. Used to
// verify A* optimality (costs must match exactly).
inline Path dijkstra(const CostMap& map, GridCell start, GridCell goal) {
  return detail::best_first(map, start, goal, false);
}

inline void save_path(const Path& path, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write path: " + file);
  out << "row,col,cumulative_cost\n";
  if (!path.found) return;
  double cum = 0;
  for (std::size_t i = 0; i < path.cells.size(); ++i) {
    if (i) cum += path.segment_cost[i - 1];
    out << path.cells[i].row << "," << path.cells[i].col << ","
        << fmt_num(cum) << "\n";
  }
}

// Mean friction along the path on the generating friction map (the
// planner's preference diagnostic: dragging should choose lower values).
inline double mean_path_value(const Path& path,
                              const std::vector<double>& values, int cols) {
  if (!path.found || path.cells.empty())
    throw ConfigError("mean_path_value: empty path");
  double s = 0;
  for (const GridCell& c : path.cells)
    s += values[static_cast<std::size_t>(c.row) * cols + c.col];
  return s / static_cast<double>(path.cells.size());
}

}  // namespace terra
