#pragma once

// Small connected pattern graphs and exact counting of their non-induced
// copies inside a host graph.  A copy is an edge-subset of the host
// isomorphic to the pattern; counting goes through injective homomorphisms
// divided by the automorphism count, with optional pinned vertices so that
// "copies containing x" and "copies containing x and y" come out of the
// same backtracking core.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nuberry {

struct PatternGraph {
  uint32_t order = 0;  // number of vertices q
  std::vector<std::pair<uint32_t, uint32_t>> edges;  // i < j, sorted, unique
  std::string name;
  uint64_t aut = 0;  // automorphism count

  bool adjacent(uint32_t a, uint32_t b) const {
    if (a > b) std::swap(a, b);
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(a, b));
  }
};

// Named patterns: "edge", "path3" (path on 3 vertices), "triangle".
PatternGraph make_pattern(const std::string& name);

// Builds a validated pattern from raw vertices/edges (connected, order <= 8).
PatternGraph make_pattern(uint32_t order,
                          std::vector<std::pair<uint32_t, uint32_t>> edges,
                          std::string name);

uint64_t automorphism_count(const PatternGraph& g);

// Host graph as sorted adjacency lists.
struct HostGraph {
  std::vector<std::vector<uint32_t>> nbr;

  std::size_t size() const { return nbr.size(); }
  const std::vector<uint32_t>& neighbors(uint32_t v) const { return nbr[v]; }
  bool adjacent(uint32_t a, uint32_t b) const {
    const auto& small = nbr[a].size() <= nbr[b].size() ? nbr[a] : nbr[b];
    uint32_t probe = nbr[a].size() <= nbr[b].size() ? b : a;
    return std::binary_search(small.begin(), small.end(), probe);
  }
  void add_edge(uint32_t a, uint32_t b) {
    nbr[a].push_back(b);
    nbr[b].push_back(a);
  }
  void finish() {
    for (auto& l : nbr) std::sort(l.begin(), l.end());
  }
};

namespace detail {

// BFS order of the pattern's vertices starting from `root` so that every
// later vertex has at least one earlier neighbor (pattern is connected).
inline std::vector<uint32_t> bfs_order(const PatternGraph& p, uint32_t root) {
  std::vector<uint32_t> order{root};
  std::vector<bool> seen(p.order, false);
  seen[root] = true;
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (uint32_t v = 0; v < p.order; ++v)
      if (!seen[v] && p.adjacent(order[head], v)) {
        seen[v] = true;
        order.push_back(v);
      }
  }
  if (order.size() != p.order)
    throw std::logic_error("pattern must be connected");
  return order;
}

// Counts injective homomorphisms of the pattern into the host; pins[v] >= 0
// forces pattern vertex v onto that host vertex.  Host must expose size(),
// neighbors(v) and adjacent(a,b).
template <class Host>
uint64_t count_injections(const Host& host, const PatternGraph& p,
                          const std::vector<int64_t>& pins) {
  uint32_t root = 0;
  for (uint32_t v = 0; v < p.order; ++v)
    if (pins[v] >= 0) {
      root = v;
      break;
    }
  std::vector<uint32_t> order = bfs_order(p, root);
  std::vector<int64_t> image(p.order, -1);
  uint64_t count = 0;

  auto consistent = [&](uint32_t pv, uint32_t hv) {
    for (uint32_t u = 0; u < p.order; ++u) {
      if (image[u] < 0) continue;
      if (static_cast<uint32_t>(image[u]) == hv) return false;  // injectivity
      if (p.adjacent(pv, u) && !host.adjacent(hv, static_cast<uint32_t>(image[u])))
        return false;
    }
    return true;
  };

  auto extend = [&](auto&& self, std::size_t depth) -> void {
    if (depth == order.size()) {
      ++count;
      return;
    }
    uint32_t pv = order[depth];
    if (pins[pv] >= 0) {
      uint32_t hv = static_cast<uint32_t>(pins[pv]);
      if (consistent(pv, hv)) {
        image[pv] = hv;
        self(self, depth + 1);
        image[pv] = -1;
      }
      return;
    }
    if (depth == 0) {
      for (uint32_t hv = 0; hv < host.size(); ++hv)
        if (consistent(pv, hv)) {
          image[pv] = hv;
          self(self, depth + 1);
          image[pv] = -1;
        }
      return;
    }
    // Candidates: host neighbors of the first already-mapped pattern
    // neighbor of pv (one exists by BFS order).
    uint32_t anchor = p.order;
    for (std::size_t d = 0; d < depth; ++d)
      if (p.adjacent(pv, order[d])) {
        anchor = order[d];
        break;
      }
    for (uint32_t hv : host.neighbors(static_cast<uint32_t>(image[anchor])))
      if (consistent(pv, hv)) {
        image[pv] = hv;
        self(self, depth + 1);
        image[pv] = -1;
      }
  };
  extend(extend, 0);
  return count;
}

}  // namespace detail

// Number of non-induced copies of the pattern in the host.
template <class Host>
uint64_t count_copies(const Host& host, const PatternGraph& p) {
  std::vector<int64_t> pins(p.order, -1);
  uint64_t homs = detail::count_injections(host, p, pins);
  return homs / p.aut;
}

// Copies whose vertex set contains host vertex x.
template <class Host>
uint64_t count_copies_containing(const Host& host, const PatternGraph& p, uint32_t x) {
  uint64_t homs = 0;
  std::vector<int64_t> pins(p.order, -1);
  for (uint32_t v = 0; v < p.order; ++v) {
    pins[v] = static_cast<int64_t>(x);
    homs += detail::count_injections(host, p, pins);
    pins[v] = -1;
  }
  return homs / p.aut;
}

// Copies whose vertex set contains both x and y (x != y).
template <class Host>
uint64_t count_copies_containing_pair(const Host& host, const PatternGraph& p,
                                      uint32_t x, uint32_t y) {
  if (x == y) throw std::domain_error("count_copies_containing_pair: x == y");
  uint64_t homs = 0;
  std::vector<int64_t> pins(p.order, -1);
  for (uint32_t v = 0; v < p.order; ++v)
    for (uint32_t w = 0; w < p.order; ++w) {
      if (v == w) continue;
      pins[v] = static_cast<int64_t>(x);
      pins[w] = static_cast<int64_t>(y);
      homs += detail::count_injections(host, p, pins);
      pins[v] = -1;
      pins[w] = -1;
    }
  return homs / p.aut;
}

}  // namespace nuberry
