#include "nuberry/pattern.hpp"

#include <numeric>

namespace nuberry {

namespace {

bool connected(uint32_t order, const std::vector<std::pair<uint32_t, uint32_t>>& edges) {
  if (order == 0) return false;
  std::vector<std::vector<uint32_t>> adj(order);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> seen(order, false);
  std::vector<uint32_t> stack{0};
  seen[0] = true;
  uint32_t visited = 1;
  while (!stack.empty()) {
    uint32_t v = stack.back();
    stack.pop_back();
    for (uint32_t w : adj[v])
      if (!seen[w]) {
        seen[w] = true;
        ++visited;
        stack.push_back(w);
      }
  }
  return visited == order;
}

}  // namespace

PatternGraph make_pattern(uint32_t order,
                          std::vector<std::pair<uint32_t, uint32_t>> edges,
                          std::string name) {
  if (order < 2 || order > 8)
    throw std::domain_error("make_pattern: order must lie in [2, 8]");
  for (auto& [a, b] : edges) {
    if (a > b) std::swap(a, b);
    if (a == b || b >= order)
      throw std::domain_error("make_pattern: invalid edge in pattern '" + name + "'");
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (edges.empty()) throw std::domain_error("make_pattern: pattern needs an edge");
  if (!connected(order, edges))
    throw std::domain_error("make_pattern: pattern must be connected");
  PatternGraph g;
  g.order = order;
  g.edges = std::move(edges);
  g.name = std::move(name);
  g.aut = automorphism_count(g);
  return g;
}

PatternGraph make_pattern(const std::string& name) {
  if (name == "edge") return make_pattern(2, {{0, 1}}, name);
  if (name == "path3") return make_pattern(3, {{0, 1}, {1, 2}}, name);
  if (name == "triangle") return make_pattern(3, {{0, 1}, {0, 2}, {1, 2}}, name);
  throw std::domain_error("make_pattern: unknown pattern '" + name + "'");
}

uint64_t automorphism_count(const PatternGraph& g) {
  std::vector<uint32_t> perm(g.order);
  std::iota(perm.begin(), perm.end(), 0);
  uint64_t count = 0;
  do {
    bool ok = true;
    for (uint32_t a = 0; a < g.order && ok; ++a)
      for (uint32_t b = a + 1; b < g.order && ok; ++b)
        if (g.adjacent(a, b) != g.adjacent(perm[a], perm[b])) ok = false;
    if (ok) ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return count;
}

}  // namespace nuberry
