#pragma once

// Shortest-path-first machinery. All tie-breaks are resolved toward the
// lexicographically smallest router sequence so every computation is
// reproducible down to the byte.

#include <limits>
#include <queue>

#include "feps/topology.hpp"

namespace feps {

inline constexpr Cost kInfCost = std::numeric_limits<Cost>::max() / 4;

struct PathSeq {
  std::vector<RouterId> routers;
  Cost cost = 0;

  bool empty() const { return routers.empty(); }
  size_t hops() const { return routers.empty() ? 0 : routers.size() - 1; }

  friend bool operator==(const PathSeq& a, const PathSeq& b) {
    return a.routers == b.routers && a.cost == b.cost;
  }
};

struct SpfResult {
  RouterId source = 0;
  std::map<RouterId, Cost> dist;
  // Primary (lex-smallest shortest) router sequence per destination.
  std::map<RouterId, std::vector<RouterId>> primary_path;

  bool reachable(RouterId d) const { return dist.count(d) != 0; }
  Cost dist_to(RouterId d) const {
    auto it = dist.find(d);
    return it == dist.end() ? kInfCost : it->second;
  }
  PathSeq path_to(RouterId d) const {
    auto it = primary_path.find(d);
    if (it == primary_path.end()) return {};
    return PathSeq{it->second, dist_to(d)};
  }
  // First hop of the primary path, if any.
  std::optional<RouterId> next_hop(RouterId d) const {
    auto it = primary_path.find(d);
    if (it == primary_path.end() || it->second.size() < 2)
      return std::nullopt;
    return it->second[1];
  }
};

// Dijkstra with deterministic tie-break: among equal-cost shortest paths the
// lexicographically smallest router sequence wins. Costs are >= 1, so edges
// strictly increase distance and the shortest-path DAG is layered; a second
// pass over nodes in distance order assembles the lex-min sequences.
inline SpfResult spf(const Topology& t, RouterId src) {
  if (!t.has_router(src))
    throw ValidationError("spf source " + std::to_string(src) +
                          " not in topology");
  SpfResult res;
  res.source = src;

  using QE = std::pair<Cost, RouterId>;
  std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
  res.dist[src] = 0;
  pq.push({0, src});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    auto it = res.dist.find(u);
    if (it == res.dist.end() || it->second != d) continue;
    auto row = t.adj.find(u);
    if (row == t.adj.end()) continue;
    for (const auto& [v, l] : row->second) {
      Cost nd = d + l.cost;
      auto vt = res.dist.find(v);
      if (vt == res.dist.end() || nd < vt->second) {
        res.dist[v] = nd;
        pq.push({nd, v});
      }
    }
  }

  std::vector<RouterId> order;
  order.reserve(res.dist.size());
  for (const auto& [r, d] : res.dist) order.push_back(r);
  std::sort(order.begin(), order.end(), [&](RouterId a, RouterId b) {
    Cost da = res.dist.at(a), db = res.dist.at(b);
    return da != db ? da < db : a < b;
  });

  res.primary_path[src] = {src};
  for (RouterId v : order) {
    if (v == src) continue;
    Cost dv = res.dist.at(v);
    std::vector<RouterId> best;
    for (const auto& [u, row] : t.adj) {
      auto l = row.find(v);
      if (l == row.end()) continue;
      auto du = res.dist.find(u);
      if (du == res.dist.end() || du->second + l->second.cost != dv) continue;
      auto pu = res.primary_path.find(u);
      if (pu == res.primary_path.end()) continue;
      std::vector<RouterId> cand = pu->second;
      cand.push_back(v);
      if (best.empty() || cand < best) best = std::move(cand);
    }
    if (!best.empty()) res.primary_path[v] = std::move(best);
  }
  return res;
}

enum class ConstraintMode { avoid_link, avoid_router };

// SPF from sr with the failure of (sr,ar) realized as component removal:
// avoid_link tears down the sr-ar link (with SRLG expansion), avoid_router
// tears down ar itself (and the SRLG expansion of its incident links).
inline SpfResult constrained_spf(const Topology& t, RouterId sr, RouterId ar,
                                 ConstraintMode mode) {
  if (!t.has_link(sr, ar))
    throw ValidationError("constrained_spf: " + std::to_string(ar) +
                          " is not adjacent to " + std::to_string(sr));
  FailureSpec f = mode == ConstraintMode::avoid_link
                      ? FailureSpec::link_failure(sr, ar)
                      : FailureSpec::router_failure(ar);
  return spf(remove_component(t, f), sr);
}

struct EqualCostPaths {
  std::vector<PathSeq> paths;  // lex order
  bool bound_exceeded = false;
};

// All equal-cost shortest src->dst paths in lexicographic order, up to
// bound; the flag reports that more exist than were returned.
inline EqualCostPaths equal_cost_paths(const Topology& t,
                                       const SpfResult& from_src,
                                       RouterId dst, int bound) {
  EqualCostPaths out;
  if (bound <= 0 || !from_src.reachable(dst)) return out;
  RouterId src = from_src.source;
  if (src == dst) {
    out.paths.push_back(PathSeq{{src}, 0});
    return out;
  }

  // DAG successor lists restricted to nodes that still reach dst.
  std::map<RouterId, std::vector<RouterId>> succ;
  std::map<RouterId, std::vector<RouterId>> pred;
  for (const auto& [u, row] : t.adj) {
    auto du = from_src.dist.find(u);
    if (du == from_src.dist.end()) continue;
    for (const auto& [v, l] : row) {
      auto dv = from_src.dist.find(v);
      if (dv == from_src.dist.end()) continue;
      if (du->second + l.cost != dv->second) continue;
      succ[u].push_back(v);
      pred[v].push_back(u);
    }
  }
  std::set<RouterId> reaches_dst;
  std::vector<RouterId> stack{dst};
  while (!stack.empty()) {
    RouterId r = stack.back();
    stack.pop_back();
    if (!reaches_dst.insert(r).second) continue;
    for (RouterId p : pred[r]) stack.push_back(p);
  }
  if (!reaches_dst.count(src)) return out;

  std::vector<RouterId> cur{src};
  // Iterative DFS emitting paths in lex order until one past the bound.
  std::vector<size_t> idx{0};
  while (!cur.empty()) {
    RouterId u = cur.back();
    if (u == dst) {
      if (static_cast<int>(out.paths.size()) == bound) {
        out.bound_exceeded = true;
        out.paths.resize(bound);
        return out;
      }
      out.paths.push_back(PathSeq{cur, from_src.dist_to(dst)});
      cur.pop_back();
      idx.pop_back();
      continue;
    }
    auto& nexts = succ[u];
    bool advanced = false;
    while (idx.back() < nexts.size()) {
      RouterId v = nexts[idx.back()++];
      if (!reaches_dst.count(v)) continue;
      cur.push_back(v);
      idx.push_back(0);
      advanced = true;
      break;
    }
    if (!advanced) {
      cur.pop_back();
      idx.pop_back();
    }
  }
  return out;
}

inline EqualCostPaths equal_cost_paths(const Topology& t, RouterId src,
                                       RouterId dst, int bound) {
  return equal_cost_paths(t, spf(t, src), dst, bound);
}

// Per-source SPF results for a whole topology; the distance/sequence oracle
// behind recovery-path scoring and the forwarding tables.
class AllPairsSpf {
 public:
  AllPairsSpf() = default;
  explicit AllPairsSpf(const Topology& t) {
    for (const auto& [r, info] : t.routers) by_src_.emplace(r, spf(t, r));
  }

  const SpfResult& from(RouterId src) const {
    auto it = by_src_.find(src);
    if (it == by_src_.end())
      throw ValidationError("no spf result for source " + std::to_string(src));
    return it->second;
  }

  Cost dist(RouterId x, RouterId y) const { return from(x).dist_to(y); }

  PathSeq path(RouterId x, RouterId y) const { return from(x).path_to(y); }

  // Router count of the primary path, both endpoints included; 1 when x==y.
  int num_routers(RouterId x, RouterId y) const {
    if (x == y) return 1;
    auto p = from(x).path_to(y);
    return static_cast<int>(p.routers.size());
  }

  std::set<RouterId> path_routers(RouterId x, RouterId y) const {
    auto p = from(x).path_to(y);
    return {p.routers.begin(), p.routers.end()};
  }

  std::set<LinkKey> path_links(RouterId x, RouterId y) const {
    std::set<LinkKey> out;
    auto p = from(x).path_to(y);
    for (size_t i = 1; i < p.routers.size(); ++i)
      out.insert(undirected(p.routers[i - 1], p.routers[i]));
    return out;
  }

 private:
  std::map<RouterId, SpfResult> by_src_;
};

}  // namespace feps
