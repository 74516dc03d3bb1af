#pragma once

// Baseline repair scheme for comparison: tunnel the packet to the router
// just past the failure using a dedicated per-failure address, then let
// plain forwarding finish the job. Costs one extra forwarding entry per
// protected component at every router and tends to walk further, since the
// tunnel endpoint is fixed rather than chosen for cheapness.

#include "feps/spf.hpp"
#include "feps/topology.hpp"

namespace feps {

// The router after the next hop on the primary path, or the destination
// itself when it is directly attached.
inline RouterId next_next_hop(const SpfResult& from_sr, RouterId dr) {
  PathSeq p = from_sr.path_to(dr);
  if (p.routers.size() >= 3) return p.routers[2];
  return dr;
}

struct NotViaPath {
  bool exists = false;
  RouterId target = 0;  // owner of the per-failure address
  // Full walk including any revisits: tunnel leg, then the plain tail.
  std::vector<RouterId> walk;

  size_t visits() const { return walk.size(); }
};

// Repair walk for destination dr when the link toward ar (dr==ar) or ar
// itself (dr!=ar) fails: shortest surviving route to the tunnel endpoint,
// then the pre-failure primary from there. The endpoint for a dead link is
// the neighbor on its far side; for a dead router it is the hop after it.
inline NotViaPath notvia_recovery_path(const Topology& t,
                                       const AllPairsSpf& ap, RouterId sr,
                                       RouterId ar, RouterId dr) {
  if (!t.has_link(sr, ar))
    throw ValidationError("notvia_recovery_path: " + std::to_string(ar) +
                          " is not adjacent to " + std::to_string(sr));
  NotViaPath out;
  FailureSpec failure = dr == ar ? FailureSpec::link_failure(sr, ar)
                                 : FailureSpec::router_failure(ar);
  out.target = dr == ar ? dr : next_next_hop(ap.from(sr), dr);

  Topology survived = remove_component(t, failure);
  SpfResult res = spf(survived, sr);
  if (!res.reachable(out.target)) return out;
  out.exists = true;
  out.walk = res.path_to(out.target).routers;
  PathSeq tail = ap.path(out.target, dr);
  for (size_t i = 1; i < tail.routers.size(); ++i)
    out.walk.push_back(tail.routers[i]);
  return out;
}

// Extra forwarding entries one router carries for the baseline: one per
// protected interface of every other router, plus one per shared-risk
// group touching that router.
inline size_t notvia_fib_count(const Topology& t, RouterId owner) {
  size_t n = 0;
  for (const auto& [v, info] : t.routers) {
    if (v == owner) continue;
    n += t.neighbors(v).size();
    for (const auto& [gid, members] : t.srlgs)
      for (const LinkKey& lk : members)
        if (lk.first == v || lk.second == v) {
          ++n;
          break;
        }
  }
  return n;
}

inline size_t notvia_fib_total(const Topology& t) {
  size_t n = 0;
  for (const auto& [v, info] : t.routers) n += notvia_fib_count(t, v);
  return n;
}

}  // namespace feps
