#pragma once

// Recovery-path computation. For every adjacent failure a router can
// detect, pick the cheapest loop-free deviation prefix (the emergency path)
// whose end router can already deliver traffic to the destination on plain
// shortest-path forwarding.

#include "feps/spf.hpp"
#include "feps/topology.hpp"

namespace feps {

enum class ProtectionLevel { ecmp = 0, lfa = 1, sig = 2 };

inline const char* to_string(ProtectionLevel l) {
  switch (l) {
    case ProtectionLevel::ecmp:
      return "ECMP";
    case ProtectionLevel::lfa:
      return "LFA";
    case ProtectionLevel::sig:
      return "SIG";
  }
  return "?";
}

struct FepVector {
  RouterId sr = 0;
  RouterId ar = 0;
  RouterId dr = 0;
  ProtectionLevel level = ProtectionLevel::ecmp;
  std::vector<RouterId> routers;  // SR..RF inclusive
  Cost cost_fep = 0;
  int num_fep = 0;

  RouterId rf() const { return routers.back(); }
  RouterId nr() const { return routers.at(1); }
  Cost zprime() const { return 1000 * cost_fep + num_fep; }
};

struct Rejection {
  enum class Reason { filter_12, filter_13, path_exhausted };
  Reason reason = Reason::path_exhausted;
  std::vector<RouterId> alt;
};

inline const char* to_string(Rejection::Reason r) {
  switch (r) {
    case Rejection::Reason::filter_12:
      return "filter-(12)";
    case Rejection::Reason::filter_13:
      return "filter-(13)";
    case Rejection::Reason::path_exhausted:
      return "path exhausted";
  }
  return "?";
}

struct LocateResult {
  std::optional<FepVector> vec;
  std::optional<Rejection> rejection;
  bool found() const { return vec.has_value(); }
};

struct FepConfig {
  int alt_bound = 32;
  // Deviation distance for SIG scoring: measured from SR by default; the
  // alternative counts from the first deviation hop instead.
  bool dist_fep_from_nr = false;
};

// Destinations whose primary path from sr crosses the sr-ar link, plus ar
// itself (the directly attached destination is always worth protecting).
inline std::set<RouterId> affected_destinations(const SpfResult& from_sr,
                                                RouterId sr, RouterId ar) {
  std::set<RouterId> out{ar};
  for (const auto& [dr, seq] : from_sr.primary_path) {
    if (dr == sr) continue;
    for (size_t i = 1; i < seq.size(); ++i)
      if (seq[i - 1] == sr && seq[i] == ar) {
        out.insert(dr);
        break;
      }
  }
  return out;
}

inline std::set<RouterId> affected_destinations(const Topology& t, RouterId sr,
                                                RouterId ar) {
  if (!t.has_link(sr, ar))
    throw ValidationError("affected_destinations: " + std::to_string(ar) +
                          " is not adjacent to " + std::to_string(sr));
  return affected_destinations(spf(t, sr), sr, ar);
}

namespace detail {

// Shared-risk links the deviation must stay clear of: the expansion of the
// sr-ar link when protecting ar itself, otherwise the expansion of every
// link incident to ar.
inline std::set<LinkKey> rf_filter_srlg_set(const Topology& t, RouterId sr,
                                            RouterId ar, RouterId dr) {
  FailureSpec f = dr == ar ? FailureSpec::link_failure(sr, ar)
                           : FailureSpec::router_failure(ar);
  return failed_links(t, f);
}

}  // namespace detail

// Walk the constrained alternative path and return the first hop that can
// take over delivery. The first hop after sr may qualify at ECMP level
// (same total cost as the broken primary) or LFA level (loop-free
// inequality); any later hop qualifies at SIG level via the same
// inequality, which the destination itself satisfies trivially. A hop that
// qualifies but whose shortest path toward dr crosses ar (or a shared-risk
// sibling of the failed component) is skipped and the walk continues.
inline LocateResult locate_rf(const Topology& t, const AllPairsSpf& ap,
                              RouterId sr, RouterId dr, RouterId ar,
                              const PathSeq& alt,
                              const FepConfig& cfg = {}) {
  LocateResult res;
  if (alt.routers.size() < 2 || alt.routers.front() != sr ||
      alt.routers.back() != dr)
    throw ValidationError("locate_rf: alt must run from sr to dr");

  std::set<LinkKey> srlg_set = detail::rf_filter_srlg_set(t, sr, ar, dr);
  std::optional<Rejection::Reason> last_filter;

  for (size_t i = 1; i < alt.routers.size(); ++i) {
    RouterId k = alt.routers[i];
    std::optional<ProtectionLevel> level;
    if (i == 1) {
      if (ap.dist(sr, k) + ap.dist(k, dr) ==
          ap.dist(sr, ar) + ap.dist(ar, dr))
        level = ProtectionLevel::ecmp;
      else if (ap.dist(k, dr) < ap.dist(k, sr) + ap.dist(sr, dr))
        level = ProtectionLevel::lfa;
    } else {
      if (ap.dist(k, dr) < ap.dist(k, sr) + ap.dist(sr, dr))
        level = ProtectionLevel::sig;
    }
    if (!level) continue;

    if (ar != dr && ap.path_routers(k, dr).count(ar)) {
      last_filter = Rejection::Reason::filter_12;
      continue;
    }
    bool srlg_hit = false;
    for (const LinkKey& lk : ap.path_links(k, dr))
      if (srlg_set.count(lk)) {
        srlg_hit = true;
        break;
      }
    if (srlg_hit) {
      last_filter = Rejection::Reason::filter_13;
      continue;
    }

    FepVector v;
    v.sr = sr;
    v.ar = ar;
    v.dr = dr;
    v.level = *level;
    v.routers.assign(alt.routers.begin(), alt.routers.begin() + i + 1);
    switch (*level) {
      case ProtectionLevel::ecmp:
        v.num_fep = 1;
        v.cost_fep = ap.dist(k, dr);
        break;
      case ProtectionLevel::lfa:
        v.num_fep = ap.num_routers(k, dr);
        v.cost_fep = ap.dist(k, dr);
        break;
      case ProtectionLevel::sig: {
        v.num_fep = static_cast<int>(v.routers.size());
        Cost d = 0;
        size_t start = cfg.dist_fep_from_nr ? 1 : 0;
        for (size_t j = start + 1; j < v.routers.size(); ++j)
          d += t.link(v.routers[j - 1], v.routers[j]).cost;
        v.cost_fep = d;
        break;
      }
    }
    res.vec = v;
    return res;
  }

  Rejection rej;
  rej.alt = alt.routers;
  rej.reason = last_filter.value_or(Rejection::Reason::path_exhausted);
  res.rejection = rej;
  return res;
}

// Best candidate: lowest protection level first, then lowest
// zprime = 1000*cost + num, then the lex-smallest router sequence.
inline std::optional<FepVector> select_s_fep(
    const std::vector<FepVector>& candidates) {
  const FepVector* best = nullptr;
  for (const FepVector& c : candidates) {
    if (!best) {
      best = &c;
      continue;
    }
    auto key = [](const FepVector& v) {
      return std::tuple<int, Cost>(static_cast<int>(v.level), v.zprime());
    };
    if (key(c) < key(*best) ||
        (key(c) == key(*best) && c.routers < best->routers))
      best = &c;
  }
  if (!best) return std::nullopt;
  return *best;
}

struct UnprotectedTriple {
  RouterId sr = 0;
  RouterId ar = 0;
  RouterId dr = 0;
  FailureSpec failure;  // link sr-ar when dr==ar, else router ar
};

struct FepComputation {
  RouterId sr = 0;
  std::map<std::pair<RouterId, RouterId>, FepVector> vectors;  // (ar,dr)
  std::vector<UnprotectedTriple> unprotected;

  const FepVector* vector_for(RouterId ar, RouterId dr) const {
    auto it = vectors.find({ar, dr});
    return it == vectors.end() ? nullptr : &it->second;
  }
};

// Every emergency path one router needs: for each adjacent interface, the
// destinations the corresponding failure strands, and for each of those the
// selected deviation. Protecting the neighbor itself assumes only its link
// died; protecting anything further assumes the neighbor itself died.
inline FepComputation compute_all_feps(const Topology& t, RouterId sr,
                                       const FepConfig& cfg = {},
                                       const AllPairsSpf* shared_ap = nullptr) {
  FepComputation out;
  out.sr = sr;
  std::optional<AllPairsSpf> own;
  if (!shared_ap) own.emplace(t);
  const AllPairsSpf& ap = shared_ap ? *shared_ap : *own;
  const SpfResult& from_sr = ap.from(sr);

  for (RouterId ar : t.neighbors(sr)) {
    std::set<RouterId> affected = affected_destinations(from_sr, sr, ar);
    Topology t_link = remove_component(t, FailureSpec::link_failure(sr, ar));
    Topology t_router =
        remove_component(t, FailureSpec::router_failure(ar));
    SpfResult spf_link = spf(t_link, sr);
    SpfResult spf_router = spf(t_router, sr);

    for (RouterId dr : affected) {
      const bool link_case = dr == ar;
      const Topology& topo = link_case ? t_link : t_router;
      const SpfResult& res = link_case ? spf_link : spf_router;
      FailureSpec failure = link_case ? FailureSpec::link_failure(sr, ar)
                                      : FailureSpec::router_failure(ar);
      if (!res.reachable(dr)) {
        out.unprotected.push_back({sr, ar, dr, failure});
        continue;
      }
      EqualCostPaths alts = equal_cost_paths(topo, res, dr, cfg.alt_bound);
      std::vector<FepVector> candidates;
      for (const PathSeq& alt : alts.paths) {
        LocateResult lr = locate_rf(t, ap, sr, dr, ar, alt, cfg);
        if (lr.found()) candidates.push_back(*lr.vec);
      }
      if (auto best = select_s_fep(candidates))
        out.vectors[{ar, dr}] = *best;
      else
        out.unprotected.push_back({sr, ar, dr, failure});
    }
  }
  return out;
}

// Deviation prefix plus plain shortest-path tail from its last router: the
// complete route a recovered packet follows.
inline PathSeq recovery_path(const Topology& t, const AllPairsSpf& ap,
                             const FepVector& v) {
  PathSeq out;
  out.routers = v.routers;
  PathSeq tail = ap.path(v.rf(), v.dr);
  for (size_t i = 1; i < tail.routers.size(); ++i)
    out.routers.push_back(tail.routers[i]);
  out.cost = 0;
  for (size_t i = 1; i < out.routers.size(); ++i)
    out.cost += t.link(out.routers[i - 1], out.routers[i]).cost;
  return out;
}

}  // namespace feps
