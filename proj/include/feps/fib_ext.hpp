#pragma once

// Forwarding-table extensions. Each router keeps its ordinary prefix
// entries plus a compact table of deviation pairs: a 16-bit packet mark and
// the 8-bit interface the marked packet leaves on. Entries gain an 8-bit
// reference into that table so the deviation is one indexed lookup away
// when the primary next hop dies.

#include "feps/fep_calc.hpp"
#include "feps/spf.hpp"
#include "feps/topology.hpp"

namespace feps {

struct ProtocolError : Error {
  using Error::Error;
};

// Mark layout: high 9 bits name the deviating router, low 7 bits pick one
// of its signaled sequences. Zero in the low bits means a plain re-route
// with no state at other routers.
inline uint16_t encode_mark(uint16_t sr_id, uint8_t fep_id) {
  if (sr_id > 511)
    throw ValidationError("mark: router id " + std::to_string(sr_id) +
                          " needs more than 9 bits");
  if (fep_id > 127)
    throw ValidationError("mark: sequence id " + std::to_string(fep_id) +
                          " needs more than 7 bits");
  return static_cast<uint16_t>((sr_id << 7) | fep_id);
}

inline std::pair<uint16_t, uint8_t> decode_mark(uint16_t mark) {
  return {static_cast<uint16_t>(mark >> 7),
          static_cast<uint8_t>(mark & 0x7F)};
}

// One deviation pair. On the wire this is 3 bytes (mark + interface);
// `confirmed` is control-plane state, flipped once signaling has installed
// the sequence downstream. Plain re-routes are born confirmed.
struct MarkNiPair {
  uint16_t mark = 0;
  uint8_t ni = 0;
  bool confirmed = false;
};

struct FibEntry {
  PrefixId prefix = 0;
  RouterId announced_by = 0;
  RouterId next_hop = 0;
  std::optional<uint8_t> ref;  // index into the owner's pair table
};

struct RouterFib {
  RouterId owner = 0;
  uint16_t sr_id = 0;
  std::map<PrefixId, FibEntry> entries;
  std::set<PrefixId> local_prefixes;

  // Own deviations first, then pairs installed on behalf of other routers.
  std::vector<MarkNiPair> pairs;
  size_t sr_pair_count = 0;

  // Marked-packet lookup: sequences this router forwards for (others'
  // sequences passing through, plus its own signaled ones).
  std::map<uint16_t, uint8_t> mark_index;
  // Sequences that end here: the mark comes off and forwarding goes back
  // to the plain table.
  std::set<uint16_t> terminate_marks;

  // Which pair serves each (neighbor, destination) this router protects.
  std::map<std::pair<RouterId, RouterId>, uint8_t> vector_pair;
  // Router sequence behind each own pair (empty for installed ones).
  std::vector<std::vector<RouterId>> pair_routes;

  const MarkNiPair* pair_for_mark(uint16_t mark) const {
    auto it = mark_index.find(mark);
    return it == mark_index.end() ? nullptr : &pairs[it->second];
  }
  const FibEntry* entry_for_prefix(PrefixId p) const {
    auto it = entries.find(p);
    return it == entries.end() ? nullptr : &it->second;
  }
};

inline uint16_t router_sr_id(const Topology& t, RouterId r) {
  auto it = t.routers.find(r);
  if (it != t.routers.end() && it->second.loopback)
    return static_cast<uint16_t>(*it->second.loopback & 0x1FF);
  return r;
}

namespace detail {

inline void check_pair_budget(const RouterFib& fib) {
  if (fib.pairs.size() > 255)
    throw ProtocolError("router " + std::to_string(fib.owner) +
                        ": pair table exceeds the 8-bit reference space");
}

}  // namespace detail

// Install a pass-through record for another router's sequence: marked
// packets leave on interface ni. Re-installing the same mark with the same
// interface is a no-op; disagreeing installs are a protocol fault.
inline void install_not_sr_mark(RouterFib& fib, uint16_t mark, uint8_t ni) {
  if (auto* existing = fib.pair_for_mark(mark)) {
    if (existing->ni != ni)
      throw ProtocolError("router " + std::to_string(fib.owner) +
                          ": conflicting install for mark " +
                          std::to_string(mark));
    return;
  }
  if (fib.terminate_marks.count(mark))
    throw ProtocolError("router " + std::to_string(fib.owner) +
                        ": mark " + std::to_string(mark) +
                        " already terminates here");
  MarkNiPair p;
  p.mark = mark;
  p.ni = ni;
  p.confirmed = true;
  fib.pairs.push_back(p);
  fib.pair_routes.emplace_back();
  fib.mark_index[mark] = static_cast<uint8_t>(fib.pairs.size() - 1);
  detail::check_pair_budget(fib);
}

inline void install_terminate_mark(RouterFib& fib, uint16_t mark) {
  if (fib.pair_for_mark(mark))
    throw ProtocolError("router " + std::to_string(fib.owner) +
                        ": mark " + std::to_string(mark) +
                        " already forwards here");
  fib.terminate_marks.insert(mark);
}

// Build one router's table from its computed deviations. Pairs are
// deduplicated by exact router sequence; signaled sequences take ids 1,2,..
// in the order their destinations first need them, plain re-routes share
// id 0. Each remote prefix entry references the pair protecting its own
// next hop; the extra vectors a neighbor failure computes for destinations
// routed elsewhere stay unreferenced.
inline RouterFib build_router_fib(const Topology& t, const AllPairsSpf& ap,
                                  const FepComputation& fc) {
  RouterFib fib;
  fib.owner = fc.sr;
  fib.sr_id = router_sr_id(t, fc.sr);

  std::map<std::vector<RouterId>, uint8_t> seq_pair;
  uint8_t next_sig_id = 1;
  for (const auto& [key, v] : fc.vectors) {
    auto it = seq_pair.find(v.routers);
    if (it != seq_pair.end()) {
      fib.vector_pair[key] = it->second;
      continue;
    }
    uint8_t fep_id = 0;
    if (v.level == ProtectionLevel::sig) {
      if (next_sig_id > 127)
        throw ProtocolError("router " + std::to_string(fc.sr) +
                            ": more than 127 signaled sequences");
      fep_id = next_sig_id++;
    }
    MarkNiPair p;
    p.mark = encode_mark(fib.sr_id, fep_id);
    size_t ifidx = t.interface_index(fc.sr, v.nr());
    if (ifidx > 255)
      throw ProtocolError("router " + std::to_string(fc.sr) +
                          ": interface index exceeds 8 bits");
    p.ni = static_cast<uint8_t>(ifidx);
    p.confirmed = v.level != ProtectionLevel::sig;
    fib.pairs.push_back(p);
    fib.pair_routes.push_back(v.routers);
    uint8_t idx = static_cast<uint8_t>(fib.pairs.size() - 1);
    seq_pair[v.routers] = idx;
    fib.vector_pair[key] = idx;
    if (fep_id > 0) fib.mark_index[p.mark] = idx;
    detail::check_pair_budget(fib);
  }
  fib.sr_pair_count = fib.pairs.size();

  const SpfResult& from = ap.from(fc.sr);
  for (const auto& [prefix, dr] : t.effective_announcements()) {
    FibEntry e;
    e.prefix = prefix;
    e.announced_by = dr;
    if (dr == fc.sr) {
      e.next_hop = fc.sr;
      fib.local_prefixes.insert(prefix);
    } else {
      // Disconnected announcers (possible on a post-failure topology) get
      // no entry at all; packets for them drop as unreachable.
      std::optional<RouterId> nh = from.next_hop(dr);
      if (!nh) continue;
      e.next_hop = *nh;
      auto it = fib.vector_pair.find({e.next_hop, dr});
      if (it != fib.vector_pair.end()) e.ref = it->second;
    }
    fib.entries[prefix] = e;
  }
  return fib;
}

struct NetworkFib {
  std::map<RouterId, RouterFib> routers;

  RouterFib& at(RouterId r) { return routers.at(r); }
  const RouterFib& at(RouterId r) const { return routers.at(r); }
};

// Tables for every router, with pass-through and terminate records wired
// along each signaled sequence. The control-plane handshake that would
// install these incrementally lives in the forwarding module; this helper
// produces the steady state it converges to. Pass wire_signaled=false to
// stop before the handshake: signaled pairs stay unconfirmed and no
// pass-through state exists yet.
inline NetworkFib build_network_fib(const Topology& t,
                                    const FepConfig& cfg = {},
                                    bool wire_signaled = true) {
  AllPairsSpf ap(t);
  NetworkFib net;
  for (const auto& [sr, info] : t.routers) {
    FepComputation fc = compute_all_feps(t, sr, cfg, &ap);
    net.routers.emplace(sr, build_router_fib(t, ap, fc));
  }
  if (!wire_signaled) return net;
  for (const auto& [sr, info] : t.routers) {
    RouterFib& fib = net.routers.at(sr);
    for (size_t i = 0; i < fib.sr_pair_count; ++i) {
      const std::vector<RouterId>& seq = fib.pair_routes[i];
      if (decode_mark(fib.pairs[i].mark).second == 0) continue;
      for (size_t j = 1; j + 1 < seq.size(); ++j) {
        RouterId v = seq[j];
        size_t ni = t.interface_index(v, seq[j + 1]);
        install_not_sr_mark(net.routers.at(v), fib.pairs[i].mark,
                            static_cast<uint8_t>(ni));
      }
      install_terminate_mark(net.routers.at(seq.back()), fib.pairs[i].mark);
      fib.pairs[i].confirmed = true;
    }
  }
  return net;
}

// Extension cost in bytes: 3 per pair plus 1 per entry that carries a
// reference.
inline size_t fep_overhead_bytes(size_t pair_count, size_t ref_entries) {
  return 3 * pair_count + ref_entries;
}

inline size_t fep_overhead_bytes(const RouterFib& fib) {
  size_t refs = 0;
  for (const auto& [p, e] : fib.entries)
    if (e.ref) ++refs;
  return fep_overhead_bytes(fib.pairs.size(), refs);
}

inline size_t fep_overhead_bytes(const NetworkFib& net) {
  size_t total = 0;
  for (const auto& [r, fib] : net.routers) total += fep_overhead_bytes(fib);
  return total;
}

// Cost of the address-per-failure baseline: 12 bytes per extra forwarding
// entry plus 4 per ordinary entry that gains a backup pointer.
inline size_t notvia_overhead_bytes(size_t nfib_count, size_t ofe_entries) {
  return 12 * nfib_count + 4 * ofe_entries;
}

}  // namespace feps
