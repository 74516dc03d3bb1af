#pragma once

// Per-packet forwarding decision and the hop-by-hop install handshake for
// signaled sequences. The decision procedure is a strict priority list:
// marked packets are delivered, handed to the recorded pair, or pushed on
// toward the destination with the mark riding along; unmarked packets use
// the plain entry and only jump onto a deviation when the primary next hop
// is known dead, the deviation window is open, and the referenced pair has
// been confirmed end to end.

#include <functional>

#include "feps/fib_ext.hpp"

namespace feps {

enum class DropReason {
  detection_window,  // forwarded onto a link nobody knew was dead yet
  second_failure,    // deviation or repair hit another dead component
  queue_guard,       // deviation refused to join a near-full queue
  unreachable,       // no usable entry or pair
};

inline const char* to_string(DropReason r) {
  switch (r) {
    case DropReason::detection_window:
      return "detection-window";
    case DropReason::second_failure:
      return "second-failure";
    case DropReason::queue_guard:
      return "queue-guard";
    case DropReason::unreachable:
      return "unreachable";
  }
  return "?";
}

struct Packet {
  uint64_t id = 0;
  RouterId src = 0;
  PrefixId dst_prefix = 0;
  std::optional<uint16_t> mark;
  std::optional<RouterId> encapsulated_to;
  int hops = 0;
};

struct ForwardDecision {
  enum class Action { deliver, forward, drop };
  Action action = Action::drop;
  RouterId next_hop = 0;
  uint8_t out_interface = 0;
  DropReason reason = DropReason::unreachable;
  const char* rule = "";
};

// What the forwarding engine knows about its surroundings. neighbor_alive
// reflects this router's own awareness: before failure detection fires it
// still believes a dead link is fine (and the packet dies on the wire, not
// here).
struct ForwardEnv {
  std::function<bool(RouterId)> neighbor_alive;
  std::function<double(RouterId)> queue_occupancy;  // 0..1, default empty
  bool deviation_active = false;
  bool guard_enabled = true;
  double guard_threshold = 0.80;
  bool field_in_use = true;  // encapsulation header available
};

namespace detail {

inline bool nbr_alive(const ForwardEnv& env, RouterId nbr) {
  return !env.neighbor_alive || env.neighbor_alive(nbr);
}

inline double occupancy(const ForwardEnv& env, RouterId nbr) {
  return env.queue_occupancy ? env.queue_occupancy(nbr) : 0.0;
}

inline ForwardDecision drop(DropReason r, const char* rule) {
  ForwardDecision d;
  d.action = ForwardDecision::Action::drop;
  d.reason = r;
  d.rule = rule;
  return d;
}

inline ForwardDecision forward(const Topology& t, RouterId owner,
                               RouterId nbr, const char* rule) {
  ForwardDecision d;
  d.action = ForwardDecision::Action::forward;
  d.next_hop = nbr;
  d.out_interface = static_cast<uint8_t>(t.interface_index(owner, nbr));
  d.rule = rule;
  return d;
}

inline ForwardDecision deliver(const char* rule) {
  ForwardDecision d;
  d.action = ForwardDecision::Action::deliver;
  d.rule = rule;
  return d;
}

inline RouterId pair_neighbor(const Topology& t, const RouterFib& fib,
                              const MarkNiPair& p) {
  std::vector<RouterId> nbrs = t.neighbors(fib.owner);
  if (p.ni >= nbrs.size())
    throw ProtocolError("router " + std::to_string(fib.owner) +
                        ": pair interface " + std::to_string(p.ni) +
                        " out of range");
  return nbrs[p.ni];
}

}  // namespace detail

// One forwarding decision. May mutate the packet: delivery strips headers,
// a sequence terminating here sheds its mark, and a fresh deviation stamps
// mark (and tunnel header) on.
inline ForwardDecision fep_diffor_forward(const Topology& t,
                                          const RouterFib& fib, Packet& pkt,
                                          const ForwardEnv& env) {
  if (pkt.mark) {
    bool local = pkt.encapsulated_to
                     ? *pkt.encapsulated_to == fib.owner
                     : fib.local_prefixes.count(pkt.dst_prefix) > 0;
    if (local) {
      pkt.mark.reset();
      pkt.encapsulated_to.reset();
      return detail::deliver("deliver-marked");
    }
    if (fib.terminate_marks.count(*pkt.mark)) {
      // Sequence complete: back to plain forwarding from here on.
      pkt.mark.reset();
    } else if (const MarkNiPair* pr = fib.pair_for_mark(*pkt.mark)) {
      RouterId nbr = detail::pair_neighbor(t, fib, *pr);
      if (!detail::nbr_alive(env, nbr))
        return detail::drop(DropReason::second_failure, "pair");
      if (env.guard_enabled &&
          detail::occupancy(env, nbr) >= env.guard_threshold)
        return detail::drop(DropReason::queue_guard, "pair");
      return detail::forward(t, fib.owner, nbr, "pair");
    } else {
      // Marked but no state here: press on toward the destination, mark
      // retained for whoever cares downstream.
      PrefixId key = pkt.encapsulated_to
                         ? static_cast<PrefixId>(*pkt.encapsulated_to)
                         : pkt.dst_prefix;
      const FibEntry* e = fib.entry_for_prefix(key);
      if (!e) return detail::drop(DropReason::unreachable, "marked-normal");
      if (e->next_hop == fib.owner) {
        pkt.mark.reset();
        pkt.encapsulated_to.reset();
        return detail::deliver("deliver-marked");
      }
      if (!detail::nbr_alive(env, e->next_hop))
        return detail::drop(DropReason::second_failure, "marked-normal");
      return detail::forward(t, fib.owner, e->next_hop, "marked-normal");
    }
  }

  PrefixId key = pkt.encapsulated_to
                     ? static_cast<PrefixId>(*pkt.encapsulated_to)
                     : pkt.dst_prefix;
  const FibEntry* e = fib.entry_for_prefix(key);
  if (!e) return detail::drop(DropReason::unreachable, "no-entry");
  if (e->next_hop == fib.owner) {
    pkt.encapsulated_to.reset();
    return detail::deliver("local");
  }
  if (detail::nbr_alive(env, e->next_hop))
    return detail::forward(t, fib.owner, e->next_hop, "primary");

  if (env.deviation_active && e->ref) {
    const MarkNiPair& pr = fib.pairs[*e->ref];
    if (pr.confirmed) {
      RouterId nbr = detail::pair_neighbor(t, fib, pr);
      if (!detail::nbr_alive(env, nbr))
        return detail::drop(DropReason::second_failure, "deviate");
      if (env.guard_enabled &&
          detail::occupancy(env, nbr) >= env.guard_threshold)
        return detail::drop(DropReason::queue_guard, "deviate");
      if (env.field_in_use) pkt.encapsulated_to = e->announced_by;
      pkt.mark = pr.mark;
      return detail::forward(t, fib.owner, nbr, "deviate");
    }
  }
  return detail::drop(DropReason::unreachable, "no-repair");
}

// Deviation window at one router: opened (and stretched) by each failure
// event, closed after the hold time so stale deviations do not outlive the
// routing protocol's own repair.
struct DeviationState {
  bool active = false;
  int64_t deadline_ns = 0;
  bool recompute_pending = false;

  void activate(int64_t now_ns, int64_t hold_ns) {
    active = true;
    deadline_ns = std::max(deadline_ns, now_ns + hold_ns);
  }
  // Returns true exactly once, when the window closes.
  bool expire(int64_t now_ns) {
    if (!active || now_ns < deadline_ns) return false;
    active = false;
    recompute_pending = true;
    return true;
  }
};

struct SignalResult {
  RouterId sr = 0;
  uint16_t mark = 0;
  std::vector<RouterId> sequence;
  bool confirmed = false;
  std::vector<RouterId> installed;  // got state before any trouble
  std::vector<RouterId> ack_log;    // reverse walk, filled when confirmed
};

// Install one signaled sequence hop by hop, then collect the ack on the
// way back. Any dead link leaves the sequence unconfirmed; whatever state
// was already installed stays (harmless: the deviating router refuses to
// use an unconfirmed pair).
inline SignalResult fep_signal_run(
    const Topology& t, NetworkFib& net, RouterId sr, size_t pair_index,
    const std::function<bool(RouterId, RouterId)>& link_up = {}) {
  RouterFib& srf = net.at(sr);
  if (pair_index >= srf.sr_pair_count)
    throw ValidationError("fep_signal_run: no such pair");
  const MarkNiPair& pair = srf.pairs[pair_index];
  SignalResult res;
  res.sr = sr;
  res.mark = pair.mark;
  res.sequence = srf.pair_routes[pair_index];
  if (decode_mark(pair.mark).second == 0)
    throw ValidationError("fep_signal_run: plain re-route needs no install");

  auto up = [&](RouterId a, RouterId b) { return !link_up || link_up(a, b); };
  const std::vector<RouterId>& seq = res.sequence;
  for (size_t j = 0; j + 1 < seq.size(); ++j) {
    if (!up(seq[j], seq[j + 1])) return res;
    RouterId v = seq[j + 1];
    if (j + 2 < seq.size())
      install_not_sr_mark(net.at(v), pair.mark,
                          static_cast<uint8_t>(t.interface_index(v, seq[j + 2])));
    else
      install_terminate_mark(net.at(v), pair.mark);
    res.installed.push_back(v);
  }
  for (size_t j = seq.size(); j-- > 1;) {
    if (!up(seq[j], seq[j - 1])) return res;
    res.ack_log.push_back(seq[j]);
  }
  res.ack_log.push_back(seq.front());
  res.confirmed = true;
  net.at(sr).pairs[pair_index].confirmed = true;
  return res;
}

// Handshake for every signaled sequence in the network; returns results in
// router order so reruns are reproducible.
inline std::vector<SignalResult> fep_signal_all(
    const Topology& t, NetworkFib& net,
    const std::function<bool(RouterId, RouterId)>& link_up = {}) {
  std::vector<SignalResult> out;
  for (auto& [sr, fib] : net.routers)
    for (size_t i = 0; i < fib.sr_pair_count; ++i)
      if (decode_mark(fib.pairs[i].mark).second != 0)
        out.push_back(fep_signal_run(t, net, sr, i, link_up));
  return out;
}

}  // namespace feps
