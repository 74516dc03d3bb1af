#pragma once

// Deterministic discrete-event simulator. Time is integer nanoseconds;
// events are ordered by (time, insertion sequence) so identical inputs
// replay identically, and the only randomness is the per-router recompute
// stagger drawn from a seeded generator in router-id order. Each directed
// link carries a drop-tail output queue modeled as a deque of departure
// timestamps; transmission time comes from the link capacity, propagation
// is a configurable constant.

#include <deque>
#include <fstream>
#include <queue>
#include <random>
#include <sstream>
#include <unordered_map>

#include "feps/dataplane.hpp"
#include "feps/fib_ext.hpp"

namespace feps {

enum class SimMode { ospf, feps };

inline const char* to_string(SimMode m) {
  return m == SimMode::ospf ? "ospf" : "feps";
}

// Sim-level drop accounting: the four forwarding reasons plus tail drops
// at a full queue, which the forwarding rules never see.
enum class DropCause {
  detection_window,
  second_failure,
  queue_guard,
  unreachable,
  queue_full,
};

inline const char* to_string(DropCause c) {
  switch (c) {
    case DropCause::detection_window:
      return "detection-window";
    case DropCause::second_failure:
      return "second-failure";
    case DropCause::queue_guard:
      return "queue-guard";
    case DropCause::unreachable:
      return "unreachable";
    case DropCause::queue_full:
      return "queue-full";
  }
  return "?";
}

inline DropCause to_cause(DropReason r) {
  switch (r) {
    case DropReason::detection_window:
      return DropCause::detection_window;
    case DropReason::second_failure:
      return DropCause::second_failure;
    case DropReason::queue_guard:
      return DropCause::queue_guard;
    case DropReason::unreachable:
      return DropCause::unreachable;
  }
  return DropCause::unreachable;
}

constexpr int kDropCauses = 5;

struct FlowSpec {
  RouterId src = 0;
  RouterId dst = 0;
  int64_t rate_bps = 0;
  int size_bytes = 0;
  int64_t start_ns = 0;
  int64_t stop_ns = 0;
  bool field_in_use = false;

  int64_t interval_ns() const {
    return static_cast<int64_t>(size_bytes) * 8 * 1000000000LL / rate_bps;
  }
};

struct SimConfig {
  SimMode mode = SimMode::feps;
  uint64_t seed = 0;
  int64_t detection_ns = 20'000'000;     // failure noticed by neighbors
  int64_t convergence_ns = 200'000'000;  // recompute spread after detection
  int64_t window_ns = 1'020'000'000;     // loss span: detection +
                                         // convergence + 800 ms slack
  int64_t hold_ns = 200'000'000;         // deviation window after detection
  int64_t prop_delay_ns = 1'000'000;
  int queue_capacity = 1000;
  bool guard = true;
  FepConfig fep;
};

struct Scenario {
  std::string topology_path;
  Topology topo;
  std::vector<FlowSpec> flows;
  std::vector<std::pair<FailureSpec, int64_t>> failures;
  SimConfig cfg;
};

namespace detail {

inline int64_t scale_ms(long long ms) { return ms * 1'000'000LL; }

}  // namespace detail

// Scenario text: a topology reference, traffic, at most a handful of
// candidate failures, and config overrides. Paths are resolved against
// base_dir. Lines: `topology <path>`, `flow <src> <dst> rate <bps> size
// <bytes> start <ms> stop <ms> [field_in_use]`, `fail link <a>-<b> at
// <ms>` / `fail router <id> at <ms>` / `fail srlg <gid> at <ms>`, `mode
// ospf|feps`, `seed N`, `guard on|off`, and `<knob>_ms N` time overrides
// (detection, convergence, window, hold), `queue_capacity N`,
// `prop_delay_us N`.
inline Scenario parse_scenario(const std::string& text,
                               const std::string& base_dir,
                               const std::function<std::string(const std::string&)>& read_file) {
  Scenario sc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::vector<std::string> tok = detail::tokenize(line);
    if (tok.empty()) continue;
    const std::string& kw = tok[0];
    auto ll = [&](size_t i) {
      return detail::parse_int(tok.at(i), lineno, kw.c_str());
    };
    try {
      if (kw == "topology" && tok.size() == 2) {
        sc.topology_path =
            base_dir.empty() ? tok[1] : base_dir + "/" + tok[1];
      } else if (kw == "flow" && tok.size() >= 11 && tok[3] == "rate" &&
                 tok[5] == "size" && tok[7] == "start" && tok[9] == "stop") {
        FlowSpec f;
        f.src = static_cast<RouterId>(ll(1));
        f.dst = static_cast<RouterId>(ll(2));
        f.rate_bps = ll(4);
        f.size_bytes = static_cast<int>(ll(6));
        f.start_ns = detail::scale_ms(ll(8));
        f.stop_ns = detail::scale_ms(ll(10));
        if (tok.size() == 12 && tok[11] == "field_in_use")
          f.field_in_use = true;
        else if (tok.size() != 11)
          throw ParseError(lineno, "bad flow line");
        if (f.src == f.dst) throw ParseError(lineno, "flow src == dst");
        if (f.rate_bps < 1 || f.size_bytes < 1)
          throw ParseError(lineno, "flow rate and size must be positive");
        if (f.stop_ns <= f.start_ns)
          throw ParseError(lineno, "flow stop must be after start");
        sc.flows.push_back(f);
      } else if (kw == "fail" && tok.size() == 5 && tok[3] == "at") {
        int64_t at = detail::scale_ms(ll(4));
        if (tok[1] == "link") {
          size_t dash = tok[2].find('-');
          if (dash == std::string::npos)
            throw ParseError(lineno, "fail link wants a-b");
          sc.failures.emplace_back(
              FailureSpec::link_failure(
                  static_cast<RouterId>(detail::parse_int(
                      tok[2].substr(0, dash), lineno, "endpoint")),
                  static_cast<RouterId>(detail::parse_int(
                      tok[2].substr(dash + 1), lineno, "endpoint"))),
              at);
        } else if (tok[1] == "router") {
          sc.failures.emplace_back(
              FailureSpec::router_failure(static_cast<RouterId>(ll(2))), at);
        } else if (tok[1] == "srlg") {
          sc.failures.emplace_back(
              FailureSpec::srlg_failure(static_cast<int>(ll(2))), at);
        } else {
          throw ParseError(lineno, "unknown failure kind '" + tok[1] + "'");
        }
      } else if (kw == "mode" && tok.size() == 2) {
        if (tok[1] == "ospf")
          sc.cfg.mode = SimMode::ospf;
        else if (tok[1] == "feps")
          sc.cfg.mode = SimMode::feps;
        else
          throw ParseError(lineno, "mode is ospf or feps");
      } else if (kw == "seed" && tok.size() == 2) {
        sc.cfg.seed = static_cast<uint64_t>(ll(1));
      } else if (kw == "guard" && tok.size() == 2) {
        if (tok[1] == "on")
          sc.cfg.guard = true;
        else if (tok[1] == "off")
          sc.cfg.guard = false;
        else
          throw ParseError(lineno, "guard is on or off");
      } else if (kw == "detection_ms" && tok.size() == 2) {
        sc.cfg.detection_ns = detail::scale_ms(ll(1));
      } else if (kw == "convergence_ms" && tok.size() == 2) {
        sc.cfg.convergence_ns = detail::scale_ms(ll(1));
      } else if (kw == "window_ms" && tok.size() == 2) {
        sc.cfg.window_ns = detail::scale_ms(ll(1));
      } else if (kw == "hold_ms" && tok.size() == 2) {
        sc.cfg.hold_ns = detail::scale_ms(ll(1));
      } else if (kw == "queue_capacity" && tok.size() == 2) {
        sc.cfg.queue_capacity = static_cast<int>(ll(1));
        if (sc.cfg.queue_capacity < 1)
          throw ParseError(lineno, "queue_capacity must be positive");
      } else if (kw == "prop_delay_us" && tok.size() == 2) {
        sc.cfg.prop_delay_ns = ll(1) * 1000;
      } else {
        throw ParseError(lineno, "unrecognized scenario line '" + kw + "'");
      }
    } catch (const std::out_of_range&) {
      throw ParseError(lineno, "missing fields");
    }
  }
  if (sc.topology_path.empty())
    throw ValidationError("scenario names no topology");
  sc.topo = load_topology(read_file(sc.topology_path));
  for (const FlowSpec& f : sc.flows) {
    if (!sc.topo.has_router(f.src) || !sc.topo.has_router(f.dst))
      throw ValidationError("flow references unknown router");
  }
  for (const auto& [f, at] : sc.failures) {
    if (f.kind == FailureSpec::Kind::link && !sc.topo.has_link(f.a, f.b))
      throw ValidationError("failure references unknown link " + f.label());
    if (f.kind == FailureSpec::Kind::router && !sc.topo.has_router(f.a))
      throw ValidationError("failure references unknown router " +
                            f.label());
    if (f.kind == FailureSpec::Kind::srlg &&
        sc.topo.srlgs.count(f.srlg_id) == 0)
      throw ValidationError("failure references unknown group " + f.label());
  }
  return sc;
}

// Convenience: read the scenario and its topology straight from disk.
inline Scenario load_scenario(const std::string& path) {
  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    if (!in) throw ValidationError("cannot open " + p);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  std::string base;
  size_t slash = path.find_last_of('/');
  if (slash != std::string::npos) base = path.substr(0, slash);
  return parse_scenario(slurp(path), base, slurp);
}

struct FlowStats {
  RouterId src = 0;
  RouterId dst = 0;
  uint64_t sent_window = 0;
  uint64_t delivered_window = 0;
  uint64_t dropped_window[kDropCauses] = {};
  uint64_t sent_total = 0;
  uint64_t delivered_total = 0;
  uint64_t dropped_total = 0;

  uint64_t dropped_window_total() const {
    uint64_t n = 0;
    for (uint64_t d : dropped_window) n += d;
    return n;
  }
  double loss_percent() const {
    if (sent_window == 0) return 0.0;
    return 100.0 * static_cast<double>(dropped_window_total()) /
           static_cast<double>(sent_window);
  }
};

struct SimResult {
  SimMode mode = SimMode::feps;
  uint64_t seed = 0;
  std::optional<FailureSpec> failure;
  int64_t t_fail_ns = 0;
  std::vector<FlowStats> flows;
  uint64_t trace_hash = 0;

  uint64_t sent_total = 0;
  uint64_t delivered_total = 0;
  uint64_t dropped_total = 0;
};


namespace detail {

struct SimEvent {
  int64_t at = 0;
  uint64_t seq = 0;
  enum class Kind { emit, arrival, detect, converge, hold_expire } kind;
  uint32_t flow_idx = 0;  // emit
  Packet pkt;             // arrival
  RouterId router = 0;    // arrival target / detect / converge / expire
  RouterId via_from = 0;  // arrival: sending router
};

struct EventOrder {
  bool operator()(const SimEvent& a, const SimEvent& b) const {
    if (a.at != b.at) return a.at > b.at;
    return a.seq > b.seq;
  }
};

// FNV-style word mix for the replay hash. Cheap enough to run on every
// event without showing up in profiles.
struct TraceHash {
  uint64_t h = 1469598103934665603ULL;
  void mix(uint64_t x) {
    h ^= x;
    h *= 1099511628211ULL;
  }
};

// Packet ids carry their flow index and whether the send fell inside the
// measurement window, so per-packet accounting needs no lookaside table.
inline uint64_t pack_packet_id(uint32_t flow, bool in_window,
                               uint64_t counter) {
  return (static_cast<uint64_t>(flow) << 41) |
         (static_cast<uint64_t>(in_window ? 1 : 0) << 40) | counter;
}
inline uint32_t packet_flow_of(uint64_t id) {
  return static_cast<uint32_t>(id >> 41);
}
inline bool packet_in_window(uint64_t id) { return (id >> 40) & 1; }

}  // namespace detail

// Run one scenario with at most one failure armed. The measurement window
// starts at the failure instant (or zero without one); every packet is
// tracked to delivery or drop, so sent == delivered + dropped over the
// whole run.
inline SimResult simulate(const Scenario& sc) {
  if (sc.failures.size() > 1)
    throw ValidationError(
        "simulate runs one failure; use the sweep for several");
  const Topology& topo = sc.topo;
  const SimConfig& cfg = sc.cfg;

  SimResult res;
  res.mode = cfg.mode;
  res.seed = cfg.seed;

  std::optional<FailureSpec> failure;
  int64_t t_fail = 0;
  if (!sc.failures.empty()) {
    failure = sc.failures[0].first;
    t_fail = sc.failures[0].second;
    res.failure = failure;
    res.t_fail_ns = t_fail;
  }
  const int64_t window_lo = failure ? t_fail : 0;
  const int64_t window_hi = window_lo + cfg.window_ns;

  NetworkFib pre = build_network_fib(topo, cfg.fep);
  Topology survived = failure ? remove_component(topo, *failure) : topo;
  NetworkFib post = failure ? build_network_fib(survived, cfg.fep) : pre;
  std::set<LinkKey> dead_links =
      failure ? failed_links(topo, *failure) : std::set<LinkKey>{};

  RouterId max_id = 0;
  for (const auto& [r, info] : topo.routers) max_id = std::max(max_id, r);
  const size_t ids = static_cast<size_t>(max_id) + 1;
  std::vector<uint8_t> dead_router(ids, 0);
  if (failure && failure->kind == FailureSpec::Kind::router)
    dead_router[failure->a] = 1;

  // Flat per-router state; ids are small by validation (< 512).
  std::vector<uint8_t> aware(ids, 0);
  std::vector<uint8_t> converged(ids, 0);
  std::vector<DeviationState> deviation(ids);
  std::vector<const RouterFib*> pre_fib(ids, nullptr);
  std::vector<const RouterFib*> post_fib(ids, nullptr);
  for (const auto& [r, fib] : pre.routers) pre_fib[r] = &fib;
  for (const auto& [r, fib] : post.routers) post_fib[r] = &fib;

  auto dir_key = [](RouterId a, RouterId b) {
    return (static_cast<uint32_t>(a) << 16) | b;
  };
  std::unordered_map<uint32_t, int64_t> cap_bps;
  for (const auto& [from, row] : topo.adj)
    for (const auto& [to, l] : row)
      cap_bps[dir_key(from, to)] = l.capacity_bps;

  // Failure-adjacent routers detect after the detection delay and recompute
  // after the full convergence time; everyone else recomputes at a seeded
  // uniform point inside that span. Draws are consumed in router-id order
  // for every live router, so the schedule is a pure function of the seed.
  std::map<RouterId, int64_t> detect_at;
  std::map<RouterId, int64_t> converge_at;
  if (failure) {
    std::set<RouterId> adjacent;
    for (const LinkKey& lk : dead_links) {
      adjacent.insert(lk.first);
      adjacent.insert(lk.second);
    }
    for (size_t r = 0; r < ids; ++r)
      if (dead_router[r]) adjacent.erase(static_cast<RouterId>(r));
    std::mt19937_64 rng(cfg.seed);
    for (const auto& [r, info] : topo.routers) {
      if (dead_router[r]) continue;
      uint64_t draw = rng();
      int64_t stagger =
          cfg.convergence_ns > 0
              ? static_cast<int64_t>(
                    draw % static_cast<uint64_t>(cfg.convergence_ns + 1))
              : 0;
      if (adjacent.count(r)) {
        detect_at[r] = t_fail + cfg.detection_ns;
        converge_at[r] = t_fail + cfg.detection_ns + cfg.convergence_ns;
      } else {
        converge_at[r] = t_fail + cfg.detection_ns + stagger;
      }
    }
  }

  std::priority_queue<detail::SimEvent, std::vector<detail::SimEvent>,
                      detail::EventOrder>
      heap;
  uint64_t seq = 0;
  auto push = [&](detail::SimEvent ev) {
    ev.seq = seq++;
    heap.push(ev);
  };

  res.flows.resize(sc.flows.size());
  std::vector<int64_t> flow_interval(sc.flows.size());
  for (size_t i = 0; i < sc.flows.size(); ++i) {
    res.flows[i].src = sc.flows[i].src;
    res.flows[i].dst = sc.flows[i].dst;
    flow_interval[i] = sc.flows[i].interval_ns();
    detail::SimEvent ev;
    ev.kind = detail::SimEvent::Kind::emit;
    ev.at = sc.flows[i].start_ns;
    ev.flow_idx = static_cast<uint32_t>(i);
    push(ev);
  }
  for (const auto& [r, at] : detect_at) {
    detail::SimEvent ev;
    ev.router = r;
    ev.kind = detail::SimEvent::Kind::detect;
    ev.at = at;
    push(ev);
    ev.kind = detail::SimEvent::Kind::hold_expire;
    ev.at = at + cfg.hold_ns;
    push(ev);
  }
  for (const auto& [r, at] : converge_at) {
    detail::SimEvent ev;
    ev.kind = detail::SimEvent::Kind::converge;
    ev.at = at;
    ev.router = r;
    push(ev);
  }

  std::unordered_map<uint32_t, std::deque<int64_t>> queues;
  uint64_t packet_counter = 0;
  detail::TraceHash trace;
  const int hop_budget = 2 * static_cast<int>(topo.routers.size());

  // The forwarding-environment callbacks capture one mutable context frame
  // instead of fresh state per hop, keeping the hot path allocation-free.
  struct EnvCtx {
    RouterId from = 0;
    int64_t now = 0;
    bool is_aware = false;
    const std::vector<uint8_t>* dead_router = nullptr;
    const std::set<LinkKey>* dead_links = nullptr;
    std::unordered_map<uint32_t, std::deque<int64_t>>* queues = nullptr;
    int queue_capacity = 1;
  } ctx;
  ctx.dead_router = &dead_router;
  ctx.dead_links = &dead_links;
  ctx.queues = &queues;
  ctx.queue_capacity = cfg.queue_capacity;

  auto pop_departed = [](std::deque<int64_t>& q, int64_t now) {
    while (!q.empty() && q.front() <= now) q.pop_front();
  };

  ForwardEnv env;
  env.guard_enabled = cfg.guard;
  env.neighbor_alive = [&ctx, &dir_key](RouterId n) {
    (void)dir_key;
    if (!ctx.is_aware) return true;
    if ((*ctx.dead_router)[n]) return false;
    return ctx.dead_links->count(undirected(ctx.from, n)) == 0;
  };
  env.queue_occupancy = [&ctx, &dir_key, &pop_departed](RouterId n) {
    auto it = ctx.queues->find(dir_key(ctx.from, n));
    if (it == ctx.queues->end()) return 0.0;
    pop_departed(it->second, ctx.now);
    return static_cast<double>(it->second.size()) /
           static_cast<double>(ctx.queue_capacity);
  };

  auto account_drop = [&](uint64_t id, DropCause cause, RouterId where,
                          int64_t now) {
    FlowStats& fs = res.flows[detail::packet_flow_of(id)];
    fs.dropped_total += 1;
    if (detail::packet_in_window(id))
      fs.dropped_window[static_cast<int>(cause)] += 1;
    res.dropped_total += 1;
    trace.mix(0xD0);
    trace.mix(static_cast<uint64_t>(now));
    trace.mix(id);
    trace.mix(where);
    trace.mix(static_cast<uint64_t>(cause));
  };

  auto account_deliver = [&](uint64_t id, RouterId where, int64_t now) {
    FlowStats& fs = res.flows[detail::packet_flow_of(id)];
    fs.delivered_total += 1;
    if (detail::packet_in_window(id)) fs.delivered_window += 1;
    res.delivered_total += 1;
    trace.mix(0xDE);
    trace.mix(static_cast<uint64_t>(now));
    trace.mix(id);
    trace.mix(where);
  };

  // A forward decision becomes a queue entry and a future arrival; the
  // liveness of the wire itself is checked at arrival time, so packets
  // launched at or caught by the failure die with the detection-window
  // cause.
  auto transmit = [&](RouterId from, Packet pkt, int64_t now) {
    if (pkt.hops >= hop_budget) {
      account_drop(pkt.id, DropCause::unreachable, from, now);
      return;
    }
    const bool use_post = converged[from] != 0;
    const Topology& view = use_post ? survived : topo;
    const RouterFib& fib = use_post ? *post_fib[from] : *pre_fib[from];
    ctx.from = from;
    ctx.now = now;
    ctx.is_aware = aware[from] != 0;
    const uint32_t flow = detail::packet_flow_of(pkt.id);
    env.field_in_use = sc.flows[flow].field_in_use;
    env.deviation_active =
        cfg.mode == SimMode::feps && deviation[from].active;
    ForwardDecision d = fep_diffor_forward(view, fib, pkt, env);
    if (d.action == ForwardDecision::Action::deliver) {
      account_deliver(pkt.id, from, now);
      return;
    }
    if (d.action == ForwardDecision::Action::drop) {
      account_drop(pkt.id, to_cause(d.reason), from, now);
      return;
    }
    const RouterId to = d.next_hop;
    std::deque<int64_t>& q = queues[dir_key(from, to)];
    pop_departed(q, now);
    if (q.size() >= static_cast<size_t>(cfg.queue_capacity)) {
      account_drop(pkt.id, DropCause::queue_full, from, now);
      return;
    }
    int64_t tx = static_cast<int64_t>(sc.flows[flow].size_bytes) * 8 *
                 1000000000LL / cap_bps.at(dir_key(from, to));
    int64_t depart = (q.empty() ? now : std::max(now, q.back())) + tx;
    q.push_back(depart);
    pkt.hops += 1;
    detail::SimEvent ev;
    ev.kind = detail::SimEvent::Kind::arrival;
    ev.at = depart + cfg.prop_delay_ns;
    ev.pkt = pkt;
    ev.router = to;
    ev.via_from = from;
    push(ev);
    trace.mix(0xF0);
    trace.mix(static_cast<uint64_t>(now));
    trace.mix(pkt.id);
    trace.mix(from);
    trace.mix(to);
  };

  while (!heap.empty()) {
    detail::SimEvent ev = heap.top();
    heap.pop();
    const int64_t now = ev.at;
    switch (ev.kind) {
      case detail::SimEvent::Kind::detect: {
        aware[ev.router] = 1;
        deviation[ev.router].activate(now, cfg.hold_ns);
        trace.mix(0xDD);
        trace.mix(static_cast<uint64_t>(now));
        trace.mix(ev.router);
        break;
      }
      case detail::SimEvent::Kind::hold_expire: {
        deviation[ev.router].expire(now);
        break;
      }
      case detail::SimEvent::Kind::converge: {
        converged[ev.router] = 1;
        trace.mix(0xCC);
        trace.mix(static_cast<uint64_t>(now));
        trace.mix(ev.router);
        break;
      }
      case detail::SimEvent::Kind::emit: {
        const FlowSpec& f = sc.flows[ev.flow_idx];
        if (now >= f.stop_ns) break;
        const bool in_window = now >= window_lo && now < window_hi;
        Packet pkt;
        pkt.id =
            detail::pack_packet_id(ev.flow_idx, in_window, ++packet_counter);
        pkt.src = f.src;
        pkt.dst_prefix = f.dst;
        FlowStats& fs = res.flows[ev.flow_idx];
        fs.sent_total += 1;
        if (in_window) fs.sent_window += 1;
        res.sent_total += 1;
        trace.mix(0xE0);
        trace.mix(static_cast<uint64_t>(now));
        trace.mix(pkt.id);
        detail::SimEvent next;
        next.kind = detail::SimEvent::Kind::emit;
        next.at = now + flow_interval[ev.flow_idx];
        next.flow_idx = ev.flow_idx;
        push(next);
        if (failure && now >= t_fail && dead_router[f.src]) {
          account_drop(pkt.id, DropCause::detection_window, f.src, now);
          break;
        }
        transmit(f.src, pkt, now);
        break;
      }
      case detail::SimEvent::Kind::arrival: {
        if (failure && now >= t_fail) {
          if (dead_links.count(undirected(ev.via_from, ev.router))) {
            account_drop(ev.pkt.id, DropCause::detection_window, ev.router,
                         now);
            break;
          }
          if (dead_router[ev.router]) {
            account_drop(ev.pkt.id, DropCause::detection_window, ev.router,
                         now);
            break;
          }
        }
        transmit(ev.router, ev.pkt, now);
        break;
      }
    }
  }

  for (const FlowStats& fs : res.flows) {
    if (fs.sent_total != fs.delivered_total + fs.dropped_total)
      throw Error("packet conservation violated for flow " +
                  std::to_string(fs.src) + "->" + std::to_string(fs.dst));
  }
  res.trace_hash = trace.h;
  return res;
}

}  // namespace feps
