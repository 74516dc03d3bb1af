#include "feps/dataplane.hpp"

#include <gtest/gtest.h>

#include "support/oracle.hpp"

using namespace feps;
using testsupport::load_fixture;

namespace {

std::vector<RouterId> rt(std::initializer_list<int> ids) {
  return std::vector<RouterId>(ids.begin(), ids.end());
}

ForwardEnv env_all_up() {
  ForwardEnv e;
  e.neighbor_alive = [](RouterId) { return true; };
  return e;
}

struct WalkResult {
  std::vector<RouterId> visited;
  ForwardDecision last;
  Packet pkt;
};

WalkResult walk_packet(const Topology& t, const NetworkFib& net, Packet pkt,
                       RouterId start,
                       const std::function<ForwardEnv(RouterId)>& env_for,
                       int max_hops = 64) {
  WalkResult w;
  RouterId cur = start;
  for (int i = 0; i <= max_hops; ++i) {
    w.visited.push_back(cur);
    w.last = fep_diffor_forward(t, net.at(cur), pkt, env_for(cur));
    if (w.last.action != ForwardDecision::Action::forward) break;
    cur = w.last.next_hop;
  }
  w.pkt = pkt;
  return w;
}

}  // namespace

TEST(Forwarding, PlainDeliveryAndTransit) {
  Topology t = load_fixture("t1.topo");
  NetworkFib net = build_network_fib(t);
  Packet pkt;
  pkt.dst_prefix = 5;
  ForwardDecision d = fep_diffor_forward(t, net.at(1), pkt, env_all_up());
  EXPECT_EQ(d.action, ForwardDecision::Action::forward);
  EXPECT_EQ(d.next_hop, 2);
  EXPECT_STREQ(d.rule, "primary");

  pkt.dst_prefix = 1;
  d = fep_diffor_forward(t, net.at(1), pkt, env_all_up());
  EXPECT_EQ(d.action, ForwardDecision::Action::deliver);
  EXPECT_STREQ(d.rule, "local");

  pkt.dst_prefix = 99;
  d = fep_diffor_forward(t, net.at(1), pkt, env_all_up());
  EXPECT_EQ(d.action, ForwardDecision::Action::drop);
  EXPECT_EQ(d.reason, DropReason::unreachable);
  EXPECT_STREQ(d.rule, "no-entry");
}

TEST(Forwarding, UnawareRouterStillUsesDeadLink) {
  // Before detection the router believes the link is fine; the decision is
  // an ordinary forward and the wire is where the packet actually dies.
  Topology t = load_fixture("t1.topo");
  NetworkFib net = build_network_fib(t);
  Packet pkt;
  pkt.dst_prefix = 2;
  ForwardDecision d = fep_diffor_forward(t, net.at(1), pkt, env_all_up());
  EXPECT_EQ(d.action, ForwardDecision::Action::forward);
  EXPECT_EQ(d.next_hop, 2);
}

TEST(Forwarding, DeviationWalkEndToEnd) {
  Topology t = load_fixture("t2.topo");
  NetworkFib net = build_network_fib(t);

  // Link 1-2 dead, router 1 aware and deviating. A packet for 3 rides the
  // signaled sequence [1,4,5] and plain forwarding finishes 5-3.
  auto env_for = [&](RouterId owner) {
    ForwardEnv e = env_all_up();
    if (owner == 1) {
      e.neighbor_alive = [](RouterId n) { return n != 2; };
      e.deviation_active = true;
    }
    return e;
  };
  Packet pkt;
  pkt.dst_prefix = 3;
  WalkResult w = walk_packet(t, net, pkt, 1, env_for);
  EXPECT_EQ(w.visited, rt({1, 4, 5, 3}));
  EXPECT_EQ(w.last.action, ForwardDecision::Action::deliver);
  // The mark came off at the sequence end (router 5), so the last hop is
  // plain forwarding and delivery is the ordinary local rule.
  EXPECT_STREQ(w.last.rule, "local");
  EXPECT_FALSE(w.pkt.mark.has_value());
  EXPECT_FALSE(w.pkt.encapsulated_to.has_value());
}

TEST(Forwarding, DeviationStampsHeaders) {
  Topology t = load_fixture("t2.topo");
  NetworkFib net = build_network_fib(t);
  ForwardEnv e = env_all_up();
  e.neighbor_alive = [](RouterId n) { return n != 2; };
  e.deviation_active = true;

  Packet pkt;
  pkt.dst_prefix = 3;
  ForwardDecision d = fep_diffor_forward(t, net.at(1), pkt, e);
  EXPECT_EQ(d.action, ForwardDecision::Action::forward);
  EXPECT_EQ(d.next_hop, 4);
  EXPECT_STREQ(d.rule, "deviate");
  EXPECT_EQ(pkt.mark, std::optional<uint16_t>(0x0081));
  EXPECT_EQ(pkt.encapsulated_to, std::optional<RouterId>(3));

  // Without the encapsulation field only the mark goes on.
  Packet bare;
  bare.dst_prefix = 3;
  e.field_in_use = false;
  d = fep_diffor_forward(t, net.at(1), bare, e);
  EXPECT_EQ(d.action, ForwardDecision::Action::forward);
  EXPECT_EQ(bare.mark, std::optional<uint16_t>(0x0081));
  EXPECT_FALSE(bare.encapsulated_to.has_value());
}

TEST(Forwarding, BareMarkStillDelivers) {
  Topology t = load_fixture("t2.topo");
  NetworkFib net = build_network_fib(t);
  auto env_for = [&](RouterId owner) {
    ForwardEnv e = env_all_up();
    if (owner == 1) {
      e.neighbor_alive = [](RouterId n) { return n != 2; };
      e.deviation_active = true;
      e.field_in_use = false;
    }
    return e;
  };
  Packet pkt;
  pkt.dst_prefix = 3;
  WalkResult w = walk_packet(t, net, pkt, 1, env_for);
  EXPECT_EQ(w.visited, rt({1, 4, 5, 3}));
  EXPECT_EQ(w.last.action, ForwardDecision::Action::deliver);
}

TEST(Forwarding, PlainReRouteKeepsMarkUntilDelivery) {
  Topology t = load_fixture("t3.topo");
  NetworkFib net = build_network_fib(t);
  // Router 2 dead (and 1-4 shares its fate): the loop-free neighbor pair
  // toward 5 carries sequence id 0, so no router along the way holds any
  // state for it and the mark simply rides to the destination.
  auto env_for = [&](RouterId owner) {
    ForwardEnv e = env_all_up();
    if (owner == 1) {
      e.neighbor_alive = [](RouterId n) { return n != 2 && n != 4; };
      e.deviation_active = true;
    }
    return e;
  };
  Packet pkt;
  pkt.dst_prefix = 3;
  WalkResult w = walk_packet(t, net, pkt, 1, env_for);
  EXPECT_EQ(w.visited, rt({1, 5, 3}));
  EXPECT_EQ(w.last.action, ForwardDecision::Action::deliver);
  EXPECT_EQ(net.at(5).pair_for_mark(0x0080), nullptr);
}

TEST(Forwarding, GuardRefusesNearFullQueue) {
  Topology t = load_fixture("t2.topo");
  NetworkFib net = build_network_fib(t);
  ForwardEnv e = env_all_up();
  e.neighbor_alive = [](RouterId n) { return n != 2; };
  e.deviation_active = true;
  e.queue_occupancy = [](RouterId) { return 0.85; };

  Packet pkt;
  pkt.dst_prefix = 3;
  ForwardDecision d = fep_diffor_forward(t, net.at(1), pkt, e);
  EXPECT_EQ(d.action, ForwardDecision::Action::drop);
  EXPECT_EQ(d.reason, DropReason::queue_guard);

  e.queue_occupancy = [](RouterId) { return 0.79; };
  Packet pkt2;
  pkt2.dst_prefix = 3;
  d = fep_diffor_forward(t, net.at(1), pkt2, e);
  EXPECT_EQ(d.action, ForwardDecision::Action::forward);

  e.queue_occupancy = [](RouterId) { return 0.95; };
  e.guard_enabled = false;
  Packet pkt3;
  pkt3.dst_prefix = 3;
  d = fep_diffor_forward(t, net.at(1), pkt3, e);
  EXPECT_EQ(d.action, ForwardDecision::Action::forward);

  // The guard also protects pass-through hops of a marked packet.
  ForwardEnv mid = env_all_up();
  mid.queue_occupancy = [](RouterId) { return 0.9; };
  Packet marked;
  marked.dst_prefix = 3;
  marked.mark = 0x0081;
  d = fep_diffor_forward(t, net.at(4), marked, mid);
  EXPECT_EQ(d.action, ForwardDecision::Action::drop);
  EXPECT_EQ(d.reason, DropReason::queue_guard);
}

TEST(Forwarding, SecondFailureDrops) {
  Topology t = load_fixture("t2.topo");
  NetworkFib net = build_network_fib(t);
  // Deviating router: both the primary and the deviation neighbor dead.
  ForwardEnv e = env_all_up();
  e.neighbor_alive = [](RouterId n) { return n != 2 && n != 4; };
  e.deviation_active = true;
  Packet pkt;
  pkt.dst_prefix = 3;
  ForwardDecision d = fep_diffor_forward(t, net.at(1), pkt, e);
  EXPECT_EQ(d.action, ForwardDecision::Action::drop);
  EXPECT_EQ(d.reason, DropReason::second_failure);

  // Pass-through hop whose recorded interface points at a dead neighbor.
  ForwardEnv mid = env_all_up();
  mid.neighbor_alive = [](RouterId n) { return n != 5; };
  Packet marked;
  marked.dst_prefix = 3;
  marked.mark = 0x0081;
  d = fep_diffor_forward(t, net.at(4), marked, mid);
  EXPECT_EQ(d.action, ForwardDecision::Action::drop);
  EXPECT_EQ(d.reason, DropReason::second_failure);
  EXPECT_STREQ(d.rule, "pair");
}

TEST(Forwarding, UnconfirmedPairRefused) {
  Topology t = load_fixture("t2.topo");
  NetworkFib net = build_network_fib(t, {}, false);
  ForwardEnv e = env_all_up();
  e.neighbor_alive = [](RouterId n) { return n != 2; };
  e.deviation_active = true;
  Packet pkt;
  pkt.dst_prefix = 3;
  ForwardDecision d = fep_diffor_forward(t, net.at(1), pkt, e);
  EXPECT_EQ(d.action, ForwardDecision::Action::drop);
  EXPECT_EQ(d.reason, DropReason::unreachable);
  EXPECT_STREQ(d.rule, "no-repair");
  EXPECT_FALSE(pkt.mark.has_value());
}

TEST(Forwarding, InactiveDeviationRefused) {
  Topology t = load_fixture("t2.topo");
  NetworkFib net = build_network_fib(t);
  ForwardEnv e = env_all_up();
  e.neighbor_alive = [](RouterId n) { return n != 2; };
  e.deviation_active = false;
  Packet pkt;
  pkt.dst_prefix = 3;
  ForwardDecision d = fep_diffor_forward(t, net.at(1), pkt, e);
  EXPECT_EQ(d.action, ForwardDecision::Action::drop);
  EXPECT_EQ(d.reason, DropReason::unreachable);
}

TEST(Signaling, InstallAndAck) {
  Topology t = load_fixture("t2.topo");
  NetworkFib net = build_network_fib(t, {}, false);
  SignalResult res = fep_signal_run(t, net, 1, 0);
  EXPECT_TRUE(res.confirmed);
  EXPECT_EQ(res.mark, 0x0081);
  EXPECT_EQ(res.sequence, rt({1, 4, 5}));
  EXPECT_EQ(res.installed, rt({4, 5}));
  EXPECT_EQ(res.ack_log, rt({5, 4, 1}));
  EXPECT_TRUE(net.at(1).pairs[0].confirmed);
  ASSERT_NE(net.at(4).pair_for_mark(0x0081), nullptr);
  EXPECT_EQ(net.at(4).pair_for_mark(0x0081)->ni, t.interface_index(4, 5));
  EXPECT_TRUE(net.at(5).terminate_marks.count(0x0081));

  EXPECT_THROW(fep_signal_run(t, net, 1, 7), ValidationError);
}

TEST(Signaling, DeadHopLeavesUnconfirmed) {
  Topology t = load_fixture("t2.topo");
  NetworkFib net = build_network_fib(t, {}, false);
  auto link_up = [](RouterId a, RouterId b) {
    return undirected(a, b) != undirected(4, 5);
  };
  SignalResult res = fep_signal_run(t, net, 1, 0, link_up);
  EXPECT_FALSE(res.confirmed);
  EXPECT_EQ(res.installed, rt({4}));
  EXPECT_TRUE(res.ack_log.empty());
  EXPECT_FALSE(net.at(1).pairs[0].confirmed);
  // Partial state stays but the unconfirmed pair is never used.
  EXPECT_NE(net.at(4).pair_for_mark(0x0081), nullptr);
  EXPECT_EQ(net.at(5).pair_for_mark(0x0081), nullptr);
}

TEST(Signaling, HandshakeMatchesPrewiredState) {
  for (const char* fixture : {"t1.topo", "t2.topo", "g2.topo"}) {
    Topology t = load_fixture(fixture);
    NetworkFib cold = build_network_fib(t, {}, false);
    std::vector<SignalResult> runs = fep_signal_all(t, cold);
    for (const SignalResult& r : runs) EXPECT_TRUE(r.confirmed) << fixture;

    NetworkFib warm = build_network_fib(t);
    for (const auto& [r, wf] : warm.routers) {
      const RouterFib& cf = cold.at(r);
      ASSERT_EQ(cf.pairs.size(), wf.pairs.size()) << fixture;
      for (size_t i = 0; i < wf.pairs.size(); ++i) {
        EXPECT_EQ(cf.pairs[i].mark, wf.pairs[i].mark);
        EXPECT_EQ(cf.pairs[i].ni, wf.pairs[i].ni);
        EXPECT_EQ(cf.pairs[i].confirmed, wf.pairs[i].confirmed);
      }
      EXPECT_EQ(cf.terminate_marks, wf.terminate_marks) << fixture;
    }
  }
}

TEST(Signaling, PlainPairRejected) {
  Topology t = load_fixture("t1.topo");
  NetworkFib net = build_network_fib(t, {}, false);
  // Pair index 1 at router 1 is the shared plain re-route.
  EXPECT_THROW(fep_signal_run(t, net, 1, 1), ValidationError);
}

TEST(DeviationWindow, ActivateExtendExpire) {
  DeviationState s;
  EXPECT_FALSE(s.active);
  s.activate(100, 200);
  EXPECT_TRUE(s.active);
  EXPECT_EQ(s.deadline_ns, 300);
  s.activate(150, 200);
  EXPECT_EQ(s.deadline_ns, 350);
  EXPECT_FALSE(s.expire(349));
  EXPECT_TRUE(s.active);
  EXPECT_TRUE(s.expire(350));
  EXPECT_FALSE(s.active);
  EXPECT_TRUE(s.recompute_pending);
  EXPECT_FALSE(s.expire(400));
}

TEST(Forwarding, RandomSweepWalksMatchComputedPaths) {
  // For every operational failure the marked walk must visit exactly the
  // computed recovery path and deliver, with no routing loop.
  int walks = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    testsupport::RandomTopoOptions opt;
    opt.routers = 7;
    opt.avg_degree = 3.2;
    Topology t = testsupport::random_topology(seed, opt);
    AllPairsSpf ap(t);
    NetworkFib net = build_network_fib(t);
    for (const auto& [sr, info] : t.routers) {
      FepComputation fc = compute_all_feps(t, sr, {}, &ap);
      for (const auto& [dst, from_sr_seq] : ap.from(sr).primary_path) {
        if (dst == sr) continue;
        std::optional<RouterId> nh = ap.from(sr).next_hop(dst);
        ASSERT_TRUE(nh.has_value());
        RouterId ar = *nh;
        const FepVector* v = fc.vector_for(ar, dst);
        FailureSpec f = dst == ar ? FailureSpec::link_failure(sr, ar)
                                  : FailureSpec::router_failure(ar);
        std::set<LinkKey> dead = failed_links(t, f);
        RouterId sr_copy = sr;
        auto env_for = [&, sr_copy](RouterId owner) {
          ForwardEnv e = env_all_up();
          if (owner == sr_copy) {
            e.neighbor_alive = [&dead, sr_copy, &f](RouterId n) {
              if (f.kind == FailureSpec::Kind::router && n == f.a)
                return false;
              return dead.count(undirected(sr_copy, n)) == 0;
            };
            e.deviation_active = true;
          }
          return e;
        };
        Packet pkt;
        pkt.dst_prefix = dst;
        WalkResult w =
            walk_packet(t, net, pkt, sr, env_for,
                        2 * static_cast<int>(t.routers.size()));
        if (v) {
          PathSeq expect = recovery_path(t, ap, *v);
          EXPECT_EQ(w.visited, expect.routers)
              << "seed " << seed << " sr=" << sr << " ar=" << ar
              << " dr=" << dst;
          EXPECT_EQ(w.last.action, ForwardDecision::Action::deliver);
          ++walks;
        } else {
          EXPECT_EQ(w.last.action, ForwardDecision::Action::drop);
          EXPECT_EQ(w.last.reason, DropReason::unreachable);
        }
      }
    }
  }
  EXPECT_GT(walks, 300);
}
