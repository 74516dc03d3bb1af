#include "feps/spf.hpp"

#include <gtest/gtest.h>

#include "support/oracle.hpp"

using namespace feps;
using testsupport::load_fixture;

TEST(Spf, LexTieBreak) {
  Topology t1 = load_fixture("t1.topo");
  SpfResult r = spf(t1, 1);
  EXPECT_EQ(r.dist_to(3), 2);
  EXPECT_EQ(r.path_to(3).routers, (std::vector<RouterId>{1, 2, 3}));
  EXPECT_EQ(r.dist_to(5), 3);
  EXPECT_EQ(r.path_to(5).routers, (std::vector<RouterId>{1, 2, 3, 5}));
  EXPECT_EQ(r.next_hop(3), std::optional<RouterId>(2));
  EXPECT_EQ(r.next_hop(1), std::nullopt);
}

TEST(Spf, ExpensiveDirectLinkLoses) {
  Topology t2 = load_fixture("t2.topo");
  SpfResult r = spf(t2, 4);
  EXPECT_EQ(r.dist_to(5), 4);
  EXPECT_EQ(r.path_to(5).routers, (std::vector<RouterId>{4, 1, 2, 3, 5}));
}

TEST(Spf, AsymmetricCosts) {
  Topology t = load_topology(
      "routers 3\nrouter 1\nrouter 2\nrouter 3\n"
      "link 1 2 cost_ab 1 cost_ba 7 capacity 10\n"
      "link 2 3 cost_ab 1 cost_ba 1 capacity 10\n"
      "link 1 3 cost_ab 4 cost_ba 4 capacity 10\n");
  EXPECT_EQ(spf(t, 1).dist_to(2), 1);
  EXPECT_EQ(spf(t, 2).dist_to(1), 5);  // 2-3-1 beats the 7-cost reverse
  EXPECT_EQ(spf(t, 2).path_to(1).routers, (std::vector<RouterId>{2, 3, 1}));
}

TEST(ConstrainedSpf, AvoidRouterAndLink) {
  Topology t2 = load_fixture("t2.topo");
  SpfResult avoid_r = constrained_spf(t2, 1, 2, ConstraintMode::avoid_router);
  EXPECT_EQ(avoid_r.dist_to(3), 12);
  EXPECT_EQ(avoid_r.path_to(3).routers, (std::vector<RouterId>{1, 4, 5, 3}));
  EXPECT_FALSE(avoid_r.reachable(2));

  SpfResult avoid_l = constrained_spf(t2, 1, 2, ConstraintMode::avoid_link);
  EXPECT_EQ(avoid_l.dist_to(2), 13);
  EXPECT_EQ(avoid_l.path_to(2).routers,
            (std::vector<RouterId>{1, 4, 5, 3, 2}));
}

TEST(ConstrainedSpf, SrlgExpansionReroutes) {
  Topology t3 = load_fixture("t3.topo");
  SpfResult r = constrained_spf(t3, 1, 2, ConstraintMode::avoid_router);
  EXPECT_EQ(r.dist_to(3), 6);
  EXPECT_EQ(r.path_to(3).routers, (std::vector<RouterId>{1, 5, 3}));
}

TEST(ConstrainedSpf, RequiresAdjacency) {
  Topology t1 = load_fixture("t1.topo");
  EXPECT_THROW(constrained_spf(t1, 1, 3, ConstraintMode::avoid_router),
               ValidationError);
}

TEST(Spf, UnreachableAfterFailure) {
  Topology t1 = load_fixture("t1.topo");
  SpfResult r = spf(remove_component(t1, FailureSpec::router_failure(3)), 1);
  EXPECT_FALSE(r.reachable(5));
  EXPECT_EQ(r.dist_to(5), kInfCost);
  EXPECT_TRUE(r.path_to(5).empty());
}

TEST(EqualCostPaths, EnumerationAndBound) {
  Topology t1 = load_fixture("t1.topo");
  EqualCostPaths ec = equal_cost_paths(t1, 1, 3, 8);
  ASSERT_EQ(ec.paths.size(), 2u);
  EXPECT_EQ(ec.paths[0].routers, (std::vector<RouterId>{1, 2, 3}));
  EXPECT_EQ(ec.paths[1].routers, (std::vector<RouterId>{1, 4, 3}));
  EXPECT_FALSE(ec.bound_exceeded);

  EqualCostPaths clipped = equal_cost_paths(t1, 1, 3, 1);
  ASSERT_EQ(clipped.paths.size(), 1u);
  EXPECT_EQ(clipped.paths[0].routers, (std::vector<RouterId>{1, 2, 3}));
  EXPECT_TRUE(clipped.bound_exceeded);

  Topology t4 = load_fixture("t4.topo");
  EqualCostPaths ring = equal_cost_paths(t4, 1, 6, 8);
  ASSERT_EQ(ring.paths.size(), 2u);
  EXPECT_EQ(ring.paths[0].routers, (std::vector<RouterId>{1, 2, 3, 6}));
  EXPECT_EQ(ring.paths[1].routers, (std::vector<RouterId>{1, 4, 5, 6}));
}

TEST(AllPairs, QueryHelpers) {
  Topology t2 = load_fixture("t2.topo");
  AllPairsSpf ap(t2);
  EXPECT_EQ(ap.dist(1, 3), 2);
  EXPECT_EQ(ap.dist(5, 1), 3);
  EXPECT_EQ(ap.num_routers(1, 3), 3);
  EXPECT_EQ(ap.num_routers(3, 3), 1);
  EXPECT_EQ(ap.path_routers(5, 3), (std::set<RouterId>{5, 3}));
  EXPECT_EQ(ap.path_links(5, 3), (std::set<LinkKey>{{3, 5}}));
  EXPECT_EQ(ap.path_links(1, 5),
            (std::set<LinkKey>{{1, 2}, {2, 3}, {3, 5}}));
}

TEST(Spf, OracleAgreementQuickSweep) {
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    testsupport::RandomTopoOptions opt;
    opt.routers = 6;
    opt.max_cost = 3;
    Topology t = testsupport::random_topology(seed, opt);
    for (auto& [src, sinfo] : t.routers) {
      SpfResult r = spf(t, src);
      for (auto& [dst, dinfo] : t.routers) {
        auto expect = testsupport::oracle_shortest(t, src, dst);
        ASSERT_EQ(r.reachable(dst), expect.reachable)
            << "seed " << seed << " " << src << "->" << dst;
        if (!expect.reachable) continue;
        EXPECT_EQ(r.dist_to(dst), expect.cost)
            << "seed " << seed << " " << src << "->" << dst;
        EXPECT_EQ(r.path_to(dst).routers, expect.paths.front())
            << "seed " << seed << " " << src << "->" << dst;
        EqualCostPaths ec = equal_cost_paths(t, r, dst, 64);
        std::vector<std::vector<RouterId>> got;
        for (auto& p : ec.paths) got.push_back(p.routers);
        EXPECT_EQ(got, expect.paths)
            << "seed " << seed << " " << src << "->" << dst;
      }
    }
  }
}
