#pragma once

// Link-state topology model: directed links with per-direction costs, shared
// risk link groups, and the failure algebra used by the recovery machinery.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace feps {

using RouterId = std::uint16_t;
using Cost = std::int64_t;
using PrefixId = std::uint32_t;

inline constexpr RouterId kMaxRouterId = 511;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

struct Link {
  RouterId from = 0;
  RouterId to = 0;
  Cost cost = 1;
  std::int64_t capacity_bps = 0;
};

// Canonical undirected link key, lo id first.
using LinkKey = std::pair<RouterId, RouterId>;

inline LinkKey undirected(RouterId a, RouterId b) {
  return a < b ? LinkKey{a, b} : LinkKey{b, a};
}

struct RouterInfo {
  std::optional<std::uint32_t> loopback;
};

struct FailureSpec {
  enum class Kind { link, router, srlg };
  Kind kind = Kind::link;
  RouterId a = 0;  // link endpoints (kind==link) or router id (kind==router)
  RouterId b = 0;
  int srlg_id = 0;

  static FailureSpec link_failure(RouterId x, RouterId y) {
    FailureSpec f;
    f.kind = Kind::link;
    f.a = std::min(x, y);
    f.b = std::max(x, y);
    return f;
  }
  static FailureSpec router_failure(RouterId r) {
    FailureSpec f;
    f.kind = Kind::router;
    f.a = r;
    return f;
  }
  static FailureSpec srlg_failure(int gid) {
    FailureSpec f;
    f.kind = Kind::srlg;
    f.srlg_id = gid;
    return f;
  }

  std::string label() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::link:
        os << "link " << a << "-" << b;
        break;
      case Kind::router:
        os << "router " << a;
        break;
      case Kind::srlg:
        os << "srlg " << srlg_id;
        break;
    }
    return os.str();
  }

  friend bool operator==(const FailureSpec& x, const FailureSpec& y) {
    return x.kind == y.kind && x.a == y.a && x.b == y.b &&
           x.srlg_id == y.srlg_id;
  }
  friend bool operator<(const FailureSpec& x, const FailureSpec& y) {
    return std::tie(x.kind, x.a, x.b, x.srlg_id) <
           std::tie(y.kind, y.a, y.b, y.srlg_id);
  }
};

class Topology {
 public:
  std::map<RouterId, RouterInfo> routers;
  // adj[from][to] — every physical link contributes both directions.
  std::map<RouterId, std::map<RouterId, Link>> adj;
  std::map<int, std::set<LinkKey>> srlgs;
  // Extra prefix announcements beyond the implicit one-prefix-per-router.
  std::map<PrefixId, RouterId> announcements;

  bool has_router(RouterId r) const { return routers.count(r) != 0; }

  bool has_link(RouterId a, RouterId b) const {
    auto it = adj.find(a);
    return it != adj.end() && it->second.count(b) != 0;
  }

  const Link& link(RouterId a, RouterId b) const {
    auto it = adj.find(a);
    if (it == adj.end() || it->second.count(b) == 0)
      throw ValidationError("unknown link " + std::to_string(a) + "-" +
                            std::to_string(b));
    return it->second.at(b);
  }

  // Sorted neighbor list; the position of a neighbor in it is the
  // interface index used by the FIB extension (8-bit NI field).
  std::vector<RouterId> neighbors(RouterId r) const {
    std::vector<RouterId> out;
    auto it = adj.find(r);
    if (it == adj.end()) return out;
    out.reserve(it->second.size());
    for (const auto& [to, l] : it->second) out.push_back(to);
    return out;
  }

  int interface_index(RouterId r, RouterId nbr) const {
    auto ns = neighbors(r);
    auto it = std::lower_bound(ns.begin(), ns.end(), nbr);
    if (it == ns.end() || *it != nbr)
      throw ValidationError("router " + std::to_string(r) +
                            " has no interface toward " + std::to_string(nbr));
    return static_cast<int>(it - ns.begin());
  }

  // Undirected physical links, canonical order.
  std::vector<LinkKey> physical_links() const {
    std::set<LinkKey> keys;
    for (const auto& [from, row] : adj)
      for (const auto& [to, l] : row) keys.insert(undirected(from, to));
    return {keys.begin(), keys.end()};
  }

  // prefix -> announcing router: one implicit prefix per router (id reused
  // as prefix id) plus any explicit announcements.
  std::map<PrefixId, RouterId> effective_announcements() const {
    std::map<PrefixId, RouterId> out;
    for (const auto& [r, info] : routers) out[r] = r;
    for (const auto& [p, r] : announcements) out[p] = r;
    return out;
  }
};

namespace detail {

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream is(line);
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

inline long long parse_int(const std::string& s, int line,
                           const char* what) {
  try {
    size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, std::string("expected integer for ") + what +
                               ", got '" + s + "'");
  }
}

inline RouterId parse_router_id(const std::string& s, int line) {
  long long v = parse_int(s, line, "router id");
  if (v < 0) throw ParseError(line, "router id must be non-negative");
  if (v > kMaxRouterId)
    throw ParseError(line, "router id exceeds 9-bit range (max 511)");
  return static_cast<RouterId>(v);
}

// "a-b" link reference inside srlg lines.
inline LinkKey parse_link_ref(const std::string& s, int line) {
  auto dash = s.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 >= s.size())
    throw ParseError(line, "expected link reference a-b, got '" + s + "'");
  RouterId a = parse_router_id(s.substr(0, dash), line);
  RouterId b = parse_router_id(s.substr(dash + 1), line);
  return undirected(a, b);
}

}  // namespace detail

// Parses and validates the topology text format:
//   routers N
//   router <id> [loopback <u32>]
//   link <a> <b> cost_ab <c1> cost_ba <c2> capacity <bps>
//   srlg <gid> <a>-<b> ...
//   prefix <pid> <router>
// '#' starts a comment anywhere on a line.
inline Topology load_topology(const std::string& text) {
  Topology t;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  long long declared = -1;

  while (std::getline(in, raw)) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    auto toks = detail::tokenize(raw);
    if (toks.empty()) continue;
    const std::string& kw = toks[0];

    if (kw == "routers") {
      if (toks.size() != 2) throw ParseError(lineno, "routers takes a count");
      declared = detail::parse_int(toks[1], lineno, "router count");
    } else if (kw == "router") {
      if (toks.size() != 2 && toks.size() != 4)
        throw ParseError(lineno, "router takes <id> [loopback <value>]");
      RouterId id = detail::parse_router_id(toks[1], lineno);
      if (t.has_router(id))
        throw ParseError(lineno, "duplicate router " + toks[1]);
      RouterInfo info;
      if (toks.size() == 4) {
        if (toks[2] != "loopback")
          throw ParseError(lineno, "expected 'loopback', got '" + toks[2] + "'");
        long long lb = detail::parse_int(toks[3], lineno, "loopback");
        if (lb < 0 || lb > 0xFFFFFFFFLL)
          throw ParseError(lineno, "loopback out of 32-bit range");
        info.loopback = static_cast<std::uint32_t>(lb);
      }
      t.routers[id] = info;
    } else if (kw == "link") {
      if (toks.size() != 9 || toks[3] != "cost_ab" || toks[5] != "cost_ba" ||
          toks[7] != "capacity")
        throw ParseError(lineno,
                         "link takes <a> <b> cost_ab <c> cost_ba <c> "
                         "capacity <bps>");
      RouterId a = detail::parse_router_id(toks[1], lineno);
      RouterId b = detail::parse_router_id(toks[2], lineno);
      if (a == b) throw ParseError(lineno, "self-loop link");
      if (!t.has_router(a) || !t.has_router(b))
        throw ParseError(lineno, "link endpoint not declared");
      Cost cab = detail::parse_int(toks[4], lineno, "cost_ab");
      Cost cba = detail::parse_int(toks[6], lineno, "cost_ba");
      if (cab < 1 || cba < 1) throw ParseError(lineno, "cost < 1");
      long long cap = detail::parse_int(toks[8], lineno, "capacity");
      if (cap <= 0) throw ParseError(lineno, "capacity must be positive");
      if (t.has_link(a, b) || t.has_link(b, a))
        throw ParseError(lineno, "duplicate link " + toks[1] + "-" + toks[2]);
      t.adj[a][b] = Link{a, b, cab, cap};
      t.adj[b][a] = Link{b, a, cba, cap};
    } else if (kw == "srlg") {
      if (toks.size() < 3)
        throw ParseError(lineno, "srlg takes <gid> and at least 2 members");
      int gid = static_cast<int>(detail::parse_int(toks[1], lineno, "srlg id"));
      if (t.srlgs.count(gid))
        throw ParseError(lineno, "duplicate srlg " + toks[1]);
      std::set<LinkKey> members;
      for (size_t i = 2; i < toks.size(); ++i) {
        LinkKey k = detail::parse_link_ref(toks[i], lineno);
        if (!t.has_link(k.first, k.second))
          throw ParseError(lineno, "srlg member " + toks[i] +
                                       " is not a declared link");
        members.insert(k);
      }
      if (members.size() < 2)
        throw ParseError(lineno, "srlg needs at least 2 distinct members");
      t.srlgs[gid] = std::move(members);
    } else if (kw == "prefix") {
      if (toks.size() != 3)
        throw ParseError(lineno, "prefix takes <pid> <router>");
      long long pid = detail::parse_int(toks[1], lineno, "prefix id");
      if (pid < 0 || pid > 0xFFFFFFFFLL)
        throw ParseError(lineno, "prefix id out of range");
      RouterId r = detail::parse_router_id(toks[2], lineno);
      if (!t.has_router(r))
        throw ParseError(lineno, "prefix announcer not declared");
      t.announcements[static_cast<PrefixId>(pid)] = r;
    } else {
      throw ParseError(lineno, "unknown keyword '" + kw + "'");
    }
  }

  if (declared >= 0 &&
      declared != static_cast<long long>(t.routers.size()))
    throw ValidationError("routers header declares " +
                          std::to_string(declared) + " but " +
                          std::to_string(t.routers.size()) + " defined");
  if (t.routers.empty()) throw ValidationError("no routers defined");

  // Strong connectivity. Both directions of every physical link exist, so a
  // single sweep suffices.
  std::set<RouterId> seen;
  std::vector<RouterId> stack{t.routers.begin()->first};
  while (!stack.empty()) {
    RouterId r = stack.back();
    stack.pop_back();
    if (!seen.insert(r).second) continue;
    for (RouterId n : t.neighbors(r)) stack.push_back(n);
  }
  if (seen.size() != t.routers.size())
    throw ValidationError("topology is not connected");

  return t;
}

// Canonical text form; load_topology(serialize_topology(t)) == t.
inline std::string serialize_topology(const Topology& t) {
  std::ostringstream os;
  os << "routers " << t.routers.size() << "\n";
  for (const auto& [id, info] : t.routers) {
    os << "router " << id;
    if (info.loopback) os << " loopback " << *info.loopback;
    os << "\n";
  }
  for (const LinkKey& k : t.physical_links()) {
    const Link& fwd = t.adj.at(k.first).at(k.second);
    const Link& rev = t.adj.at(k.second).at(k.first);
    os << "link " << k.first << " " << k.second << " cost_ab " << fwd.cost
       << " cost_ba " << rev.cost << " capacity " << fwd.capacity_bps << "\n";
  }
  for (const auto& [gid, members] : t.srlgs) {
    os << "srlg " << gid;
    for (const LinkKey& k : members) os << " " << k.first << "-" << k.second;
    os << "\n";
  }
  for (const auto& [pid, r] : t.announcements)
    os << "prefix " << pid << " " << r << "\n";
  return os.str();
}

namespace detail {

// Undirected links torn down by a failure, including single-level SRLG
// expansion: any group containing a directly failed link fails whole.
inline std::set<LinkKey> expansion_of(const Topology& t,
                                      const std::set<LinkKey>& direct) {
  std::set<LinkKey> out = direct;
  for (const auto& [gid, members] : t.srlgs) {
    bool hit = false;
    for (const LinkKey& k : direct)
      if (members.count(k)) {
        hit = true;
        break;
      }
    if (hit) out.insert(members.begin(), members.end());
  }
  return out;
}

}  // namespace detail

// The set of undirected links a failure removes (after SRLG expansion).
inline std::set<LinkKey> failed_links(const Topology& t,
                                      const FailureSpec& f) {
  std::set<LinkKey> direct;
  switch (f.kind) {
    case FailureSpec::Kind::link: {
      LinkKey k = undirected(f.a, f.b);
      if (!t.has_link(k.first, k.second))
        throw ValidationError("unknown link " + f.label());
      direct.insert(k);
      break;
    }
    case FailureSpec::Kind::router: {
      if (!t.has_router(f.a))
        throw ValidationError("unknown router " + f.label());
      for (RouterId n : t.neighbors(f.a)) direct.insert(undirected(f.a, n));
      break;
    }
    case FailureSpec::Kind::srlg: {
      auto it = t.srlgs.find(f.srlg_id);
      if (it == t.srlgs.end())
        throw ValidationError("unknown srlg " + f.label());
      direct = it->second;
      break;
    }
  }
  return detail::expansion_of(t, direct);
}

// Post-failure topology: torn-down links removed in both directions, a
// failed router removed outright. SRLG membership of removed links is
// dropped; groups left with fewer than 2 members dissolve.
inline Topology remove_component(const Topology& t, const FailureSpec& f) {
  std::set<LinkKey> gone = failed_links(t, f);
  Topology out;
  std::optional<RouterId> dead;
  if (f.kind == FailureSpec::Kind::router) dead = f.a;

  for (const auto& [id, info] : t.routers)
    if (!dead || id != *dead) out.routers[id] = info;
  for (const auto& [from, row] : t.adj) {
    if (dead && from == *dead) continue;
    for (const auto& [to, l] : row) {
      if (dead && to == *dead) continue;
      if (gone.count(undirected(from, to))) continue;
      out.adj[from][to] = l;
    }
  }
  for (const auto& [gid, members] : t.srlgs) {
    std::set<LinkKey> kept;
    for (const LinkKey& k : members)
      if (out.has_link(k.first, k.second)) kept.insert(k);
    if (kept.size() >= 2) out.srlgs[gid] = std::move(kept);
  }
  for (const auto& [pid, r] : t.announcements)
    if (out.has_router(r)) out.announcements[pid] = r;
  return out;
}

struct UnprotectablePair {
  FailureSpec failure;
  RouterId destination = 0;

  friend bool operator==(const UnprotectablePair& x,
                         const UnprotectablePair& y) {
    return x.failure == y.failure && x.destination == y.destination;
  }
};

struct ProtectReport {
  std::vector<UnprotectablePair> pairs;

  bool clean() const { return pairs.empty(); }
  bool clean_for(FailureSpec::Kind kind) const {
    for (const auto& p : pairs)
      if (p.failure.kind == kind) return false;
    return true;
  }
  std::set<RouterId> destinations_for(const FailureSpec& f) const {
    std::set<RouterId> out;
    for (const auto& p : pairs)
      if (p.failure == f) out.insert(p.destination);
    return out;
  }
};

namespace detail {

inline std::set<RouterId> reachable_from(const Topology& t, RouterId src) {
  std::set<RouterId> seen;
  std::vector<RouterId> stack{src};
  while (!stack.empty()) {
    RouterId r = stack.back();
    stack.pop_back();
    if (!seen.insert(r).second) continue;
    for (RouterId n : t.neighbors(r)) stack.push_back(n);
  }
  return seen;
}

}  // namespace detail

// For every single failure (each physical link, each router, each SRLG
// group) lists the destinations some surviving router cannot reach in the
// post-failure topology. Empty report: full single-failure recovery is
// attainable on this graph.
inline ProtectReport validate_protectable(const Topology& t) {
  ProtectReport report;
  std::vector<FailureSpec> failures;
  for (const LinkKey& k : t.physical_links())
    failures.push_back(FailureSpec::link_failure(k.first, k.second));
  for (const auto& [id, info] : t.routers)
    failures.push_back(FailureSpec::router_failure(id));
  for (const auto& [gid, members] : t.srlgs)
    failures.push_back(FailureSpec::srlg_failure(gid));

  for (const FailureSpec& f : failures) {
    Topology post = remove_component(t, f);
    std::set<RouterId> bad;
    for (const auto& [src, info] : post.routers) {
      auto seen = detail::reachable_from(post, src);
      if (seen.size() == post.routers.size()) continue;
      for (const auto& [dst, dinfo] : post.routers)
        if (!seen.count(dst)) bad.insert(dst);
    }
    for (RouterId d : bad) report.pairs.push_back({f, d});
  }
  return report;
}

}  // namespace feps
