#pragma once

// Evaluation rollups over the other modules: how long repair walks are
// compared to the tunnel baseline, how many extra bytes each scheme parks
// in the FIB, and how simulated loss tables line up across modes. Every
// report renders to CSV with a one-line schema header; numbers come out
// the same bytes on every run with the same inputs.

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "feps/fep_calc.hpp"
#include "feps/fib_ext.hpp"
#include "feps/notvia.hpp"
#include "feps/sim.hpp"

namespace feps {

namespace detail {

inline double hist_mean(const std::map<size_t, size_t>& hist) {
  size_t n = 0;
  size_t weighted = 0;
  for (const auto& [len, count] : hist) {
    n += count;
    weighted += len * count;
  }
  return n == 0 ? 0.0 : static_cast<double>(weighted) / static_cast<double>(n);
}

inline std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

}  // namespace detail

// One protected source/destination case under the failure of the source's
// next-hop component, measured as routers visited end to end by each
// repair mechanism. A zero length means that mechanism has no walk for the
// case (its fixed tunnel endpoint is cut off even though a deviation
// exists); such rows stay out of that mechanism's histogram.
struct PathLengthRow {
  RouterId sr = 0;
  RouterId dr = 0;
  FailureSpec failure;
  size_t notvia_len = 0;
  size_t feps_len = 0;
};

struct PathLengthReport {
  std::vector<PathLengthRow> rows;
  std::vector<UnprotectedTriple> unprotected;
  std::map<size_t, size_t> notvia_hist;
  std::map<size_t, size_t> feps_hist;

  double notvia_mean() const { return detail::hist_mean(notvia_hist); }
  double feps_mean() const { return detail::hist_mean(feps_hist); }
};

// Walk every (source, affected destination) pair the deviation tables
// protect and pit the selected deviation plus its plain tail against the
// tunnel walk for the same failure. Rows come out ordered by source, then
// neighbor, then destination.
inline PathLengthReport path_length_report(const Topology& t,
                                           const FepConfig& cfg = {}) {
  PathLengthReport out;
  AllPairsSpf ap(t);
  for (const auto& [sr, info] : t.routers) {
    FepComputation comp = compute_all_feps(t, sr, cfg, &ap);
    for (const auto& [key, vec] : comp.vectors) {
      const auto [ar, dr] = key;
      PathLengthRow row;
      row.sr = sr;
      row.dr = dr;
      row.failure = dr == ar ? FailureSpec::link_failure(sr, ar)
                             : FailureSpec::router_failure(ar);
      row.feps_len = recovery_path(t, ap, vec).routers.size();
      NotViaPath nv = notvia_recovery_path(t, ap, sr, ar, dr);
      if (nv.exists) {
        row.notvia_len = nv.visits();
        ++out.notvia_hist[row.notvia_len];
      }
      ++out.feps_hist[row.feps_len];
      out.rows.push_back(row);
    }
    out.unprotected.insert(out.unprotected.end(), comp.unprotected.begin(),
                           comp.unprotected.end());
  }
  return out;
}

inline std::string pathlen_csv(const PathLengthReport& r) {
  std::ostringstream os;
  os << "sr,dr,failure,notvia_len,feps_len\n";
  for (const PathLengthRow& row : r.rows)
    os << row.sr << ',' << row.dr << ',' << row.failure.label() << ','
       << row.notvia_len << ',' << row.feps_len << '\n';
  return os.str();
}

// Per-router byte bill for both schemes: the pair table costs 3 bytes per
// pair plus 1 per entry holding a reference; the tunnel baseline costs 12
// bytes per extra address entry plus a 4-byte pointer on every ordinary
// entry.
struct OverheadRow {
  RouterId router = 0;
  size_t fep_pairs = 0;
  size_t fep_refs = 0;
  size_t fep_bytes = 0;
  size_t notvia_entries = 0;
  size_t notvia_bytes = 0;
};

struct OverheadReport {
  std::vector<OverheadRow> rows;
  size_t fep_total = 0;
  size_t notvia_total = 0;
  size_t fep_max = 0;
  size_t notvia_max = 0;

  double fep_avg() const {
    return rows.empty() ? 0.0
                        : static_cast<double>(fep_total) /
                              static_cast<double>(rows.size());
  }
  double notvia_avg() const {
    return rows.empty() ? 0.0
                        : static_cast<double>(notvia_total) /
                              static_cast<double>(rows.size());
  }
};

inline OverheadReport overhead_report(const Topology& t) {
  OverheadReport out;
  NetworkFib net = build_network_fib(t);
  for (const auto& [r, fib] : net.routers) {
    OverheadRow row;
    row.router = r;
    row.fep_pairs = fib.pairs.size();
    for (const auto& [prefix, entry] : fib.entries)
      if (entry.ref) ++row.fep_refs;
    row.fep_bytes = fep_overhead_bytes(row.fep_pairs, row.fep_refs);
    row.notvia_entries = notvia_fib_count(t, r);
    row.notvia_bytes =
        notvia_overhead_bytes(row.notvia_entries, fib.entries.size());
    out.fep_total += row.fep_bytes;
    out.notvia_total += row.notvia_bytes;
    out.fep_max = std::max(out.fep_max, row.fep_bytes);
    out.notvia_max = std::max(out.notvia_max, row.notvia_bytes);
    out.rows.push_back(row);
  }
  return out;
}

// Per-router rows first, then total/max/avg summary rows keyed in the
// router column.
inline std::string overhead_csv(const OverheadReport& r) {
  std::ostringstream os;
  os << "router,fep_pairs,fep_ref_entries,fep_bytes,notvia_entries,"
        "notvia_bytes\n";
  for (const OverheadRow& row : r.rows)
    os << row.router << ',' << row.fep_pairs << ',' << row.fep_refs << ','
       << row.fep_bytes << ',' << row.notvia_entries << ','
       << row.notvia_bytes << '\n';
  os << "total,,," << r.fep_total << ",," << r.notvia_total << '\n';
  os << "max,,," << r.fep_max << ",," << r.notvia_max << '\n';
  os << "avg,,," << detail::fixed1(r.fep_avg()) << ",,"
     << detail::fixed1(r.notvia_avg()) << '\n';
  return os.str();
}

// Loss matrix over a batch of simulation runs: one row per flow per run,
// ordered by failure label, then mode, then seed, with flows in scenario
// order inside each run. Counters cover the measurement window only.
inline std::string loss_report(std::vector<SimResult> results) {
  std::stable_sort(
      results.begin(), results.end(),
      [](const SimResult& a, const SimResult& b) {
        auto key = [](const SimResult& r) {
          return std::make_tuple(
              r.failure ? r.failure->label() : std::string("none"),
              std::string(to_string(r.mode)), r.seed);
        };
        return key(a) < key(b);
      });
  std::ostringstream os;
  os << "flow_src,flow_dst,failure,mode,seed,sent,delivered,"
        "dropped_detection_window,dropped_second_failure,"
        "dropped_queue_guard,dropped_unreachable,dropped_queue_full,"
        "loss_percent\n";
  for (const SimResult& res : results) {
    const std::string failure =
        res.failure ? res.failure->label() : std::string("none");
    for (const FlowStats& f : res.flows) {
      os << f.src << ',' << f.dst << ',' << failure << ','
         << to_string(res.mode) << ',' << res.seed << ',' << f.sent_window
         << ',' << f.delivered_window;
      for (size_t c = 0; c < kDropCauses; ++c) os << ',' << f.dropped_window[c];
      os << ',' << detail::fixed3(f.loss_percent()) << '\n';
    }
  }
  return os.str();
}

}  // namespace feps
