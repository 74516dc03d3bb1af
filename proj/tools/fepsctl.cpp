// Command-line front end for the fast-reroute toolkit. Subcommands map
// one-to-one onto the library surface: validate a topology, compute
// deviations, build and dump forwarding tables, compare against the tunnel
// baseline, and run loss simulations. All tabular output is CSV with a
// one-line schema header; lines starting with '#' echo run parameters.
//
// Exit codes: 0 ok, 1 usage, 2 invalid input, 3 runtime failure.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "feps/dataplane.hpp"
#include "feps/report.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw feps::ValidationError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Files created by the current subcommand, unlinked if it fails so a
// crashed run never leaves half-written results behind.
struct Outputs {
  std::vector<std::string> written;

  void write(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
    if (!out) throw std::runtime_error("short write on " + path);
    written.push_back(path);
  }
  void discard() {
    for (const std::string& p : written) std::remove(p.c_str());
  }
};

std::string render_sequence(const std::vector<feps::RouterId>& seq) {
  std::string out;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(seq[i]);
  }
  return out;
}

int run_validate(const std::string& topo_path) {
  feps::Topology t = feps::load_topology(slurp(topo_path));
  feps::ProtectReport rep = feps::validate_protectable(t);
  std::cout << "failure,unreachable_destination\n";
  for (const auto& p : rep.pairs)
    std::cout << p.failure.label() << ',' << p.destination << '\n';
  if (!rep.clean()) {
    std::cerr << "fepsctl: " << rep.pairs.size()
              << " unprotectable failure/destination pairs\n";
    return 2;
  }
  return 0;
}

int run_compute(const std::string& topo_path, std::optional<int> only_sr) {
  feps::Topology t = feps::load_topology(slurp(topo_path));
  if (only_sr && !t.has_router(static_cast<feps::RouterId>(*only_sr)))
    throw feps::ValidationError("no router " + std::to_string(*only_sr));
  feps::AllPairsSpf ap(t);
  std::cout << "sr,ar,dr,level,routers,cost_fep,num_fep,zprime\n";
  size_t unprotected = 0;
  for (const auto& [sr, info] : t.routers) {
    if (only_sr && sr != *only_sr) continue;
    feps::FepComputation comp = feps::compute_all_feps(t, sr, {}, &ap);
    for (const auto& [key, v] : comp.vectors)
      std::cout << v.sr << ',' << v.ar << ',' << v.dr << ','
                << feps::to_string(v.level) << ','
                << render_sequence(v.routers) << ',' << v.cost_fep << ','
                << v.num_fep << ',' << v.zprime() << '\n';
    unprotected += comp.unprotected.size();
    for (const auto& u : comp.unprotected)
      std::cerr << "fepsctl: no deviation for sr " << u.sr << " dr " << u.dr
                << " under " << u.failure.label() << '\n';
  }
  return unprotected == 0 ? 0 : 2;
}

int run_build_fib(const std::string& topo_path, const std::string& out_dir,
                  Outputs& outs) {
  feps::Topology t = feps::load_topology(slurp(topo_path));
  feps::NetworkFib net = feps::build_network_fib(t, {}, false);
  std::vector<feps::SignalResult> sigs = feps::fep_signal_all(t, net);
  for (const feps::SignalResult& s : sigs)
    if (!s.confirmed)
      throw feps::ProtocolError("signaling failed for router " +
                                std::to_string(s.sr) + " sequence " +
                                render_sequence(s.sequence));

  std::ostringstream fib;
  fib << "owner,prefix,announced_by,next_hop,ref\n";
  for (const auto& [owner, rf] : net.routers)
    for (const auto& [prefix, e] : rf.entries) {
      fib << owner << ',' << prefix << ',' << e.announced_by << ','
          << e.next_hop << ',';
      if (e.ref) fib << static_cast<int>(*e.ref);
      fib << '\n';
    }

  std::ostringstream pairs;
  pairs << "owner,index,mark,ni,confirmed\n";
  for (const auto& [owner, rf] : net.routers)
    for (size_t i = 0; i < rf.pairs.size(); ++i) {
      char mark[8];
      std::snprintf(mark, sizeof(mark), "0x%04x", rf.pairs[i].mark);
      pairs << owner << ',' << i << ',' << mark << ','
            << static_cast<int>(rf.pairs[i].ni) << ','
            << (rf.pairs[i].confirmed ? 1 : 0) << '\n';
    }

  std::string bytes = feps::overhead_csv(feps::overhead_report(t));
  if (out_dir.empty()) {
    std::cout << fib.str() << '\n' << pairs.str() << '\n' << bytes;
  } else {
    outs.write(out_dir + "/fib.csv", fib.str());
    outs.write(out_dir + "/pairs.csv", pairs.str());
    outs.write(out_dir + "/overhead.csv", bytes);
  }
  return 0;
}

int run_compare(const std::string& topo_path, const std::string& out_dir,
                Outputs& outs) {
  feps::Topology t = feps::load_topology(slurp(topo_path));
  std::string pathlen = feps::pathlen_csv(feps::path_length_report(t));
  std::string bytes = feps::overhead_csv(feps::overhead_report(t));
  if (out_dir.empty()) {
    std::cout << pathlen << '\n' << bytes;
  } else {
    outs.write(out_dir + "/pathlen.csv", pathlen);
    outs.write(out_dir + "/overhead.csv", bytes);
  }
  return 0;
}

struct SimOverrides {
  std::optional<std::string> mode;
  std::optional<uint64_t> seed;
  std::optional<int64_t> window_ms;
  std::optional<std::string> guard;

  void apply(feps::Scenario& sc) const {
    if (mode) sc.cfg.mode = *mode == "ospf" ? feps::SimMode::ospf
                                            : feps::SimMode::feps;
    if (seed) sc.cfg.seed = *seed;
    if (window_ms) sc.cfg.window_ns = *window_ms * 1000000;
    if (guard) sc.cfg.guard = *guard == "on";
  }
};

std::string run_header(const feps::SimResult& r, const std::string& source) {
  char trace[24];
  std::snprintf(trace, sizeof(trace), "0x%016llx",
                static_cast<unsigned long long>(r.trace_hash));
  std::ostringstream os;
  os << "# scenario=" << source << " mode=" << feps::to_string(r.mode)
     << " seed=" << r.seed << " failure="
     << (r.failure ? r.failure->label() : std::string("none"))
     << " trace=" << trace << '\n';
  return os.str();
}

int run_simulate(const std::string& scenario_path, const SimOverrides& ov,
                 const std::string& out_file, Outputs& outs) {
  feps::Scenario sc = feps::load_scenario(scenario_path);
  ov.apply(sc);
  feps::SimResult res = feps::simulate(sc);
  std::string body =
      run_header(res, scenario_path) + feps::loss_report({res});
  if (out_file.empty())
    std::cout << body;
  else
    outs.write(out_file, body);
  return 0;
}

int run_sweep(const std::vector<std::string>& scenario_paths,
              const SimOverrides& ov, int jobs, const std::string& out_file,
              Outputs& outs) {
  struct Job {
    feps::Scenario sc;
    std::string source;
  };
  std::vector<Job> grid;
  for (const std::string& path : scenario_paths) {
    for (feps::SimMode mode : {feps::SimMode::ospf, feps::SimMode::feps}) {
      Job j;
      j.sc = feps::load_scenario(path);
      ov.apply(j.sc);
      j.sc.cfg.mode = mode;
      j.source = path;
      grid.push_back(std::move(j));
    }
  }

  std::vector<feps::SimResult> results(grid.size());
  std::vector<std::string> errors(grid.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < grid.size();
         i = next.fetch_add(1)) {
      try {
        results[i] = feps::simulate(grid[i].sc);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  for (size_t i = 0; i < grid.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error(grid[i].source + ": " + errors[i]);

  std::ostringstream body;
  for (size_t i = 0; i < grid.size(); ++i)
    body << run_header(results[i], grid[i].source);
  body << feps::loss_report(results);
  if (out_file.empty())
    std::cout << body.str();
  else
    outs.write(out_file, body.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fast-reroute toolkit: deviation tables, forwarding-table "
               "extensions, tunnel-baseline comparison, loss simulation"};
  app.require_subcommand(1);

  std::string topo_path;
  std::string scenario_path;
  std::vector<std::string> scenario_paths;
  std::string out_path;
  std::optional<int> only_sr;
  SimOverrides ov;
  std::string mode_s, guard_s;
  uint64_t seed = 0;
  int64_t window_ms = 0;
  int jobs = 1;

  CLI::App* validate = app.add_subcommand(
      "validate", "List failure/destination pairs no deviation can cover");
  validate->add_option("topology", topo_path, "topology file")->required();

  CLI::App* compute = app.add_subcommand(
      "compute-feps", "Deviation table CSV for one or all routers");
  compute->add_option("topology", topo_path, "topology file")->required();
  int sr_arg = -1;
  CLI::Option* sr_opt =
      compute->add_option("--sr", sr_arg, "only this source router");

  CLI::App* build = app.add_subcommand(
      "build-fib", "Forwarding tables, pair tables and byte accounting");
  build->add_option("topology", topo_path, "topology file")->required();
  build->add_option("--out", out_path, "directory for fib/pairs/overhead CSVs");

  CLI::App* compare = app.add_subcommand(
      "compare-notvia", "Walk lengths and byte costs against the baseline");
  compare->add_option("topology", topo_path, "topology file")->required();
  compare->add_option("--out", out_path,
                      "directory for pathlen/overhead CSVs");

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run one scenario and emit its loss table");
  simulate->add_option("scenario", scenario_path, "scenario file")->required();
  CLI::Option* sim_mode =
      simulate->add_option("--mode", mode_s, "forwarding mode")
          ->check(CLI::IsMember({"ospf", "feps"}));
  CLI::Option* sim_seed =
      simulate->add_option("--seed", seed, "override scenario seed");
  CLI::Option* sim_window =
      simulate->add_option("--window", window_ms, "measurement window, ms")
          ->check(CLI::PositiveNumber);
  CLI::Option* sim_guard =
      simulate->add_option("--guard", guard_s, "queue guard")
          ->check(CLI::IsMember({"on", "off"}));
  simulate->add_option("--out", out_path, "write loss CSV here");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Run scenarios under both modes and merge the loss tables");
  sweep->add_option("scenarios", scenario_paths, "scenario files")
      ->required()
      ->expected(-1);
  CLI::Option* sweep_seed =
      sweep->add_option("--seed", seed, "override every scenario's seed");
  sweep->add_option("--jobs", jobs, "parallel runs")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_path, "write merged loss CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*sr_opt) only_sr = sr_arg;
  if (*sim_mode) ov.mode = mode_s;
  if (*sim_seed || *sweep_seed) ov.seed = seed;
  if (*sim_window) ov.window_ms = window_ms;
  if (*sim_guard) ov.guard = guard_s;

  Outputs outs;
  try {
    if (validate->parsed()) return run_validate(topo_path);
    if (compute->parsed()) return run_compute(topo_path, only_sr);
    if (build->parsed()) return run_build_fib(topo_path, out_path, outs);
    if (compare->parsed()) return run_compare(topo_path, out_path, outs);
    if (simulate->parsed())
      return run_simulate(scenario_path, ov, out_path, outs);
    if (sweep->parsed())
      return run_sweep(scenario_paths, ov, jobs, out_path, outs);
  } catch (const feps::Error& e) {
    outs.discard();
    std::cerr << "fepsctl: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    outs.discard();
    std::cerr << "fepsctl: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
