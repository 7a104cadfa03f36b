// SPDX-License-Identifier: MIT
//
// Operator command line: simulation runs, cross-node audits, reference
// checks, traffic extrapolation, certificate generation.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rpmesh/certs.hpp"
#include "rpmesh/config.hpp"
#include "rpmesh/fsio.hpp"
#include "rpmesh/harness.hpp"
#include "rpmesh/ops.hpp"
#include "rpmesh/sim_rpki.hpp"
#include "rpmesh/transport.hpp"

namespace {

rpmesh::ScenarioConfig load_scenario(const std::string& name) {
  if (rpmesh::file_exists(name))
    return rpmesh::parse_scenario(rpmesh::read_text_file(name));
  return rpmesh::scenario_preset(name);
}

int cmd_run(std::size_t nodes, const std::string& scenario_arg, double factor,
            const std::string& refresh, const std::string& duration,
            std::uint64_t seed, const std::string& out,
            const std::string& topology) {
  rpmesh::ClusterOptions o;
  o.scenario = load_scenario(scenario_arg);
  o.n_nodes = nodes;
  o.seed = seed;
  if (factor >= 0) o.base.consensus.c = factor;
  if (!refresh.empty()) o.scenario.profile["refresh_interval"] = refresh;
  if (topology == "chain") o.topology = rpmesh::ClusterOptions::Topology::Chain;

  const rpmesh::Duration dur = rpmesh::parse_duration(duration);
  rpmesh::RunResult r = rpmesh::run_cluster(std::move(o), dur);
  rpmesh::write_text_file(out, r.csv);

  const auto& samples = r.cluster->samples();
  const auto& ev = r.cluster->events();
  std::cout << "scenario " << scenario_arg << ": " << nodes << " nodes, "
            << samples.size() << " samples over " << duration << "\n";
  if (!samples.empty()) {
    const auto& last = samples.back();
    std::cout << "final consensus " << last.consensus << " of union "
              << last.union_size << "; voted skiplist";
    if (last.voted_skiplist.empty()) std::cout << " empty";
    for (const auto& d : last.voted_skiplist) std::cout << " " << d;
    std::cout << "\n";
  }
  std::cout << ev.completions.size() << " validation cycles, "
            << ev.skiplist_adds.size() << " skiplist additions, "
            << ev.admissions.size() << " peer admissions, "
            << ev.warnings.size() << " warnings\n";
  std::cout << "metrics written to " << out << "\n";
  return 0;
}

int cmd_audit(const std::string& nodes_file, const std::string& cert,
              const std::string& key, const std::string& root,
              const std::string& timeout) {
  const rpmesh::Peerlist pl =
      rpmesh::parse_peerlist(rpmesh::read_text_file(nodes_file));
  rpmesh::HttpsTransport t(cert, key, root, 0,
                           rpmesh::parse_duration(timeout));
  std::vector<rpmesh::PeerAddress> nodes(pl.peers.begin(), pl.peers.end());
  const rpmesh::AuditReport r = rpmesh::audit_masters(t, nodes);
  std::cout << rpmesh::format_audit(r);
  return r.consistent() ? 0 : 1;
}

int cmd_verify(const std::string& master_file, const std::string& reference_file) {
  const rpmesh::VrpSet master =
      rpmesh::parse_vrp_file(rpmesh::read_text_file(master_file));
  const rpmesh::VrpSet reference =
      rpmesh::parse_vrp_file(rpmesh::read_text_file(reference_file));
  const rpmesh::PresenceReport r = rpmesh::verify_presence(master, reference);
  std::cout << rpmesh::format_presence(r);
  return r.clean() ? 0 : 1;
}

int cmd_traffic(double n_rp, double n_node, const std::string& s_obj,
                const std::string& s_vrp) {
  rpmesh::TrafficParams p;
  p.n_rp = n_rp;
  p.n_node = n_node;
  p.s_obj = rpmesh::parse_size(s_obj);
  p.s_vrp = rpmesh::parse_size(s_vrp);
  const rpmesh::TrafficReport r = rpmesh::traffic_extrapolation(p);
  std::cout << rpmesh::format_traffic(p, r);
  return 0;
}

int cmd_certgen(const std::string& out_dir, const std::string& root_cn,
                const std::vector<std::string>& hosts) {
  const rpmesh::Identity root = rpmesh::make_root_ca(root_cn);
  rpmesh::write_identity(root, out_dir + "/root.pem", out_dir + "/root.key");
  std::cout << "wrote " << out_dir << "/root.pem\n";
  for (const auto& h : hosts) {
    const rpmesh::Identity leaf = rpmesh::make_leaf(root, h);
    rpmesh::write_identity(leaf, out_dir + "/" + h + ".pem",
                           out_dir + "/" + h + ".key");
    std::cout << "wrote " << out_dir << "/" << h << ".pem\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relying-party mesh operator tool"};
  app.require_subcommand(1);

  // run
  std::size_t nodes = 5;
  std::string scenario = "benign-A";
  double factor = -1;
  std::string refresh;
  std::string duration = "30m";
  std::uint64_t seed = 1;
  std::string out = "metrics.csv";
  std::string topology = "full";
  auto* run = app.add_subcommand("run", "run a simulated cluster");
  run->add_option("--nodes", nodes, "cluster size");
  run->add_option("--scenario", scenario, "preset name or scenario file");
  run->add_option("--consensus-factor", factor, "vote factor c in [0,1]");
  run->add_option("--refresh", refresh, "refresh interval, e.g. 10s");
  run->add_option("--duration", duration, "virtual run length, e.g. 30m");
  run->add_option("--seed", seed, "deterministic seed");
  run->add_option("--out", out, "metrics CSV path");
  run->add_option("--topology", topology, "bootstrap topology: full or chain")
      ->check(CLI::IsMember({"full", "chain"}));

  // audit
  std::string nodes_file, cert, key, root, timeout = "5s";
  auto* audit = app.add_subcommand("audit", "compare voted sets across nodes");
  audit->add_option("--nodes-file", nodes_file, "peerlist file of nodes")
      ->required();
  audit->add_option("--cert", cert, "client certificate")->required();
  audit->add_option("--key", key, "client key")->required();
  audit->add_option("--root", root, "trust root")->required();
  audit->add_option("--timeout", timeout, "per-fetch timeout");

  // verify
  std::string master_file, reference_file;
  auto* verify = app.add_subcommand(
      "verify", "check voted entries against a reference set");
  verify->add_option("--master", master_file, "voted VRP file")->required();
  verify->add_option("--reference", reference_file, "reference VRP file")
      ->required();

  // traffic
  double n_rp = 0, n_node = 0;
  std::string s_obj, s_vrp;
  auto* traffic =
      app.add_subcommand("traffic", "extrapolate repository fetch volume");
  traffic->add_option("--n-rp", n_rp, "relying parties today")->required();
  traffic->add_option("--n-node", n_node, "nodes fetching objects")->required();
  traffic->add_option("--s-obj", s_obj, "repository size, e.g. 562MB")
      ->required();
  traffic->add_option("--s-vrp", s_vrp, "validated set size, e.g. 6.2MB")
      ->required();

  // certgen
  std::string out_dir = ".", root_cn = "rpmesh root";
  std::vector<std::string> hosts;
  auto* certgen =
      app.add_subcommand("certgen", "generate a root and node identities");
  certgen->add_option("--out-dir", out_dir, "output directory");
  certgen->add_option("--root-cn", root_cn, "root common name");
  certgen->add_option("--host", hosts, "host to issue a certificate for");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run)
      return cmd_run(nodes, scenario, factor, refresh, duration, seed, out,
                     topology);
    if (*audit) return cmd_audit(nodes_file, cert, key, root, timeout);
    if (*verify) return cmd_verify(master_file, reference_file);
    if (*traffic) return cmd_traffic(n_rp, n_node, s_obj, s_vrp);
    if (*certgen) return cmd_certgen(out_dir, root_cn, hosts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
