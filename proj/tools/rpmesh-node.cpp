// SPDX-License-Identifier: MIT
//
// Node daemon. Runs the validation monitor and the peering loop on the wall
// clock, serves the four node documents over mutually authenticated HTTPS,
// and feeds the voted set to an RTR listener for routers.

#include <algorithm>
#include <atomic>
#include <csignal>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "rpmesh/config.hpp"
#include "rpmesh/fsio.hpp"
#include "rpmesh/node.hpp"
#include "rpmesh/node_service.hpp"
#include "rpmesh/rtr.hpp"
#include "rpmesh/sim_rpki.hpp"
#include "rpmesh/transport.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

void log_line(const std::string& msg) {
  std::cerr << rpmesh::format_rfc3339(rpmesh::wall_now()) << " " << msg
            << std::endl;
}

rpmesh::ScenarioConfig load_scenario_for(const rpmesh::NodeConfig& cfg) {
  if (cfg.scenario_file.empty())
    throw std::runtime_error("sim mode needs scenario_file");
  if (rpmesh::file_exists(cfg.scenario_file))
    return rpmesh::parse_scenario(rpmesh::read_text_file(cfg.scenario_file));
  return rpmesh::scenario_preset(cfg.scenario_file);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relying-party mesh node"};
  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file")
      ->required();
  CLI11_PARSE(app, argc, argv);

  try {
    rpmesh::NodeConfig cfg = rpmesh::load_config(config_path);
    if (cfg.cert_file.empty() || cfg.key_file.empty() || cfg.root_file.empty())
      throw std::runtime_error(
          "cert_file, key_file and root_file are required");

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    std::unique_ptr<rpmesh::RpAdapter> adapter;
    rpmesh::DnsBook dnsbook;
    if (cfg.mode == rpmesh::NodeMode::Sim) {
      const rpmesh::ScenarioConfig sc = load_scenario_for(cfg);
      dnsbook = rpmesh::scenario_dnsbook(sc);
      adapter = std::make_unique<rpmesh::SimRpAdapter>(
          sc, cfg.node_index, cfg.consensus, cfg.seed);
    } else {
      adapter = std::make_unique<rpmesh::ExternalRpAdapter>(cfg.rp_command,
                                                            cfg.data_dir);
      const std::string book_path = cfg.data_dir + "/dnsbook.txt";
      if (rpmesh::file_exists(book_path))
        dnsbook = rpmesh::parse_dnsbook(rpmesh::read_text_file(book_path));
      else
        log_line("warning: no " + book_path +
                 "; failures cannot be attributed to publication points");
    }

    rpmesh::Peerlist bootstrap;
    if (!cfg.peers_file.empty() && rpmesh::file_exists(cfg.peers_file))
      bootstrap = rpmesh::parse_peerlist(rpmesh::read_text_file(cfg.peers_file));

    auto transport = std::make_unique<rpmesh::HttpsTransport>(
        cfg.cert_file, cfg.key_file, cfg.root_file, cfg.https_port,
        cfg.peer_timeout);

    rpmesh::NodeCore core(cfg, std::move(adapter), std::move(transport),
                          std::move(dnsbook), bootstrap);

    std::optional<rpmesh::RtrTlsConfig> rtr_tls;
    if (cfg.rtr_tls) rtr_tls = rpmesh::RtrTlsConfig{cfg.cert_file, cfg.key_file};
    rpmesh::RtrServer rtr(cfg.listen_host, cfg.rtr_port, core.cache(), rtr_tls);

    const std::string dir = cfg.data_dir;
    core.hooks.on_publish = [&](const rpmesh::VrpSet& v, rpmesh::TimePoint) {
      rpmesh::write_text_file(dir + "/vrps.json", rpmesh::serialize_vrp_file(v));
      log_line("validation cycle published " + std::to_string(v.size()) +
               " entries");
    };
    core.hooks.on_cycle_complete = [&](rpmesh::TimePoint) {
      rpmesh::write_text_file(
          dir + "/skiplist.txt",
          rpmesh::serialize_skiplist(core.monitor().local_skiplist()));
    };
    core.hooks.on_skiplist_add = [&](const std::string& d, rpmesh::SkipSource s,
                                     rpmesh::TimePoint) {
      log_line("skiplisted " + d + " (" + rpmesh::to_string(s) + ")");
    };
    core.hooks.on_master = [&](const rpmesh::MasterState& m, rpmesh::TimePoint) {
      rpmesh::write_text_file(dir + "/master.json",
                              rpmesh::serialize_vrp_file(m.vrps));
      rpmesh::write_text_file(dir + "/skiplist-voted.txt",
                              rpmesh::serialize_skiplist(m.skiplist));
      rtr.publish(m.vrps);
    };
    core.hooks.on_peer_admitted = [&](const rpmesh::PeerAddress& p,
                                      rpmesh::TimePoint) {
      log_line("admitted peer " + p.to_string());
    };
    core.hooks.on_warning = [&](const std::string& w) {
      log_line("warning: " + w);
    };

    core.boot(rpmesh::wall_now());

    rpmesh::HttpsNodeServer server(core.endpoints(), cfg.cert_file,
                                   cfg.key_file, cfg.root_file,
                                   cfg.listen_host, cfg.https_port);
    server.start();
    rtr.start();
    log_line("serving on " + cfg.listen_host + ":" +
             std::to_string(cfg.https_port) + ", rtr on " +
             std::to_string(rtr.port()));

    rpmesh::TimePoint next_monitor = rpmesh::wall_now();
    rpmesh::TimePoint next_peering =
        rpmesh::wall_now() + cfg.consensus.poll_period;
    while (!g_stop) {
      const rpmesh::TimePoint now = rpmesh::wall_now();
      if (now >= next_monitor) next_monitor = core.monitor_tick(now);
      if (now >= next_peering) next_peering = core.peering_tick(now);
      const rpmesh::TimePoint wake = std::min(next_monitor, next_peering);
      const rpmesh::Duration nap =
          std::min(rpmesh::msec(200),
                   std::max(rpmesh::Duration::zero(), wake - rpmesh::wall_now()));
      std::this_thread::sleep_for(nap);
    }

    log_line("shutting down");
    rtr.stop();
    server.stop();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
}
