// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see the accompanying LICENSE file.
#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rpmesh/lists.hpp"
#include "rpmesh/time.hpp"

namespace rpmesh {

// Parameters of the vote and of failure handling, shared by every component.
struct ConsensusConfig {
  double c = 0.5;
  Duration staleness_tolerance = hours(1);
  Duration poll_period = sec(10);
  Duration blacklist_expiry = hours(24);
  double stall_fraction = 0.9;
  Duration global_timeout = sec(300);
};

// The relying party gives each connection a quarter of its global timeout.
inline Duration connection_timeout(const ConsensusConfig& c) {
  return c.global_timeout / 4;
}

// A connection older than this is considered stalled.
inline Duration stall_threshold(const ConsensusConfig& c) {
  return Duration(static_cast<std::int64_t>(
      c.stall_fraction * static_cast<double>(connection_timeout(c).count())));
}

enum class NodeMode { Sim, Live };

struct NodeConfig {
  ConsensusConfig consensus;
  NodeMode mode = NodeMode::Sim;

  std::string listen_host = "0.0.0.0";
  std::string advertised_host;  // address peers reach this node under
  std::uint16_t https_port = kDefaultNodePort;
  std::uint16_t rtr_port = 8323;
  bool rtr_tls = false;

  Duration refresh_interval = sec(600);  // sleep between validation cycles
  Duration status_poll = sec(1);         // relying-party poll cadence
  Duration peer_timeout = sec(5);        // per-peer fetch timeout
  bool tal_cache = true;  // keep a failed TAL's last output until stale

  std::vector<std::string> tals = {"afrinic", "apnic", "arin", "lacnic", "ripe"};

  std::string cert_file;
  std::string key_file;
  std::string root_file;
  std::string peers_file;
  std::string data_dir = ".";
  std::string scenario_file;  // sim mode
  std::string rp_command;     // live mode external relying party

  std::uint32_t node_index = 0;
  std::uint64_t seed = 1;
};

inline PeerAddress self_address(const NodeConfig& c) {
  PeerAddress a;
  a.host = c.advertised_host.empty() ? "127.0.0.1" : c.advertised_host;
  a.port = c.https_port;
  return a;
}

// Named parameter profiles. "experiment-a" is the fast-refresh setting,
// "experiment-b" the slow one; both keep every other default.
inline void apply_profile(NodeConfig& cfg, const std::string& name) {
  if (name == "experiment-a") {
    cfg.refresh_interval = sec(10);
  } else if (name == "experiment-b") {
    cfg.refresh_interval = sec(600);
  } else {
    throw ParseError("unknown profile: " + name);
  }
}

inline void validate_config(const NodeConfig& cfg) {
  if (cfg.consensus.c < 0.0 || cfg.consensus.c > 1.0) {
    throw ParseError("consensus_factor must be in [0,1]");
  }
  if (cfg.consensus.stall_fraction <= 0.0 || cfg.consensus.stall_fraction > 1.0) {
    throw ParseError("stall_fraction must be in (0,1]");
  }
  const struct { const char* name; Duration d; } durations[] = {
      {"staleness_tolerance", cfg.consensus.staleness_tolerance},
      {"poll_period", cfg.consensus.poll_period},
      {"blacklist_expiry", cfg.consensus.blacklist_expiry},
      {"global_timeout", cfg.consensus.global_timeout},
      {"refresh_interval", cfg.refresh_interval},
      {"status_poll", cfg.status_poll},
      {"peer_timeout", cfg.peer_timeout},
  };
  for (const auto& [name, d] : durations) {
    if (d <= Duration::zero()) {
      throw ParseError(std::string(name) + " must be positive");
    }
  }
  if (cfg.https_port == cfg.rtr_port) {
    throw ParseError("https_port and rtr_port must be distinct");
  }
  if (cfg.tals.empty()) throw ParseError("tals must not be empty");
}

// Applies one key=value setting. Shared by the config parser and by
// scenario-embedded parameter overrides.
inline void apply_config_kv(NodeConfig& cfg, const std::string& k,
                            const std::string& v) {
  auto parse_bool = [](const std::string& k, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParseError(k + ": expected a boolean, got '" + v + "'");
  };
  auto parse_port = [](const std::string& k, const std::string& v) {
    int p = 0;
    try {
      p = std::stoi(v);
    } catch (const std::exception&) {
      throw ParseError(k + ": bad port '" + v + "'");
    }
    if (p < 1 || p > 65535) throw ParseError(k + ": port out of range");
    return static_cast<std::uint16_t>(p);
  };
  auto parse_real = [](const std::string& k, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ParseError(k + ": bad number '" + v + "'");
    }
  };

  try {
    if (k == "mode") {
      if (v == "sim") cfg.mode = NodeMode::Sim;
      else if (v == "live") cfg.mode = NodeMode::Live;
      else throw ParseError("mode: expected sim or live");
    } else if (k == "listen_host") {
      cfg.listen_host = v;
    } else if (k == "advertised_host") {
      cfg.advertised_host = v;
    } else if (k == "https_port") {
      cfg.https_port = parse_port(k, v);
    } else if (k == "rtr_port") {
      cfg.rtr_port = parse_port(k, v);
    } else if (k == "rtr_tls") {
      cfg.rtr_tls = parse_bool(k, v);
    } else if (k == "consensus_factor") {
      cfg.consensus.c = parse_real(k, v);
    } else if (k == "staleness_tolerance") {
      cfg.consensus.staleness_tolerance = parse_duration(v);
    } else if (k == "poll_period") {
      cfg.consensus.poll_period = parse_duration(v);
    } else if (k == "blacklist_expiry") {
      cfg.consensus.blacklist_expiry = parse_duration(v);
    } else if (k == "stall_fraction") {
      cfg.consensus.stall_fraction = parse_real(k, v);
    } else if (k == "global_timeout") {
      cfg.consensus.global_timeout = parse_duration(v);
    } else if (k == "refresh_interval") {
      cfg.refresh_interval = parse_duration(v);
    } else if (k == "status_poll") {
      cfg.status_poll = parse_duration(v);
    } else if (k == "peer_timeout") {
      cfg.peer_timeout = parse_duration(v);
    } else if (k == "tal_cache") {
      cfg.tal_cache = parse_bool(k, v);
    } else if (k == "tals") {
      cfg.tals.clear();
      std::istringstream ts(v);
      std::string tal;
      while (std::getline(ts, tal, ',')) {
        if (!tal.empty()) cfg.tals.push_back(tal);
      }
    } else if (k == "cert_file") {
      cfg.cert_file = v;
    } else if (k == "key_file") {
      cfg.key_file = v;
    } else if (k == "root_file") {
      cfg.root_file = v;
    } else if (k == "peers_file") {
      cfg.peers_file = v;
    } else if (k == "data_dir") {
      cfg.data_dir = v;
    } else if (k == "scenario_file") {
      cfg.scenario_file = v;
    } else if (k == "rp_command") {
      cfg.rp_command = v;
    } else if (k == "node_index") {
      cfg.node_index = static_cast<std::uint32_t>(std::stoul(v));
    } else if (k == "seed") {
      cfg.seed = std::stoull(v);
    } else {
      throw ParseError("unknown config key: " + k);
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError(k + ": bad value '" + v + "'");
  }
}

// Flat key=value format with '#' comments. A "profile" key is applied first
// so explicit keys override it regardless of their position in the file.
inline NodeConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  detail::for_each_data_line(text, [&](const std::string& line) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value: " + line);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  });

  NodeConfig cfg;
  for (const auto& [k, v] : pairs) {
    if (k == "profile") apply_profile(cfg, v);
  }
  for (const auto& [k, v] : pairs) {
    if (k != "profile") apply_config_kv(cfg, k, v);
  }
  validate_config(cfg);
  return cfg;
}

// Environment variables override file values for paths and ports, so one
// config can be shared across containers.
inline void apply_env_overrides(NodeConfig& cfg) {
  const struct { const char* env; std::string* target; } paths[] = {
      {"RPMESH_CERT_FILE", &cfg.cert_file},
      {"RPMESH_KEY_FILE", &cfg.key_file},
      {"RPMESH_ROOT_FILE", &cfg.root_file},
      {"RPMESH_PEERS_FILE", &cfg.peers_file},
      {"RPMESH_DATA_DIR", &cfg.data_dir},
      {"RPMESH_SCENARIO_FILE", &cfg.scenario_file},
      {"RPMESH_LISTEN_HOST", &cfg.listen_host},
      {"RPMESH_ADVERTISED_HOST", &cfg.advertised_host},
  };
  for (const auto& [env, target] : paths) {
    if (const char* v = std::getenv(env)) *target = v;
  }
  if (const char* v = std::getenv("RPMESH_HTTPS_PORT")) {
    cfg.https_port = static_cast<std::uint16_t>(std::stoi(v));
  }
  if (const char* v = std::getenv("RPMESH_RTR_PORT")) {
    cfg.rtr_port = static_cast<std::uint16_t>(std::stoi(v));
  }
}

inline NodeConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  NodeConfig cfg = parse_config(buf.str());
  apply_env_overrides(cfg);
  validate_config(cfg);
  return cfg;
}

}  // namespace rpmesh
