// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see the accompanying LICENSE file.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpmesh/config.hpp"
#include "rpmesh/connlog.hpp"
#include "rpmesh/rng.hpp"
#include "rpmesh/rp_adapter.hpp"
#include "rpmesh/time.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

// Failure behavior of one simulated publication point. `afflicted_nodes`
// restricts a behavior to specific node indices (empty = every node), which
// lets a scenario hit exactly f of n nodes with a fault.
struct PpBehavior {
  enum class Kind { Benign, Flaky, Jitter, Stalling, Crashing };
  Kind kind = Kind::Benign;
  double availability = 1.0;      // Flaky: probability a visit succeeds
  double drop = 0.0;              // Jitter: per-VRP drop probability
  Duration hold = Duration::zero();  // Stalling: how long the PP holds on
  std::set<std::uint32_t> afflicted_nodes;

  bool applies_to(std::uint32_t node_index) const {
    return afflicted_nodes.empty() || afflicted_nodes.count(node_index) != 0;
  }
};

struct SimPp {
  std::string domain;
  std::string ip;
  PpBehavior behavior;
  VrpSet contribution;
};

// Time-triggered behavior change, e.g. a PP turning hostile mid-run.
struct BehaviorSwitch {
  TimePoint at{};
  std::string domain;
  PpBehavior to;
};

struct ScenarioConfig {
  std::map<std::string, std::vector<SimPp>> tals;
  std::vector<BehaviorSwitch> schedule;
  std::uint64_t seed = 1;
  Duration latency_lo = msec(50);   // per-visit duration, uniform
  Duration latency_hi = msec(500);
  // Node parameter overrides this scenario expects (config key=value).
  std::map<std::string, std::string> profile;
};

// Behavior of a PP at an instant: the base behavior overridden by the latest
// schedule entry whose time has passed.
inline PpBehavior behavior_at(const ScenarioConfig& sc, const SimPp& pp,
                              TimePoint t) {
  PpBehavior b = pp.behavior;
  TimePoint latest = TimePoint::min();
  for (const auto& sw : sc.schedule) {
    if (sw.domain == pp.domain && sw.at <= t && sw.at >= latest) {
      latest = sw.at;
      b = sw.to;
    }
  }
  return b;
}

inline DnsBook scenario_dnsbook(const ScenarioConfig& sc) {
  DnsBook book;
  for (const auto& [_, pps] : sc.tals) {
    for (const auto& pp : pps) book.add(pp.domain, pp.ip);
  }
  return book;
}

// Ground truth: the union of every PP's contribution.
inline VrpSet scenario_union(const ScenarioConfig& sc) {
  VrpSet u;
  for (const auto& [_, pps] : sc.tals) {
    for (const auto& pp : pps) u.merge(pp.contribution);
  }
  return u;
}

inline const SimPp* find_pp(const ScenarioConfig& sc, const std::string& domain) {
  for (const auto& [_, pps] : sc.tals) {
    for (const auto& pp : pps) {
      if (pp.domain == domain) return &pp;
    }
  }
  return nullptr;
}

// A finished simulated validation: final outcome plus the packet-event stream
// it produced along the way (time-sorted).
struct SimValidation {
  ValidationOutcome outcome;
  std::vector<PacketEvent> events;
};

// Walks the TAL's publication points in order, emitting connection events and
// collecting contributions. Skiplisted PPs are never contacted. The visit
// clock advances by a sampled latency per PP; a stalling PP is cut off by the
// relying party's own per-connection timeout if nobody kills the run first.
inline SimValidation simulate_validation(const std::string& tal,
                                         const std::set<std::string>& skiplist,
                                         const ScenarioConfig& sc,
                                         std::uint32_t node_index,
                                         TimePoint start, std::mt19937_64& rng,
                                         const ConsensusConfig& ccfg) {
  const auto it = sc.tals.find(tal);
  if (it == sc.tals.end()) throw std::invalid_argument("unknown TAL: " + tal);

  SimValidation sv;
  sv.outcome.tal = tal;
  sv.outcome.started_at = start;
  VrpSet collected;
  TimePoint t = start;
  bool crashed = false;

  for (const auto& pp : it->second) {
    if (skiplist.count(pp.domain)) continue;
    PpBehavior b = behavior_at(sc, pp, t);
    if (!b.applies_to(node_index)) b.kind = PpBehavior::Kind::Benign;
    const Duration visit = uniform_duration(rng, sc.latency_lo, sc.latency_hi);
    const Duration setup = visit / 4;

    switch (b.kind) {
      case PpBehavior::Kind::Benign:
        sv.events.push_back(syn_out(pp.ip, t));
        sv.events.push_back(syn_ack_in(pp.ip, t + setup));
        sv.events.push_back(fin_out(pp.ip, t + visit));
        collected.merge(pp.contribution);
        t += visit;
        break;
      case PpBehavior::Kind::Flaky:
        if (chance(rng, b.availability)) {
          sv.events.push_back(syn_out(pp.ip, t));
          sv.events.push_back(syn_ack_in(pp.ip, t + setup));
          sv.events.push_back(fin_out(pp.ip, t + visit));
          collected.merge(pp.contribution);
          t += visit;
        } else {
          sv.events.push_back(syn_out(pp.ip, t));
          sv.events.push_back(rst_in(pp.ip, t + setup));
          t += setup;
        }
        break;
      case PpBehavior::Kind::Jitter: {
        sv.events.push_back(syn_out(pp.ip, t));
        sv.events.push_back(syn_ack_in(pp.ip, t + setup));
        sv.events.push_back(fin_out(pp.ip, t + visit));
        VrpSet kept;
        for (const auto& o : pp.contribution.roas) {
          if (!chance(rng, b.drop)) kept.roas.insert(o);
        }
        for (const auto& o : pp.contribution.aspas) {
          if (!chance(rng, b.drop)) kept.aspas.insert(o);
        }
        for (const auto& o : pp.contribution.bgpsec_keys) {
          if (!chance(rng, b.drop)) kept.bgpsec_keys.insert(o);
        }
        collected.merge(kept);
        t += visit;
        break;
      }
      case PpBehavior::Kind::Stalling: {
        // Held open until the relying party's connection timeout fires; no
        // data arrives. The monitor usually kills the run before that.
        const Duration held = std::min(std::max(b.hold, setup),
                                       connection_timeout(ccfg));
        sv.events.push_back(syn_out(pp.ip, t));
        sv.events.push_back(syn_ack_in(pp.ip, t + setup));
        PacketEvent abort_ev = fin_out(pp.ip, t + held);
        abort_ev.rst = true;
        abort_ev.fin = false;
        sv.events.push_back(abort_ev);
        t += held;
        break;
      }
      case PpBehavior::Kind::Crashing:
        // The run dies with this connection established and open.
        sv.events.push_back(syn_out(pp.ip, t));
        sv.events.push_back(syn_ack_in(pp.ip, t + setup));
        t += visit / 2;
        crashed = true;
        break;
    }
    if (crashed) break;
  }

  sv.outcome.ended_at = t;
  sv.outcome.exit_status = crashed ? 1 : 0;
  if (!crashed) sv.outcome.vrps = collected;
  for (const auto& e : sv.events) record_packet(sv.outcome.log, e);
  return sv;
}

// ---------------------------------------------------------------------------
// Adapter plumbing: exposes a finished SimValidation through the RpHandle
// lifecycle, revealing events only as far as the observation instant.

class SimRpHandle : public RpHandle {
 public:
  SimRpHandle(SimValidation sv) : sv_(std::move(sv)) {}

  std::string tal() const override { return sv_.outcome.tal; }
  TimePoint started_at() const override { return sv_.outcome.started_at; }

  Status poll(TimePoint now) override {
    if (killed_at_) return Status::Killed;
    return now >= sv_.outcome.ended_at ? Status::Exited : Status::Running;
  }

  void kill(TimePoint now) override {
    if (killed_at_ || now >= sv_.outcome.ended_at) return;
    killed_at_ = now;
  }

  ConnectionLog log_at(TimePoint now) override {
    const TimePoint cutoff = killed_at_ ? std::min(*killed_at_, now) : now;
    ConnectionLog log;
    for (const auto& e : sv_.events) {
      if (e.time > cutoff) break;
      record_packet(log, e);
    }
    if (killed_at_ && now >= *killed_at_) {
      for (auto& [_, rec] : log.by_remote) {
        if (!rec.end_time) rec.end_time = *killed_at_;
      }
    }
    return log;
  }

  ValidationOutcome collect(TimePoint now) override {
    if (killed_at_) {
      ValidationOutcome o;
      o.tal = sv_.outcome.tal;
      o.started_at = sv_.outcome.started_at;
      o.ended_at = *killed_at_;
      o.exit_status = -1;
      o.killed = true;
      o.log = log_at(now);
      return o;
    }
    return sv_.outcome;
  }

 private:
  SimValidation sv_;
  std::optional<TimePoint> killed_at_;
};

class SimRpAdapter : public RpAdapter {
 public:
  // Observer for harness bookkeeping: (domain, time) per attempted contact.
  using ContactObserver = std::function<void(const std::string&, TimePoint)>;

  // Owns its scenario copy; callers often build the config in a scope that
  // ends before the adapter's last validation.
  SimRpAdapter(ScenarioConfig sc, std::uint32_t node_index,
               ConsensusConfig ccfg, std::uint64_t seed)
      : sc_(std::move(sc)),
        dnsbook_(scenario_dnsbook(sc_)),
        node_index_(node_index),
        ccfg_(ccfg),
        rng_(make_rng(seed, node_index)) {}

  void set_contact_observer(ContactObserver obs) { observer_ = std::move(obs); }
  const DnsBook& dnsbook() const { return dnsbook_; }

  std::unique_ptr<RpHandle> start_validation(
      const std::string& tal, const std::set<std::string>& skiplist,
      TimePoint now) override {
    SimValidation sv =
        simulate_validation(tal, skiplist, sc_, node_index_, now, rng_, ccfg_);
    if (observer_) {
      for (const auto& e : sv.events) {
        if (e.direction == PacketEvent::Dir::Out && e.syn) {
          if (const auto d = dnsbook_.lookup(e.dst)) observer_(*d, e.time);
        }
      }
    }
    return std::make_unique<SimRpHandle>(std::move(sv));
  }

 private:
  ScenarioConfig sc_;
  DnsBook dnsbook_;
  std::uint32_t node_index_;
  ConsensusConfig ccfg_;
  std::mt19937_64 rng_;
  ContactObserver observer_;
};

// ---------------------------------------------------------------------------
// Scenario (de)serialization.

inline PpBehavior behavior_from_json(const nlohmann::json& o) {
  PpBehavior b;
  const std::string kind = o.at("kind").get<std::string>();
  if (kind == "benign") b.kind = PpBehavior::Kind::Benign;
  else if (kind == "flaky") b.kind = PpBehavior::Kind::Flaky;
  else if (kind == "jitter") b.kind = PpBehavior::Kind::Jitter;
  else if (kind == "stalling") b.kind = PpBehavior::Kind::Stalling;
  else if (kind == "crashing") b.kind = PpBehavior::Kind::Crashing;
  else throw ParseError("unknown behavior kind: " + kind);
  if (o.contains("availability")) b.availability = o.at("availability").get<double>();
  if (o.contains("drop")) b.drop = o.at("drop").get<double>();
  if (o.contains("hold")) b.hold = parse_duration(o.at("hold").get<std::string>());
  if (o.contains("afflicted")) {
    for (const auto& n : o.at("afflicted")) {
      b.afflicted_nodes.insert(n.get<std::uint32_t>());
    }
  }
  if (b.availability < 0 || b.availability > 1 || b.drop < 0 || b.drop > 1) {
    throw ParseError("behavior probability outside [0,1]");
  }
  return b;
}

inline nlohmann::json behavior_to_json(const PpBehavior& b) {
  nlohmann::json o;
  switch (b.kind) {
    case PpBehavior::Kind::Benign: o["kind"] = "benign"; break;
    case PpBehavior::Kind::Flaky:
      o["kind"] = "flaky";
      o["availability"] = b.availability;
      break;
    case PpBehavior::Kind::Jitter:
      o["kind"] = "jitter";
      o["drop"] = b.drop;
      break;
    case PpBehavior::Kind::Stalling:
      o["kind"] = "stalling";
      o["hold"] = format_duration(b.hold);
      break;
    case PpBehavior::Kind::Crashing: o["kind"] = "crashing"; break;
  }
  if (!b.afflicted_nodes.empty()) {
    o["afflicted"] = b.afflicted_nodes;
  }
  return o;
}

namespace detail {
inline ScenarioConfig scenario_from_json(const nlohmann::json& doc) {
  ScenarioConfig sc;
  sc.seed = doc.value("seed", std::uint64_t{1});
  if (doc.contains("latency")) {
    const auto& lat = doc.at("latency");
    sc.latency_lo = parse_duration(lat.at(0).get<std::string>());
    sc.latency_hi = parse_duration(lat.at(1).get<std::string>());
    if (sc.latency_hi < sc.latency_lo) throw ParseError("latency range inverted");
  }
  if (doc.contains("profile")) {
    for (const auto& [k, v] : doc.at("profile").items()) {
      sc.profile[k] = v.get<std::string>();
    }
  }
  std::set<std::string> seen_domains;
  for (const auto& [tal, pps] : doc.at("tals").items()) {
    for (const auto& po : pps) {
      SimPp pp;
      pp.domain = normalize_domain(po.at("domain").get<std::string>());
      pp.ip = po.at("ip").get<std::string>();
      if (!seen_domains.insert(pp.domain).second) {
        throw ParseError("duplicate PP domain: " + pp.domain);
      }
      if (po.contains("behavior")) pp.behavior = behavior_from_json(po.at("behavior"));
      if (po.contains("vrps")) {
        pp.contribution = parse_vrp_file(po.at("vrps").dump());
      }
      sc.tals[tal].push_back(std::move(pp));
    }
  }
  if (doc.contains("schedule")) {
    for (const auto& so : doc.at("schedule")) {
      BehaviorSwitch sw;
      sw.at = kSimEpoch + parse_duration(so.at("at").get<std::string>());
      sw.domain = normalize_domain(so.at("domain").get<std::string>());
      sw.to = behavior_from_json(so.at("behavior"));
      if (!seen_domains.count(sw.domain)) {
        throw ParseError("schedule entry for unknown PP: " + sw.domain);
      }
      sc.schedule.push_back(std::move(sw));
    }
  }
  return sc;
}
}  // namespace detail

inline ScenarioConfig parse_scenario(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad scenario: ") + e.what());
  }
  try {
    return detail::scenario_from_json(doc);
  } catch (const ParseError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad scenario: ") + e.what());
  }
}

inline std::string serialize_scenario(const ScenarioConfig& sc) {
  nlohmann::json doc;
  doc["seed"] = sc.seed;
  doc["latency"] = {format_duration(sc.latency_lo), format_duration(sc.latency_hi)};
  if (!sc.profile.empty()) doc["profile"] = sc.profile;
  for (const auto& [tal, pps] : sc.tals) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& pp : pps) {
      nlohmann::json po;
      po["domain"] = pp.domain;
      po["ip"] = pp.ip;
      po["behavior"] = behavior_to_json(pp.behavior);
      po["vrps"] = nlohmann::json::parse(serialize_vrp_file(pp.contribution));
      arr.push_back(std::move(po));
    }
    doc["tals"][tal] = std::move(arr);
  }
  if (!sc.schedule.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& sw : sc.schedule) {
      nlohmann::json so;
      so["at"] = format_duration(sw.at - kSimEpoch);
      so["domain"] = sw.domain;
      so["behavior"] = behavior_to_json(sw.to);
      arr.push_back(std::move(so));
    }
    doc["schedule"] = std::move(arr);
  }
  return doc.dump(2) + "\n";
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

// ---------------------------------------------------------------------------
// Presets mirroring the harness experiments: a benign five-TAL tree, the same
// tree under fast/slow refresh, a DoS trigger on the busiest RIPE PP, and a
// transient blackout at a single node.

namespace detail {
inline VrpSet synth_contribution(int tal_idx, int pp_idx, int n_roas,
                                 const std::string& ta, int n_aspas = 0,
                                 int n_keys = 0) {
  VrpSet s;
  const int block = 100 + tal_idx * 10 + pp_idx;
  for (int k = 0; k < n_roas; ++k) {
    RoaFields f;
    f.asn = static_cast<std::uint32_t>(64496 + tal_idx * 100 + pp_idx * 20 + k);
    f.prefix = "10." + std::to_string(block) + "." + std::to_string(k) + ".0/24";
    f.max_length = 24;
    f.ta = ta;
    s.insert(canonicalize_vrp(f));
  }
  for (int k = 0; k < n_aspas; ++k) {
    nlohmann::json o;
    o["customer_asid"] = 64600 + tal_idx * 10 + k;
    o["providers"] = {64496, 64497};
    o["ta"] = ta;
    s.insert(canonicalize_vrp(VrpKind::Aspa, o));
  }
  for (int k = 0; k < n_keys; ++k) {
    nlohmann::json o;
    o["asn"] = 64700 + tal_idx * 10 + k;
    o["ski"] = "535B" + std::to_string(1000 + tal_idx * 10 + k);
    o["pubkey"] = "MFkwEwYHKoZIzj" + std::to_string(tal_idx * 10 + k);
    o["ta"] = ta;
    s.insert(canonicalize_vrp(VrpKind::BgpsecKey, o));
  }
  return s;
}

inline ScenarioConfig benign_tree() {
  ScenarioConfig sc;
  const struct {
    const char* tal;
    const char* ta;
    const char* pp0;
    int n0;
    const char* pp1;
    int n1;
  } rows[] = {
      {"afrinic", "AFRINIC", "rpki.afrinic.net", 5, "rrdp.afrinic.net", 3},
      {"apnic", "APNIC", "rpki.apnic.net", 6, "rrdp.apnic.net", 3},
      {"arin", "ARIN", "rrdp.arin.net", 6, "rpki.arin.net", 3},
      {"lacnic", "LACNIC", "rpki.lacnic.net", 5, "rrdp.lacnic.net", 2},
      {"ripe", "RIPE", "rpki.ripe.net", 8, "rrdp.ripe.net", 4},
  };
  int tal_idx = 0;
  for (const auto& row : rows) {
    SimPp a;
    a.domain = row.pp0;
    a.ip = "10." + std::to_string(tal_idx + 1) + ".0.1";
    a.contribution = synth_contribution(tal_idx, 0, row.n0, row.ta,
                                        tal_idx == 4 ? 2 : 0,   // aspas at RIPE
                                        tal_idx == 2 ? 1 : 0);  // key at ARIN
    SimPp b;
    b.domain = row.pp1;
    b.ip = "10." + std::to_string(tal_idx + 1) + ".0.2";
    b.contribution = synth_contribution(tal_idx, 1, row.n1, row.ta);
    sc.tals[row.tal] = {std::move(a), std::move(b)};
    ++tal_idx;
  }
  return sc;
}
}  // namespace detail

inline std::map<std::string, ScenarioConfig> scenario_presets() {
  std::map<std::string, ScenarioConfig> out;

  ScenarioConfig a = detail::benign_tree();
  a.profile["refresh_interval"] = "10s";
  out["benign-A"] = a;

  ScenarioConfig b = detail::benign_tree();
  b.profile["refresh_interval"] = "600s";
  out["benign-B"] = b;

  // A single PP starts crashing every relying party that reaches it, fifteen
  // minutes in. Slow visits spread the per-node crash times; the short
  // blacklist expiry makes the later re-contact observable in one run.
  ScenarioConfig dos = detail::benign_tree();
  dos.latency_lo = sec(2);
  dos.latency_hi = sec(8);
  dos.profile["refresh_interval"] = "10s";
  dos.profile["tal_cache"] = "false";
  dos.profile["blacklist_expiry"] = "10m";
  BehaviorSwitch sw;
  sw.at = kSimEpoch + minutes(15);
  sw.domain = "rpki.ripe.net";
  sw.to.kind = PpBehavior::Kind::Crashing;
  dos.schedule.push_back(sw);
  out["dos-ripe"] = dos;

  // One node transiently loses everything a single PP serves; the vote rides
  // it out.
  ScenarioConfig blackout = detail::benign_tree();
  blackout.profile["refresh_interval"] = "10s";
  BehaviorSwitch on;
  on.at = kSimEpoch + minutes(10);
  on.domain = "rrdp.arin.net";
  on.to.kind = PpBehavior::Kind::Jitter;
  on.to.drop = 1.0;
  on.to.afflicted_nodes = {0};
  BehaviorSwitch off;
  off.at = kSimEpoch + minutes(12);
  off.domain = "rrdp.arin.net";
  off.to.kind = PpBehavior::Kind::Benign;
  blackout.schedule.push_back(on);
  blackout.schedule.push_back(off);
  out["blackout"] = blackout;

  return out;
}

inline ScenarioConfig scenario_preset(const std::string& name) {
  auto all = scenario_presets();
  const auto it = all.find(name);
  if (it == all.end()) throw ParseError("unknown scenario preset: " + name);
  return it->second;
}

}  // namespace rpmesh
