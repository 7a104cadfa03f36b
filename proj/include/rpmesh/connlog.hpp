// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see the accompanying LICENSE file.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rpmesh/config.hpp"
#include "rpmesh/lists.hpp"
#include "rpmesh/time.hpp"

namespace rpmesh {

// One observed TCP packet of the relying party's traffic, reduced to the
// fields the connection tracker needs.
struct PacketEvent {
  enum class Dir { Out, In };
  Dir direction = Dir::Out;
  bool syn = false;
  bool ack = false;
  bool rst = false;
  bool fin = false;
  std::string src;  // IP
  std::string dst;  // IP
  TimePoint time{};
};

inline PacketEvent syn_out(const std::string& dst, TimePoint t) {
  PacketEvent e;
  e.direction = PacketEvent::Dir::Out;
  e.syn = true;
  e.dst = dst;
  e.time = t;
  return e;
}

inline PacketEvent syn_ack_in(const std::string& src, TimePoint t) {
  PacketEvent e;
  e.direction = PacketEvent::Dir::In;
  e.syn = true;
  e.ack = true;
  e.src = src;
  e.time = t;
  return e;
}

inline PacketEvent fin_out(const std::string& dst, TimePoint t) {
  PacketEvent e;
  e.direction = PacketEvent::Dir::Out;
  e.fin = true;
  e.dst = dst;
  e.time = t;
  return e;
}

inline PacketEvent rst_in(const std::string& src, TimePoint t) {
  PacketEvent e;
  e.direction = PacketEvent::Dir::In;
  e.rst = true;
  e.src = src;
  e.time = t;
  return e;
}

struct ConnectionRecord {
  std::string remote;
  TimePoint start_time{};
  bool established = false;
  std::optional<TimePoint> end_time;
};

// Latest connection per remote IP; a new SYN to the same remote replaces the
// finished record.
struct ConnectionLog {
  std::map<std::string, ConnectionRecord> by_remote;
};

// Connection lifecycle tracking. An outbound SYN opens a record, an inbound
// SYN-ACK marks it established, RST or FIN in either direction closes it.
// Packets for remotes without a prior SYN are ignored.
inline void record_packet(ConnectionLog& log, const PacketEvent& e) {
  if (e.direction == PacketEvent::Dir::Out && e.syn && !e.ack) {
    ConnectionRecord r;
    r.remote = e.dst;
    r.start_time = e.time;
    log.by_remote[e.dst] = r;
    return;
  }
  const std::string& remote =
      e.direction == PacketEvent::Dir::Out ? e.dst : e.src;
  const auto it = log.by_remote.find(remote);
  if (it == log.by_remote.end()) return;
  if (e.direction == PacketEvent::Dir::In && e.syn && e.ack) {
    it->second.established = true;
  }
  if (e.rst || e.fin) {
    it->second.end_time = e.time;
  }
}

// Invoked after a nonzero exit: every connection that was established and
// still open at that point names the publication point the relying party was
// talking to when it died.
inline std::vector<std::string> detect_crash(
    const ConnectionLog& log, const DnsBook& dnsbook,
    std::vector<std::string>* warnings = nullptr) {
  std::set<std::string> domains;
  for (const auto& [remote, rec] : log.by_remote) {
    if (!rec.established || rec.end_time) continue;
    if (const auto d = dnsbook.lookup(remote)) {
      domains.insert(*d);
    } else if (warnings) {
      warnings->push_back("no dnsbook entry for " + remote);
    }
  }
  return {domains.begin(), domains.end()};
}

// Invoked while the relying party is running: flags open established
// connections older than stall_fraction of the per-connection timeout.
inline std::vector<std::string> detect_stalling(
    const ConnectionLog& log, const DnsBook& dnsbook, TimePoint now,
    const ConsensusConfig& cfg, std::vector<std::string>* warnings = nullptr) {
  const Duration threshold = stall_threshold(cfg);
  std::set<std::string> domains;
  for (const auto& [remote, rec] : log.by_remote) {
    if (!rec.established || rec.end_time) continue;
    if (now - rec.start_time <= threshold) continue;
    if (const auto d = dnsbook.lookup(remote)) {
      domains.insert(*d);
    } else if (warnings) {
      warnings->push_back("no dnsbook entry for " + remote);
    }
  }
  return {domains.begin(), domains.end()};
}

// Inserts or refreshes entries; a re-detected domain gets a new added_at (and
// source), which restarts its expiry clock.
inline void update_skiplist(Skiplist& sl, const std::vector<std::string>& domains,
                            TimePoint now, SkipSource source) {
  for (const auto& d : domains) {
    sl.entries[d] = SkiplistEntry{d, now, source};
  }
}

// Strictly-older-than expiry: an entry exactly at the boundary is kept.
inline void expire_skiplist(Skiplist& sl, TimePoint now, Duration expiry) {
  for (auto it = sl.entries.begin(); it != sl.entries.end();) {
    if (now - it->second.added_at > expiry) {
      it = sl.entries.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace rpmesh
