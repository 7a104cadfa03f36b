// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see the accompanying LICENSE file.
#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rpmesh/time.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

inline constexpr std::uint16_t kDefaultNodePort = 8443;

struct PeerAddress {
  std::string host;
  std::uint16_t port = kDefaultNodePort;

  auto operator<=>(const PeerAddress&) const = default;

  // Bare host when on the default port, otherwise host:port with IPv6 hosts
  // bracketed. Matches what the peerlist file carries.
  std::string to_string() const {
    if (port == kDefaultNodePort) return host;
    if (host.find(':') != std::string::npos) {
      return "[" + host + "]:" + std::to_string(port);
    }
    return host + ":" + std::to_string(port);
  }
};

inline PeerAddress parse_peer_address(const std::string& s) {
  if (s.empty()) throw ParseError("empty peer address");
  PeerAddress a;
  std::string port_part;
  if (s[0] == '[') {
    const auto close = s.find(']');
    if (close == std::string::npos) throw ParseError("unbalanced '[' in: " + s);
    a.host = s.substr(1, close - 1);
    const std::string rest = s.substr(close + 1);
    if (!rest.empty()) {
      if (rest[0] != ':') throw ParseError("bad peer address: " + s);
      port_part = rest.substr(1);
    }
  } else {
    // More than one colon and no brackets: a bare IPv6 host on the default
    // port. One colon: host:port.
    const auto first = s.find(':');
    const auto last = s.rfind(':');
    if (first == std::string::npos) {
      a.host = s;
    } else if (first != last) {
      a.host = s;
    } else {
      a.host = s.substr(0, first);
      port_part = s.substr(first + 1);
    }
  }
  if (a.host.empty()) throw ParseError("empty host in peer address: " + s);
  for (char ch : a.host) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '.' || ch == '-' ||
                    ch == ':';
    if (!ok) throw ParseError("bad character in peer address: " + s);
  }
  if (!port_part.empty()) {
    int p = 0;
    for (char ch : port_part) {
      if (ch < '0' || ch > '9') throw ParseError("bad port in: " + s);
      p = p * 10 + (ch - '0');
      if (p > 65535) throw ParseError("port out of range in: " + s);
    }
    if (p == 0) throw ParseError("port zero in: " + s);
    a.port = static_cast<std::uint16_t>(p);
  }
  return a;
}

struct Peerlist {
  std::set<PeerAddress> peers;

  bool operator==(const Peerlist&) const = default;
  bool contains(const PeerAddress& a) const { return peers.count(a) != 0; }
};

namespace detail {
// Shared line-format walker: strips comments ('#' to end of line) and blank
// lines, hands every remaining trimmed line to the callback.
template <typename Fn>
void for_each_data_line(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    fn(line.substr(b, e - b + 1));
  }
}
}  // namespace detail

// One address per line; a single bad line rejects the whole file, since it
// signals corrupt peer data rather than a formatting quirk.
inline Peerlist parse_peerlist(const std::string& text) {
  Peerlist pl;
  detail::for_each_data_line(text, [&](const std::string& line) {
    pl.peers.insert(parse_peer_address(line));
  });
  return pl;
}

// The serialized file never includes the node's own address.
inline std::string serialize_peerlist(
    const Peerlist& pl, const std::optional<PeerAddress>& self = std::nullopt) {
  std::string out;
  for (const auto& p : pl.peers) {
    if (self && p == *self) continue;
    out += p.to_string();
    out += '\n';
  }
  return out;
}

enum class SkipSource { Crash, Stall, PeerConsensus };

inline std::string to_string(SkipSource s) {
  switch (s) {
    case SkipSource::Crash: return "crash";
    case SkipSource::Stall: return "stall";
    case SkipSource::PeerConsensus: return "peer-consensus";
  }
  return "?";
}

inline SkipSource skip_source_from_string(const std::string& s) {
  if (s == "crash") return SkipSource::Crash;
  if (s == "stall") return SkipSource::Stall;
  if (s == "peer-consensus") return SkipSource::PeerConsensus;
  throw ParseError("unknown skiplist source: " + s);
}

// Lowercases and validates a publication-point domain: letters, digits, dots
// and hyphens only; no scheme, path, port or whitespace.
inline std::string normalize_domain(const std::string& raw) {
  if (raw.empty()) throw ParseError("empty domain");
  std::string d;
  d.reserve(raw.size());
  for (char ch : raw) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= '0' && ch <= '9') ||
                    ch == '.' || ch == '-';
    if (!ok) throw ParseError("bad character in domain: " + raw);
    d += ch;
  }
  if (d.front() == '.' || d.back() == '.') throw ParseError("bad domain: " + raw);
  return d;
}

struct SkiplistEntry {
  std::string domain;
  TimePoint added_at{};
  SkipSource source = SkipSource::Crash;

  bool operator==(const SkiplistEntry&) const = default;
};

// Keyed by domain; re-adding a domain refreshes its entry.
struct Skiplist {
  std::map<std::string, SkiplistEntry> entries;

  bool operator==(const Skiplist&) const = default;
  std::set<std::string> domains() const {
    std::set<std::string> out;
    for (const auto& [d, _] : entries) out.insert(d);
    return out;
  }
};

// Wire format: one domain per line. Timestamps and sources are node-local
// metadata and live in a sidecar file.
inline std::set<std::string> parse_skiplist(const std::string& text) {
  std::set<std::string> out;
  detail::for_each_data_line(text, [&](const std::string& line) {
    if (line.find_first_of(" \t/") != std::string::npos) {
      throw ParseError("bad skiplist line: " + line);
    }
    out.insert(normalize_domain(line));
  });
  return out;
}

inline std::string serialize_skiplist(const std::set<std::string>& domains) {
  std::string out;
  for (const auto& d : domains) {
    out += d;
    out += '\n';
  }
  return out;
}

inline std::string serialize_skiplist(const Skiplist& sl) {
  return serialize_skiplist(sl.domains());
}

// Sidecar: "domain added_at source" per line.
inline std::string serialize_skiplist_meta(const Skiplist& sl) {
  std::string out;
  for (const auto& [_, e] : sl.entries) {
    out += e.domain + " " + format_rfc3339(e.added_at) + " " +
           to_string(e.source) + "\n";
  }
  return out;
}

inline Skiplist parse_skiplist_meta(const std::string& text) {
  Skiplist sl;
  detail::for_each_data_line(text, [&](const std::string& line) {
    std::istringstream ls(line);
    std::string domain, ts, source;
    if (!(ls >> domain >> ts >> source)) {
      throw ParseError("bad skiplist sidecar line: " + line);
    }
    std::string extra;
    if (ls >> extra) throw ParseError("bad skiplist sidecar line: " + line);
    SkiplistEntry e;
    e.domain = normalize_domain(domain);
    e.added_at = parse_rfc3339(ts);
    e.source = skip_source_from_string(source);
    sl.entries[e.domain] = e;
  });
  return sl;
}

// Everything learned from one successful poll of a peer.
struct PeerSnapshot {
  PeerAddress peer;
  TimePoint fetched_at{};
  VrpSet vrps;
  std::set<std::string> skiplist;
  Peerlist peerlist;
};

inline bool is_fresh(const PeerSnapshot& s, TimePoint now, Duration staleness) {
  return now - s.fetched_at <= staleness;
}

// Remote IP -> publication-point domain, used to turn connection-log records
// into skiplist entries.
struct DnsBook {
  std::map<std::string, std::string> domain_by_ip;

  void add(const std::string& domain, const std::string& ip) {
    domain_by_ip[ip] = normalize_domain(domain);
  }
  std::optional<std::string> lookup(const std::string& ip) const {
    const auto it = domain_by_ip.find(ip);
    if (it == domain_by_ip.end()) return std::nullopt;
    return it->second;
  }
};

// Lines of "ip domain".
inline DnsBook parse_dnsbook(const std::string& text) {
  DnsBook book;
  detail::for_each_data_line(text, [&](const std::string& line) {
    std::istringstream ls(line);
    std::string ip, domain, extra;
    if (!(ls >> ip >> domain) || (ls >> extra)) {
      throw ParseError("bad dnsbook line: " + line);
    }
    book.add(domain, ip);
  });
  return book;
}

inline std::string serialize_dnsbook(const DnsBook& book) {
  std::string out;
  for (const auto& [ip, domain] : book.domain_by_ip) {
    out += ip + " " + domain + "\n";
  }
  return out;
}

}  // namespace rpmesh
