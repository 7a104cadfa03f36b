// SPDX-License-Identifier: MIT
#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpmesh/lists.hpp"
#include "rpmesh/node_service.hpp"
#include "rpmesh/transport.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

// ---------------------------------------------------------------------------
// Cross-node audit: fetch every node's voted VRP file and compare pairwise.
// Persistent disagreement points at a split view served to different nodes;
// transient disagreement is normal while an update propagates.

struct AuditDiff {
  PeerAddress a;
  PeerAddress b;
  VrpSet only_a;
  VrpSet only_b;
};

struct AuditReport {
  std::map<PeerAddress, VrpSet> masters;
  std::vector<AuditDiff> diffs;  // only pairs whose symmetric diff is nonempty
  std::vector<std::pair<PeerAddress, std::string>> unreachable;

  bool consistent() const { return diffs.empty() && unreachable.empty(); }
};

inline AuditReport audit_masters(PeerTransport& t,
                                 const std::vector<PeerAddress>& nodes) {
  AuditReport r;
  for (const auto& n : nodes) {
    try {
      r.masters[n] = parse_vrp_file(t.get(n, kPathMaster));
    } catch (const std::exception& e) {
      r.unreachable.emplace_back(n, e.what());
    }
  }
  for (auto ia = r.masters.begin(); ia != r.masters.end(); ++ia) {
    for (auto ib = std::next(ia); ib != r.masters.end(); ++ib) {
      AuditDiff d;
      d.a = ia->first;
      d.b = ib->first;
      d.only_a = vrp_difference(ia->second, ib->second);
      d.only_b = vrp_difference(ib->second, ia->second);
      if (!d.only_a.empty() || !d.only_b.empty()) r.diffs.push_back(std::move(d));
    }
  }
  return r;
}

inline std::string format_audit(const AuditReport& r) {
  std::string out;
  for (const auto& [n, e] : r.unreachable)
    out += "unreachable " + n.to_string() + ": " + e + "\n";
  auto list = [&](const PeerAddress& who, const VrpSet& only) {
    for (const auto& s : only.roas) out += "  only " + who.to_string() + " roa " + s + "\n";
    for (const auto& s : only.aspas) out += "  only " + who.to_string() + " aspa " + s + "\n";
    for (const auto& s : only.bgpsec_keys)
      out += "  only " + who.to_string() + " bgpsec " + s + "\n";
  };
  for (const auto& d : r.diffs) {
    out += "divergence " + d.a.to_string() + " vs " + d.b.to_string() + ":\n";
    list(d.a, d.only_a);
    list(d.b, d.only_b);
  }
  if (r.diffs.empty() && r.unreachable.empty()) {
    out += "consistent: " + std::to_string(r.masters.size()) +
           " nodes agree on " +
           std::to_string(r.masters.empty() ? 0 : r.masters.begin()->second.size()) +
           " entries\n";
  } else if (!r.diffs.empty()) {
    out += "note: a divergence can be transient while an update propagates; "
           "re-run to confirm it persists\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference check: entries the voted output carries that a reference set
// does not. Presence violations are reportable; the converse is not, since
// an entry missing from the voted output may simply have been revoked after
// the reference was drawn.

struct PresenceReport {
  VrpSet suspects;
  bool clean() const { return suspects.empty(); }
};

inline PresenceReport verify_presence(const VrpSet& master,
                                      const VrpSet& reference) {
  return PresenceReport{vrp_difference(master, reference)};
}

inline std::string format_presence(const PresenceReport& r) {
  if (r.clean()) return "ok: every entry is backed by the reference set\n";
  std::string out;
  for (const auto& s : r.suspects.roas) out += "suspect roa " + s + "\n";
  for (const auto& s : r.suspects.aspas) out += "suspect aspa " + s + "\n";
  for (const auto& s : r.suspects.bgpsec_keys) out += "suspect bgpsec " + s + "\n";
  out += std::to_string(r.suspects.size()) +
         " entries lack reference backing. Entries missing from the voted "
         "output are not reported: the reference may predate a legitimate "
         "revocation.\n";
  return out;
}

// ---------------------------------------------------------------------------
// Fetch-volume extrapolation for a deployment where n_rp relying parties
// retrieve s_obj bytes of repository objects each, against a network where
// only n_node nodes fetch objects and everyone else retrieves the s_vrp-byte
// validated set from a node.

struct TrafficParams {
  double n_rp = 0;
  double n_node = 0;
  double s_obj = 0;  // bytes
  double s_vrp = 0;  // bytes
};

struct TrafficReport {
  double before_bytes = 0;  // n_rp * s_obj
  double after_bytes = 0;   // n_rp * s_vrp + n_node * s_obj
  double ratio = 0;         // before / after
  double requests_before = 0;  // repository fetchers today
  double requests_after = 0;   // repository fetchers with the network
};

inline TrafficReport traffic_extrapolation(const TrafficParams& p) {
  if (p.n_rp <= 0 || p.n_node <= 0 || p.s_obj <= 0 || p.s_vrp <= 0)
    throw std::invalid_argument("traffic parameters must be positive");
  TrafficReport r;
  r.before_bytes = p.n_rp * p.s_obj;
  r.after_bytes = p.n_rp * p.s_vrp + p.n_node * p.s_obj;
  r.ratio = r.before_bytes / r.after_bytes;
  r.requests_before = p.n_rp;
  r.requests_after = p.n_node;
  return r;
}

// Parses "562MB", "6.2 MB", "1.2GB", "4096" (bytes). Decimal SI units.
inline double parse_size(const std::string& text) {
  std::size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad size: " + text);
  }
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
    ++pos;
  std::string unit;
  for (; pos < text.size(); ++pos)
    unit += static_cast<char>(std::tolower(static_cast<unsigned char>(text[pos])));
  static const std::map<std::string, double> kScale = {
      {"", 1.0},      {"b", 1.0},     {"kb", 1e3},  {"mb", 1e6},
      {"gb", 1e9},    {"tb", 1e12},   {"pb", 1e15},
  };
  const auto it = kScale.find(unit);
  if (it == kScale.end()) throw std::invalid_argument("bad size unit: " + text);
  if (value < 0) throw std::invalid_argument("negative size: " + text);
  return value * it->second;
}

inline std::string format_bytes(double bytes) {
  static const char* kUnit[] = {"B", "kB", "MB", "GB", "TB", "PB"};
  int u = 0;
  while (bytes >= 1000.0 && u < 5) {
    bytes /= 1000.0;
    ++u;
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3g %s", bytes, kUnit[u]);
  return buf;
}

inline std::string format_traffic(const TrafficParams& p, const TrafficReport& r) {
  std::string out;
  out += "today:   " + format_bytes(r.before_bytes) + " per refresh (" +
         std::to_string(static_cast<long long>(p.n_rp)) +
         " relying parties x " + format_bytes(p.s_obj) + ")\n";
  out += "network: " + format_bytes(r.after_bytes) + " per refresh (" +
         std::to_string(static_cast<long long>(p.n_rp)) + " x " +
         format_bytes(p.s_vrp) + " validated sets + " +
         std::to_string(static_cast<long long>(p.n_node)) + " x " +
         format_bytes(p.s_obj) + " repository fetches)\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", r.ratio);
  out += "reduction: " + std::string(buf) + "x; repository request sources drop from " +
         std::to_string(static_cast<long long>(r.requests_before)) + " to " +
         std::to_string(static_cast<long long>(r.requests_after)) + "\n";
  return out;
}

}  // namespace rpmesh
