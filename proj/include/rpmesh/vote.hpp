// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see the accompanying LICENSE file.
#pragma once

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpmesh/config.hpp"
#include "rpmesh/lists.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

// Fault bound f = floor(c * n). The epsilon absorbs binary representation
// error for factors like 0.3 whose product should land on an integer.
inline int compute_fault_bound(double c, int n) {
  if (c < 0.0 || c > 1.0) throw std::invalid_argument("c outside [0,1]");
  if (n < 1) throw std::invalid_argument("participant count must be >= 1");
  return static_cast<int>(std::floor(c * static_cast<double>(n) + 1e-9));
}

// An object needs at least f+1 votes, clamped to n so that c=1 degrades to
// the intersection instead of an unsatisfiable threshold.
inline int vote_threshold(double c, int n) {
  const int f = compute_fault_bound(c, n);
  return f + 1 < n ? f + 1 : n;
}

// One vote: a participant id and the objects it claims.
struct VoteInstance {
  std::vector<std::pair<std::string, std::set<std::string>>> participants;
  double c = 0.5;
};

// G = { o in the union of all local sets | at least T participants hold o }.
inline std::set<std::string> threshold_vote(const VoteInstance& inst) {
  std::set<std::string> ids;
  for (const auto& [id, _] : inst.participants) {
    if (!ids.insert(id).second) {
      throw std::invalid_argument("duplicate participant id: " + id);
    }
  }
  const int n = static_cast<int>(inst.participants.size());
  if (n == 0) return {};
  const int threshold = vote_threshold(inst.c, n);
  std::map<std::string, int> votes;
  for (const auto& [_, objects] : inst.participants) {
    for (const auto& o : objects) ++votes[o];
  }
  std::set<std::string> out;
  for (const auto& [o, v] : votes) {
    if (v >= threshold) out.insert(o);
  }
  return out;
}

// The node-wide voted outputs plus the parameters they were computed under.
struct MasterState {
  VrpSet vrps;
  std::set<std::string> skiplist;
  TimePoint computed_at{};
  int participant_count = 0;
  int fault_bound = 0;
};

// Runs one vote per VRP kind and one over skiplist domains. Only fresh peer
// snapshots participate; the node's own output always does, so zero fresh
// peers degenerates to |P| = 1 and master = own output.
inline MasterState compute_master(const std::vector<PeerSnapshot>& peers,
                                  const PeerSnapshot& own,
                                  const ConsensusConfig& cfg, TimePoint now) {
  std::vector<const PeerSnapshot*> fresh;
  fresh.push_back(&own);
  for (const auto& p : peers) {
    if (is_fresh(p, now, cfg.staleness_tolerance)) fresh.push_back(&p);
  }

  auto vote = [&](auto member) {
    VoteInstance inst;
    inst.c = cfg.c;
    inst.participants.reserve(fresh.size());
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      // '#' cannot appear in a peer address, so the own id never collides.
      const std::string id =
          i == 0 ? "#self" : fresh[i]->peer.to_string();
      inst.participants.emplace_back(id, member(*fresh[i]));
    }
    return threshold_vote(inst);
  };

  MasterState m;
  m.vrps.roas = vote([](const PeerSnapshot& s) { return s.vrps.roas; });
  m.vrps.aspas = vote([](const PeerSnapshot& s) { return s.vrps.aspas; });
  m.vrps.bgpsec_keys =
      vote([](const PeerSnapshot& s) { return s.vrps.bgpsec_keys; });
  m.skiplist = vote([](const PeerSnapshot& s) { return s.skiplist; });
  m.computed_at = now;
  m.participant_count = static_cast<int>(fresh.size());
  m.fault_bound = compute_fault_bound(cfg.c, m.participant_count);
  return m;
}

}  // namespace rpmesh
