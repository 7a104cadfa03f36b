// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see LICENSE.
#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpmesh/config.hpp"
#include "rpmesh/lists.hpp"
#include "rpmesh/node_service.hpp"
#include "rpmesh/rng.hpp"
#include "rpmesh/time.hpp"
#include "rpmesh/transport.hpp"
#include "rpmesh/vote.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

// Peer bookkeeping for one node. The peerlist never contains the node's own
// address. Peers are never evicted on failure; their snapshots simply go
// stale and fall out of the vote.
struct PeeringState {
  PeerAddress self;
  Peerlist peerlist;
  std::map<PeerAddress, PeerSnapshot> snapshots;
  std::set<PeerAddress> candidates;
  std::optional<TimePoint> last_poll;
};

// Fetches a peer's three files over the authenticated channel. All or
// nothing: any transport or parse failure throws, and the caller keeps the
// previous snapshot until it goes stale.
inline PeerSnapshot poll_peer(PeerTransport& t, const PeerAddress& peer,
                              TimePoint now) {
  PeerSnapshot snap;
  snap.peer = peer;
  snap.peerlist = parse_peerlist(t.get(peer, kPathPeerlist));
  snap.skiplist = parse_skiplist(t.get(peer, kPathSkiplist));
  snap.vrps = parse_vrp_file(t.get(peer, kPathVrps));
  snap.fetched_at = now;
  return snap;
}

// Addresses worth probing: everyone listed in a fetched peerlist, plus
// everyone who asked us for our peerlist, minus known peers and ourselves.
inline std::set<PeerAddress> discover_candidates(
    const PeeringState& st, const std::vector<AccessLogEntry>& access_log) {
  std::set<PeerAddress> out;
  for (const auto& [peer, snap] : st.snapshots)
    for (const auto& a : snap.peerlist.peers) out.insert(a);
  for (const auto& e : access_log)
    if (e.path == kPathPeerlist) out.insert(e.client);
  out.erase(st.self);
  for (const auto& p : st.peerlist.peers) out.erase(p);
  return out;
}

// Probes one candidate. Success admits it to the peerlist along with its
// first snapshot; failure drops it until it is rediscovered.
inline bool admit_candidate(PeeringState& st, PeerTransport& t,
                            const PeerAddress& cand, TimePoint now) {
  st.candidates.erase(cand);
  if (cand == st.self || st.peerlist.contains(cand)) return false;
  try {
    auto snap = poll_peer(t, cand, now);
    st.peerlist.peers.insert(cand);
    st.snapshots[cand] = std::move(snap);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

struct PeeringRoundResult {
  MasterState master;
  std::vector<PeerAddress> admitted;
  std::vector<std::string> warnings;
};

// One poll round: refresh every peer's snapshot (random order), run
// discovery and admission, then recompute the master view from the fresh
// snapshots plus the node's own current output.
inline PeeringRoundResult peering_round(
    PeeringState& st, PeerTransport& t,
    const std::vector<AccessLogEntry>& access_log, const VrpSet& own_vrps,
    const std::set<std::string>& own_skiplist, const ConsensusConfig& cfg,
    TimePoint now, std::mt19937_64& rng) {
  PeeringRoundResult out;
  std::vector<PeerAddress> order(st.peerlist.peers.begin(),
                                 st.peerlist.peers.end());
  shuffle_in_place(order, rng);
  for (const auto& p : order) {
    try {
      st.snapshots[p] = poll_peer(t, p, now);
    } catch (const std::exception& e) {
      out.warnings.push_back("poll failed for " + p.to_string() + ": " + e.what());
    }
  }
  for (const auto& c : discover_candidates(st, access_log))
    st.candidates.insert(c);
  std::vector<PeerAddress> cands(st.candidates.begin(), st.candidates.end());
  shuffle_in_place(cands, rng);
  for (const auto& c : cands)
    if (admit_candidate(st, t, c, now)) out.admitted.push_back(c);
  st.last_poll = now;

  PeerSnapshot own;
  own.peer = st.self;
  own.fetched_at = now;
  own.vrps = own_vrps;
  own.skiplist = own_skiplist;
  std::vector<PeerSnapshot> peers;
  peers.reserve(st.snapshots.size());
  for (const auto& [addr, snap] : st.snapshots)
    if (st.peerlist.contains(addr)) peers.push_back(snap);
  out.master = compute_master(peers, own, cfg, now);
  return out;
}

}  // namespace rpmesh
