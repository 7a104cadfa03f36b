// SPDX-License-Identifier: MIT
#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>

#include "rpmesh/rng.hpp"
#include "rpmesh/vote.hpp"

#include "support/oracles.hpp"

using namespace rpmesh;

TEST_CASE("fault bound lands on integers despite binary rounding") {
  CHECK(compute_fault_bound(0.5, 5) == 2);
  CHECK(compute_fault_bound(0.5, 6) == 3);
  CHECK(compute_fault_bound(0.3, 10) == 3);
  CHECK(compute_fault_bound(0.1, 10) == 1);
  CHECK(compute_fault_bound(0.0, 7) == 0);
  CHECK(compute_fault_bound(1.0, 7) == 7);
  CHECK_THROWS_AS(compute_fault_bound(-0.1, 3), std::invalid_argument);
  CHECK_THROWS_AS(compute_fault_bound(1.1, 3), std::invalid_argument);
  CHECK_THROWS_AS(compute_fault_bound(0.5, 0), std::invalid_argument);
}

TEST_CASE("threshold clamps to the participant count") {
  CHECK(vote_threshold(0.5, 5) == 3);
  CHECK(vote_threshold(0.0, 5) == 1);
  CHECK(vote_threshold(1.0, 5) == 5);
  CHECK(vote_threshold(1.0, 1) == 1);
}

TEST_CASE("vote matches the counting oracle on random instances") {
  auto rng = make_rng(7, 0);
  for (int k = 0; k < 300; ++k) {
    const VoteInstance inst = testsupport::random_vote_instance(rng);
    CHECK(threshold_vote(inst) == testsupport::brute_force_vote(inst));
  }
}

TEST_CASE("duplicate participant ids are rejected") {
  VoteInstance inst;
  inst.participants.emplace_back("same", std::set<std::string>{"a"});
  inst.participants.emplace_back("same", std::set<std::string>{"b"});
  CHECK_THROWS_AS(threshold_vote(inst), std::invalid_argument);
}

namespace {

PeerSnapshot snap(const std::string& host, TimePoint at,
                  std::set<std::string> roas,
                  std::set<std::string> skiplist = {}) {
  PeerSnapshot s;
  s.peer = {host, kDefaultNodePort};
  s.fetched_at = at;
  s.vrps.roas = std::move(roas);
  s.skiplist = std::move(skiplist);
  return s;
}

}  // namespace

TEST_CASE("stale snapshots fall out of the vote") {
  ConsensusConfig cfg;  // c = 0.5, staleness 1h
  const TimePoint now = kSimEpoch + minutes(120);

  std::vector<PeerSnapshot> peers;
  peers.push_back(snap("a.test", now - minutes(5), {"x", "y"}));
  peers.push_back(snap("b.test", now - minutes(5), {"x"}));
  peers.push_back(snap("c.test", now - minutes(90), {"x", "y", "z"}));  // stale

  const PeerSnapshot own = snap("self.test", now, {"y"});

  const MasterState m = compute_master(peers, own, cfg, now);
  // Fresh participants: own, a, b. T = floor(0.5*3)+1 = 2.
  CHECK(m.participant_count == 3);
  CHECK(m.fault_bound == 1);
  CHECK(m.vrps.roas == std::set<std::string>{"x", "y"});
}

TEST_CASE("own output always participates, even alone") {
  ConsensusConfig cfg;
  const TimePoint now = kSimEpoch;
  const PeerSnapshot own = snap("self.test", now, {"only-mine"});
  const MasterState m = compute_master({}, own, cfg, now);
  CHECK(m.participant_count == 1);
  CHECK(m.vrps.roas == std::set<std::string>{"only-mine"});
}

TEST_CASE("skiplist domains are voted like objects") {
  ConsensusConfig cfg;
  const TimePoint now = kSimEpoch;
  std::vector<PeerSnapshot> peers;
  peers.push_back(snap("a.test", now, {}, {"bad.example", "slow.example"}));
  peers.push_back(snap("b.test", now, {}, {"bad.example"}));
  const PeerSnapshot own = snap("self.test", now, {}, {});
  const MasterState m = compute_master(peers, own, cfg, now);
  // T = floor(0.5*3)+1 = 2; only bad.example has two votes.
  CHECK(m.skiplist == std::set<std::string>{"bad.example"});
}

TEST_CASE("a peer list entry sharing the own address cannot double-vote") {
  // compute_master keys votes by id; the caller never passes its own address
  // as a peer, and the reserved own id cannot collide with any address.
  ConsensusConfig cfg;
  const TimePoint now = kSimEpoch;
  std::vector<PeerSnapshot> peers;
  peers.push_back(snap("self.test", now, {"x"}));
  const PeerSnapshot own = snap("self.test", now, {"x"});
  // Ids are "#self" and "self.test": both count, by design of the caller
  // contract, and no exception fires.
  const MasterState m = compute_master(peers, own, cfg, now);
  CHECK(m.participant_count == 2);
}
