// SPDX-License-Identifier: MIT
//
// Slow reference implementations and random-instance generators that the
// fast production paths are checked against.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rpmesh/config.hpp"
#include "rpmesh/connlog.hpp"
#include "rpmesh/lists.hpp"
#include "rpmesh/rng.hpp"
#include "rpmesh/rtr.hpp"
#include "rpmesh/time.hpp"
#include "rpmesh/vote.hpp"

namespace testsupport {

// Literal restatement of the vote rule: for every object anyone claims,
// count the claimants one by one and admit the object at f+1 votes, where
// f = floor(c * n) clamped so c = 1 still admits unanimous objects.
inline std::set<std::string> brute_force_vote(const rpmesh::VoteInstance& inst) {
  const int n = static_cast<int>(inst.participants.size());
  if (n == 0) return {};
  const int f =
      static_cast<int>(std::floor(inst.c * static_cast<double>(n) + 1e-9));
  int needed = f + 1;
  if (needed > n) needed = n;
  std::set<std::string> everything;
  for (const auto& [_, objs] : inst.participants)
    for (const auto& o : objs) everything.insert(o);
  std::set<std::string> out;
  for (const auto& o : everything) {
    int votes = 0;
    for (const auto& [_, objs] : inst.participants)
      if (objs.count(o)) ++votes;
    if (votes >= needed) out.insert(o);
  }
  return out;
}

inline rpmesh::VoteInstance random_vote_instance(std::mt19937_64& rng,
                                                 int max_n = 6,
                                                 int max_objects = 10) {
  rpmesh::VoteInstance inst;
  const int n = 1 + static_cast<int>(rpmesh::uniform_u64(rng, max_n));
  const int pool = 1 + static_cast<int>(rpmesh::uniform_u64(rng, max_objects));
  const double choices[] = {0.0, 0.3, 0.5, 0.9, 1.0};
  inst.c = choices[rpmesh::uniform_u64(rng, 5)];
  for (int i = 0; i < n; ++i) {
    std::set<std::string> objs;
    for (int o = 0; o < pool; ++o)
      if (rpmesh::chance(rng, 0.5)) objs.insert("obj" + std::to_string(o));
    inst.participants.emplace_back("p" + std::to_string(i), std::move(objs));
  }
  return inst;
}

// Crash attribution, restated: a relying party that died mid-connection
// leaves an established record with no end.
inline std::set<std::string> naive_crash_oracle(const rpmesh::ConnectionLog& log,
                                                const rpmesh::DnsBook& book) {
  std::set<std::string> out;
  for (const auto& [remote, rec] : log.by_remote) {
    if (!rec.established) continue;
    if (rec.end_time.has_value()) continue;
    const auto d = book.lookup(remote);
    if (d) out.insert(*d);
  }
  return out;
}

// Stall attribution, restated from the configured timeouts: per-connection
// budget is a quarter of the global one, and a connection is suspect once
// it has been open past stall_fraction of that budget.
inline std::set<std::string> naive_stall_oracle(const rpmesh::ConnectionLog& log,
                                                const rpmesh::DnsBook& book,
                                                rpmesh::TimePoint now,
                                                const rpmesh::ConsensusConfig& cfg) {
  const double budget_ms =
      static_cast<double>((cfg.global_timeout / 4).count());
  const auto threshold = rpmesh::Duration(
      static_cast<std::int64_t>(cfg.stall_fraction * budget_ms));
  std::set<std::string> out;
  for (const auto& [remote, rec] : log.by_remote) {
    if (!rec.established) continue;
    if (rec.end_time.has_value()) continue;
    if (now - rec.start_time <= threshold) continue;
    const auto d = book.lookup(remote);
    if (d) out.insert(*d);
  }
  return out;
}

struct RandomLog {
  rpmesh::ConnectionLog log;
  rpmesh::DnsBook book;
  rpmesh::TimePoint now;
};

// A connection log with every lifecycle shape: unestablished, closed,
// freshly open, open past the stall threshold; some remotes lack dnsbook
// entries on purpose.
inline RandomLog random_connection_log(std::mt19937_64& rng,
                                       const rpmesh::ConsensusConfig& cfg) {
  RandomLog r;
  const int remotes = 1 + static_cast<int>(rpmesh::uniform_u64(rng, 8));
  r.now = rpmesh::kSimEpoch + rpmesh::sec(10000);
  for (int i = 0; i < remotes; ++i) {
    const std::string ip = "10.9." + std::to_string(i) + ".1";
    if (rpmesh::chance(rng, 0.8))
      r.book.add("pp" + std::to_string(i) + ".example.net", ip);
    rpmesh::ConnectionRecord rec;
    rec.remote = ip;
    const auto age = rpmesh::Duration(
        static_cast<std::int64_t>(rpmesh::uniform_u64(rng, 200000)));
    rec.start_time = r.now - age;
    rec.established = rpmesh::chance(rng, 0.8);
    if (rpmesh::chance(rng, 0.4))
      rec.end_time = rec.start_time + rpmesh::msec(static_cast<std::int64_t>(
                                          rpmesh::uniform_u64(rng, 5000)));
    r.log.by_remote[ip] = rec;
  }
  (void)cfg;
  return r;
}

// RTR diff as plain set algebra.
struct DiffOracle {
  std::set<rpmesh::RtrEntry> announce;
  std::set<rpmesh::RtrEntry> withdraw;
};

inline DiffOracle rtr_diff_oracle(const std::set<rpmesh::RtrEntry>& from,
                                  const std::set<rpmesh::RtrEntry>& to) {
  DiffOracle d;
  for (const auto& e : to)
    if (!from.count(e)) d.announce.insert(e);
  for (const auto& e : from)
    if (!to.count(e)) d.withdraw.insert(e);
  return d;
}

// Canonical ROA helper for fixtures.
inline std::string roa(std::uint32_t asn, const std::string& prefix,
                       int maxlen, const std::string& ta) {
  rpmesh::RoaFields f;
  f.asn = asn;
  f.prefix = prefix;
  f.max_length = maxlen;
  f.ta = ta;
  return rpmesh::canonicalize_vrp(f).text;
}

}  // namespace testsupport
