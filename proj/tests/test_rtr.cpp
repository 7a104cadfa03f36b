// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see LICENSE.
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include "rpmesh/certs.hpp"
#include "rpmesh/rng.hpp"
#include "rpmesh/rtr.hpp"
#include "support/oracles.hpp"

using namespace rpmesh;

namespace {

RtrEntry v4_entry(std::uint32_t asn, std::initializer_list<std::uint8_t> addr,
                  std::uint8_t len, std::uint8_t maxlen) {
  RtrEntry e;
  e.v6 = false;
  std::copy(addr.begin(), addr.end(), e.prefix.begin());
  e.prefix_len = len;
  e.max_len = maxlen;
  e.asn = asn;
  return e;
}

RtrPdu random_prefix_pdu(std::mt19937_64& rng) {
  RtrPdu p;
  const bool v6 = uniform_u64(rng, 2) == 1;
  p.type = v6 ? RtrPduType::Ipv6Prefix : RtrPduType::Ipv4Prefix;
  p.flags = static_cast<std::uint8_t>(uniform_u64(rng, 2));
  p.max_len = static_cast<std::uint8_t>(uniform_u64(rng, v6 ? 129 : 33));
  p.prefix_len = static_cast<std::uint8_t>(uniform_u64(rng, p.max_len + 1));
  const std::size_t bytes = v6 ? 16 : 4;
  for (std::size_t i = 0; i < bytes; ++i)
    p.prefix[i] = static_cast<std::uint8_t>(uniform_u64(rng, 256));
  p.asn = static_cast<std::uint32_t>(uniform_u64(rng, 1u << 31));
  return p;
}

std::string temp_dir() {
  char tmpl[] = "/tmp/rpmesh-rtr-XXXXXX";
  const char* d = mkdtemp(tmpl);
  REQUIRE(d != nullptr);
  return d;
}

}  // namespace

TEST_CASE("pdu codec roundtrips every type") {
  const RtrTimers timers;
  std::vector<RtrPdu> pdus = {
      make_reset_query(),
      make_serial_query(0x1234, 42),
      make_serial_notify(0xbeef, 7),
      make_cache_response(0x1234),
      make_cache_reset(),
      make_end_of_data(0x1234, 99, timers),
      make_error_report(kRtrErrNoData, encode_pdu(make_reset_query()),
                        "nothing cached yet"),
      make_error_report(kRtrErrInternal, {}, ""),
  };
  RtrEntry e4 = v4_entry(65000, {192, 0, 2, 0}, 24, 24);
  RtrEntry e6;
  e6.v6 = true;
  e6.prefix = {0x20, 0x01, 0x0d, 0xb8};
  e6.prefix_len = 32;
  e6.max_len = 48;
  e6.asn = 65001;
  pdus.push_back(prefix_pdu(e4, true));
  pdus.push_back(prefix_pdu(e4, false));
  pdus.push_back(prefix_pdu(e6, true));

  for (const auto& p : pdus) {
    const auto wire = encode_pdu(p);
    CHECK(wire.size() >= 8);
    CHECK(detail::get_u32(wire.data() + 4) == wire.size());
    CHECK(decode_pdu(wire) == p);
  }
}

TEST_CASE("pdu codec roundtrips random prefix pdus") {
  auto rng = make_rng(99, 0);
  for (int i = 0; i < 300; ++i) {
    const RtrPdu p = random_prefix_pdu(rng);
    const RtrPdu q = decode_pdu(encode_pdu(p));
    CHECK(q == p);
    CHECK(entry_from_pdu(q) == entry_from_pdu(p));
  }
}

TEST_CASE("pdu decode rejects malformed frames") {
  const auto ok = encode_pdu(make_reset_query());

  // Truncation.
  CHECK_THROWS_AS(decode_pdu(ok.data(), 4), RtrError);
  // Wrong version.
  auto bad = ok;
  bad[0] = 0;
  CHECK_THROWS_AS(decode_pdu(bad), RtrError);
  // Length field disagrees with the frame.
  bad = ok;
  bad[7] = 99;
  CHECK_THROWS_AS(decode_pdu(bad), RtrError);
  // Unknown type.
  bad = ok;
  bad[1] = 9;
  CHECK_THROWS_AS(decode_pdu(bad), RtrError);
  // Prefix with max_len out of range.
  RtrPdu p = prefix_pdu(v4_entry(1, {10, 0, 0, 0}, 8, 8), true);
  auto wire = encode_pdu(p);
  wire[10] = 33;
  CHECK_THROWS_AS(decode_pdu(wire), RtrError);
  // prefix_len above max_len.
  wire = encode_pdu(p);
  wire[9] = 24;
  wire[10] = 16;
  CHECK_THROWS_AS(decode_pdu(wire), RtrError);

  try {
    decode_pdu(bad);
    FAIL("expected RtrError");
  } catch (const RtrError& e) {
    CHECK(e.code() == kRtrErrUnsupportedType);
  }
}

TEST_CASE("wire entries cover roas only and collapse trust anchors") {
  VrpSet v;
  v.roas.insert(testsupport::roa(65000, "192.0.2.0/24", 24, "RIPE"));
  v.roas.insert(testsupport::roa(65000, "192.0.2.0/24", 24, "ARIN"));
  v.roas.insert(testsupport::roa(65001, "2001:db8::/32", 48, "APNIC"));
  v.aspas.insert("{\"customer\":\"AS1\",\"providers\":[\"AS2\"]}");
  v.bgpsec_keys.insert("{\"asn\":\"AS1\",\"ski\":\"AB\"}");

  const auto entries = wire_entries(v);
  CHECK(entries.size() == 2);
  bool saw4 = false, saw6 = false;
  for (const auto& e : entries) (e.v6 ? saw6 : saw4) = true;
  CHECK(saw4);
  CHECK(saw6);
}

TEST_CASE("publish bumps the serial only when the roa set changes") {
  CacheState st;
  st.session_id = 7;
  CHECK(st.serial == 0);
  CHECK(st.current().empty());

  VrpSet v;
  v.roas.insert(testsupport::roa(65000, "192.0.2.0/24", 24, "RIPE"));
  CHECK(publish_update(st, v));
  CHECK(st.serial == 1);
  CHECK(st.current().size() == 1);

  // Same roas again: no new serial.
  CHECK_FALSE(publish_update(st, v));
  CHECK(st.serial == 1);

  // A non-roa change is invisible on the wire.
  v.aspas.insert("{\"customer\":\"AS9\",\"providers\":[\"AS8\"]}");
  CHECK_FALSE(publish_update(st, v));
  CHECK(st.serial == 1);

  // The same prefix under another TA is already covered.
  v.roas.insert(testsupport::roa(65000, "192.0.2.0/24", 24, "ARIN"));
  CHECK_FALSE(publish_update(st, v));

  v.roas.insert(testsupport::roa(65000, "198.51.100.0/24", 24, "RIPE"));
  CHECK(publish_update(st, v));
  CHECK(st.serial == 2);
}

TEST_CASE("snapshot window keeps the last ten serials") {
  CacheState st;
  VrpSet v;
  for (int i = 0; i < 14; ++i) {
    v.roas.insert(testsupport::roa(65000 + i, "10.0.0.0/8", 8, "RIPE"));
    REQUIRE(publish_update(st, v));
  }
  CHECK(st.serial == 14);
  CHECK(st.snapshots.size() == CacheState::kWindow);
  CHECK(st.snapshots.begin()->first == 5);
  CHECK(st.snapshots.count(0) == 0);
  CHECK(st.current().size() == 14);
}

TEST_CASE("cache exchange flows") {
  auto rng = make_rng(5, 1);
  CacheState st;
  st.session_id = 0x4242;

  // A drifting roa set: each publish adds a couple and drops one.
  VrpSet v;
  int next = 0;
  for (int round = 0; round < 12; ++round) {
    for (int a = 0; a < 2; ++a)
      v.roas.insert(testsupport::roa(64500 + next++, "192.0.2.0/24", 24, "X"));
    if (!v.roas.empty() && uniform_u64(rng, 2) == 0)
      v.roas.erase(v.roas.begin());
    REQUIRE(publish_update(st, v));
  }

  SECTION("reset query returns the full current set") {
    const auto replies = handle_client(st, make_reset_query());
    REQUIRE(replies.size() == 2 + st.current().size());
    CHECK(replies.front().type == RtrPduType::CacheResponse);
    CHECK(replies.front().session_id == st.session_id);
    CHECK(replies.back().type == RtrPduType::EndOfData);
    CHECK(replies.back().serial == st.serial);
    CHECK(replies.back().refresh == st.timers.refresh);
    std::set<RtrEntry> got;
    for (std::size_t i = 1; i + 1 < replies.size(); ++i) {
      CHECK(replies[i].flags == 1);
      got.insert(entry_from_pdu(replies[i]));
    }
    CHECK(got == st.current());
  }

  SECTION("serial query diffs match the set-difference oracle") {
    for (const auto& [from_serial, from_set] : st.snapshots) {
      const auto replies =
          handle_client(st, make_serial_query(st.session_id, from_serial));
      REQUIRE(replies.size() >= 2);
      CHECK(replies.front().type == RtrPduType::CacheResponse);
      CHECK(replies.back().type == RtrPduType::EndOfData);
      std::set<RtrEntry> announced, withdrawn;
      for (std::size_t i = 1; i + 1 < replies.size(); ++i)
        (replies[i].flags ? announced : withdrawn)
            .insert(entry_from_pdu(replies[i]));
      const auto oracle = testsupport::rtr_diff_oracle(from_set, st.current());
      CHECK(announced == oracle.announce);
      CHECK(withdrawn == oracle.withdraw);
    }
  }

  SECTION("query at the current serial is an empty diff") {
    const auto replies =
        handle_client(st, make_serial_query(st.session_id, st.serial));
    REQUIRE(replies.size() == 2);
    CHECK(replies.back().type == RtrPduType::EndOfData);
  }

  SECTION("session mismatch forces a cache reset") {
    const auto replies =
        handle_client(st, make_serial_query(st.session_id + 1, st.serial));
    REQUIRE(replies.size() == 1);
    CHECK(replies.front().type == RtrPduType::CacheReset);
  }

  SECTION("serial outside the window forces a cache reset") {
    const auto replies = handle_client(st, make_serial_query(st.session_id, 1));
    REQUIRE(replies.size() == 1);
    CHECK(replies.front().type == RtrPduType::CacheReset);
  }

  SECTION("non-query pdus are answered with an error report") {
    const auto bad = make_cache_reset();
    const auto replies = handle_client(st, bad);
    REQUIRE(replies.size() == 1);
    CHECK(replies.front().type == RtrPduType::ErrorReport);
    CHECK(replies.front().session_id == kRtrErrInvalidRequest);
    CHECK(replies.front().bad_pdu == encode_pdu(bad));
  }
}

TEST_CASE("rtr server and client over loopback") {
  CacheState initial;
  initial.session_id = 901;
  VrpSet v;
  v.roas.insert(testsupport::roa(65000, "192.0.2.0/24", 24, "RIPE"));
  v.roas.insert(testsupport::roa(65001, "2001:db8::/32", 40, "APNIC"));
  REQUIRE(publish_update(initial, v));

  RtrServer server("127.0.0.1", 0, initial);
  server.start();
  REQUIRE(server.port() != 0);

  RtrClient client;
  client.connect("127.0.0.1", server.port());
  auto full = client.full_sync();
  REQUIRE(full.ok);
  CHECK(full.session_id == 901);
  CHECK(full.serial == 1);
  CHECK(full.announced == wire_entries(v));
  CHECK(full.withdrawn.empty());

  // No change published: no notify arrives.
  CHECK_FALSE(server.publish(v));
  CHECK_FALSE(client.wait_notify(msec(300)).has_value());

  // A real change triggers a notify and an incremental diff.
  VrpSet v2 = v;
  v2.roas.erase(v2.roas.begin());
  v2.roas.insert(testsupport::roa(65002, "198.51.100.0/24", 24, "RIPE"));
  REQUIRE(server.publish(v2));
  const auto notified = client.wait_notify(sec(3));
  REQUIRE(notified.has_value());
  CHECK(*notified == 2);

  auto diff = client.diff_sync(full.session_id, full.serial);
  REQUIRE(diff.ok);
  CHECK(diff.serial == 2);
  const auto oracle = testsupport::rtr_diff_oracle(wire_entries(v), wire_entries(v2));
  CHECK(diff.announced == oracle.announce);
  CHECK(diff.withdrawn == oracle.withdraw);

  // Stale session: server answers CacheReset, full resync recovers.
  auto stale = client.diff_sync(full.session_id + 1, full.serial);
  CHECK_FALSE(stale.ok);
  auto again = client.full_sync();
  REQUIRE(again.ok);
  CHECK(again.announced == wire_entries(v2));

  client.close();
  server.stop();
}

TEST_CASE("rtr server speaks tls when configured") {
  const std::string dir = temp_dir();
  const Identity root = make_root_ca("rtr test root");
  const Identity leaf = make_leaf(root, "127.0.0.1");
  write_identity(root, dir + "/root.pem", dir + "/root.key");
  write_identity(leaf, dir + "/rtr.pem", dir + "/rtr.key");

  CacheState initial;
  initial.session_id = 77;
  VrpSet v;
  v.roas.insert(testsupport::roa(64496, "203.0.113.0/24", 24, "LACNIC"));
  REQUIRE(publish_update(initial, v));

  RtrServer server("127.0.0.1", 0, initial,
                   RtrTlsConfig{dir + "/rtr.pem", dir + "/rtr.key"});
  server.start();

  RtrClient client;
  client.connect("127.0.0.1", server.port(), dir + "/root.pem");
  auto full = client.full_sync();
  REQUIRE(full.ok);
  CHECK(full.session_id == 77);
  CHECK(full.announced == wire_entries(v));

  // A client without the right trust root refuses the handshake.
  RtrClient untrusting;
  const Identity other = make_root_ca("some other root");
  write_identity(other, dir + "/other.pem", dir + "/other.key");
  CHECK_THROWS(untrusting.connect("127.0.0.1", server.port(), dir + "/other.pem"));

  client.close();
  server.stop();
}
