// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see the accompanying LICENSE file.
#pragma once

#include <arpa/inet.h>

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <iterator>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "rpmesh/time.hpp"

namespace rpmesh {

// Validated payloads are modeled as canonical strings: two objects are equal
// iff their canonical encodings are byte-equal. Everything downstream (file
// exchange, voting, diffing) operates on these strings and never needs to
// understand the fields again.

enum class VrpKind { Roa, Aspa, BgpsecKey };

struct Vrp {
  VrpKind kind;
  std::string text;  // canonical encoding

  auto operator<=>(const Vrp&) const = default;
};

struct ParsedPrefix {
  bool v6 = false;
  std::array<std::uint8_t, 16> bytes{};  // v4 uses the first 4
  int len = 0;

  auto operator<=>(const ParsedPrefix&) const = default;
  int addr_width() const { return v6 ? 128 : 32; }
};

// Strict CIDR parser: textual address, '/', length, and no bits set beyond
// the prefix length. Accepting host bits would let two spellings of the same
// logical prefix produce distinct canonical strings.
inline ParsedPrefix parse_prefix(const std::string& cidr) {
  const auto slash = cidr.find('/');
  if (slash == std::string::npos) throw ParseError("prefix missing '/': " + cidr);
  const std::string addr = cidr.substr(0, slash);
  const std::string len_s = cidr.substr(slash + 1);
  if (len_s.empty() || len_s.size() > 3) throw ParseError("bad prefix length: " + cidr);
  for (char ch : len_s) {
    if (ch < '0' || ch > '9') throw ParseError("bad prefix length: " + cidr);
  }
  ParsedPrefix p;
  p.len = std::stoi(len_s);
  if (addr.find(':') != std::string::npos) {
    p.v6 = true;
    if (inet_pton(AF_INET6, addr.c_str(), p.bytes.data()) != 1) {
      throw ParseError("bad IPv6 address: " + cidr);
    }
  } else {
    if (inet_pton(AF_INET, addr.c_str(), p.bytes.data()) != 1) {
      throw ParseError("bad IPv4 address: " + cidr);
    }
  }
  if (p.len < 0 || p.len > p.addr_width()) {
    throw ParseError("prefix length out of range: " + cidr);
  }
  const int width = p.addr_width();
  for (int bit = p.len; bit < width; ++bit) {
    if (p.bytes[static_cast<std::size_t>(bit / 8)] & (0x80u >> (bit % 8))) {
      throw ParseError("host bits set beyond prefix length: " + cidr);
    }
  }
  return p;
}

inline std::string format_prefix(const ParsedPrefix& p) {
  char buf[INET6_ADDRSTRLEN];
  const int af = p.v6 ? AF_INET6 : AF_INET;
  if (!inet_ntop(af, p.bytes.data(), buf, sizeof buf)) {
    throw ParseError("unformattable prefix");
  }
  return std::string(buf) + "/" + std::to_string(p.len);
}

struct RoaFields {
  std::uint32_t asn = 0;
  std::string prefix;  // CIDR text
  int max_length = 0;
  std::string ta;
};

// Canonical roa encoding with fixed field order (asn, prefix, maxLength, ta):
//   {"asn":"AS65537","prefix":"192.0.2.0/24","maxLength":24,"ta":"ARIN"}
inline Vrp canonicalize_vrp(const RoaFields& f) {
  const ParsedPrefix p = parse_prefix(f.prefix);
  if (f.max_length < p.len) {
    throw ParseError("maxLength " + std::to_string(f.max_length) +
                     " below prefix length in " + f.prefix);
  }
  if (f.max_length > p.addr_width()) {
    throw ParseError("maxLength " + std::to_string(f.max_length) +
                     " above address width in " + f.prefix);
  }
  if (f.ta.empty()) throw ParseError("empty trust anchor name");
  std::string s = "{\"asn\":\"AS" + std::to_string(f.asn) + "\",\"prefix\":\"" +
                  format_prefix(p) + "\",\"maxLength\":" +
                  std::to_string(f.max_length) + ",\"ta\":" +
                  nlohmann::json(f.ta).dump() + "}";
  return Vrp{VrpKind::Roa, std::move(s)};
}

inline std::uint32_t parse_asn(const nlohmann::json& v) {
  if (v.is_number_unsigned()) {
    const auto n = v.get<std::uint64_t>();
    if (n > 0xFFFFFFFFull) throw ParseError("ASN out of range");
    return static_cast<std::uint32_t>(n);
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.size() < 3 || s[0] != 'A' || s[1] != 'S') {
      throw ParseError("bad ASN: " + s);
    }
    std::uint64_t n = 0;
    for (std::size_t i = 2; i < s.size(); ++i) {
      if (s[i] < '0' || s[i] > '9') throw ParseError("bad ASN: " + s);
      n = n * 10 + static_cast<std::uint64_t>(s[i] - '0');
      if (n > 0xFFFFFFFFull) throw ParseError("ASN out of range: " + s);
    }
    return static_cast<std::uint32_t>(n);
  }
  throw ParseError("ASN must be a number or 'AS<number>' string");
}

// Roa from a parsed JSON object (file or peer input); field order and spacing
// in the input are irrelevant, the output is canonical. A missing maxLength
// means the prefix length, as it does in the source objects.
inline Vrp roa_from_json(const nlohmann::json& o) {
  if (!o.is_object()) throw ParseError("roa entry is not an object");
  for (const auto& [key, _] : o.items()) {
    if (key != "asn" && key != "prefix" && key != "maxLength" && key != "ta") {
      throw ParseError("unknown roa field: " + key);
    }
  }
  RoaFields f;
  f.asn = parse_asn(o.at("asn"));
  f.prefix = o.at("prefix").get<std::string>();
  f.max_length = o.contains("maxLength") ? o.at("maxLength").get<int>()
                                         : parse_prefix(f.prefix).len;
  f.ta = o.at("ta").get<std::string>();
  return canonicalize_vrp(f);
}

// aspa / bgpsec-key payloads are carried opaquely: canonical form is the
// compact dump with object keys sorted, which is stable under reparsing.
inline Vrp canonicalize_vrp(VrpKind kind, const nlohmann::json& fields) {
  if (kind == VrpKind::Roa) return roa_from_json(fields);
  return Vrp{kind, fields.dump()};
}

// Recover roa fields from a canonical string (the RTR encoder needs them).
inline RoaFields parse_roa(const std::string& canonical) {
  nlohmann::json o;
  try {
    o = nlohmann::json::parse(canonical);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad roa: ") + e.what());
  }
  const Vrp round = roa_from_json(o);
  if (round.text != canonical) {
    throw ParseError("non-canonical roa encoding: " + canonical);
  }
  RoaFields f;
  f.asn = parse_asn(o.at("asn"));
  f.prefix = o.at("prefix").get<std::string>();
  f.max_length = o.at("maxLength").get<int>();
  f.ta = o.at("ta").get<std::string>();
  return f;
}

// The unit of exchange between nodes: three independent sets of canonical
// strings. Set operations never cross kinds.
struct VrpSet {
  std::set<std::string> roas;
  std::set<std::string> aspas;
  std::set<std::string> bgpsec_keys;

  bool operator==(const VrpSet&) const = default;

  void insert(const Vrp& v) {
    switch (v.kind) {
      case VrpKind::Roa: roas.insert(v.text); break;
      case VrpKind::Aspa: aspas.insert(v.text); break;
      case VrpKind::BgpsecKey: bgpsec_keys.insert(v.text); break;
    }
  }
  void merge(const VrpSet& other) {
    roas.insert(other.roas.begin(), other.roas.end());
    aspas.insert(other.aspas.begin(), other.aspas.end());
    bgpsec_keys.insert(other.bgpsec_keys.begin(), other.bgpsec_keys.end());
  }
  std::size_t size() const {
    return roas.size() + aspas.size() + bgpsec_keys.size();
  }
  bool empty() const { return size() == 0; }
};

// Entries present in a but not in b, per kind.
inline VrpSet vrp_difference(const VrpSet& a, const VrpSet& b) {
  auto diff = [](const std::set<std::string>& x, const std::set<std::string>& y) {
    std::set<std::string> out;
    std::set_difference(x.begin(), x.end(), y.begin(), y.end(),
                        std::inserter(out, out.end()));
    return out;
  };
  VrpSet d;
  d.roas = diff(a.roas, b.roas);
  d.aspas = diff(a.aspas, b.aspas);
  d.bgpsec_keys = diff(a.bgpsec_keys, b.bgpsec_keys);
  return d;
}

// File layout: {"roas":[...],"aspas":[...],"bgpsec_keys":[...]}; absent keys
// are empty sets. Entries are JSON values in their own right; duplicates
// collapse by set semantics.
inline VrpSet parse_vrp_file(const std::string& bytes) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad VRP file: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("VRP file is not a JSON object");
  VrpSet out;
  for (const auto& [key, value] : doc.items()) {
    VrpKind kind;
    if (key == "roas") {
      kind = VrpKind::Roa;
    } else if (key == "aspas") {
      kind = VrpKind::Aspa;
    } else if (key == "bgpsec_keys") {
      kind = VrpKind::BgpsecKey;
    } else {
      throw ParseError("unknown VRP file key: " + key);
    }
    if (!value.is_array()) throw ParseError("VRP file key '" + key + "' is not an array");
    for (const auto& entry : value) {
      out.insert(canonicalize_vrp(kind, entry));
    }
  }
  return out;
}

inline std::string serialize_vrp_file(const VrpSet& s) {
  // Canonical strings are valid JSON, so they are spliced in verbatim; the
  // std::set order gives the lexicographic sort.
  auto append_list = [](std::string& out, const std::set<std::string>& items) {
    out += '[';
    bool first = true;
    for (const auto& item : items) {
      if (!first) out += ',';
      first = false;
      out += item;
    }
    out += ']';
  };
  std::string out = "{\"roas\":";
  append_list(out, s.roas);
  out += ",\"aspas\":";
  append_list(out, s.aspas);
  out += ",\"bgpsec_keys\":";
  append_list(out, s.bgpsec_keys);
  out += "}\n";
  return out;
}

}  // namespace rpmesh
