// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see LICENSE.
//
// RTR version 1 codec, the serial-numbered cache it serves, and a small
// TCP/TLS server plus test client. Only roa-kind VRPs travel over RTR; the
// other payload kinds stay on the HTTP surface.
#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/err.h>
#include <openssl/ssl.h>
#include <openssl/x509v3.h>

#include <array>
#include <atomic>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rpmesh/time.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

inline constexpr std::uint8_t kRtrVersion = 1;

enum class RtrPduType : std::uint8_t {
  SerialNotify = 0,
  SerialQuery = 1,
  ResetQuery = 2,
  CacheResponse = 3,
  Ipv4Prefix = 4,
  Ipv6Prefix = 6,
  EndOfData = 7,
  CacheReset = 8,
  ErrorReport = 10,
};

// Error codes carried in ErrorReport PDUs.
inline constexpr std::uint16_t kRtrErrCorruptData = 0;
inline constexpr std::uint16_t kRtrErrInternal = 1;
inline constexpr std::uint16_t kRtrErrNoData = 2;
inline constexpr std::uint16_t kRtrErrInvalidRequest = 3;
inline constexpr std::uint16_t kRtrErrUnsupportedVersion = 4;
inline constexpr std::uint16_t kRtrErrUnsupportedType = 5;

class RtrError : public std::runtime_error {
 public:
  RtrError(std::uint16_t code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  std::uint16_t code() const { return code_; }

 private:
  std::uint16_t code_;
};

// One protocol data unit. Fields beyond the ones a type carries stay at
// their defaults, so decode(encode(p)) == p for properly built PDUs.
struct RtrPdu {
  RtrPduType type = RtrPduType::ResetQuery;
  std::uint16_t session_id = 0;  // doubles as the error code for ErrorReport
  std::uint32_t serial = 0;

  // prefix payloads
  std::uint8_t flags = 0;  // 1 announce, 0 withdraw
  std::uint8_t prefix_len = 0;
  std::uint8_t max_len = 0;
  std::array<std::uint8_t, 16> prefix{};  // v4 uses the first 4 bytes
  std::uint32_t asn = 0;

  // EndOfData timers, seconds
  std::uint32_t refresh = 0;
  std::uint32_t retry = 0;
  std::uint32_t expire = 0;

  // ErrorReport payload
  std::vector<std::uint8_t> bad_pdu;
  std::string error_text;

  bool operator==(const RtrPdu&) const = default;
};

struct RtrTimers {
  std::uint32_t refresh = 3600;
  std::uint32_t retry = 600;
  std::uint32_t expire = 7200;
};

inline RtrPdu make_reset_query() {
  RtrPdu p;
  p.type = RtrPduType::ResetQuery;
  return p;
}

inline RtrPdu make_serial_query(std::uint16_t session, std::uint32_t serial) {
  RtrPdu p;
  p.type = RtrPduType::SerialQuery;
  p.session_id = session;
  p.serial = serial;
  return p;
}

inline RtrPdu make_serial_notify(std::uint16_t session, std::uint32_t serial) {
  RtrPdu p;
  p.type = RtrPduType::SerialNotify;
  p.session_id = session;
  p.serial = serial;
  return p;
}

inline RtrPdu make_cache_response(std::uint16_t session) {
  RtrPdu p;
  p.type = RtrPduType::CacheResponse;
  p.session_id = session;
  return p;
}

inline RtrPdu make_cache_reset() {
  RtrPdu p;
  p.type = RtrPduType::CacheReset;
  return p;
}

inline RtrPdu make_end_of_data(std::uint16_t session, std::uint32_t serial,
                               const RtrTimers& t) {
  RtrPdu p;
  p.type = RtrPduType::EndOfData;
  p.session_id = session;
  p.serial = serial;
  p.refresh = t.refresh;
  p.retry = t.retry;
  p.expire = t.expire;
  return p;
}

inline RtrPdu make_error_report(std::uint16_t code, std::vector<std::uint8_t> bad_pdu,
                                std::string text) {
  RtrPdu p;
  p.type = RtrPduType::ErrorReport;
  p.session_id = code;
  p.bad_pdu = std::move(bad_pdu);
  p.error_text = std::move(text);
  return p;
}

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

}  // namespace detail

// Wire format: 8-byte header (version, type, 16-bit type-specific field,
// 32-bit total length), big-endian throughout.
inline std::vector<std::uint8_t> encode_pdu(const RtrPdu& p) {
  std::vector<std::uint8_t> b;
  b.push_back(kRtrVersion);
  b.push_back(static_cast<std::uint8_t>(p.type));
  switch (p.type) {
    case RtrPduType::SerialNotify:
    case RtrPduType::SerialQuery:
    case RtrPduType::CacheResponse:
    case RtrPduType::EndOfData:
    case RtrPduType::ErrorReport:
      detail::put_u16(b, p.session_id);
      break;
    default:
      detail::put_u16(b, 0);
      break;
  }
  detail::put_u32(b, 0);  // length, patched below
  switch (p.type) {
    case RtrPduType::SerialNotify:
    case RtrPduType::SerialQuery:
      detail::put_u32(b, p.serial);
      break;
    case RtrPduType::ResetQuery:
    case RtrPduType::CacheResponse:
    case RtrPduType::CacheReset:
      break;
    case RtrPduType::Ipv4Prefix:
    case RtrPduType::Ipv6Prefix: {
      b.push_back(p.flags);
      b.push_back(p.prefix_len);
      b.push_back(p.max_len);
      b.push_back(0);
      const std::size_t n = p.type == RtrPduType::Ipv4Prefix ? 4 : 16;
      b.insert(b.end(), p.prefix.begin(), p.prefix.begin() + n);
      detail::put_u32(b, p.asn);
      break;
    }
    case RtrPduType::EndOfData:
      detail::put_u32(b, p.serial);
      detail::put_u32(b, p.refresh);
      detail::put_u32(b, p.retry);
      detail::put_u32(b, p.expire);
      break;
    case RtrPduType::ErrorReport:
      detail::put_u32(b, static_cast<std::uint32_t>(p.bad_pdu.size()));
      b.insert(b.end(), p.bad_pdu.begin(), p.bad_pdu.end());
      detail::put_u32(b, static_cast<std::uint32_t>(p.error_text.size()));
      b.insert(b.end(), p.error_text.begin(), p.error_text.end());
      break;
  }
  const auto len = static_cast<std::uint32_t>(b.size());
  b[4] = static_cast<std::uint8_t>(len >> 24);
  b[5] = static_cast<std::uint8_t>(len >> 16);
  b[6] = static_cast<std::uint8_t>(len >> 8);
  b[7] = static_cast<std::uint8_t>(len);
  return b;
}

inline RtrPdu decode_pdu(const std::uint8_t* d, std::size_t n) {
  if (n < 8) throw RtrError(kRtrErrCorruptData, "truncated header");
  if (d[0] != kRtrVersion)
    throw RtrError(kRtrErrUnsupportedVersion, "unsupported protocol version");
  if (detail::get_u32(d + 4) != n)
    throw RtrError(kRtrErrCorruptData, "length field does not match frame");
  const std::uint16_t hdr16 = detail::get_u16(d + 2);
  const auto need = [n](std::size_t want) {
    if (n != want) throw RtrError(kRtrErrCorruptData, "wrong length for pdu type");
  };
  RtrPdu p;
  switch (d[1]) {
    case 0:
    case 1:
      p.type = static_cast<RtrPduType>(d[1]);
      p.session_id = hdr16;
      need(12);
      p.serial = detail::get_u32(d + 8);
      break;
    case 2:
      p.type = RtrPduType::ResetQuery;
      need(8);
      break;
    case 3:
      p.type = RtrPduType::CacheResponse;
      p.session_id = hdr16;
      need(8);
      break;
    case 4:
      p.type = RtrPduType::Ipv4Prefix;
      need(20);
      p.flags = d[8];
      p.prefix_len = d[9];
      p.max_len = d[10];
      std::copy(d + 12, d + 16, p.prefix.begin());
      p.asn = detail::get_u32(d + 16);
      if (p.flags > 1 || p.max_len > 32 || p.prefix_len > p.max_len)
        throw RtrError(kRtrErrCorruptData, "bad ipv4 prefix pdu");
      break;
    case 6:
      p.type = RtrPduType::Ipv6Prefix;
      need(32);
      p.flags = d[8];
      p.prefix_len = d[9];
      p.max_len = d[10];
      std::copy(d + 12, d + 28, p.prefix.begin());
      p.asn = detail::get_u32(d + 28);
      if (p.flags > 1 || p.max_len > 128 || p.prefix_len > p.max_len)
        throw RtrError(kRtrErrCorruptData, "bad ipv6 prefix pdu");
      break;
    case 7:
      p.type = RtrPduType::EndOfData;
      p.session_id = hdr16;
      need(24);
      p.serial = detail::get_u32(d + 8);
      p.refresh = detail::get_u32(d + 12);
      p.retry = detail::get_u32(d + 16);
      p.expire = detail::get_u32(d + 20);
      break;
    case 8:
      p.type = RtrPduType::CacheReset;
      need(8);
      break;
    case 10: {
      p.type = RtrPduType::ErrorReport;
      p.session_id = hdr16;
      if (n < 16) throw RtrError(kRtrErrCorruptData, "short error report");
      const std::uint32_t lp = detail::get_u32(d + 8);
      if (12 + static_cast<std::size_t>(lp) + 4 > n)
        throw RtrError(kRtrErrCorruptData, "bad error report");
      p.bad_pdu.assign(d + 12, d + 12 + lp);
      const std::uint32_t lt = detail::get_u32(d + 12 + lp);
      if (16 + static_cast<std::size_t>(lp) + lt != n)
        throw RtrError(kRtrErrCorruptData, "bad error report");
      p.error_text.assign(reinterpret_cast<const char*>(d + 16 + lp), lt);
      break;
    }
    default:
      throw RtrError(kRtrErrUnsupportedType, "unsupported pdu type");
  }
  return p;
}

inline RtrPdu decode_pdu(const std::vector<std::uint8_t>& b) {
  return decode_pdu(b.data(), b.size());
}

// One roa on the wire. The trust-anchor attribution is not part of the RTR
// data model, so two roas differing only by TA collapse into one entry.
struct RtrEntry {
  bool v6 = false;
  std::array<std::uint8_t, 16> prefix{};
  std::uint8_t prefix_len = 0;
  std::uint8_t max_len = 0;
  std::uint32_t asn = 0;

  auto operator<=>(const RtrEntry&) const = default;
};

inline std::set<RtrEntry> wire_entries(const VrpSet& vrps) {
  std::set<RtrEntry> out;
  for (const auto& text : vrps.roas) {
    const RoaFields f = parse_roa(text);
    const ParsedPrefix pp = parse_prefix(f.prefix);
    RtrEntry e;
    e.v6 = pp.v6;
    e.prefix = pp.bytes;
    e.prefix_len = static_cast<std::uint8_t>(pp.len);
    e.max_len = static_cast<std::uint8_t>(f.max_length);
    e.asn = f.asn;
    out.insert(e);
  }
  return out;
}

inline RtrPdu prefix_pdu(const RtrEntry& e, bool announce) {
  RtrPdu p;
  p.type = e.v6 ? RtrPduType::Ipv6Prefix : RtrPduType::Ipv4Prefix;
  p.flags = announce ? 1 : 0;
  p.prefix_len = e.prefix_len;
  p.max_len = e.max_len;
  p.prefix = e.prefix;
  p.asn = e.asn;
  return p;
}

inline RtrEntry entry_from_pdu(const RtrPdu& p) {
  RtrEntry e;
  e.v6 = p.type == RtrPduType::Ipv6Prefix;
  e.prefix = p.prefix;
  e.prefix_len = p.prefix_len;
  e.max_len = p.max_len;
  e.asn = p.asn;
  return e;
}

// Serial-numbered history of the served roa set. Snapshots for the last
// kWindow serials make incremental SerialQuery replies possible; clients
// further behind are told to resync via CacheReset.
struct CacheState {
  static constexpr std::size_t kWindow = 10;

  std::uint16_t session_id = 0;
  RtrTimers timers;
  std::uint32_t serial = 0;
  std::map<std::uint32_t, std::set<RtrEntry>> snapshots{{0, {}}};

  const std::set<RtrEntry>& current() const { return snapshots.at(serial); }
};

// Applies a new master set. The serial advances only when the roa set
// actually changed; the snapshot window is then pruned to kWindow entries.
// Returns whether anything changed.
inline bool publish_update(CacheState& st, const VrpSet& master) {
  auto entries = wire_entries(master);
  if (entries == st.current()) return false;
  st.serial += 1;
  st.snapshots.emplace(st.serial, std::move(entries));
  while (st.snapshots.size() > CacheState::kWindow)
    st.snapshots.erase(st.snapshots.begin());
  return true;
}

// Computes the reply sequence for one client PDU. A reply ending in an
// ErrorReport means the server should close the connection afterwards.
inline std::vector<RtrPdu> handle_client(const CacheState& st, const RtrPdu& in) {
  std::vector<RtrPdu> out;
  switch (in.type) {
    case RtrPduType::ResetQuery: {
      out.push_back(make_cache_response(st.session_id));
      for (const auto& e : st.current()) out.push_back(prefix_pdu(e, true));
      out.push_back(make_end_of_data(st.session_id, st.serial, st.timers));
      break;
    }
    case RtrPduType::SerialQuery: {
      const auto it = st.snapshots.find(in.serial);
      if (in.session_id != st.session_id || it == st.snapshots.end()) {
        out.push_back(make_cache_reset());
        break;
      }
      out.push_back(make_cache_response(st.session_id));
      const auto& have = it->second;
      const auto& want = st.current();
      for (const auto& e : want)
        if (!have.count(e)) out.push_back(prefix_pdu(e, true));
      for (const auto& e : have)
        if (!want.count(e)) out.push_back(prefix_pdu(e, false));
      out.push_back(make_end_of_data(st.session_id, st.serial, st.timers));
      break;
    }
    default:
      out.push_back(make_error_report(kRtrErrInvalidRequest, encode_pdu(in),
                                      "unexpected pdu from client"));
      break;
  }
  return out;
}

inline RtrPdu notify_pdu(const CacheState& st) {
  return make_serial_notify(st.session_id, st.serial);
}

namespace detail {

inline void ignore_sigpipe() {
  static const int once = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return 0;
  }();
  (void)once;
}

// Blocking byte stream over a socket, optionally TLS-wrapped. All I/O on a
// stream must come from one thread.
class RtrStream {
 public:
  RtrStream(int fd, SSL* ssl) : fd_(fd), ssl_(ssl) {}
  ~RtrStream() { close(); }
  RtrStream(const RtrStream&) = delete;
  RtrStream& operator=(const RtrStream&) = delete;

  bool read_exact(std::uint8_t* buf, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      ssize_t r;
      if (ssl_)
        r = SSL_read(ssl_, buf + got, static_cast<int>(n - got));
      else
        r = ::recv(fd_, buf + got, n - got, 0);
      if (r <= 0) return false;
      got += static_cast<std::size_t>(r);
    }
    return true;
  }

  bool write_all(const std::uint8_t* buf, std::size_t n) {
    std::size_t sent = 0;
    while (sent < n) {
      ssize_t r;
      if (ssl_)
        r = SSL_write(ssl_, buf + sent, static_cast<int>(n - sent));
      else
        r = ::send(fd_, buf + sent, n - sent, MSG_NOSIGNAL);
      if (r <= 0) return false;
      sent += static_cast<std::size_t>(r);
    }
    return true;
  }

  // True when a read would find data now (TLS-buffered bytes included).
  bool readable(int timeout_ms) {
    if (ssl_ && SSL_pending(ssl_) > 0) return true;
    pollfd pfd{fd_, POLLIN, 0};
    return ::poll(&pfd, 1, timeout_ms) > 0;
  }

  void close() {
    if (ssl_) {
      SSL_shutdown(ssl_);
      SSL_free(ssl_);
      ssl_ = nullptr;
    }
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  SSL* ssl_ = nullptr;
};

// Reads one framed PDU; nullopt on clean close or receive timeout.
inline std::optional<RtrPdu> read_pdu(RtrStream& s) {
  std::uint8_t hdr[8];
  if (!s.read_exact(hdr, 8)) return std::nullopt;
  const std::uint32_t len = get_u32(hdr + 4);
  if (len < 8 || len > (1u << 16))
    throw RtrError(kRtrErrCorruptData, "unreasonable frame length");
  std::vector<std::uint8_t> buf(hdr, hdr + 8);
  buf.resize(len);
  if (len > 8 && !s.read_exact(buf.data() + 8, len - 8)) return std::nullopt;
  return decode_pdu(buf.data(), buf.size());
}

inline bool write_pdus(RtrStream& s, const std::vector<RtrPdu>& pdus) {
  std::vector<std::uint8_t> out;
  for (const auto& p : pdus) {
    const auto b = encode_pdu(p);
    out.insert(out.end(), b.begin(), b.end());
  }
  return s.write_all(out.data(), out.size());
}

inline void set_socket_timeout(int fd, Duration d) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(d.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((d.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

inline int connect_tcp(const std::string& host, std::uint16_t port, Duration timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
    throw std::runtime_error("cannot resolve " + host);
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    set_socket_timeout(fd, timeout);
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0)
    throw std::runtime_error("cannot connect to " + host + ":" + service);
  return fd;
}

}  // namespace detail

struct RtrTlsConfig {
  std::string cert_file;
  std::string key_file;
};

// Serves the cache over RTR. publish() applies a master update and, when the
// roa set changed, queues a SerialNotify for every connected client. Plain
// TCP by default, TLS-wrapped when configured.
class RtrServer {
 public:
  RtrServer(std::string host, std::uint16_t port, CacheState initial,
            std::optional<RtrTlsConfig> tls = std::nullopt)
      : host_(std::move(host)), port_(port), state_(std::move(initial)),
        tls_(std::move(tls)) {}

  ~RtrServer() {
    stop();
    if (ctx_) SSL_CTX_free(ctx_);
  }
  RtrServer(const RtrServer&) = delete;
  RtrServer& operator=(const RtrServer&) = delete;

  void start() {
    detail::ignore_sigpipe();
    if (tls_) {
      ctx_ = SSL_CTX_new(TLS_server_method());
      if (!ctx_) throw std::runtime_error("SSL_CTX_new failed");
      if (SSL_CTX_use_certificate_chain_file(ctx_, tls_->cert_file.c_str()) != 1 ||
          SSL_CTX_use_PrivateKey_file(ctx_, tls_->key_file.c_str(),
                                      SSL_FILETYPE_PEM) != 1)
        throw std::runtime_error("cannot load RTR server certificate");
    }
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port_);
    if (host_.empty() || host_ == "0.0.0.0") {
      addr.sin_addr.s_addr = htonl(INADDR_ANY);
    } else if (inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1) {
      throw std::runtime_error("RTR bind host must be an IPv4 address: " + host_);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw std::runtime_error("RTR bind failed on port " + std::to_string(port_));
    if (::listen(listen_fd_, 16) != 0) throw std::runtime_error("RTR listen failed");
    socklen_t alen = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    running_ = false;
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::unique_ptr<Session>> sess;
    {
      std::lock_guard<std::mutex> lk(mu_);
      sess.swap(sessions_);
    }
    for (auto& s : sess)
      if (s->thread.joinable()) s->thread.join();
    if (listen_fd_ >= 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
  }

  std::uint16_t port() const { return port_; }

  bool publish(const VrpSet& master) {
    std::lock_guard<std::mutex> lk(mu_);
    if (!publish_update(state_, master)) return false;
    for (auto& s : sessions_)
      if (!s->done) s->notify = static_cast<std::int64_t>(state_.serial);
    reap_locked();
    return true;
  }

  CacheState state_snapshot() const {
    std::lock_guard<std::mutex> lk(mu_);
    return state_;
  }

 private:
  struct Session {
    std::thread thread;
    std::atomic<bool> done{false};
    std::atomic<std::int64_t> notify{-1};  // serial to announce, -1 = none
  };

  void accept_loop() {
    while (running_) {
      pollfd pfd{listen_fd_, POLLIN, 0};
      if (::poll(&pfd, 1, 200) <= 0) continue;
      const int cfd = ::accept(listen_fd_, nullptr, nullptr);
      if (cfd < 0) continue;
      detail::set_socket_timeout(cfd, sec(5));
      std::lock_guard<std::mutex> lk(mu_);
      sessions_.push_back(std::make_unique<Session>());
      Session* sess = sessions_.back().get();
      sess->thread = std::thread([this, sess, cfd] { serve_client(sess, cfd); });
    }
  }

  void serve_client(Session* sess, int cfd) {
    SSL* ssl = nullptr;
    if (ctx_) {
      ssl = SSL_new(ctx_);
      SSL_set_fd(ssl, cfd);
      if (SSL_accept(ssl) != 1) {
        SSL_free(ssl);
        ::close(cfd);
        sess->done = true;
        return;
      }
    }
    detail::RtrStream stream(cfd, ssl);
    while (running_) {
      const std::int64_t ns = sess->notify.exchange(-1);
      if (ns >= 0) {
        std::uint16_t sid;
        {
          std::lock_guard<std::mutex> lk(mu_);
          sid = state_.session_id;
        }
        if (!detail::write_pdus(
                stream, {make_serial_notify(sid, static_cast<std::uint32_t>(ns))}))
          break;
      }
      if (!stream.readable(100)) continue;
      std::optional<RtrPdu> in;
      try {
        in = detail::read_pdu(stream);
      } catch (const RtrError& e) {
        detail::write_pdus(stream, {make_error_report(e.code(), {}, e.what())});
        break;
      }
      if (!in) break;
      if (in->type == RtrPduType::ErrorReport) break;
      std::vector<RtrPdu> out;
      {
        std::lock_guard<std::mutex> lk(mu_);
        out = handle_client(state_, *in);
      }
      if (!detail::write_pdus(stream, out)) break;
      if (!out.empty() && out.back().type == RtrPduType::ErrorReport) break;
    }
    stream.close();
    sess->done = true;
  }

  void reap_locked() {
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if ((*it)->done) {
        if ((*it)->thread.joinable()) (*it)->thread.join();
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::string host_;
  std::uint16_t port_;
  CacheState state_;
  std::optional<RtrTlsConfig> tls_;
  SSL_CTX* ctx_ = nullptr;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  mutable std::mutex mu_;
  std::vector<std::unique_ptr<Session>> sessions_;
};

// Minimal router-side client used by tests and the command line tool.
class RtrClient {
 public:
  ~RtrClient() { close(); }

  // With root_file set the connection is TLS-wrapped and the server is
  // verified against that root.
  void connect(const std::string& host, std::uint16_t port,
               const std::string& root_file = "") {
    detail::ignore_sigpipe();
    close();
    const int fd = detail::connect_tcp(host, port, sec(5));
    SSL* ssl = nullptr;
    if (!root_file.empty()) {
      ctx_ = SSL_CTX_new(TLS_client_method());
      if (!ctx_) {
        ::close(fd);
        throw std::runtime_error("SSL_CTX_new failed");
      }
      if (SSL_CTX_load_verify_locations(ctx_, root_file.c_str(), nullptr) != 1) {
        ::close(fd);
        throw std::runtime_error("cannot load trust root " + root_file);
      }
      SSL_CTX_set_verify(ctx_, SSL_VERIFY_PEER, nullptr);
      ssl = SSL_new(ctx_);
      SSL_set_fd(ssl, fd);
      SSL_set_tlsext_host_name(ssl, host.c_str());
      X509_VERIFY_PARAM* param = SSL_get0_param(ssl);
      in6_addr scratch6;
      in_addr scratch4;
      if (inet_pton(AF_INET, host.c_str(), &scratch4) == 1 ||
          inet_pton(AF_INET6, host.c_str(), &scratch6) == 1)
        X509_VERIFY_PARAM_set1_ip_asc(param, host.c_str());
      else
        X509_VERIFY_PARAM_set1_host(param, host.c_str(), host.size());
      if (SSL_connect(ssl) != 1) {
        SSL_free(ssl);
        ::close(fd);
        throw std::runtime_error("TLS handshake with RTR server failed");
      }
    }
    stream_.emplace(fd, ssl);
  }

  struct Sync {
    bool ok = false;  // false: server answered CacheReset, resync needed
    std::uint16_t session_id = 0;
    std::uint32_t serial = 0;
    std::set<RtrEntry> announced;
    std::set<RtrEntry> withdrawn;
  };

  Sync full_sync() { return exchange(make_reset_query()); }

  Sync diff_sync(std::uint16_t session, std::uint32_t serial) {
    return exchange(make_serial_query(session, serial));
  }

  // Waits for an unsolicited SerialNotify; nullopt on timeout.
  std::optional<std::uint32_t> wait_notify(Duration timeout) {
    require_open();
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      if (!stream_->readable(50)) continue;
      const auto p = detail::read_pdu(*stream_);
      if (!p) throw std::runtime_error("RTR connection closed");
      if (p->type == RtrPduType::SerialNotify) return p->serial;
    }
    return std::nullopt;
  }

  void close() {
    if (stream_) {
      stream_->close();
      stream_.reset();
    }
    if (ctx_) {
      SSL_CTX_free(ctx_);
      ctx_ = nullptr;
    }
  }

 private:
  void require_open() {
    if (!stream_) throw std::runtime_error("RTR client is not connected");
  }

  Sync exchange(const RtrPdu& query) {
    require_open();
    if (!detail::write_pdus(*stream_, {query}))
      throw std::runtime_error("RTR send failed");
    Sync out;
    for (;;) {
      const auto p = detail::read_pdu(*stream_);
      if (!p) throw std::runtime_error("RTR connection closed mid-reply");
      switch (p->type) {
        case RtrPduType::SerialNotify:
          continue;  // unsolicited, irrelevant to the running exchange
        case RtrPduType::CacheResponse:
          out.session_id = p->session_id;
          continue;
        case RtrPduType::Ipv4Prefix:
        case RtrPduType::Ipv6Prefix:
          (p->flags ? out.announced : out.withdrawn).insert(entry_from_pdu(*p));
          continue;
        case RtrPduType::EndOfData:
          out.ok = true;
          out.session_id = p->session_id;
          out.serial = p->serial;
          return out;
        case RtrPduType::CacheReset:
          out.ok = false;
          return out;
        case RtrPduType::ErrorReport:
          throw RtrError(p->session_id, "server error: " + p->error_text);
        default:
          throw RtrError(kRtrErrCorruptData, "unexpected pdu in reply");
      }
    }
  }

  std::optional<detail::RtrStream> stream_;
  SSL_CTX* ctx_ = nullptr;
};

}  // namespace rpmesh
