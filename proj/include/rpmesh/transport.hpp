// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see LICENSE.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

#include <httplib.h>

#include "rpmesh/lists.hpp"
#include "rpmesh/node_service.hpp"
#include "rpmesh/time.hpp"

namespace rpmesh {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One authenticated GET against a peer. Implementations throw TransportError
// for unreachable peers, failed authentication, and non-200 replies.
class PeerTransport {
 public:
  virtual ~PeerTransport() = default;
  virtual std::string get(const PeerAddress& peer, const std::string& path) = 0;
};

// In-process network for simulations: node endpoints are reachable by
// address, and a per-address down flag stands in for network failure.
// Requests carry the caller's identity so the target's access log fills in
// the same way the TLS layer would fill it.
class MemoryNetwork {
 public:
  explicit MemoryNetwork(std::function<TimePoint()> clock)
      : clock_(std::move(clock)) {}

  void attach(const PeerAddress& addr, EndpointHandler* handler) {
    nodes_[addr] = handler;
  }
  void detach(const PeerAddress& addr) {
    nodes_.erase(addr);
    down_.erase(addr);
  }
  void set_down(const PeerAddress& addr, bool down) {
    if (down)
      down_.insert(addr);
    else
      down_.erase(addr);
  }
  bool is_down(const PeerAddress& addr) const { return down_.count(addr) != 0; }

  std::string get_as(const PeerAddress& client, const PeerAddress& peer,
                     const std::string& path) {
    if (down_.count(client))
      throw TransportError("local network down: " + client.to_string());
    const auto it = nodes_.find(peer);
    if (it == nodes_.end() || down_.count(peer))
      throw TransportError("peer unreachable: " + peer.to_string());
    const auto doc = it->second->serve(client, path, clock_());
    if (!doc)
      throw TransportError("not found on " + peer.to_string() + ": " + path);
    return doc->body;
  }

  std::unique_ptr<PeerTransport> transport_for(PeerAddress self);

 private:
  std::function<TimePoint()> clock_;
  std::map<PeerAddress, EndpointHandler*> nodes_;
  std::set<PeerAddress> down_;
};

class MemoryTransport : public PeerTransport {
 public:
  MemoryTransport(MemoryNetwork& net, PeerAddress self)
      : net_(net), self_(std::move(self)) {}

  std::string get(const PeerAddress& peer, const std::string& path) override {
    return net_.get_as(self_, peer, path);
  }

 private:
  MemoryNetwork& net_;
  PeerAddress self_;
};

inline std::unique_ptr<PeerTransport> MemoryNetwork::transport_for(PeerAddress self) {
  return std::make_unique<MemoryTransport>(*this, std::move(self));
}

// Live transport: mutual-TLS GET against the peer's HTTPS port. A peer whose
// certificate does not chain to the trust root fails the handshake and is
// indistinguishable from an unreachable one.
class HttpsTransport : public PeerTransport {
 public:
  HttpsTransport(std::string cert_file, std::string key_file,
                 std::string root_file, std::uint16_t self_port, Duration timeout)
      : cert_file_(std::move(cert_file)),
        key_file_(std::move(key_file)),
        root_file_(std::move(root_file)),
        self_port_(self_port),
        timeout_(timeout) {}

  std::string get(const PeerAddress& peer, const std::string& path) override {
    httplib::SSLClient cli(peer.host, peer.port, cert_file_, key_file_);
    cli.set_ca_cert_path(root_file_);
    cli.enable_server_certificate_verification(true);
    const auto secs = static_cast<time_t>(timeout_.count() / 1000);
    const auto usecs = static_cast<time_t>((timeout_.count() % 1000) * 1000);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    httplib::Headers headers{{"X-Node-Port", std::to_string(self_port_)}};
    auto res = cli.Get(path, headers);
    if (!res)
      throw TransportError("peer unreachable: " + peer.to_string() + " (" +
                           httplib::to_string(res.error()) + ")");
    if (res->status != 200)
      throw TransportError("HTTP " + std::to_string(res->status) + " from " +
                           peer.to_string() + path);
    return res->body;
  }

 private:
  std::string cert_file_;
  std::string key_file_;
  std::string root_file_;
  std::uint16_t self_port_;
  Duration timeout_;
};

}  // namespace rpmesh
