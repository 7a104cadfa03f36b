// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see LICENSE.
#pragma once

#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <openssl/ssl.h>
#include <openssl/x509.h>
#include <openssl/x509v3.h>

#include "rpmesh/lists.hpp"
#include "rpmesh/time.hpp"

namespace rpmesh {

inline constexpr const char* kPathPeerlist = "/peerlist";
inline constexpr const char* kPathSkiplist = "/skiplist";
inline constexpr const char* kPathVrps = "/vrps";
inline constexpr const char* kPathMaster = "/master";

struct AccessLogEntry {
  PeerAddress client;
  std::string path;
  TimePoint time{};
};

// Anything that can answer an authenticated GET. The live HTTPS front end
// and the in-memory simulation network both route through this.
class EndpointHandler {
 public:
  struct Doc {
    std::string body;
    TimePoint generated_at{};
  };

  virtual ~EndpointHandler() = default;
  virtual std::optional<Doc> serve(const PeerAddress& client,
                                   const std::string& path, TimePoint now) = 0;
};

// Document store plus access log behind a node's endpoints. Writers replace
// whole documents; readers always get a consistent body/timestamp pair, so a
// fetched file can never mix two update generations.
class NodeEndpoints : public EndpointHandler {
 public:
  void put(const std::string& path, std::string body, TimePoint now) {
    std::lock_guard<std::mutex> lk(mu_);
    docs_[path] = Doc{std::move(body), now};
  }

  // Read without touching the access log (local introspection).
  std::optional<Doc> peek(const std::string& path) const {
    std::lock_guard<std::mutex> lk(mu_);
    const auto it = docs_.find(path);
    if (it == docs_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<Doc> serve(const PeerAddress& client, const std::string& path,
                           TimePoint now) override {
    std::lock_guard<std::mutex> lk(mu_);
    log_.push_back(AccessLogEntry{client, path, now});
    while (log_.size() > kLogCap) log_.pop_front();
    const auto it = docs_.find(path);
    if (it == docs_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<AccessLogEntry> access_log() const {
    std::lock_guard<std::mutex> lk(mu_);
    return {log_.begin(), log_.end()};
  }

  // Hands the accumulated entries to the discovery pass and starts afresh.
  std::vector<AccessLogEntry> drain_access_log() {
    std::lock_guard<std::mutex> lk(mu_);
    std::vector<AccessLogEntry> out(log_.begin(), log_.end());
    log_.clear();
    return out;
  }

 private:
  static constexpr std::size_t kLogCap = 4096;

  mutable std::mutex mu_;
  std::map<std::string, Doc> docs_;
  std::deque<AccessLogEntry> log_;
};

// Mutual-TLS HTTPS front end. Connections must present a client certificate
// chaining to the configured root or the handshake fails, so the access log
// only ever holds authenticated clients, identified by the common name of
// their certificate.
class HttpsNodeServer {
 public:
  HttpsNodeServer(NodeEndpoints& docs, const std::string& cert_file,
                  const std::string& key_file, const std::string& root_file,
                  std::string listen_host, std::uint16_t port)
      : docs_(docs),
        svr_(cert_file.c_str(), key_file.c_str(), root_file.c_str()),
        host_(std::move(listen_host)),
        port_(port) {
    if (!svr_.is_valid())
      throw std::runtime_error(
          "cannot initialize HTTPS server; check certificate files");
    const auto handler = [this](const httplib::Request& req,
                                httplib::Response& res) { handle(req, res); };
    for (const char* p : {kPathPeerlist, kPathSkiplist, kPathVrps, kPathMaster})
      svr_.Get(p, handler);
  }

  ~HttpsNodeServer() { stop(); }
  HttpsNodeServer(const HttpsNodeServer&) = delete;
  HttpsNodeServer& operator=(const HttpsNodeServer&) = delete;

  void start() {
    if (!svr_.bind_to_port(host_, port_))
      throw std::runtime_error("cannot bind HTTPS server to " + host_ + ":" +
                               std::to_string(port_));
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }

  void stop() {
    svr_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    const auto doc = docs_.serve(client_identity(req), req.path, wall_now());
    if (!doc) {
      res.status = 404;
      return;
    }
    res.set_header("X-Generated-At", format_rfc3339(doc->generated_at));
    const bool json = req.path == kPathVrps || req.path == kPathMaster;
    res.set_content(doc->body, json ? "application/json" : "text/plain");
  }

  PeerAddress client_identity(const httplib::Request& req) const {
    PeerAddress client{"unknown", kDefaultNodePort};
    if (req.ssl) {
      if (X509* cert = SSL_get1_peer_certificate(const_cast<SSL*>(req.ssl))) {
        char buf[256] = {0};
        if (X509_NAME_get_text_by_NID(X509_get_subject_name(cert),
                                      NID_commonName, buf, sizeof buf - 1) > 0)
          client.host = buf;
        X509_free(cert);
      }
    }
    // The certificate authenticates the host; the port peers should contact
    // it on is advisory and only affects where a discovery probe goes.
    if (req.has_header("X-Node-Port")) {
      try {
        const int p = std::stoi(req.get_header_value("X-Node-Port"));
        if (p > 0 && p < 65536) client.port = static_cast<std::uint16_t>(p);
      } catch (...) {
      }
    }
    return client;
  }

  NodeEndpoints& docs_;
  httplib::SSLServer svr_;
  std::string host_;
  std::uint16_t port_;
  std::thread thread_;
};

}  // namespace rpmesh
