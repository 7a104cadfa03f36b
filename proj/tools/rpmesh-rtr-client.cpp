// SPDX-License-Identifier: MIT
//
// Minimal RTR client: pull the validated set from a node and print it, one
// origin authorization per line. With --follow, stay connected and print
// diffs as the node publishes new serials.

#include <arpa/inet.h>

#include <atomic>
#include <csignal>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rpmesh/rtr.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

std::string entry_to_string(const rpmesh::RtrEntry& e) {
  char buf[INET6_ADDRSTRLEN] = {0};
  if (e.v6) {
    inet_ntop(AF_INET6, e.prefix.data(), buf, sizeof(buf));
  } else {
    inet_ntop(AF_INET, e.prefix.data(), buf, sizeof(buf));
  }
  return std::string(buf) + "/" + std::to_string(e.prefix_len) + "-" +
         std::to_string(e.max_len) + " AS" + std::to_string(e.asn);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RTR client"};
  std::string host = "127.0.0.1";
  std::uint16_t port = 8323;
  std::string root;
  bool follow = false;
  app.add_option("--host", host, "RTR server host");
  app.add_option("--port", port, "RTR server port");
  app.add_option("--root", root, "trust root; enables TLS");
  app.add_flag("--follow", follow, "stay connected and print updates");
  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  try {
    rpmesh::RtrClient client;
    client.connect(host, port, root);
    rpmesh::RtrClient::Sync s = client.full_sync();
    std::cout << "session " << s.session_id << " serial " << s.serial << ", "
              << s.announced.size() << " entries\n";
    for (const auto& e : s.announced) std::cout << entry_to_string(e) << "\n";

    while (follow && !g_stop) {
      if (!client.wait_notify(rpmesh::msec(500))) continue;
      const rpmesh::RtrClient::Sync d = client.diff_sync(s.session_id, s.serial);
      if (!d.ok) {
        std::cout << "cache reset, full resync\n";
        s = client.full_sync();
        std::cout << "serial " << s.serial << ", " << s.announced.size()
                  << " entries\n";
        continue;
      }
      s.serial = d.serial;
      for (const auto& e : d.withdrawn)
        std::cout << "- " << entry_to_string(e) << "\n";
      for (const auto& e : d.announced)
        std::cout << "+ " << entry_to_string(e) << "\n";
      std::cout << "serial " << s.serial << std::endl;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
