// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see the accompanying LICENSE file.
#pragma once

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpmesh/connlog.hpp"
#include "rpmesh/time.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

// Result of one per-TAL validation run.
struct ValidationOutcome {
  std::string tal;
  std::optional<int> exit_status;  // absent while running
  bool killed = false;
  VrpSet vrps;  // populated only on exit status 0
  ConnectionLog log;
  TimePoint started_at{};
  TimePoint ended_at{};
};

// A running (or finished) validation. The monitor polls it, watches its
// connection log, and either collects its output or kills it.
class RpHandle {
 public:
  enum class Status { Running, Exited, Killed };

  virtual ~RpHandle() = default;
  virtual std::string tal() const = 0;
  virtual TimePoint started_at() const = 0;

  // Non-blocking; transitions only Running -> Exited or Running -> Killed.
  virtual Status poll(TimePoint now) = 0;
  // Forces Killed and closes every open connection in the event stream.
  virtual void kill(TimePoint now) = 0;
  // Connection log as of the given instant.
  virtual ConnectionLog log_at(TimePoint now) = 0;
  // Precondition: poll() returned something other than Running.
  virtual ValidationOutcome collect(TimePoint now) = 0;
};

// Factory for validations; one implementation simulates the publication-point
// ecosystem, the other wraps a real relying-party executable.
class RpAdapter {
 public:
  virtual ~RpAdapter() = default;
  virtual std::unique_ptr<RpHandle> start_validation(
      const std::string& tal, const std::set<std::string>& skiplist,
      TimePoint now) = 0;
};

// ---------------------------------------------------------------------------
// External-process implementation. Runs a relying-party command per TAL with
// placeholder substitution:
//   {tal}      TAL name
//   {skiplist} path of the skiplist file written for this run
//   {out}      path the command must write its VRP JSON to
//   {events}   path of a packet-event feed (JSON lines) the command's
//              supervisor appends to; optional
// Exercised manually against a real relying party; the simulated adapter
// covers the same contract in tests.

namespace detail {
inline std::string substitute(std::string s, const std::string& key,
                              const std::string& value) {
  std::size_t pos = 0;
  while ((pos = s.find(key, pos)) != std::string::npos) {
    s.replace(pos, key.size(), value);
    pos += value.size();
  }
  return s;
}

inline PacketEvent packet_event_from_json(const nlohmann::json& o) {
  PacketEvent e;
  const std::string dir = o.at("dir").get<std::string>();
  if (dir == "out") e.direction = PacketEvent::Dir::Out;
  else if (dir == "in") e.direction = PacketEvent::Dir::In;
  else throw ParseError("bad packet direction: " + dir);
  e.syn = o.value("syn", false);
  e.ack = o.value("ack", false);
  e.rst = o.value("rst", false);
  e.fin = o.value("fin", false);
  e.src = o.value("src", std::string());
  e.dst = o.value("dst", std::string());
  e.time = parse_rfc3339(o.at("time").get<std::string>());
  return e;
}
}  // namespace detail

class ExternalRpHandle : public RpHandle {
 public:
  ExternalRpHandle(std::string tal, pid_t pid, std::string out_path,
                   std::string events_path, TimePoint started)
      : tal_(std::move(tal)),
        pid_(pid),
        out_path_(std::move(out_path)),
        events_path_(std::move(events_path)),
        started_(started) {}

  std::string tal() const override { return tal_; }
  TimePoint started_at() const override { return started_; }

  Status poll(TimePoint now) override {
    if (status_ != Status::Running) return status_;
    int wstatus = 0;
    const pid_t r = waitpid(pid_, &wstatus, WNOHANG);
    if (r == pid_) {
      status_ = Status::Exited;
      exit_code_ = WIFEXITED(wstatus) ? WEXITSTATUS(wstatus)
                                      : 128 + WTERMSIG(wstatus);
      ended_ = now;
    }
    return status_;
  }

  void kill(TimePoint now) override {
    if (status_ != Status::Running) return;
    ::kill(pid_, SIGKILL);
    int wstatus = 0;
    waitpid(pid_, &wstatus, 0);
    status_ = Status::Killed;
    ended_ = now;
    kill_time_ = now;
  }

  ConnectionLog log_at(TimePoint now) override {
    ConnectionLog log;
    std::ifstream in(events_path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      PacketEvent e;
      try {
        e = detail::packet_event_from_json(nlohmann::json::parse(line));
      } catch (const std::exception&) {
        continue;  // tolerate torn writes at the feed's tail
      }
      if (e.time > now) break;
      record_packet(log, e);
    }
    if (kill_time_) {
      for (auto& [_, rec] : log.by_remote) {
        if (!rec.end_time) rec.end_time = *kill_time_;
      }
    }
    return log;
  }

  ValidationOutcome collect(TimePoint now) override {
    ValidationOutcome o;
    o.tal = tal_;
    o.started_at = started_;
    o.ended_at = ended_;
    o.killed = status_ == Status::Killed;
    if (status_ == Status::Exited) o.exit_status = exit_code_;
    if (status_ == Status::Killed) o.exit_status = -1;
    o.log = log_at(now);
    if (o.exit_status == 0) {
      std::ifstream in(out_path_);
      if (in) {
        std::stringstream buf;
        buf << in.rdbuf();
        o.vrps = parse_vrp_file(buf.str());
      }
    }
    return o;
  }

 private:
  std::string tal_;
  pid_t pid_;
  std::string out_path_;
  std::string events_path_;
  TimePoint started_;
  TimePoint ended_{};
  std::optional<TimePoint> kill_time_;
  Status status_ = Status::Running;
  int exit_code_ = -1;
};

class ExternalRpAdapter : public RpAdapter {
 public:
  // command: argv template, whitespace-separated, with placeholders.
  ExternalRpAdapter(std::string command, std::string work_dir)
      : command_(std::move(command)), work_dir_(std::move(work_dir)) {}

  std::unique_ptr<RpHandle> start_validation(
      const std::string& tal, const std::set<std::string>& skiplist,
      TimePoint now) override {
    if (command_.empty()) throw std::runtime_error("rp_command not configured");
    const std::string skiplist_path = work_dir_ + "/skiplist-" + tal + ".txt";
    const std::string out_path = work_dir_ + "/vrps-" + tal + ".json";
    const std::string events_path = work_dir_ + "/events-" + tal + ".jsonl";
    {
      std::ofstream out(skiplist_path);
      out << serialize_skiplist(skiplist);
    }
    std::remove(out_path.c_str());

    std::vector<std::string> argv_store;
    std::istringstream cs(command_);
    std::string word;
    while (cs >> word) {
      word = detail::substitute(word, "{tal}", tal);
      word = detail::substitute(word, "{skiplist}", skiplist_path);
      word = detail::substitute(word, "{out}", out_path);
      word = detail::substitute(word, "{events}", events_path);
      argv_store.push_back(word);
    }
    if (argv_store.empty()) throw std::runtime_error("empty rp_command");
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    argv.push_back(nullptr);

    const pid_t pid = fork();
    if (pid < 0) throw std::runtime_error("fork failed");
    if (pid == 0) {
      execvp(argv[0], argv.data());
      _exit(127);
    }
    return std::make_unique<ExternalRpHandle>(tal, pid, out_path, events_path,
                                              now);
  }

 private:
  std::string command_;
  std::string work_dir_;
};

}  // namespace rpmesh
