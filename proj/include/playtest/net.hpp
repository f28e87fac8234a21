// Copyright 2026 The Playtest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PLAYTEST_NET_HPP_
#define PLAYTEST_NET_HPP_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "playtest/trainer.hpp"
#include "playtest/wire.hpp"

namespace playtest::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The peer rejected our HELLO.
class HandshakeRejected : public NetError {
 public:
  using NetError::NetError;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Parses "host:port"; throws std::invalid_argument.
Endpoint parse_endpoint(const std::string& text);

/// Blocking TCP stream carrying wire frames.
class Connection {
 public:
  explicit Connection(int fd);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  static std::unique_ptr<Connection> connect(const Endpoint& ep);

  /// Thread-safe with respect to other send() calls.
  void send(const wire::Message& m);
  /// Blocks until a message arrives, or returns nullopt on a clean EOF or
  /// when `timeout` elapses with no complete frame. Throws wire::FrameError
  /// if the peer closes mid-frame and NetError on socket errors.
  std::optional<wire::Message> receive(
      std::optional<std::chrono::milliseconds> timeout = std::nullopt);
  /// True once the peer closed the stream.
  bool closed() const { return eof_; }
  /// A complete frame is already buffered or bytes are readable now.
  bool pending();
  void shutdown();
  /// Half-close: sends FIN but keeps reading, so queued outbound frames are
  /// not lost to a reset when the peer is still sending.
  void close_write();

 private:
  int fd_;
  std::mutex send_mu_;
  wire::FrameDecoder decoder_;
  bool eof_ = false;
};

/// Listening socket. Port 0 picks a free port.
class Listener {
 public:
  explicit Listener(const Endpoint& ep);
  ~Listener();
  std::uint16_t port() const { return port_; }
  /// Waits up to `timeout` for a connection.
  std::unique_ptr<Connection> accept(std::chrono::milliseconds timeout);
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

struct ServeConfig {
  int staleness_limit = 1;
  /// Logged while collect() has no data for this long.
  std::chrono::milliseconds idle_log_interval{5000};
  std::function<void(const std::string&)> log;
  /// Polled while waiting; returning true makes collect() return empty.
  std::function<bool()> should_stop;
};

struct WorkerStats {
  std::uint32_t worker_id = 0;
  bool connected = false;
  std::uint64_t chunks = 0;
  std::uint64_t frames = 0;        // env frames from accepted chunks
  std::uint64_t dropped_chunks = 0;
  double reported_steps_per_sec = 0.0;  // last STATS from the worker
};

struct ServerStats {
  std::vector<WorkerStats> workers;
  std::uint64_t accepted_chunks = 0;
  std::uint64_t dropped_chunks = 0;
  std::uint64_t rejected_handshakes = 0;
  std::uint64_t frames = 0;
  double seconds = 0.0;  // first to last accepted chunk
  /// Frames received per wall-clock second over that span.
  double aggregate_steps_per_sec() const;
  double sum_reported_steps_per_sec() const;
};

/// Trainer side of the distributed topology. Accepts workers, validates
/// HELLO, pushes WEIGHTS on every publish, and queues TRAJ chunks for the
/// update loop. Worker ids are assigned in accept order.
class RemoteRolloutSource : public RolloutSource {
 public:
  RemoteRolloutSource(const Endpoint& listen, wire::Hello expected,
                      const EnvConfig& env, ServeConfig cfg = {});
  ~RemoteRolloutSource() override;

  std::uint16_t port() const { return listener_.port(); }

  void publish(const PolicyParams& snapshot) override;
  std::vector<Chunk> collect(std::size_t min_decisions) override;
  /// Sends BYE to every worker and closes the listener.
  void finish() override;

  ServerStats stats() const;
  std::size_t connected_workers() const;

 private:
  struct Peer {
    std::uint32_t id = 0;
    std::unique_ptr<Connection> conn;
    std::thread reader;
    std::atomic<bool> alive{true};
  };

  void accept_loop();
  void handle(Peer* peer);

  Listener listener_;
  wire::Hello expected_;
  int action_repeat_;
  ServeConfig cfg_;

  std::mutex push_mu_;  // orders WEIGHTS/BYE sends across peers
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<Peer>> peers_;
  std::deque<Chunk> queue_;
  std::optional<wire::Weights> current_;
  std::uint64_t version_ = 0;
  ServerStats stats_;
  std::optional<std::chrono::steady_clock::time_point> work_start_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
};

struct WorkOptions {
  Endpoint connect;
  std::uint64_t seed = 0;
  /// Connection attempts before giving up; each waits backoff * 2^k.
  int max_attempts = 20;
  std::chrono::milliseconds backoff{100};
  std::chrono::milliseconds max_backoff{5000};
  /// Reconnect after the trainer drops the connection (not after BYE).
  bool reconnect = true;
  std::function<bool()> should_stop;
  std::function<void(const std::string&)> log;
};

struct WorkResult {
  std::uint64_t chunks = 0;
  std::uint64_t decisions = 0;
  int connections = 0;
  bool trainer_said_bye = false;
};

/// Worker loop: HELLO, then for each newest WEIGHTS version collect one
/// chunk and send TRAJ + STATS. Throws HandshakeRejected when the trainer
/// refuses the HELLO.
WorkResult work(const LevelSpec& level, const EnvConfig& env,
                const TrainConfig& train, const WorkOptions& opts);

/// HELLO describing this build and level.
wire::Hello make_hello(const LevelSpec& level);

/// PLAYTEST_WORKER_SEED if set and valid, else `fallback`.
std::uint64_t worker_seed_from_env(std::uint64_t fallback);

}  // namespace playtest::net

#endif  // PLAYTEST_NET_HPP_
