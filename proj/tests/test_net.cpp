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

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdlib>
#include <future>
#include <thread>

#include "playtest/net.hpp"
#include "test_util.hpp"

using namespace playtest;
using namespace playtest::net;
using namespace playtest::testing;
using namespace std::chrono_literals;

namespace {

TrainConfig small_train(std::uint64_t budget) {
  TrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.horizon = 256;
  cfg.minibatch = 64;
  cfg.envs_per_worker = 4;
  cfg.frame_budget = budget;
  cfg.checkpoint_interval = 2;
  return cfg;
}

Endpoint local(std::uint16_t port) { return Endpoint{"127.0.0.1", port}; }

WorkOptions worker_options(std::uint16_t port, std::uint64_t seed) {
  WorkOptions o;
  o.connect = local(port);
  o.seed = seed;
  o.backoff = 20ms;
  o.max_attempts = 10;
  return o;
}

// Raw socket client, for sending bytes no well-behaved worker would.
int raw_connect(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  return fd;
}

void raw_send(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    REQUIRE(n > 0);
    off += static_cast<std::size_t>(n);
  }
}

template <class Pred>
bool wait_until(Pred pred, std::chrono::milliseconds limit = 5000ms) {
  const auto until = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < until) {
    if (pred()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return pred();
}

}  // namespace

TEST_CASE("endpoint parsing") {
  const Endpoint e = parse_endpoint("10.0.0.2:7878");
  CHECK(e.host == "10.0.0.2");
  CHECK(e.port == 7878);
  CHECK(parse_endpoint("localhost:1").host == "localhost");
  CHECK_THROWS_AS(parse_endpoint("nocolon"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("host:99999"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("host:"), std::invalid_argument);
  CHECK_THROWS_AS(parse_endpoint("host:12x"), std::invalid_argument);
}

TEST_CASE("worker seed environment override") {
  ::unsetenv("PLAYTEST_WORKER_SEED");
  CHECK(worker_seed_from_env(17) == 17);
  ::setenv("PLAYTEST_WORKER_SEED", "12345", 1);
  CHECK(worker_seed_from_env(17) == 12345);
  ::setenv("PLAYTEST_WORKER_SEED", "12a", 1);
  CHECK_THROWS_AS(worker_seed_from_env(17), std::invalid_argument);
  ::unsetenv("PLAYTEST_WORKER_SEED");
}

TEST_CASE("connections carry frames both ways") {
  Listener l(local(0));
  REQUIRE(l.port() != 0);
  auto client = Connection::connect(local(l.port()));
  auto server = l.accept(2000ms);
  REQUIRE(server);
  wire::Weights w;
  w.policy_version = 4;
  w.params = {1.0f, -2.0f};
  client->send(w);
  auto got = server->receive(2000ms);
  REQUIRE(got);
  CHECK(std::get<wire::Weights>(*got) == w);
  server->send(wire::Bye{});
  auto bye = client->receive(2000ms);
  REQUIRE(bye);
  CHECK(std::holds_alternative<wire::Bye>(*bye));
  CHECK_FALSE(client->receive(50ms).has_value());
  CHECK_FALSE(client->closed());
  server->shutdown();
  CHECK_FALSE(client->receive(2000ms).has_value());
  CHECK(client->closed());
}

TEST_CASE("one worker reproduces the in-process run bitwise") {
  const LevelSpec level = canonical_level("exploit");
  EnvConfig env;
  const TrainConfig cfg = small_train(256 * 3 * 5);
  const std::uint64_t seed = 21;

  LocalRolloutSource local_src(level, env, cfg, worker_seed(seed, 0));
  std::vector<PolicyParams> local_ckpt;
  TrainHooks lh;
  lh.on_checkpoint = [&](const PolicyParams& p) { local_ckpt.push_back(p); };
  const TrainResult a = train(level, env, cfg, seed, local_src, lh);

  RemoteRolloutSource remote(local(0), make_hello(level), env);
  auto worker = std::async(std::launch::async, [&] {
    return work(level, env, cfg, worker_options(remote.port(), worker_seed(seed, 0)));
  });
  std::vector<PolicyParams> remote_ckpt;
  TrainHooks rh;
  rh.on_checkpoint = [&](const PolicyParams& p) { remote_ckpt.push_back(p); };
  const TrainResult b = train(level, env, cfg, seed, remote, rh);
  const WorkResult wr = worker.get();

  CHECK(wr.trainer_said_bye);
  CHECK(wr.connections == 1);
  CHECK(a.iterations == b.iterations);
  CHECK(a.env_frames == b.env_frames);
  CHECK(a.params == b.params);
  CHECK(local_ckpt == remote_ckpt);
  CHECK(curve_csv(a.curve) == curve_csv(b.curve));
  REQUIRE(a.episodes.size() == b.episodes.size());
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    CHECK(a.episodes[i].episode_return == b.episodes[i].episode_return);
    CHECK(a.episodes[i].frame_index == b.episodes[i].frame_index);
  }
  const ServerStats st = remote.stats();
  CHECK(st.dropped_chunks == 0);
  CHECK(st.rejected_handshakes == 0);
}

TEST_CASE("a worker killed mid-frame does not stop training; a new one resumes") {
  const LevelSpec level = canonical_level("exploit");
  EnvConfig env;
  const TrainConfig cfg = small_train(256 * 3 * 4);
  std::vector<std::string> logs;
  std::mutex log_mu;
  ServeConfig sc;
  sc.log = [&](const std::string& s) {
    std::lock_guard lock(log_mu);
    logs.push_back(s);
  };
  RemoteRolloutSource remote(local(0), make_hello(level), env, sc);

  // The doomed worker: valid handshake, then half a TRAJ frame, then gone.
  const int fd = raw_connect(remote.port());
  raw_send(fd, wire::encode(make_hello(level)));
  REQUIRE(wait_until([&] { return remote.connected_workers() == 1; }));
  wire::Traj t;
  t.trajectories.resize(1);
  t.trajectories[0].steps.resize(10);
  auto bytes = wire::encode(t);
  bytes.resize(bytes.size() / 2);
  raw_send(fd, bytes);
  ::close(fd);
  REQUIRE(wait_until([&] { return remote.connected_workers() == 0; }));

  std::vector<std::pair<std::uint64_t, std::uint64_t>> lags;  // (trainer, chunk)
  TrainHooks hooks;
  hooks.on_iteration = [&](const IterationReport& rep) {
    for (const auto& c : *rep.chunks) lags.emplace_back(rep.params->version() - 1, c.policy_version);
  };
  auto trainer = std::async(std::launch::async,
                            [&] { return train(level, env, cfg, 5, remote, hooks); });
  const WorkResult wr = work(level, env, cfg, worker_options(remote.port(), 99));
  const TrainResult r = trainer.get();

  CHECK(r.iterations == 4);
  CHECK(wr.trainer_said_bye);
  const ServerStats st = remote.stats();
  REQUIRE(st.workers.size() == 2);
  CHECK_FALSE(st.workers[0].connected);
  CHECK(st.workers[0].chunks == 0);
  CHECK(st.workers[1].chunks >= 4);
  // Every accepted chunk is within the staleness bound.
  REQUIRE(!lags.empty());
  for (const auto& [trainer_v, chunk_v] : lags) {
    CHECK(chunk_v <= trainer_v);
    CHECK(trainer_v - chunk_v <= 1);
  }
  bool logged = false;
  for (const auto& s : logs) logged |= s.find("worker 0 disconnected") != std::string::npos;
  CHECK(logged);
}

TEST_CASE("worker reconnects after the trainer drops it") {
  const LevelSpec level = canonical_level("exploit");
  EnvConfig env;
  const TrainConfig cfg = small_train(0);
  Listener l(local(0));
  auto worker = std::async(std::launch::async,
                           [&] { return work(level, env, cfg, worker_options(l.port(), 1)); });
  for (int round = 0; round < 2; ++round) {
    auto conn = l.accept(5000ms);
    REQUIRE(conn);
    auto hello = conn->receive(5000ms);
    REQUIRE(hello);
    CHECK(std::get<wire::Hello>(*hello) == make_hello(level));
    conn->send(make_hello(level));
    if (round == 0) {
      conn->shutdown();  // dropped without BYE
    } else {
      conn->send(wire::Bye{});
    }
  }
  const WorkResult wr = worker.get();
  CHECK(wr.connections == 2);
  CHECK(wr.trainer_said_bye);
}

TEST_CASE("workers on a different level or with other dims are rejected") {
  const LevelSpec level = canonical_level("exploit");
  const LevelSpec other = canonical_level("navigation");
  EnvConfig env;
  const TrainConfig cfg = small_train(0);
  std::vector<std::string> logs;
  std::mutex log_mu;
  ServeConfig sc;
  sc.log = [&](const std::string& s) {
    std::lock_guard lock(log_mu);
    logs.push_back(s);
  };
  RemoteRolloutSource remote(local(0), make_hello(level), env, sc);
  WorkOptions o = worker_options(remote.port(), 1);
  CHECK_THROWS_AS(work(other, env, cfg, o), HandshakeRejected);

  auto conn = Connection::connect(local(remote.port()));
  wire::Hello h = make_hello(level);
  h.obs_dim = 26;
  conn->send(h);
  auto reply = conn->receive(5000ms);
  REQUIRE(reply);
  CHECK(std::holds_alternative<wire::Bye>(*reply));

  auto conn2 = Connection::connect(local(remote.port()));
  wire::Hello v = make_hello(level);
  v.protocol_version = 99;
  conn2->send(v);
  auto reply2 = conn2->receive(5000ms);
  REQUIRE(reply2);
  CHECK(std::holds_alternative<wire::Bye>(*reply2));

  REQUIRE(wait_until([&] { return remote.stats().rejected_handshakes == 3; }));
  CHECK(remote.connected_workers() == 0);
  std::lock_guard lock(log_mu);
  int rejected = 0;
  for (const auto& s : logs) rejected += s.find("rejected worker") != std::string::npos;
  CHECK(rejected == 3);
}

TEST_CASE("serving with no workers idles and logs") {
  const LevelSpec level = canonical_level("exploit");
  EnvConfig env;
  std::vector<std::string> logs;
  std::mutex log_mu;
  ServeConfig sc;
  sc.idle_log_interval = 50ms;
  const auto stop_at = std::chrono::steady_clock::now() + 400ms;
  sc.should_stop = [&] { return std::chrono::steady_clock::now() > stop_at; };
  sc.log = [&](const std::string& s) {
    std::lock_guard lock(log_mu);
    logs.push_back(s);
  };
  RemoteRolloutSource remote(local(0), make_hello(level), env, sc);
  const auto chunks = remote.collect(100);
  CHECK(chunks.empty());
  std::lock_guard lock(log_mu);
  REQUIRE(logs.size() >= 2);
  CHECK(logs.front().find("waiting for workers on port " + std::to_string(remote.port())) !=
        std::string::npos);
}

TEST_CASE("stale and future TRAJ frames are dropped and counted") {
  const LevelSpec level = canonical_level("exploit");
  EnvConfig env;
  RemoteRolloutSource remote(local(0), make_hello(level), env);
  Architecture arch;
  arch.obs_dim = 2;
  arch.hidden = {2};
  arch.act_dim = 1;
  PolicyParams p(arch);
  remote.publish(p);

  auto conn = Connection::connect(local(remote.port()));
  conn->send(make_hello(level));
  auto hello = conn->receive(5000ms);
  REQUIRE(hello);
  CHECK(std::holds_alternative<wire::Hello>(*hello));
  auto w0 = conn->receive(5000ms);
  REQUIRE(w0);
  CHECK(std::get<wire::Weights>(*w0).policy_version == 0);

  for (std::uint64_t v = 1; v <= 3; ++v) {
    p.set_version(v);
    remote.publish(p);
    auto w = conn->receive(5000ms);
    REQUIRE(w);
    CHECK(std::get<wire::Weights>(*w).policy_version == v);
  }
  auto traj = [](std::uint32_t version, int steps) {
    wire::Traj t;
    t.policy_version = version;
    t.trajectories.resize(1);
    t.trajectories[0].steps.resize(static_cast<std::size_t>(steps));
    return t;
  };
  conn->send(traj(0, 5));  // lag 3
  conn->send(traj(1, 5));  // lag 2
  conn->send(traj(9, 5));  // from the future
  conn->send(traj(2, 7));  // lag 1: accepted
  conn->send(traj(3, 3));  // current: accepted
  conn->send(wire::Stats{123.0f});
  REQUIRE(wait_until([&] {
    const auto s = remote.stats();
    return s.accepted_chunks + s.dropped_chunks == 5 && s.workers[0].reported_steps_per_sec > 0;
  }));
  const ServerStats st = remote.stats();
  CHECK(st.dropped_chunks == 3);
  CHECK(st.workers[0].dropped_chunks == 3);
  CHECK(st.accepted_chunks == 2);
  CHECK(st.frames == 10 * 3);
  CHECK(st.workers[0].reported_steps_per_sec == 123.0);

  // A publish makes the queued version-2 chunk stale.
  p.set_version(4);
  remote.publish(p);
  const auto chunks = remote.collect(1);
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0].policy_version == 3);
  CHECK(chunks[0].seq == 4);
  CHECK(remote.stats().dropped_chunks == 4);
}

TEST_CASE("four workers: aggregate rate matches the sum of worker rates") {
  const LevelSpec level = canonical_level("exploit");
  EnvConfig env;
  TrainConfig cfg;
  cfg.hidden = {64, 64};
  cfg.horizon = 2048;
  cfg.minibatch = 256;
  cfg.envs_per_worker = 8;
  cfg.frame_budget = 400'000;
  RemoteRolloutSource remote(local(0), make_hello(level), env);
  std::vector<std::future<WorkResult>> workers;
  for (std::uint32_t i = 0; i < 4; ++i) {
    workers.push_back(std::async(std::launch::async, [&, i] {
      return work(level, env, cfg, worker_options(remote.port(), worker_seed(3, i)));
    }));
  }
  REQUIRE(wait_until([&] { return remote.connected_workers() == 4; }));
  const TrainResult r = train(level, env, cfg, 3, remote);
  for (auto& w : workers) CHECK(w.get().trainer_said_bye);
  const ServerStats st = remote.stats();
  REQUIRE(st.workers.size() == 4);
  double sum_server = 0.0;
  for (const auto& w : st.workers) {
    CHECK(w.chunks > 0);
    CHECK(w.reported_steps_per_sec > 0.0);
    sum_server += static_cast<double>(w.frames);
  }
  // Frame accounting is exact.
  CHECK(sum_server == static_cast<double>(st.frames));
  const double aggregate = st.aggregate_steps_per_sec();
  const double sum = st.sum_reported_steps_per_sec();
  INFO("aggregate " << aggregate << " sum of workers " << sum << " dropped "
                    << st.dropped_chunks << " accepted " << st.accepted_chunks);
  CHECK(aggregate > 0.0);
  CHECK(std::abs(aggregate - sum) <= 0.10 * sum);
  CHECK(r.env_frames >= cfg.frame_budget);
}
