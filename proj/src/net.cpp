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

#include "playtest/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <cstring>

namespace playtest::net {
namespace {

using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

void log_to(const std::function<void(const std::string&)>& log,
            const std::string& msg) {
  if (log) log(msg);
}

bool hello_matches(const wire::Hello& got, const wire::Hello& want,
                   std::string* why) {
  if (got.protocol_version != want.protocol_version) {
    *why = "protocol version " + std::to_string(got.protocol_version) +
           ", expected " + std::to_string(want.protocol_version);
  } else if (got.obs_dim != want.obs_dim || got.act_dim != want.act_dim) {
    *why = "dims obs=" + std::to_string(got.obs_dim) +
           " act=" + std::to_string(got.act_dim) + ", expected obs=" +
           std::to_string(want.obs_dim) + " act=" + std::to_string(want.act_dim);
  } else if (got.level_hash != want.level_hash) {
    *why = "level hash mismatch";
  } else {
    return true;
  }
  return false;
}

class WeightsMismatch : public NetError {
 public:
  using NetError::NetError;
};

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("endpoint must be host:port: " + text);
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.empty()) ep.host = "0.0.0.0";
  const std::string port = text.substr(colon + 1);
  unsigned value = 0;
  const auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || p != port.data() + port.size() || value > 65535) {
    throw std::invalid_argument("bad port in endpoint: " + text);
  }
  ep.port = static_cast<std::uint16_t>(value);
  return ep;
}

// ---- Connection ------------------------------------------------------------

Connection::Connection(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Connection> Connection::connect(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw NetError("resolve " + ep.host + ": " + ::gai_strerror(rc));
  }
  std::string last = "no addresses";
  for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) {
      last = errno_text("socket");
      continue;
    }
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return std::make_unique<Connection>(fd);
    }
    last = errno_text("connect");
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw NetError(ep.host + ":" + port + ": " + last);
}

void Connection::send(const wire::Message& m) {
  const std::vector<std::uint8_t> bytes = wire::encode(m);
  std::lock_guard lock(send_mu_);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetError(errno_text("send"));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<wire::Message> Connection::receive(
    std::optional<milliseconds> timeout) {
  const auto deadline = timeout ? Clock::now() + *timeout : Clock::time_point::max();
  std::uint8_t buf[65536];
  for (;;) {
    if (auto m = decoder_.next()) return m;
    if (eof_) {
      decoder_.finish();
      return std::nullopt;
    }
    int wait_ms = -1;
    if (timeout) {
      const auto left =
          std::chrono::duration_cast<milliseconds>(deadline - Clock::now()).count();
      wait_ms = static_cast<int>(std::max<long long>(0, left));
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int pr = ::poll(&pfd, 1, wait_ms);
    if (pr < 0) {
      if (errno == EINTR) {
        if (timeout && Clock::now() >= deadline) return std::nullopt;
        continue;
      }
      throw NetError(errno_text("poll"));
    }
    if (pr == 0) return std::nullopt;
    const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      if (errno == ECONNRESET) {
        eof_ = true;
        continue;
      }
      throw NetError(errno_text("recv"));
    }
    if (n == 0) {
      eof_ = true;
      continue;
    }
    decoder_.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
  }
}

bool Connection::pending() {
  if (decoder_.buffered() > 0) return true;
  pollfd pfd{fd_, POLLIN, 0};
  return ::poll(&pfd, 1, 0) > 0;
}

void Connection::shutdown() { ::shutdown(fd_, SHUT_RDWR); }

void Connection::close_write() { ::shutdown(fd_, SHUT_WR); }

// ---- Listener --------------------------------------------------------------

Listener::Listener(const Endpoint& ep) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw NetError(errno_text("socket"));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw NetError("listen address must be an IPv4 literal: " + ep.host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(fd_, 16) != 0) {
    const std::string msg = errno_text("bind");
    ::close(fd_);
    throw NetError(ep.host + ":" + std::to_string(ep.port) + ": " + msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() { close(); }

void Listener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<Connection> Listener::accept(milliseconds timeout) {
  if (fd_ < 0) return nullptr;
  pollfd pfd{fd_, POLLIN, 0};
  if (::poll(&pfd, 1, static_cast<int>(timeout.count())) <= 0) return nullptr;
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) return nullptr;
  return std::make_unique<Connection>(fd);
}

// ---- Server ----------------------------------------------------------------

double ServerStats::aggregate_steps_per_sec() const {
  return seconds > 0.0 ? static_cast<double>(frames) / seconds : 0.0;
}

double ServerStats::sum_reported_steps_per_sec() const {
  double s = 0.0;
  for (const auto& w : workers) s += w.reported_steps_per_sec;
  return s;
}

RemoteRolloutSource::RemoteRolloutSource(const Endpoint& listen,
                                         wire::Hello expected,
                                         const EnvConfig& env, ServeConfig cfg)
    : listener_(listen),
      expected_(expected),
      action_repeat_(env.action_repeat),
      cfg_(std::move(cfg)) {
  acceptor_ = std::thread([this] { accept_loop(); });
}

RemoteRolloutSource::~RemoteRolloutSource() { finish(); }

void RemoteRolloutSource::accept_loop() {
  while (!stopping_) {
    std::unique_ptr<Connection> conn = listener_.accept(milliseconds(100));
    if (!conn) continue;
    std::lock_guard lock(mu_);
    if (stopping_) break;
    auto peer = std::make_unique<Peer>();
    peer->id = static_cast<std::uint32_t>(peers_.size());
    peer->conn = std::move(conn);
    Peer* p = peer.get();
    peers_.push_back(std::move(peer));
    stats_.workers.push_back(WorkerStats{});
    stats_.workers.back().worker_id = p->id;
    p->reader = std::thread([this, p] { handle(p); });
  }
}

void RemoteRolloutSource::handle(Peer* peer) {
  Connection& conn = *peer->conn;
  auto drop = [&](const std::string& why) {
    peer->alive = false;
    {
      std::lock_guard lock(mu_);
      stats_.workers[peer->id].connected = false;
    }
    conn.shutdown();
    cv_.notify_all();
    log_to(cfg_.log, "worker " + std::to_string(peer->id) + " disconnected: " + why);
  };

  try {
    auto first = conn.receive(milliseconds(10000));
    const auto* hello = first ? std::get_if<wire::Hello>(&*first) : nullptr;
    std::string why = "no HELLO";
    if (hello == nullptr || !hello_matches(*hello, expected_, &why)) {
      {
        std::lock_guard lock(mu_);
        ++stats_.rejected_handshakes;
      }
      log_to(cfg_.log, "rejected worker " + std::to_string(peer->id) + ": " + why);
      try {
        conn.send(wire::Bye{});
      } catch (const NetError&) {
      }
      peer->alive = false;
      conn.close_write();
      return;
    }
    {
      // push_mu_ is held so an initial WEIGHTS never overtakes a newer one.
      std::lock_guard push(push_mu_);
      conn.send(expected_);
      std::optional<wire::Weights> w;
      {
        std::lock_guard lock(mu_);
        stats_.workers[peer->id].connected = true;
        w = current_;
        if (w && !work_start_) work_start_ = Clock::now();
      }
      if (w) conn.send(*w);
    }
    log_to(cfg_.log, "worker " + std::to_string(peer->id) + " connected");

    std::uint32_t seq = 0;
    for (;;) {
      auto m = conn.receive();
      if (!m) {
        drop("connection closed");
        return;
      }
      if (std::holds_alternative<wire::Bye>(*m)) {
        drop("BYE");
        return;
      }
      if (auto* s = std::get_if<wire::Stats>(&*m)) {
        std::lock_guard lock(mu_);
        stats_.workers[peer->id].reported_steps_per_sec = s->steps_per_sec;
        continue;
      }
      auto* t = std::get_if<wire::Traj>(&*m);
      if (t == nullptr) {
        drop("unexpected message type");
        return;
      }
      Chunk c;
      c.worker_id = peer->id;
      c.seq = seq++;
      c.policy_version = t->policy_version;
      c.trajectories = std::move(t->trajectories);
      {
        std::lock_guard lock(mu_);
        auto& ws = stats_.workers[peer->id];
        if (c.policy_version > version_ ||
            version_ - c.policy_version >
                static_cast<std::uint64_t>(cfg_.staleness_limit)) {
          ++ws.dropped_chunks;
          ++stats_.dropped_chunks;
          continue;
        }
        const std::uint64_t frames =
            c.decisions() * static_cast<std::uint64_t>(action_repeat_);
        ++ws.chunks;
        ws.frames += frames;
        ++stats_.accepted_chunks;
        stats_.frames += frames;
        if (work_start_) {
          stats_.seconds =
              std::chrono::duration<double>(Clock::now() - *work_start_).count();
        }
        queue_.push_back(std::move(c));
      }
      cv_.notify_all();
    }
  } catch (const std::exception& e) {
    drop(e.what());
  }
}

void RemoteRolloutSource::publish(const PolicyParams& snapshot) {
  wire::Weights w;
  w.policy_version = static_cast<std::uint32_t>(snapshot.version());
  w.params.reserve(snapshot.size());
  for (double v : snapshot.values()) w.params.push_back(static_cast<float>(v));

  std::lock_guard push(push_mu_);
  std::vector<Peer*> targets;
  {
    std::lock_guard lock(mu_);
    version_ = snapshot.version();
    current_ = w;
    // Chunks that became too stale while queued are dropped here.
    std::erase_if(queue_, [&](const Chunk& c) {
      const bool stale = version_ - c.policy_version >
                         static_cast<std::uint64_t>(cfg_.staleness_limit);
      if (stale) {
        ++stats_.dropped_chunks;
        ++stats_.workers[c.worker_id].dropped_chunks;
      }
      return stale;
    });
    for (auto& p : peers_) {
      if (p->alive && stats_.workers[p->id].connected) targets.push_back(p.get());
    }
    if (!targets.empty() && !work_start_) work_start_ = Clock::now();
  }
  for (Peer* p : targets) {
    try {
      p->conn->send(w);
    } catch (const NetError&) {
      p->conn->shutdown();  // the reader thread records the disconnect
    }
  }
}

std::vector<Chunk> RemoteRolloutSource::collect(std::size_t min_decisions) {
  std::unique_lock lock(mu_);
  auto last_log = Clock::now();
  for (;;) {
    std::size_t have = 0;
    for (const auto& c : queue_) have += c.decisions();
    if (have >= min_decisions && !queue_.empty()) break;
    if (stopping_ || (cfg_.should_stop && cfg_.should_stop())) return {};
    cv_.wait_for(lock, milliseconds(100));
    if (Clock::now() - last_log >= cfg_.idle_log_interval) {
      last_log = Clock::now();
      std::size_t n = 0;
      for (const auto& p : peers_) n += p->alive ? 1 : 0;
      const std::string msg =
          n == 0 ? "waiting for workers on port " + std::to_string(listener_.port())
                 : "waiting for trajectories from " + std::to_string(n) + " worker(s)";
      lock.unlock();
      log_to(cfg_.log, msg);
      lock.lock();
    }
  }
  std::vector<Chunk> out(std::make_move_iterator(queue_.begin()),
                         std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

void RemoteRolloutSource::finish() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<Peer*> all;
  {
    std::lock_guard lock(mu_);
    for (auto& p : peers_) all.push_back(p.get());
  }
  {
    std::lock_guard push(push_mu_);
    for (Peer* p : all) {
      if (!p->alive) continue;
      try {
        p->conn->send(wire::Bye{});
      } catch (const NetError&) {
      }
      p->conn->close_write();
    }
  }
  // Keep draining until each worker closes after reading BYE. Closing the
  // read side first would reset connections with TRAJ still in flight, and
  // the reset discards the BYE on the worker's side.
  {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, std::chrono::seconds(2), [&] {
      return std::none_of(all.begin(), all.end(), [](const Peer* p) { return p->alive.load(); });
    });
  }
  for (Peer* p : all) {
    p->conn->shutdown();
    if (p->reader.joinable()) p->reader.join();
  }
  listener_.close();
  cv_.notify_all();
}

ServerStats RemoteRolloutSource::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::size_t RemoteRolloutSource::connected_workers() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& w : stats_.workers) n += w.connected ? 1 : 0;
  return n;
}

// ---- Worker ----------------------------------------------------------------

wire::Hello make_hello(const LevelSpec& level) {
  wire::Hello h;
  h.protocol_version = wire::kProtocolVersion;
  h.obs_dim = Observation::kSize;
  h.act_dim = Action::kSize;
  h.level_hash = level_hash(level);
  return h;
}

std::uint64_t worker_seed_from_env(std::uint64_t fallback) {
  const char* v = std::getenv("PLAYTEST_WORKER_SEED");
  if (v == nullptr || *v == '\0') return fallback;
  std::uint64_t seed = 0;
  const char* end = v + std::strlen(v);
  const auto [p, ec] = std::from_chars(v, end, seed);
  if (ec != std::errc() || p != end) {
    throw std::invalid_argument(std::string("PLAYTEST_WORKER_SEED is not an integer: ") + v);
  }
  return seed;
}

WorkResult work(const LevelSpec& level, const EnvConfig& env,
                const TrainConfig& train, const WorkOptions& opts) {
  RolloutWorker worker(level, env, train.envs_per_worker, steps_per_env(train),
                       opts.seed);
  Architecture arch;
  arch.hidden = train.hidden;
  const wire::Hello hello = make_hello(level);
  auto stop = [&] { return opts.should_stop && opts.should_stop(); };

  WorkResult result;
  std::optional<Clock::time_point> started;
  int failures = 0;

  while (!stop()) {
    std::unique_ptr<Connection> conn;
    try {
      conn = Connection::connect(opts.connect);
    } catch (const NetError& e) {
      if (++failures >= opts.max_attempts) throw;
      const milliseconds wait = std::min<milliseconds>(
          opts.max_backoff, opts.backoff * (1LL << std::min(failures - 1, 20)));
      log_to(opts.log, std::string(e.what()) + "; retrying in " +
                           std::to_string(wait.count()) + " ms");
      const auto until = Clock::now() + wait;
      while (Clock::now() < until && !stop()) std::this_thread::sleep_for(milliseconds(20));
      continue;
    }

    conn->send(hello);
    auto reply = conn->receive(milliseconds(10000));
    if (!reply || std::holds_alternative<wire::Bye>(*reply)) {
      throw HandshakeRejected("trainer rejected HELLO (level or dims differ)");
    }
    if (!std::holds_alternative<wire::Hello>(*reply)) {
      throw NetError("expected HELLO from trainer");
    }
    failures = 0;
    ++result.connections;
    log_to(opts.log, "connected to trainer");

    bool lost = false;
    try {
      std::optional<wire::Weights> latest;
      while (!stop()) {
        auto m = conn->receive(milliseconds(100));
        if (!m) {
          if (conn->closed()) {
            lost = true;
            break;
          }
          continue;
        }
        // Drain so that only the newest weights are acted on.
        for (;;) {
          if (std::holds_alternative<wire::Bye>(*m)) {
            result.trainer_said_bye = true;
            return result;
          }
          if (auto* w = std::get_if<wire::Weights>(&*m)) latest = std::move(*w);
          if (!conn->pending()) break;
          auto more = conn->receive(milliseconds(0));
          if (!more) break;
          m = std::move(more);
        }
        if (!latest) continue;

        PolicyParams params(arch);
        if (latest->params.size() != params.size()) {
          throw WeightsMismatch("weights size mismatch: expected " +
                         std::to_string(params.size()) + " params, found " +
                         std::to_string(latest->params.size()));
        }
        std::copy(latest->params.begin(), latest->params.end(), params.values().begin());
        params.set_version(latest->policy_version);
        if (!started) started = Clock::now();

        wire::Traj traj;
        traj.policy_version = latest->policy_version;
        traj.trajectories = worker.collect(params, ActorMode::kSample);
        latest.reset();
        conn->send(traj);
        ++result.chunks;
        for (const auto& t : traj.trajectories) result.decisions += t.steps.size();
        const double secs =
            std::chrono::duration<double>(Clock::now() - *started).count();
        wire::Stats st;
        st.steps_per_sec = secs > 0.0
                               ? static_cast<float>(static_cast<double>(result.decisions) *
                                                    env.action_repeat / secs)
                               : 0.0f;
        conn->send(st);
      }
    } catch (const wire::ProtocolError& e) {
      log_to(opts.log, std::string("connection error: ") + e.what());
      lost = true;
    } catch (const WeightsMismatch&) {
      throw;
    } catch (const NetError& e) {
      log_to(opts.log, std::string("connection error: ") + e.what());
      lost = true;
    }
    if (!lost) {
      try {
        conn->send(wire::Bye{});
      } catch (const NetError&) {
      }
      break;
    }
    log_to(opts.log, "lost connection to trainer");
    if (!opts.reconnect) break;
  }
  return result;
}

}  // namespace playtest::net
