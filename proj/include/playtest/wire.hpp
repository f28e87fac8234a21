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

#ifndef PLAYTEST_WIRE_HPP_
#define PLAYTEST_WIRE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "playtest/ppo.hpp"

namespace playtest::wire {

// Frame: u32 length (type byte + payload), u8 type, payload. Little-endian.

inline constexpr std::uint32_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameLength = 1u << 30;

enum class MessageType : std::uint8_t {
  kHello = 1,
  kWeights = 2,
  kTraj = 3,
  kStats = 4,
  kBye = 5,
};

struct Hello {
  std::uint32_t protocol_version = kProtocolVersion;
  std::uint32_t obs_dim = 0;
  std::uint32_t act_dim = 0;
  std::uint64_t level_hash = 0;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct Weights {
  std::uint32_t policy_version = 0;
  std::vector<float> params;
  friend bool operator==(const Weights&, const Weights&) = default;
};

struct Traj {
  std::uint32_t policy_version = 0;
  std::vector<Trajectory> trajectories;
  friend bool operator==(const Traj&, const Traj&) = default;
};

struct Stats {
  float steps_per_sec = 0.0f;
  friend bool operator==(const Stats&, const Stats&) = default;
};

struct Bye {
  friend bool operator==(const Bye&, const Bye&) = default;
};

using Message = std::variant<Hello, Weights, Traj, Stats, Bye>;

/// Malformed stream: unknown type byte, bad payload, oversized frame.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stream ended inside a frame.
class FrameError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

std::vector<std::uint8_t> encode(const Message& m);
void encode_into(const Message& m, std::vector<std::uint8_t>& out);

/// Decodes exactly one complete frame.
Message decode(std::span<const std::uint8_t> frame);

/// Incremental decoder for a byte stream split at arbitrary boundaries.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete message, or nullopt if more bytes are needed.
  std::optional<Message> next();
  /// Throws FrameError if a partial frame is buffered (call at end of stream).
  void finish() const;
  std::size_t buffered() const { return buffer_.size() - read_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t read_ = 0;
};

MessageType type_of(const Message& m);

}  // namespace playtest::wire

#endif  // PLAYTEST_WIRE_HPP_
