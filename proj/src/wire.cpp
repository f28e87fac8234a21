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

#include "playtest/wire.hpp"

#include <string>

#include "playtest/bytes.hpp"

namespace playtest::wire {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void write_payload(const Message& m, ByteWriter& w) {
  std::visit(
      Overloaded{
          [&](const Hello& h) {
            w.u32(h.protocol_version);
            w.u32(h.obs_dim);
            w.u32(h.act_dim);
            w.u64(h.level_hash);
          },
          [&](const Weights& x) {
            w.u32(x.policy_version);
            for (float f : x.params) w.f32(f);
          },
          [&](const Traj& t) {
            w.u32(t.policy_version);
            w.u32(static_cast<std::uint32_t>(t.trajectories.size()));
            for (const auto& traj : t.trajectories) {
              w.u32(static_cast<std::uint32_t>(traj.steps.size()));
              w.f32(traj.bootstrap_value);
              for (const auto& s : traj.steps) {
                for (float f : s.observation) w.f32(f);
                for (float f : s.action) w.f32(f);
                w.f32(s.log_prob);
                w.f32(s.value);
                w.f32(s.reward);
                w.u8(s.done ? 1 : 0);
                w.u8(s.events);
                for (float f : s.position) w.f32(f);
              }
            }
          },
          [&](const Stats& s) { w.f32(s.steps_per_sec); },
          [&](const Bye&) {},
      },
      m);
}

constexpr std::size_t kStepBytes =
    4 * (Observation::kSize + Action::kSize + 3 + 3) + 2;

Message read_payload(MessageType type, ByteReader& r) {
  switch (type) {
    case MessageType::kHello: {
      Hello h;
      h.protocol_version = r.u32();
      h.obs_dim = r.u32();
      h.act_dim = r.u32();
      h.level_hash = r.u64();
      return h;
    }
    case MessageType::kWeights: {
      Weights x;
      x.policy_version = r.u32();
      if (r.remaining() % 4 != 0) {
        throw ProtocolError("WEIGHTS payload is not a whole number of floats");
      }
      x.params.resize(r.remaining() / 4);
      for (float& f : x.params) f = r.f32();
      return x;
    }
    case MessageType::kTraj: {
      Traj t;
      t.policy_version = r.u32();
      const std::uint32_t n = r.u32();
      if (n > r.remaining() / 8) throw ProtocolError("TRAJ count exceeds payload");
      t.trajectories.resize(n);
      for (auto& traj : t.trajectories) {
        const std::uint32_t len = r.u32();
        traj.bootstrap_value = r.f32();
        if (len > r.remaining() / kStepBytes) {
          throw ProtocolError("TRAJ length exceeds payload");
        }
        traj.steps.resize(len);
        for (auto& s : traj.steps) {
          for (float& f : s.observation) f = r.f32();
          for (float& f : s.action) f = r.f32();
          s.log_prob = r.f32();
          s.value = r.f32();
          s.reward = r.f32();
          const std::uint8_t done = r.u8();
          if (done > 1) throw ProtocolError("TRAJ done flag is not 0/1");
          s.done = done != 0;
          s.events = r.u8();
          for (float& f : s.position) f = r.f32();
        }
      }
      return t;
    }
    case MessageType::kStats: {
      Stats s;
      s.steps_per_sec = r.f32();
      return s;
    }
    case MessageType::kBye:
      return Bye{};
  }
  throw ProtocolError("unknown message type " +
                      std::to_string(static_cast<int>(type)));
}

bool known_type(std::uint8_t t) { return t >= 1 && t <= 5; }

}  // namespace

MessageType type_of(const Message& m) {
  return static_cast<MessageType>(m.index() + 1);
}

void encode_into(const Message& m, std::vector<std::uint8_t>& out) {
  const std::size_t start = out.size();
  ByteWriter w(out);
  w.u32(0);  // patched below
  w.u8(static_cast<std::uint8_t>(type_of(m)));
  write_payload(m, w);
  const auto len = static_cast<std::uint32_t>(out.size() - start - 4);
  for (int i = 0; i < 4; ++i) {
    out[start + i] = static_cast<std::uint8_t>(len >> (8 * i));
  }
}

std::vector<std::uint8_t> encode(const Message& m) {
  std::vector<std::uint8_t> out;
  encode_into(m, out);
  return out;
}

Message decode(std::span<const std::uint8_t> frame) {
  FrameDecoder d;
  d.feed(frame);
  auto m = d.next();
  if (!m) throw FrameError("truncated frame");
  if (d.buffered() != 0) throw ProtocolError("trailing bytes after frame");
  return std::move(*m);
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (read_ > 0 && read_ == buffer_.size()) {
    buffer_.clear();
    read_ = 0;
  } else if (read_ > (1u << 20) && read_ > buffer_.size() / 2) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(read_));
    read_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameDecoder::next() {
  const std::size_t avail = buffer_.size() - read_;
  if (avail < 4) return std::nullopt;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) {
    len |= static_cast<std::uint32_t>(buffer_[read_ + i]) << (8 * i);
  }
  if (len == 0) throw ProtocolError("zero-length frame");
  if (len > kMaxFrameLength) throw ProtocolError("frame too large");
  const std::uint8_t type = buffer_[read_ + 4 > buffer_.size() - 1 ? read_ : read_ + 4];
  if (avail >= 5 && !known_type(type)) {
    throw ProtocolError("unknown message type " + std::to_string(type));
  }
  if (avail < 4 + static_cast<std::size_t>(len)) return std::nullopt;
  std::span<const std::uint8_t> payload(buffer_.data() + read_ + 5, len - 1);
  ByteReader r(payload);
  Message m;
  try {
    m = read_payload(static_cast<MessageType>(type), r);
  } catch (const ByteReader::Underflow&) {
    throw ProtocolError("payload shorter than its message type requires");
  }
  if (r.remaining() != 0) throw ProtocolError("payload has trailing bytes");
  read_ += 4 + len;
  return m;
}

void FrameDecoder::finish() const {
  if (buffered() != 0) throw FrameError("stream ended inside a frame");
}

}  // namespace playtest::wire
