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

#include <bit>
#include <cstring>
#include <random>

#include "messages.hpp"
#include "playtest/wire.hpp"

using namespace playtest;
using namespace playtest::wire;
using playtest::testing::random_message;

namespace {

// Independent little-endian writer for expected byte strings.
void le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void le_f32(std::vector<std::uint8_t>& out, float f) { le(out, std::bit_cast<std::uint32_t>(f), 4); }

std::uint32_t frame_length(const std::vector<std::uint8_t>& f) {
  return static_cast<std::uint32_t>(f[0]) | static_cast<std::uint32_t>(f[1]) << 8 |
         static_cast<std::uint32_t>(f[2]) << 16 | static_cast<std::uint32_t>(f[3]) << 24;
}

}  // namespace

TEST_CASE("BYE is a 5-byte frame") {
  const auto f = encode(Bye{});
  CHECK(f == std::vector<std::uint8_t>{1, 0, 0, 0, 5});
}

TEST_CASE("WEIGHTS with 10 params has a 44-byte payload") {
  Weights w;
  w.policy_version = 7;
  for (int i = 0; i < 10; ++i) w.params.push_back(0.5f * static_cast<float>(i) - 1.0f);
  const auto f = encode(w);
  CHECK(f.size() == 4 + 1 + 44);
  CHECK(frame_length(f) == 45);
  std::vector<std::uint8_t> want;
  le(want, 45, 4);
  want.push_back(2);
  le(want, 7, 4);
  for (float x : w.params) le_f32(want, x);
  CHECK(f == want);
}

TEST_CASE("HELLO byte layout") {
  Hello h;
  h.obs_dim = 27;
  h.act_dim = 4;
  h.level_hash = 0x0102030405060708ull;
  std::vector<std::uint8_t> want;
  le(want, 1 + 4 + 4 + 4 + 8, 4);
  want.push_back(1);
  le(want, kProtocolVersion, 4);
  le(want, 27, 4);
  le(want, 4, 4);
  le(want, h.level_hash, 8);
  CHECK(encode(h) == want);
}

TEST_CASE("TRAJ and STATS byte layout") {
  Traj t;
  t.policy_version = 3;
  t.trajectories.resize(1);
  t.trajectories[0].bootstrap_value = 0.25f;
  t.trajectories[0].steps.resize(2);
  t.trajectories[0].steps[1].done = true;
  t.trajectories[0].steps[1].events = kEventGoal | kEventAllGoals;
  const auto f = encode(t);
  // version, count, then per trajectory: length, bootstrap, steps of
  // 27 + 4 + 3 + 3 floats and two flag bytes.
  const std::size_t step = 4 * (27 + 4 + 3 + 3) + 2;
  CHECK(frame_length(f) == 1 + 4 + 4 + 4 + 4 + 2 * step);
  CHECK(f[4] == 3);
  CHECK(encode(Stats{1.5f}) == std::vector<std::uint8_t>{5, 0, 0, 0, 4, 0, 0, 0xc0, 0x3f});
}

TEST_CASE("round trip of random messages") {
  std::mt19937_64 eng(42);
  for (int i = 0; i < 10000; ++i) {
    const Message m = random_message(eng);
    const auto bytes = encode(m);
    const Message back = decode(bytes);
    REQUIRE(back.index() == m.index());
    CHECK(back == m);
    CHECK(type_of(back) == type_of(m));
  }
}

TEST_CASE("streams split at arbitrary boundaries decode identically") {
  std::mt19937_64 eng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Message> sent;
    std::vector<std::uint8_t> stream;
    const int count = 1 + trial % 12;
    for (int i = 0; i < count; ++i) {
      sent.push_back(random_message(eng));
      encode_into(sent.back(), stream);
    }
    FrameDecoder d;
    std::vector<Message> got;
    std::uniform_int_distribution<std::size_t> cut(0, 64);
    std::size_t pos = 0;
    while (pos < stream.size()) {
      const std::size_t n = std::min(cut(eng), stream.size() - pos);
      d.feed(std::span<const std::uint8_t>(stream.data() + pos, n));
      pos += n;
      while (auto m = d.next()) got.push_back(std::move(*m));
    }
    CHECK_NOTHROW(d.finish());
    CHECK(got == sent);
  }
}

TEST_CASE("one byte at a time") {
  std::mt19937_64 eng(9);
  std::vector<Message> sent;
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 30; ++i) {
    sent.push_back(random_message(eng));
    encode_into(sent.back(), stream);
  }
  FrameDecoder d;
  std::vector<Message> got;
  for (std::uint8_t b : stream) {
    d.feed(std::span<const std::uint8_t>(&b, 1));
    while (auto m = d.next()) got.push_back(std::move(*m));
  }
  CHECK(got == sent);
}

TEST_CASE("truncated frames are frame errors") {
  Weights w;
  w.params.assign(10, 1.0f);
  const auto f = encode(w);
  for (std::size_t n = 1; n < f.size(); ++n) {
    const std::span<const std::uint8_t> part(f.data(), n);
    CHECK_THROWS_AS(decode(part), FrameError);
    FrameDecoder d;
    d.feed(part);
    CHECK_FALSE(d.next().has_value());
    CHECK_THROWS_AS(d.finish(), FrameError);
  }
}

TEST_CASE("malformed frames are protocol errors") {
  SUBCASE("unknown type") {
    const std::vector<std::uint8_t> f{1, 0, 0, 0, 9};
    CHECK_THROWS_AS(decode(f), ProtocolError);
    FrameDecoder d;
    d.feed(f);
    CHECK_THROWS_WITH_AS(d.next(), "unknown message type 9", ProtocolError);
  }
  SUBCASE("zero type") {
    const std::vector<std::uint8_t> f{1, 0, 0, 0, 0};
    CHECK_THROWS_AS(decode(f), ProtocolError);
  }
  SUBCASE("zero length") {
    const std::vector<std::uint8_t> f{0, 0, 0, 0};
    CHECK_THROWS_AS(decode(f), ProtocolError);
  }
  SUBCASE("oversized length") {
    std::vector<std::uint8_t> f;
    le(f, kMaxFrameLength + 1ull, 4);
    f.push_back(2);
    CHECK_THROWS_AS(decode(f), ProtocolError);
  }
  SUBCASE("short HELLO payload") {
    std::vector<std::uint8_t> f{5, 0, 0, 0, 1, 1, 0, 0, 0};
    CHECK_THROWS_AS(decode(f), ProtocolError);
  }
  SUBCASE("ragged WEIGHTS payload") {
    std::vector<std::uint8_t> f{7, 0, 0, 0, 2, 0, 0, 0, 0, 1, 2};
    CHECK_THROWS_AS(decode(f), ProtocolError);
  }
  SUBCASE("trailing bytes inside STATS") {
    std::vector<std::uint8_t> f{6, 0, 0, 0, 4, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(decode(f), ProtocolError);
  }
  SUBCASE("TRAJ count larger than the payload") {
    std::vector<std::uint8_t> f;
    le(f, 9, 4);
    f.push_back(3);
    le(f, 0, 4);
    le(f, 1000000, 4);
    CHECK_THROWS_AS(decode(f), ProtocolError);
  }
  SUBCASE("bad done flag") {
    Traj t;
    t.trajectories.resize(1);
    t.trajectories[0].steps.resize(1);
    auto f = encode(t);
    // done byte sits after 4+4+4+4 header bytes and 34 floats of the step.
    const std::size_t done_at = 5 + 16 + 4 * (27 + 4 + 3);
    REQUIRE(f[done_at] == 0);
    f[done_at] = 2;
    CHECK_THROWS_AS(decode(f), ProtocolError);
  }
  SUBCASE("two frames passed to decode") {
    auto f = encode(Bye{});
    encode_into(Bye{}, f);
    CHECK_THROWS_AS(decode(f), ProtocolError);
  }
}

TEST_CASE("truncation is distinguishable from a malformed stream") {
  // A FrameError is a ProtocolError, but not every ProtocolError is a
  // FrameError.
  bool frame = false;
  try {
    decode(std::vector<std::uint8_t>{9, 0, 0, 0, 9});
  } catch (const FrameError&) {
    frame = true;
  } catch (const ProtocolError&) {
  }
  CHECK_FALSE(frame);
}
