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

#include "playtest/level.hpp"

#include <charconv>
#include <fstream>
#include <numbers>
#include <sstream>

namespace playtest {
namespace {

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r')) {
      ++i;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' &&
           line[j] != '\r') {
      ++j;
    }
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_number(std::string_view tok, int line) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw LevelError(line, "expected a number, got '" + std::string(tok) + "'");
  }
  return v;
}

void expect_arity(const std::vector<std::string_view>& toks, std::size_t n,
                  int line) {
  if (toks.size() != n) {
    throw LevelError(line, "'" + std::string(toks[0]) + "' expects " +
                               std::to_string(n - 1) + " fields, got " +
                               std::to_string(toks.size() - 1));
  }
}

Vec3 vec_at(const std::vector<std::string_view>& toks, std::size_t i,
            int line) {
  return {parse_number(toks[i], line), parse_number(toks[i + 1], line),
          parse_number(toks[i + 2], line)};
}

std::uint8_t parse_flags(std::string_view tok, int line) {
  std::uint8_t flags = 0;
  std::size_t start = 0;
  while (start <= tok.size()) {
    auto end = tok.find(',', start);
    if (end == std::string_view::npos) end = tok.size();
    const auto name = tok.substr(start, end - start);
    if (name == "solid") {
      flags |= kSolid;
    } else if (name == "climbable") {
      flags |= kClimbable;
    } else if (name == "nocollide") {
      flags |= kNoCollide;
    } else if (name == "trap") {
      flags |= kTrap;
    } else {
      throw LevelError(line, "unknown box flag '" + std::string(name) + "'");
    }
    start = end + 1;
  }
  return flags;
}

void validate(const LevelSpec& level) {
  if (!level.bounds.valid()) throw LevelError(0, "missing or inverted bounds");
  if (level.goals.empty()) throw LevelError(0, "level has no goals");
  if (!level.bounds.contains(level.spawn.position)) {
    throw LevelError(0, "spawn outside bounds");
  }
}

}  // namespace

LevelError::LevelError(int line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                  : what),
      line_(line) {}

LevelSpec parse_level(std::string_view text) {
  LevelSpec level;
  bool have_bounds = false;
  bool have_spawn = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    const auto kw = toks[0];
    if (kw == "bounds") {
      expect_arity(toks, 7, line_no);
      level.bounds = {vec_at(toks, 1, line_no), vec_at(toks, 4, line_no)};
      if (!level.bounds.valid()) throw LevelError(line_no, "inverted bounds");
      have_bounds = true;
    } else if (kw == "spawn") {
      expect_arity(toks, 5, line_no);
      level.spawn.position = vec_at(toks, 1, line_no);
      level.spawn.yaw =
          parse_number(toks[4], line_no) * std::numbers::pi / 180.0;
      have_spawn = true;
    } else if (kw == "goal") {
      expect_arity(toks, 5, line_no);
      Goal g{vec_at(toks, 1, line_no), parse_number(toks[4], line_no)};
      if (g.radius <= 0.0) throw LevelError(line_no, "goal radius must be > 0");
      if (have_bounds && !level.bounds.contains(g.position)) {
        throw LevelError(line_no, "goal outside bounds");
      }
      level.goals.push_back(g);
    } else if (kw == "box") {
      expect_arity(toks, 8, line_no);
      Box b{{vec_at(toks, 1, line_no), vec_at(toks, 4, line_no)},
            parse_flags(toks[7], line_no)};
      if (!b.bounds.valid()) throw LevelError(line_no, "inverted box AABB");
      level.boxes.push_back(b);
    } else if (kw == "platform") {
      expect_arity(toks, 14, line_no);
      Platform p{{vec_at(toks, 1, line_no), vec_at(toks, 4, line_no)},
                 vec_at(toks, 7, line_no),
                 vec_at(toks, 10, line_no),
                 parse_number(toks[13], line_no)};
      if (!p.shape.valid()) throw LevelError(line_no, "inverted platform AABB");
      if (p.speed < 0.0) throw LevelError(line_no, "negative platform speed");
      level.platforms.push_back(p);
    } else {
      throw LevelError(line_no, "unknown record '" + std::string(kw) + "'");
    }
  }
  if (!have_bounds) throw LevelError(0, "missing bounds");
  if (!have_spawn) throw LevelError(0, "missing spawn");
  // Goals may precede the bounds line; re-check them all here.
  for (const auto& g : level.goals) {
    if (!level.bounds.contains(g.position)) {
      throw LevelError(0, "goal outside bounds");
    }
  }
  validate(level);
  return level;
}

LevelSpec load_level(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("level not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_level(ss.str());
}

std::string to_text(const LevelSpec& level) {
  std::ostringstream out;
  out.precision(17);
  auto put = [&](const Vec3& v) { out << ' ' << v.x << ' ' << v.y << ' ' << v.z; };
  out << "bounds";
  put(level.bounds.min);
  put(level.bounds.max);
  out << "\nspawn";
  put(level.spawn.position);
  out << ' ' << level.spawn.yaw * 180.0 / std::numbers::pi << '\n';
  for (const auto& g : level.goals) {
    out << "goal";
    put(g.position);
    out << ' ' << g.radius << '\n';
  }
  for (const auto& b : level.boxes) {
    out << "box";
    put(b.bounds.min);
    put(b.bounds.max);
    std::string flags;
    auto add = [&](BoxFlag f, const char* name) {
      if (!b.has(f)) return;
      if (!flags.empty()) flags += ',';
      flags += name;
    };
    add(kSolid, "solid");
    add(kClimbable, "climbable");
    add(kNoCollide, "nocollide");
    add(kTrap, "trap");
    out << ' ' << flags << '\n';
  }
  for (const auto& p : level.platforms) {
    out << "platform";
    put(p.shape.min);
    put(p.shape.max);
    put(p.waypoint_a);
    put(p.waypoint_b);
    out << ' ' << p.speed << '\n';
  }
  return out.str();
}

std::uint64_t level_hash(const LevelSpec& level) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text(level)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace playtest
