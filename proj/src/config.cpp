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

#include "playtest/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace playtest {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view s) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(s) + "'");
}

template <class T>
std::vector<T> parse_list(std::string_view s) {
  std::vector<T> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    out.push_back(parse_number<T>(trim(s.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string()> get;
  std::function<void(std::string_view)> set;
};

template <class T>
Field int_field(const char* sec, const char* key, T& ref) {
  return {sec, key, [&ref] { return std::to_string(ref); },
          [&ref](std::string_view s) { ref = parse_number<T>(s); }};
}

Field double_field(const char* sec, const char* key, double& ref) {
  return {sec, key, [&ref] { return fmt_double(ref); },
          [&ref](std::string_view s) { ref = parse_number<double>(s); }};
}

Field bool_field(const char* sec, const char* key, bool& ref) {
  return {sec, key, [&ref] { return std::string(ref ? "true" : "false"); },
          [&ref](std::string_view s) { ref = parse_bool(s); }};
}

Field string_field(const char* sec, const char* key, std::string& ref) {
  return {sec, key, [&ref] { return ref; },
          [&ref](std::string_view s) { ref = std::string(s); }};
}

std::vector<Field> fields(RunConfig& c) {
  return {
      string_field("run", "level", c.level),
      {"run", "mode", [&c] { return std::string(to_string(c.mode)); },
       [&c](std::string_view s) { c.mode = parse_run_mode(s); }},
      string_field("run", "out", c.out),
      string_field("run", "checkpoint", c.checkpoint),
      {"run", "seeds", [&c] { return join(c.seeds); },
       [&c](std::string_view s) { c.seeds = parse_list<std::uint64_t>(s); }},

      int_field("env", "action_repeat", c.env.action_repeat),
      int_field("env", "episode_length", c.env.episode_length),
      double_field("env", "distance_normalizer", c.env.distance_normalizer),
      double_field("env", "velocity_normalizer", c.env.velocity_normalizer),
      double_field("env", "ray_range", c.env.ray_range),
      double_field("env", "reward_scale", c.env.reward_scale),
      double_field("env", "goal_bonus", c.env.goal_bonus),

      double_field("train", "gamma", c.train.gamma),
      double_field("train", "lambda", c.train.lambda),
      double_field("train", "clip", c.train.clip),
      double_field("train", "learning_rate", c.train.learning_rate),
      int_field("train", "epochs", c.train.epochs),
      int_field("train", "horizon", c.train.horizon),
      int_field("train", "minibatch", c.train.minibatch),
      double_field("train", "value_coef", c.train.value_coef),
      double_field("train", "entropy_coef", c.train.entropy_coef),
      double_field("train", "max_grad_norm", c.train.max_grad_norm),
      int_field("train", "frame_budget", c.train.frame_budget),
      {"train", "hidden", [&c] { return join(c.train.hidden); },
       [&c](std::string_view s) { c.train.hidden = parse_list<int>(s); }},
      double_field("train", "log_std_init", c.train.log_std_init),
      int_field("train", "envs_per_worker", c.train.envs_per_worker),
      int_field("train", "checkpoint_interval", c.train.checkpoint_interval),

      int_field("analytics", "heatmap_interval", c.analytics.heatmap_interval),
      double_field("analytics", "heatmap_cell", c.analytics.heatmap_cell),
      int_field("analytics", "stuck_min_count", c.analytics.stuck_min_count),
      int_field("analytics", "eval_episodes", c.analytics.eval_episodes),
      bool_field("analytics", "record_episodes", c.analytics.record_episodes),
      bool_field("analytics", "record_timing", c.analytics.record_timing),

      string_field("net", "listen", c.net.listen),
      string_field("net", "connect", c.net.connect),
      int_field("net", "staleness_limit", c.net.staleness_limit),
      int_field("net", "worker_index", c.net.worker_index),
  };
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

}  // namespace

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::kRlTrain: return "rl-train";
    case RunMode::kRlEval: return "rl-eval";
    case RunMode::kScriptedEval: return "scripted-eval";
    case RunMode::kRandomEval: return "random-eval";
  }
  return "rl-train";
}

RunMode parse_run_mode(std::string_view s) {
  for (RunMode m : {RunMode::kRlTrain, RunMode::kRlEval, RunMode::kScriptedEval,
                    RunMode::kRandomEval}) {
    if (s == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown mode '" + std::string(s) +
                              "' (rl-train, rl-eval, scripted-eval, random-eval)");
}

ConfigError::ConfigError(int line, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what
                                  : what),
      line_(line) {}

std::filesystem::path RunConfig::level_path() const { return resolve(base_dir, level); }
std::filesystem::path RunConfig::out_path() const { return resolve(base_dir, out); }
std::filesystem::path RunConfig::checkpoint_path() const {
  return resolve(base_dir, checkpoint);
}

void RunConfig::validate() const {
  try {
    if (level.empty()) throw std::invalid_argument("run.level is required");
    if (seeds.empty()) throw std::invalid_argument("run.seeds must not be empty");
    if (out.empty()) throw std::invalid_argument("run.out is required");
    env.validate();
    train.validate();
    if (analytics.heatmap_interval == 0) {
      throw std::invalid_argument("analytics.heatmap_interval must be > 0");
    }
    if (!(analytics.heatmap_cell > 0.0)) {
      throw std::invalid_argument("analytics.heatmap_cell must be > 0");
    }
    if (analytics.stuck_min_count < 1) {
      throw std::invalid_argument("analytics.stuck_min_count must be >= 1");
    }
    if (analytics.eval_episodes < 1) {
      throw std::invalid_argument("analytics.eval_episodes must be >= 1");
    }
    if (net.staleness_limit < 0) {
      throw std::invalid_argument("net.staleness_limit must be >= 0");
    }
    if (net.worker_index < 0) throw std::invalid_argument("net.worker_index must be >= 0");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, e.what());
  }
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return to_text(a) == to_text(b);
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::vector<Field> table = fields(cfg);
  std::set<std::string> seen;
  std::string section;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "run" && section != "env" && section != "train" &&
          section != "analytics" && section != "net") {
        throw ConfigError(line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "expected key = value");
    if (section.empty()) throw ConfigError(line_no, "key outside of a section");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    Field* f = nullptr;
    for (auto& candidate : table) {
      if (section == candidate.section && key == candidate.key) f = &candidate;
    }
    if (f == nullptr) {
      throw ConfigError(line_no, "unknown key '" + key + "' in [" + section + "]");
    }
    if (!seen.insert(section + "." + key).second) {
      throw ConfigError(line_no, "duplicate key '" + key + "' in [" + section + "]");
    }
    try {
      f->set(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(line_no, key + ": " + e.what());
    }
  }
  return cfg;
}

std::string to_text(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::ostringstream out;
  std::string section;
  for (const Field& f : fields(copy)) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get() << '\n';
  }
  return out.str();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "config not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_run_config(ss.str());
  cfg.base_dir = path.parent_path();
  return cfg;
}

}  // namespace playtest
