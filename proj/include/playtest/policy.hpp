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

#ifndef PLAYTEST_POLICY_HPP_
#define PLAYTEST_POLICY_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace playtest {

/// Seeded generator shared by sampling, initialisation and shuffling. The
/// normal distribution is kept alongside the engine because it caches.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Mixes a base seed with a stream id (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct Architecture {
  int obs_dim = 27;
  std::vector<int> hidden{256, 256};
  int act_dim = 4;

  std::size_t param_count() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Flat parameters of a tanh MLP trunk with a linear Gaussian-mean head, a
/// linear value head, and a state-independent log-std vector. Layout, in
/// order: per trunk layer W (out x in, row-major) then b; mean head W, b;
/// value head W, b; log_std.
class PolicyParams {
 public:
  PolicyParams() = default;
  explicit PolicyParams(Architecture arch);

  /// Orthogonal init: gain sqrt(2) trunk, 0.01 mean head, 1.0 value head;
  /// zero biases; log_std filled with `log_std_init`.
  static PolicyParams initialized(Architecture arch, std::uint64_t seed,
                                  double log_std_init = -0.5);

  const Architecture& arch() const { return arch_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  std::uint64_t version() const { return version_; }
  void set_version(std::uint64_t v) { version_ = v; }

  /// Offsets into values() for each block.
  struct Layout {
    std::vector<std::size_t> weight;  // per trunk layer
    std::vector<std::size_t> bias;
    std::size_t mean_weight = 0, mean_bias = 0;
    std::size_t value_weight = 0, value_bias = 0;
    std::size_t log_std = 0;
  };
  const Layout& layout() const { return layout_; }

  std::span<const double> log_std() const {
    return std::span<const double>(values_).subspan(layout_.log_std,
                                                    arch_.act_dim);
  }

  bool all_finite() const;

  /// Copy with every entry rounded through float32, as shipped to actors.
  PolicyParams quantized() const;

  friend bool operator==(const PolicyParams& a, const PolicyParams& b) {
    return a.arch_ == b.arch_ && a.version_ == b.version_ &&
           a.values_ == b.values_;
  }

 private:
  Architecture arch_;
  Layout layout_;
  std::vector<double> values_;
  std::uint64_t version_ = 0;
};

struct PolicyOutput {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;
  double value = 0.0;
};

PolicyOutput forward(const PolicyParams& params, std::span<const double> obs);

/// Batched forward pass. Columns of `obs` are samples. Keeps the
/// activations needed by backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // input, then each hidden layer
  Eigen::MatrixXd mean;                      // act_dim x n
  Eigen::RowVectorXd value;                  // 1 x n
};

ForwardCache forward_batch(const PolicyParams& params,
                           const Eigen::MatrixXd& obs);

/// Accumulates parameter gradients into `grad` (same layout as params) from
/// upstream gradients on the mean head, value head and log_std.
void backward(const PolicyParams& params, const ForwardCache& cache,
              const Eigen::MatrixXd& d_mean, const Eigen::RowVectorXd& d_value,
              const Eigen::VectorXd& d_log_std, std::span<double> grad);

/// Floor applied to the standard deviation, i.e. to exp(log_std).
inline constexpr double kMinStd = 1e-8;

/// log_std after the std floor.
double effective_log_std(double log_std);

/// Diagonal Gaussian log density.
double gaussian_log_prob(std::span<const double> mean,
                         std::span<const double> log_std,
                         std::span<const double> x);

/// Closed-form entropy of the diagonal Gaussian head.
double gaussian_entropy(std::span<const double> log_std);

struct SampledAction {
  Eigen::VectorXd raw;      // unclamped Gaussian draw
  Eigen::VectorXd clamped;  // raw clamped to [-1, 1]
  double log_prob = 0.0;    // of raw
  double value = 0.0;
};

/// Draws from N(mean, exp(log_std)^2); the log-probability is of the
/// unclamped sample.
SampledAction sample_action(const PolicyParams& params,
                            std::span<const double> obs, Rng& rng);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary checkpoint: "PTFG", u32 format version, u32 layer count, u32 layer
/// sizes (obs, hidden..., act), u64 parameter count, float32 parameters, u64
/// policy version. Little-endian.
std::vector<std::uint8_t> encode_checkpoint(const PolicyParams& params);
PolicyParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const PolicyParams& params,
                     const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace playtest

#endif  // PLAYTEST_POLICY_HPP_
