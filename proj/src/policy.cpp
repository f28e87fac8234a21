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

#include "playtest/policy.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "playtest/bytes.hpp"

namespace playtest {
namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajor>;
using Weights = Eigen::Map<RowMajor>;
using ConstBias = Eigen::Map<const Eigen::VectorXd>;
using Bias = Eigen::Map<Eigen::VectorXd>;

constexpr char kMagic[4] = {'P', 'T', 'F', 'G'};
constexpr std::uint32_t kCheckpointFormat = 1;

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Orthonormal rows/columns scaled by `gain`, written row-major into `out`.
void orthogonal_fill(double* out, int rows, int cols, double gain, Rng& rng) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (int j = 0; j < small; ++j) {
    for (int i = 0; i < big; ++i) a(i, j) = rng.gaussian();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign-fix so the result is uniformly distributed.
  const Eigen::MatrixXd r = qr.matrixQR();
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  Weights w(out, rows, cols);
  if (rows >= cols) {
    w = gain * q;
  } else {
    w = gain * q.transpose();
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t Architecture::param_count() const {
  std::size_t n = 0;
  int in = obs_dim;
  for (int h : hidden) {
    n += static_cast<std::size_t>(in) * h + h;
    in = h;
  }
  n += static_cast<std::size_t>(in) * act_dim + act_dim;
  n += static_cast<std::size_t>(in) + 1;
  n += act_dim;
  return n;
}

PolicyParams::PolicyParams(Architecture arch) : arch_(std::move(arch)) {
  if (arch_.obs_dim < 1 || arch_.act_dim < 1 || arch_.hidden.empty()) {
    throw std::invalid_argument("architecture needs inputs, outputs and >= 1 hidden layer");
  }
  std::size_t off = 0;
  int in = arch_.obs_dim;
  for (int h : arch_.hidden) {
    if (h < 1) throw std::invalid_argument("hidden layer size must be >= 1");
    layout_.weight.push_back(off);
    off += static_cast<std::size_t>(in) * h;
    layout_.bias.push_back(off);
    off += h;
    in = h;
  }
  layout_.mean_weight = off;
  off += static_cast<std::size_t>(in) * arch_.act_dim;
  layout_.mean_bias = off;
  off += arch_.act_dim;
  layout_.value_weight = off;
  off += in;
  layout_.value_bias = off;
  off += 1;
  layout_.log_std = off;
  off += arch_.act_dim;
  values_.assign(off, 0.0);
}

PolicyParams PolicyParams::initialized(Architecture arch, std::uint64_t seed,
                                       double log_std_init) {
  PolicyParams p(std::move(arch));
  Rng rng(seed);
  int in = p.arch_.obs_dim;
  for (std::size_t l = 0; l < p.arch_.hidden.size(); ++l) {
    const int out = p.arch_.hidden[l];
    orthogonal_fill(p.values_.data() + p.layout_.weight[l], out, in,
                    std::numbers::sqrt2, rng);
    in = out;
  }
  orthogonal_fill(p.values_.data() + p.layout_.mean_weight, p.arch_.act_dim, in,
                  0.01, rng);
  orthogonal_fill(p.values_.data() + p.layout_.value_weight, 1, in, 1.0, rng);
  for (int i = 0; i < p.arch_.act_dim; ++i) {
    p.values_[p.layout_.log_std + i] = log_std_init;
  }
  return p;
}

bool PolicyParams::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

PolicyParams PolicyParams::quantized() const {
  PolicyParams q = *this;
  for (double& v : q.values_) v = static_cast<double>(static_cast<float>(v));
  return q;
}

ForwardCache forward_batch(const PolicyParams& params,
                           const Eigen::MatrixXd& obs) {
  const auto& arch = params.arch();
  const auto& lay = params.layout();
  const double* v = params.values().data();
  ForwardCache c;
  c.activations.reserve(arch.hidden.size() + 1);
  c.activations.push_back(obs);
  int in = arch.obs_dim;
  for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
    const int out = arch.hidden[l];
    ConstWeights w(v + lay.weight[l], out, in);
    ConstBias b(v + lay.bias[l], out);
    Eigen::MatrixXd z = w * c.activations.back();
    z.colwise() += b;
    c.activations.push_back(z.array().tanh().matrix());
    in = out;
  }
  const auto& h = c.activations.back();
  ConstWeights wm(v + lay.mean_weight, arch.act_dim, in);
  ConstBias bm(v + lay.mean_bias, arch.act_dim);
  c.mean = wm * h;
  c.mean.colwise() += bm;
  ConstWeights wv(v + lay.value_weight, 1, in);
  c.value = wv * h;
  c.value.array() += v[lay.value_bias];
  return c;
}

PolicyOutput forward(const PolicyParams& params, std::span<const double> obs) {
  Eigen::MatrixXd x(params.arch().obs_dim, 1);
  for (int i = 0; i < params.arch().obs_dim; ++i) x(i, 0) = obs[i];
  const ForwardCache c = forward_batch(params, x);
  PolicyOutput out;
  out.mean = c.mean.col(0);
  const auto ls = params.log_std();
  out.log_std = Eigen::Map<const Eigen::VectorXd>(ls.data(), ls.size());
  out.value = c.value(0);
  return out;
}

void backward(const PolicyParams& params, const ForwardCache& cache,
              const Eigen::MatrixXd& d_mean, const Eigen::RowVectorXd& d_value,
              const Eigen::VectorXd& d_log_std, std::span<double> grad) {
  const auto& arch = params.arch();
  const auto& lay = params.layout();
  const double* v = params.values().data();
  double* g = grad.data();
  const int top = arch.hidden.back();
  const auto& h = cache.activations.back();

  Weights(g + lay.mean_weight, arch.act_dim, top) += d_mean * h.transpose();
  Bias(g + lay.mean_bias, arch.act_dim) += d_mean.rowwise().sum();
  Weights(g + lay.value_weight, 1, top) += d_value * h.transpose();
  g[lay.value_bias] += d_value.sum();
  Bias(g + lay.log_std, arch.act_dim) += d_log_std;

  Eigen::MatrixXd d_h =
      ConstWeights(v + lay.mean_weight, arch.act_dim, top).transpose() * d_mean;
  d_h += ConstWeights(v + lay.value_weight, 1, top).transpose() * d_value;

  for (std::size_t l = arch.hidden.size(); l-- > 0;) {
    const int out = arch.hidden[l];
    const int in = l == 0 ? arch.obs_dim : arch.hidden[l - 1];
    const auto& act = cache.activations[l + 1];
    const Eigen::MatrixXd d_z =
        (d_h.array() * (1.0 - act.array().square())).matrix();
    const auto& prev = cache.activations[l];
    Weights(g + lay.weight[l], out, in) += d_z * prev.transpose();
    Bias(g + lay.bias[l], out) += d_z.rowwise().sum();
    if (l > 0) d_h = ConstWeights(v + lay.weight[l], out, in).transpose() * d_z;
  }
}

double effective_log_std(double log_std) {
  static const double kFloor = std::log(kMinStd);
  return std::max(log_std, kFloor);
}

double gaussian_log_prob(std::span<const double> mean,
                         std::span<const double> log_std,
                         std::span<const double> x) {
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double s = effective_log_std(log_std[i]);
    const double z = (x[i] - mean[i]) * std::exp(-s);
    lp += -0.5 * z * z - s - kHalfLog2Pi;
  }
  return lp;
}

double gaussian_entropy(std::span<const double> log_std) {
  const double k = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  double h = 0.0;
  for (double s : log_std) h += effective_log_std(s) + k;
  return h;
}

SampledAction sample_action(const PolicyParams& params,
                            std::span<const double> obs, Rng& rng) {
  const PolicyOutput out = forward(params, obs);
  const int n = params.arch().act_dim;
  SampledAction s;
  s.raw.resize(n);
  s.clamped.resize(n);
  for (int i = 0; i < n; ++i) {
    const double std_dev = std::exp(effective_log_std(out.log_std[i]));
    s.raw[i] = out.mean[i] + std_dev * rng.gaussian();
    s.clamped[i] = std::clamp(s.raw[i], -1.0, 1.0);
  }
  s.log_prob = gaussian_log_prob({out.mean.data(), static_cast<std::size_t>(n)},
                                 params.log_std(),
                                 {s.raw.data(), static_cast<std::size_t>(n)});
  s.value = out.value;
  return s;
}

std::vector<std::uint8_t> encode_checkpoint(const PolicyParams& params) {
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointFormat);
  const auto& a = params.arch();
  w.u32(static_cast<std::uint32_t>(a.hidden.size() + 2));
  w.u32(static_cast<std::uint32_t>(a.obs_dim));
  for (int h : a.hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(a.act_dim));
  w.u64(params.size());
  for (double v : params.values()) w.f32(static_cast<float>(v));
  w.u64(params.version());
  return out;
}

PolicyParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    for (char c : kMagic) {
      if (r.u8() != static_cast<std::uint8_t>(c)) {
        throw CheckpointError("bad checkpoint magic");
      }
    }
    const auto format = r.u32();
    if (format != kCheckpointFormat) {
      throw CheckpointError("unsupported checkpoint format " +
                            std::to_string(format));
    }
    const auto layers = r.u32();
    if (layers < 3 || layers > 64) throw CheckpointError("bad layer count");
    Architecture arch;
    arch.hidden.clear();
    arch.obs_dim = static_cast<int>(r.u32());
    for (std::uint32_t i = 0; i + 2 < layers; ++i) {
      arch.hidden.push_back(static_cast<int>(r.u32()));
    }
    arch.act_dim = static_cast<int>(r.u32());
    const auto count = r.u64();
    if (count != arch.param_count()) {
      throw CheckpointError("parameter count " + std::to_string(count) +
                            " does not match architecture (" +
                            std::to_string(arch.param_count()) + ")");
    }
    PolicyParams p(arch);
    for (double& v : p.values()) v = r.f32();
    p.set_version(r.u64());
    if (r.remaining() != 0) throw CheckpointError("trailing bytes in checkpoint");
    return p;
  } catch (const ByteReader::Underflow&) {
    throw CheckpointError("truncated checkpoint");
  }
}

void save_checkpoint(const PolicyParams& params,
                     const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("cannot write " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace playtest
