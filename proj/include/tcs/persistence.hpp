// Bit-exact on-disk formats, all little-endian with canonical field order so
// re-saving a loaded artifact reproduces the bytes:
//
//   STPM  sparse ternary projection: magic "STPM", version u32, n/m/k u32,
//         then per column k records of (row u32, sign byte 0x00=-1/0x01=+1).
//         File size is exactly 20 + m*k*5 bytes.
//   TCSM  model checkpoint: magic "TCSM", version u32, config (S u32, R f64,
//         gamma f64, L u32, H u32), normalization mean/std f64, then named
//         tensor blocks (name length + name + dims + f64 data). Theta_sb and
//         the mask are never stored; they are recomputed via refresh.
//   TCSY  per-patch measurements: magic "TCSY", version u32, width/height/
//         patch_side/stride/patch_count/m u32, then patch_count*m f64.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcs/model.hpp"
#include "tcs/numerics.hpp"

namespace tcs {

constexpr std::uint32_t kStpVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kMeasurementVersion = 1;

namespace io {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw std::runtime_error(std::string("truncated file (reading ") + what + ")");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline double get_f64(std::istream& in, const char* what) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw std::runtime_error(std::string("truncated file (reading ") + what + ")");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline void put_magic(std::ostream& out, const char magic[4]) { out.write(magic, 4); }

inline void check_magic(std::istream& in, const char magic[4], const char* format) {
  char got[4] = {0, 0, 0, 0};
  in.read(got, 4);
  if (in.gcount() != 4 || std::memcmp(got, magic, 4) != 0)
    throw std::runtime_error(std::string("bad magic: not a ") + format + " file");
}

inline void check_version(std::uint32_t got, std::uint32_t want, const char* format) {
  if (got != want)
    throw std::runtime_error(std::string("unsupported ") + format + " version " + std::to_string(got));
}

}  // namespace io

// ---- STPM ----

inline void save_stp(const SparseTernaryMatrix& t, std::ostream& out) {
  t.validate();
  io::put_magic(out, "STPM");
  io::put_u32(out, kStpVersion);
  io::put_u32(out, t.n);
  io::put_u32(out, t.m);
  io::put_u32(out, t.k);
  for (std::uint32_t j = 0; j < t.m; ++j) {
    for (const TernaryEntry& e : t.column(j)) {
      io::put_u32(out, e.row);
      const char sign = e.sign > 0 ? '\x01' : '\x00';
      out.write(&sign, 1);
    }
  }
  if (!out) throw std::runtime_error("failed writing STPM stream");
}

inline SparseTernaryMatrix load_stp(std::istream& in) {
  io::check_magic(in, "STPM", "STPM");
  io::check_version(io::get_u32(in, "version"), kStpVersion, "STPM");
  SparseTernaryMatrix t;
  t.n = io::get_u32(in, "n");
  t.m = io::get_u32(in, "m");
  t.k = io::get_u32(in, "k");
  if (t.k > t.n) throw std::runtime_error("STPM: k exceeds n");
  t.entries.reserve(static_cast<std::size_t>(t.m) * t.k);
  for (std::uint32_t j = 0; j < t.m; ++j) {
    std::uint32_t prev = 0;
    for (std::uint32_t e = 0; e < t.k; ++e) {
      const std::uint32_t row = io::get_u32(in, "row index");
      char sign_byte = 0;
      in.read(&sign_byte, 1);
      if (in.gcount() != 1) throw std::runtime_error("truncated file (reading sign)");
      if (row >= t.n) throw std::runtime_error("STPM: row index out of range");
      if (e > 0 && row <= prev) throw std::runtime_error("STPM: row indices not strictly increasing");
      if (sign_byte != '\x00' && sign_byte != '\x01') throw std::runtime_error("STPM: invalid sign byte");
      prev = row;
      t.entries.push_back({row, static_cast<std::int8_t>(sign_byte == '\x01' ? 1 : -1)});
    }
  }
  return t;
}

inline void save_stp(const SparseTernaryMatrix& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_stp(t, out);
  if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

inline SparseTernaryMatrix load_stp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_stp(in);
}

// ---- TCSM ----

namespace detail {

inline void put_tensor(std::ostream& out, const std::string& name, std::span<const std::size_t> dims,
                       std::span<const double> data) {
  io::put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  io::put_u32(out, static_cast<std::uint32_t>(dims.size()));
  std::size_t expect = 1;
  for (std::size_t d : dims) {
    io::put_u32(out, static_cast<std::uint32_t>(d));
    expect *= d;
  }
  if (expect != data.size()) throw std::runtime_error("tensor block size mismatch for " + name);
  for (double v : data) io::put_f64(out, v);
}

struct TensorBlock {
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

inline std::map<std::string, TensorBlock> read_tensor_blocks(std::istream& in, std::uint32_t count) {
  std::map<std::string, TensorBlock> blocks;
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::uint32_t name_len = io::get_u32(in, "tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (static_cast<std::uint32_t>(in.gcount()) != name_len)
      throw std::runtime_error("truncated file (reading tensor name)");
    TensorBlock block;
    const std::uint32_t ndims = io::get_u32(in, "tensor rank");
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndims; ++d) {
      block.dims.push_back(io::get_u32(in, "tensor dim"));
      total *= block.dims.back();
    }
    block.data.resize(total);
    for (std::size_t i = 0; i < total; ++i) block.data[i] = io::get_f64(in, "tensor data");
    blocks.emplace(std::move(name), std::move(block));
  }
  return blocks;
}

inline const TensorBlock& require_tensor(const std::map<std::string, TensorBlock>& blocks,
                                         const std::string& name) {
  const auto it = blocks.find(name);
  if (it == blocks.end()) throw std::runtime_error("missing tensor: " + name);
  return it->second;
}

inline void require_dims(const TensorBlock& block, std::initializer_list<std::size_t> dims,
                         const std::string& name) {
  bool ok = block.dims.size() == dims.size();
  if (ok) {
    std::size_t i = 0;
    for (std::size_t d : dims) ok = ok && block.dims[i++] == d;
  }
  if (!ok) throw std::runtime_error("dimension inconsistency for tensor: " + name);
}

}  // namespace detail

/// Canonical tensor order: theta, alpha, then per hidden layer the dense and
/// batch-norm vectors, then the output layer. Saving is a pure function of
/// the model, so save -> load -> save is byte-identical.
inline void save_checkpoint(const Model& model, std::ostream& out) {
  const NetworkConfig& cfg = model.config;
  io::put_magic(out, "TCSM");
  io::put_u32(out, kCheckpointVersion);
  io::put_u32(out, cfg.patch_side);
  io::put_f64(out, cfg.sensing_rate);
  io::put_f64(out, cfg.sparsity_ratio);
  io::put_u32(out, cfg.hidden_layers);
  io::put_u32(out, cfg.hidden_units);
  io::put_f64(out, model.stats.mean);
  io::put_f64(out, model.stats.std);

  const std::uint32_t tensors = 2 + 6 * cfg.hidden_layers + 2;
  io::put_u32(out, tensors);
  const auto dims2 = [](std::size_t a, std::size_t b) { return std::vector<std::size_t>{a, b}; };
  const auto dims1 = [](std::size_t a) { return std::vector<std::size_t>{a}; };

  detail::put_tensor(out, "theta", dims2(model.sensing.theta.rows(), model.sensing.theta.cols()),
                     model.sensing.theta.values());
  detail::put_tensor(out, "alpha", dims1(model.sensing.alpha.size()), model.sensing.alpha);
  for (std::size_t l = 0; l < model.net.hidden.size(); ++l) {
    const HiddenBlock& block = model.net.hidden[l];
    const std::string p = "fc" + std::to_string(l + 1) + ".";
    const std::string q = "bn" + std::to_string(l + 1) + ".";
    detail::put_tensor(out, p + "weight", dims2(block.fc.weights.rows(), block.fc.weights.cols()),
                       block.fc.weights.values());
    detail::put_tensor(out, p + "bias", dims1(block.fc.bias.size()), block.fc.bias);
    detail::put_tensor(out, q + "gamma", dims1(block.bn.gamma.size()), block.bn.gamma);
    detail::put_tensor(out, q + "beta", dims1(block.bn.beta.size()), block.bn.beta);
    detail::put_tensor(out, q + "running_mean", dims1(block.bn.running_mean.size()), block.bn.running_mean);
    detail::put_tensor(out, q + "running_var", dims1(block.bn.running_var.size()), block.bn.running_var);
  }
  detail::put_tensor(out, "out.weight", dims2(model.net.output.weights.rows(), model.net.output.weights.cols()),
                     model.net.output.weights.values());
  detail::put_tensor(out, "out.bias", dims1(model.net.output.bias.size()), model.net.output.bias);
  if (!out) throw std::runtime_error("failed writing TCSM stream");
}

inline Model load_checkpoint(std::istream& in) {
  io::check_magic(in, "TCSM", "TCSM");
  io::check_version(io::get_u32(in, "version"), kCheckpointVersion, "TCSM");
  Model model;
  NetworkConfig& cfg = model.config;
  cfg.patch_side = io::get_u32(in, "patch side");
  cfg.sensing_rate = io::get_f64(in, "sensing rate");
  cfg.sparsity_ratio = io::get_f64(in, "sparsity ratio");
  cfg.hidden_layers = io::get_u32(in, "hidden layers");
  cfg.hidden_units = io::get_u32(in, "hidden units");
  cfg.validate();
  model.stats.mean = io::get_f64(in, "normalization mean");
  model.stats.std = io::get_f64(in, "normalization std");

  const std::uint32_t count = io::get_u32(in, "tensor count");
  const auto blocks = detail::read_tensor_blocks(in, count);

  const std::size_t n = cfg.n(), m = cfg.m(), units = cfg.hidden_units;

  const auto& theta = detail::require_tensor(blocks, "theta");
  detail::require_dims(theta, {n, m}, "theta");
  DenseMatrix theta_mat(n, m);
  theta_mat.values() = theta.data;
  model.sensing = make_sensing_weights(std::move(theta_mat), cfg.k());

  const auto& alpha = detail::require_tensor(blocks, "alpha");
  detail::require_dims(alpha, {m}, "alpha");
  model.sensing.alpha = alpha.data;  // stored bytes win over the recomputation

  std::size_t fan_in = m;
  for (std::uint32_t l = 1; l <= cfg.hidden_layers; ++l) {
    const std::string p = "fc" + std::to_string(l) + ".";
    const std::string q = "bn" + std::to_string(l) + ".";
    HiddenBlock block;
    const auto& w = detail::require_tensor(blocks, p + "weight");
    detail::require_dims(w, {fan_in, units}, p + "weight");
    block.fc.weights = DenseMatrix(fan_in, units);
    block.fc.weights.values() = w.data;
    const auto& bias = detail::require_tensor(blocks, p + "bias");
    detail::require_dims(bias, {units}, p + "bias");
    block.fc.bias = bias.data;
    for (const char* field : {"gamma", "beta", "running_mean", "running_var"}) {
      const auto& v = detail::require_tensor(blocks, q + field);
      detail::require_dims(v, {units}, q + field);
      if (std::string(field) == "gamma") block.bn.gamma = v.data;
      else if (std::string(field) == "beta") block.bn.beta = v.data;
      else if (std::string(field) == "running_mean") block.bn.running_mean = v.data;
      else block.bn.running_var = v.data;
    }
    model.net.hidden.push_back(std::move(block));
    fan_in = units;
  }
  const auto& ow = detail::require_tensor(blocks, "out.weight");
  detail::require_dims(ow, {fan_in, n}, "out.weight");
  model.net.output.weights = DenseMatrix(fan_in, n);
  model.net.output.weights.values() = ow.data;
  const auto& ob = detail::require_tensor(blocks, "out.bias");
  detail::require_dims(ob, {n}, "out.bias");
  model.net.output.bias = ob.data;

  model.net.scaling.alpha = model.sensing.alpha;
  return model;
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_checkpoint(model, out);
  if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_checkpoint(in);
}

// ---- TCSY (measurements) ----

/// Per-patch measurement vectors for one sensed image.
struct MeasurementSet {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t patch_side = 0;
  std::uint32_t stride = 0;
  DenseMatrix y;  // patch_count x m, patches in row-major origin order
};

inline void save_measurements(const MeasurementSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  io::put_magic(out, "TCSY");
  io::put_u32(out, kMeasurementVersion);
  io::put_u32(out, set.width);
  io::put_u32(out, set.height);
  io::put_u32(out, set.patch_side);
  io::put_u32(out, set.stride);
  io::put_u32(out, static_cast<std::uint32_t>(set.y.rows()));
  io::put_u32(out, static_cast<std::uint32_t>(set.y.cols()));
  for (double v : set.y.values()) io::put_f64(out, v);
  if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

inline MeasurementSet load_measurements(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  io::check_magic(in, "TCSY", "TCSY");
  io::check_version(io::get_u32(in, "version"), kMeasurementVersion, "TCSY");
  MeasurementSet set;
  set.width = io::get_u32(in, "width");
  set.height = io::get_u32(in, "height");
  set.patch_side = io::get_u32(in, "patch side");
  set.stride = io::get_u32(in, "stride");
  const std::uint32_t patches = io::get_u32(in, "patch count");
  const std::uint32_t m = io::get_u32(in, "measurement count");
  set.y = DenseMatrix(patches, m);
  for (double& v : set.y.values()) v = io::get_f64(in, "measurement data");
  return set;
}

}  // namespace tcs
