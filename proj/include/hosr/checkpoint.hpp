// Versioned binary checkpoints: magic "HOSR", a version/metadata block, a
// shape header (n, m, d, k), then the tensors in declaration order as
// little-endian 64-bit floats.
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "hosr/baselines.hpp"
#include "hosr/model.hpp"

namespace hosr {

namespace detail {

constexpr char kMagic[4] = {'H', 'O', 'S', 'R'};
constexpr std::uint32_t kFormatVersion = 1;

inline void write_u32le(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

inline void write_u64le(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

inline void write_f64le(std::ostream& out, double v) {
  write_u64le(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t read_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64le(std::istream& in) { return std::bit_cast<double>(read_u64le(in)); }

inline void write_tensor(std::ostream& out, const DenseMatrix& t) {
  for (double v : t.data) write_f64le(out, v);
}

inline void read_tensor(std::istream& in, DenseMatrix& t) {
  for (double& v : t.data) v = read_f64le(in);
}

}  // namespace detail

struct Checkpoint {
  ModelKind kind = ModelKind::kHosr;
  AttentionMode attention = AttentionMode::kAttention;
  DecayVariant decay = DecayVariant::kInvSqrtItems;
  ModelParams hosr;          // valid when kind == kHosr
  BaselineParams baseline;   // valid otherwise
};

inline void save_checkpoint(const std::string& path, const ModelParams& params,
                            AttentionMode attention, DecayVariant decay) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(detail::kMagic, 4);
  detail::write_u32le(out, detail::kFormatVersion);
  detail::write_u32le(out, static_cast<std::uint32_t>(ModelKind::kHosr));
  detail::write_u32le(out, static_cast<std::uint32_t>(attention));
  detail::write_u32le(out, static_cast<std::uint32_t>(decay));
  detail::write_u64le(out, params.n);
  detail::write_u64le(out, params.m);
  detail::write_u64le(out, params.d);
  detail::write_u64le(out, params.k);
  for (const DenseMatrix* t : params.tensors()) detail::write_tensor(out, *t);
  if (!out) throw DataError("checkpoint write failed: " + path);
}

inline void save_checkpoint(const std::string& path, const BaselineParams& params,
                            DecayVariant decay = DecayVariant::kInvSqrtItems) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(detail::kMagic, 4);
  detail::write_u32le(out, detail::kFormatVersion);
  detail::write_u32le(out, static_cast<std::uint32_t>(params.variant));
  detail::write_u32le(out, static_cast<std::uint32_t>(AttentionMode::kAttention));
  detail::write_u32le(out, static_cast<std::uint32_t>(decay));
  detail::write_u64le(out, params.n);
  detail::write_u64le(out, params.m);
  detail::write_u64le(out, params.d);
  detail::write_u64le(out, 0);  // layer count unused for baselines
  for (const DenseMatrix* t : params.tensors()) detail::write_tensor(out, *t);
  if (!out) throw DataError("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(detail::kMagic, 4))
    throw DataError(path + ": not a checkpoint file (bad magic)");
  const std::uint32_t version = detail::read_u32le(in);
  if (version != detail::kFormatVersion)
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint cp;
  cp.kind = static_cast<ModelKind>(detail::read_u32le(in));
  cp.attention = static_cast<AttentionMode>(detail::read_u32le(in));
  cp.decay = static_cast<DecayVariant>(detail::read_u32le(in));
  const std::uint64_t n = detail::read_u64le(in);
  const std::uint64_t m = detail::read_u64le(in);
  const std::uint64_t d = detail::read_u64le(in);
  const std::uint64_t k = detail::read_u64le(in);
  if (!in) throw DataError(path + ": truncated checkpoint header");

  if (cp.kind == ModelKind::kHosr) {
    cp.hosr.n = n;
    cp.hosr.m = m;
    cp.hosr.d = d;
    cp.hosr.k = k;
    cp.hosr.user_emb = DenseMatrix(n, d);
    cp.hosr.item_emb = DenseMatrix(m, d);
    cp.hosr.layer_weight.assign(k, DenseMatrix(d, d));
    cp.hosr.attn_query_proj = DenseMatrix(d, d);
    cp.hosr.attn_layer_proj = DenseMatrix(d, d);
    cp.hosr.attn_vector = DenseMatrix(1, d);
    for (DenseMatrix* t : cp.hosr.tensors()) detail::read_tensor(in, *t);
  } else {
    cp.baseline.variant = cp.kind;
    cp.baseline.n = n;
    cp.baseline.m = m;
    cp.baseline.d = d;
    cp.baseline.user_emb = DenseMatrix(n, d);
    cp.baseline.item_emb = DenseMatrix(m, d);
    if (cp.kind == ModelKind::kTrustSvd) {
      cp.baseline.item_implicit = DenseMatrix(m, d);
      cp.baseline.trust_emb = DenseMatrix(n, d);
    }
    for (DenseMatrix* t : cp.baseline.tensors()) detail::read_tensor(in, *t);
  }
  if (!in) throw DataError(path + ": truncated checkpoint tensors");
  return cp;
}

}  // namespace hosr
