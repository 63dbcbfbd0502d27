// Bit-exact payload wire format: header, keep-mask bitfield, then the kept
// token values as q-bit little-endian codes with affine dequantization.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

#include "sc3d/codec/config.hpp"

namespace sc3d::codec {

constexpr std::uint32_t kPayloadMagic = 0x53503343u;  // "C3PS"

struct SemanticPayload {
  std::vector<std::uint8_t> bytes;
  long clipped = 0;  // scalars clamped into [-clip, clip] during packing

  long bit_size() const { return static_cast<long>(bytes.size()) * 8; }
};

namespace detail {

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  void put(std::uint64_t value, int bits) {
    for (int i = 0; i < bits; ++i) {
      if (fill_ == 0) out_.push_back(0);
      if ((value >> i) & 1u) out_.back() |= std::uint8_t(1u << fill_);
      fill_ = (fill_ + 1) % 8;
    }
  }
  void align() { fill_ = 0; }

 private:
  std::vector<std::uint8_t>& out_;
  int fill_ = 0;
};

class BitReader {
 public:
  BitReader(const std::vector<std::uint8_t>& in, std::size_t byte_pos)
      : in_(in), pos_(byte_pos) {}
  std::uint64_t get(int bits) {
    std::uint64_t v = 0;
    for (int i = 0; i < bits; ++i) {
      require(pos_ < in_.size(), "payload: truncated bit stream");
      if ((in_[pos_] >> fill_) & 1u) v |= std::uint64_t(1) << i;
      if (++fill_ == 8) {
        fill_ = 0;
        ++pos_;
      }
    }
    return v;
  }
  void align() {
    if (fill_ != 0) {
      fill_ = 0;
      ++pos_;
    }
  }
  std::size_t byte_pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_;
  int fill_ = 0;
};

inline void put_u(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

inline std::uint64_t get_u(const std::vector<std::uint8_t>& in,
                           std::size_t& pos, int bytes) {
  require(pos + bytes <= in.size(), "payload: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= std::uint64_t(in[pos + i]) << (8 * i);
  pos += bytes;
  return v;
}

}  // namespace detail

inline SemanticPayload pack_payload(const Eigen::MatrixXd& compressed,
                                    const std::vector<std::uint8_t>& mask,
                                    const CodecConfig& cfg) {
  cfg.validate();
  const int S = cfg.tokens(), D = cfg.d_e;
  require(compressed.rows() == S && compressed.cols() == D,
          "pack_payload: latent shape mismatch");
  require(static_cast<int>(mask.size()) == S, "pack_payload: mask length");

  SemanticPayload payload;
  auto& out = payload.bytes;
  detail::put_u(out, kPayloadMagic, 4);
  detail::put_u(out, 1, 2);  // version
  detail::put_u(out, S, 2);
  detail::put_u(out, D, 2);
  detail::put_u(out, cfg.q_bits, 1);
  detail::put_u(out, static_cast<std::uint64_t>(cfg.keep_rate * 1000.0 + 0.5), 2);
  std::uint64_t clip_bits;
  static_assert(sizeof(double) == 8);
  std::memcpy(&clip_bits, &cfg.clip, 8);
  detail::put_u(out, clip_bits, 8);

  detail::BitWriter bw(out);
  for (int i = 0; i < S; ++i) bw.put(mask[i] ? 1 : 0, 1);
  bw.align();
  const double A = cfg.clip;
  const std::uint64_t levels = (std::uint64_t(1) << cfg.q_bits) - 1;
  for (int i = 0; i < S; ++i) {
    if (!mask[i]) continue;
    for (int j = 0; j < D; ++j) {
      double v = compressed(i, j);
      if (v < -A || v > A) {
        ++payload.clipped;
        v = v < -A ? -A : A;
      }
      bw.put(static_cast<std::uint64_t>((v + A) / (2 * A) * levels + 0.5),
             cfg.q_bits);
    }
  }
  bw.align();
  return payload;
}

struct UnpackedPayload {
  Eigen::MatrixXd latents;  // zeros at dropped tokens
  std::vector<std::uint8_t> mask;
  int tokens = 0, d_e = 0, q_bits = 0;
  double keep_rate = 0.0, clip = 0.0;
};

inline UnpackedPayload unpack_payload(const SemanticPayload& payload) {
  const auto& in = payload.bytes;
  std::size_t pos = 0;
  if (detail::get_u(in, pos, 4) != kPayloadMagic)
    throw format_error("payload: bad magic");
  if (detail::get_u(in, pos, 2) != 1)
    throw format_error("payload: unsupported version");
  UnpackedPayload up;
  up.tokens = static_cast<int>(detail::get_u(in, pos, 2));
  up.d_e = static_cast<int>(detail::get_u(in, pos, 2));
  up.q_bits = static_cast<int>(detail::get_u(in, pos, 1));
  up.keep_rate = detail::get_u(in, pos, 2) / 1000.0;
  std::uint64_t clip_bits = detail::get_u(in, pos, 8);
  std::memcpy(&up.clip, &clip_bits, 8);

  detail::BitReader br(in, pos);
  up.mask.resize(up.tokens);
  for (int i = 0; i < up.tokens; ++i)
    up.mask[i] = static_cast<std::uint8_t>(br.get(1));
  br.align();
  up.latents = Eigen::MatrixXd::Zero(up.tokens, up.d_e);
  const double A = up.clip;
  const std::uint64_t levels = (std::uint64_t(1) << up.q_bits) - 1;
  for (int i = 0; i < up.tokens; ++i) {
    if (!up.mask[i]) continue;
    for (int j = 0; j < up.d_e; ++j)
      up.latents(i, j) =
          double(br.get(up.q_bits)) / double(levels) * 2.0 * A - A;
  }
  return up;
}

// Top-ceil(rho*S) logits kept; ties break toward the lower index.
inline std::vector<std::uint8_t> keep_mask(const Eigen::VectorXd& logits,
                                           double rho) {
  require(rho > 0.0 && rho <= 1.0, "keep_mask: rho must be in (0, 1]");
  const int S = static_cast<int>(logits.size());
  const int k = static_cast<int>(std::ceil(rho * S));
  std::vector<int> idx(S);
  for (int i = 0; i < S; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return logits(a) > logits(b); });
  std::vector<std::uint8_t> mask(S, 0);
  for (int i = 0; i < k && i < S; ++i) mask[idx[i]] = 1;
  return mask;
}

// Row i survives iff mask[i] == 1; zeroing is idempotent.
inline Eigen::MatrixXd compress(const Eigen::MatrixXd& latents,
                                const std::vector<std::uint8_t>& mask) {
  require(latents.rows() == static_cast<long>(mask.size()),
          "compress: mask length mismatch");
  Eigen::MatrixXd out = latents;
  for (long i = 0; i < out.rows(); ++i)
    if (!mask[i]) out.row(i).setZero();
  return out;
}

}  // namespace sc3d::codec
