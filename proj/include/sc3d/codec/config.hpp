// Codec configuration and payload size accounting.
#pragma once

#include <cmath>
#include <cstdint>

#include "sc3d/common.hpp"

namespace sc3d::codec {

struct CodecConfig {
  int height = 64, width = 64;
  int patch = 8;
  int d_e = 32;        // token embedding dim
  int layers = 2;      // attention blocks per coder
  int heads = 4;
  int ff_hidden = 64;
  int d_c = 8;         // channel symbols per token (real)
  double keep_rate = 0.2;
  double mask_grad_scale = 0.05;  // straight-through gradient attenuation
  int q_bits = 16;
  double clip = 4.0;   // symmetric quantizer range [-clip, clip]
  bool positional = true;

  int tokens() const { return (height / patch) * (width / patch); }
  int patch_dim() const { return 3 * patch * patch; }
  int keep_count() const {
    return static_cast<int>(std::ceil(keep_rate * tokens()));
  }

  void validate() const {
    require(patch > 0 && height % patch == 0 && width % patch == 0,
            "codec config: patch must divide image size");
    require(keep_rate > 0.0 && keep_rate <= 1.0,
            "codec config: keep rate must be in (0, 1]");
    require(d_e % heads == 0, "codec config: heads must divide d_e");
    require(q_bits >= 1 && q_bits <= 32, "codec config: q_bits in [1,32]");
    require(clip > 0.0, "codec config: clip must be positive");
  }
};

// Serialized payload header: magic u32, version u16, S u16, d_e u16,
// q u8, keep-rate u16 (per mille), clip f64. 21 bytes total.
constexpr long kPayloadHeaderBytes = 21;
constexpr long kPayloadHeaderBits = kPayloadHeaderBytes * 8;

// Bits of a full uncompressed latent at q bits per scalar.
inline long full_latent_bits(int tokens, int d_e, int q_bits) {
  return static_cast<long>(tokens) * d_e * q_bits;
}

// Kept-coefficient accounting that matches how compression ratios are
// usually quoted: floor(rho * full bits), mask and header not counted.
inline long paper_style_bits(int tokens, int d_e, int q_bits, double rho) {
  return static_cast<long>(
      std::floor(rho * static_cast<double>(full_latent_bits(tokens, d_e, q_bits))));
}

// Exact size of the serialized payload: header + S mask bits (byte padded)
// + kept scalars.
inline long wire_bits(int tokens, int d_e, int q_bits, int kept_tokens) {
  const long mask_bits = ((tokens + 7) / 8) * 8;
  return kPayloadHeaderBits + mask_bits +
         static_cast<long>(kept_tokens) * d_e * q_bits;
}

}  // namespace sc3d::codec
