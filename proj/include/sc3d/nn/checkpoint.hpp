// Versioned binary parameter dumps with an architecture header.
// Loading rejects any header mismatch.
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sc3d/common.hpp"

namespace sc3d::nn {

inline void save_blob(const std::string& path, std::uint32_t magic,
                      const std::vector<std::int64_t>& header,
                      const std::vector<float>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot write checkpoint: " + path);
  const std::uint32_t version = 1;
  const std::uint64_t hn = header.size(), dn = data.size();
  out.write(reinterpret_cast<const char*>(&magic), sizeof magic);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&hn), sizeof hn);
  out.write(reinterpret_cast<const char*>(header.data()),
            sizeof(std::int64_t) * hn);
  out.write(reinterpret_cast<const char*>(&dn), sizeof dn);
  out.write(reinterpret_cast<const char*>(data.data()), sizeof(float) * dn);
  if (!out) throw format_error("short write: " + path);
}

// Returns the payload; `header` must match the stored header exactly.
inline std::vector<float> load_blob(const std::string& path,
                                    std::uint32_t magic,
                                    const std::vector<std::int64_t>& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("missing checkpoint: " + path);
  std::uint32_t m = 0, version = 0;
  std::uint64_t hn = 0, dn = 0;
  in.read(reinterpret_cast<char*>(&m), sizeof m);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || m != magic) throw format_error("bad checkpoint magic: " + path);
  if (version != 1) throw format_error("unsupported checkpoint version: " + path);
  in.read(reinterpret_cast<char*>(&hn), sizeof hn);
  std::vector<std::int64_t> stored(hn);
  in.read(reinterpret_cast<char*>(stored.data()), sizeof(std::int64_t) * hn);
  if (!in || stored != header)
    throw format_error("checkpoint header mismatch: " + path);
  in.read(reinterpret_cast<char*>(&dn), sizeof dn);
  std::vector<float> data(dn);
  in.read(reinterpret_cast<char*>(data.data()), sizeof(float) * dn);
  if (!in) throw format_error("truncated checkpoint: " + path);
  return data;
}

}  // namespace sc3d::nn
