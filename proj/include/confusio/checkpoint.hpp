#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "confusio/autodiff.hpp"

namespace confusio {

// Named float64 tensors plus a free-form JSON metadata string.
//
// Layout (little-endian): magic "CFSNCKPT", u32 version, u64 metadata
// length, metadata bytes, u64 tensor count, then per tensor: u32 name
// length, name, u8 dtype (1 = f64), u32 rank, rank x u64 dims, payload.
struct Checkpoint {
  std::string metadata = "{}";
  std::map<std::string, ad::Tensor> tensors;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace confusio
