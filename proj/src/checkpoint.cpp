#include "confusio/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "confusio/error.hpp"

namespace confusio {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'F', 'S', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kDtypeF64 = 1;

template <typename U>
void put(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw Error(std::string("checkpoint: truncated while reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

std::string get_string(std::istream& in, std::uint64_t n, const char* what) {
  if (n > (std::uint64_t{1} << 32)) throw Error(std::string("checkpoint: implausible ") + what + " length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw Error(std::string("checkpoint: truncated while reading ") + what);
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, ckpt.metadata.size());
  out.write(ckpt.metadata.data(), static_cast<std::streamsize>(ckpt.metadata.size()));
  put<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, kDtypeF64);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.values()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw Error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw Error("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw Error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.metadata = get_string(in, get<std::uint64_t>(in, "metadata length"), "metadata");
  const auto count = get<std::uint64_t>(in, "tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_string(in, get<std::uint32_t>(in, "name length"), "name");
    if (get<std::uint8_t>(in, "dtype") != kDtypeF64)
      throw Error("checkpoint: tensor '" + name + "' has unsupported dtype");
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank > 8) throw Error("checkpoint: tensor '" + name + "' has implausible rank");
    ad::Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = get<std::uint64_t>(in, "dimension");
      n *= d;
    }
    if (n > (std::uint64_t{1} << 32)) throw Error("checkpoint: tensor '" + name + "' is implausibly large");
    std::vector<double> data(n);
    for (auto& v : data) v = std::bit_cast<double>(get<std::uint64_t>(in, "payload"));
    if (!ckpt.tensors.emplace(name, ad::Tensor(std::move(shape), std::move(data))).second)
      throw Error("checkpoint: duplicate tensor '" + name + "'");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace confusio
