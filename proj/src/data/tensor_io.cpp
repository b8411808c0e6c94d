#include "stgcgrn/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "stgcgrn/errors.hpp"

namespace stgcgrn::io {
namespace {

constexpr std::array<char, 4> kMagic{'S', 'T', 'G', 'T'};

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), 8);
}

std::uint64_t get_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::string describe(std::uint64_t offset) { return " at byte offset " + std::to_string(offset); }

// Reads exactly n bytes or throws naming expected vs actual counts.
void read_exact(std::istream& is, char* dst, std::size_t n, std::uint64_t offset, const char* what) {
  is.read(dst, static_cast<std::streamsize>(n));
  const auto got = static_cast<std::size_t>(is.gcount());
  if (got != n)
    throw DataError(std::string("tensor file truncated in ") + what + describe(offset + got) + ": expected " +
                    std::to_string(n) + " bytes, got " + std::to_string(got));
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic.data(), 4);
  os.put(static_cast<char>(kTensorFormatVersion));
  os.put(static_cast<char>(t.rank()));
  for (auto d : t.shape()) put_u64(os, d);
  for (double v : t.values()) put_u64(os, std::bit_cast<std::uint64_t>(v));
}

Tensor read_tensor(std::istream& is, std::uint64_t offset) {
  std::array<char, 6> head;
  read_exact(is, head.data(), head.size(), offset, "header");
  if (std::memcmp(head.data(), kMagic.data(), 4) != 0) throw DataError("bad tensor magic" + describe(offset));
  if (static_cast<std::uint8_t>(head[4]) != kTensorFormatVersion)
    throw DataError("unsupported tensor format version " + std::to_string(static_cast<unsigned char>(head[4])) +
                    describe(offset + 4));
  const auto rank = static_cast<std::uint8_t>(head[5]);
  if (rank == 0) throw DataError("tensor rank must be positive" + describe(offset + 5));

  std::uint64_t pos = offset + 6;
  std::vector<unsigned char> dim_bytes(8 * rank);
  read_exact(is, reinterpret_cast<char*>(dim_bytes.data()), dim_bytes.size(), pos, "dims");
  Shape shape;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::uint64_t d = get_u64(dim_bytes.data() + 8 * i);
    if (d == 0) throw DataError("tensor dimension " + std::to_string(i) + " is zero" + describe(pos + 8 * i));
    shape.push_back(d);
  }
  pos += dim_bytes.size();

  const std::size_t count = shape_numel(shape);
  std::vector<unsigned char> payload(8 * count);
  read_exact(is, reinterpret_cast<char*>(payload.data()), payload.size(), pos, "payload");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<double>(get_u64(payload.data() + 8 * i));
  return Tensor(std::move(shape), std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  write_tensor(os, t);
  if (!os) throw DataError("write failed for " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  try {
    return read_tensor(is, 0);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace stgcgrn::io
