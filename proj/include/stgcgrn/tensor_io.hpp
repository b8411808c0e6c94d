#pragma once

// Binary tensor container:
//   "STGT" | u8 version (=1) | u8 rank | rank x u64 LE dims | prod(dims) x f64 LE
// Values are row-major.

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "stgcgrn/tensor.hpp"

namespace stgcgrn::io {

inline constexpr std::uint8_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& os, const Tensor& t);
// `offset` is the stream position of the record, used in error messages.
Tensor read_tensor(std::istream& is, std::uint64_t offset = 0);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// 64-bit FNV-1a digest of a file's bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);

}  // namespace stgcgrn::io
