#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "otssl/errors.hpp"

namespace otssl {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts are unsupported");

inline void write_binary_file(const std::filesystem::path& path, const void* data,
                              std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw io_error("write failed: " + path.string());
}

inline std::vector<char> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw io_error("cannot open for reading: " + path.string());
  const auto size = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(size));
  in.read(buf.data(), size);
  if (!in) throw io_error("read failed: " + path.string());
  return buf;
}

template <typename T>
void write_flat(const std::filesystem::path& path, std::span<const T> values) {
  write_binary_file(path, values.data(), values.size() * sizeof(T));
}

template <typename T>
std::vector<T> read_flat(const std::filesystem::path& path) {
  const auto raw = read_binary_file(path);
  if (raw.size() % sizeof(T) != 0)
    throw io_error("file size is not a multiple of the element size: " + path.string());
  std::vector<T> values(raw.size() / sizeof(T));
  std::memcpy(values.data(), raw.data(), raw.size());
  return values;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw io_error("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  const auto raw = read_binary_file(path);
  return std::string(raw.begin(), raw.end());
}

// FNV-1a over raw bytes; used to fingerprint datasets and configs.
inline std::uint64_t fnv1a64(const void* data, std::size_t bytes,
                             std::uint64_t h = 0xCBF29CE484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xCBF29CE484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace otssl
