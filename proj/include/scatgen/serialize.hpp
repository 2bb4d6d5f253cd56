#pragma once

#include <cstdint>
#include <cstring>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace scatgen {

/// FNV-1a 64-bit hash, used for checksums and cache keys.
std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t h = 0xCBF29CE484222325ull);

/// Streaming little-endian binary writer that keeps a running FNV-1a
/// checksum of everything written.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f32(float v);
  void f64(double v);
  void f32_array(const float* p, std::size_t n);
  /// Doubles are narrowed to 32-bit on disk; all persistent formats store
  /// 32-bit reals.
  void f32_array(const double* p, std::size_t n);
  void text(const std::string& s) { bytes(s.data(), s.size()); }

  std::uint64_t checksum() const { return hash_; }

 private:
  std::ostream& out_;
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

/// Little-endian binary reader mirroring BinaryWriter.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  void bytes(void* p, std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  float f32();
  void f32_array(float* p, std::size_t n);
  void f32_array(double* p, std::size_t n);
  std::string text(std::size_t n);

  std::uint64_t checksum() const { return hash_; }

 private:
  std::istream& in_;
  std::uint64_t hash_ = 0xCBF29CE484222325ull;
};

/// key=value text headers used by the binary file formats. Rendered as one
/// "key=value" line per entry, sorted by key, terminated by a "data" line.
std::string render_text_header(const std::map<std::string, std::string>& kv);

/// Parses a header produced by render_text_header from `in`, consuming the
/// terminating "data" line. Throws io_error on malformed input.
std::map<std::string, std::string> parse_text_header(std::istream& in);

/// Fetch + convert helpers for parsed headers; throw io_error when the key
/// is missing or malformed.
long long header_int(const std::map<std::string, std::string>& kv,
                     const std::string& key);
double header_double(const std::map<std::string, std::string>& kv,
                     const std::string& key);
std::string header_str(const std::map<std::string, std::string>& kv,
                       const std::string& key);

}  // namespace scatgen
