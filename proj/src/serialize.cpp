#include "scatgen/serialize.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "scatgen/errors.hpp"

namespace scatgen {

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

void BinaryWriter::bytes(const void* p, std::size_t n) {
  out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out_) throw io_error("write failed");
  hash_ = fnv1a64(p, n, hash_);
}

void BinaryWriter::u32(std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  bytes(b, 4);
}

void BinaryWriter::u64(std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  bytes(b, 8);
}

void BinaryWriter::f32(float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  u32(u);
}

void BinaryWriter::f64(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  u64(u);
}

void BinaryWriter::f32_array(const float* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) f32(p[i]);
}

void BinaryWriter::f32_array(const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) f32(static_cast<float>(p[i]));
}

void BinaryReader::bytes(void* p, std::size_t n) {
  in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw io_error("unexpected end of file");
  hash_ = fnv1a64(p, n, hash_);
}

std::uint32_t BinaryReader::u32() {
  unsigned char b[4];
  bytes(b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  unsigned char b[8];
  bytes(b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

float BinaryReader::f32() {
  const std::uint32_t u = u32();
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

void BinaryReader::f32_array(float* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) p[i] = f32();
}

void BinaryReader::f32_array(double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<double>(f32());
}

std::string BinaryReader::text(std::size_t n) {
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

std::string render_text_header(const std::map<std::string, std::string>& kv) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  os << "data\n";
  return os.str();
}

std::map<std::string, std::string> parse_text_header(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line == "data") return kv;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw io_error("malformed header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  throw io_error("header missing data terminator");
}

long long header_int(const std::map<std::string, std::string>& kv,
                     const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw io_error("missing header key: " + key);
  try {
    return std::stoll(it->second);
  } catch (const std::exception&) {
    throw io_error("bad integer for header key " + key + ": " + it->second);
  }
}

double header_double(const std::map<std::string, std::string>& kv,
                     const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw io_error("missing header key: " + key);
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw io_error("bad number for header key " + key + ": " + it->second);
  }
}

std::string header_str(const std::map<std::string, std::string>& kv,
                       const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw io_error("missing header key: " + key);
  return it->second;
}

}  // namespace scatgen
