#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tmsgd {

// File-related failure distinct from parameter validation; the C API and the
// CLI map validation to exit 1 and io/runtime failures to exit 2.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

inline void check_arg(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Shortest decimal form that round-trips an IEEE double (%.17g).
std::string fmt_full(double v);

// Compact form for file and cell names ("0.6", "0.999", "15").
std::string fmt_compact(double v);

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 14695981039346656037ull);
std::string fnv1a64_hex(const std::string& bytes);
std::string file_checksum(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);
void ensure_dir(const std::string& path);

}  // namespace tmsgd
