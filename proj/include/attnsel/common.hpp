#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace attnsel {

/// Failure classes surfaced by the toolkit. The CLI maps them onto exit codes.
enum class ErrorKind {
  Config,    // invalid configuration or arguments (exit 2)
  Data,      // malformed or inconsistent input data (exit 3)
  External,  // knowledge-graph / network failure (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void data_error(const std::string& what) { throw Error(ErrorKind::Data, what); }
[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorKind::Config, what); }

/// 64-bit FNV-1a; stable across platforms, used for content and config hashes.
class Fnv1a {
 public:
  void update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_hex(std::string_view bytes);
std::string hash_file(const std::string& path);

/// Floats in every exported artifact go through here (10 significant digits).
std::string format_score(double value);

}  // namespace attnsel
