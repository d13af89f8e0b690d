#include "attnsel/common.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace attnsel {

std::string Fnv1a::hex() const { return fmt::format("{:016x}", state_); }

std::string hash_hex(std::string_view bytes) {
  Fnv1a h;
  h.update(bytes);
  return h.hex();
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot read " + path);
  Fnv1a h;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h.update({buf, static_cast<std::size_t>(in.gcount())});
  }
  return h.hex();
}

std::string format_score(double value) {
  if (value == 0.0) return "0";  // folds -0 into 0
  return fmt::format("{:.10g}", value);
}

}  // namespace attnsel
