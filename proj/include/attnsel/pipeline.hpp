#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnsel/classify.hpp"
#include "attnsel/corpus.hpp"

namespace attnsel::pipeline {

inline constexpr const char* kToolVersion = "attnsel 1.0.0";
inline constexpr const char* kBuiltinStopwords = "builtin:en-v1";

/// The bundled stopword list (one term per line).
std::string_view builtin_stopwords_text();

struct KgConfig {
  std::string backend = "none";  // none | dump | live
  std::string edges;             // edge dump for backend "dump"
  std::string cache;             // on-disk cache for backend "live"
  std::string endpoint = "https://api.conceptnet.io";
  double requests_per_second = 1.0;
  int max_retries = 5;
  int timeout_ms = 10000;
};

/// Everything a run needs. Relative paths are resolved against the config
/// file's directory.
struct RunConfig {
  std::string corpus;
  std::string taxonomy;
  std::string dumps;
  std::string stopwords = kBuiltinStopwords;
  std::string mapping;
  std::string output = "attnsel-out";

  int level = 1;
  bool lowercase = true;
  std::uint64_t min_df = 1;
  int folds = 5;
  std::uint64_t seed = 42;

  std::vector<std::string> methods{"chi", "ig", "df", "pd"};
  std::vector<std::string> weightings{"tf", "tfidf"};
  std::vector<double> p_grid{0.9, 0.99, 0.999, 0.9999};
  std::size_t overlap_k = 0;  // 0: size of the attended vocabulary
  std::size_t top_n = 100;

  std::vector<std::size_t> k_grid{100, 500, 1000, 5000};
  std::vector<std::string> features{"binary"};
  std::vector<std::string> models{"nb", "lr"};
  double nb_alpha = 1.0;
  classify::LogRegParams logreg;

  KgConfig kg;

  /// Parses a JSON config; unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::string& path);

  /// Canonical form used for hashing (paths as resolved, sorted keys).
  nlohmann::json to_json() const;
  std::string hash() const;

  /// Throws Error(Config) when a field or path needed by `command` is invalid.
  void validate(const std::string& command) const;
};

struct RunOptions {
  unsigned jobs = 1;
  bool to_stdout = false;
  std::ostream* out = nullptr;  // defaults to std::cout
  std::ostream* log = nullptr;  // defaults to std::cerr
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> all{"ingest", "attend", "select", "compare", "domains", "evaluate", "report"};
  return all;
}

/// Runs one pipeline stage, writing its artifacts and a manifest under
/// `config.output`. Throws attnsel::Error on failure.
void run(const std::string& command, const RunConfig& config, const RunOptions& options = {});

/// Command-line entry point; returns the process exit status.
int main(int argc, char** argv);

}  // namespace attnsel::pipeline
