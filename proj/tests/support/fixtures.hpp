#pragma once
// Synthetic corpora, dumps and graphs shared by the unit and acceptance tests.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "attnsel/attention.hpp"
#include "attnsel/corpus.hpp"
#include "attnsel/domainrel.hpp"

namespace fixtures {

/// Deterministic uniform integer in [0, n) without std distributions.
std::uint64_t below(std::mt19937_64& rng, std::uint64_t n);
double unit(std::mt19937_64& rng);

struct PlantedShape {
  std::size_t documents = 500;
  std::size_t categories = 5;
  std::size_t markers = 5;  // exclusive to one category
  std::size_t lean = 5;     // frequent in one category, rare elsewhere
  std::size_t fillers = 300;
  std::uint64_t seed = 7;
};

struct Planted {
  attnsel::corpus::LabelTaxonomy taxonomy;
  std::vector<attnsel::corpus::Document> documents;
  std::vector<std::string> level1;                 // category codes
  std::vector<std::vector<std::string>> markers;   // per category
  attnsel::corpus::Corpus corpus() const { return {documents, taxonomy}; }
};

Planted planted_corpus(const PlantedShape& shape = {});

/// Synthetic last-layer record: markers draw more attention than fillers.
attnsel::attention::AttentionRecord planted_record(const attnsel::corpus::Document& doc, std::uint64_t seed);

void write_taxonomy(const std::filesystem::path& path, const attnsel::corpus::LabelTaxonomy& taxonomy);
void write_corpus(const std::filesystem::path& path, const std::vector<attnsel::corpus::Document>& docs);
void write_dump(const std::filesystem::path& path, const std::vector<attnsel::attention::AttentionRecord>& records);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Writes taxonomy, corpus, dumps and a config for the planted corpus under
/// `dir`; returns the config path.
std::filesystem::path write_planted_project(const std::filesystem::path& dir, const PlantedShape& shape = {});

/// networking -FormOf-> network -HasContext-> {computer science, electronics},
/// electronics -IsA-> physics, plus a few distractors.
attnsel::domainrel::InMemoryGraph networking_graph();

class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
