#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "attnsel/corpus.hpp"
#include "attnsel/matrix.hpp"
#include "attnsel/ranking.hpp"

namespace attnsel::attention {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kRowSumTolerance = 1e-4;

/// Last-layer attention of one document as written by the exporter.
struct AttentionRecord {
  std::string doc_id;
  int layer = 0;
  std::vector<std::string> tokens;
  std::vector<bool> special;
  std::vector<std::optional<int>> word_ids;
  /// One matrix per head, or a single matrix when `pre_averaged`.
  std::vector<Matrix> heads;
  bool pre_averaged = true;
  /// Set when the exporter truncated the input; informational only.
  std::optional<int> truncated_from;
};

/// Throws Error(Data) describing the first violated record invariant.
void validate(const AttentionRecord& record);

/// Parses one dump line (without validating row sums etc.).
AttentionRecord parse_record(const std::string& line);
std::string serialize_record(const AttentionRecord& record);

/// Visits every record of a dump file, or of every `*.jsonl` file in a
/// directory (sorted by name). Records are validated before the callback.
void for_each_dump(const std::string& path, const std::function<void(AttentionRecord&&)>& visit);
std::vector<AttentionRecord> load_dumps(const std::string& path);

Matrix head_mean(const AttentionRecord& record);

struct StrippedMatrix {
  Matrix matrix;
  std::vector<std::size_t> kept;  // surviving token positions
};
/// Drops rows/columns of special tokens; remaining weights are left as-is.
StrippedMatrix strip_special(const Matrix& matrix, const std::vector<bool>& special);

struct WordAttentionMatrix {
  std::vector<std::string> words;
  Matrix weights;
};

/// Strips WordPiece `##`, SentencePiece `▁` and byte-level BPE `Ġ` markers.
std::string strip_continuation(std::string_view subword);

/// Groups subword rows and columns by word id and averages each block.
/// `tokens` and `word_ids` are aligned with the matrix rows.
WordAttentionMatrix merge_subwords(const Matrix& matrix, std::span<const std::string> tokens,
                                   std::span<const int> word_ids);

/// Column means: attention received by each word.
std::vector<double> vertical_attention(const WordAttentionMatrix& wam);

/// Positions whose vertical attention is strictly above the matrix mean.
std::vector<std::size_t> attended_positions(const WordAttentionMatrix& wam);
/// Distinct words at attended positions, sorted.
std::set<std::string> select_attended(const WordAttentionMatrix& wam);

/// head_mean -> strip_special -> merge_subwords for one record.
WordAttentionMatrix word_matrix(const AttentionRecord& record);

/// Per-document outcome consumed by the corpus-level reduction.
struct DocumentAttention {
  std::string doc_id;
  std::vector<std::string> words;  // normalised per the tokenization policy
  std::vector<double> vertical;
  std::set<std::string> attended;
  std::size_t content_tokens = 0;
  std::set<std::string> subwords;           // distinct non-special dump tokens
  std::set<std::string> attended_subwords;  // dump tokens of attended words
};

DocumentAttention analyse_record(const AttentionRecord& record, const corpus::TokenizationPolicy& policy);

struct AttendedVocabulary {
  struct TermStats {
    double sum = 0.0;
    std::size_t occurrences = 0;
    std::size_t selected_docs = 0;  // documents where the term was attended
    double mean() const { return occurrences ? sum / static_cast<double>(occurrences) : 0.0; }
  };
  std::map<std::string, TermStats> terms;
  std::set<std::string> attended;
  std::size_t documents = 0;
  std::size_t distinct_subwords = 0;
  std::size_t distinct_attended_subwords = 0;

  /// Attended terms ordered by mean vertical attention.
  featsel::TermRanking ranking() const;
  /// Attended terms ordered by the number of documents that attended them.
  featsel::TermRanking selection_frequency_ranking() const;
  double word_fraction() const;
  double subword_fraction() const;
};

/// Order-sensitive only through floating-point summation; callers reduce in
/// record order so results are reproducible.
class AttentionAggregator {
 public:
  void add(const DocumentAttention& doc);
  AttendedVocabulary finish() const;
  bool empty() const noexcept { return documents_ == 0; }

 private:
  std::map<std::string, AttendedVocabulary::TermStats> terms_;
  std::set<std::string> attended_;
  std::set<std::string> subwords_;
  std::set<std::string> attended_subwords_;
  std::size_t documents_ = 0;
};

/// Throws when `records` is empty. Records are analysed on up to `jobs` threads.
AttendedVocabulary aggregate_attention(std::span<const AttentionRecord> records,
                                       const corpus::TokenizationPolicy& policy, unsigned jobs = 1);

}  // namespace attnsel::attention
