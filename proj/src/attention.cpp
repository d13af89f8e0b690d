#include "attnsel/attention.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "attnsel/common.hpp"
#include "attnsel/parallel.hpp"

namespace attnsel::attention {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string where(const AttentionRecord& r) { return "record '" + r.doc_id + "'"; }

Matrix parse_matrix(const json& j, std::size_t seq, const std::string& ctx) {
  if (!j.is_array()) data_error(ctx + ": attention matrix is not an array");
  if (j.size() != seq) {
    data_error(ctx + ": dimension mismatch (" + std::to_string(j.size()) + " rows for " + std::to_string(seq) +
               " tokens)");
  }
  Matrix m(seq, seq);
  for (std::size_t r = 0; r < seq; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != seq) {
      data_error(ctx + ": dimension mismatch (row " + std::to_string(r) + " has " +
                 std::to_string(row.is_array() ? row.size() : 0) + " columns for " + std::to_string(seq) +
                 " tokens)");
    }
    for (std::size_t c = 0; c < seq; ++c) {
      if (!row[c].is_number()) data_error(ctx + ": non-numeric attention weight");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (double v : m.row(r)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

AttentionRecord parse_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    data_error(std::string("malformed dump record: ") + e.what());
  }
  if (!j.is_object()) data_error("malformed dump record: not an object");
  AttentionRecord r;
  try {
    r.doc_id = j.at("doc_id").get<std::string>();
    const auto& version = j.at("schema_version");
    if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
      data_error(where(r) + ": unknown schema version " + version.dump());
    }
    r.layer = j.at("layer").get<int>();
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& s : j.at("special")) {
      const int flag = s.get<int>();
      if (flag != 0 && flag != 1) data_error(where(r) + ": special flags must be 0 or 1");
      r.special.push_back(flag == 1);
    }
    for (const auto& w : j.at("word_ids")) {
      r.word_ids.push_back(w.is_null() ? std::nullopt : std::optional<int>(w.get<int>()));
    }
    if (auto t = j.find("truncated_from"); t != j.end() && !t->is_null()) r.truncated_from = t->get<int>();
  } catch (const json::exception& e) {
    data_error(where(r) + ": malformed field: " + e.what());
  }
  const std::size_t seq = r.tokens.size();
  if (r.special.size() != seq || r.word_ids.size() != seq) {
    data_error(where(r) + ": dimension mismatch (tokens/special/word_ids lengths differ)");
  }
  const bool has_mean = j.contains("attn_mean");
  const bool has_heads = j.contains("attn_heads");
  if (has_mean == has_heads) data_error(where(r) + ": exactly one of attn_mean / attn_heads required");
  if (has_mean) {
    r.pre_averaged = true;
    r.heads.push_back(parse_matrix(j["attn_mean"], seq, where(r)));
  } else {
    r.pre_averaged = false;
    const auto& heads = j["attn_heads"];
    if (!heads.is_array() || heads.empty()) data_error(where(r) + ": attn_heads must be a non-empty array");
    for (const auto& h : heads) r.heads.push_back(parse_matrix(h, seq, where(r)));
  }
  return r;
}

std::string serialize_record(const AttentionRecord& r) {
  json j;
  j["doc_id"] = r.doc_id;
  j["schema_version"] = kSchemaVersion;
  j["layer"] = r.layer;
  j["tokens"] = r.tokens;
  json special = json::array();
  for (bool s : r.special) special.push_back(s ? 1 : 0);
  j["special"] = std::move(special);
  json ids = json::array();
  for (const auto& w : r.word_ids) ids.push_back(w ? json(*w) : json(nullptr));
  j["word_ids"] = std::move(ids);
  if (r.pre_averaged) {
    j["attn_mean"] = matrix_json(r.heads.at(0));
  } else {
    json heads = json::array();
    for (const auto& h : r.heads) heads.push_back(matrix_json(h));
    j["attn_heads"] = std::move(heads);
  }
  if (r.truncated_from) j["truncated_from"] = *r.truncated_from;
  return j.dump();
}

void validate(const AttentionRecord& r) {
  const std::size_t seq = r.tokens.size();
  if (seq == 0) data_error(where(r) + ": no tokens");
  if (r.special.size() != seq || r.word_ids.size() != seq) {
    data_error(where(r) + ": dimension mismatch (tokens/special/word_ids lengths differ)");
  }
  if (r.heads.empty()) data_error(where(r) + ": no attention matrix");
  if (r.pre_averaged && r.heads.size() != 1) data_error(where(r) + ": pre-averaged record must hold one matrix");
  for (std::size_t h = 0; h < r.heads.size(); ++h) {
    const Matrix& m = r.heads[h];
    if (m.rows() != seq || m.cols() != seq) {
      data_error(where(r) + ": dimension mismatch (" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                 " matrix for " + std::to_string(seq) + " tokens)");
    }
    for (std::size_t i = 0; i < seq; ++i) {
      double sum = 0.0;
      for (double v : m.row(i)) {
        if (!std::isfinite(v) || v < 0.0) data_error(where(r) + ": negative or non-finite attention weight");
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        data_error(where(r) + ": row-stochastic violation (head " + std::to_string(h) + ", row " +
                   std::to_string(i) + " sums to " + format_score(sum) + ")");
      }
    }
  }
  std::optional<int> prev;
  for (std::size_t i = 0; i < seq; ++i) {
    const auto& w = r.word_ids[i];
    if (r.special[i]) {
      if (w) data_error(where(r) + ": special token " + std::to_string(i) + " has a word id");
      continue;
    }
    if (!w) data_error(where(r) + ": content token " + std::to_string(i) + " has no word id");
    if (*w < 0) data_error(where(r) + ": negative word id");
    if (prev && *w < *prev) data_error(where(r) + ": word_ids decrease at token " + std::to_string(i));
    prev = w;
  }
}

void for_each_dump(const std::string& path, const std::function<void(AttentionRecord&&)>& visit) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(path, ec)) {
    files.emplace_back(path);
  } else {
    data_error("attention dump path not found: " + path);
  }
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) data_error("cannot read " + file.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      AttentionRecord rec;
      try {
        rec = parse_record(line);
        validate(rec);
      } catch (const Error& e) {
        throw Error(e.kind(), file.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      visit(std::move(rec));
    }
  }
}

std::vector<AttentionRecord> load_dumps(const std::string& path) {
  std::vector<AttentionRecord> out;
  for_each_dump(path, [&](AttentionRecord&& r) { out.push_back(std::move(r)); });
  return out;
}

Matrix head_mean(const AttentionRecord& record) {
  if (record.heads.size() == 1) return record.heads.front();
  const std::size_t n = record.heads.front().rows();
  Matrix out(n, n);
  for (const auto& h : record.heads) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) out(i, j) += h(i, j);
    }
  }
  const double scale = 1.0 / static_cast<double>(record.heads.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) *= scale;
  }
  return out;
}

StrippedMatrix strip_special(const Matrix& matrix, const std::vector<bool>& special) {
  StrippedMatrix out;
  for (std::size_t i = 0; i < special.size(); ++i) {
    if (!special[i]) out.kept.push_back(i);
  }
  if (out.kept.empty()) data_error("no content tokens (all tokens are special)");
  const std::size_t n = out.kept.size();
  out.matrix = Matrix(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) out.matrix(a, b) = matrix(out.kept[a], out.kept[b]);
  }
  return out;
}

std::string strip_continuation(std::string_view s) {
  for (std::string_view marker : {std::string_view("##"), std::string_view("\xE2\x96\x81"),
                                  std::string_view("\xC4\xA0")}) {
    if (s.size() > marker.size() && s.substr(0, marker.size()) == marker) return std::string(s.substr(marker.size()));
  }
  return std::string(s);
}

WordAttentionMatrix merge_subwords(const Matrix& matrix, std::span<const std::string> tokens,
                                   std::span<const int> word_ids) {
  const std::size_t n = tokens.size();
  if (word_ids.size() != n || matrix.rows() != n || matrix.cols() != n) {
    data_error("merge_subwords: dimension mismatch");
  }
  // Group positions by word id, words ordered by first appearance.
  std::vector<std::vector<std::size_t>> groups;
  std::map<int, std::size_t> slot;
  WordAttentionMatrix out;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = slot.emplace(word_ids[i], groups.size());
    if (fresh) {
      groups.emplace_back();
      out.words.emplace_back();
    }
    groups[it->second].push_back(i);
    out.words[it->second] += strip_continuation(tokens[i]);
  }
  const std::size_t w = groups.size();
  out.weights = Matrix(w, w);
  for (std::size_t a = 0; a < w; ++a) {
    for (std::size_t b = 0; b < w; ++b) {
      double sum = 0.0;
      for (auto s : groups[a]) {
        for (auto t : groups[b]) sum += matrix(s, t);
      }
      out.weights(a, b) = sum / static_cast<double>(groups[a].size() * groups[b].size());
    }
  }
  return out;
}

std::vector<double> vertical_attention(const WordAttentionMatrix& wam) {
  const Matrix& m = wam.weights;
  std::vector<double> out(m.cols(), 0.0);
  if (m.rows() == 0) return out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += m(i, j);
  }
  for (double& v : out) v /= static_cast<double>(m.rows());
  return out;
}

std::vector<std::size_t> attended_positions(const WordAttentionMatrix& wam) {
  const auto scores = vertical_attention(wam);
  const double threshold = wam.weights.mean();
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > threshold) out.push_back(j);
  }
  return out;
}

std::set<std::string> select_attended(const WordAttentionMatrix& wam) {
  std::set<std::string> out;
  for (auto j : attended_positions(wam)) out.insert(wam.words[j]);
  return out;
}

WordAttentionMatrix word_matrix(const AttentionRecord& record) {
  const Matrix mean = head_mean(record);
  const auto stripped = strip_special(mean, record.special);
  std::vector<std::string> tokens;
  std::vector<int> ids;
  for (auto i : stripped.kept) {
    tokens.push_back(record.tokens[i]);
    ids.push_back(record.word_ids[i].value());
  }
  return merge_subwords(stripped.matrix, tokens, ids);
}

DocumentAttention analyse_record(const AttentionRecord& record, const corpus::TokenizationPolicy& policy) {
  const Matrix mean = head_mean(record);
  const auto stripped = strip_special(mean, record.special);
  std::vector<std::string> tokens;
  std::vector<int> ids;
  for (auto i : stripped.kept) {
    tokens.push_back(record.tokens[i]);
    ids.push_back(record.word_ids[i].value());
  }
  WordAttentionMatrix wam = merge_subwords(stripped.matrix, tokens, ids);

  DocumentAttention out;
  out.doc_id = record.doc_id;
  out.content_tokens = tokens.size();
  out.vertical = vertical_attention(wam);
  out.words.reserve(wam.words.size());
  for (const auto& w : wam.words) out.words.push_back(policy.lowercase ? corpus::to_lower(w) : w);
  out.subwords.insert(tokens.begin(), tokens.end());

  std::set<int> attended_ids;
  {
    // merge_subwords orders words by first appearance of their id.
    std::vector<int> id_of_word;
    for (int id : ids) {
      if (id_of_word.empty() || std::find(id_of_word.begin(), id_of_word.end(), id) == id_of_word.end()) {
        id_of_word.push_back(id);
      }
    }
    for (auto j : attended_positions(wam)) {
      out.attended.insert(out.words[j]);
      attended_ids.insert(id_of_word[j]);
    }
  }
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (attended_ids.contains(ids[t])) out.attended_subwords.insert(tokens[t]);
  }
  return out;
}

void AttentionAggregator::add(const DocumentAttention& doc) {
  ++documents_;
  for (std::size_t j = 0; j < doc.words.size(); ++j) {
    auto& s = terms_[doc.words[j]];
    s.sum += doc.vertical[j];
    ++s.occurrences;
  }
  for (const auto& w : doc.attended) {
    ++terms_[w].selected_docs;
    attended_.insert(w);
  }
  subwords_.insert(doc.subwords.begin(), doc.subwords.end());
  attended_subwords_.insert(doc.attended_subwords.begin(), doc.attended_subwords.end());
}

AttendedVocabulary AttentionAggregator::finish() const {
  AttendedVocabulary out;
  out.terms = terms_;
  out.attended = attended_;
  out.documents = documents_;
  out.distinct_subwords = subwords_.size();
  out.distinct_attended_subwords = attended_subwords_.size();
  return out;
}

featsel::TermRanking AttendedVocabulary::ranking() const {
  std::vector<featsel::ScoredTerm> entries;
  entries.reserve(attended.size());
  for (const auto& t : attended) entries.push_back({t, terms.at(t).mean()});
  return featsel::TermRanking({featsel::Method::Attention, featsel::Weighting::None}, std::move(entries));
}

featsel::TermRanking AttendedVocabulary::selection_frequency_ranking() const {
  std::vector<featsel::ScoredTerm> entries;
  entries.reserve(attended.size());
  for (const auto& t : attended) entries.push_back({t, static_cast<double>(terms.at(t).selected_docs)});
  return featsel::TermRanking({featsel::Method::Attention, featsel::Weighting::None}, std::move(entries));
}

double AttendedVocabulary::word_fraction() const {
  return terms.empty() ? 0.0 : static_cast<double>(attended.size()) / static_cast<double>(terms.size());
}

double AttendedVocabulary::subword_fraction() const {
  return distinct_subwords == 0
             ? 0.0
             : static_cast<double>(distinct_attended_subwords) / static_cast<double>(distinct_subwords);
}

AttendedVocabulary aggregate_attention(std::span<const AttentionRecord> records,
                                       const corpus::TokenizationPolicy& policy, unsigned jobs) {
  if (records.empty()) data_error("aggregate_attention: empty record stream");
  std::vector<DocumentAttention> docs(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) { docs[i] = analyse_record(records[i], policy); });
  AttentionAggregator agg;
  for (const auto& d : docs) agg.add(d);
  return agg.finish();
}

}  // namespace attnsel::attention
