#include "attnsel/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "attnsel/common.hpp"

namespace attnsel::featsel {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Attention: return "attention";
    case Method::Chi: return "chi";
    case Method::Ig: return "ig";
    case Method::Df: return "df";
    case Method::Pd: return "pd";
  }
  return "?";
}

std::string_view to_string(Weighting w) {
  switch (w) {
    case Weighting::None: return "none";
    case Weighting::Tf: return "tf";
    case Weighting::TfIdf: return "tfidf";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "attention") return Method::Attention;
  if (s == "chi") return Method::Chi;
  if (s == "ig") return Method::Ig;
  if (s == "df" || s == "dc") return Method::Df;
  if (s == "pd") return Method::Pd;
  config_error("unknown ranking method '" + std::string(s) + "'");
}

Weighting parse_weighting(std::string_view s) {
  if (s == "none" || s.empty()) return Weighting::None;
  if (s == "tf") return Weighting::Tf;
  if (s == "tfidf") return Weighting::TfIdf;
  config_error("unknown weighting '" + std::string(s) + "'");
}

std::string RankingTag::str() const {
  std::string out(to_string(method));
  if (weighting != Weighting::None) {
    out += '+';
    out += to_string(weighting);
  }
  return out;
}

RankingTag RankingTag::parse(std::string_view s) {
  const auto plus = s.find('+');
  if (plus == std::string_view::npos) return {parse_method(s), Weighting::None};
  return {parse_method(s.substr(0, plus)), parse_weighting(s.substr(plus + 1))};
}

TermRanking::TermRanking(RankingTag tag, std::vector<ScoredTerm> entries)
    : tag_(tag), entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (std::isnan(e.score)) data_error("ranking " + tag_.str() + ": NaN score for '" + e.term + "'");
  }
  std::sort(entries_.begin(), entries_.end(), [](const ScoredTerm& a, const ScoredTerm& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.term < b.term;
  });
  std::vector<std::string_view> names;
  names.reserve(entries_.size());
  for (const auto& e : entries_) names.push_back(e.term);
  std::sort(names.begin(), names.end());
  if (auto dup = std::adjacent_find(names.begin(), names.end()); dup != names.end()) {
    data_error("ranking " + tag_.str() + ": duplicate term '" + std::string(*dup) + "'");
  }
}

std::vector<std::string> TermRanking::top(std::size_t k) const {
  std::vector<std::string> out;
  const std::size_t n = std::min(k, entries_.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(entries_[i].term);
  return out;
}

std::set<std::string> TermRanking::top_set(std::size_t k) const {
  auto t = top(k);
  return {t.begin(), t.end()};
}

std::optional<std::size_t> TermRanking::rank_of(std::string_view term) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].term == term) return i + 1;
  }
  return std::nullopt;
}

void write_ranking(std::ostream& out, const TermRanking& ranking) {
  out << "rank\tterm\tscore\tmethod\n";
  const std::string tag = ranking.tag().str();
  std::size_t rank = 0;
  for (const auto& e : ranking.entries()) {
    out << ++rank << '\t' << e.term << '\t' << format_score(e.score) << '\t' << tag << '\n';
  }
}

TermRanking read_ranking(std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::optional<RankingTag> tag;
  std::vector<ScoredTerm> entries;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "rank\tterm\tscore\tmethod") data_error(origin + ": missing ranking header");
      header = true;
      continue;
    }
    std::istringstream fields(line);
    std::string rank, term, score, method;
    if (!std::getline(fields, rank, '\t') || !std::getline(fields, term, '\t') ||
        !std::getline(fields, score, '\t') || !std::getline(fields, method, '\t')) {
      data_error(origin + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    const RankingTag t = RankingTag::parse(method);
    if (tag && *tag != t) data_error(origin + ":" + std::to_string(lineno) + ": mixed ranking methods");
    tag = t;
    try {
      entries.push_back({term, std::stod(score)});
    } catch (const std::exception&) {
      data_error(origin + ":" + std::to_string(lineno) + ": bad score '" + score + "'");
    }
  }
  if (!header) data_error(origin + ": missing ranking header");
  return TermRanking(tag.value_or(RankingTag{}), std::move(entries));
}

}  // namespace attnsel::featsel
