#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "contcomm/textprep.hpp"

namespace contcomm::textprep {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool starts_with_at(std::string_view s, std::size_t i, std::string_view prefix) {
  if (i + prefix.size() > s.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k)
    if (std::tolower(static_cast<unsigned char>(s[i + k])) != prefix[k]) return false;
  return true;
}

// Removes @mentions and http(s) links, blanks out punctuation and digits.
std::string scrub(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  auto skip_word = [&] {
    while (i < text.size() && !is_space(text[i])) ++i;
    out.push_back(' ');
  };
  while (i < text.size()) {
    auto c = static_cast<unsigned char>(text[i]);
    bool at_word_start = i == 0 || is_space(text[i - 1]);
    if (c == '@' && at_word_start) {
      skip_word();
    } else if (starts_with_at(text, i, "http://") || starts_with_at(text, i, "https://")) {
      skip_word();
    } else if (c < 0x80) {
      if (std::ispunct(c) || std::isdigit(c) || std::iscntrl(c))
        out.push_back(' ');
      else
        out.push_back(static_cast<char>(std::tolower(c)));
      ++i;
    } else {
      // UTF-8: drop the General Punctuation block (U+2000..U+206F) and every
      // 4-byte sequence (emoji); keep other letters intact.
      std::size_t len = c >= 0xF0 ? 4 : c >= 0xE0 ? 3 : c >= 0xC0 ? 2 : 1;
      len = std::min(len, text.size() - i);
      bool general_punct = len == 3 && c == 0xE2 && (static_cast<unsigned char>(text[i + 1]) & 0xFE) == 0x80;
      bool latin1_punct = len == 2 && c == 0xC2;  // U+0080..U+00BF: NBSP, quotes, symbols
      if (len == 4 || len == 1 || general_punct || latin1_punct)
        out.push_back(' ');
      else
        out.append(text.substr(i, len));
      i += len;
    }
  }
  return out;
}

std::size_t codepoints(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

}  // namespace

std::vector<std::string> preprocess(std::string_view text, const StopWords& stop) {
  const std::string cleaned = scrub(text);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && is_space(cleaned[i])) ++i;
    std::size_t j = i;
    while (j < cleaned.size() && !is_space(cleaned[j])) ++j;
    if (j > i) {
      std::string_view tok(cleaned.data() + i, j - i);
      if (codepoints(tok) >= 3 && !stop.contains(tok)) {
        std::string stem = is_ascii(tok) ? stem_to_fixpoint(tok) : std::string(tok);
        if (codepoints(stem) >= 3 && !stop.contains(stem)) tokens.push_back(std::move(stem));
      }
    }
    i = j;
  }
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<int> df, std::size_t num_docs)
    : terms_(std::move(terms)), df_(std::move(df)), num_docs_(num_docs) {
  if (terms_.size() != df_.size()) throw Error(ErrorCode::InvalidArgument, "terms/df size mismatch");
  idf_.resize(terms_.size());
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    idf_[i] = 1.0 + std::log((1.0 + static_cast<double>(num_docs_)) / (1.0 + static_cast<double>(df_[i])));
    index_.emplace(terms_[i], static_cast<int>(i));
  }
}

int Vocabulary::index(std::string_view term) const {
  auto it = index_.find(std::string(term));
  return it == index_.end() ? -1 : it->second;
}

namespace {

SparseVector weigh(const std::map<int, int>& counts, const Vocabulary& vocab) {
  SparseVector v(static_cast<Eigen::Index>(vocab.size()));
  v.reserve(static_cast<Eigen::Index>(counts.size()));
  double sq = 0.0;
  for (const auto& [idx, tf] : counts) {
    double w = tf * vocab.idf(static_cast<std::size_t>(idx));
    sq += w * w;
    v.insert(idx) = w;
  }
  if (sq > 0.0) v /= std::sqrt(sq);
  return v;
}

std::map<int, int> count_known(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::map<int, int> counts;
  for (const auto& t : tokens) {
    int idx = vocab.index(t);
    if (idx >= 0) ++counts[idx];
  }
  return counts;
}

}  // namespace

std::pair<Vocabulary, DocTermMatrix> build_matrix(const std::vector<CleanDoc>& docs, MatrixOptions options) {
  if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "build_matrix needs at least one document");
  std::map<std::string, std::pair<int, long>> stats;  // term -> (df, total count)
  for (const auto& d : docs) {
    std::map<std::string_view, int> seen;
    for (const auto& t : d.tokens) ++seen[t];
    for (const auto& [t, c] : seen) {
      auto& s = stats[std::string(t)];
      s.first += 1;
      s.second += c;
    }
  }
  std::vector<std::string> terms;
  terms.reserve(stats.size());
  for (const auto& [t, s] : stats) terms.push_back(t);
  if (options.max_features > 0 && terms.size() > options.max_features) {
    std::stable_sort(terms.begin(), terms.end(),
                     [&](const std::string& a, const std::string& b) { return stats[a].second > stats[b].second; });
    terms.resize(options.max_features);
    std::sort(terms.begin(), terms.end());
  }
  std::vector<int> df;
  df.reserve(terms.size());
  for (const auto& t : terms) df.push_back(stats[t].first);
  Vocabulary vocab(std::move(terms), std::move(df), docs.size());

  DocTermMatrix m;
  m.weights.resize(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(vocab.size()));
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < docs.size(); ++r) {
    m.doc_ids.push_back(docs[r].doc_id);
    SparseVector row = weigh(count_known(docs[r].tokens, vocab), vocab);
    for (SparseVector::InnerIterator it(row); it; ++it)
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.index()), it.value());
  }
  m.weights.setFromTriplets(triplets.begin(), triplets.end());
  return {std::move(vocab), std::move(m)};
}

SparseVector vectorize(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  return weigh(count_known(tokens, vocab), vocab);
}

SparseVector vectorize(const CleanDoc& doc, const Vocabulary& vocab) { return vectorize(doc.tokens, vocab); }

double cosine(const SparseVector& a, const SparseVector& b) {
  double na = a.norm();
  double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

void dump_matrix(std::ostream& out, const Vocabulary& vocab, const DocTermMatrix& m) {
  for (Eigen::Index r = 0; r < m.weights.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m.weights, r); it; ++it)
      out << m.doc_ids[static_cast<std::size_t>(r)] << '\t' << vocab.term(static_cast<std::size_t>(it.col())) << '\t'
          << it.value() << '\n';
}

}  // namespace contcomm::textprep
