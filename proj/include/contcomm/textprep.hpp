#pragma once

#include <Eigen/SparseCore>

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "contcomm/common.hpp"

namespace contcomm::textprep {

/// Martin Porter's reference stemmer. Input must be lowercase ASCII; other
/// bytes pass through untouched.
std::string porter_stem(std::string_view word);

/// Applies porter_stem until the word stops changing.
std::string stem_to_fixpoint(std::string_view word);

class StopWords {
 public:
  StopWords() = default;
  explicit StopWords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  /// The compiled-in English list (identical to data/stopwords_en.txt).
  static const StopWords& english();
  /// One word per line; blank lines and lines starting with '#' ignored.
  static StopWords load(const std::filesystem::path& path);

  bool contains(std::string_view w) const { return words_.count(std::string(w)) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

struct CleanDoc {
  std::string doc_id;
  std::vector<std::string> tokens;

  friend bool operator==(const CleanDoc&, const CleanDoc&) = default;
};

/// Strips mentions, links, punctuation, digits and extra whitespace,
/// lowercases, tokenises, drops stop words and tokens shorter than 3 bytes,
/// then stems.
std::vector<std::string> preprocess(std::string_view text, const StopWords& stop = StopWords::english());

inline CleanDoc make_clean_doc(std::string doc_id, std::string_view text,
                               const StopWords& stop = StopWords::english()) {
  return {std::move(doc_id), preprocess(text, stop)};
}

/// Sparse row vectors of TF-IDF weights.
using SparseVector = Eigen::SparseVector<double>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> terms, std::vector<int> df, std::size_t num_docs);

  std::size_t size() const { return terms_.size(); }
  std::size_t num_docs() const { return num_docs_; }
  const std::string& term(std::size_t i) const { return terms_.at(i); }
  const std::vector<std::string>& terms() const { return terms_; }
  int df(std::size_t i) const { return df_.at(i); }
  /// Smoothed idf: 1 + ln((1 + N) / (1 + df)).
  double idf(std::size_t i) const { return idf_.at(i); }
  const std::vector<double>& idf() const { return idf_; }
  /// -1 when absent.
  int index(std::string_view term) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.terms_ == b.terms_ && a.df_ == b.df_ && a.num_docs_ == b.num_docs_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<int> df_;
  std::vector<double> idf_;
  std::size_t num_docs_ = 0;
  std::unordered_map<std::string, int> index_;
};

struct DocTermMatrix {
  std::vector<std::string> doc_ids;
  SparseMatrix weights;  // rows = docs, cols = vocabulary
};

struct MatrixOptions {
  /// Keep only the most frequent terms (corpus term count, ties broken
  /// alphabetically); 0 keeps all.
  std::size_t max_features = 0;
};

/// Fits the vocabulary and returns L2-normalised TF-IDF rows. Terms are
/// indexed in sorted order. Throws EmptyCorpus.
std::pair<Vocabulary, DocTermMatrix> build_matrix(const std::vector<CleanDoc>& docs, MatrixOptions options = {});

/// Projects a document onto a frozen vocabulary; OOV terms are ignored.
SparseVector vectorize(const CleanDoc& doc, const Vocabulary& vocab);
SparseVector vectorize(const std::vector<std::string>& tokens, const Vocabulary& vocab);

double cosine(const SparseVector& a, const SparseVector& b);

/// `doc_id<TAB>term<TAB>weight` triplets, one per nonzero.
void dump_matrix(std::ostream& out, const Vocabulary& vocab, const DocTermMatrix& m);

}  // namespace contcomm::textprep
