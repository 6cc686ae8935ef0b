#include <cmath>
#include <unordered_map>

#include "contcomm/topics.hpp"

namespace contcomm::topics {

namespace {

struct WindowCounts {
  std::vector<double> occ;               // per word
  std::vector<std::vector<double>> co;   // symmetric, diagonal = occ
  double windows = 0.0;
};

// Boolean document-window counting restricted to the words of interest.
// A document shorter than the window is a single window.
WindowCounts count_windows(const std::vector<std::string>& words, const std::vector<textprep::CleanDoc>& reference,
                           std::size_t window) {
  const std::size_t n = words.size();
  std::unordered_map<std::string_view, std::size_t> slot;
  for (std::size_t i = 0; i < n; ++i) slot.emplace(words[i], i);

  WindowCounts wc;
  wc.occ.assign(n, 0.0);
  wc.co.assign(n, std::vector<double>(n, 0.0));
  std::vector<int> inside(n, 0);

  auto tally = [&] {
    wc.windows += 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!inside[i]) continue;
      wc.occ[i] += 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (inside[j]) wc.co[i][j] += 1.0;
    }
  };

  for (const auto& doc : reference) {
    const auto& t = doc.tokens;
    if (t.empty()) continue;
    std::vector<long> ids(t.size(), -1);
    for (std::size_t p = 0; p < t.size(); ++p)
      if (auto it = slot.find(t[p]); it != slot.end()) ids[p] = static_cast<long>(it->second);
    std::fill(inside.begin(), inside.end(), 0);
    const std::size_t w = std::min(window, t.size());
    for (std::size_t p = 0; p < w; ++p)
      if (ids[p] >= 0) ++inside[static_cast<std::size_t>(ids[p])];
    tally();
    for (std::size_t p = w; p < t.size(); ++p) {
      if (ids[p - w] >= 0) --inside[static_cast<std::size_t>(ids[p - w])];
      if (ids[p] >= 0) ++inside[static_cast<std::size_t>(ids[p])];
      tally();
    }
  }
  return wc;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace

double coherence_cv(const std::vector<std::string>& words, const std::vector<textprep::CleanDoc>& reference,
                    const CoherenceOptions& opt) {
  if (words.size() < 2) throw Error(ErrorCode::InvalidArgument, "coherence needs at least two words");
  if (opt.window == 0) throw Error(ErrorCode::InvalidArgument, "window must be positive");
  const auto wc = count_windows(words, reference, opt.window);
  if (wc.windows == 0) throw Error(ErrorCode::EmptyCorpus, "reference corpus has no tokens");
  const std::size_t n = words.size();
  for (std::size_t i = 0; i < n; ++i)
    if (wc.occ[i] == 0) throw Error(ErrorCode::InsufficientReference, "'" + words[i] + "' never occurs in the reference");

  std::vector<std::vector<double>> npmi(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double pij = wc.co[i][j] / wc.windows + opt.epsilon;
      const double pi = wc.occ[i] / wc.windows;
      const double pj = wc.occ[j] / wc.windows;
      npmi[i][j] = std::log(pij / (pi * pj)) / -std::log(pij);
    }
  }
  std::vector<double> whole(n, 0.0);
  for (const auto& row : npmi)
    for (std::size_t j = 0; j < n; ++j) whole[j] += row[j];

  double total = 0.0;
  for (const auto& row : npmi) total += cosine(row, whole);
  return total / static_cast<double>(n);
}

CoherenceReport coherence_cv(const TopicModel& model, const std::vector<textprep::CleanDoc>& reference,
                             const CoherenceOptions& opt) {
  CoherenceReport r;
  for (std::size_t j = 0; j < model.k(); ++j) {
    std::vector<std::string> words;
    for (auto& [w, _] : model.top_words(j, opt.top_n)) words.push_back(w);
    r.per_topic.push_back(coherence_cv(words, reference, opt));
    r.mean += r.per_topic.back();
  }
  if (!r.per_topic.empty()) r.mean /= static_cast<double>(r.per_topic.size());
  return r;
}

}  // namespace contcomm::topics
