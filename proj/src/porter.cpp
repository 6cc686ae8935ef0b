// Porter stemmer, following the frozen reference implementation published
// by Martin Porter (including his post-publication changes: the "bli" rule in
// step 2, "logi", and no stemming of words of length <= 2).

#include <array>
#include <functional>
#include <vector>

#include "contcomm/textprep.hpp"

namespace contcomm::textprep {

namespace {

bool is_vowel_letter(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::vector<bool> consonant_flags(std::string_view w) {
  std::vector<bool> flags(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (is_vowel_letter(w[i]))
      flags[i] = false;
    else if (w[i] == 'y')
      flags[i] = i == 0 ? true : !flags[i - 1];
    else
      flags[i] = true;
  }
  return flags;
}

bool is_consonant(std::string_view w, std::size_t i) { return consonant_flags(w.substr(0, i + 1))[i]; }

int measure(std::string_view stem) {
  auto f = consonant_flags(stem);
  int m = 0;
  for (std::size_t i = 1; i < f.size(); ++i)
    if (!f[i - 1] && f[i]) ++m;
  return m;
}

bool contains_vowel(std::string_view stem) {
  for (bool c : consonant_flags(stem))
    if (!c) return true;
  return false;
}

bool ends_double_consonant(std::string_view w) {
  return w.size() >= 2 && w[w.size() - 1] == w[w.size() - 2] && is_consonant(w, w.size() - 1);
}

// *o: stem ends consonant-vowel-consonant, final consonant not w, x or y.
bool ends_cvc(std::string_view w) {
  if (w.size() < 3) return false;
  auto f = consonant_flags(w);
  std::size_t n = w.size();
  char last = w[n - 1];
  return f[n - 3] && !f[n - 2] && f[n - 1] && last != 'w' && last != 'x' && last != 'y';
}

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

using Condition = std::function<bool(std::string_view)>;

struct Rule {
  std::string_view suffix;
  std::string_view replacement;
  Condition condition;  // empty = unconditional
};

// First rule whose suffix matches decides; a failed condition leaves the word.
std::string apply_rules(std::string word, const std::vector<Rule>& rules) {
  for (const auto& r : rules) {
    if (!ends_with(word, r.suffix)) continue;
    std::string_view stem(word.data(), word.size() - r.suffix.size());
    if (!r.condition || r.condition(stem)) return std::string(stem) + std::string(r.replacement);
    return word;
  }
  return word;
}

const Condition kPositiveMeasure = [](std::string_view s) { return measure(s) > 0; };
const Condition kMeasureAbove1 = [](std::string_view s) { return measure(s) > 1; };

std::string step1a(std::string w) {
  return apply_rules(std::move(w), {{"sses", "ss", {}}, {"ies", "i", {}}, {"ss", "ss", {}}, {"s", "", {}}});
}

std::string step1b(std::string w) {
  if (ends_with(w, "eed")) {
    std::string_view stem(w.data(), w.size() - 3);
    if (measure(stem) > 0) return std::string(stem) + "ee";
    return w;
  }
  std::string stem;
  bool stripped = false;
  for (std::string_view suffix : {std::string_view("ed"), std::string_view("ing")}) {
    if (ends_with(w, suffix)) {
      std::string_view candidate(w.data(), w.size() - suffix.size());
      if (contains_vowel(candidate)) {
        stem = std::string(candidate);
        stripped = true;
        break;
      }
    }
  }
  if (!stripped) return w;
  if (ends_with(stem, "at") || ends_with(stem, "bl") || ends_with(stem, "iz")) return stem + "e";
  if (ends_double_consonant(stem)) {
    char last = stem.back();
    if (last != 'l' && last != 's' && last != 'z') stem.pop_back();
    return stem;
  }
  if (measure(stem) == 1 && ends_cvc(stem)) return stem + "e";
  return stem;
}

std::string step1c(std::string w) {
  return apply_rules(std::move(w), {{"y", "i", [](std::string_view s) { return contains_vowel(s); }}});
}

std::string step2(std::string w) {
  static const std::vector<Rule> rules = {
      {"ational", "ate", kPositiveMeasure}, {"tional", "tion", kPositiveMeasure}, {"enci", "ence", kPositiveMeasure},
      {"anci", "ance", kPositiveMeasure},   {"izer", "ize", kPositiveMeasure},    {"bli", "ble", kPositiveMeasure},
      {"alli", "al", kPositiveMeasure},     {"entli", "ent", kPositiveMeasure},   {"eli", "e", kPositiveMeasure},
      {"ousli", "ous", kPositiveMeasure},   {"ization", "ize", kPositiveMeasure}, {"ation", "ate", kPositiveMeasure},
      {"ator", "ate", kPositiveMeasure},    {"alism", "al", kPositiveMeasure},    {"iveness", "ive", kPositiveMeasure},
      {"fulness", "ful", kPositiveMeasure}, {"ousness", "ous", kPositiveMeasure}, {"aliti", "al", kPositiveMeasure},
      {"iviti", "ive", kPositiveMeasure},   {"biliti", "ble", kPositiveMeasure},  {"logi", "log", kPositiveMeasure},
  };
  return apply_rules(std::move(w), rules);
}

std::string step3(std::string w) {
  static const std::vector<Rule> rules = {
      {"icate", "ic", kPositiveMeasure}, {"ative", "", kPositiveMeasure}, {"alize", "al", kPositiveMeasure},
      {"iciti", "ic", kPositiveMeasure}, {"ical", "ic", kPositiveMeasure}, {"ful", "", kPositiveMeasure},
      {"ness", "", kPositiveMeasure},
  };
  return apply_rules(std::move(w), rules);
}

std::string step4(std::string w) {
  static const std::vector<Rule> rules = {
      {"al", "", kMeasureAbove1},   {"ance", "", kMeasureAbove1}, {"ence", "", kMeasureAbove1},
      {"er", "", kMeasureAbove1},   {"ic", "", kMeasureAbove1},   {"able", "", kMeasureAbove1},
      {"ible", "", kMeasureAbove1}, {"ant", "", kMeasureAbove1},  {"ement", "", kMeasureAbove1},
      {"ment", "", kMeasureAbove1}, {"ent", "", kMeasureAbove1},
      {"ion", "", [](std::string_view s) { return measure(s) > 1 && (s.back() == 's' || s.back() == 't'); }},
      {"ou", "", kMeasureAbove1},   {"ism", "", kMeasureAbove1},  {"ate", "", kMeasureAbove1},
      {"iti", "", kMeasureAbove1},  {"ous", "", kMeasureAbove1},  {"ive", "", kMeasureAbove1},
      {"ize", "", kMeasureAbove1},
  };
  return apply_rules(std::move(w), rules);
}

std::string step5a(std::string w) {
  if (!ends_with(w, "e")) return w;
  std::string_view stem(w.data(), w.size() - 1);
  int m = measure(stem);
  if (m > 1 || (m == 1 && !ends_cvc(stem))) return std::string(stem);
  return w;
}

std::string step5b(std::string w) {
  if (ends_with(w, "ll") && measure(w) > 1) w.pop_back();
  return w;
}

}  // namespace

std::string porter_stem(std::string_view word) {
  std::string w(word);
  if (w.size() <= 2) return w;
  w = step1a(std::move(w));
  w = step1b(std::move(w));
  w = step1c(std::move(w));
  w = step2(std::move(w));
  w = step3(std::move(w));
  w = step4(std::move(w));
  w = step5a(std::move(w));
  w = step5b(std::move(w));
  return w;
}

std::string stem_to_fixpoint(std::string_view word) {
  std::string cur(word);
  for (int i = 0; i < 8; ++i) {
    std::string next = porter_stem(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

}  // namespace contcomm::textprep
