#include "confusio/textsim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "confusio/error.hpp"

namespace confusio {

namespace {

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Decodes one code point at `pos`; malformed bytes decode as U+FFFD and
// consume one byte.
char32_t decode_utf8(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  std::size_t len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || pos + len > s.size()) {
    ++pos;
    return 0xFFFD;
  }
  char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
  if (cp == 0xFFFD) return false;
  if (cp >= 0x80 && cp <= 0xBF) return false;          // Latin-1 punctuation and symbols
  if (cp == 0xD7 || cp == 0xF7) return false;          // multiplication, division
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;      // punctuation, symbols, arrows
  if (cp >= 0x3000 && cp <= 0x303F) return false;      // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return static_cast<char32_t>(std::tolower(static_cast<int>(cp)));
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x100 && cp <= 0x17F && cp != 0x130 && cp != 0x138 && cp != 0x149 && cp != 0x17F) {
    // Latin Extended-A alternates upper/lower, with a parity shift at U+0139.
    const bool shifted = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
    const bool upper = shifted ? (cp % 2 == 1) : (cp % 2 == 0);
    return upper ? cp + 1 : cp;
  }
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;  // Greek
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;                 // Cyrillic
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = decode_utf8(text, pos);
    if (is_word_char(cp)) {
      append_utf8(current, to_lower(cp));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    auto piece = text.substr(start, end - start);
    while (!piece.empty() && std::isspace(static_cast<unsigned char>(piece.front()))) piece.remove_prefix(1);
    while (!piece.empty() && std::isspace(static_cast<unsigned char>(piece.back()))) piece.remove_suffix(1);
    if (!piece.empty()) out.emplace_back(piece);
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      emit(i + 1);
      start = i + 1;
    }
  }
  emit(text.size());
  return out;
}

SparseVector::SparseVector(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  for (const auto& [i, w] : entries) {
    if (!std::isfinite(w)) throw ValidationError("sparse vector weight is not finite");
    if (!entries_.empty() && entries_.back().first == i)
      entries_.back().second += w;
    else
      entries_.emplace_back(i, w);
  }
  std::erase_if(entries_, [](const Entry& e) { return e.second == 0.0; });
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& [_, w] : entries_) s += w * w;
  return std::sqrt(s);
}

double SparseVector::dot(const SparseVector& other) const {
  double s = 0.0;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() && b != other.entries_.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      s += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return s;
}

SparseVector SparseVector::scaled(double factor) const {
  std::vector<Entry> e = entries_;
  for (auto& [_, w] : e) w *= factor;
  return SparseVector(std::move(e));
}

std::size_t Vocabulary::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  return it == index_.end() ? size() : it->second;
}

double Vocabulary::idf(std::size_t index) const {
  return std::log((1.0 + static_cast<double>(document_count_)) /
                  (1.0 + static_cast<double>(df_.at(index)))) +
         1.0;
}

void Vocabulary::write_tsv(std::ostream& out) const {
  for (std::size_t i = 0; i < terms_.size(); ++i) out << terms_[i] << '\t' << df_[i] << '\n';
}

namespace {

SparseVector weigh(const Vocabulary& vocab, const Tokens& sentence) {
  std::vector<SparseVector::Entry> counts;
  for (const auto& t : sentence) {
    const auto i = vocab.index_of(t);
    if (i < vocab.size()) counts.emplace_back(i, 1.0);
  }
  SparseVector tf(std::move(counts));
  std::vector<SparseVector::Entry> weighted;
  for (const auto& [i, c] : tf.entries()) weighted.emplace_back(i, c * vocab.idf(i));
  SparseVector v(std::move(weighted));
  const double n = v.norm();
  return n > 0.0 ? v.scaled(1.0 / n) : v;
}

}  // namespace

std::pair<Vocabulary, std::vector<SparseVector>> fit_tfidf(std::span<const Tokens> sentences) {
  if (sentences.empty()) throw ValidationError("fit_tfidf: empty corpus");
  Vocabulary vocab;
  vocab.document_count_ = sentences.size();
  bool any = false;
  for (const auto& s : sentences) {
    std::vector<std::size_t> seen;
    for (const auto& t : s) {
      any = true;
      auto [it, inserted] = vocab.index_.try_emplace(t, vocab.terms_.size());
      if (inserted) {
        vocab.terms_.push_back(t);
        vocab.df_.push_back(0);
      }
      seen.push_back(it->second);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto i : seen) ++vocab.df_[i];
  }
  if (!any) throw ValidationError("fit_tfidf: every sentence is empty");
  std::vector<SparseVector> vectors;
  vectors.reserve(sentences.size());
  for (const auto& s : sentences) vectors.push_back(weigh(vocab, s));
  return {std::move(vocab), std::move(vectors)};
}

SparseVector transform(const Vocabulary& vocab, const Tokens& sentence) {
  return weigh(vocab, sentence);
}

double cosine(const SparseVector& u, const SparseVector& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return u.dot(v) / (nu * nv);
}

std::vector<ScoredIndex> top_k_similar(const SparseVector& query,
                                       std::span<const SparseVector> corpus, std::size_t k) {
  if (k == 0) throw ValidationError("top_k_similar: k must be at least 1");
  std::vector<ScoredIndex> scored;
  scored.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) scored.push_back({i, cosine(query, corpus[i])});
  const std::size_t n = std::min(k, scored.size());
  auto better = [](const ScoredIndex& a, const ScoredIndex& b) {
    return a.score != b.score ? a.score > b.score : a.index < b.index;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    better);
  scored.resize(n);
  return scored;
}

}  // namespace confusio
