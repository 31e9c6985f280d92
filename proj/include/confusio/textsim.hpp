#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace confusio {

using Tokens = std::vector<std::string>;

// Lowercased word tokens. A token is a maximal run of letters or digits;
// everything else separates. Non-ASCII UTF-8 sequences are kept as letters,
// with Latin-1 supplement and Latin Extended-A capitals lowercased.
Tokens tokenize(std::string_view text);

// Splits on '.', '!' or '?' followed by whitespace (or end of text).
std::vector<std::string> split_sentences(std::string_view text);

// Sorted (index, weight) pairs; indices strictly increasing, no zero weights.
class SparseVector {
 public:
  using Entry = std::pair<std::size_t, double>;

  SparseVector() = default;
  // Sorts, merges duplicate indices and drops zeros.
  explicit SparseVector(std::vector<Entry> entries);

  std::span<const Entry> entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  double norm() const;
  double dot(const SparseVector& other) const;
  SparseVector scaled(double factor) const;

  bool operator==(const SparseVector&) const = default;

 private:
  std::vector<Entry> entries_;
};

class Vocabulary {
 public:
  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t document_count() const noexcept { return document_count_; }
  // Index of `term`, or size() when unknown.
  std::size_t index_of(std::string_view term) const;
  const std::string& term(std::size_t index) const { return terms_.at(index); }
  std::size_t document_frequency(std::size_t index) const { return df_.at(index); }
  // Smoothed idf: ln((1 + N) / (1 + df)) + 1.
  double idf(std::size_t index) const;

  // One `term<TAB>df` line per term, in index order.
  void write_tsv(std::ostream& out) const;

 private:
  friend std::pair<Vocabulary, std::vector<SparseVector>> fit_tfidf(
      std::span<const Tokens> sentences);

  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t document_count_ = 0;
};

// weight(t, d) = tf(t, d) * idf(t), then L2-normalised per sentence.
// Terms are indexed in order of first appearance.
std::pair<Vocabulary, std::vector<SparseVector>> fit_tfidf(std::span<const Tokens> sentences);

// Unknown terms are ignored; the result is L2-normalised unless all-zero.
SparseVector transform(const Vocabulary& vocab, const Tokens& sentence);

// dot(u, v) / (|u| |v|); 0 when either norm is 0.
double cosine(const SparseVector& u, const SparseVector& v);

struct ScoredIndex {
  std::size_t index;
  double score;
};

// Highest cosine first; ties go to the lower corpus index.
std::vector<ScoredIndex> top_k_similar(const SparseVector& query,
                                       std::span<const SparseVector> corpus, std::size_t k);

}  // namespace confusio
