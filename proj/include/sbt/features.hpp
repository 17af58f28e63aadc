#pragma once

// Text vectorization: n-gram tokens, TF-IDF weighting and truncated SVD.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sbt::features {

// Dense design matrix, one row per document. Entries are always finite.
using FeatureMatrix = Eigen::MatrixXd;

enum class NgramRange { Unigram, UnigramBigram };

std::string_view to_string(NgramRange r);

// Lowercased maximal runs of ASCII letters/digits of length >= 2, in text
// order, followed (for UnigramBigram) by each adjacent unigram pair joined by
// one space. Any other byte, including non-ASCII, separates tokens.
std::vector<std::string> tokenize(std::string_view text, NgramRange range);

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(NgramRange range, std::vector<std::string> tokens,
             std::vector<std::size_t> document_frequency, std::size_t n_documents);

  NgramRange ngram_range() const { return range_; }
  std::size_t size() const { return tokens_.size(); }
  std::size_t n_documents() const { return n_documents_; }
  // Column order (lexicographic).
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::size_t>& document_frequency() const { return df_; }
  std::optional<std::size_t> find(const std::string& token) const;

 private:
  NgramRange range_ = NgramRange::Unigram;
  std::vector<std::string> tokens_;
  std::vector<std::size_t> df_;
  std::size_t n_documents_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TfidfTransform {
  Vocabulary vocabulary;
  Eigen::VectorXd idf;  // ln((1 + N) / (1 + df)) + 1, per column
};

// Throws EmptyCorpus for no documents and NoTokens when no document yields a
// token.
TfidfTransform fit_tfidf(std::span<const std::string> docs, NgramRange range);

// Raw counts times idf, then each row scaled to unit L2 norm. Rows without
// known tokens stay zero.
FeatureMatrix apply_tfidf(const TfidfTransform& transform, std::span<const std::string> docs);

struct SvdTransform {
  Eigen::MatrixXd components;       // input_dim x output_dim, orthonormal columns
  Eigen::VectorXd singular_values;  // nonincreasing

  std::size_t input_dim() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(components.cols()); }
};

inline constexpr std::size_t kDefaultSvdDims = 100;

// Top right singular vectors of X, keeping min(k, rows, cols) of them. Each
// component is signed so that its largest-magnitude entry (first one on
// ties) is nonnegative.
SvdTransform fit_svd(const FeatureMatrix& x, std::size_t k = kDefaultSvdDims);

// X * components. Throws DimensionMismatch when X has the wrong width.
FeatureMatrix apply_svd(const SvdTransform& transform, const FeatureMatrix& x);

}  // namespace sbt::features
