#include <sbt/features.hpp>

#include <sbt/error.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <map>
#include <unordered_set>

#include <fmt/format.h>

namespace sbt::features {

namespace {

bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

std::string_view to_string(NgramRange r) {
  return r == NgramRange::Unigram ? "unigram" : "unigram_bigram";
}

std::vector<std::string> tokenize(std::string_view text, NgramRange range) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2) tokens.push_back(current);
    current.clear();
  };
  for (char c : text) {
    if (is_token_char(c))
      current.push_back(ascii_lower(c));
    else
      flush();
  }
  flush();

  if (range == NgramRange::UnigramBigram && tokens.size() >= 2) {
    const std::size_t n = tokens.size();
    tokens.reserve(2 * n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) tokens.push_back(tokens[i] + ' ' + tokens[i + 1]);
  }
  return tokens;
}

Vocabulary::Vocabulary(NgramRange range, std::vector<std::string> tokens,
                       std::vector<std::size_t> document_frequency, std::size_t n_documents)
    : range_(range), tokens_(std::move(tokens)), df_(std::move(document_frequency)), n_documents_(n_documents) {
  if (tokens_.size() != df_.size())
    throw Error(ErrorCode::LengthMismatch, "vocabulary tokens and document frequencies differ in length");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (df_[i] < 1 || df_[i] > n_documents_)
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("document frequency {} of '{}' outside [1, {}]", df_[i], tokens_[i], n_documents_));
    if (!index_.emplace(tokens_[i], i).second)
      throw Error(ErrorCode::InvalidArgument, fmt::format("duplicate vocabulary token '{}'", tokens_[i]));
  }
}

std::optional<std::size_t> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TfidfTransform fit_tfidf(std::span<const std::string> docs, NgramRange range) {
  if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot fit TF-IDF on zero documents");

  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    auto tokens = tokenize(doc, range);
    std::unordered_set<std::string> unique(tokens.begin(), tokens.end());
    for (auto& t : unique) ++df[t];
  }
  if (df.empty())
    throw Error(ErrorCode::NoTokens, fmt::format("none of the {} documents contains a token", docs.size()));

  std::vector<std::string> tokens;
  std::vector<std::size_t> freq;
  tokens.reserve(df.size());
  freq.reserve(df.size());
  for (auto& [token, count] : df) {
    tokens.push_back(token);
    freq.push_back(count);
  }

  TfidfTransform t;
  t.idf.resize(static_cast<Eigen::Index>(freq.size()));
  const double n = static_cast<double>(docs.size());
  for (std::size_t i = 0; i < freq.size(); ++i)
    t.idf[static_cast<Eigen::Index>(i)] = std::log((1.0 + n) / (1.0 + static_cast<double>(freq[i]))) + 1.0;
  t.vocabulary = Vocabulary(range, std::move(tokens), std::move(freq), docs.size());
  return t;
}

FeatureMatrix apply_tfidf(const TfidfTransform& transform, std::span<const std::string> docs) {
  const auto& vocab = transform.vocabulary;
  FeatureMatrix x = FeatureMatrix::Zero(static_cast<Eigen::Index>(docs.size()),
                                        static_cast<Eigen::Index>(vocab.size()));
  for (std::size_t r = 0; r < docs.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    for (const auto& token : tokenize(docs[r], vocab.ngram_range()))
      if (auto col = vocab.find(token)) x(row, static_cast<Eigen::Index>(*col)) += 1.0;
    x.row(row).array() *= transform.idf.transpose().array();
    const double norm = x.row(row).norm();
    if (norm > 0.0) x.row(row) /= norm;
  }
  return x;
}

SvdTransform fit_svd(const FeatureMatrix& x, std::size_t k) {
  if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorCode::InvalidArgument, "SVD of an empty matrix");
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "SVD needs k >= 1");
  const auto k_eff = static_cast<Eigen::Index>(
      std::min<std::size_t>({k, static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols())}));

  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  SvdTransform t;
  t.components = svd.matrixV().leftCols(k_eff);
  t.singular_values = svd.singularValues().head(k_eff);

  for (Eigen::Index c = 0; c < k_eff; ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < t.components.rows(); ++r) {
      const double mag = std::abs(t.components(r, c));
      if (mag > best) {
        best = mag;
        arg = r;
      }
    }
    if (t.components(arg, c) < 0.0) t.components.col(c) *= -1.0;
  }
  return t;
}

FeatureMatrix apply_svd(const SvdTransform& transform, const FeatureMatrix& x) {
  if (static_cast<std::size_t>(x.cols()) != transform.input_dim())
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("matrix has {} columns, SVD transform expects {}", x.cols(), transform.input_dim()));
  return x * transform.components;
}

}  // namespace sbt::features
