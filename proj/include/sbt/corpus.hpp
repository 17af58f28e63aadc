#pragma once

// Article ingestion and the four per-field feature datasets.

#include <sbt/date.hpp>
#include <sbt/sentiment.hpp>

#include <array>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sbt::corpus {

struct ArticleRecord {
  std::string company_id;
  std::string ticker;
  std::string title;
  std::string description;
  std::string content;
  std::string author;
  Date published_at;
  std::string source;

  friend bool operator==(const ArticleRecord&, const ArticleRecord&) = default;
};

struct DatasetRow {
  std::string sample_id;
  std::string company_id;
  Date published_at;
  std::string text;
  std::optional<SentimentClass> label;

  friend bool operator==(const DatasetRow&, const DatasetRow&) = default;
};

struct FeatureDataset {
  Variant variant = Variant::Title;
  std::vector<DatasetRow> rows;
};

using DatasetSet = std::array<FeatureDataset, 4>;  // indexed by index_of(Variant)

struct Query {
  std::string company_id;
  std::string ticker;
  std::string query_string;
};

// Reads the article CSV. Required columns: company_id, ticker, title,
// description, content, published_at; author and source are optional.
// Text fields are re-encoded as well-formed UTF-8.
std::vector<ArticleRecord> ingest_articles(std::istream& csv_stream);

// Writes the full article CSV header and one row per record.
void write_articles(std::ostream& out, const std::vector<ArticleRecord>& records);

// Keeps the first record for each (company_id, title, published_at).
std::vector<ArticleRecord> deduplicate(const std::vector<ArticleRecord>& records);

// Stable sample identifier derived from the deduplication key.
std::string sample_id_for(const ArticleRecord& record);

// Field text for one variant. Combination joins the non-empty fields of
// title, description and content with single spaces.
std::string field_text(const ArticleRecord& record, Variant variant);

DatasetSet build_datasets(const std::vector<ArticleRecord>& records);

void write_dataset(std::ostream& out, const FeatureDataset& dataset);
FeatureDataset read_dataset(std::istream& in, Variant variant);

// `"<company_name>" OR <ticker>`, or just the quoted name when ticker is empty.
// company_id is the ticker when present, the name otherwise.
Query build_query(const std::string& company_name, const std::string& ticker);

struct FetchRequest {
  std::string query;
  Date from;
  Date to;
  int page = 1;
  int page_size = 100;
};

// Returns the raw response body; signals failure by throwing. Implementations
// must be safe to call concurrently if fetch_articles is.
using Transport = std::function<std::string(const FetchRequest&)>;

inline constexpr int kMaxRetries = 3;

// One request per day in [from, to], paging while a page comes back full.
// Each request is attempted at most 1 + kMaxRetries times.
std::vector<ArticleRecord> fetch_articles(const Query& query, Date from, Date to,
                                          const Transport& transport, int page_size = 100);

// Parses one response body: {"articles": [{title, description, content,
// author, publishedAt, source?}, ...]}.
std::vector<ArticleRecord> parse_fetch_payload(const std::string& body, const Query& query);

}  // namespace sbt::corpus
