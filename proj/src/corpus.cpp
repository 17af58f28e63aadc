#include <sbt/corpus.hpp>

#include <sbt/csv.hpp>
#include <sbt/error.hpp>
#include <sbt/text.hpp>

#include <array>
#include <cstdint>
#include <string_view>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

namespace sbt::corpus {

namespace {

constexpr std::array<std::string_view, 6> kRequiredArticleColumns{
    "company_id", "ticker", "title", "description", "content", "published_at"};

std::string dedup_key(const ArticleRecord& r) {
  std::string key = r.company_id;
  key.push_back('\x1f');
  key += r.title;
  key.push_back('\x1f');
  key += r.published_at.to_string();
  return key;
}

std::string get_field(const csv::Row& row, std::optional<std::size_t> pos) {
  if (!pos || *pos >= row.size()) return {};
  return sanitize_utf8(row[*pos]);
}

std::string json_string(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string())
    throw Error(ErrorCode::ParseError, fmt::format("field '{}' is not a string", key));
  return sanitize_utf8(it->get<std::string>());
}

}  // namespace

std::vector<ArticleRecord> ingest_articles(std::istream& csv_stream) {
  csv::Reader reader(csv_stream);
  csv::Row row;
  std::vector<ArticleRecord> records;
  if (!reader.next(row))
    throw Error(ErrorCode::MissingColumn, "article CSV is empty (no header row)");
  const csv::Header header(row);
  header.require(kRequiredArticleColumns, "article CSV");

  const auto company = header.find("company_id");
  const auto ticker = header.find("ticker");
  const auto title = header.find("title");
  const auto description = header.find("description");
  const auto content = header.find("content");
  const auto author = header.find("author");
  const auto published = header.find("published_at");
  const auto source = header.find("source");

  std::size_t data_row = 0;
  while (reader.next(row)) {
    ++data_row;
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    ArticleRecord r;
    r.company_id = get_field(row, company);
    r.ticker = get_field(row, ticker);
    r.title = get_field(row, title);
    r.description = get_field(row, description);
    r.content = get_field(row, content);
    r.author = get_field(row, author);
    r.source = get_field(row, source);
    const std::string date_text = get_field(row, published);
    auto date = Date::parse(date_text);
    if (!date)
      throw Error(ErrorCode::BadDate, fmt::format("data row {} (line {}): unparseable published_at '{}'",
                                                  data_row, reader.line(), date_text));
    r.published_at = *date;
    records.push_back(std::move(r));
  }
  return records;
}

void write_articles(std::ostream& out, const std::vector<ArticleRecord>& records) {
  csv::write_row(out, {"company_id", "ticker", "title", "description", "content", "author",
                       "published_at", "source"});
  for (const auto& r : records) {
    const std::string date = r.published_at.to_string();
    csv::write_row(out, {r.company_id, r.ticker, r.title, r.description, r.content, r.author,
                         date, r.source});
  }
}

std::vector<ArticleRecord> deduplicate(const std::vector<ArticleRecord>& records) {
  std::unordered_set<std::string> seen;
  std::vector<ArticleRecord> out;
  for (const auto& r : records)
    if (seen.insert(dedup_key(r)).second) out.push_back(r);
  return out;
}

std::string sample_id_for(const ArticleRecord& record) {
  // 64-bit FNV-1a over the dedup key.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dedup_key(record)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("a{:016x}", h);
}

std::string field_text(const ArticleRecord& record, Variant variant) {
  switch (variant) {
    case Variant::Title: return record.title;
    case Variant::Description: return record.description;
    case Variant::Content: return record.content;
    case Variant::Combination: {
      std::string out;
      for (const std::string* part : {&record.title, &record.description, &record.content}) {
        if (part->empty()) continue;
        if (!out.empty()) out.push_back(' ');
        out += *part;
      }
      return out;
    }
  }
  return {};
}

DatasetSet build_datasets(const std::vector<ArticleRecord>& records) {
  DatasetSet sets;
  for (auto v : kAllVariants) sets[index_of(v)].variant = v;

  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    std::string id = sample_id_for(r);
    if (!ids.insert(id).second)
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("duplicate article key for company '{}' title '{}' on {}; deduplicate first",
                              r.company_id, r.title, r.published_at.to_string()));
    for (auto v : kAllVariants)
      sets[index_of(v)].rows.push_back({id, r.company_id, r.published_at, field_text(r, v), std::nullopt});
  }
  return sets;
}

void write_dataset(std::ostream& out, const FeatureDataset& dataset) {
  csv::write_row(out, {"sample_id", "company_id", "published_at", "text", "label"});
  for (const auto& row : dataset.rows) {
    const std::string date = row.published_at.to_string();
    const std::string_view label = row.label ? to_string(*row.label) : std::string_view{};
    csv::write_row(out, {row.sample_id, row.company_id, date, row.text, label});
  }
}

FeatureDataset read_dataset(std::istream& in, Variant variant) {
  static constexpr std::array<std::string_view, 4> kColumns{"sample_id", "company_id",
                                                            "published_at", "text"};
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) throw Error(ErrorCode::MissingColumn, "dataset CSV is empty");
  const csv::Header header(row);
  header.require(kColumns, "dataset CSV");
  const auto label_col = header.find("label");

  FeatureDataset ds{variant, {}};
  std::unordered_set<std::string> ids;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    DatasetRow r;
    r.sample_id = get_field(row, header.find("sample_id"));
    r.company_id = get_field(row, header.find("company_id"));
    r.text = get_field(row, header.find("text"));
    const std::string date_text = get_field(row, header.find("published_at"));
    auto date = Date::parse(date_text);
    if (!date)
      throw Error(ErrorCode::BadDate, fmt::format("dataset line {}: bad date '{}'", reader.line(), date_text));
    r.published_at = *date;
    if (label_col) {
      const std::string label = get_field(row, label_col);
      if (!label.empty()) {
        r.label = parse_sentiment(label);
        if (!r.label)
          throw Error(ErrorCode::ParseError, fmt::format("dataset line {}: bad label '{}'", reader.line(), label));
      }
    }
    if (!ids.insert(r.sample_id).second)
      throw Error(ErrorCode::ParseError, fmt::format("dataset line {}: duplicate sample_id '{}'",
                                                     reader.line(), r.sample_id));
    ds.rows.push_back(std::move(r));
  }
  return ds;
}

Query build_query(const std::string& company_name, const std::string& ticker) {
  if (company_name.empty()) throw Error(ErrorCode::EmptyName, "company name is empty");
  Query q;
  q.company_id = ticker.empty() ? company_name : ticker;
  q.ticker = ticker;
  q.query_string = "\"" + company_name + "\"";
  if (!ticker.empty()) q.query_string += " OR " + ticker;
  return q;
}

std::vector<ArticleRecord> parse_fetch_payload(const std::string& body, const Query& query) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, fmt::format("response is not JSON: {}", e.what()));
  }
  if (!doc.is_object() || !doc.contains("articles") || !doc["articles"].is_array())
    throw Error(ErrorCode::ParseError, "response lacks an 'articles' array");

  std::vector<ArticleRecord> out;
  for (const auto& a : doc["articles"]) {
    if (!a.is_object()) throw Error(ErrorCode::ParseError, "article entry is not an object");
    ArticleRecord r;
    r.company_id = query.company_id;
    r.ticker = query.ticker;
    r.title = json_string(a, "title");
    r.description = json_string(a, "description");
    r.content = json_string(a, "content");
    r.author = json_string(a, "author");
    const std::string published = json_string(a, "publishedAt");
    auto date = Date::parse(published);
    if (!date) throw Error(ErrorCode::ParseError, fmt::format("bad publishedAt '{}'", published));
    r.published_at = *date;
    if (auto src = a.find("source"); src != a.end()) {
      if (src->is_object())
        r.source = json_string(*src, "name");
      else if (src->is_string())
        r.source = sanitize_utf8(src->get<std::string>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ArticleRecord> fetch_articles(const Query& query, Date from, Date to,
                                          const Transport& transport, int page_size) {
  if (to < from)
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("from_date {} is after to_date {}", from.to_string(), to.to_string()));
  if (query.query_string.empty()) throw Error(ErrorCode::InvalidArgument, "empty query");

  std::vector<ArticleRecord> out;
  for (Date day = from; day <= to; day = day.plus_days(1)) {
    for (int page = 1;; ++page) {
      const FetchRequest request{query.query_string, day, day, page, page_size};
      std::string body;
      std::string last_error;
      bool ok = false;
      for (int attempt = 0; attempt <= kMaxRetries && !ok; ++attempt) {
        try {
          body = transport(request);
          ok = true;
        } catch (const std::exception& e) {
          last_error = e.what();
        }
      }
      if (!ok)
        throw Error(ErrorCode::TransportError,
                    fmt::format("query '{}' day {} page {} failed after {} attempts: {}",
                                query.query_string, day.to_string(), page, kMaxRetries + 1, last_error));
      auto batch = parse_fetch_payload(body, query);
      const bool full = static_cast<int>(batch.size()) >= page_size;
      out.insert(out.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
      if (!full) break;
    }
  }
  return out;
}

}  // namespace sbt::corpus
