#include <sbt/backtest.hpp>

#include <sbt/csv.hpp>
#include <sbt/error.hpp>
#include <sbt/parallel.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

namespace sbt::backtest {

namespace {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.6f}", v);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; }

nlohmann::json json_number(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  return *v;
}

}  // namespace

// ------------------------------------------------------------------ prices

PriceSeries::PriceSeries(std::string ticker, std::vector<PricePoint> points)
    : ticker_(std::move(ticker)), points_(std::move(points)) {
  std::stable_sort(points_.begin(), points_.end(),
                   [](const PricePoint& a, const PricePoint& b) { return a.date < b.date; });
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i].close > 0.0) || !std::isfinite(points_[i].close))
      throw Error(ErrorCode::InvalidArgument, fmt::format("{} {}: close must be positive, got {}", ticker_,
                                                          points_[i].date.to_string(), points_[i].close));
    if (i > 0 && points_[i].date == points_[i - 1].date)
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("{}: duplicate close for {}", ticker_, points_[i].date.to_string()));
  }
}

std::optional<double> PriceSeries::close_on(const Date& date) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), date,
                             [](const PricePoint& p, const Date& d) { return p.date < d; });
  if (it == points_.end() || it->date != date) return std::nullopt;
  return it->close;
}

PriceTable read_prices(std::istream& in, const std::string& source) {
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) throw Error(ErrorCode::MissingColumn, fmt::format("{}: empty price file", source));
  const csv::Header header(row);
  constexpr std::string_view kColumns[] = {"ticker", "date", "close"};
  header.require(kColumns, source);
  const auto ticker_col = header.at("ticker");
  const auto date_col = header.at("date");
  const auto close_col = header.at("close");

  std::map<std::string, std::vector<PricePoint>> grouped;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    const auto field = [&](std::size_t c) -> const std::string& {
      if (c >= row.size())
        throw Error(ErrorCode::ParseError, fmt::format("{} line {}: too few fields", source, reader.line()));
      return row[c];
    };
    const auto date = Date::parse(field(date_col));
    if (!date)
      throw Error(ErrorCode::BadDate,
                  fmt::format("{} line {}: bad date '{}'", source, reader.line(), field(date_col)));
    const std::string& text = field(close_col);
    double close = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), close);
    if (ec != std::errc{} || ptr != text.data() + text.size())
      throw Error(ErrorCode::ParseError, fmt::format("{} line {}: bad close '{}'", source, reader.line(), text));
    grouped[field(ticker_col)].push_back({*date, close});
  }
  PriceTable table;
  for (auto& [ticker, points] : grouped) table.emplace(ticker, PriceSeries(ticker, std::move(points)));
  return table;
}

void write_prices(std::ostream& out, const PriceTable& prices) {
  csv::write_row(out, {"ticker", "date", "close"});
  for (const auto& [ticker, series] : prices)
    for (const auto& p : series.points())
      csv::write_row(out, {ticker, p.date.to_string(), fmt::format("{}", p.close)});
}

// ----------------------------------------------------------------- signals

std::size_t SentimentSignal::article_count() const {
  std::size_t n = 0;
  for (const auto& p : points) n += p.n_predictions;
  return n / kAllVariants.size();
}

const SignalPoint* SentimentSignal::on(const Date& date) const {
  auto it = std::lower_bound(points.begin(), points.end(), date,
                             [](const SignalPoint& p, const Date& d) { return p.date < d; });
  return it != points.end() && it->date == date ? &*it : nullptr;
}

namespace {

// predictions[v][a]: ordinal prediction of variant v's model on article a.
std::array<std::vector<int>, 4> score_articles(const ModelSet& models,
                                               std::span<const corpus::ArticleRecord> articles) {
  std::array<std::vector<int>, 4> out;
  for (Variant v : kAllVariants) {
    std::vector<std::string> texts;
    texts.reserve(articles.size());
    for (const auto& a : articles) texts.push_back(corpus::field_text(a, v));
    const auto predicted = models[static_cast<std::size_t>(index_of(v))].predict(texts);
    auto& slot = out[static_cast<std::size_t>(index_of(v))];
    slot.reserve(predicted.size());
    for (auto c : predicted) slot.push_back(index_of(c));
  }
  return out;
}

}  // namespace

SignalPoint daily_signal(const ModelSet& models, std::span<const corpus::ArticleRecord> articles) {
  if (articles.empty()) throw Error(ErrorCode::InvalidArgument, "daily signal needs at least one article");
  const auto scores = score_articles(models, articles);
  long sum = 0;
  std::size_t n = 0;
  for (const auto& per_variant : scores)
    for (int s : per_variant) {
      sum += s;
      ++n;
    }
  return {articles.front().published_at, static_cast<double>(sum) / static_cast<double>(n), n};
}

std::map<std::string, SentimentSignal> build_signals(const ModelSet& models,
                                                     std::span<const corpus::ArticleRecord> articles) {
  std::map<std::string, SentimentSignal> signals;
  if (articles.empty()) return signals;
  const auto scores = score_articles(models, articles);

  std::map<std::string, std::map<Date, std::pair<long, std::size_t>>> totals;
  for (std::size_t a = 0; a < articles.size(); ++a) {
    const auto& article = articles[a];
    auto& signal = signals[article.company_id];
    signal.company_id = article.company_id;
    if (signal.ticker.empty()) signal.ticker = article.ticker;
    auto& [sum, n] = totals[article.company_id][article.published_at];
    for (const auto& per_variant : scores) {
      sum += per_variant[a];
      ++n;
    }
  }
  for (auto& [company, by_date] : totals) {
    auto& points = signals[company].points;
    for (const auto& [date, total] : by_date)
      points.push_back({date, static_cast<double>(total.first) / static_cast<double>(total.second), total.second});
  }
  return signals;
}

// ----------------------------------------------------------------- trading

TradeLedger backtest_asset(const PriceSeries* prices, const SentimentSignal& signal, const Date& start,
                           const Date& end) {
  if (end < start)
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("backtest window ends ({}) before it starts ({})", end.to_string(), start.to_string()));
  TradeLedger ledger;
  ledger.company_id = signal.company_id;
  std::optional<PricePoint> holding;
  for (const auto& point : signal.points) {
    if (point.date < start || end < point.date) continue;
    const auto close = prices ? prices->close_on(point.date) : std::nullopt;
    if (!close)
      throw Error(ErrorCode::MissingPrice, fmt::format("asset {} has a signal on {} but no close price",
                                                       signal.price_key(), point.date.to_string()));
    if (!holding && point.mean_sentiment > 1.0) {
      holding = PricePoint{point.date, *close};
    } else if (holding && point.mean_sentiment <= 1.0) {
      ledger.trips.push_back({holding->date, holding->close, point.date, *close});
      holding.reset();
    }
  }
  if (holding) {
    // Holding implies a close exists in the window, so `last` is found.
    const auto& pts = prices->points();
    auto it = std::upper_bound(pts.begin(), pts.end(), end,
                               [](const Date& d, const PricePoint& p) { return d < p.date; });
    const PricePoint& last = *std::prev(it);
    // A buy on the final day has no later close to exit at; it is dropped.
    if (holding->date < last.date) {
      ledger.trips.push_back({holding->date, holding->close, last.date, last.close});
      ledger.liquidated_at_end = true;
    }
  }
  return ledger;
}

std::vector<TradeLedger> run_backtest(const PriceTable& prices,
                                      const std::map<std::string, SentimentSignal>& signals,
                                      std::size_t min_articles, const Date& start, const Date& end,
                                      unsigned jobs) {
  std::vector<const SentimentSignal*> eligible;
  for (const auto& [company, signal] : signals)
    if (signal.article_count() > min_articles) eligible.push_back(&signal);

  std::vector<TradeLedger> ledgers(eligible.size());
  parallel_for(eligible.size(), jobs, [&](std::size_t i) {
    const auto& signal = *eligible[i];
    auto it = prices.find(signal.price_key());
    ledgers[i] = backtest_asset(it == prices.end() ? nullptr : &it->second, signal, start, end);
  });
  return ledgers;
}

double asset_roi(const TradeLedger& ledger) {
  double growth = 1.0;
  for (const auto& t : ledger.trips) growth *= t.sell_close / t.buy_close;
  return growth - 1.0;
}

double benchmark_roi(const PriceSeries& prices, const Date& start, const Date& end) {
  const auto& pts = prices.points();
  auto first = std::lower_bound(pts.begin(), pts.end(), start,
                                [](const PricePoint& p, const Date& d) { return p.date < d; });
  auto past_last = std::upper_bound(pts.begin(), pts.end(), end,
                                    [](const Date& d, const PricePoint& p) { return d < p.date; });
  if (first == pts.end() || past_last - first < 2)
    throw Error(ErrorCode::InsufficientData,
                fmt::format("{} needs at least two closes between {} and {}", prices.ticker(), start.to_string(),
                            end.to_string()));
  const double initial = first->close;
  const double final_close = std::prev(past_last)->close;
  return (final_close - initial) / initial;
}

// ----------------------------------------------------------------- summary

Summary summary_stats(std::span<const double> rois) {
  if (rois.empty()) throw Error(ErrorCode::EmptyReport, "no assets to summarise");
  Summary s;
  s.avg_roi = std::accumulate(rois.begin(), rois.end(), 0.0) / static_cast<double>(rois.size());
  s.max_win = *std::max_element(rois.begin(), rois.end());
  s.max_loss = *std::min_element(rois.begin(), rois.end());
  double win_sum = 0.0;
  double loss_sum = 0.0;
  for (double r : rois) {
    if (r > 0.0) {
      ++s.n_winners;
      win_sum += r;
    } else if (r < 0.0) {
      ++s.n_losers;
      loss_sum += r;
    }
  }
  if (s.n_winners > 0) s.avg_win = win_sum / static_cast<double>(s.n_winners);
  if (s.n_losers > 0) s.avg_loss = loss_sum / static_cast<double>(s.n_losers);
  if (s.n_losers > 0)
    s.wl_ratio = static_cast<double>(s.n_winners) / static_cast<double>(s.n_losers);
  else if (s.n_winners > 0)
    s.wl_ratio = std::numeric_limits<double>::infinity();
  return s;
}

BacktestReport make_report(const std::vector<TradeLedger>& ledgers,
                           const std::map<std::string, SentimentSignal>& signals, std::size_t min_articles,
                           const Date& start, const Date& end) {
  BacktestReport report;
  report.min_articles = min_articles;
  report.start = start;
  report.end = end;
  std::vector<double> rois;
  for (const auto& ledger : ledgers) {
    AssetResult r;
    r.company_id = ledger.company_id;
    if (auto it = signals.find(ledger.company_id); it != signals.end()) {
      r.ticker = it->second.price_key();
      r.articles = it->second.article_count();
    } else {
      r.ticker = ledger.company_id;
    }
    r.trips = ledger.trips.size();
    r.roi = asset_roi(ledger);
    rois.push_back(r.roi);
    report.assets.push_back(std::move(r));
  }
  std::sort(report.assets.begin(), report.assets.end(),
            [](const AssetResult& a, const AssetResult& b) { return a.company_id < b.company_id; });
  if (!rois.empty()) report.summary = summary_stats(rois);
  return report;
}

void write_report_csv(std::ostream& out, const BacktestReport& report) {
  csv::write_row(out, {"row", "company_id", "ticker", "articles", "trips", "roi", "max_win", "max_loss", "avg_win",
                       "avg_loss", "wl_ratio"});
  std::size_t articles = 0;
  std::size_t trips = 0;
  for (const auto& a : report.assets) {
    articles += a.articles;
    trips += a.trips;
    csv::write_row(out, {"asset", a.company_id, a.ticker, std::to_string(a.articles), std::to_string(a.trips),
                         format_number(a.roi), "", "", "", "", ""});
  }
  for (const auto& b : report.benchmarks)
    csv::write_row(out, {"benchmark", "", b.ticker, "", "", format_number(b.roi), "", "", "", "", ""});
  if (report.summary) {
    const auto& s = *report.summary;
    csv::write_row(out, {"summary", "", "", std::to_string(articles), std::to_string(trips),
                         format_number(s.avg_roi), format_number(s.max_win), format_number(s.max_loss),
                         format_optional(s.avg_win), format_optional(s.avg_loss), format_optional(s.wl_ratio)});
  }
}

void write_report_json(std::ostream& out, const BacktestReport& report) {
  nlohmann::json j;
  j["min_articles"] = report.min_articles;
  j["start"] = report.start.to_string();
  j["end"] = report.end.to_string();
  j["n_assets"] = report.assets.size();
  nlohmann::json assets = nlohmann::json::array();
  for (const auto& a : report.assets)
    assets.push_back({{"company_id", a.company_id},
                      {"ticker", a.ticker},
                      {"articles", a.articles},
                      {"trips", a.trips},
                      {"roi", a.roi}});
  j["assets"] = std::move(assets);
  nlohmann::json benchmarks = nlohmann::json::array();
  for (const auto& b : report.benchmarks) benchmarks.push_back({{"ticker", b.ticker}, {"roi", b.roi}});
  j["benchmarks"] = std::move(benchmarks);
  if (report.summary) {
    const auto& s = *report.summary;
    j["summary"] = {{"avg_roi", s.avg_roi},
                    {"max_win", s.max_win},
                    {"max_loss", s.max_loss},
                    {"avg_win", json_number(s.avg_win)},
                    {"avg_loss", json_number(s.avg_loss)},
                    {"wl_ratio", json_number(s.wl_ratio)},
                    {"n_winners", s.n_winners},
                    {"n_losers", s.n_losers}};
  } else {
    j["summary"] = nullptr;
  }
  out << j.dump(2) << '\n';
}

void write_statistics_table(std::ostream& out, std::span<const BacktestReport> reports) {
  csv::write_row(out,
                 {"min_articles", "n_assets", "avg_roi", "max_win", "max_loss", "avg_win", "avg_loss", "wl_ratio"});
  for (const auto& r : reports) {
    if (!r.summary) {
      csv::write_row(out, {std::to_string(r.min_articles), "0", "", "", "", "", "", ""});
      continue;
    }
    const auto& s = *r.summary;
    csv::write_row(out, {std::to_string(r.min_articles), std::to_string(r.assets.size()), format_number(s.avg_roi),
                         format_number(s.max_win), format_number(s.max_loss), format_optional(s.avg_win),
                         format_optional(s.avg_loss), format_optional(s.wl_ratio)});
  }
}

// ------------------------------------------------------------------- chart

std::vector<ChartRow> emit_chart_data(const PriceSeries& prices, const SentimentSignal& signal,
                                      const Date& start, const Date& end) {
  std::vector<ChartRow> rows;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& p : prices.points()) {
    if (p.date < start || end < p.date) continue;
    lo = std::min(lo, p.close);
    hi = std::max(hi, p.close);
    ChartRow row;
    row.date = p.date;
    row.close = p.close;
    if (const auto* s = signal.on(p.date)) {
      row.mean_sentiment = s->mean_sentiment;
      row.scaled_sentiment = s->mean_sentiment / 2.0;
    }
    rows.push_back(row);
  }
  for (auto& row : rows) row.scaled_close = hi > lo ? (row.close - lo) / (hi - lo) : 0.0;
  return rows;
}

void write_chart_csv(std::ostream& out, std::span<const ChartRow> rows) {
  csv::write_row(out, {"date", "close", "scaled_close", "mean_sentiment", "scaled_sentiment"});
  for (const auto& r : rows)
    csv::write_row(out, {r.date.to_string(), format_number(r.close), format_number(r.scaled_close),
                         format_optional(r.mean_sentiment), format_optional(r.scaled_sentiment)});
}

}  // namespace sbt::backtest
