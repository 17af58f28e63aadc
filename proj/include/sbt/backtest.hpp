#pragma once

#include <sbt/corpus.hpp>
#include <sbt/date.hpp>
#include <sbt/selection.hpp>

#include <array>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace sbt::backtest {

struct PricePoint {
  Date date;
  double close = 0.0;
};

// Daily closes for one ticker; dates strictly increasing, closes positive.
class PriceSeries {
 public:
  PriceSeries() = default;
  // Sorts by date; throws InvalidArgument on duplicate dates or close <= 0.
  PriceSeries(std::string ticker, std::vector<PricePoint> points);

  const std::string& ticker() const { return ticker_; }
  const std::vector<PricePoint>& points() const { return points_; }
  std::optional<double> close_on(const Date& date) const;

 private:
  std::string ticker_;
  std::vector<PricePoint> points_;
};

using PriceTable = std::map<std::string, PriceSeries>;

// Header `ticker,date,close`.
PriceTable read_prices(std::istream& in, const std::string& source = "prices");
void write_prices(std::ostream& out, const PriceTable& prices);

struct SignalPoint {
  Date date;
  double mean_sentiment = 0.0;  // in [0, 2]
  std::size_t n_predictions = 0;
};

struct SentimentSignal {
  std::string company_id;
  std::string ticker;  // price-series key; falls back to company_id when empty
  std::vector<SignalPoint> points;  // ascending dates, one per day with articles

  // Articles behind the signal (four predictions each).
  std::size_t article_count() const;
  const std::string& price_key() const { return ticker.empty() ? company_id : ticker; }
  const SignalPoint* on(const Date& date) const;
};

// One fitted pipeline per dataset variant, indexed by index_of(Variant).
using ModelSet = std::array<selection::Pipeline, 4>;

// Mean ordinal prediction (0/1/2) over every article and every variant model.
// Throws InvalidArgument when `articles` is empty.
SignalPoint daily_signal(const ModelSet& models, std::span<const corpus::ArticleRecord> articles);

// Groups articles by company and publication date and scores each group.
// Result is keyed by company_id.
std::map<std::string, SentimentSignal> build_signals(const ModelSet& models,
                                                     std::span<const corpus::ArticleRecord> articles);

struct RoundTrip {
  Date buy_date;
  double buy_close = 0.0;
  Date sell_date;
  double sell_close = 0.0;
};

struct TradeLedger {
  std::string company_id;
  std::vector<RoundTrip> trips;
  // True when a position was still held at the end of the window and closed
  // at the final close.
  bool liquidated_at_end = false;
};

// Walks one asset through [start, end]. Throws MissingPrice when a signal
// date in the window has no close.
TradeLedger backtest_asset(const PriceSeries* prices, const SentimentSignal& signal, const Date& start,
                           const Date& end);

// Assets whose article count is <= min_articles are skipped. Ledgers are
// ordered by company_id.
std::vector<TradeLedger> run_backtest(const PriceTable& prices,
                                      const std::map<std::string, SentimentSignal>& signals,
                                      std::size_t min_articles, const Date& start, const Date& end,
                                      unsigned jobs = 1);

double asset_roi(const TradeLedger& ledger);

// Buy-and-hold return between the first close on/after start and the last
// close on/before end. Throws InsufficientData with fewer than two closes.
double benchmark_roi(const PriceSeries& prices, const Date& start, const Date& end);

struct Summary {
  double avg_roi = 0.0;
  double max_win = 0.0;   // max ROI
  double max_loss = 0.0;  // min ROI
  std::optional<double> avg_win;
  std::optional<double> avg_loss;
  // winners / losers; +inf when there are winners and no losers; absent when
  // there are neither.
  std::optional<double> wl_ratio;
  std::size_t n_winners = 0;
  std::size_t n_losers = 0;
};

// Throws EmptyReport when `rois` is empty.
Summary summary_stats(std::span<const double> rois);

struct AssetResult {
  std::string company_id;
  std::string ticker;
  std::size_t articles = 0;
  std::size_t trips = 0;
  double roi = 0.0;
};

struct BenchmarkResult {
  std::string ticker;
  double roi = 0.0;
};

struct BacktestReport {
  std::size_t min_articles = 0;
  Date start;
  Date end;
  std::vector<AssetResult> assets;  // ordered by company_id
  std::optional<Summary> summary;   // absent when no asset passed the filter
  std::vector<BenchmarkResult> benchmarks;
};

BacktestReport make_report(const std::vector<TradeLedger>& ledgers,
                           const std::map<std::string, SentimentSignal>& signals, std::size_t min_articles,
                           const Date& start, const Date& end);

// Per-asset rows followed by a summary row.
void write_report_csv(std::ostream& out, const BacktestReport& report);
void write_report_json(std::ostream& out, const BacktestReport& report);
// One row per report: min_articles, assets, avg ROI, max win/loss, avg win/loss, W/L.
void write_statistics_table(std::ostream& out, std::span<const BacktestReport> reports);

struct ChartRow {
  Date date;
  double close = 0.0;
  double scaled_close = 0.0;  // min-max over the window; 0 when the window is flat
  std::optional<double> mean_sentiment;
  std::optional<double> scaled_sentiment;  // mean_sentiment / 2
};

// One row per price date in [start, end].
std::vector<ChartRow> emit_chart_data(const PriceSeries& prices, const SentimentSignal& signal,
                                      const Date& start, const Date& end);
void write_chart_csv(std::ostream& out, std::span<const ChartRow> rows);

}  // namespace sbt::backtest
