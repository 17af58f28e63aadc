#include <doctest.h>

#include <sbt/backtest.hpp>
#include <sbt/error.hpp>
#include <sbt/random.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

using namespace sbt;
using namespace sbt::backtest;

namespace {

const Date kDay0{2021, 3, 1};

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an sbt::Error");
  return ErrorCode::InvalidArgument;
}

PriceSeries series(const std::string& ticker, const std::vector<double>& closes) {
  std::vector<PricePoint> pts;
  for (std::size_t i = 0; i < closes.size(); ++i) pts.push_back({kDay0.plus_days(static_cast<int>(i)), closes[i]});
  return PriceSeries(ticker, pts);
}

// One entry per day from kDay0; NaN means no articles that day.
SentimentSignal signal_of(const std::string& id, const std::vector<double>& means, std::size_t per_day = 4) {
  SentimentSignal s;
  s.company_id = id;
  s.ticker = id;
  for (std::size_t i = 0; i < means.size(); ++i)
    if (!std::isnan(means[i])) s.points.push_back({kDay0.plus_days(static_cast<int>(i)), means[i], per_day});
  return s;
}

Date day(int i) { return kDay0.plus_days(i); }

constexpr double kNone = std::numeric_limits<double>::quiet_NaN();

selection::Pipeline keyword_pipeline(Variant v) {
  selection::PipelineSpec spec;
  spec.dataset_variant = v;
  spec.vectorizer = selection::Vectorizer::UnigramOnly;
  spec.model.params = models::NaiveBayesParams{0.01};
  const std::vector<std::string> texts{"up up", "up", "down down", "down", "flat flat", "flat"};
  const std::vector labels{SentimentClass::Positive, SentimentClass::Positive, SentimentClass::Negative,
                           SentimentClass::Negative, SentimentClass::Neutral,  SentimentClass::Neutral};
  return selection::fit_pipeline(spec, texts, labels);
}

corpus::ArticleRecord article(const std::string& company, const std::string& word, Date date) {
  corpus::ArticleRecord a;
  a.company_id = company;
  a.ticker = company;
  a.title = word;
  a.description = word;
  a.content = word;
  a.published_at = date;
  return a;
}

}  // namespace

TEST_CASE("price series validation and lookup") {
  CHECK(code_of([] { series("X", {1.0, 0.0}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { PriceSeries("X", {{kDay0, 1.0}, {kDay0, 2.0}}); }) == ErrorCode::InvalidArgument);
  const PriceSeries s("X", {{day(2), 3.0}, {day(0), 1.0}});
  CHECK(s.points().front().date == day(0));
  CHECK(s.close_on(day(2)) == 3.0);
  CHECK_FALSE(s.close_on(day(1)));

  std::istringstream in("ticker,date,close\nAAA,2021-03-02,10.5\nAAA,2021-03-01,10\nBBB,2021-03-01,7\n");
  const auto table = read_prices(in);
  REQUIRE(table.size() == 2);
  CHECK(table.at("AAA").close_on(day(1)) == 10.5);
  std::ostringstream out;
  write_prices(out, table);
  std::istringstream back(out.str());
  CHECK(read_prices(back).at("BBB").close_on(day(0)) == 7.0);

  std::istringstream bad("ticker,date,close\nAAA,03/01/2021,10\n");
  CHECK(code_of([&] { read_prices(bad); }) == ErrorCode::BadDate);
}

TEST_CASE("daily signal is the mean ordinal prediction") {
  ModelSet models;
  for (auto v : kAllVariants) models[index_of(v)] = keyword_pipeline(v);

  const std::vector up{article("A", "up", kDay0)};
  CHECK(daily_signal(models, up).mean_sentiment == 2.0);
  CHECK(daily_signal(models, up).n_predictions == 4);

  const std::vector mixed{article("A", "up", kDay0), article("A", "down", kDay0)};
  CHECK(daily_signal(models, mixed).mean_sentiment == 1.0);

  const std::vector eight{article("A", "up", kDay0), article("A", "flat", kDay0)};
  const auto p = daily_signal(models, eight);
  CHECK(p.n_predictions == 8);
  CHECK(p.mean_sentiment == 1.5);

  CHECK(code_of([&] { daily_signal(models, std::span<const corpus::ArticleRecord>{}); }) ==
        ErrorCode::InvalidArgument);

  const std::vector many{article("B", "down", day(1)), article("A", "up", day(0)), article("A", "flat", day(0)),
                         article("A", "down", day(2))};
  const auto signals = build_signals(models, many);
  REQUIRE(signals.size() == 2);
  const auto& a = signals.at("A");
  REQUIRE(a.points.size() == 2);
  CHECK(a.points[0].mean_sentiment == 1.5);
  CHECK(a.points[1].mean_sentiment == 0.0);
  CHECK(a.article_count() == 3);
  CHECK(signals.at("B").points[0].date == day(1));
}

TEST_CASE("trading rule") {
  const auto prices = series("A", {100, 105, 110, 120});
  // Buy on day 0 at 100, sell on day 2 at 110.
  auto ledger = backtest_asset(&prices, signal_of("A", {2.0, kNone, 0.5}), day(0), day(3));
  REQUIRE(ledger.trips.size() == 1);
  CHECK(asset_roi(ledger) == doctest::Approx(0.10).epsilon(1e-12));
  CHECK_FALSE(ledger.liquidated_at_end);

  // A signal of exactly 1.0 sells.
  ledger = backtest_asset(&prices, signal_of("A", {1.5, 1.0}), day(0), day(3));
  REQUIRE(ledger.trips.size() == 1);
  CHECK(ledger.trips[0].sell_date == day(1));

  // Never above 1: no trades.
  ledger = backtest_asset(&prices, signal_of("A", {1.0, 0.2, 1.0, 0.0}), day(0), day(3));
  CHECK(ledger.trips.empty());
  CHECK(asset_roi(ledger) == 0.0);

  // Still holding at the end: sold at the last close in the window.
  ledger = backtest_asset(&prices, signal_of("A", {kNone, 2.0}), day(0), day(2));
  REQUIRE(ledger.trips.size() == 1);
  CHECK(ledger.liquidated_at_end);
  CHECK(ledger.trips[0].sell_close == 110.0);

  // A buy on the last day has nowhere to exit and is dropped.
  ledger = backtest_asset(&prices, signal_of("A", {kNone, kNone, kNone, 2.0}), day(0), day(3));
  CHECK(ledger.trips.empty());

  // Signals outside the window are ignored.
  ledger = backtest_asset(&prices, signal_of("A", {2.0, kNone, 0.0}), day(1), day(3));
  CHECK(ledger.trips.empty());
}

TEST_CASE("round trips compound") {
  // Trips 10 -> 12 and 6 -> 9.
  const auto prices = series("A", {10, 12, 6, 9, 9});
  const auto ledger = backtest_asset(&prices, signal_of("A", {2.0, 0.0, 2.0, 0.0}), day(0), day(4));
  REQUIRE(ledger.trips.size() == 2);
  CHECK(std::abs(asset_roi(ledger) - 0.80) <= 1e-12);

  // Signal 2.0 at close 10, 0.0 two days later at close 11.
  const auto short_series = series("A", {10, 10.5, 11});
  const auto one = backtest_asset(&short_series, signal_of("A", {2.0, kNone, 0.0}), day(0), day(2));
  CHECK(std::abs(asset_roi(one) - 0.10) <= 1e-12);
}

TEST_CASE("missing prices are reported") {
  const PriceSeries gappy("A", {{day(0), 10.0}, {day(2), 11.0}});
  try {
    backtest_asset(&gappy, signal_of("A", {2.0, 0.0}), day(0), day(2));
    FAIL("expected MissingPrice");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingPrice);
    CHECK(std::string(e.what()).find("A") != std::string::npos);
    CHECK(std::string(e.what()).find(day(1).to_string()) != std::string::npos);
  }
  CHECK(code_of([] { backtest_asset(nullptr, signal_of("Z", {2.0}), day(0), day(1)); }) ==
        ErrorCode::MissingPrice);
}

TEST_CASE("benchmark returns") {
  CHECK(benchmark_roi(series("F", {50, 50, 50}), day(0), day(2)) == 0.0);
  CHECK(benchmark_roi(series("D", {100, 99, 97}), day(0), day(2)) == doctest::Approx(-0.03).epsilon(1e-12));
  CHECK(benchmark_roi(series("D", {100, 99, 97}), day(-5), day(1)) == doctest::Approx(-0.01).epsilon(1e-12));
  CHECK(code_of([] { benchmark_roi(series("S", {100}), day(0), day(5)); }) == ErrorCode::InsufficientData);
}

TEST_CASE("summary statistics") {
  const std::vector two{0.1, -0.05};
  const auto s = summary_stats(two);
  CHECK(s.avg_roi == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(s.max_win == 0.1);
  CHECK(s.max_loss == -0.05);
  CHECK(*s.avg_win == 0.1);
  CHECK(*s.avg_loss == -0.05);
  CHECK(*s.wl_ratio == 1.0);

  const std::vector winners{0.1, 0.2};
  CHECK(std::isinf(*summary_stats(winners).wl_ratio));
  CHECK_FALSE(summary_stats(winners).avg_loss);

  const std::vector flat{0.0};
  const auto z = summary_stats(flat);
  CHECK_FALSE(z.wl_ratio);
  CHECK(z.n_winners == 0);
  CHECK(z.n_losers == 0);

  CHECK(code_of([] { summary_stats(std::span<const double>{}); }) == ErrorCode::EmptyReport);
}

TEST_CASE("report writers") {
  PriceTable prices{{"A", series("A", {100, 110, 120})}, {"B", series("B", {10, 9, 8})}};
  std::map<std::string, SentimentSignal> signals{{"A", signal_of("A", {2.0, 0.0}, 8)},
                                                 {"B", signal_of("B", {2.0, kNone, kNone}, 8)}};
  const auto ledgers = run_backtest(prices, signals, 1, day(0), day(2));
  const auto report = make_report(ledgers, signals, 1, day(0), day(2));
  REQUIRE(report.assets.size() == 2);
  CHECK(report.assets[0].roi == doctest::Approx(0.1));
  CHECK(report.assets[1].roi == doctest::Approx(-0.2));
  REQUIRE(report.summary);

  std::ostringstream csv, json, stats;
  write_report_csv(csv, report);
  write_report_json(json, report);
  const std::vector reports{report};
  write_statistics_table(stats, reports);
  CHECK(csv.str().rfind("row,company_id,ticker,articles,trips,roi,", 0) == 0);
  CHECK(csv.str().find("asset,A,A,4,1,0.100000") != std::string::npos);
  CHECK(json.str().find("\"wl_ratio\"") != std::string::npos);
  CHECK(stats.str().rfind("min_articles,n_assets,avg_roi", 0) == 0);

  // Nothing passes the filter.
  const auto empty = make_report(run_backtest(prices, signals, 100, day(0), day(2)), signals, 100, day(0), day(2));
  CHECK(empty.assets.empty());
  CHECK_FALSE(empty.summary);
}

TEST_CASE("chart data") {
  const auto rows = emit_chart_data(series("A", {10, 20, 30}), signal_of("A", {kNone, 1.0}), day(0), day(2));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].scaled_close == 0.0);
  CHECK(rows[1].scaled_close == 0.5);
  CHECK(rows[2].scaled_close == 1.0);
  CHECK_FALSE(rows[0].mean_sentiment);
  CHECK(*rows[1].scaled_sentiment == 0.5);

  const auto flat = emit_chart_data(series("A", {5, 5}), signal_of("A", {}), day(0), day(1));
  CHECK(flat[0].scaled_close == 0.0);
  CHECK(flat[1].scaled_close == 0.0);

  std::ostringstream out;
  write_chart_csv(out, rows);
  CHECK(out.str().rfind("date,close,scaled_close,mean_sentiment,scaled_sentiment\n", 0) == 0);
}

TEST_CASE("backtest invariants on random markets") {
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    const int days = 5 + static_cast<int>(rng.below(40));
    PriceTable prices;
    std::map<std::string, SentimentSignal> signals;
    const auto n_assets = 1 + rng.below(6);
    for (std::size_t a = 0; a < n_assets; ++a) {
      const std::string id = "T" + std::to_string(a);
      std::vector<double> closes;
      std::vector<double> means;
      double p = 10.0 + 90.0 * rng.uniform();
      for (int d = 0; d < days; ++d) {
        p *= std::exp(0.1 * (rng.uniform() - 0.5));
        closes.push_back(p);
        means.push_back(rng.uniform() < 0.3 ? kNone : 2.0 * rng.uniform());
      }
      // Shuffled input order must not matter.
      std::vector<PricePoint> pts;
      for (int d = 0; d < days; ++d) pts.push_back({day(d), closes[static_cast<std::size_t>(d)]});
      rng.shuffle(std::span<PricePoint>(pts));
      prices.emplace(id, PriceSeries(id, pts));
      signals.emplace(id, signal_of(id, means, 4 * (1 + rng.below(20))));
    }

    const auto base = run_backtest(prices, signals, 0, day(0), day(days - 1));
    const auto threaded = run_backtest(prices, signals, 0, day(0), day(days - 1), 3);
    REQUIRE(base.size() == threaded.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i].company_id == threaded[i].company_id);
      CHECK(asset_roi(base[i]) == asset_roi(threaded[i]));
      CHECK(asset_roi(base[i]) > -1.0);
      for (const auto& t : base[i].trips) CHECK(t.buy_date < t.sell_date);
    }

    // Raising the article threshold only removes assets.
    std::vector<std::string> previous;
    for (const auto& l : base) previous.push_back(l.company_id);
    for (std::size_t m : {4u, 20u, 40u, 80u}) {
      std::vector<std::string> now;
      for (const auto& l : run_backtest(prices, signals, m, day(0), day(days - 1))) now.push_back(l.company_id);
      CHECK(std::includes(previous.begin(), previous.end(), now.begin(), now.end()));
      previous = now;
    }

    // Always bullish is buy-and-hold.
    for (const auto& [id, s] : prices) {
      const auto bull = signal_of(id, std::vector<double>(static_cast<std::size_t>(days), 2.0));
      const auto ledger = backtest_asset(&s, bull, day(0), day(days - 1));
      CHECK(std::abs(asset_roi(ledger) - benchmark_roi(s, day(0), day(days - 1))) <= 1e-12);
    }
  }
}
