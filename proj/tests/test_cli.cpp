#include <doctest.h>

#include "support/synthetic.hpp"

#include <sbt/cli.hpp>
#include <sbt/corpus.hpp>
#include <sbt/csv.hpp>
#include <sbt/labeling.hpp>
#include <sbt/model_file.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sbt;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "sbt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("sbt_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

corpus::ArticleRecord article(const std::string& company, const std::string& text, Date date) {
  corpus::ArticleRecord a;
  a.company_id = company;
  a.ticker = company;
  a.title = text;
  a.description = text + " description";
  a.content = text + " content body";
  a.published_at = date;
  a.source = "wire";
  return a;
}

void write_articles(const fs::path& p, const std::vector<corpus::ArticleRecord>& records) {
  std::ofstream out(p);
  corpus::write_articles(out, records);
}

void write_responses(const fs::path& p, const std::vector<labeling::HitResponse>& rs) {
  std::ofstream out(p);
  labeling::write_responses(out, rs);
}

labeling::HitResponse response(const std::string& sample, Variant v, const std::string& worker, SentimentClass a,
                               double time, std::optional<SentimentClass> gold = {}) {
  labeling::HitResponse r;
  r.hit_id = sample + "-" + worker;
  r.sample_id = sample;
  r.dataset_variant = v;
  r.worker_id = worker;
  r.answer = a;
  r.work_time_seconds = time;
  r.is_gold = gold.has_value();
  r.gold_answer = gold;
  return r;
}

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

// Synthetic corpus written to disk plus the shared small-grid training flags.
struct TrainFixture {
  fs::path dir;
  std::vector<std::string> common;

  explicit TrainFixture(const std::string& name, std::size_t n_articles = 60) : dir(fresh_dir(name)) {
    testing::SyntheticOptions opt;
    opt.n_articles = n_articles;
    testing::write_synthetic(testing::make_synthetic(opt), dir);
    common = {"--articles",      (dir / "articles.csv").string(), "--responses", (dir / "responses.csv").string(),
              "--prices",        (dir / "prices.csv").string(),   "--folds",     "3",
              "--svd-k",         "5",                              "--families",  "logreg",
              "--grid-logreg-c", "1",                              "--seed",      "5"};
  }

  Result step(const std::string& sub, const fs::path& out, std::vector<std::string> extra = {}) const {
    std::vector<std::string> args{sub};
    args.insert(args.end(), common.begin(), common.end());
    args.push_back("--out");
    args.push_back(out.string());
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }
};

}  // namespace

TEST_CASE("build-datasets writes four files") {
  const auto dir = fresh_dir("build");
  const Date d{2020, 3, 9};
  auto records = std::vector{article("AAA", "first", d), article("BBB", "second", d), article("AAA", "third", d)};
  records.push_back(records[0]);
  write_articles(dir / "articles.csv", records);

  const auto r = run({"build-datasets", "--articles", (dir / "articles.csv").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("1 duplicates removed") != std::string::npos);
  for (auto v : kAllVariants) {
    const auto text = slurp(dir / "o" / "datasets" / (std::string(to_string(v)) + ".csv"));
    CHECK(count_lines(text) == 4);  // header plus three rows
  }

  std::ofstream(dir / "bad.csv") << "company_id,title\nAAA,x\n";
  const auto bad = run({"build-datasets", "--articles", (dir / "bad.csv").string(), "--out", (dir / "o2").string()});
  CHECK(bad.code == 2);
  CHECK_FALSE(bad.err.empty());

  CHECK(run({"build-datasets", "--no-such-flag"}).code == 2);
}

TEST_CASE("label-qa reports agreement and flagged workers") {
  const auto dir = fresh_dir("label");
  std::vector<labeling::HitResponse> rs;
  const std::array answers{SentimentClass::Negative, SentimentClass::Neutral, SentimentClass::Positive};
  for (auto v : kAllVariants)
    for (int s = 0; s < 3; ++s)
      for (const char* w : {"w1", "w2", "w3"})
        rs.push_back(response("s" + std::to_string(s), v, w, answers[static_cast<std::size_t>(s)], 30.0));
  write_responses(dir / "responses.csv", rs);

  auto r = run({"label-qa", "--responses", (dir / "responses.csv").string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const auto kappa = slurp(dir / "o" / "qa" / "kappa.csv");
  CHECK(kappa.find("title,1.0000,3") != std::string::npos);
  CHECK(kappa.find("combination,1.0000,3") != std::string::npos);
  const auto labels = slurp(dir / "o" / "labels" / "title.csv");
  CHECK(labels.find("s2,positive,3") != std::string::npos);

  // Workers 1 and 2 are slow and right on gold; worker 3 is fast and wrong.
  rs.clear();
  const std::array<std::tuple<const char*, double, int>, 3> workers{
      std::tuple{"1", 100.0, 9}, std::tuple{"2", 100.0, 8}, std::tuple{"3", 10.0, 1}};
  for (const auto& [w, time, right] : workers)
    for (int g = 0; g < 10; ++g) {
      const auto gold = SentimentClass::Positive;
      rs.push_back(response("g" + std::to_string(g), Variant::Title, w,
                            g < right ? gold : SentimentClass::Negative, time, gold));
    }
  write_responses(dir / "screen.csv", rs);
  r = run({"label-qa", "--responses", (dir / "screen.csv").string(), "--out", (dir / "o2").string()});
  REQUIRE(r.code == 0);
  const auto flagged = slurp(dir / "o2" / "qa" / "flagged_workers.csv");
  CHECK(count_lines(flagged) == 2);
  CHECK(flagged.find("\n3,10,") != std::string::npos);

  write_responses(dir / "empty.csv", {});
  CHECK(run({"label-qa", "--responses", (dir / "empty.csv").string(), "--out", (dir / "o3").string()}).code == 2);
}

TEST_CASE("train, finalize and rerun determinism") {
  const TrainFixture fx("train");
  const auto out = fx.dir / "run1";
  REQUIRE(fx.step("build-datasets", out).code == 0);
  REQUIRE(fx.step("label-qa", out).code == 0);

  CHECK(fx.step("finalize", out).code == 2);  // no manifest yet

  const auto trained = fx.step("train", out);
  REQUIRE(trained.code == 0);
  const auto manifest = nlohmann::json::parse(slurp(out / "train" / "selection.json"));
  REQUIRE(manifest.at("pipelines").size() == 4);
  for (const auto& p : manifest.at("pipelines")) CHECK(p.at("spec").at("model").at("family") == "logreg");

  // A second run in a fresh directory produces the same bytes.
  const auto out2 = fx.dir / "run2";
  REQUIRE(fx.step("build-datasets", out2).code == 0);
  REQUIRE(fx.step("label-qa", out2).code == 0);
  REQUIRE(fx.step("train", out2).code == 0);
  for (const char* f : {"selection.json", "final_models.csv", "scores_eq1.csv", "hyperparameters.csv"})
    CHECK(slurp(out / "train" / f) == slurp(out2 / "train" / f));

  REQUIRE(fx.step("finalize", out).code == 0);
  CHECK(fx.step("finalize", out).code == 2);
  CHECK(fx.step("finalize", out, {"--force"}).code == 0);

  const auto model = model_file::load_model(out / "models" / "title.model");
  CHECK(model.spec.dataset_variant == Variant::Title);
  const std::vector<std::string> texts{"shares rally after record profit", "shares slump on losses"};
  CHECK(model.predict(texts).size() == 2);
}

TEST_CASE("backtest with hand-built models") {
  const auto dir = fresh_dir("backtest");
  for (auto v : kAllVariants) {
    fs::create_directories(dir / "models");
    model_file::save_model(keyword_pipeline(v), dir / "models" / (std::string(to_string(v)) + ".model"));
  }
  const Date d0{2021, 5, 3};
  {
    std::ofstream prices(dir / "prices.csv");
    prices << "ticker,date,close\n";
    for (int i = 0; i < 5; ++i) prices << "AAA," << d0.plus_days(i).to_string() << "," << 100 + i << "\n";
    for (int i = 0; i < 5; ++i) prices << "IDX," << d0.plus_days(i).to_string() << "," << 50 - i << "\n";
  }
  std::vector<corpus::ArticleRecord> neutral;
  for (int i = 0; i < 4; ++i) {
    auto a = article("AAA", "flat", d0.plus_days(i));
    a.description = a.content = "flat";
    neutral.push_back(a);
  }
  write_articles(dir / "neutral.csv", neutral);

  const std::vector<std::string> base{"backtest",    "--model-dir",    (dir / "models").string(),
                                      "--prices",    (dir / "prices.csv").string(),
                                      "--min-articles", "0",           "--benchmarks", "IDX"};
  auto args = base;
  args.insert(args.end(), {"--articles", (dir / "neutral.csv").string(), "--out", (dir / "o").string()});
  const auto r = run(args);
  REQUIRE(r.code == 0);
  const auto report = slurp(dir / "o" / "backtest" / "report_min0.csv");
  CHECK(report.find("asset,AAA,AAA,4,0,0.000000") != std::string::npos);
  CHECK(report.find("benchmark,,IDX,") != std::string::npos);

  // A bullish article on a day without a close.
  auto gap = neutral;
  auto bullish = article("AAA", "up", d0.plus_days(10));
  bullish.description = bullish.content = "up";
  gap.push_back(bullish);
  write_articles(dir / "gap.csv", gap);
  args = base;
  args.insert(args.end(), {"--articles", (dir / "gap.csv").string(), "--out", (dir / "o2").string(), "--end",
                           d0.plus_days(20).to_string()});
  const auto missing = run(args);
  CHECK(missing.code == 2);
  CHECK(missing.err.find("AAA") != std::string::npos);
  CHECK(missing.err.find(d0.plus_days(10).to_string()) != std::string::npos);
}

TEST_CASE("config file values apply and flags win") {
  const auto dir = fresh_dir("config");
  const Date d{2020, 3, 9};
  write_articles(dir / "articles.csv", {article("AAA", "one", d), article("BBB", "two", d)});
  std::ofstream(dir / "run.toml") << "articles = \"" << (dir / "articles.csv").string() << "\"\nout = \""
                                  << (dir / "from_config").string() << "\"\n";
  CHECK(run({"build-datasets", "--config", (dir / "run.toml").string()}).code == 0);
  CHECK(fs::exists(dir / "from_config" / "datasets" / "title.csv"));
  CHECK(run({"build-datasets", "--config", (dir / "run.toml").string(), "--out", (dir / "flag").string()}).code == 0);
  CHECK(fs::exists(dir / "flag" / "datasets" / "title.csv"));
}
