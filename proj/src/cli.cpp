#include <sbt/cli.hpp>

#include <sbt/backtest.hpp>
#include <sbt/corpus.hpp>
#include <sbt/csv.hpp>
#include <sbt/labeling.hpp>
#include <sbt/model_file.hpp>
#include <sbt/parallel.hpp>
#include <sbt/selection.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

namespace sbt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::ifstream open_input(const fs::path& path, std::string_view option) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, fmt::format("--{} is required", option));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot read '{}'", path.string()));
  return in;
}

fs::path variant_file(const fs::path& dir, Variant v, std::string_view extension) {
  return dir / fmt::format("{}{}", to_string(v), extension);
}

std::string fixed(double v, int digits = 4) { return fmt::format("{:.{}f}", v, digits); }

// Dataset rows of one variant with labels from the label-qa output (when
// present) overriding any label column in the dataset file.
selection::LabeledData load_labeled(const RunConfig& config, Variant variant, std::ostream& log) {
  const fs::path dataset_path = variant_file(config.datasets_dir(), variant, ".csv");
  auto in = open_input(dataset_path, "datasets");
  corpus::FeatureDataset dataset = corpus::read_dataset(in, variant);

  const fs::path label_path = variant_file(config.labels_dir(), variant, ".csv");
  if (fs::exists(label_path)) {
    auto lin = open_input(label_path, "labels");
    csv::Reader reader(lin);
    csv::Row row;
    if (!reader.next(row)) throw Error(ErrorCode::MissingColumn, fmt::format("{}: empty file", label_path.string()));
    const csv::Header header(row);
    constexpr std::string_view kColumns[] = {"sample_id", "label"};
    header.require(kColumns, label_path.string());
    std::map<std::string, SentimentClass> labels;
    while (reader.next(row)) {
      if (row.size() == 1 && row[0].empty()) continue;
      const auto id = header.at("sample_id");
      const auto lab = header.at("label");
      if (std::max(id, lab) >= row.size())
        throw Error(ErrorCode::ParseError, fmt::format("{} line {}: too few fields", label_path.string(), reader.line()));
      auto cls = parse_sentiment(row[lab]);
      if (!cls)
        throw Error(ErrorCode::ParseError,
                    fmt::format("{} line {}: bad label '{}'", label_path.string(), reader.line(), row[lab]));
      labels[row[id]] = *cls;
    }
    std::size_t matched = 0;
    for (auto& r : dataset.rows)
      if (auto it = labels.find(r.sample_id); it != labels.end()) {
        r.label = it->second;
        ++matched;
      }
    if (matched < labels.size())
      log << fmt::format("{}: {} labels name samples missing from {}\n", to_string(variant),
                         labels.size() - matched, dataset_path.string());
  }
  return selection::labeled_rows(dataset);
}

// -------------------------------------------------------------- transport

corpus::Transport http_transport(const std::string& endpoint, const std::string& api_key) {
  const auto scheme_end = endpoint.find("://");
  const auto path_start = endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string base = path_start == std::string::npos ? endpoint : endpoint.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
  return [base, path, api_key](const corpus::FetchRequest& req) {
    httplib::Client client(base);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Params params{{"q", req.query},
                           {"from", req.from.to_string()},
                           {"to", req.to.to_string()},
                           {"page", std::to_string(req.page)},
                           {"pageSize", std::to_string(req.page_size)}};
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("X-Api-Key", api_key);
    auto res = client.Get(path, params, headers);
    if (!res) throw Error(ErrorCode::TransportError, fmt::format("{}: {}", base, httplib::to_string(res.error())));
    if (res->status != 200)
      throw Error(ErrorCode::TransportError, fmt::format("{}{} returned HTTP {}", base, path, res->status));
    return res->body;
  };
}

std::vector<corpus::ArticleRecord> fetch_all(const RunConfig& config, std::ostream& log) {
  if (config.fetch_endpoint.empty())
    throw Error(ErrorCode::InvalidArgument, "--fetch needs --fetch-endpoint");
  const auto from = Date::parse(config.fetch_from);
  const auto to = Date::parse(config.fetch_to);
  if (!from || !to) throw Error(ErrorCode::BadDate, "--fetch needs --fetch-from and --fetch-to as YYYY-MM-DD");
  auto in = open_input(config.companies, "companies");
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) throw Error(ErrorCode::MissingColumn, "companies file is empty");
  const csv::Header header(row);
  constexpr std::string_view kColumns[] = {"name", "ticker"};
  header.require(kColumns, config.companies.string());
  const auto transport = http_transport(config.fetch_endpoint, config.api_key);
  std::vector<corpus::ArticleRecord> records;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    const auto name_col = header.at("name");
    const auto ticker_col = header.at("ticker");
    const std::string name = name_col < row.size() ? row[name_col] : std::string{};
    const std::string ticker = ticker_col < row.size() ? row[ticker_col] : std::string{};
    const auto query = corpus::build_query(name, ticker);
    auto fetched = corpus::fetch_articles(query, *from, *to, transport);
    log << fmt::format("fetched {} articles for {}\n", fetched.size(), query.company_id);
    records.insert(records.end(), fetched.begin(), fetched.end());
  }
  return records;
}

// --------------------------------------------------------------- helpers

selection::Metric metric_of(const RunConfig& config) {
  auto m = selection::parse_metric(config.metric);
  if (!m) throw Error(ErrorCode::InvalidArgument, fmt::format("unknown metric '{}'", config.metric));
  return *m;
}

selection::Vectorizer features_1_of(const RunConfig& config) {
  auto v = selection::parse_vectorizer(config.features_1);
  if (!v) throw Error(ErrorCode::InvalidArgument, fmt::format("unknown vectorizer '{}'", config.features_1));
  return *v;
}

std::vector<models::Family> families_of(const RunConfig& config) {
  std::vector<models::Family> out;
  for (const auto& name : config.families) {
    auto it = std::find_if(models::kAllFamilies.begin(), models::kAllFamilies.end(),
                           [&](models::Family f) { return models::to_string(f) == name; });
    if (it == models::kAllFamilies.end())
      throw Error(ErrorCode::InvalidArgument, fmt::format("unknown model family '{}'", name));
    if (std::find(out.begin(), out.end(), *it) == out.end()) out.push_back(*it);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no model families selected");
  std::sort(out.begin(), out.end());
  return out;
}

// Seed for the confirmation round of cross-validation, distinct from the
// grid-search folds.
std::uint64_t confirmation_seed(std::uint64_t seed) { return seed ^ 0xd1b54a32d192ed03ULL; }

json scores_json(const selection::ScoreReport& r) {
  return {{"objective", r.objective()},
          {"selection", {r.selection[0], r.selection[1], r.selection[2]}},
          {"recall", {r.recall[0], r.recall[1], r.recall[2]}}};
}

Date parse_date_option(const std::string& text, std::string_view option) {
  auto d = Date::parse(text);
  if (!d) throw Error(ErrorCode::BadDate, fmt::format("--{} '{}' is not a YYYY-MM-DD date", option, text));
  return *d;
}

}  // namespace

// ---------------------------------------------------------------- commands

void cmd_build_datasets(const RunConfig& config, std::ostream& log) {
  std::vector<corpus::ArticleRecord> records;
  if (config.fetch) {
    records = fetch_all(config, log);
    auto out = open_output(config.out / "articles.csv");
    corpus::write_articles(out, records);
  } else {
    auto in = open_input(config.articles, "articles");
    records = corpus::ingest_articles(in);
  }
  const auto unique = corpus::deduplicate(records);
  log << fmt::format("read {} articles, {} after deduplication ({} duplicates removed)\n", records.size(),
                     unique.size(), records.size() - unique.size());
  const auto datasets = corpus::build_datasets(unique);
  for (const auto& ds : datasets) {
    const auto path = variant_file(config.datasets_dir(), ds.variant, ".csv");
    auto out = open_output(path);
    corpus::write_dataset(out, ds);
    log << fmt::format("wrote {} rows to {}\n", ds.rows.size(), path.string());
  }
}

void cmd_label_qa(const RunConfig& config, std::ostream& log) {
  auto in = open_input(config.responses, "responses");
  const auto responses = labeling::read_responses(in);
  if (responses.empty()) throw Error(ErrorCode::InvalidArgument, fmt::format("{} has no responses", config.responses.string()));

  const auto stats = labeling::worker_stats(responses);
  const auto flagged = labeling::screen_cheaters(stats, config.cheater_fraction);
  std::set<std::string> rejected(config.reject_workers.begin(), config.reject_workers.end());
  if (config.reject_flagged) rejected.insert(flagged.begin(), flagged.end());

  const fs::path qa = config.out / "qa";
  {
    auto out = open_output(qa / "flagged_workers.csv");
    csv::write_row(out, {"worker_id", "n_responses", "mean_work_time", "gold_accuracy", "rejected"});
    for (const auto& id : flagged) {
      const auto& s = *std::find_if(stats.begin(), stats.end(), [&](const auto& w) { return w.worker_id == id; });
      csv::write_row(out, {s.worker_id, std::to_string(s.n_responses), fixed(s.mean_work_time, 3),
                           s.gold_accuracy ? fixed(*s.gold_accuracy) : std::string{},
                           rejected.contains(id) ? "yes" : "no"});
    }
  }
  {
    auto out = open_output(qa / "worker_answers.csv");
    csv::write_row(out, {"worker_id", "negative", "neutral", "positive", "flagged"});
    for (const auto& h : labeling::worker_answer_histograms(responses)) {
      const bool is_flagged = std::find(flagged.begin(), flagged.end(), h.worker_id) != flagged.end();
      csv::write_row(out, {h.worker_id, std::to_string(h.counts[0]), std::to_string(h.counts[1]),
                           std::to_string(h.counts[2]), is_flagged ? "yes" : "no"});
    }
  }

  std::vector<labeling::HitResponse> kept;
  for (const auto& r : responses)
    if (!rejected.contains(r.worker_id)) kept.push_back(r);

  auto time_out = open_output(qa / "work_time_histogram.csv");
  csv::write_row(time_out, {"dataset", "lower", "upper", "workers"});
  auto kappa_out = open_output(qa / "kappa.csv");
  csv::write_row(kappa_out, {"dataset", "kappa", "subjects"});
  auto dist_out = open_output(qa / "label_distribution.csv");
  csv::write_row(dist_out, {"dataset", "source", "negative", "neutral", "positive"});

  for (Variant v : kAllVariants) {
    std::vector<labeling::HitResponse> all_v;
    for (const auto& r : responses)
      if (r.dataset_variant == v) all_v.push_back(r);
    std::vector<labeling::HitResponse> kept_v;
    for (const auto& r : kept)
      if (r.dataset_variant == v) kept_v.push_back(r);

    const auto stats_v = labeling::worker_stats(all_v);
    if (!stats_v.empty())
      for (const auto& bin : labeling::work_time_histogram(stats_v, config.time_bin_seconds))
        csv::write_row(time_out, {std::string(to_string(v)), fixed(bin.lower, 1), fixed(bin.upper, 1),
                                  std::to_string(bin.count)});

    const auto groups = labeling::group_by_sample(kept_v);
    const auto labels = labeling::aggregate_median(groups);
    {
      auto out = open_output(variant_file(config.labels_dir(), v, ".csv"));
      csv::write_row(out, {"sample_id", "label", "n_responses"});
      for (const auto& l : labels)
        csv::write_row(out, {l.sample_id, std::string(to_string(l.label)), std::to_string(l.n_responses)});
    }

    std::vector<labeling::ResponseGroup> full;
    for (const auto& g : groups)
      if (g.answers.size() == static_cast<std::size_t>(config.raters_per_item)) full.push_back(g);
    std::string kappa_text = "n/a";
    if (!full.empty())
      if (auto k = labeling::fleiss_kappa(full, config.raters_per_item)) kappa_text = fixed(*k);
    csv::write_row(kappa_out, {std::string(to_string(v)), kappa_text, std::to_string(full.size())});
    log << fmt::format("{}: {} labeled samples, kappa {} over {} subjects\n", to_string(v), labels.size(),
                       kappa_text, full.size());

    std::vector<SentimentClass> gold;
    std::set<std::string> gold_seen;
    for (const auto& r : all_v)
      if (r.is_gold && gold_seen.insert(r.sample_id).second) gold.push_back(*r.gold_answer);
    std::vector<SentimentClass> aggregated;
    for (const auto& l : labels) aggregated.push_back(l.label);
    for (const auto& [source, values] : {std::pair{"gold", &gold}, std::pair{"aggregate", &aggregated}}) {
      const auto counts = labeling::answer_distribution(*values);
      csv::write_row(dist_out, {std::string(to_string(v)), source, std::to_string(counts[0]),
                                std::to_string(counts[1]), std::to_string(counts[2])});
    }
  }
  log << fmt::format("{} workers, {} flagged", stats.size(), flagged.size());
  for (const auto& id : flagged) log << ' ' << id;
  log << fmt::format(", {} rejected\n", rejected.size());
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  const auto metric = metric_of(config);
  const auto features_1 = features_1_of(config);
  selection::GridDefinition grid{config.logreg_c, config.nb_alpha, config.svm_c, config.svm_gamma,
                                 config.kmeans_n};
  selection::GridOptions options;
  options.folds = config.folds;
  options.seed = config.seed;
  options.metric = metric;
  options.svd_k = config.svd_k;
  options.jobs = config.jobs;
  options.families = families_of(config);
  options.preprocessings = selection::table_columns(features_1);

  std::vector<selection::CellResult> all_cells;
  json manifest;
  manifest["seed"] = config.seed;
  manifest["metric"] = selection::to_string(metric);
  manifest["folds"] = config.folds;
  manifest["pipelines"] = json::array();

  const fs::path dir = config.out / "train";
  auto final_out = open_output(dir / "final_models.csv");
  csv::write_row(final_out, {"dataset", "model_class", "preprocessing", "hyperparameters", "negative", "neutral",
                             "positive", "objective"});
  auto weighting_out = open_output(dir / "weighting.csv");
  csv::write_row(weighting_out, {"dataset", "unweighted_objective", "weighted_objective", "chosen"});
  auto points_out = open_output(dir / "grid_points.csv");
  csv::write_row(points_out, {"dataset", "model_class", "preprocessing", "hyperparameters", "negative", "neutral",
                              "positive", "objective"});

  for (Variant v : kAllVariants) {
    const auto data = load_labeled(config, v, log);
    if (data.size() == 0)
      throw Error(ErrorCode::InvalidArgument, fmt::format("dataset '{}' has no labeled rows", to_string(v)));
    auto cells = selection::grid_search(data, v, grid, options);

    selection::CvOptions confirm;
    confirm.folds = config.folds;
    confirm.seed = confirmation_seed(config.seed);
    confirm.metric = metric;
    confirm.jobs = config.jobs;
    const selection::GridPointResult* chosen = nullptr;
    for (auto& cell : cells) {
      for (const auto& p : cell.evaluated) {
        const auto& s = metric == selection::Metric::SelectionScore ? p.report.selection : p.report.recall;
        csv::write_row(points_out, {std::string(to_string(v)), std::string(models::to_string(p.spec.model.family())),
                                    selection::describe_preprocessing(p.spec), models::describe(p.spec.model.params),
                                    fixed(s[0]), fixed(s[1]), fixed(s[2]), fixed(p.report.objective())});
      }
      if (!cell.best) continue;
      cell.best->report = selection::cross_validate(cell.best->spec, data, confirm);
      if (!chosen || selection::better_candidate(*cell.best, *chosen)) chosen = &*cell.best;
    }
    if (!chosen) throw Error(ErrorCode::InvalidArgument, fmt::format("no model could be trained on '{}'", to_string(v)));

    const auto cmp = selection::compare_equal_weighting(chosen->spec, data, config.seed, metric, config.jobs);
    selection::PipelineSpec final_spec = chosen->spec;
    final_spec.model.class_weighting = cmp.chosen;
    const selection::ScoreReport final_report = cmp.chosen == models::ClassWeighting::EqualClass
                                                    ? selection::cross_validate(final_spec, data, confirm)
                                                    : chosen->report;
    csv::write_row(weighting_out, {std::string(to_string(v)), fixed(cmp.unweighted.objective()),
                                   fixed(cmp.weighted.objective()), std::string(models::to_string(cmp.chosen))});

    const auto& s = final_report.primary();
    csv::write_row(final_out, {std::string(to_string(v)), std::string(models::to_string(final_spec.model.family())),
                               selection::describe_preprocessing(final_spec), models::describe(final_spec.model.params),
                               fixed(s[0]), fixed(s[1]), fixed(s[2]), fixed(final_report.objective())});
    log << fmt::format("{}: {} with {} ({}), objective {:.4f} on {} labeled rows\n", to_string(v),
                       models::to_string(final_spec.model.family()), selection::describe_preprocessing(final_spec),
                       models::describe(final_spec.model.params), final_report.objective(), data.size());

    json entry;
    entry["spec"] = model_file::spec_to_json(final_spec);
    entry["scores"] = scores_json(final_report);
    entry["labeled_rows"] = data.size();
    manifest["pipelines"].push_back(std::move(entry));
    for (auto& c : cells) all_cells.push_back(std::move(c));
  }

  {
    auto out = open_output(dir / "hyperparameters.csv");
    selection::write_hyperparameter_table(out, all_cells, features_1);
  }
  {
    auto out = open_output(dir / "scores_eq1.csv");
    selection::write_score_table(out, all_cells, features_1, selection::Metric::SelectionScore);
  }
  {
    auto out = open_output(dir / "scores_standard_recall.csv");
    selection::write_score_table(out, all_cells, features_1, selection::Metric::StandardRecall);
  }
  auto out = open_output(config.manifest_path());
  out << manifest.dump(2) << '\n';
  log << fmt::format("wrote selection manifest {}\n", config.manifest_path().string());
}

void cmd_finalize(const RunConfig& config, std::ostream& log) {
  const fs::path manifest_path = config.manifest_path();
  if (!fs::exists(manifest_path))
    throw Error(ErrorCode::Io, fmt::format("selection manifest '{}' not found; run train first", manifest_path.string()));
  auto in = open_input(manifest_path, "manifest");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", manifest_path.string(), e.what()));
  }

  std::map<Variant, selection::PipelineSpec> specs;
  try {
    for (const auto& entry : manifest.at("pipelines")) {
      auto spec = model_file::spec_from_json(entry.at("spec"));
      if (!specs.emplace(spec.dataset_variant, spec).second)
        throw Error(ErrorCode::ParseError,
                    fmt::format("{}: two pipelines for '{}'", manifest_path.string(), to_string(spec.dataset_variant)));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", manifest_path.string(), e.what()));
  }
  if (specs.empty()) throw Error(ErrorCode::ParseError, fmt::format("{} lists no pipelines", manifest_path.string()));

  for (const auto& [variant, spec] : specs) {
    const auto path = variant_file(config.models_dir(), variant, ".model");
    if (fs::exists(path) && !config.force)
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("'{}' already exists; pass --force to overwrite", path.string()));
  }
  for (const auto& [variant, spec] : specs) {
    const auto data = load_labeled(config, variant, log);
    const auto pipeline = selection::train_final(spec, data);
    const auto path = variant_file(config.models_dir(), variant, ".model");
    fs::create_directories(path.parent_path());
    model_file::save_model(pipeline, path);
    log << fmt::format("wrote {} ({} on {} rows)\n", path.string(), models::to_string(spec.model.family()),
                       data.size());
  }
}

void cmd_backtest(const RunConfig& config, std::ostream& log) {
  backtest::ModelSet models;
  for (Variant v : kAllVariants) {
    const auto path = variant_file(config.models_dir(), v, ".model");
    if (!fs::exists(path))
      throw Error(ErrorCode::Io, fmt::format("model file '{}' not found; run finalize first", path.string()));
    auto p = model_file::load_model(path);
    if (p.spec.dataset_variant != v)
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("'{}' holds a {} model", path.string(), to_string(p.spec.dataset_variant)));
    models[static_cast<std::size_t>(index_of(v))] = std::move(p);
  }

  auto articles_in = open_input(config.articles, "articles");
  const auto articles = corpus::deduplicate(corpus::ingest_articles(articles_in));
  auto prices_in = open_input(config.prices, "prices");
  const auto prices = backtest::read_prices(prices_in, config.prices.string());
  if (prices.empty()) throw Error(ErrorCode::InsufficientData, "price file has no rows");

  Date first = prices.begin()->second.points().front().date;
  Date last = prices.begin()->second.points().back().date;
  for (const auto& [ticker, series] : prices) {
    first = std::min(first, series.points().front().date);
    last = std::max(last, series.points().back().date);
  }
  const Date start = config.start.empty() ? first : parse_date_option(config.start, "start");
  const Date end = config.end.empty() ? last : parse_date_option(config.end, "end");

  const auto signals = backtest::build_signals(models, articles);
  std::vector<backtest::BenchmarkResult> benchmarks;
  for (const auto& ticker : config.benchmarks) {
    auto it = prices.find(ticker);
    if (it == prices.end())
      throw Error(ErrorCode::InvalidArgument, fmt::format("benchmark '{}' has no prices", ticker));
    benchmarks.push_back({ticker, backtest::benchmark_roi(it->second, start, end)});
  }

  const fs::path dir = config.out / "backtest";
  std::vector<backtest::BacktestReport> reports;
  auto dist_out = open_output(dir / "roi_distribution.csv");
  csv::write_row(dist_out, {"min_articles", "company_id", "ticker", "articles", "trips", "roi"});
  for (std::size_t min_articles : config.min_articles) {
    const auto ledgers = backtest::run_backtest(prices, signals, min_articles, start, end, config.jobs);
    auto report = backtest::make_report(ledgers, signals, min_articles, start, end);
    report.benchmarks = benchmarks;
    {
      auto out = open_output(dir / fmt::format("report_min{}.csv", min_articles));
      backtest::write_report_csv(out, report);
    }
    {
      auto out = open_output(dir / fmt::format("report_min{}.json", min_articles));
      backtest::write_report_json(out, report);
    }
    for (const auto& a : report.assets)
      csv::write_row(dist_out, {std::to_string(min_articles), a.company_id, a.ticker, std::to_string(a.articles),
                                std::to_string(a.trips), fmt::format("{:.6f}", a.roi)});
    if (report.summary)
      log << fmt::format("min_articles {}: {} assets, avg ROI {:.2f}%\n", min_articles, report.assets.size(),
                         100.0 * report.summary->avg_roi);
    else
      log << fmt::format("min_articles {}: no assets pass the article filter\n", min_articles);
    reports.push_back(std::move(report));
  }
  {
    auto out = open_output(dir / "statistics.csv");
    backtest::write_statistics_table(out, reports);
  }
  for (const auto& b : benchmarks) log << fmt::format("benchmark {}: {:.2f}%\n", b.ticker, 100.0 * b.roi);

  for (const auto& ticker : config.charts) {
    auto price_it = prices.find(ticker);
    if (price_it == prices.end())
      throw Error(ErrorCode::InvalidArgument, fmt::format("chart ticker '{}' has no prices", ticker));
    auto sig_it = std::find_if(signals.begin(), signals.end(), [&](const auto& kv) {
      return kv.second.price_key() == ticker || kv.first == ticker;
    });
    const backtest::SentimentSignal empty{ticker, ticker, {}};
    const auto rows =
        backtest::emit_chart_data(price_it->second, sig_it == signals.end() ? empty : sig_it->second, start, end);
    auto out = open_output(dir / fmt::format("chart_{}.csv", ticker));
    backtest::write_chart_csv(out, rows);
  }
}

int exit_code_for(ErrorCode code) { return code == ErrorCode::NonConvergence ? 3 : 2; }

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig config;
  config.jobs = 0;
  CLI::App app{"Sentiment classification and sentiment-signal backtesting"};
  app.set_config("--config", "", "key=value configuration file (command-line flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--seed", config.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--jobs", config.jobs, "Worker threads (0 = all cores)");
  app.add_option("--out", config.out, "Output directory")->capture_default_str();
  app.add_option("--articles", config.articles, "Article CSV");
  app.add_option("--responses", config.responses, "Crowdsourced response CSV");
  app.add_option("--prices", config.prices, "Price CSV (ticker,date,close)");
  app.add_option("--datasets", config.datasets, "Dataset directory (default <out>/datasets)");
  app.add_option("--labels", config.labels, "Aggregated label directory (default <out>/labels)");
  app.add_option("--manifest", config.manifest, "Selection manifest (default <out>/train/selection.json)");
  app.add_option("--model-dir", config.model_dir, "Model directory (default <out>/models)");

  app.add_option("--cheater-fraction", config.cheater_fraction, "Screener fraction of the mean")->capture_default_str();
  app.add_option("--time-bin", config.time_bin_seconds, "Work-time histogram bin width (s)")->capture_default_str();
  app.add_option("--raters", config.raters_per_item, "Answers per item used for kappa")->capture_default_str();
  app.add_flag("--reject-flagged", config.reject_flagged, "Drop flagged workers before aggregating");
  app.add_option("--reject", config.reject_workers, "Worker ids to drop before aggregating")->delimiter(',');

  app.add_option("--folds", config.folds, "Cross-validation folds")->capture_default_str();
  app.add_option("--svd-k", config.svd_k, "SVD dimensions")->capture_default_str();
  app.add_option("--metric", config.metric, "eq1 or standard-recall")->capture_default_str();
  app.add_option("--features-1", config.features_1, "Vectorizer shown as features_1")->capture_default_str();
  app.add_option("--families", config.families, "Model families to search")->delimiter(',');
  app.add_option("--grid-logreg-c", config.logreg_c, "Logistic regression C grid")->delimiter(',');
  app.add_option("--grid-nb-alpha", config.nb_alpha, "Naive Bayes alpha grid")->delimiter(',');
  app.add_option("--grid-svm-c", config.svm_c, "SVM C grid")->delimiter(',');
  app.add_option("--grid-svm-gamma", config.svm_gamma, "SVM gamma grid")->delimiter(',');
  app.add_option("--grid-kmeans-n", config.kmeans_n, "K-Means cluster-count grid")->delimiter(',');

  app.add_option("--min-articles", config.min_articles, "Article-count filters")->delimiter(',');
  app.add_option("--start", config.start, "Backtest start date");
  app.add_option("--end", config.end, "Backtest end date");
  app.add_option("--benchmarks", config.benchmarks, "Index tickers in the price file")->delimiter(',');
  app.add_option("--chart", config.charts, "Tickers to emit chart data for")->delimiter(',');

  app.add_option("--fetch-endpoint", config.fetch_endpoint, "News API endpoint URL");
  app.add_option("--api-key", config.api_key, "News API key");
  app.add_option("--companies", config.companies, "Company CSV (name,ticker) for --fetch");
  app.add_option("--fetch-from", config.fetch_from, "First fetch date");
  app.add_option("--fetch-to", config.fetch_to, "Last fetch date");

  auto* build = app.add_subcommand("build-datasets", "Build the four text datasets from articles");
  build->add_flag("--fetch", config.fetch, "Download articles over HTTP first");
  auto* label = app.add_subcommand("label-qa", "Aggregate crowdsourced labels and report quality checks");
  auto* train = app.add_subcommand("train", "Grid search, cross-validate and select a pipeline per dataset");
  auto* finalize = app.add_subcommand("finalize", "Retrain selected pipelines on all rows and save them");
  finalize->add_flag("--force", config.force, "Overwrite existing model files");
  auto* run = app.add_subcommand("backtest", "Trade on daily sentiment signals");
  for (auto* sub : {build, label, train, finalize, run}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }
  if (config.jobs == 0) config.jobs = default_jobs();

  try {
    if (build->parsed()) cmd_build_datasets(config, out);
    if (label->parsed()) cmd_label_qa(config, out);
    if (train->parsed()) cmd_train(config, out);
    if (finalize->parsed()) cmd_finalize(config, out);
    if (run->parsed()) cmd_backtest(config, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sbt::cli
