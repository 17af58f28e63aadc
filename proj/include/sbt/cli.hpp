#pragma once

#include <sbt/error.hpp>

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace sbt::cli {

inline constexpr std::uint64_t kDefaultSeed = 20200309;

// Everything a subcommand reads. Paths left empty fall back to locations
// under `out`.
struct RunConfig {
  std::uint64_t seed = kDefaultSeed;
  unsigned jobs = 1;
  std::filesystem::path out = "out";

  std::filesystem::path articles;
  std::filesystem::path responses;
  std::filesystem::path prices;
  std::filesystem::path datasets;   // default <out>/datasets
  std::filesystem::path labels;     // default <out>/labels
  std::filesystem::path manifest;   // default <out>/train/selection.json
  std::filesystem::path model_dir;  // default <out>/models

  // label-qa
  double cheater_fraction = 0.30;
  double time_bin_seconds = 5.0;
  int raters_per_item = 3;
  bool reject_flagged = false;
  std::vector<std::string> reject_workers;

  // train
  std::size_t folds = 10;
  std::size_t svd_k = 100;
  std::string metric = "eq1";
  std::string features_1 = "unigram_bigram";
  std::vector<std::string> families{"logreg", "multinomial_nb", "rbf_svm", "kmeans"};
  std::vector<double> logreg_c{1e-5, 1e-4, 1e-3, 0.01, 0.1, 1, 10, 100};
  std::vector<double> nb_alpha{0.01, 0.1, 1, 10, 100};
  std::vector<double> svm_c{1e-5, 1e-4, 1e-3, 0.01, 0.1, 1, 10, 100};
  std::vector<double> svm_gamma{1e-8, 1e-4, 0.01, 1, 10};
  std::vector<std::size_t> kmeans_n{3, 4, 5};

  // finalize
  bool force = false;

  // backtest
  std::vector<std::size_t> min_articles{150};
  std::string start;  // default: first price date
  std::string end;    // default: last price date
  std::vector<std::string> benchmarks;
  std::vector<std::string> charts;

  // build-datasets --fetch
  bool fetch = false;
  std::string fetch_endpoint;
  std::string api_key;
  std::filesystem::path companies;
  std::string fetch_from;
  std::string fetch_to;

  std::filesystem::path datasets_dir() const { return datasets.empty() ? out / "datasets" : datasets; }
  std::filesystem::path labels_dir() const { return labels.empty() ? out / "labels" : labels; }
  std::filesystem::path manifest_path() const {
    return manifest.empty() ? out / "train" / "selection.json" : manifest;
  }
  std::filesystem::path models_dir() const { return model_dir.empty() ? out / "models" : model_dir; }
};

void cmd_build_datasets(const RunConfig& config, std::ostream& log);
void cmd_label_qa(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_finalize(const RunConfig& config, std::ostream& log);
void cmd_backtest(const RunConfig& config, std::ostream& log);

// 2 for input and configuration errors, 3 for NonConvergence.
int exit_code_for(ErrorCode code);

// Parses arguments, dispatches the subcommand and maps failures to exit
// codes. Messages go to `err`, progress to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sbt::cli
