#pragma once

// Crowdsourced label aggregation and quality control.

#include <sbt/sentiment.hpp>

#include <array>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace sbt::labeling {

struct HitResponse {
  std::string hit_id;
  std::string sample_id;
  Variant dataset_variant = Variant::Title;
  std::string worker_id;
  SentimentClass answer = SentimentClass::Neutral;
  double work_time_seconds = 0.0;
  bool is_gold = false;
  std::optional<SentimentClass> gold_answer;  // present iff is_gold
};

// All answers given for one sample, in response order.
struct ResponseGroup {
  std::string sample_id;
  std::vector<SentimentClass> answers;
};

struct AggregatedLabel {
  std::string sample_id;
  SentimentClass label = SentimentClass::Neutral;
  std::size_t n_responses = 0;
};

struct WorkerStats {
  std::string worker_id;
  std::size_t n_responses = 0;
  double mean_work_time = 0.0;
  std::optional<double> gold_accuracy;  // absent when the worker saw no gold HITs
};

using ClassCounts = std::array<std::size_t, kNumClasses>;

struct WorkerAnswerHistogram {
  std::string worker_id;
  ClassCounts counts{};
};

struct TimeBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

// Response CSV with header hit_id,sample_id,dataset_variant,worker_id,answer,
// work_time_seconds,is_gold,gold_answer.
std::vector<HitResponse> read_responses(std::istream& in);
void write_responses(std::ostream& out, std::span<const HitResponse> responses);

// Groups by sample_id in order of first appearance.
std::vector<ResponseGroup> group_by_sample(std::span<const HitResponse> responses);

// Median of the ordinal encodings. Even-sized groups whose two middle values
// differ resolve to Neutral.
SentimentClass median_label(std::span<const SentimentClass> answers);

std::vector<AggregatedLabel> aggregate_median(std::span<const ResponseGroup> groups);

// One entry per worker, sorted by worker_id.
std::vector<WorkerStats> worker_stats(std::span<const HitResponse> responses);

// Flags a worker when both its gold accuracy and its mean work time fall
// below `fraction` times the respective mean over workers. Gold accuracy is
// averaged over workers that have one; workers without gold are never
// flagged. Returns ids in input order.
std::vector<std::string> screen_cheaters(std::span<const WorkerStats> stats, double fraction = 0.30);

// Fleiss' Kappa over the three sentiment categories. Every group must hold
// exactly n_raters answers. Returns nullopt for the degenerate case where
// every answer falls in a single category (chance agreement is 1).
std::optional<double> fleiss_kappa(std::span<const ResponseGroup> groups, int n_raters);

ClassCounts answer_distribution(std::span<const SentimentClass> labels);

std::vector<WorkerAnswerHistogram> worker_answer_histograms(std::span<const HitResponse> responses);

// Histogram of per-worker mean work times with fixed-width bins starting at 0.
std::vector<TimeBin> work_time_histogram(std::span<const WorkerStats> stats, double bin_width);

}  // namespace sbt::labeling
