#include <sbt/labeling.hpp>

#include <sbt/csv.hpp>
#include <sbt/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <unordered_map>

#include <fmt/format.h>

namespace sbt::labeling {

namespace {

std::optional<bool> parse_bool(std::string_view s) {
  if (s == "1" || s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "0" || s == "false" || s == "False" || s == "FALSE" || s.empty()) return false;
  return std::nullopt;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::vector<HitResponse> read_responses(std::istream& in) {
  static constexpr std::array<std::string_view, 8> kColumns{
      "hit_id", "sample_id", "dataset_variant", "worker_id",
      "answer", "work_time_seconds", "is_gold", "gold_answer"};
  csv::Reader reader(in);
  csv::Row row;
  if (!reader.next(row)) throw Error(ErrorCode::MissingColumn, "response CSV is empty");
  const csv::Header header(row);
  header.require(kColumns, "response CSV");
  std::array<std::size_t, kColumns.size()> col{};
  for (std::size_t i = 0; i < kColumns.size(); ++i) col[i] = header.at(kColumns[i]);

  std::vector<HitResponse> out;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    auto field = [&](std::size_t i) -> std::string_view {
      return col[i] < row.size() ? std::string_view(row[col[i]]) : std::string_view{};
    };
    auto fail = [&](std::string_view what, std::string_view value) {
      return Error(ErrorCode::ParseError,
                   fmt::format("response CSV line {}: bad {} '{}'", reader.line(), what, value));
    };
    HitResponse r;
    r.hit_id = field(0);
    r.sample_id = field(1);
    auto variant = parse_variant(field(2));
    if (!variant) throw fail("dataset_variant", field(2));
    r.dataset_variant = *variant;
    r.worker_id = field(3);
    auto answer = parse_sentiment(field(4));
    if (!answer) throw fail("answer", field(4));
    r.answer = *answer;
    auto time = parse_double(field(5));
    if (!time || !std::isfinite(*time) || *time < 0.0) throw fail("work_time_seconds", field(5));
    r.work_time_seconds = *time;
    auto gold = parse_bool(field(6));
    if (!gold) throw fail("is_gold", field(6));
    r.is_gold = *gold;
    if (!field(7).empty()) {
      r.gold_answer = parse_sentiment(field(7));
      if (!r.gold_answer) throw fail("gold_answer", field(7));
    }
    if (r.is_gold != r.gold_answer.has_value())
      throw fail("is_gold/gold_answer pairing", fmt::format("{}/{}", field(6), field(7)));
    out.push_back(std::move(r));
  }
  return out;
}

void write_responses(std::ostream& out, std::span<const HitResponse> responses) {
  csv::write_row(out, {"hit_id", "sample_id", "dataset_variant", "worker_id", "answer",
                       "work_time_seconds", "is_gold", "gold_answer"});
  for (const auto& r : responses) {
    const std::string time = fmt::format("{}", r.work_time_seconds);
    csv::write_row(out, {r.hit_id, r.sample_id, to_string(r.dataset_variant), r.worker_id,
                         to_string(r.answer), time, r.is_gold ? "true" : "false",
                         r.gold_answer ? to_string(*r.gold_answer) : std::string_view{}});
  }
}

std::vector<ResponseGroup> group_by_sample(std::span<const HitResponse> responses) {
  std::vector<ResponseGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : responses) {
    auto [it, inserted] = index.try_emplace(r.sample_id, groups.size());
    if (inserted) groups.push_back({r.sample_id, {}});
    groups[it->second].answers.push_back(r.answer);
  }
  return groups;
}

SentimentClass median_label(std::span<const SentimentClass> answers) {
  if (answers.empty()) throw Error(ErrorCode::EmptyGroup, "cannot take the median of no answers");
  std::vector<int> v;
  v.reserve(answers.size());
  for (auto a : answers) v.push_back(index_of(a));
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return class_at(v[n / 2]);
  const int lo = v[n / 2 - 1];
  const int hi = v[n / 2];
  return lo == hi ? class_at(lo) : SentimentClass::Neutral;
}

std::vector<AggregatedLabel> aggregate_median(std::span<const ResponseGroup> groups) {
  std::vector<AggregatedLabel> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.answers.empty())
      throw Error(ErrorCode::EmptyGroup, fmt::format("sample '{}' has no responses", g.sample_id));
    out.push_back({g.sample_id, median_label(g.answers), g.answers.size()});
  }
  return out;
}

std::vector<WorkerStats> worker_stats(std::span<const HitResponse> responses) {
  struct Acc {
    std::size_t n = 0;
    double time = 0.0;
    std::size_t gold_seen = 0;
    std::size_t gold_correct = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& r : responses) {
    auto& a = acc[r.worker_id];
    ++a.n;
    a.time += r.work_time_seconds;
    if (r.is_gold && r.gold_answer) {
      ++a.gold_seen;
      if (r.answer == *r.gold_answer) ++a.gold_correct;
    }
  }
  std::vector<WorkerStats> out;
  out.reserve(acc.size());
  for (const auto& [id, a] : acc) {
    WorkerStats s{id, a.n, a.time / static_cast<double>(a.n), std::nullopt};
    if (a.gold_seen > 0)
      s.gold_accuracy = static_cast<double>(a.gold_correct) / static_cast<double>(a.gold_seen);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> screen_cheaters(std::span<const WorkerStats> stats, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, fmt::format("fraction {} outside (0, 1]", fraction));
  if (stats.empty()) return {};

  double time_sum = 0.0;
  double acc_sum = 0.0;
  std::size_t acc_n = 0;
  for (const auto& s : stats) {
    time_sum += s.mean_work_time;
    if (s.gold_accuracy) {
      acc_sum += *s.gold_accuracy;
      ++acc_n;
    }
  }
  if (acc_n == 0) return {};
  const double time_threshold = fraction * (time_sum / static_cast<double>(stats.size()));
  const double acc_threshold = fraction * (acc_sum / static_cast<double>(acc_n));

  std::vector<std::string> flagged;
  for (const auto& s : stats)
    if (s.gold_accuracy && *s.gold_accuracy < acc_threshold && s.mean_work_time < time_threshold)
      flagged.push_back(s.worker_id);
  return flagged;
}

std::optional<double> fleiss_kappa(std::span<const ResponseGroup> groups, int n_raters) {
  if (n_raters < 2)
    throw Error(ErrorCode::TooFewRaters, fmt::format("need at least 2 raters, got {}", n_raters));
  if (groups.empty()) throw Error(ErrorCode::InvalidArgument, "no subjects");

  const auto n = static_cast<double>(n_raters);
  std::array<std::size_t, kNumClasses> totals{};
  double agreement_sum = 0.0;
  for (const auto& g : groups) {
    if (g.answers.size() != static_cast<std::size_t>(n_raters))
      throw Error(ErrorCode::UnevenRaters, fmt::format("sample '{}' has {} responses, expected {}",
                                                       g.sample_id, g.answers.size(), n_raters));
    std::array<std::size_t, kNumClasses> counts{};
    for (auto a : g.answers) ++counts[static_cast<std::size_t>(index_of(a))];
    double sq = 0.0;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      sq += static_cast<double>(counts[j] * counts[j]);
      totals[j] += counts[j];
    }
    agreement_sum += (sq - n) / (n * (n - 1.0));
  }

  const std::size_t total = groups.size() * static_cast<std::size_t>(n_raters);
  if (std::any_of(totals.begin(), totals.end(), [&](std::size_t t) { return t == total; }))
    return std::nullopt;

  double chance = 0.0;
  for (auto t : totals) {
    const double p = static_cast<double>(t) / static_cast<double>(total);
    chance += p * p;
  }
  const double observed = agreement_sum / static_cast<double>(groups.size());
  return (observed - chance) / (1.0 - chance);
}

ClassCounts answer_distribution(std::span<const SentimentClass> labels) {
  ClassCounts counts{};
  for (auto l : labels) ++counts[static_cast<std::size_t>(index_of(l))];
  return counts;
}

std::vector<WorkerAnswerHistogram> worker_answer_histograms(std::span<const HitResponse> responses) {
  std::map<std::string, ClassCounts> acc;
  for (const auto& r : responses) ++acc[r.worker_id][static_cast<std::size_t>(index_of(r.answer))];
  std::vector<WorkerAnswerHistogram> out;
  for (const auto& [id, counts] : acc) out.push_back({id, counts});
  return out;
}

std::vector<TimeBin> work_time_histogram(std::span<const WorkerStats> stats, double bin_width) {
  if (!(bin_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "bin width must be positive");
  if (stats.empty()) return {};
  double max_time = 0.0;
  for (const auto& s : stats) max_time = std::max(max_time, s.mean_work_time);
  const auto n_bins = static_cast<std::size_t>(std::floor(max_time / bin_width)) + 1;
  std::vector<TimeBin> bins(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    bins[i].lower = static_cast<double>(i) * bin_width;
    bins[i].upper = static_cast<double>(i + 1) * bin_width;
  }
  for (const auto& s : stats) {
    const auto i = std::min(n_bins - 1, static_cast<std::size_t>(std::floor(s.mean_work_time / bin_width)));
    ++bins[i].count;
  }
  return bins;
}

}  // namespace sbt::labeling
