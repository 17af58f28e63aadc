#pragma once

#include <sbt/error.hpp>
#include <sbt/models.hpp>

#include <cmath>
#include <span>

#include <fmt/format.h>

namespace sbt::models::detail {

inline void check_rows(const FeatureMatrix& x, std::span<const SentimentClass> y,
                       std::span<const double> w) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorCode::LengthMismatch,
                fmt::format("{} feature rows but {} labels", x.rows(), y.size()));
  if (!w.empty() && w.size() != y.size())
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} weights but {} labels", w.size(), y.size()));
  for (double v : w)
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorCode::InvalidArgument, fmt::format("sample weight {} is not positive", v));
  if (y.empty()) throw Error(ErrorCode::InvalidArgument, "no training samples");
}

inline std::array<bool, kNumClasses> present_classes(std::span<const SentimentClass> y) {
  std::array<bool, kNumClasses> present{};
  for (auto c : y) present[static_cast<std::size_t>(index_of(c))] = true;
  return present;
}

inline void require_two_classes(std::span<const SentimentClass> y, std::string_view family) {
  auto present = present_classes(y);
  int n = 0;
  for (bool p : present) n += p;
  if (n < 2)
    throw Error(ErrorCode::SingleClass,
                fmt::format("{} needs at least two classes in the training labels", family));
}

inline double weight_at(std::span<const double> w, std::size_t i) { return w.empty() ? 1.0 : w[i]; }

inline void check_positive(double v, std::string_view name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw Error(ErrorCode::InvalidArgument, fmt::format("{} must be positive, got {}", name, v));
}

}  // namespace sbt::models::detail
