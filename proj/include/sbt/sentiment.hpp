#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace sbt {

// Ordinal encoding is load-bearing: medians and mean signals are computed on
// these integer values.
enum class SentimentClass : int { Negative = 0, Neutral = 1, Positive = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<SentimentClass, kNumClasses> kAllClasses{
    SentimentClass::Negative, SentimentClass::Neutral, SentimentClass::Positive};

constexpr int index_of(SentimentClass c) { return static_cast<int>(c); }
constexpr SentimentClass class_at(int i) { return static_cast<SentimentClass>(i); }

std::string_view to_string(SentimentClass c);
// Accepts "negative" / "neutral" / "positive" (any case) or "0" / "1" / "2".
std::optional<SentimentClass> parse_sentiment(std::string_view text);

// The four per-field datasets built from each article.
enum class Variant { Title, Description, Content, Combination };

inline constexpr std::array<Variant, 4> kAllVariants{Variant::Title, Variant::Description,
                                                     Variant::Content, Variant::Combination};

constexpr std::size_t index_of(Variant v) { return static_cast<std::size_t>(v); }

std::string_view to_string(Variant v);
// Accepts the lowercase names plus "titles" and "combo" as aliases.
std::optional<Variant> parse_variant(std::string_view text);

}  // namespace sbt
