#include <sbt/sentiment.hpp>

#include <algorithm>
#include <cctype>
#include <string>

namespace sbt {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(SentimentClass c) {
  switch (c) {
    case SentimentClass::Negative: return "negative";
    case SentimentClass::Neutral: return "neutral";
    case SentimentClass::Positive: return "positive";
  }
  return "neutral";
}

std::optional<SentimentClass> parse_sentiment(std::string_view text) {
  const std::string s = lower(text);
  if (s == "negative" || s == "0") return SentimentClass::Negative;
  if (s == "neutral" || s == "1") return SentimentClass::Neutral;
  if (s == "positive" || s == "2") return SentimentClass::Positive;
  return std::nullopt;
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Title: return "title";
    case Variant::Description: return "description";
    case Variant::Content: return "content";
    case Variant::Combination: return "combination";
  }
  return "title";
}

std::optional<Variant> parse_variant(std::string_view text) {
  const std::string s = lower(text);
  if (s == "title" || s == "titles") return Variant::Title;
  if (s == "description") return Variant::Description;
  if (s == "content") return Variant::Content;
  if (s == "combination" || s == "combo") return Variant::Combination;
  return std::nullopt;
}

}  // namespace sbt
