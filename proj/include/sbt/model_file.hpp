#pragma once

// Binary model file:
//
//   "SBTM"                      4 bytes magic
//   version                     u16 little-endian (currently 1)
//   metadata length             u64 little-endian
//   metadata                    UTF-8 JSON: pipeline spec, vocabulary, dims,
//                               family details and the array directory
//   arrays                      f64 little-endian IEEE-754, row-major, in
//                               directory order (idf, SVD components,
//                               singular values, family parameters)
//
// Every double travels as raw bits, so a load reproduces predictions exactly.

#include <sbt/selection.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace sbt::model_file {

inline constexpr char kMagic[4] = {'S', 'B', 'T', 'M'};
inline constexpr std::uint16_t kFormatVersion = 1;

// Pipeline specs as JSON objects; shared with the selection manifest.
nlohmann::json spec_to_json(const selection::PipelineSpec& spec);
// Throws ParseError on unknown names or missing keys.
selection::PipelineSpec spec_from_json(const nlohmann::json& j);

std::string serialize(const selection::Pipeline& pipeline);
// Throws BadMagic, VersionUnsupported, Truncated or ParseError.
selection::Pipeline deserialize(const std::string& bytes);

void save_model(const selection::Pipeline& pipeline, const std::filesystem::path& path);
selection::Pipeline load_model(const std::filesystem::path& path);

}  // namespace sbt::model_file
