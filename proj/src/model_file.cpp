#include <sbt/model_file.hpp>

#include <sbt/error.hpp>

#include <bit>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace sbt::model_file {

using nlohmann::json;

namespace {

struct ArrayEntry {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<double> values;  // row-major
};

ArrayEntry make_array(std::string name, const Eigen::MatrixXd& m) {
  ArrayEntry a{std::move(name), m.rows(), m.cols(), {}};
  a.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.values.push_back(m(r, c));
  return a;
}

ArrayEntry make_vector(std::string name, const Eigen::VectorXd& v) {
  return make_array(std::move(name), Eigen::MatrixXd(v.transpose()));
}

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

json spec_to_json(const selection::PipelineSpec& spec) {
  json model;
  model["family"] = models::to_string(spec.model.family());
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, models::LogRegParams>) {
          model["C"] = p.c;
        } else if constexpr (std::is_same_v<T, models::NaiveBayesParams>) {
          model["alpha"] = p.alpha;
        } else if constexpr (std::is_same_v<T, models::SvmParams>) {
          model["C"] = p.c;
          model["gamma"] = p.gamma;
        } else {
          model["n_clusters"] = p.n_clusters;
        }
      },
      spec.model.params);
  model["class_weighting"] = models::to_string(spec.model.class_weighting);
  model["seed"] = spec.model.seed;

  json j;
  j["dataset_variant"] = to_string(spec.dataset_variant);
  j["vectorizer"] = selection::to_string(spec.vectorizer);
  j["svd_k"] = spec.svd_k ? json(*spec.svd_k) : json(nullptr);
  j["model"] = std::move(model);
  return j;
}

namespace {

[[noreturn]] void bad_metadata(const std::string& what) {
  throw Error(ErrorCode::ParseError, fmt::format("model metadata: {}", what));
}

}  // namespace

selection::PipelineSpec spec_from_json(const json& j) try {
  selection::PipelineSpec spec;
  auto variant = parse_variant(j.at("dataset_variant").get<std::string>());
  auto vectorizer = selection::parse_vectorizer(j.at("vectorizer").get<std::string>());
  if (!variant || !vectorizer) bad_metadata("unknown dataset variant or vectorizer");
  spec.dataset_variant = *variant;
  spec.vectorizer = *vectorizer;
  if (!j.at("svd_k").is_null()) spec.svd_k = j.at("svd_k").get<std::size_t>();

  const json& m = j.at("model");
  const auto family = m.at("family").get<std::string>();
  if (family == "logreg")
    spec.model.params = models::LogRegParams{m.at("C").get<double>()};
  else if (family == "multinomial_nb")
    spec.model.params = models::NaiveBayesParams{m.at("alpha").get<double>()};
  else if (family == "rbf_svm")
    spec.model.params = models::SvmParams{m.at("C").get<double>(), m.at("gamma").get<double>()};
  else if (family == "kmeans")
    spec.model.params = models::KMeansParams{m.at("n_clusters").get<std::size_t>()};
  else
    bad_metadata(fmt::format("unknown family '{}'", family));
  const auto weighting = m.at("class_weighting").get<std::string>();
  if (weighting == "none")
    spec.model.class_weighting = models::ClassWeighting::None;
  else if (weighting == "equal_class")
    spec.model.class_weighting = models::ClassWeighting::EqualClass;
  else
    bad_metadata(fmt::format("unknown class weighting '{}'", weighting));
  spec.model.seed = m.at("seed").get<std::uint64_t>();
  return spec;
} catch (const json::exception& e) {
  bad_metadata(e.what());
}

namespace {

class Cursor {
 public:
  explicit Cursor(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t read_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string read_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  double read_double() { return std::bit_cast<double>(read_le(8)); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorCode::Truncated,
                  fmt::format("model file ends at byte {} while {} more bytes were expected", bytes_.size(),
                              n - (bytes_.size() - pos_)));
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const selection::Pipeline& pipeline) {
  std::vector<ArrayEntry> arrays;
  arrays.push_back(make_vector("idf", pipeline.tfidf.idf));
  if (pipeline.svd) {
    arrays.push_back(make_array("svd_components", pipeline.svd->components));
    arrays.push_back(make_vector("svd_singular_values", pipeline.svd->singular_values));
  }

  json meta;
  meta["format"] = "sbt-model";
  meta["pipeline"] = spec_to_json(pipeline.spec);
  const auto& vocab = pipeline.tfidf.vocabulary;
  meta["vocabulary"] = {{"ngram_range", features::to_string(vocab.ngram_range())},
                        {"tokens", vocab.tokens()},
                        {"document_frequency", vocab.document_frequency()},
                        {"n_documents", vocab.n_documents()}};
  meta["dims"] = {{"input_dim", vocab.size()},
                  {"model_dim", pipeline.model.input_dim()},
                  {"svd_dim", pipeline.svd ? json(pipeline.svd->output_dim()) : json(nullptr)}};
  meta["family"] = models::to_string(pipeline.model.spec.family());

  json family_meta = json::object();
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, models::LogRegModel>) {
          arrays.push_back(make_array("logreg_weights", m.weights));
          arrays.push_back(make_vector("logreg_bias", m.bias));
        } else if constexpr (std::is_same_v<T, models::NaiveBayesModel>) {
          arrays.push_back(make_vector("nb_log_prior", m.log_prior));
          arrays.push_back(make_array("nb_log_likelihood", m.log_likelihood));
        } else if constexpr (std::is_same_v<T, models::SvmModel>) {
          family_meta["gamma_bits"] = std::bit_cast<std::uint64_t>(m.gamma);
          family_meta["input_dim"] = m.input_dim;
          json machines = json::array();
          for (int k = 0; k < kNumClasses; ++k) {
            const auto& mach = m.machines[static_cast<std::size_t>(k)];
            machines.push_back({{"class", to_string(class_at(k))}, {"trained", mach.trained}});
            if (!mach.trained) continue;
            const auto cls = std::string(to_string(class_at(k)));
            arrays.push_back(make_array("svm_" + cls + "_support_vectors", mach.support_vectors));
            arrays.push_back(make_vector("svm_" + cls + "_alpha", mach.alpha));
            arrays.push_back(make_vector("svm_" + cls + "_sign", mach.sign));
            arrays.push_back(make_vector("svm_" + cls + "_upper_bound", mach.upper_bound));
            arrays.push_back(make_vector("svm_" + cls + "_scalars",
                                         Eigen::Vector2d(mach.intercept, mach.kkt_residual)));
          }
          family_meta["machines"] = std::move(machines);
        } else {
          json classes = json::array();
          for (auto c : m.cluster_class) classes.push_back(to_string(c));
          family_meta["cluster_class"] = std::move(classes);
          arrays.push_back(make_array("kmeans_centroids", m.centroids));
        }
      },
      pipeline.model.parameters);
  meta["family_meta"] = std::move(family_meta);

  json directory = json::array();
  for (const auto& a : arrays) directory.push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}});
  meta["arrays"] = std::move(directory);

  const std::string text = meta.dump();
  std::string out(kMagic, sizeof kMagic);
  put_le(out, kFormatVersion, 2);
  put_le(out, text.size(), 8);
  out += text;
  for (const auto& a : arrays)
    for (double v : a.values) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

selection::Pipeline deserialize(const std::string& bytes) {
  Cursor in(bytes);
  if (bytes.size() < sizeof kMagic) throw Error(ErrorCode::Truncated, "model file shorter than its magic");
  if (bytes.compare(0, sizeof kMagic, kMagic, sizeof kMagic) != 0)
    throw Error(ErrorCode::BadMagic, "not a model file (magic bytes differ from SBTM)");
  in.read_bytes(sizeof kMagic);
  const auto version = static_cast<std::uint16_t>(in.read_le(2));
  if (version == 0 || version > kFormatVersion)
    throw Error(ErrorCode::VersionUnsupported,
                fmt::format("model format version {} (this build reads up to {})", version, kFormatVersion));
  const std::uint64_t meta_len = in.read_le(8);
  if (meta_len > in.remaining())
    throw Error(ErrorCode::Truncated, fmt::format("metadata of {} bytes exceeds file size", meta_len));
  const std::string text = in.read_bytes(static_cast<std::size_t>(meta_len));

  json meta;
  try {
    meta = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("model metadata is not valid JSON: {}", e.what()));
  }

  try {
    std::map<std::string, Eigen::MatrixXd> arrays;
    for (const auto& entry : meta.at("arrays")) {
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      if (rows < 0 || cols < 0) bad_metadata("negative array shape");
      if (static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) > in.remaining() / 8)
        throw Error(ErrorCode::Truncated,
                    fmt::format("array '{}' needs {}x{} doubles but the file is shorter",
                                entry.at("name").get<std::string>(), rows, cols));
      Eigen::MatrixXd m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = in.read_double();
      arrays[entry.at("name").get<std::string>()] = std::move(m);
    }
    if (in.remaining() != 0) bad_metadata(fmt::format("{} trailing bytes after the last array", in.remaining()));

    auto take = [&](const std::string& name) -> Eigen::MatrixXd& {
      auto it = arrays.find(name);
      if (it == arrays.end()) bad_metadata(fmt::format("missing array '{}'", name));
      return it->second;
    };
    auto take_vector = [&](const std::string& name) -> Eigen::VectorXd {
      const auto& m = take(name);
      if (m.rows() != 1) bad_metadata(fmt::format("array '{}' is not a vector", name));
      return m.row(0).transpose();
    };

    selection::Pipeline p;
    p.spec = spec_from_json(meta.at("pipeline"));

    const json& v = meta.at("vocabulary");
    const auto range_text = v.at("ngram_range").get<std::string>();
    const auto range =
        range_text == "unigram_bigram" ? features::NgramRange::UnigramBigram : features::NgramRange::Unigram;
    p.tfidf.vocabulary = features::Vocabulary(range, v.at("tokens").get<std::vector<std::string>>(),
                                              v.at("document_frequency").get<std::vector<std::size_t>>(),
                                              v.at("n_documents").get<std::size_t>());
    p.tfidf.idf = take_vector("idf");
    if (static_cast<std::size_t>(p.tfidf.idf.size()) != p.tfidf.vocabulary.size())
      bad_metadata("idf length differs from vocabulary size");
    if (p.spec.svd_k) {
      p.svd = features::SvdTransform{take("svd_components"), take_vector("svd_singular_values")};
      if (p.svd->input_dim() != p.tfidf.vocabulary.size()) bad_metadata("SVD input dimension mismatch");
    }

    p.model.spec = p.spec.model;
    const json& fm = meta.at("family_meta");
    switch (p.spec.model.family()) {
      case models::Family::LogReg:
        p.model.parameters = models::LogRegModel{take("logreg_weights"), take_vector("logreg_bias")};
        break;
      case models::Family::MultinomialNB:
        p.model.parameters = models::NaiveBayesModel{take_vector("nb_log_prior"), take("nb_log_likelihood")};
        break;
      case models::Family::RbfSvm: {
        models::SvmModel m;
        m.gamma = std::bit_cast<double>(fm.at("gamma_bits").get<std::uint64_t>());
        m.input_dim = fm.at("input_dim").get<std::size_t>();
        const auto& machines = fm.at("machines");
        if (machines.size() != kNumClasses) bad_metadata("SVM needs one machine entry per class");
        for (int k = 0; k < kNumClasses; ++k) {
          auto& mach = m.machines[static_cast<std::size_t>(k)];
          mach.trained = machines[static_cast<std::size_t>(k)].at("trained").get<bool>();
          if (!mach.trained) continue;
          const auto cls = std::string(to_string(class_at(k)));
          mach.support_vectors = take("svm_" + cls + "_support_vectors");
          mach.alpha = take_vector("svm_" + cls + "_alpha");
          mach.sign = take_vector("svm_" + cls + "_sign");
          mach.upper_bound = take_vector("svm_" + cls + "_upper_bound");
          const Eigen::VectorXd scalars = take_vector("svm_" + cls + "_scalars");
          if (scalars.size() != 2) bad_metadata("SVM scalars must hold intercept and residual");
          mach.intercept = scalars(0);
          mach.kkt_residual = scalars(1);
        }
        p.model.parameters = std::move(m);
        break;
      }
      case models::Family::KMeans: {
        models::KMeansModel m;
        m.centroids = take("kmeans_centroids");
        for (const auto& c : fm.at("cluster_class")) {
          auto cls = parse_sentiment(c.get<std::string>());
          if (!cls) bad_metadata("bad cluster class");
          m.cluster_class.push_back(*cls);
        }
        if (static_cast<Eigen::Index>(m.cluster_class.size()) != m.centroids.rows())
          bad_metadata("cluster class map does not cover every centroid");
        p.model.parameters = std::move(m);
        break;
      }
    }
    const std::size_t expected_dim = p.svd ? p.svd->output_dim() : p.tfidf.vocabulary.size();
    if (p.model.input_dim() != expected_dim) bad_metadata("model input dimension mismatch");
    return p;
  } catch (const json::exception& e) {
    bad_metadata(e.what());
  }
}

void save_model(const selection::Pipeline& pipeline, const std::filesystem::path& path) {
  const std::string bytes = serialize(pipeline);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot open '{}' for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, fmt::format("failed writing '{}'", path.string()));
}

selection::Pipeline load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open model file '{}'", path.string()));
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace sbt::model_file
