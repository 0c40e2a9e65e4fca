#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "comment_judge/ann.hpp"
#include "comment_judge/dataset_io.hpp"
#include "comment_judge/error.hpp"
#include "comment_judge/feature_vector.hpp"
#include "comment_judge/pipeline.hpp"
#include "comment_judge/svm.hpp"

namespace comment_judge {

using AnyModel = std::variant<LinearSvmModel, KernelSvmModel, MlpModel>;

inline constexpr std::string_view model_kind(const AnyModel& m) noexcept {
  switch (m.index()) {
    case 0: return "svm-linear";
    case 1: return "svm-poly";
    default: return "mlp";
  }
}

inline Label predict(const AnyModel& model, const FeatureVector& x) {
  return std::visit(
      [&](const auto& m) -> Label {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, MlpModel>) {
          return predict(m, x);
        } else {
          return m.predict(x);
        }
      },
      model);
}

class PipelineMismatch : public DataError {
 public:
  using DataError::DataError;
};

/// A trained model plus what is needed to use it safely: the feature width
/// and the fingerprint of the pipeline that produced its inputs.
struct ModelContainer {
  AnyModel model;
  std::size_t feature_width = 0;
  std::string pipeline_fingerprint;
  nlohmann::json training_config = nlohmann::json::object();

  /// Throws PipelineMismatch unless `pipeline` is the one the model was trained with.
  void require_pipeline(const FeaturePipeline& pipeline) const {
    const auto fp = pipeline.fingerprint();
    if (fp != pipeline_fingerprint || pipeline.width() != feature_width) {
      throw PipelineMismatch("feature pipeline fingerprint " + fp + " does not match the model's " +
                             pipeline_fingerprint +
                             "; the model must be used with the pipeline it was trained with");
    }
  }
};

namespace detail {

inline nlohmann::json vector_to_json(const FeatureVector& x) {
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  for (const auto& e : x.sparse()) {
    idx.push_back(e.index);
    val.push_back(e.value);
  }
  return {{"sparse_width", x.sparse_width()},
          {"indices", idx},
          {"values", val},
          {"dense", std::vector<double>(x.dense().begin(), x.dense().end())}};
}

inline FeatureVector vector_from_json(const nlohmann::json& j) {
  const auto idx = j.at("indices").get<std::vector<std::uint32_t>>();
  const auto val = j.at("values").get<std::vector<double>>();
  if (idx.size() != val.size()) throw DataError("support vector index/value length mismatch");
  std::vector<FeatureVector::Entry> sparse;
  for (std::size_t k = 0; k < idx.size(); ++k) sparse.push_back({idx[k], val[k]});
  return FeatureVector(j.at("sparse_width").get<std::size_t>(), std::move(sparse),
                       j.at("dense").get<std::vector<double>>());
}

inline nlohmann::json params_to_json(const LinearSvmModel& m) {
  return {{"w", m.w}, {"b", m.b}, {"lambda", m.lambda}};
}

inline nlohmann::json params_to_json(const KernelSvmModel& m) {
  nlohmann::json svs = nlohmann::json::array();
  for (const auto& sv : m.support_vectors) {
    svs.push_back({{"x", vector_to_json(sv.x)}, {"label", std::string(to_string(sv.label))}, {"alpha", sv.alpha}});
  }
  return {{"kernel", {{"degree", m.kernel.degree}, {"coef0", m.kernel.coef0}, {"scale", m.kernel.scale}}},
          {"b", m.b},
          {"lambda", m.lambda},
          {"support_vectors", svs}};
}

inline nlohmann::json params_to_json(const MlpModel& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"inputs", l.inputs}, {"outputs", l.outputs}, {"weights", l.weights}, {"bias", l.bias}});
  }
  return {{"activation", std::string(to_string(m.hidden_activation))}, {"output_activation", "logistic"},
          {"layers", layers}};
}

inline AnyModel params_from_json(std::string_view kind, const nlohmann::json& p) {
  if (kind == "svm-linear") {
    LinearSvmModel m;
    m.w = p.at("w").get<std::vector<double>>();
    m.b = p.at("b").get<double>();
    m.lambda = p.at("lambda").get<double>();
    return m;
  }
  if (kind == "svm-poly") {
    KernelSvmModel m;
    const auto& k = p.at("kernel");
    m.kernel = {k.at("degree").get<int>(), k.at("coef0").get<double>(), k.at("scale").get<double>()};
    m.b = p.at("b").get<double>();
    m.lambda = p.at("lambda").get<double>();
    for (const auto& sv : p.at("support_vectors")) {
      auto label = parse_label(sv.at("label").get<std::string>());
      if (!label) throw DataError("bad support vector label");
      const double alpha = sv.at("alpha").get<double>();
      if (!(alpha >= 0.0)) throw DataError("negative support vector coefficient");
      m.support_vectors.push_back({vector_from_json(sv.at("x")), *label, alpha});
    }
    if (m.support_vectors.empty()) throw DataError("kernel model has no support vectors");
    return m;
  }
  if (kind == "mlp") {
    MlpModel m;
    auto act = parse_activation(p.at("activation").get<std::string>());
    if (!act) throw DataError("unknown activation");
    m.hidden_activation = *act;
    for (const auto& l : p.at("layers")) {
      DenseLayer layer;
      layer.inputs = l.at("inputs").get<std::size_t>();
      layer.outputs = l.at("outputs").get<std::size_t>();
      layer.weights = l.at("weights").get<std::vector<double>>();
      layer.bias = l.at("bias").get<std::vector<double>>();
      m.layers.push_back(std::move(layer));
    }
    m.check_shape();
    return m;
  }
  throw DataError("unknown model kind \"" + std::string(kind) + "\"");
}

}  // namespace detail

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const ModelContainer& c) {
  nlohmann::json j;
  j["format"] = "comment-judge-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = std::string(model_kind(c.model));
  j["feature_width"] = c.feature_width;
  j["pipeline_fingerprint"] = c.pipeline_fingerprint;
  j["training_config"] = c.training_config;
  j["params"] = std::visit([](const auto& m) { return detail::params_to_json(m); }, c.model);
  return j;
}

inline ModelContainer model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "comment-judge-model") throw DataError("not a comment-judge model file");
    if (j.at("version") != kModelFormatVersion) {
      throw DataError("unsupported model file version " + j.at("version").dump());
    }
    ModelContainer c;
    c.model = detail::params_from_json(j.at("kind").get<std::string>(), j.at("params"));
    c.feature_width = j.at("feature_width").get<std::size_t>();
    c.pipeline_fingerprint = j.at("pipeline_fingerprint").get<std::string>();
    c.training_config = j.value("training_config", nlohmann::json::object());
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const ModelContainer& c, const std::filesystem::path& path) {
  write_file(path, to_json(c).dump(1) + "\n");
}

inline ModelContainer load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed model file " + path.string() + ": " + e.what());
  }
}

inline void save_pipeline(const FeaturePipeline& p, const std::filesystem::path& path) {
  write_file(path, pipeline_to_json(p).dump(1) + "\n");
}

inline FeaturePipeline load_pipeline(const std::filesystem::path& path,
                                     std::shared_ptr<const EmbeddingTable> embeddings = nullptr) {
  try {
    return pipeline_from_json(nlohmann::json::parse(read_file(path)), std::move(embeddings));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed pipeline file " + path.string() + ": " + e.what());
  }
}

}  // namespace comment_judge
