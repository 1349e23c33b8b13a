#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "hmmn/data.hpp"
#include "hmmn/gradients.hpp"
#include "hmmn/training.hpp"

// All machine-readable file formats in one place: dataset JSON, checkpoints,
// metrics, attention traces. Every document is versioned with a "schema"
// field and serialized with ordered keys, so identical inputs produce
// byte-identical files.

namespace hmmn {

using Json = nlohmann::ordered_json;

inline constexpr int kDatasetSchema = 1;
inline constexpr int kCheckpointSchema = 1;
inline constexpr int kMetricsSchema = 1;
inline constexpr int kTraceSchema = 1;

namespace detail {

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw SchemaError("write to '" + path + "' failed");
}

inline Json parse_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(std::string(what) + ": cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string(what) + ": '" + path + "': " + e.what());
  }
}

inline void expect_schema(const Json& j, int version, const char* what) {
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_number_integer())
    throw SchemaError(std::string(what) + ": missing schema field");
  if (j["schema"].get<int>() != version)
    throw SchemaError(std::string(what) + ": unsupported schema version " +
                      j["schema"].dump() + " (expected " + std::to_string(version) + ")");
}

template <typename T>
Json matrix_to_json(const Matrix<T>& m) {
  Json j = Json::object();
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  Json data = Json::array();
  for (const T& x : m.data()) data.push_back(static_cast<double>(x));
  j["data"] = std::move(data);  // column-major
  return j;
}

template <typename T>
Matrix<T> matrix_from_json(const Json& j, const char* what) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw SchemaError(std::string(what) + ": malformed matrix");
  Matrix<T> m(j["rows"].get<std::size_t>(), j["cols"].get<std::size_t>());
  const auto& data = j["data"];
  if (!data.is_array() || data.size() != m.data().size())
    throw SchemaError(std::string(what) + ": matrix data length mismatch");
  for (std::size_t i = 0; i < m.data().size(); ++i)
    m.data()[i] = static_cast<T>(data[i].get<double>());
  return m;
}

}  // namespace detail

// --- generator / trainer config echoes --------------------------------------

inline Json synthetic_config_to_json(const SyntheticConfig& cfg) {
  Json j = Json::object();
  j["instances"] = cfg.instances;
  j["sentences"] = cfg.sentences;
  j["frames"] = cfg.frames;
  j["regions"] = cfg.regions;
  j["vocab_size"] = cfg.vocab_size;
  j["tokens_per_sentence"] = cfg.tokens_per_sentence;
  j["d"] = cfg.d;
  j["d_w"] = cfg.d_w;
  j["d_r"] = cfg.d_r;
  j["cue_strength"] = cfg.cue_strength;
  j["mode"] = to_string(cfg.mode);
  j["seed"] = cfg.seed;
  j["name"] = cfg.name;
  return j;
}

inline SyntheticConfig synthetic_config_from_json(const Json& j) {
  SyntheticConfig cfg;
  try {
    cfg.instances = j.at("instances").get<std::size_t>();
    cfg.sentences = j.at("sentences").get<std::size_t>();
    cfg.frames = j.at("frames").get<std::size_t>();
    cfg.regions = j.at("regions").get<std::size_t>();
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.tokens_per_sentence = j.at("tokens_per_sentence").get<std::size_t>();
    cfg.d = j.at("d").get<std::size_t>();
    cfg.d_w = j.at("d_w").get<std::size_t>();
    cfg.d_r = j.at("d_r").get<std::size_t>();
    cfg.cue_strength = j.at("cue_strength").get<double>();
    cfg.mode = parse_cue_mode(j.at("mode").get<std::string>());
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.name = j.at("name").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("generator config: ") + e.what());
  }
  return cfg;
}

template <typename T>
Json train_config_to_json(const TrainConfig<T>& cfg) {
  Json j = Json::object();
  j["lr"] = static_cast<double>(cfg.lr);
  j["batch"] = cfg.batch;
  j["epochs"] = cfg.epochs;
  j["patience"] = cfg.patience;
  j["seed"] = cfg.seed;
  j["variant"] = to_string(cfg.variant);
  j["lambda"] = static_cast<double>(cfg.lambda);
  j["hops"] = cfg.hops;
  j["d"] = cfg.d;
  j["d_w"] = cfg.d_w;
  j["d_r"] = cfg.d_r;
  j["optimizer"] = to_string(cfg.optimizer);
  j["clip_norm"] = static_cast<double>(cfg.clip_norm);
  j["affinity"] = cfg.affinity == AffinityMode::answer_dot ? "answer-dot" : "retrieval-norm";
  j["normalize_coattention"] = cfg.normalize_coattention;
  j["float64"] = sizeof(T) == sizeof(double);
  return j;
}

inline std::string config_hash(const Json& config) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

// --- dataset -----------------------------------------------------------------

template <typename T>
Json dataset_to_json(const Dataset<T>& data) {
  Json j = Json::object();
  j["schema"] = kDatasetSchema;
  Json meta = Json::object();
  meta["name"] = data.name;
  meta["seed"] = data.seed;
  if (data.generator) meta["generator"] = synthetic_config_to_json(*data.generator);
  if (data.imported) {
    Json imp = Json::object();
    imp["subtitle_window_seconds"] = data.imported->subtitle_window_seconds;
    imp["frames_per_clip"] = data.imported->frames_per_clip;
    meta["import"] = std::move(imp);
  }
  j["meta"] = std::move(meta);
  j["vocab_ref"] = data.vocab_ref;
  Json instances = Json::array();
  for (const auto& inst : data.instances) {
    Json ji = Json::object();
    ji["q"] = inst.question;
    Json answers = Json::array();
    for (const auto& a : inst.answers) answers.push_back(a);
    ji["answers"] = std::move(answers);
    ji["subtitles"] = inst.subtitles;
    Json frames = Json::array();
    for (const auto& frame : inst.frames) {
      Json regions = Json::array();
      for (const auto& region : frame) {
        Json vec = Json::array();
        for (const T& x : region) vec.push_back(static_cast<double>(x));
        regions.push_back(std::move(vec));
      }
      frames.push_back(std::move(regions));
    }
    ji["frames"] = std::move(frames);
    ji["gold"] = inst.gold;
    instances.push_back(std::move(ji));
  }
  j["instances"] = std::move(instances);
  return j;
}

template <typename T>
void save_dataset(const Dataset<T>& data, const std::string& path) {
  detail::write_text_file(path, dataset_to_json(data).dump(2) + "\n");
}

template <typename T>
Dataset<T> dataset_from_json(const Json& j) {
  detail::expect_schema(j, kDatasetSchema, "dataset");
  Dataset<T> data;
  try {
    const Json& meta = j.at("meta");
    data.name = meta.at("name").get<std::string>();
    data.seed = meta.at("seed").get<std::uint64_t>();
    if (meta.contains("generator"))
      data.generator = synthetic_config_from_json(meta["generator"]);
    if (meta.contains("import")) {
      ImportConventions imp;
      imp.subtitle_window_seconds = meta["import"].at("subtitle_window_seconds").get<double>();
      imp.frames_per_clip = meta["import"].at("frames_per_clip").get<std::size_t>();
      data.imported = imp;
    }
    data.vocab_ref = j.at("vocab_ref").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("dataset meta: ") + e.what());
  }

  const Json& instances = j.contains("instances") ? j["instances"] : Json();
  if (!instances.is_array()) throw SchemaError("dataset: 'instances' must be an array");
  for (std::size_t idx = 0; idx < instances.size(); ++idx) {
    const Json& ji = instances[idx];
    const std::string where = "dataset instance " + std::to_string(idx);
    try {
      RawInstance<T> inst;
      inst.question = ji.at("q").get<std::vector<std::string>>();
      const Json& answers = ji.at("answers");
      if (!answers.is_array() || answers.size() != kAnswerChoices)
        throw SchemaError(where + ": expected exactly 5 answer choices");
      for (std::size_t k = 0; k < kAnswerChoices; ++k)
        inst.answers[k] = answers[k].get<std::vector<std::string>>();
      inst.subtitles = ji.at("subtitles").get<std::vector<std::vector<std::string>>>();
      if (inst.subtitles.empty()) throw SchemaError(where + ": no subtitle sentences");

      const Json& frames = ji.at("frames");
      if (!frames.is_array() || frames.empty())
        throw SchemaError(where + ": no frames");
      std::size_t d_r = 0;
      for (const Json& frame : frames) {
        std::vector<Vector<T>> regions;
        if (!frame.is_array() || frame.empty())
          throw SchemaError(where + ": frame without regions");
        for (const Json& region : frame) {
          Vector<T> vec;
          for (const Json& x : region) vec.push_back(static_cast<T>(x.get<double>()));
          if (d_r == 0) d_r = vec.size();
          if (vec.empty() || vec.size() != d_r)
            throw SchemaError(where + ": inconsistent region feature length");
          regions.push_back(std::move(vec));
        }
        inst.frames.push_back(std::move(regions));
      }
      inst.gold = ji.at("gold").get<int>();
      if (inst.gold < 0 || inst.gold >= kAnswerChoices)
        throw SchemaError(where + ": gold index out of range");
      data.instances.push_back(std::move(inst));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(where + ": " + e.what());
    }
  }
  return data;
}

template <typename T>
Dataset<T> load_dataset(const std::string& path) {
  return dataset_from_json<T>(detail::parse_file(path, "dataset"));
}

// --- checkpoints ---------------------------------------------------------------

template <typename T>
void save_checkpoint(const ModelParams<T>& params, const Variant& variant,
                     const Json& config, const std::string& path) {
  Json j = Json::object();
  j["schema"] = kCheckpointSchema;
  j["variant"] = to_string(variant);
  Json dims = Json::object();
  dims["d"] = params.d();
  dims["d_w"] = params.d_w();
  dims["d_r"] = params.d_r();
  j["dims"] = std::move(dims);
  j["lambda"] = static_cast<double>(params.lambda);
  j["hops"] = params.hops;
  j["config_hash"] = config_hash(config);
  j["config"] = config;
  j["W1"] = detail::matrix_to_json(params.W1);
  j["W2"] = detail::matrix_to_json(params.W2);
  detail::write_text_file(path, j.dump(2) + "\n");
}

template <typename T>
struct Checkpoint {
  ModelParams<T> params;
  Variant variant;
  Json config;
};

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  Json j = detail::parse_file(path, "checkpoint");
  detail::expect_schema(j, kCheckpointSchema, "checkpoint");
  Checkpoint<T> ckpt;
  try {
    ckpt.variant = parse_variant(j.at("variant").get<std::string>());
    ckpt.params.lambda = static_cast<T>(j.at("lambda").get<double>());
    ckpt.params.hops = j.at("hops").get<std::size_t>();
    ckpt.params.W1 = detail::matrix_from_json<T>(j.at("W1"), "checkpoint W1");
    ckpt.params.W2 = detail::matrix_from_json<T>(j.at("W2"), "checkpoint W2");
    if (j.contains("config")) ckpt.config = j["config"];
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
  ckpt.params.validate();
  return ckpt;
}

// --- metrics -------------------------------------------------------------------

template <typename T>
Json metrics_to_json(const Metrics<T>& m, const Json& config) {
  Json j = Json::object();
  j["schema"] = kMetricsSchema;
  j["config"] = config;
  j["accuracy"] = m.accuracy;
  j["correct"] = m.correct;
  j["total"] = m.total;
  Json types = Json::object();
  for (const auto& [type, bucket] : m.per_type) {
    Json b = Json::object();
    b["correct"] = bucket.first;
    b["total"] = bucket.second;
    b["accuracy"] = bucket.second == 0
                        ? 0.0
                        : static_cast<double>(bucket.first) /
                              static_cast<double>(bucket.second);
    types[type] = std::move(b);
  }
  j["per_type"] = std::move(types);
  if (m.best_epoch > 0) j["best_epoch"] = m.best_epoch;
  if (!m.history.empty()) {
    Json hist = Json::array();
    for (std::size_t e = 0; e < m.history.size(); ++e) {
      Json row = Json::object();
      row["epoch"] = e + 1;
      row["train_loss"] = static_cast<double>(m.history[e].train_loss);
      row["dev_accuracy"] = m.history[e].dev_accuracy;
      hist.push_back(std::move(row));
    }
    j["history"] = std::move(hist);
  }
  return j;
}

// Aligned plain-text table for terminals.
template <typename T>
std::string metrics_table(const Metrics<T>& m) {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-8s %8s %8s %10s\n", "type", "correct", "total",
                "accuracy");
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-8s %8zu %8zu %10.4f\n", "overall", m.correct,
                m.total, m.accuracy);
  out += buf;
  for (const auto& [type, bucket] : m.per_type) {
    double acc = bucket.second == 0 ? 0.0
                                    : static_cast<double>(bucket.first) /
                                          static_cast<double>(bucket.second);
    std::snprintf(buf, sizeof(buf), "%-8s %8zu %8zu %10.4f\n", type.c_str(),
                  bucket.first, bucket.second, acc);
    out += buf;
  }
  return out;
}

// --- attention traces ------------------------------------------------------------

// Keyed answer index -> hop index -> {delta, zeta, epsilon}, plus f/p/argmax.
template <typename T>
Json trace_to_json(const Prediction<T>& pred, const Variant& variant,
                   std::size_t instance_index) {
  Json j = Json::object();
  j["schema"] = kTraceSchema;
  j["variant"] = to_string(variant);
  j["instance"] = instance_index;
  Json f = Json::array(), p = Json::array();
  for (const T& x : pred.f) f.push_back(static_cast<double>(x));
  for (const T& x : pred.p) p.push_back(static_cast<double>(x));
  j["f"] = std::move(f);
  j["p"] = std::move(p);
  j["argmax"] = pred.argmax;

  if (pred.trace && !pred.trace->answers.empty()) {
    Json answers = Json::object();
    for (std::size_t k = 0; k < pred.trace->answers.size(); ++k) {
      Json hops = Json::object();
      const auto& at = pred.trace->answers[k];
      for (std::size_t t = 0; t < at.hops.size(); ++t) {
        const auto& hop = at.hops[t];
        Json h = Json::object();
        Json delta = Json::array(), zeta = Json::array(), eps = Json::array();
        for (const T& x : hop.delta) delta.push_back(static_cast<double>(x));
        for (const T& x : hop.zeta) zeta.push_back(static_cast<double>(x));
        for (std::size_t i = 0; i < hop.epsilon.rows(); ++i) {
          Json row = Json::array();
          for (std::size_t jj = 0; jj < hop.epsilon.cols(); ++jj)
            row.push_back(static_cast<double>(hop.epsilon(i, jj)));
          eps.push_back(std::move(row));
        }
        h["delta"] = std::move(delta);
        h["zeta"] = std::move(zeta);
        h["epsilon"] = std::move(eps);
        hops[std::to_string(t + 1)] = std::move(h);
      }
      answers[std::to_string(k)] = std::move(hops);
    }
    j["answers"] = std::move(answers);
  }
  if (pred.trace && !pred.trace->alpha.empty()) {
    Json hops = Json::object();
    for (std::size_t t = 0; t < pred.trace->alpha.size(); ++t) {
      Json alpha = Json::array();
      for (const T& x : pred.trace->alpha[t]) alpha.push_back(static_cast<double>(x));
      hops[std::to_string(t + 1)] = std::move(alpha);
    }
    j["alpha"] = std::move(hops);
  }
  if (pred.trace && !pred.trace->stages.empty()) {
    Json stages = Json::array();
    for (const auto& stage : pred.trace->stages) {
      Json s = Json::object();
      s["name"] = stage.name;
      Json rows = Json::array();
      for (std::size_t i = 0; i < stage.weights.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t jj = 0; jj < stage.weights.cols(); ++jj)
          row.push_back(static_cast<double>(stage.weights(i, jj)));
        rows.push_back(std::move(row));
      }
      s["weights"] = std::move(rows);
      stages.push_back(std::move(s));
    }
    j["stages"] = std::move(stages);
  }
  return j;
}

}  // namespace hmmn
