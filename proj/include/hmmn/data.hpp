#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hmmn/encodings.hpp"

namespace hmmn {

enum class CueMode { question_sufficient, answer_required };

inline std::string to_string(CueMode m) {
  return m == CueMode::question_sufficient ? "question-sufficient" : "answer-required";
}

inline CueMode parse_cue_mode(const std::string& s) {
  if (s == "question-sufficient") return CueMode::question_sufficient;
  if (s == "answer-required") return CueMode::answer_required;
  throw ConfigError("unknown cue mode '" + s + "'");
}

// Desk-scale task with planted answer-retrieval structure. Every instance
// hides the gold answer's tokens in exactly one subtitle sentence and puts
// matching word content into the regions of exactly one frame; in
// answer-required mode the question is a generic fixed phrase, so only
// answer-aware retrieval can find the cue.
// Defaults were calibrated so the answer-required task is learnable by the
// default trainer (SGD, lr 0.005, batch 8, <= 50 epochs) while staying out
// of reach of answer-blind retrieval.
struct SyntheticConfig {
  std::size_t instances = 200;
  std::size_t sentences = 8;       // m
  std::size_t frames = 5;          // n
  std::size_t regions = 6;         // per frame
  std::size_t vocab_size = 60;
  std::size_t tokens_per_sentence = 4;
  std::size_t d = 40;
  std::size_t d_w = 32;
  std::size_t d_r = 36;
  double cue_strength = 1.0;       // (0, 1]
  CueMode mode = CueMode::answer_required;
  std::uint64_t seed = 0;
  std::string name = "synthetic";

  void validate() const {
    if (instances < 1 || sentences < 1 || frames < 1 || regions < 1 ||
        vocab_size < 1 || tokens_per_sentence < 1 || d < 1 || d_w < 1 || d_r < 1)
      throw ConfigError("SyntheticConfig: all counts must be >= 1");
    if (!(cue_strength > 0.0 && cue_strength <= 1.0))
      throw ConfigError("SyntheticConfig: cue strength must be in (0, 1]");
    if (d_r < d_w)
      throw ConfigError("SyntheticConfig: d_r must be >= d_w (regions embed word vectors)");
    if (vocab_size < kQuestionWords + kPhraseTokens + 2)
      throw ConfigError("SyntheticConfig: vocabulary too small for the token partition");
  }

  static constexpr std::size_t kQuestionWords = 5;  // what who why how where
  static constexpr std::size_t kPhraseTokens = 3;   // fixed filler phrase pool

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

// Preprocessing conventions of externally imported corpora. The artifact
// consumes precomputed features only; these fields just record how the
// upstream pipeline windowed subtitles and sampled frames.
struct ImportConventions {
  double subtitle_window_seconds = 300.0;
  std::size_t frames_per_clip = 32;

  friend bool operator==(const ImportConventions&, const ImportConventions&) = default;
};

template <typename T>
struct Dataset {
  std::vector<RawInstance<T>> instances;
  std::string name;
  std::uint64_t seed = 0;
  std::string vocab_ref;                     // path of the companion vocabulary
  std::optional<SyntheticConfig> generator;  // echoed config for synthetic sets
  std::optional<ImportConventions> imported; // set on converted external data

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

// Generator feature scales. Word vectors carry a few units of norm so the
// attention softmaxes are usefully peaked under a fresh scaled-uniform init;
// at unit norm the retrieval path is numerically dormant and SGD at the
// default learning rate cannot leave the chance plateau. Regions are scaled
// further so the vocabulary-attention stage starts selective too. These are
// generator constants, not model parameters.
inline constexpr double kWordScale = 3.2;
inline constexpr double kRegionScale = 8.0;

template <typename T>
Vector<T> embed_region(const Vector<T>& word_vec, std::size_t d_r) {
  Vector<T> region(d_r, T{});
  for (std::size_t i = 0; i < word_vec.size(); ++i)
    region[i] = static_cast<T>(kRegionScale) * word_vec[i];
  return region;
}

}  // namespace detail

// Random word-vector table: entries uniform in (-a, a) with
// a = scale * sqrt(3/d_w), i.e. expected norm `scale`. The synthetic
// generator passes kWordScale; unit scale suits gradient-check fixtures.
template <typename T>
Vocabulary<T> random_vocabulary(std::size_t size, std::size_t d_w, std::uint64_t seed,
                                double scale = 1.0) {
  static const char* kQuestionTokens[] = {"what", "who", "why", "how", "where"};
  Vocabulary<T> vocab;
  vocab.vectors = Matrix<T>(d_w, size);
  SplitMix64 rng(derive_seed(seed, "vocab"));
  const double a = scale * std::sqrt(3.0 / static_cast<double>(d_w));
  for (std::size_t i = 0; i < size; ++i) {
    if (i < SyntheticConfig::kQuestionWords &&
        size >= SyntheticConfig::kQuestionWords + SyntheticConfig::kPhraseTokens + 2) {
      vocab.tokens.push_back(kQuestionTokens[i]);
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "tok%04zu", i);
      vocab.tokens.push_back(buf);
    }
    for (std::size_t r = 0; r < d_w; ++r)
      vocab.vectors(r, i) = static_cast<T>(rng.uniform(-a, a));
  }
  vocab.rebuild_index();
  return vocab;
}

template <typename T>
struct SyntheticData {
  Dataset<T> dataset;
  Vocabulary<T> vocab;
};

template <typename T>
SyntheticData<T> generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticData<T> out;
  out.vocab =
      random_vocabulary<T>(cfg.vocab_size, cfg.d_w, cfg.seed, detail::kWordScale);
  out.dataset.name = cfg.name;
  out.dataset.seed = cfg.seed;
  out.dataset.generator = cfg;

  const std::size_t qw = SyntheticConfig::kQuestionWords;
  const std::size_t content_begin = qw + SyntheticConfig::kPhraseTokens;
  const std::size_t content_count = cfg.vocab_size - content_begin;

  for (std::size_t idx = 0; idx < cfg.instances; ++idx) {
    SplitMix64 rng(derive_seed(cfg.seed, "instance", idx));
    RawInstance<T> inst;
    inst.gold = static_cast<int>(rng.next_index(kAnswerChoices));

    auto content_token = [&]() -> std::string {
      return out.vocab.tokens[content_begin + rng.next_index(content_count)];
    };

    // Five answer choices from the content pool, token-disjoint within the
    // instance when the pool allows it (shared tokens would make wrong
    // choices partially retrieve the gold cue).
    std::vector<std::string> answer_tokens;  // union, used to keep distractors clean
    const bool disjoint = content_count >= kAnswerChoices * cfg.tokens_per_sentence;
    for (auto& ans : inst.answers) {
      for (std::size_t t = 0; t < cfg.tokens_per_sentence; ++t) {
        std::string tok = content_token();
        while (disjoint && std::find(answer_tokens.begin(), answer_tokens.end(), tok) !=
                               answer_tokens.end())
          tok = content_token();
        ans.push_back(tok);
        answer_tokens.push_back(ans.back());
      }
    }
    auto is_answer_token = [&](const std::string& tok) {
      return std::find(answer_tokens.begin(), answer_tokens.end(), tok) !=
             answer_tokens.end();
    };
    auto distractor_token = [&]() -> std::string {
      // rejection sampling; bounded so tiny pools (every content token taken
      // by an answer) cannot spin forever
      for (int attempt = 0; attempt < 64; ++attempt) {
        std::string tok = content_token();
        if (!is_answer_token(tok)) return tok;
      }
      return content_token();
    };

    const auto& gold_answer = inst.answers[static_cast<std::size_t>(inst.gold)];

    // Question: a question word plus either the gold answer's tokens
    // (question-sufficient) or a fixed phrase that carries no instance
    // information (answer-required).
    inst.question.push_back(out.vocab.tokens[rng.next_index(qw)]);
    if (cfg.mode == CueMode::question_sufficient) {
      for (const auto& tok : gold_answer) inst.question.push_back(tok);
    } else {
      for (std::size_t t = 0; t < SyntheticConfig::kPhraseTokens; ++t)
        inst.question.push_back(out.vocab.tokens[qw + t]);
    }

    // Subtitles: the planted sentence blends the gold answer's tokens at the
    // cue strength; every other sentence avoids this instance's answer tokens.
    const std::size_t planted_sentence = rng.next_index(cfg.sentences);
    for (std::size_t s = 0; s < cfg.sentences; ++s) {
      std::vector<std::string> sent;
      for (std::size_t t = 0; t < cfg.tokens_per_sentence; ++t) {
        if (s == planted_sentence &&
            (cfg.cue_strength >= 1.0 || rng.next_double() < cfg.cue_strength)) {
          sent.push_back(gold_answer[t % gold_answer.size()]);
        } else {
          sent.push_back(distractor_token());
        }
      }
      inst.subtitles.push_back(std::move(sent));
    }

    // Frames: the planted frame's regions cycle through the gold answer's
    // word vectors (blended with noise at cue strength); the rest embed
    // distractor words.
    const std::size_t planted_frame = rng.next_index(cfg.frames);
    const double noise_a =
        detail::kWordScale * std::sqrt(3.0 / static_cast<double>(cfg.d_w));
    for (std::size_t fidx = 0; fidx < cfg.frames; ++fidx) {
      std::vector<Vector<T>> regions;
      for (std::size_t r = 0; r < cfg.regions; ++r) {
        std::string tok = fidx == planted_frame ? gold_answer[r % gold_answer.size()]
                                                : distractor_token();
        Vector<T> wv(cfg.d_w, T{});
        out.vocab.add_word_vector(tok, wv);
        if (fidx == planted_frame && cfg.cue_strength < 1.0) {
          const T c = static_cast<T>(cfg.cue_strength);
          for (auto& x : wv) {
            x = c * x + (T(1) - c) * static_cast<T>(rng.uniform(-noise_a, noise_a));
          }
        }
        regions.push_back(detail::embed_region(wv, cfg.d_r));
      }
      inst.frames.push_back(std::move(regions));
    }

    out.dataset.instances.push_back(std::move(inst));
  }
  return out;
}

// Seeded disjoint/exhaustive split into (train, dev).
template <typename T>
std::pair<Dataset<T>, Dataset<T>> split(const Dataset<T>& data, double dev_fraction,
                                        std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0))
    throw ConfigError("split: dev fraction must be in (0, 1)");
  std::vector<std::size_t> order(data.instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(derive_seed(seed, "split"));
  shuffle(order, rng);

  const auto dev_count = static_cast<std::size_t>(
      std::llround(dev_fraction * static_cast<double>(data.instances.size())));
  Dataset<T> train, dev;
  train.name = data.name + "/train";
  dev.name = data.name + "/dev";
  train.seed = dev.seed = data.seed;
  train.vocab_ref = dev.vocab_ref = data.vocab_ref;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < dev_count ? dev : train;
    dst.instances.push_back(data.instances[order[i]]);
  }
  return {std::move(train), std::move(dev)};
}

// Unstructured random instance (uniform tokens, uniform region features);
// the gradient-check harness runs on these.
template <typename T>
RawInstance<T> random_instance(SplitMix64& rng, const Vocabulary<T>& vocab,
                               std::size_t sentences, std::size_t frames,
                               std::size_t regions, std::size_t tokens,
                               std::size_t d_r) {
  auto token = [&]() { return vocab.tokens[rng.next_index(vocab.size())]; };
  RawInstance<T> inst;
  inst.gold = static_cast<int>(rng.next_index(kAnswerChoices));
  for (std::size_t t = 0; t < tokens; ++t) inst.question.push_back(token());
  for (auto& ans : inst.answers)
    for (std::size_t t = 0; t < tokens; ++t) ans.push_back(token());
  for (std::size_t s = 0; s < sentences; ++s) {
    std::vector<std::string> sent;
    for (std::size_t t = 0; t < tokens; ++t) sent.push_back(token());
    inst.subtitles.push_back(std::move(sent));
  }
  for (std::size_t f = 0; f < frames; ++f) {
    std::vector<Vector<T>> frame;
    for (std::size_t r = 0; r < regions; ++r) {
      Vector<T> region(d_r);
      for (auto& x : region) x = static_cast<T>(rng.uniform(-1.0, 1.0));
      frame.push_back(std::move(region));
    }
    inst.frames.push_back(std::move(frame));
  }
  return inst;
}

// First question token, lowercased, bucketed into the reported types.
inline std::string question_type(const std::vector<std::string>& question) {
  if (question.empty()) return "other";
  std::string head = question.front();
  for (char& c : head) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const char* t : {"what", "who", "why", "how", "where"})
    if (head == t) return head;
  return "other";
}

}  // namespace hmmn
