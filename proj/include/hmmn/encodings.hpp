#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hmmn/numerics.hpp"

namespace hmmn {

// Fixed word-vector table. Word vectors are inputs, never trained; tokens
// missing from the table encode as the zero vector but still count in the
// mean-pooling denominator.
template <typename T>
struct Vocabulary {
  std::vector<std::string> tokens;
  Matrix<T> vectors;  // d_w x |vocab|, one column per token
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return tokens.size(); }
  std::size_t word_dim() const { return vectors.rows(); }

  void rebuild_index() {
    index.clear();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!index.emplace(tokens[i], i).second)
        throw EncodingError("vocabulary: duplicate token '" + tokens[i] + "'");
    }
  }

  // Accumulates the token's word vector into `acc`; OOV adds nothing.
  void add_word_vector(const std::string& token, Vector<T>& acc) const {
    auto it = index.find(token);
    if (it == index.end()) return;
    axpy(T(1), vectors.col(it->second), std::span<T>(acc));
  }
};

// The only learnable parameters in the whole system.
template <typename T>
struct ModelParams {
  Matrix<T> W1;  // d_w x d, projects word space into the shared feature space
  Matrix<T> W2;  // d_r x d_w, projects regional features into word space
  T lambda = T(0.45);
  std::size_t hops = 2;

  std::size_t d() const { return W1.cols(); }
  std::size_t d_w() const { return W1.rows(); }
  std::size_t d_r() const { return W2.rows(); }

  void validate() const {
    if (W1.rows() == 0 || W1.cols() == 0 || W2.rows() == 0 || W2.cols() == 0)
      throw DimensionError("ModelParams: empty projection matrix");
    if (W2.cols() != W1.rows())
      throw DimensionError("ModelParams: W2 output dim must equal W1 input dim");
    if (!(lambda >= T(0))) throw ConfigError("ModelParams: lambda must be >= 0");
    if (hops < 1) throw ConfigError("ModelParams: hop count must be >= 1");
  }
};

static constexpr int kAnswerChoices = 5;

template <typename T>
struct RawInstance {
  std::vector<std::string> question;
  std::array<std::vector<std::string>, kAnswerChoices> answers;
  std::vector<std::vector<std::string>> subtitles;    // m sentences
  std::vector<std::vector<Vector<T>>> frames;         // n frames x regions x d_r
  int gold = 0;

  friend bool operator==(const RawInstance&, const RawInstance&) = default;
};

template <typename T>
struct EncodedInstance {
  Matrix<T> S;  // d x m
  Matrix<T> V;  // d x n
  Vector<T> q;  // d
  Matrix<T> A;  // d x 5
  int gold = 0;
};

namespace detail {

// Mean of the tokens' word vectors (OOV = zero, counted in the denominator).
template <typename T>
Vector<T> mean_word_vector(const std::vector<std::string>& tokens,
                           const Vocabulary<T>& vocab, const char* what) {
  if (tokens.empty())
    throw EncodingError(std::string(what) + ": empty token list");
  Vector<T> acc(vocab.word_dim(), T{});
  for (const auto& tok : tokens) vocab.add_word_vector(tok, acc);
  T inv = T(1) / static_cast<T>(tokens.size());
  for (T& x : acc) x *= inv;
  return acc;
}

// Word-space content of one frame: per region, project into word space with
// W2, softmax-attend over the whole vocabulary, take the attention-weighted
// word-vector sum, then mean-pool the regions.
template <typename T>
Vector<T> frame_word_content(const std::vector<Vector<T>>& regions,
                             const Vocabulary<T>& vocab, const Matrix<T>& W2,
                             const char* what) {
  if (regions.empty())
    throw EncodingError(std::string(what) + ": empty region list");
  if (vocab.size() == 0)
    throw EncodingError(std::string(what) + ": empty vocabulary");
  Vector<T> acc(vocab.word_dim(), T{});
  for (const auto& region : regions) {
    if (region.size() != W2.rows())
      throw EncodingError(std::string(what) + ": region feature length mismatch");
    Vector<T> z = matvec_t(W2, std::span<const T>(region));
    Vector<T> scores = matvec_t(vocab.vectors, std::span<const T>(z));
    Vector<T> attn = softmax(scores);
    Vector<T> rep = weighted_sum(attn, vocab.vectors);
    axpy(T(1), rep, acc);
  }
  T inv = T(1) / static_cast<T>(regions.size());
  for (T& x : acc) x *= inv;
  return acc;
}

}  // namespace detail

// Sentence (and question / answer-choice) encoder: W1^T applied to the
// mean-pooled word vectors.
template <typename T>
Vector<T> encode_sentence(const std::vector<std::string>& tokens,
                          const Vocabulary<T>& vocab, const Matrix<T>& W1,
                          const char* what = "sentence") {
  Vector<T> mean = detail::mean_word_vector(tokens, vocab, what);
  return matvec_t(W1, std::span<const T>(mean));
}

// Frame encoder: regions are expressed through the vocabulary's word vectors
// (soft attention), mean-pooled, then projected with W1 like a sentence.
template <typename T>
Vector<T> encode_frame(const std::vector<Vector<T>>& regions,
                       const Vocabulary<T>& vocab, const Matrix<T>& W2,
                       const Matrix<T>& W1, const char* what = "frame") {
  Vector<T> content = detail::frame_word_content(regions, vocab, W2, what);
  return matvec_t(W1, std::span<const T>(content));
}

template <typename T>
EncodedInstance<T> encode_instance(const RawInstance<T>& raw,
                                   const Vocabulary<T>& vocab,
                                   const ModelParams<T>& params) {
  if (raw.subtitles.empty()) throw EncodingError("instance: no subtitle sentences");
  if (raw.frames.empty()) throw EncodingError("instance: no frames");
  if (raw.gold < 0 || raw.gold >= kAnswerChoices)
    throw EncodingError("instance: gold index out of range");

  EncodedInstance<T> enc;
  enc.gold = raw.gold;
  enc.q = encode_sentence(raw.question, vocab, params.W1, "question");

  enc.A = Matrix<T>(params.d(), kAnswerChoices);
  for (int k = 0; k < kAnswerChoices; ++k) {
    std::string what = "answer " + std::to_string(k);
    enc.A.set_col(static_cast<std::size_t>(k),
                  Vector<T>(encode_sentence(raw.answers[static_cast<std::size_t>(k)],
                                            vocab, params.W1, what.c_str())));
  }

  enc.S = Matrix<T>(params.d(), raw.subtitles.size());
  for (std::size_t i = 0; i < raw.subtitles.size(); ++i) {
    std::string what = "subtitle " + std::to_string(i);
    enc.S.set_col(i, Vector<T>(encode_sentence(raw.subtitles[i], vocab,
                                               params.W1, what.c_str())));
  }

  enc.V = Matrix<T>(params.d(), raw.frames.size());
  for (std::size_t j = 0; j < raw.frames.size(); ++j) {
    std::string what = "frame " + std::to_string(j);
    enc.V.set_col(j, Vector<T>(encode_frame(raw.frames[j], vocab, params.W2,
                                            params.W1, what.c_str())));
  }
  return enc;
}

// ---------------------------------------------------------------------------
// Vocabulary file format: one entry per line, `token<TAB>v1 v2 ... v{d_w}`.
// ---------------------------------------------------------------------------

template <typename T>
void save_vocabulary(const Vocabulary<T>& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("vocabulary: cannot open '" + path + "' for writing");
  char buf[64];
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab.tokens[i];
    auto col = vocab.vectors.col(i);
    for (std::size_t k = 0; k < col.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(col[k]));
      out << (k == 0 ? '\t' : ' ') << buf;
    }
    out << '\n';
  }
  if (!out) throw SchemaError("vocabulary: write to '" + path + "' failed");
}

template <typename T>
Vocabulary<T> load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("vocabulary: cannot open '" + path + "'");
  std::vector<std::string> tokens;
  std::vector<Vector<T>> columns;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw SchemaError("vocabulary: line " + std::to_string(lineno) +
                        ": expected token<TAB>values");
    tokens.push_back(line.substr(0, tab));
    std::istringstream rest(line.substr(tab + 1));
    Vector<T> vec;
    double x;
    while (rest >> x) vec.push_back(static_cast<T>(x));
    if (vec.empty() || !rest.eof())
      throw SchemaError("vocabulary: line " + std::to_string(lineno) +
                        ": bad vector values");
    if (!columns.empty() && vec.size() != columns.front().size())
      throw SchemaError("vocabulary: line " + std::to_string(lineno) +
                        ": inconsistent vector length");
    columns.push_back(std::move(vec));
  }
  if (columns.empty()) throw SchemaError("vocabulary: '" + path + "' is empty");
  Vocabulary<T> vocab;
  vocab.tokens = std::move(tokens);
  vocab.vectors = Matrix<T>::from_columns(columns);
  vocab.rebuild_index();
  return vocab;
}

}  // namespace hmmn
