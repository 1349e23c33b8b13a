#pragma once

#include "hmmn/numerics.hpp"

namespace hmmn {

// The four parameter-free attention primitives. Everything here is pure
// arithmetic over encoded matrices; the model layers just compose these.

template <typename T>
struct ReweightedMemory {
  Vector<T> weights;     // simplex over slots
  Matrix<T> reweighted;  // M with column i scaled by weights[i]
};

// q^T M_:i for every column i.
template <typename T>
Vector<T> attention_scores(std::span<const T> query, const Matrix<T>& M) {
  if (query.size() != M.rows())
    throw DimensionError("attention_scores: query/matrix dim mismatch");
  Vector<T> scores(M.cols());
  for (std::size_t i = 0; i < M.cols(); ++i) scores[i] = dot(query, M.col(i));
  return scores;
}

// Query-to-context attention: softmax relevance of each slot to the query,
// used to rescale the slots in place (S* / S' / V').
template <typename T>
ReweightedMemory<T> query_to_context(std::span<const T> query, const Matrix<T>& M) {
  ReweightedMemory<T> out;
  out.weights = softmax(attention_scores(query, M));
  out.reweighted = M;
  for (std::size_t i = 0; i < M.cols(); ++i) {
    for (std::size_t r = 0; r < M.rows(); ++r) out.reweighted(r, i) *= out.weights[i];
  }
  return out;
}

template <typename T>
ReweightedMemory<T> query_to_context(const Vector<T>& query, const Matrix<T>& M) {
  return query_to_context(std::span<const T>(query), M);
}

// Softmax-weighted sum of the slots with respect to the query.
template <typename T>
Vector<T> summarize(std::span<const T> query, const Matrix<T>& M) {
  return weighted_sum(softmax(attention_scores(query, M)), M);
}

template <typename T>
Vector<T> summarize(const Vector<T>& query, const Matrix<T>& M) {
  return summarize(std::span<const T>(query), M);
}

// Inter-modal attention, X attends to Y: each X slot is rebuilt as the
// coattention-weighted sum of Y's slots. The coattention weights are raw
// inner products -- no normalization -- so magnitudes grow with Y's slot
// count; `normalize` optionally applies a row-wise softmax for experiments.
template <typename T>
struct Coattention {
  Matrix<T> weights;  // p x r, weights(i, j) couples X_:i with Y_:j
  Matrix<T> out;      // d x p
};

template <typename T>
Coattention<T> inter_modal_traced(const Matrix<T>& X, const Matrix<T>& Y,
                                  bool normalize = false) {
  if (X.rows() != Y.rows())
    throw DimensionError("inter_modal: feature dim mismatch");
  Coattention<T> co;
  co.weights = Matrix<T>(X.cols(), Y.cols());
  co.out = Matrix<T>(X.rows(), X.cols());
  Vector<T> row(Y.cols());
  for (std::size_t i = 0; i < X.cols(); ++i) {
    for (std::size_t j = 0; j < Y.cols(); ++j) row[j] = dot(X.col(i), Y.col(j));
    if (normalize) row = softmax(row);
    for (std::size_t j = 0; j < Y.cols(); ++j) {
      co.weights(i, j) = row[j];
      axpy(row[j], Y.col(j), co.out.col(i));
    }
  }
  return co;
}

template <typename T>
Matrix<T> inter_modal(const Matrix<T>& X, const Matrix<T>& Y,
                      bool normalize = false) {
  return inter_modal_traced(X, Y, normalize).out;
}

// Intra-modal self attention: like inter-modal against the same matrix, with
// the self pairing masked to zero.
template <typename T>
Matrix<T> self_attention(const Matrix<T>& M) {
  Matrix<T> out(M.rows(), M.cols());
  for (std::size_t i = 0; i < M.cols(); ++i) {
    for (std::size_t j = 0; j < M.cols(); ++j) {
      if (i == j) continue;
      axpy(dot(M.col(i), M.col(j)), M.col(j), out.col(i));
    }
  }
  return out;
}

}  // namespace hmmn
