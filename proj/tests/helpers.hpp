#pragma once

#include <doctest.h>

#include "hmmn/json_io.hpp"
#include "oracle.hpp"

namespace testutil {

inline oracle::Cols to_cols(const hmmn::Matrix<double>& m) {
  oracle::Cols cols;
  for (std::size_t j = 0; j < m.cols(); ++j) cols.push_back(m.col_copy(j));
  return cols;
}

inline oracle::VocabMap vocab_map(const hmmn::Vocabulary<double>& v) {
  oracle::VocabMap map;
  for (std::size_t i = 0; i < v.size(); ++i) map[v.tokens[i]] = v.vectors.col_copy(i);
  return map;
}

inline std::vector<std::pair<std::string, oracle::Vec>> vocab_pairs(
    const hmmn::Vocabulary<double>& v) {
  std::vector<std::pair<std::string, oracle::Vec>> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.emplace_back(v.tokens[i], v.vectors.col_copy(i));
  return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline double max_abs_diff(const hmmn::Matrix<double>& a, const oracle::Cols& b) {
  REQUIRE(a.cols() == b.size());
  double worst = 0;
  for (std::size_t j = 0; j < a.cols(); ++j)
    worst = std::max(worst, max_abs_diff(a.col_copy(j), b[j]));
  return worst;
}

inline hmmn::Matrix<double> random_matrix(hmmn::SplitMix64& rng, std::size_t rows,
                                          std::size_t cols, double scale = 1.0) {
  hmmn::Matrix<double> m(rows, cols);
  for (auto& x : m.data()) x = rng.uniform(-scale, scale);
  return m;
}

inline std::vector<double> random_vector(hmmn::SplitMix64& rng, std::size_t n,
                                         double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

// Random matrices shaped like an encoded instance; for pure forward tests.
inline hmmn::EncodedInstance<double> random_encoded(hmmn::SplitMix64& rng, std::size_t d,
                                                    std::size_t m, std::size_t n) {
  hmmn::EncodedInstance<double> enc;
  enc.S = random_matrix(rng, d, m);
  enc.V = random_matrix(rng, d, n);
  enc.q = random_vector(rng, d);
  enc.A = random_matrix(rng, d, hmmn::kAnswerChoices);
  enc.gold = static_cast<int>(rng.next_index(hmmn::kAnswerChoices));
  return enc;
}

}  // namespace testutil
