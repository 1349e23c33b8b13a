#pragma once

// Independent scalar-loop reimplementation of every quantity the library
// computes, written directly from the model equations with plain nested
// loops over std::vector. Nothing here touches the hmmn headers: this is
// the reference the implementation is checked against, so it must not share
// code with it. Softmax and the loss accumulate in long double.

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Cols = std::vector<Vec>;  // a matrix as a list of column vectors
using VocabMap = std::map<std::string, Vec>;

inline double o_dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec o_softmax(const Vec& scores) {
  long double hi = scores[0];
  for (double s : scores)
    if (s > hi) hi = s;
  std::vector<long double> e(scores.size());
  long double sum = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    e[i] = expl(static_cast<long double>(scores[i]) - hi);
    sum += e[i];
  }
  Vec out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = static_cast<double>(e[i] / sum);
  return out;
}

inline Vec o_weighted_sum(const Vec& w, const Cols& cols) {
  Vec out(cols[0].size(), 0.0);
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[j] * cols[j][i];
  return out;
}

// W^T x for W given as columns (each of length |x|).
inline Vec o_project_t(const Cols& w_cols, const Vec& x) {
  Vec out(w_cols.size(), 0.0);
  for (std::size_t j = 0; j < w_cols.size(); ++j)
    for (std::size_t i = 0; i < x.size(); ++i) out[j] += w_cols[j][i] * x[i];
  return out;
}

// --- encoders ---------------------------------------------------------------

// Projects each token's word vector first, then averages (the reverse order
// of the implementation, which averages first; they must agree).
inline Vec o_encode_sentence(const std::vector<std::string>& tokens,
                             const VocabMap& vocab, const Cols& w1, std::size_t d_w) {
  Vec acc(w1.size(), 0.0);
  for (const auto& tok : tokens) {
    auto it = vocab.find(tok);
    Vec wv = it == vocab.end() ? Vec(d_w, 0.0) : it->second;
    Vec proj = o_project_t(w1, wv);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += proj[i];
  }
  for (double& x : acc) x /= static_cast<double>(tokens.size());
  return acc;
}

// ordered (token, vector) pairs; the softmax runs over this ordering
inline Vec o_encode_frame(const Cols& regions,
                          const std::vector<std::pair<std::string, Vec>>& vocab,
                          const Cols& w2, const Cols& w1) {
  Vec mean(w2.size(), 0.0);  // word-space accumulator, length d_w
  for (const auto& region : regions) {
    Vec z = o_project_t(w2, region);
    Vec scores(vocab.size());
    for (std::size_t v = 0; v < vocab.size(); ++v) scores[v] = o_dot(z, vocab[v].second);
    Vec attn = o_softmax(scores);
    for (std::size_t v = 0; v < vocab.size(); ++v)
      for (std::size_t i = 0; i < mean.size(); ++i)
        mean[i] += attn[v] * vocab[v].second[i] / static_cast<double>(regions.size());
  }
  return o_project_t(w1, mean);
}

// --- attention primitives ----------------------------------------------------

struct OReweighted {
  Vec weights;
  Cols cols;
};

inline OReweighted o_query_to_context(const Vec& q, const Cols& m) {
  Vec scores(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) scores[i] = o_dot(q, m[i]);
  OReweighted out;
  out.weights = o_softmax(scores);
  out.cols = m;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (double& x : out.cols[i]) x *= out.weights[i];
  return out;
}

inline Vec o_summarize(const Vec& q, const Cols& m) {
  Vec scores(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) scores[i] = o_dot(q, m[i]);
  return o_weighted_sum(o_softmax(scores), m);
}

inline Cols o_inter_modal(const Cols& x, const Cols& y) {
  Cols out(x.size(), Vec(x.empty() ? 0 : x[0].size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) {
      double eps = o_dot(x[i], y[j]);
      for (std::size_t r = 0; r < out[i].size(); ++r) out[i][r] += eps * y[j][r];
    }
  return out;
}

inline Cols o_self_attention(const Cols& m) {
  Cols out(m.size(), Vec(m.empty() ? 0 : m[0].size(), 0.0));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (i == j) continue;
      double g = o_dot(m[i], m[j]);
      for (std::size_t r = 0; r < out[i].size(); ++r) out[i][r] += g * m[j][r];
    }
  return out;
}

// --- models -------------------------------------------------------------------

struct OPrediction {
  Vec f, p;
};

inline Vec o_hop(const Vec& q, const Vec& answer, const Vec& u_prev, const Cols& s,
                 const Cols& v, double lambda) {
  Vec qstar(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    qstar[i] = u_prev[i] + answer[i] + lambda * q[i];
  OReweighted sstar = o_query_to_context(qstar, s);
  Cols vstar = o_inter_modal(v, sstar.cols);
  return o_summarize(qstar, vstar);
}

inline OPrediction o_hmmn_forward(const Vec& q, const Cols& s, const Cols& v,
                                  const Cols& answers, double lambda, std::size_t hops,
                                  bool with_answer) {
  const Vec zero(q.size(), 0.0);
  OPrediction pred;
  pred.f.resize(answers.size());
  for (std::size_t k = 0; k < answers.size(); ++k) {
    Vec u = zero;
    for (std::size_t t = 0; t < hops; ++t)
      u = o_hop(q, with_answer ? answers[k] : zero, u, s, v, lambda);
    Vec qu(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) qu[i] = q[i] + u[i];
    pred.f[k] = o_dot(qu, answers[k]);
  }
  pred.p = o_softmax(pred.f);
  return pred;
}

inline OPrediction o_e2emn_forward(const Vec& q, const Cols& m, const Cols& answers,
                                   std::size_t hops) {
  Vec query = q;
  Vec u;
  for (std::size_t h = 0; h < hops; ++h) {
    u = o_summarize(query, m);
    if (h + 1 < hops) {
      query.resize(q.size());
      for (std::size_t i = 0; i < q.size(); ++i) query[i] = q[i] + u[i];
    }
  }
  Vec qu(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) qu[i] = q[i] + u[i];
  OPrediction pred;
  pred.f.resize(answers.size());
  for (std::size_t k = 0; k < answers.size(); ++k) pred.f[k] = o_dot(qu, answers[k]);
  pred.p = o_softmax(pred.f);
  return pred;
}

inline double o_loss(const Vec& f, int gold) {
  long double hi = f[0];
  for (double x : f)
    if (x > hi) hi = x;
  long double sum = 0;
  for (double x : f) sum += expl(static_cast<long double>(x) - hi);
  long double logp = static_cast<long double>(f[static_cast<std::size_t>(gold)]) - hi -
                     logl(sum);
  return static_cast<double>(-logp);
}

}  // namespace oracle
