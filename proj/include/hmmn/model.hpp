#pragma once

#include <optional>

#include "hmmn/attention.hpp"
#include "hmmn/encodings.hpp"

namespace hmmn {

// One reasoning hop's attention weights, kept for inspection/visualization.
template <typename T>
struct HopTrace {
  Vector<T> delta;    // simplex over the m sentences
  Matrix<T> epsilon;  // n x m coattention weights as applied (raw by default)
  Vector<T> zeta;     // simplex over the n frames
};

template <typename T>
struct AnswerTrace {
  std::vector<HopTrace<T>> hops;
};

// Attention weights recorded while building a baseline representation
// (query-to-context simplex rows, inter-modal beta, self-attention gamma).
template <typename T>
struct StageTrace {
  std::string name;
  Matrix<T> weights;
};

template <typename T>
struct AttentionTrace {
  std::vector<AnswerTrace<T>> answers;  // one per answer choice (hop models)
  std::vector<Vector<T>> alpha;         // per-hop slot weights (single-memory baselines)
  std::vector<StageTrace<T>> stages;    // representation-building weights (ablations)
};

template <typename T>
struct Prediction {
  Vector<T> f;  // affinity scores, length 5
  Vector<T> p;  // softmax(f)
  int argmax = 0;
  std::optional<AttentionTrace<T>> trace;
};

// How the affinity score uses the answer choice.
//  answer_dot:     f_k = (q + u_T^k)^T a_k  (default; the score compares the
//                  answer-aware summary against the answer choice itself)
//  retrieval_norm: f_k = ||q + u_T^k||^2    (alternative reading of the
//                  answer-attention ablation: the answer choice is dropped
//                  from the score and enters through retrieval only; with
//                  answers also absent from the query this degenerates to a
//                  uniform prediction)
enum class AffinityMode { answer_dot, retrieval_norm };

template <typename T>
struct ForwardOptions {
  std::size_t hops = 2;
  T lambda = T(0.45);
  bool answer_in_query = true;  // the Table-I "answer attention" switch
  AffinityMode affinity = AffinityMode::answer_dot;
  bool normalize_coattention = false;
  bool want_trace = false;
};

template <typename T>
ForwardOptions<T> forward_options(const ModelParams<T>& params) {
  ForwardOptions<T> opts;
  opts.hops = params.hops;
  opts.lambda = params.lambda;
  return opts;
}

// Lowest index wins ties.
template <typename T>
int argmax_lowest(std::span<const T> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

template <typename T>
struct HopResult {
  Vector<T> u;
  HopTrace<T> trace;
};

// One HMMN cell: build the answer-aware query, reweight the sentences with
// it, let frames attend to the reweighted sentences, then summarize the
// frame representations with respect to the query.
//
//   q*  = u_prev + a_k + lambda q
//   (delta, S*) = query_to_context(q*, S)
//   (epsilon, V*) = inter_modal(V, S*)
//   u_next = summarize(q*, V*)
//
// Pass a zero vector as `answer` for the no-answer-attention variant.
template <typename T>
HopResult<T> hmmn_hop(std::span<const T> q, std::span<const T> answer,
                      std::span<const T> u_prev, const Matrix<T>& S,
                      const Matrix<T>& V, T lambda,
                      bool normalize_coattention = false) {
  if (q.size() != S.rows() || q.size() != V.rows() || q.size() != answer.size() ||
      q.size() != u_prev.size())
    throw DimensionError("hmmn_hop: dimension mismatch");

  Vector<T> qstar(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    qstar[i] = u_prev[i] + answer[i] + lambda * q[i];

  ReweightedMemory<T> rw = query_to_context(std::span<const T>(qstar), S);
  Coattention<T> co = inter_modal_traced(V, rw.reweighted, normalize_coattention);
  Vector<T> zeta = softmax(attention_scores(std::span<const T>(qstar), co.out));

  HopResult<T> res;
  res.u = weighted_sum(zeta, co.out);
  res.trace.delta = std::move(rw.weights);
  res.trace.epsilon = std::move(co.weights);
  res.trace.zeta = std::move(zeta);
  return res;
}

namespace detail {

template <typename T>
T affinity_score(AffinityMode mode, const Vector<T>& q_plus_u,
                 std::span<const T> answer) {
  if (mode == AffinityMode::answer_dot)
    return dot(std::span<const T>(q_plus_u), answer);
  return dot(std::span<const T>(q_plus_u), std::span<const T>(q_plus_u));
}

}  // namespace detail

// Stacks T HMMN cells per answer choice (u_0 = 0, so the first-hop query is
// a_k + lambda q) and scores each choice with the affinity head.
template <typename T>
Prediction<T> hmmn_forward(const EncodedInstance<T>& enc,
                           const ForwardOptions<T>& opts) {
  if (opts.hops < 1) throw ConfigError("hmmn_forward: hops must be >= 1");
  const std::size_t d = enc.q.size();
  Prediction<T> pred;
  pred.f.assign(kAnswerChoices, T{});
  if (opts.want_trace) {
    pred.trace.emplace();
    pred.trace->answers.resize(kAnswerChoices);
  }

  const Vector<T> zero(d, T{});
  // Without answer attention the hop chain is answer-independent: run it
  // once and reuse the summary for every choice.
  const int chains = opts.answer_in_query ? kAnswerChoices : 1;
  std::vector<Vector<T>> summaries(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c) {
    Vector<T> u = zero;
    std::vector<HopTrace<T>> hops;
    for (std::size_t t = 0; t < opts.hops; ++t) {
      auto ans = opts.answer_in_query
                     ? enc.A.col(static_cast<std::size_t>(c))
                     : std::span<const T>(zero);
      HopResult<T> hop = hmmn_hop(std::span<const T>(enc.q), ans,
                                  std::span<const T>(u), enc.S, enc.V,
                                  opts.lambda, opts.normalize_coattention);
      u = std::move(hop.u);
      if (opts.want_trace) hops.push_back(std::move(hop.trace));
    }
    summaries[static_cast<std::size_t>(c)] = std::move(u);
    if (opts.want_trace) {
      if (opts.answer_in_query) {
        pred.trace->answers[static_cast<std::size_t>(c)].hops = std::move(hops);
      } else {
        for (auto& at : pred.trace->answers) at.hops = hops;
      }
    }
  }

  for (int k = 0; k < kAnswerChoices; ++k) {
    const Vector<T>& u = summaries[opts.answer_in_query ? static_cast<std::size_t>(k) : 0];
    Vector<T> q_plus_u(d);
    for (std::size_t i = 0; i < d; ++i) q_plus_u[i] = enc.q[i] + u[i];
    pred.f[static_cast<std::size_t>(k)] = detail::affinity_score(
        opts.affinity, q_plus_u, enc.A.col(static_cast<std::size_t>(k)));
  }
  pred.p = softmax(pred.f);
  pred.argmax = argmax_lowest(std::span<const T>(pred.f));
  return pred;
}

// Single-memory end-to-end memory network baseline: summarize the slots with
// the question, feed q + u back as the next hop's query, and score the
// answer choices against the final q + u.
template <typename T>
Prediction<T> e2emn_forward(const Vector<T>& q, const Matrix<T>& M,
                            const Matrix<T>& A, std::size_t hops,
                            bool want_trace = false) {
  if (hops < 1) throw ConfigError("e2emn_forward: hops must be >= 1");
  if (q.size() != M.rows() || q.size() != A.rows())
    throw DimensionError("e2emn_forward: dimension mismatch");

  Prediction<T> pred;
  if (want_trace) pred.trace.emplace();

  Vector<T> query = q;
  Vector<T> u;
  for (std::size_t h = 0; h < hops; ++h) {
    Vector<T> alpha = softmax(attention_scores(std::span<const T>(query), M));
    u = weighted_sum(alpha, M);
    if (want_trace) pred.trace->alpha.push_back(std::move(alpha));
    if (h + 1 < hops) {
      for (std::size_t i = 0; i < q.size(); ++i) query[i] = q[i] + u[i];
    }
  }

  Vector<T> q_plus_u(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) q_plus_u[i] = q[i] + u[i];
  pred.f = matvec_t(A, std::span<const T>(q_plus_u));
  pred.p = softmax(pred.f);
  pred.argmax = argmax_lowest(std::span<const T>(pred.f));
  return pred;
}

}  // namespace hmmn
