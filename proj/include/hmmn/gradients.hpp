#pragma once

#include <algorithm>
#include <cstdlib>

#include "hmmn/ablation.hpp"
#include "hmmn/model.hpp"
#include "hmmn/parallel.hpp"

namespace hmmn {

// Reverse-mode gradients of the cross-entropy loss with respect to W1 and
// W2, hand-derived for the fixed graphs in this codebase (no tape, no
// general autodiff). The backward pass recomputes forward intermediates with
// the same primitive calls the forward pass uses, so replayed values are
// bit-identical to the prediction path.

template <typename T>
struct Gradients {
  Matrix<T> dW1;  // d_w x d
  Matrix<T> dW2;  // d_r x d_w
  T loss_value{};
};

template <typename T>
struct GradOptions {
  Variant variant{};
  AffinityMode affinity = AffinityMode::answer_dot;
  bool normalize_coattention = false;
  std::size_t threads = 1;
};

// Cross-entropy against the gold choice. Softmax outputs are strictly
// positive, so the log is always defined.
template <typename T>
T loss(const Prediction<T>& pred, int gold) {
  if (gold < 0 || gold >= kAnswerChoices)
    throw DimensionError("loss: gold index out of range");
  return -std::log(pred.p[static_cast<std::size_t>(gold)]);
}

// VJP of w = softmax(s): ds = w .* (dw - <w, dw>), i.e. (diag(w) - w w^T) dw
// without materializing the Jacobian.
template <typename T>
Vector<T> softmax_vjp(const Vector<T>& w, const Vector<T>& dw) {
  T mix = dot(w, dw);
  Vector<T> ds(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) ds[i] = w[i] * (dw[i] - mix);
  return ds;
}

namespace detail {

// Upstream gradients at the encoding boundary.
template <typename T>
struct UpstreamGrads {
  Matrix<T> dS, dV, dA;
  Vector<T> dq;

  explicit UpstreamGrads(const EncodedInstance<T>& enc)
      : dS(enc.S.rows(), enc.S.cols()),
        dV(enc.V.rows(), enc.V.cols()),
        dA(enc.A.rows(), enc.A.cols()),
        dq(enc.q.size(), T{}) {}
};

// --- primitive VJPs (each recomputes its own forward weights) --------------

// out = inter_modal(X, Y): accumulates into dX, dY given dOut.
template <typename T>
void inter_modal_vjp(const Matrix<T>& X, const Matrix<T>& Y, bool normalize,
                     const Matrix<T>& dOut, Matrix<T>& dX, Matrix<T>& dY) {
  Vector<T> raw(Y.cols()), dw(Y.cols());
  for (std::size_t i = 0; i < X.cols(); ++i) {
    for (std::size_t j = 0; j < Y.cols(); ++j) raw[j] = dot(X.col(i), Y.col(j));
    Vector<T> w = normalize ? softmax(raw) : raw;
    for (std::size_t j = 0; j < Y.cols(); ++j) {
      dw[j] = dot(dOut.col(i), Y.col(j));
      axpy(w[j], dOut.col(i), dY.col(j));
    }
    Vector<T> draw = normalize ? softmax_vjp(w, dw) : dw;
    for (std::size_t j = 0; j < Y.cols(); ++j) {
      axpy(draw[j], Y.col(j), dX.col(i));
      axpy(draw[j], X.col(i), dY.col(j));
    }
  }
}

// out = self_attention(M)
template <typename T>
void self_attention_vjp(const Matrix<T>& M, const Matrix<T>& dOut, Matrix<T>& dM) {
  for (std::size_t i = 0; i < M.cols(); ++i) {
    for (std::size_t j = 0; j < M.cols(); ++j) {
      if (i == j) continue;
      T gamma = dot(M.col(i), M.col(j));
      T dgamma = dot(dOut.col(i), M.col(j));
      axpy(gamma, dOut.col(i), dM.col(j));
      axpy(dgamma, M.col(j), dM.col(i));
      axpy(dgamma, M.col(i), dM.col(j));
    }
  }
}

// out = query_to_context(q, M).reweighted
template <typename T>
void query_to_context_vjp(const Vector<T>& q, const Matrix<T>& M,
                          const Matrix<T>& dOut, Vector<T>& dq, Matrix<T>& dM) {
  Vector<T> w = softmax(attention_scores(std::span<const T>(q), M));
  Vector<T> dw(w.size());
  for (std::size_t i = 0; i < M.cols(); ++i) {
    dw[i] = dot(dOut.col(i), M.col(i));
    axpy(w[i], dOut.col(i), dM.col(i));
  }
  Vector<T> ds = softmax_vjp(w, dw);
  for (std::size_t i = 0; i < M.cols(); ++i) {
    axpy(ds[i], M.col(i), std::span<T>(dq));
    axpy(ds[i], std::span<const T>(q), dM.col(i));
  }
}

// u = summarize(query, M); accumulates into dquery and dM.
template <typename T>
void summarize_vjp(const Vector<T>& query, const Matrix<T>& M, const Vector<T>& du,
                   Vector<T>& dquery, Matrix<T>& dM) {
  Vector<T> alpha = softmax(attention_scores(std::span<const T>(query), M));
  Vector<T> dalpha(alpha.size());
  for (std::size_t i = 0; i < M.cols(); ++i) {
    dalpha[i] = dot(std::span<const T>(du), M.col(i));
    axpy(alpha[i], std::span<const T>(du), dM.col(i));
  }
  Vector<T> ds = softmax_vjp(alpha, dalpha);
  for (std::size_t i = 0; i < M.cols(); ++i) {
    axpy(ds[i], M.col(i), std::span<T>(dquery));
    axpy(ds[i], std::span<const T>(query), dM.col(i));
  }
}

// --- HMMN hop chain ---------------------------------------------------------

template <typename T>
struct HopTape {
  Vector<T> u_prev, qstar;
  Vector<T> delta, zeta;
  Matrix<T> Sstar, eps, Vstar;
  Vector<T> u;
};

// Same call sequence as hmmn_hop, with every intermediate kept.
template <typename T>
HopTape<T> hop_tape(const Vector<T>& q, std::span<const T> answer,
                    const Vector<T>& u_prev, const Matrix<T>& S,
                    const Matrix<T>& V, T lambda, bool normalize) {
  HopTape<T> tape;
  tape.u_prev = u_prev;
  tape.qstar.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    tape.qstar[i] = u_prev[i] + answer[i] + lambda * q[i];
  ReweightedMemory<T> rw = query_to_context(std::span<const T>(tape.qstar), S);
  tape.delta = std::move(rw.weights);
  tape.Sstar = std::move(rw.reweighted);
  Coattention<T> co = inter_modal_traced(V, tape.Sstar, normalize);
  tape.eps = std::move(co.weights);
  tape.Vstar = std::move(co.out);
  tape.zeta = softmax(attention_scores(std::span<const T>(tape.qstar), tape.Vstar));
  tape.u = weighted_sum(tape.zeta, tape.Vstar);
  return tape;
}

// Reverse pass through one hop. `du` is the gradient w.r.t. the hop output
// and is replaced by the gradient w.r.t. the previous hop's output; the
// query gradient is split between dq (lambda path), dA (answer path), and
// the returned previous-summary gradient.
template <typename T>
void hop_backward(const HopTape<T>& tape, const Matrix<T>& S, const Matrix<T>& V,
                  T lambda, bool normalize, bool answer_in_query, int answer_index,
                  Vector<T>& du, UpstreamGrads<T>& up) {
  const std::size_t m = S.cols(), n = V.cols(), d = S.rows();

  // u = sum_i zeta_i Vstar_:i
  Vector<T> dzeta(n);
  Matrix<T> dVstar(d, n);
  for (std::size_t i = 0; i < n; ++i) {
    dzeta[i] = dot(std::span<const T>(du), tape.Vstar.col(i));
    axpy(tape.zeta[i], std::span<const T>(du), dVstar.col(i));
  }
  // zeta = softmax(qstar^T Vstar)
  Vector<T> dsz = softmax_vjp(tape.zeta, dzeta);
  Vector<T> dqstar(d, T{});
  for (std::size_t i = 0; i < n; ++i) {
    axpy(dsz[i], tape.Vstar.col(i), std::span<T>(dqstar));
    axpy(dsz[i], std::span<const T>(tape.qstar), dVstar.col(i));
  }
  // Vstar = inter_modal(V, Sstar)
  Matrix<T> dSstar(d, m);
  Vector<T> dw(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      dw[j] = dot(dVstar.col(i), tape.Sstar.col(j));
      axpy(tape.eps(i, j), dVstar.col(i), dSstar.col(j));
    }
    Vector<T> draw;
    if (normalize) {
      Vector<T> wrow(m);
      for (std::size_t j = 0; j < m; ++j) wrow[j] = tape.eps(i, j);
      draw = softmax_vjp(wrow, dw);
    } else {
      draw = dw;
    }
    for (std::size_t j = 0; j < m; ++j) {
      axpy(draw[j], tape.Sstar.col(j), up.dV.col(i));
      axpy(draw[j], V.col(i), dSstar.col(j));
    }
  }
  // Sstar_:j = delta_j S_:j
  Vector<T> ddelta(m);
  for (std::size_t j = 0; j < m; ++j) {
    ddelta[j] = dot(dSstar.col(j), S.col(j));
    axpy(tape.delta[j], dSstar.col(j), up.dS.col(j));
  }
  // delta = softmax(qstar^T S)
  Vector<T> dsd = softmax_vjp(tape.delta, ddelta);
  for (std::size_t j = 0; j < m; ++j) {
    axpy(dsd[j], S.col(j), std::span<T>(dqstar));
    axpy(dsd[j], std::span<const T>(tape.qstar), up.dS.col(j));
  }
  // qstar = u_prev + a_k + lambda q
  axpy(lambda, std::span<const T>(dqstar), std::span<T>(up.dq));
  if (answer_in_query)
    axpy(T(1), std::span<const T>(dqstar),
         up.dA.col(static_cast<std::size_t>(answer_index)));
  du = std::move(dqstar);
}

// Full HMMN backward for one instance: returns upstream encoding gradients
// and fills f/p so the caller can form the loss.
template <typename T>
UpstreamGrads<T> hmmn_instance_backward(const EncodedInstance<T>& enc,
                                        const ForwardOptions<T>& opts,
                                        Vector<T>& f_out, Vector<T>& p_out) {
  const std::size_t d = enc.q.size();
  const Vector<T> zero(d, T{});
  const int chains = opts.answer_in_query ? kAnswerChoices : 1;

  std::vector<std::vector<HopTape<T>>> tapes(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c) {
    Vector<T> u = zero;
    for (std::size_t t = 0; t < opts.hops; ++t) {
      auto ans = opts.answer_in_query ? enc.A.col(static_cast<std::size_t>(c))
                                      : std::span<const T>(zero);
      tapes[static_cast<std::size_t>(c)].push_back(
          hop_tape(enc.q, ans, u, enc.S, enc.V, opts.lambda,
                   opts.normalize_coattention));
      u = tapes[static_cast<std::size_t>(c)].back().u;
    }
  }

  f_out.assign(kAnswerChoices, T{});
  std::vector<Vector<T>> q_plus_u(kAnswerChoices);
  for (int k = 0; k < kAnswerChoices; ++k) {
    const Vector<T>& u = tapes[opts.answer_in_query ? static_cast<std::size_t>(k) : 0]
                             .back()
                             .u;
    q_plus_u[static_cast<std::size_t>(k)].resize(d);
    for (std::size_t i = 0; i < d; ++i)
      q_plus_u[static_cast<std::size_t>(k)][i] = enc.q[i] + u[i];
    f_out[static_cast<std::size_t>(k)] =
        affinity_score(opts.affinity, q_plus_u[static_cast<std::size_t>(k)],
                       enc.A.col(static_cast<std::size_t>(k)));
  }
  p_out = softmax(f_out);

  // d(loss)/d(f) = p - onehot(gold)
  Vector<T> df(kAnswerChoices);
  for (int k = 0; k < kAnswerChoices; ++k)
    df[static_cast<std::size_t>(k)] =
        p_out[static_cast<std::size_t>(k)] - (k == enc.gold ? T(1) : T(0));

  UpstreamGrads<T> up(enc);
  std::vector<Vector<T>> du_chain(static_cast<std::size_t>(chains), Vector<T>(d, T{}));
  for (int k = 0; k < kAnswerChoices; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    Vector<T>& du = du_chain[opts.answer_in_query ? kk : 0];
    if (opts.affinity == AffinityMode::answer_dot) {
      // f_k = (q + u)^T a_k
      axpy(df[kk], enc.A.col(kk), std::span<T>(du));
      axpy(df[kk], enc.A.col(kk), std::span<T>(up.dq));
      axpy(df[kk], std::span<const T>(q_plus_u[kk]), up.dA.col(kk));
    } else {
      // f_k = (q + u)^T (q + u)
      axpy(T(2) * df[kk], std::span<const T>(q_plus_u[kk]), std::span<T>(du));
      axpy(T(2) * df[kk], std::span<const T>(q_plus_u[kk]), std::span<T>(up.dq));
    }
  }

  for (int c = 0; c < chains; ++c) {
    const std::size_t cc = static_cast<std::size_t>(c);
    Vector<T> du = std::move(du_chain[cc]);
    for (std::size_t t = opts.hops; t-- > 0;) {
      hop_backward(tapes[cc][t], enc.S, enc.V, opts.lambda,
                   opts.normalize_coattention, opts.answer_in_query, c, du, up);
    }
    // u_0 = 0: the remaining du has nowhere to flow.
  }
  return up;
}

// --- single-memory baselines over any representation ------------------------

template <typename T>
void side_vjp(const RepresentationSpec::Side& side, const EncodedInstance<T>& enc,
              bool normalize, const Matrix<T>& dValue, UpstreamGrads<T>& up) {
  const bool video = side.base == Modality::video;
  const Matrix<T>& base = video ? enc.V : enc.S;
  const Matrix<T>& other = video ? enc.S : enc.V;
  Matrix<T>& dBase = video ? up.dV : up.dS;
  Matrix<T>& dOther = video ? up.dS : up.dV;
  switch (side.transform) {
    case Transform::identity:
      for (std::size_t i = 0; i < dValue.data().size(); ++i)
        dBase.data()[i] += dValue.data()[i];
      return;
    case Transform::query_ctx:
      query_to_context_vjp(enc.q, base, dValue, up.dq, dBase);
      return;
    case Transform::inter_modal:
      inter_modal_vjp(base, other, normalize, dValue, dBase, dOther);
      return;
    case Transform::self_attn:
      self_attention_vjp(base, dValue, dBase);
      return;
  }
}

template <typename T>
void representation_vjp(const RepresentationSpec& spec, const EncodedInstance<T>& enc,
                        bool normalize, const Matrix<T>& dM, UpstreamGrads<T>& up) {
  if (!spec.right) {
    side_vjp(spec.left, enc, normalize, dM, up);
    return;
  }
  Matrix<T> left = build_side(spec.left, enc, normalize);
  Matrix<T> right = build_side(*spec.right, enc, normalize);
  Matrix<T> dLeft(left.rows(), left.cols());
  Matrix<T> dRight(right.rows(), right.cols());
  inter_modal_vjp(left, right, normalize, dM, dLeft, dRight);
  side_vjp(spec.left, enc, normalize, dLeft, up);
  side_vjp(*spec.right, enc, normalize, dRight, up);
}

template <typename T>
UpstreamGrads<T> e2emn_instance_backward(const EncodedInstance<T>& enc,
                                         const Variant& variant,
                                         const ForwardOptions<T>& opts,
                                         Vector<T>& f_out, Vector<T>& p_out) {
  const std::size_t d = enc.q.size();
  Matrix<T> M;
  switch (variant.kind) {
    case Variant::Kind::e2emn_subtitle: M = enc.S; break;
    case Variant::Kind::e2emn_video: M = enc.V; break;
    default:
      M = build_representation(variant.spec, enc, opts.normalize_coattention);
  }

  // Replay the hops keeping queries and summaries.
  std::vector<Vector<T>> queries, us;
  Vector<T> query = enc.q;
  for (std::size_t h = 0; h < opts.hops; ++h) {
    queries.push_back(query);
    Vector<T> alpha = softmax(attention_scores(std::span<const T>(query), M));
    us.push_back(weighted_sum(alpha, M));
    if (h + 1 < opts.hops)
      for (std::size_t i = 0; i < d; ++i) query[i] = enc.q[i] + us.back()[i];
  }
  Vector<T> q_plus_u(d);
  for (std::size_t i = 0; i < d; ++i) q_plus_u[i] = enc.q[i] + us.back()[i];
  f_out = matvec_t(enc.A, std::span<const T>(q_plus_u));
  p_out = softmax(f_out);

  Vector<T> df(kAnswerChoices);
  for (int k = 0; k < kAnswerChoices; ++k)
    df[static_cast<std::size_t>(k)] =
        p_out[static_cast<std::size_t>(k)] - (k == enc.gold ? T(1) : T(0));

  UpstreamGrads<T> up(enc);
  Matrix<T> dM(M.rows(), M.cols());
  // f = A^T (q + u_H)
  Vector<T> dy(d, T{});
  for (int k = 0; k < kAnswerChoices; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    axpy(df[kk], std::span<const T>(q_plus_u), up.dA.col(kk));
    axpy(df[kk], enc.A.col(kk), std::span<T>(dy));
  }
  axpy(T(1), std::span<const T>(dy), std::span<T>(up.dq));

  Vector<T> du = std::move(dy);
  for (std::size_t h = opts.hops; h-- > 0;) {
    Vector<T> dquery(d, T{});
    summarize_vjp(queries[h], M, du, dquery, dM);
    axpy(T(1), std::span<const T>(dquery), std::span<T>(up.dq));
    du = std::move(dquery);  // gradient w.r.t. u_{h-1} via query_h = q + u_{h-1}
  }

  switch (variant.kind) {
    case Variant::Kind::e2emn_subtitle:
      for (std::size_t i = 0; i < dM.data().size(); ++i) up.dS.data()[i] += dM.data()[i];
      break;
    case Variant::Kind::e2emn_video:
      for (std::size_t i = 0; i < dM.data().size(); ++i) up.dV.data()[i] += dM.data()[i];
      break;
    default:
      representation_vjp(variant.spec, enc, opts.normalize_coattention, dM, up);
  }
  return up;
}

// --- encoder backward --------------------------------------------------------

// From the upstream gradients at (S, V, q, A) down to dW1, dW2. Mirrors the
// encoder recipe: sentence-ish columns contribute mean-wordvec outer
// products to W1; frame columns additionally run back through the
// vocabulary-attention stage into W2.
template <typename T>
void encode_backward(const RawInstance<T>& raw, const Vocabulary<T>& vocab,
                     const ModelParams<T>& params, const UpstreamGrads<T>& up,
                     Matrix<T>& dW1, Matrix<T>& dW2) {
  auto sentence_contrib = [&](const std::vector<std::string>& tokens,
                              std::span<const T> g, const char* what) {
    Vector<T> mean = mean_word_vector(tokens, vocab, what);
    add_outer(dW1, std::span<const T>(mean), g);
  };

  sentence_contrib(raw.question, std::span<const T>(up.dq), "question");
  for (int k = 0; k < kAnswerChoices; ++k)
    sentence_contrib(raw.answers[static_cast<std::size_t>(k)],
                     up.dA.col(static_cast<std::size_t>(k)), "answer");
  for (std::size_t i = 0; i < raw.subtitles.size(); ++i)
    sentence_contrib(raw.subtitles[i], up.dS.col(i), "subtitle");

  for (std::size_t j = 0; j < raw.frames.size(); ++j) {
    const auto& regions = raw.frames[j];
    Vector<T> base = frame_word_content(regions, vocab, params.W2, "frame");
    add_outer(dW1, std::span<const T>(base), up.dV.col(j));

    Vector<T> db = matvec(params.W1, up.dV.col(j));
    T inv = T(1) / static_cast<T>(regions.size());
    Vector<T> drep(vocab.word_dim());
    for (std::size_t i = 0; i < drep.size(); ++i) drep[i] = db[i] * inv;
    for (const auto& region : regions) {
      Vector<T> z = matvec_t(params.W2, std::span<const T>(region));
      Vector<T> attn = softmax(matvec_t(vocab.vectors, std::span<const T>(z)));
      Vector<T> dattn = matvec_t(vocab.vectors, std::span<const T>(drep));
      Vector<T> dscores = softmax_vjp(attn, dattn);
      Vector<T> dz = matvec(vocab.vectors, std::span<const T>(dscores));
      add_outer(dW2, std::span<const T>(region), std::span<const T>(dz));
    }
  }
}

template <typename T>
Gradients<T> instance_backward(const RawInstance<T>& raw, const Vocabulary<T>& vocab,
                               const ModelParams<T>& params, const GradOptions<T>& opts) {
  EncodedInstance<T> enc = encode_instance(raw, vocab, params);
  ForwardOptions<T> fwd = forward_options(params);
  fwd.affinity = opts.affinity;
  fwd.normalize_coattention = opts.normalize_coattention;

  Vector<T> f, p;
  UpstreamGrads<T> up(enc);
  switch (opts.variant.kind) {
    case Variant::Kind::hmmn:
      fwd.answer_in_query = true;
      up = hmmn_instance_backward(enc, fwd, f, p);
      break;
    case Variant::Kind::hmmn_no_answer:
      fwd.answer_in_query = false;
      up = hmmn_instance_backward(enc, fwd, f, p);
      break;
    default:
      up = e2emn_instance_backward(enc, opts.variant, fwd, f, p);
      break;
  }

  Gradients<T> g;
  g.dW1 = Matrix<T>(params.d_w(), params.d());
  g.dW2 = Matrix<T>(params.d_r(), params.d_w());
  g.loss_value = -std::log(p[static_cast<std::size_t>(enc.gold)]);
  encode_backward(raw, vocab, params, up, g.dW1, g.dW2);
  return g;
}

}  // namespace detail

// Mean loss over a batch and its gradients w.r.t. W1, W2. Instances are
// processed independently (optionally in parallel) and reduced in batch
// order, so results do not depend on the thread count.
template <typename T>
Gradients<T> backward(const std::vector<RawInstance<T>>& batch,
                      const Vocabulary<T>& vocab, const ModelParams<T>& params,
                      const GradOptions<T>& opts = {}) {
  if (batch.empty()) throw DimensionError("backward: empty batch");
  params.validate();

  std::vector<Gradients<T>> per(batch.size());
  parallel_for(batch.size(), opts.threads, [&](std::size_t i) {
    per[i] = detail::instance_backward(batch[i], vocab, params, opts);
  });

  Gradients<T> g;
  g.dW1 = Matrix<T>(params.d_w(), params.d());
  g.dW2 = Matrix<T>(params.d_r(), params.d_w());
  const T inv = T(1) / static_cast<T>(batch.size());
  for (const auto& gi : per) {
    g.loss_value += gi.loss_value * inv;
    for (std::size_t i = 0; i < g.dW1.data().size(); ++i)
      g.dW1.data()[i] += gi.dW1.data()[i] * inv;
    for (std::size_t i = 0; i < g.dW2.data().size(); ++i)
      g.dW2.data()[i] += gi.dW2.data()[i] * inv;
  }
  return g;
}

// Forward-only mean batch loss; this is the function the finite-difference
// oracle probes, so it must share nothing with the backward path.
template <typename T>
T batch_loss(const std::vector<RawInstance<T>>& batch, const Vocabulary<T>& vocab,
             const ModelParams<T>& params, const GradOptions<T>& opts = {}) {
  if (batch.empty()) throw DimensionError("batch_loss: empty batch");
  ForwardOptions<T> fwd = forward_options(params);
  fwd.affinity = opts.affinity;
  fwd.normalize_coattention = opts.normalize_coattention;
  T total{};
  for (const auto& raw : batch) {
    EncodedInstance<T> enc = encode_instance(raw, vocab, params);
    Prediction<T> pred = forward_variant(enc, opts.variant, fwd);
    total += loss(pred, enc.gold);
  }
  return total / static_cast<T>(batch.size());
}

// Central finite differences over every entry of W1 and W2. Only meaningful
// in 64-bit mode; intended for toy dimensions (cost is two forward passes
// per parameter entry).
template <typename T>
Gradients<T> finite_diff_grad(const std::vector<RawInstance<T>>& batch,
                              const Vocabulary<T>& vocab, const ModelParams<T>& params,
                              T h, const GradOptions<T>& opts = {}) {
  if (!(h > T(0))) throw ConfigError("finite_diff_grad: h must be positive");
  Gradients<T> g;
  g.dW1 = Matrix<T>(params.d_w(), params.d());
  g.dW2 = Matrix<T>(params.d_r(), params.d_w());
  g.loss_value = batch_loss(batch, vocab, params, opts);

  ModelParams<T> probe = params;
  auto central = [&](Matrix<T>& W, std::size_t idx) {
    T saved = W.data()[idx];
    W.data()[idx] = saved + h;
    T up = batch_loss(batch, vocab, probe, opts);
    W.data()[idx] = saved - h;
    T down = batch_loss(batch, vocab, probe, opts);
    W.data()[idx] = saved;
    return (up - down) / (T(2) * h);
  };
  for (std::size_t i = 0; i < probe.W1.data().size(); ++i)
    g.dW1.data()[i] = central(probe.W1, i);
  for (std::size_t i = 0; i < probe.W2.data().size(); ++i)
    g.dW2.data()[i] = central(probe.W2, i);
  return g;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

struct MatrixCheck {
  double max_rel = 0.0;
  double median_rel = 0.0;
  std::size_t checked = 0;
};

template <typename T>
struct GradCheckReport {
  MatrixCheck w1, w2;
  T loss_value{};
  bool pass(double tol) const { return w1.max_rel < tol && w2.max_rel < tol; }
};

// Compares analytic gradients against central differences. Large matrices
// are subsampled (at most `max_entries` randomly chosen entries each) since
// the full comparison costs two forward passes per entry.
template <typename T>
GradCheckReport<T> grad_check(const std::vector<RawInstance<T>>& batch,
                              const Vocabulary<T>& vocab, const ModelParams<T>& params,
                              T h, std::size_t max_entries = 500,
                              std::uint64_t seed = 0, const GradOptions<T>& opts = {}) {
  Gradients<T> analytic = backward(batch, vocab, params, opts);
  GradCheckReport<T> report;
  report.loss_value = analytic.loss_value;

  ModelParams<T> probe = params;
  auto check_matrix = [&](Matrix<T>& W, const Matrix<T>& dW, const char* label) {
    std::vector<std::size_t> entries(W.data().size());
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
    if (entries.size() > max_entries) {
      SplitMix64 rng(derive_seed(seed, label));
      shuffle(entries, rng);
      entries.resize(max_entries);
    }
    std::vector<double> rel;
    rel.reserve(entries.size());
    for (std::size_t idx : entries) {
      T saved = W.data()[idx];
      W.data()[idx] = saved + h;
      T up = batch_loss(batch, vocab, probe, opts);
      W.data()[idx] = saved - h;
      T down = batch_loss(batch, vocab, probe, opts);
      W.data()[idx] = saved;
      double fd = static_cast<double>((up - down) / (T(2) * h));
      rel.push_back(relative_error(static_cast<double>(dW.data()[idx]), fd));
    }
    std::sort(rel.begin(), rel.end());
    MatrixCheck mc;
    mc.checked = rel.size();
    mc.max_rel = rel.empty() ? 0.0 : rel.back();
    mc.median_rel = rel.empty() ? 0.0 : rel[rel.size() / 2];
    return mc;
  };
  report.w1 = check_matrix(probe.W1, analytic.dW1, "gradcheck-w1");
  report.w2 = check_matrix(probe.W2, analytic.dW2, "gradcheck-w2");
  return report;
}

}  // namespace hmmn
