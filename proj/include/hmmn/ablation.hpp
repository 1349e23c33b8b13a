#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hmmn/model.hpp"

namespace hmmn {

// The attention-strategy baselines: every single-stage representation
// (identity, query-to-context ', inter-modal bar, self-attention hat) of
// either modality, plus every two-stage "X attends to Y" pairing of a video
// variant with a subtitle variant. Each result is a drop-in memory matrix
// for the single-memory baseline network.

enum class Modality { subtitle, video };
enum class Transform { identity, query_ctx, inter_modal, self_attn };

struct RepresentationSpec {
  struct Side {
    Modality base = Modality::subtitle;
    Transform transform = Transform::identity;
    friend bool operator==(const Side&, const Side&) = default;
  };

  Side left;
  std::optional<Side> right;  // engaged: two-stage, left attends to right

  friend bool operator==(const RepresentationSpec&, const RepresentationSpec&) = default;
};

inline std::string to_string(const RepresentationSpec::Side& s) {
  std::string base = s.base == Modality::video ? "V" : "S";
  switch (s.transform) {
    case Transform::identity: return base;
    case Transform::query_ctx: return base + "'";
    case Transform::inter_modal: return base + "bar";
    case Transform::self_attn: return base + "hat";
  }
  return base;
}

inline std::string to_string(const RepresentationSpec& spec) {
  std::string s = to_string(spec.left);
  if (spec.right) s += "->" + to_string(*spec.right);
  return s;
}

inline RepresentationSpec::Side parse_side(const std::string& text) {
  RepresentationSpec::Side side;
  if (text.empty()) throw ConfigError("representation spec: empty side");
  switch (text[0]) {
    case 'V': side.base = Modality::video; break;
    case 'S': side.base = Modality::subtitle; break;
    default: throw ConfigError("representation spec: bad modality in '" + text + "'");
  }
  std::string rest = text.substr(1);
  if (rest.empty()) side.transform = Transform::identity;
  else if (rest == "'") side.transform = Transform::query_ctx;
  else if (rest == "bar") side.transform = Transform::inter_modal;
  else if (rest == "hat") side.transform = Transform::self_attn;
  else throw ConfigError("representation spec: bad transform in '" + text + "'");
  return side;
}

inline RepresentationSpec parse_spec(const std::string& text) {
  RepresentationSpec spec;
  auto arrow = text.find("->");
  if (arrow == std::string::npos) {
    spec.left = parse_side(text);
  } else {
    spec.left = parse_side(text.substr(0, arrow));
    spec.right = parse_side(text.substr(arrow + 2));
    if (spec.right->base == spec.left.base)
      throw ConfigError("representation spec: two-stage sides must differ in modality ('" +
                        text + "')");
  }
  return spec;
}

// All 40 baseline combinations: the 8 single-stage variants, then the 32
// two-stage pairings, each video->subtitle combination followed by its
// subtitle->video mirror.
inline std::vector<RepresentationSpec> enumerate_specs() {
  using Side = RepresentationSpec::Side;
  const Transform transforms[] = {Transform::identity, Transform::query_ctx,
                                  Transform::inter_modal, Transform::self_attn};
  std::vector<RepresentationSpec> specs;
  specs.reserve(40);
  for (Transform t : transforms) {
    specs.push_back({Side{Modality::video, t}, std::nullopt});
    specs.push_back({Side{Modality::subtitle, t}, std::nullopt});
  }
  for (Transform vt : transforms) {
    for (Transform st : transforms) {
      specs.push_back({Side{Modality::video, vt}, Side{Modality::subtitle, st}});
      specs.push_back({Side{Modality::subtitle, st}, Side{Modality::video, vt}});
    }
  }
  return specs;
}

namespace detail {

template <typename T>
Matrix<T> build_side(const RepresentationSpec::Side& side,
                     const EncodedInstance<T>& enc, bool normalize,
                     std::vector<StageTrace<T>>* stages = nullptr) {
  const Matrix<T>& base = side.base == Modality::video ? enc.V : enc.S;
  const Matrix<T>& other = side.base == Modality::video ? enc.S : enc.V;
  switch (side.transform) {
    case Transform::identity: return base;
    case Transform::query_ctx: {
      ReweightedMemory<T> rw = query_to_context(std::span<const T>(enc.q), base);
      if (stages) {
        Matrix<T> w(1, rw.weights.size());
        for (std::size_t i = 0; i < rw.weights.size(); ++i) w(0, i) = rw.weights[i];
        stages->push_back({"alpha:" + to_string(side), std::move(w)});
      }
      return std::move(rw.reweighted);
    }
    case Transform::inter_modal: {
      Coattention<T> co = inter_modal_traced(base, other, normalize);
      if (stages) stages->push_back({"beta:" + to_string(side), co.weights});
      return std::move(co.out);
    }
    case Transform::self_attn: {
      if (stages) {
        Matrix<T> gamma(base.cols(), base.cols());
        for (std::size_t i = 0; i < base.cols(); ++i)
          for (std::size_t j = 0; j < base.cols(); ++j)
            if (i != j) gamma(i, j) = dot(base.col(i), base.col(j));
        stages->push_back({"gamma:" + to_string(side), std::move(gamma)});
      }
      return self_attention(base);
    }
  }
  throw ConfigError("build_side: unknown transform");
}

}  // namespace detail

// Materializes the memory matrix a spec names. Two-stage specs compose the
// inter-modal primitive over the two transformed sides; the question from
// `enc` drives every query-to-context stage. When `stages` is given, every
// intermediate attention weight (alpha/beta/gamma) is recorded in build order.
template <typename T>
Matrix<T> build_representation(const RepresentationSpec& spec,
                               const EncodedInstance<T>& enc, bool normalize = false,
                               std::vector<StageTrace<T>>* stages = nullptr) {
  Matrix<T> left = detail::build_side(spec.left, enc, normalize, stages);
  if (!spec.right) return left;
  if (spec.right->base == spec.left.base)
    throw ConfigError("build_representation: two-stage sides must differ in modality");
  Matrix<T> right = detail::build_side(*spec.right, enc, normalize, stages);
  Coattention<T> co = inter_modal_traced(left, right, normalize);
  if (stages) stages->push_back({"beta:" + to_string(spec), co.weights});
  return std::move(co.out);
}

// ---------------------------------------------------------------------------
// Model variants shared by training, evaluation, gradients and the CLI.
// ---------------------------------------------------------------------------

struct Variant {
  enum class Kind { hmmn, hmmn_no_answer, e2emn_subtitle, e2emn_video, ablation };
  Kind kind = Kind::hmmn;
  RepresentationSpec spec;  // used when kind == ablation

  friend bool operator==(const Variant&, const Variant&) = default;
};

inline std::string to_string(const Variant& v) {
  switch (v.kind) {
    case Variant::Kind::hmmn: return "hmmn";
    case Variant::Kind::hmmn_no_answer: return "hmmn-no-answer";
    case Variant::Kind::e2emn_subtitle: return "e2emn-S";
    case Variant::Kind::e2emn_video: return "e2emn-V";
    case Variant::Kind::ablation: return "ablation:" + to_string(v.spec);
  }
  return "hmmn";
}

inline Variant parse_variant(const std::string& text) {
  Variant v;
  if (text == "hmmn") v.kind = Variant::Kind::hmmn;
  else if (text == "hmmn-no-answer") v.kind = Variant::Kind::hmmn_no_answer;
  else if (text == "e2emn-S") v.kind = Variant::Kind::e2emn_subtitle;
  else if (text == "e2emn-V") v.kind = Variant::Kind::e2emn_video;
  else if (text.rfind("ablation:", 0) == 0) {
    v.kind = Variant::Kind::ablation;
    v.spec = parse_spec(text.substr(9));
  } else {
    throw ConfigError("unknown model variant '" + text + "'");
  }
  return v;
}

// Forward pass for any variant. HMMN variants honor every option; the
// single-memory variants use hops/normalize_coattention/want_trace only.
template <typename T>
Prediction<T> forward_variant(const EncodedInstance<T>& enc, const Variant& variant,
                              const ForwardOptions<T>& opts) {
  switch (variant.kind) {
    case Variant::Kind::hmmn: {
      ForwardOptions<T> o = opts;
      o.answer_in_query = true;
      return hmmn_forward(enc, o);
    }
    case Variant::Kind::hmmn_no_answer: {
      ForwardOptions<T> o = opts;
      o.answer_in_query = false;
      return hmmn_forward(enc, o);
    }
    case Variant::Kind::e2emn_subtitle:
      return e2emn_forward(enc.q, enc.S, enc.A, opts.hops, opts.want_trace);
    case Variant::Kind::e2emn_video:
      return e2emn_forward(enc.q, enc.V, enc.A, opts.hops, opts.want_trace);
    case Variant::Kind::ablation: {
      std::vector<StageTrace<T>> stages;
      Matrix<T> M = build_representation(variant.spec, enc, opts.normalize_coattention,
                                         opts.want_trace ? &stages : nullptr);
      Prediction<T> pred = e2emn_forward(enc.q, M, enc.A, opts.hops, opts.want_trace);
      if (pred.trace) pred.trace->stages = std::move(stages);
      return pred;
    }
  }
  throw ConfigError("forward_variant: unknown variant");
}

}  // namespace hmmn
