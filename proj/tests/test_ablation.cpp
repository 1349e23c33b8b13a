#include <doctest.h>

#include "helpers.hpp"
#include "hmmn/ablation.hpp"

using namespace hmmn;

TEST_SUITE("ablation") {

TEST_CASE("enumerate_specs lists all 40 combinations in a stable order") {
  auto specs = enumerate_specs();
  REQUIRE(specs.size() == 40);

  CHECK(to_string(specs[0]) == "V");
  CHECK(to_string(specs[1]) == "S");
  CHECK(to_string(specs[2]) == "V'");
  CHECK(to_string(specs[3]) == "S'");
  CHECK(to_string(specs[4]) == "Vbar");
  CHECK(to_string(specs[5]) == "Sbar");
  CHECK(to_string(specs[6]) == "Vhat");
  CHECK(to_string(specs[7]) == "Shat");
  CHECK(to_string(specs[8]) == "V->S");
  CHECK(to_string(specs[9]) == "S->V");
  CHECK(to_string(specs[10]) == "V->S'");
  CHECK(to_string(specs[11]) == "S'->V");
  CHECK(to_string(specs[39]) == "Shat->Vhat");

  std::size_t single = 0, paired = 0;
  bool has_v_sprime = false;
  for (const auto& spec : specs) {
    (spec.right ? paired : single) += 1;
    if (to_string(spec) == "V->S'") has_v_sprime = true;
  }
  CHECK(single == 8);
  CHECK(paired == 32);
  CHECK(has_v_sprime);
}

TEST_CASE("spec names parse back to themselves") {
  for (const auto& spec : enumerate_specs()) {
    CHECK(parse_spec(to_string(spec)) == spec);
  }
  CHECK_THROWS_AS(parse_spec("X"), ConfigError);
  CHECK_THROWS_AS(parse_spec("Vfoo"), ConfigError);
  CHECK_THROWS_AS(parse_spec("V->Vbar"), ConfigError);  // same modality twice
  CHECK_THROWS_AS(parse_spec(""), ConfigError);
}

TEST_CASE("identity specs return the encodings unchanged") {
  SplitMix64 rng(60);
  auto enc = testutil::random_encoded(rng, 4, 3, 2);
  CHECK(build_representation(parse_spec("S"), enc) == enc.S);
  CHECK(build_representation(parse_spec("V"), enc) == enc.V);
}

TEST_CASE("self-attention spec of orthogonal columns is the zero matrix") {
  SplitMix64 rng(61);
  auto enc = testutil::random_encoded(rng, 3, 2, 2);
  enc.S = Matrix<double>(3, 2);
  enc.S(0, 0) = 1.0;
  enc.S(1, 1) = -2.0;
  auto out = build_representation(parse_spec("Shat"), enc);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("V->S' equals the manual oracle composition") {
  SplitMix64 rng(62);
  auto enc = testutil::random_encoded(rng, 4, 3, 2);
  auto got = build_representation(parse_spec("V->S'"), enc);

  auto sprime = oracle::o_query_to_context(enc.q, testutil::to_cols(enc.S));
  auto want = oracle::o_inter_modal(testutil::to_cols(enc.V), sprime.cols);
  CHECK(testutil::max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("Sbar->V' equals the manual oracle composition") {
  SplitMix64 rng(63);
  auto enc = testutil::random_encoded(rng, 4, 3, 2);
  auto got = build_representation(parse_spec("Sbar->V'"), enc);

  auto sbar = oracle::o_inter_modal(testutil::to_cols(enc.S), testutil::to_cols(enc.V));
  auto vprime = oracle::o_query_to_context(enc.q, testutil::to_cols(enc.V));
  auto want = oracle::o_inter_modal(sbar, vprime.cols);
  CHECK(testutil::max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("every spec's output dimension is set by its left operand") {
  SplitMix64 rng(64);
  const std::size_t d = 5, m = 4, n = 3;
  auto enc = testutil::random_encoded(rng, d, m, n);
  for (const auto& spec : enumerate_specs()) {
    auto out = build_representation(spec, enc);
    CHECK(out.rows() == d);
    CHECK(out.cols() == (spec.left.base == Modality::video ? n : m));
  }
}

TEST_CASE("two-stage specs with matching modalities are rejected") {
  RepresentationSpec bad;
  bad.left = {Modality::video, Transform::identity};
  bad.right = RepresentationSpec::Side{Modality::video, Transform::query_ctx};
  SplitMix64 rng(65);
  auto enc = testutil::random_encoded(rng, 3, 2, 2);
  CHECK_THROWS_AS(build_representation(bad, enc), ConfigError);
}

TEST_CASE("1-layer HMMN without answer attention degenerates to V->S'") {
  SplitMix64 rng(66);
  for (int trial = 0; trial < 20; ++trial) {
    auto enc = testutil::random_encoded(rng, 4, 3, 2);

    // exact degeneration requires the hop query to be the bare question
    ForwardOptions<double> opts;
    opts.hops = 1;
    opts.lambda = 1.0;
    opts.answer_in_query = false;
    auto hmmn_pred = hmmn_forward(enc, opts);

    auto M = build_representation(parse_spec("V->S'"), enc);
    auto base_pred = e2emn_forward(enc.q, M, enc.A, 1);

    CHECK(testutil::max_abs_diff(hmmn_pred.f, base_pred.f) < 1e-10);
    CHECK(testutil::max_abs_diff(hmmn_pred.p, base_pred.p) < 1e-10);
    CHECK(hmmn_pred.argmax == base_pred.argmax);
  }
}

TEST_CASE("variant names round-trip") {
  for (const char* name : {"hmmn", "hmmn-no-answer", "e2emn-S", "e2emn-V",
                           "ablation:V->S'", "ablation:Shat"}) {
    CHECK(to_string(parse_variant(name)) == name);
  }
  CHECK_THROWS_AS(parse_variant("lstm"), ConfigError);
}

TEST_CASE("ablation traces record the representation-building weights") {
  SplitMix64 rng(68);
  auto enc = testutil::random_encoded(rng, 4, 3, 2);
  ForwardOptions<double> opts;
  opts.hops = 1;
  opts.want_trace = true;
  auto pred = forward_variant(enc, parse_variant("ablation:Vhat->S'"), opts);
  REQUIRE(pred.trace.has_value());
  CHECK(pred.trace->alpha.size() == 1);  // one e2emn hop over the built memory
  REQUIRE(pred.trace->stages.size() == 3);
  CHECK(pred.trace->stages[0].name == "gamma:Vhat");
  CHECK(pred.trace->stages[0].weights.rows() == 2);  // n x n, zero diagonal
  CHECK(pred.trace->stages[0].weights(0, 0) == 0.0);
  CHECK(pred.trace->stages[1].name == "alpha:S'");
  CHECK(pred.trace->stages[1].weights.rows() == 1);  // simplex row over m
  CHECK(pred.trace->stages[1].weights.cols() == 3);
  CHECK(pred.trace->stages[2].name == "beta:Vhat->S'");
  CHECK(pred.trace->stages[2].weights.rows() == 2);  // n x m coattention
  CHECK(pred.trace->stages[2].weights.cols() == 3);
}

TEST_CASE("forward_variant dispatches every variant") {
  SplitMix64 rng(67);
  auto enc = testutil::random_encoded(rng, 4, 3, 2);
  ForwardOptions<double> opts;
  opts.hops = 2;

  auto h = forward_variant(enc, parse_variant("hmmn"), opts);
  auto hn = forward_variant(enc, parse_variant("hmmn-no-answer"), opts);
  CHECK(testutil::max_abs_diff(h.f, hn.f) > 0.0);  // answers matter

  auto es = forward_variant(enc, parse_variant("e2emn-S"), opts);
  auto want_s = e2emn_forward(enc.q, enc.S, enc.A, 2);
  CHECK(testutil::max_abs_diff(es.f, want_s.f) == 0.0);

  auto ev = forward_variant(enc, parse_variant("e2emn-V"), opts);
  auto want_v = e2emn_forward(enc.q, enc.V, enc.A, 2);
  CHECK(testutil::max_abs_diff(ev.f, want_v.f) == 0.0);

  auto ab = forward_variant(enc, parse_variant("ablation:Vbar"), opts);
  auto want_ab = e2emn_forward(enc.q, inter_modal(enc.V, enc.S), enc.A, 2);
  CHECK(testutil::max_abs_diff(ab.f, want_ab.f) == 0.0);
}

}  // TEST_SUITE
