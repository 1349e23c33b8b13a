// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code 0 only if all pass.
// argv[1] must be the path to the hmmn CLI binary (used by the determinism
// criterion).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "hmmn/json_io.hpp"
#include "oracle.hpp"

using namespace hmmn;

namespace {

struct Criterion {
  int index;
  std::string label;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<Criterion> g_results;

template <typename Fn>
void run_criterion(int index, const std::string& label, Fn&& fn) {
  Criterion c;
  c.index = index;
  c.label = label;
  auto start = std::chrono::steady_clock::now();
  try {
    c.pass = fn(c.detail);
  } catch (const std::exception& e) {
    c.pass = false;
    c.detail = std::string("exception: ") + e.what();
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("criterion %d: %s — %s (%s, %.1fs)\n", c.index,
              c.pass ? "PASS" : "FAIL", c.label.c_str(),
              c.detail.empty() ? "ok" : c.detail.c_str(), c.seconds);
  std::fflush(stdout);
  g_results.push_back(std::move(c));
}

oracle::Cols to_cols(const Matrix<double>& m) {
  oracle::Cols cols;
  for (std::size_t j = 0; j < m.cols(); ++j) cols.push_back(m.col_copy(j));
  return cols;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

EncodedInstance<double> random_encoded(SplitMix64& rng, std::size_t d, std::size_t m,
                                       std::size_t n) {
  EncodedInstance<double> enc;
  enc.S = Matrix<double>(d, m);
  enc.V = Matrix<double>(d, n);
  enc.A = Matrix<double>(d, kAnswerChoices);
  enc.q.resize(d);
  for (auto& x : enc.S.data()) x = rng.uniform(-1.0, 1.0);
  for (auto& x : enc.V.data()) x = rng.uniform(-1.0, 1.0);
  for (auto& x : enc.A.data()) x = rng.uniform(-1.0, 1.0);
  for (auto& x : enc.q) x = rng.uniform(-1.0, 1.0);
  enc.gold = static_cast<int>(rng.next_index(kAnswerChoices));
  return enc;
}

// --- criterion 1: analytic gradients vs central finite differences ----------

bool criterion_gradients(std::string& detail) {
  const std::size_t d = 8, d_w = 6, d_r = 5, m = 4, n = 3, vocab_size = 10;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto vocab = random_vocabulary<double>(vocab_size, d_w, derive_seed(seed, "acc1-vocab"));
    auto params = init_params<double>(d, d_w, d_r, 0.45, 2, derive_seed(seed, "acc1-params"));
    SplitMix64 rng(derive_seed(seed, "acc1-data"));
    std::vector<RawInstance<double>> batch{
        random_instance<double>(rng, vocab, m, n, 3, 3, d_r)};

    auto analytic = backward(batch, vocab, params);
    auto fd = finite_diff_grad(batch, vocab, params, 1e-5);
    for (std::size_t i = 0; i < analytic.dW1.data().size(); ++i)
      worst = std::max(worst, relative_error(analytic.dW1.data()[i], fd.dW1.data()[i]));
    for (std::size_t i = 0; i < analytic.dW2.data().size(); ++i)
      worst = std::max(worst, relative_error(analytic.dW2.data()[i], fd.dW2.data()[i]));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max rel err %.3e over 20 seeds (tol 1e-4)", worst);
  detail = buf;
  return worst < 1e-4;
}

// --- criterion 2: forward pass vs the scalar-loop oracle --------------------

bool criterion_oracle_equivalence(std::string& detail) {
  SplitMix64 rng(20250808);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t d = 3 + rng.next_index(6);
    std::size_t m = 1 + rng.next_index(6);
    std::size_t n = 1 + rng.next_index(5);
    auto enc = random_encoded(rng, d, m, n);
    auto s = to_cols(enc.S), v = to_cols(enc.V), a = to_cols(enc.A);

    for (bool with_answer : {true, false}) {
      ForwardOptions<double> opts;
      opts.hops = 2;
      opts.lambda = 0.45;
      opts.answer_in_query = with_answer;
      auto pred = hmmn_forward(enc, opts);
      auto want = oracle::o_hmmn_forward(enc.q, s, v, a, 0.45, 2, with_answer);
      worst = std::max(worst, max_abs_diff(pred.f, want.f));
      worst = std::max(worst, max_abs_diff(pred.p, want.p));
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max |impl - oracle| %.3e over 100 instances (tol 1e-10)",
                worst);
  detail = buf;
  return worst < 1e-10;
}

// --- criterion 3: 1-layer no-answer HMMN degenerates to V->S' ----------------

bool criterion_degeneration(std::string& detail) {
  SplitMix64 rng(333);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t d = 3 + rng.next_index(5);
    std::size_t m = 1 + rng.next_index(5);
    std::size_t n = 1 + rng.next_index(4);
    auto enc = random_encoded(rng, d, m, n);

    ForwardOptions<double> opts;
    opts.hops = 1;
    opts.lambda = 1.0;  // the degeneration is exact at lambda = 1
    opts.answer_in_query = false;
    auto hmmn_pred = hmmn_forward(enc, opts);

    auto M = build_representation(parse_spec("V->S'"), enc);
    auto base = e2emn_forward(enc.q, M, enc.A, 1);
    worst = std::max(worst, max_abs_diff(hmmn_pred.f, base.f));
    worst = std::max(worst, max_abs_diff(hmmn_pred.p, base.p));
    if (hmmn_pred.argmax != base.argmax) return false;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max |hmmn - baseline| %.3e over 50 instances (tol 1e-10)",
                worst);
  detail = buf;
  return worst < 1e-10;
}

// --- criterion 4: synthetic learnability and the ablation ordering -----------

bool criterion_learnability(std::string& detail) {
  SyntheticConfig cfg;
  cfg.instances = 600;
  cfg.mode = CueMode::answer_required;
  cfg.seed = 7;
  auto made = generate_synthetic<double>(cfg);

  Dataset<double> train_set, dev_set;
  train_set.name = "acc4/train";
  dev_set.name = "acc4/dev";
  for (std::size_t i = 0; i < 500; ++i)
    train_set.instances.push_back(made.dataset.instances[i]);
  for (std::size_t i = 500; i < 600; ++i)
    dev_set.instances.push_back(made.dataset.instances[i]);

  TrainConfig<double> tcfg;
  tcfg.seed = 7;
  tcfg.d = cfg.d;
  tcfg.d_w = cfg.d_w;
  tcfg.d_r = cfg.d_r;

  tcfg.variant = parse_variant("hmmn");
  auto with_answer = train(tcfg, train_set, dev_set, made.vocab);

  tcfg.variant = parse_variant("hmmn-no-answer");
  auto without_answer = train(tcfg, train_set, dev_set, made.vocab);

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "hmmn dev acc %.3f (need >= 0.90), w/o answers %.3f (need gap >= 0.10)",
                with_answer.metrics.accuracy, without_answer.metrics.accuracy);
  detail = buf;
  return with_answer.metrics.accuracy >= 0.90 &&
         with_answer.metrics.accuracy - without_answer.metrics.accuracy >= 0.10;
}

// --- criterion 5: ablation enumeration completeness ---------------------------

bool criterion_enumeration(std::string& detail) {
  auto specs = enumerate_specs();
  std::size_t single = 0, paired = 0;
  for (const auto& spec : specs) (spec.right ? paired : single) += 1;

  SplitMix64 rng(55);
  const std::size_t d = 6, m = 5, n = 4;
  auto enc = random_encoded(rng, d, m, n);
  bool shapes_ok = true;
  for (const auto& spec : specs) {
    auto out = build_representation(spec, enc);
    std::size_t want_cols = spec.left.base == Modality::video ? n : m;
    shapes_ok = shapes_ok && out.rows() == d && out.cols() == want_cols;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%zu single + %zu paired specs, shapes %s",
                single, paired, shapes_ok ? "ok" : "wrong");
  detail = buf;
  return specs.size() == 40 && single == 8 && paired == 32 && shapes_ok;
}

// --- criterion 6: invariant suite ---------------------------------------------

bool criterion_invariants(std::string& detail) {
  SplitMix64 rng(66);
  std::string failure;

  // softmax simplex + shift invariance
  for (int trial = 0; trial < 40 && failure.empty(); ++trial) {
    std::size_t k = 1 + rng.next_index(7);
    Vector<double> scores(k);
    for (auto& x : scores) x = rng.uniform(-20.0, 20.0);
    auto p = softmax(scores);
    double sum = 0;
    for (double x : p) {
      if (!(x > 0)) failure = "softmax positivity";
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) failure = "softmax simplex";
    auto shifted = scores;
    for (auto& x : shifted) x += 17.5;
    if (max_abs_diff(softmax(shifted), p) > 1e-12) failure = "softmax shift invariance";
  }

  // summarize stays in the columns' coordinate hull, permutation invariant
  for (int trial = 0; trial < 40 && failure.empty(); ++trial) {
    std::size_t d = 2 + rng.next_index(4), m = 1 + rng.next_index(6);
    Matrix<double> M(d, m);
    for (auto& x : M.data()) x = rng.uniform(-2.0, 2.0);
    Vector<double> q(d);
    for (auto& x : q) x = rng.uniform(-2.0, 2.0);
    auto u = summarize(q, M);
    for (std::size_t r = 0; r < d; ++r) {
      double lo = M(r, 0), hi = M(r, 0);
      for (std::size_t j = 1; j < m; ++j) {
        lo = std::min(lo, M(r, j));
        hi = std::max(hi, M(r, j));
      }
      if (u[r] < lo - 1e-12 || u[r] > hi + 1e-12) failure = "summarize convex hull";
    }
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    shuffle(perm, rng);
    std::vector<Vector<double>> cols;
    for (std::size_t j : perm) cols.push_back(M.col_copy(j));
    auto Mp = Matrix<double>::from_columns(cols);
    if (max_abs_diff(summarize(q, Mp), u) > 1e-12) failure = "summarize permutation";
  }

  // self-attention zero diagonal
  if (failure.empty()) {
    Matrix<double> single(3, 1);
    single(0, 0) = 4.0;
    Matrix<double> masked_single = self_attention(single);
    for (double v : masked_single.data())
      if (v != 0.0) failure = "self-attention diagonal";
    Matrix<double> orth(3, 2);
    orth(0, 0) = 2.0;
    orth(1, 1) = 3.0;
    Matrix<double> masked_orth = self_attention(orth);
    for (double v : masked_orth.data())
      if (v != 0.0) failure = "self-attention diagonal";
  }

  // answer-permutation equivariance of (f, p, argmax)
  for (int trial = 0; trial < 20 && failure.empty(); ++trial) {
    auto enc = random_encoded(rng, 5, 4, 3);
    ForwardOptions<double> opts;
    auto pred = hmmn_forward(enc, opts);
    std::vector<std::size_t> perm{3, 1, 4, 0, 2};
    auto enc2 = enc;
    for (std::size_t k = 0; k < kAnswerChoices; ++k)
      enc2.A.set_col(k, enc.A.col_copy(perm[k]));
    auto pred2 = hmmn_forward(enc2, opts);
    for (std::size_t k = 0; k < kAnswerChoices; ++k) {
      if (std::abs(pred2.f[k] - pred.f[perm[k]]) > 1e-12) failure = "answer permutation f";
      if (std::abs(pred2.p[k] - pred.p[perm[k]]) > 1e-12) failure = "answer permutation p";
    }
    if (perm[static_cast<std::size_t>(pred2.argmax)] !=
        static_cast<std::size_t>(pred.argmax))
      failure = "answer permutation argmax";
  }

  // identical answers -> uniform p
  if (failure.empty()) {
    auto enc = random_encoded(rng, 4, 3, 2);
    Vector<double> a = enc.A.col_copy(0);
    for (std::size_t k = 0; k < kAnswerChoices; ++k) enc.A.set_col(k, a);
    auto pred = hmmn_forward(enc, ForwardOptions<double>{});
    for (double p : pred.p)
      if (std::abs(p - 0.2) > 1e-12) failure = "uniform prediction";
  }

  // loss of the uniform prediction
  if (failure.empty()) {
    Prediction<double> pred;
    pred.f = Vector<double>(5, 0.0);
    pred.p = softmax(pred.f);
    if (std::abs(loss(pred, 2) - std::log(5.0)) > 1e-12) failure = "loss(uniform) != ln 5";
  }

  detail = failure.empty() ? "all invariants hold" : failure;
  return failure.empty();
}

// --- criterion 7: CLI determinism ----------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing " + path + ">";
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cmd(const std::string& cmd) {
  int status = std::system((cmd + " > acc7_stdout.txt 2> acc7_stderr.txt").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool criterion_determinism(const std::string& cli, std::string& detail) {
  if (cli.empty()) {
    detail = "no CLI path given (pass it as argv[1])";
    return false;
  }
  auto fail = [&](const std::string& what) {
    detail = what;
    return false;
  };

  // generate twice
  for (const char* tag : {"x", "y"}) {
    std::string t(tag);
    if (run_cmd(cli + " generate --out acc7_" + t + ".json --vocab-out acc7_" + t +
                ".tsv --seed 11 --instances 30") != 0)
      return fail("generate failed");
  }
  if (slurp("acc7_x.tsv") != slurp("acc7_y.tsv")) return fail("vocab bytes differ");
  {
    // the dataset embeds its vocab path, so regenerate with equal paths
    if (run_cmd(cli + " generate --out acc7_z.json --vocab-out acc7_x.tsv --seed 11 "
                      "--instances 30") != 0)
      return fail("generate failed");
    if (slurp("acc7_x.json") != slurp("acc7_z.json")) return fail("dataset bytes differ");
  }

  // train twice (single thread, 64-bit)
  const std::string train_flags = " train --data acc7_x.json --vocab acc7_x.tsv "
                                  "--seed 11 --epochs 2 --patience 2 --threads 1 --float64";
  if (run_cmd(cli + train_flags + " --out acc7_c1.json --metrics-out acc7_m1.json") != 0)
    return fail("train failed");
  if (run_cmd(cli + train_flags + " --out acc7_c2.json --metrics-out acc7_m2.json") != 0)
    return fail("train failed");
  if (slurp("acc7_c1.json") != slurp("acc7_c2.json")) return fail("checkpoint bytes differ");
  if (slurp("acc7_m1.json") != slurp("acc7_m2.json")) return fail("metrics bytes differ");

  // eval twice
  const std::string eval_flags = " eval --data acc7_x.json --vocab acc7_x.tsv "
                                 "--checkpoint acc7_c1.json --threads 1 --float64 --out ";
  if (run_cmd(cli + eval_flags + "acc7_e1.json") != 0) return fail("eval failed");
  if (run_cmd(cli + eval_flags + "acc7_e2.json") != 0) return fail("eval failed");
  if (slurp("acc7_e1.json") != slurp("acc7_e2.json")) return fail("eval bytes differ");

  // ablate twice
  const std::string ablate_flags = " ablate --data acc7_x.json --vocab acc7_x.tsv "
                                   "--seed 11 --threads 1 --float64 --out ";
  if (run_cmd(cli + ablate_flags + "acc7_a1.tsv --json-out acc7_a1.json") != 0)
    return fail("ablate failed");
  if (run_cmd(cli + ablate_flags + "acc7_a2.tsv --json-out acc7_a2.json") != 0)
    return fail("ablate failed");
  if (slurp("acc7_a1.tsv") != slurp("acc7_a2.tsv")) return fail("ablate TSV bytes differ");
  if (slurp("acc7_a1.json") != slurp("acc7_a2.json")) return fail("ablate JSON bytes differ");

  // attend twice
  const std::string attend_flags = " attend --data acc7_x.json --vocab acc7_x.tsv "
                                   "--checkpoint acc7_c1.json --instance 0 --out ";
  if (run_cmd(cli + attend_flags + "acc7_t1.json") != 0) return fail("attend failed");
  if (run_cmd(cli + attend_flags + "acc7_t2.json") != 0) return fail("attend failed");
  if (slurp("acc7_t1.json") != slurp("acc7_t2.json")) return fail("trace bytes differ");

  // gradcheck twice
  const std::string gc_flags = " gradcheck --seed 1 --dims toy --instances 3 --out ";
  if (run_cmd(cli + gc_flags + "acc7_g1.json") != 0) return fail("gradcheck failed");
  if (run_cmd(cli + gc_flags + "acc7_g2.json") != 0) return fail("gradcheck failed");
  if (slurp("acc7_g1.json") != slurp("acc7_g2.json")) return fail("gradcheck bytes differ");

  detail = "generate/train/eval/ablate/attend/gradcheck byte-identical";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  run_criterion(1, "gradient correctness on 20 seeded toy instances",
                [](std::string& d) { return criterion_gradients(d); });
  run_criterion(2, "HMMN forward matches the scalar-loop oracle",
                [](std::string& d) { return criterion_oracle_equivalence(d); });
  run_criterion(3, "1-layer HMMN w/o answers equals the V->S' baseline",
                [](std::string& d) { return criterion_degeneration(d); });
  run_criterion(4, "synthetic learnability and ablation ordering",
                [](std::string& d) { return criterion_learnability(d); });
  run_criterion(5, "ablation enumeration completeness (8 + 32 specs)",
                [](std::string& d) { return criterion_enumeration(d); });
  run_criterion(6, "invariant suite",
                [](std::string& d) { return criterion_invariants(d); });
  run_criterion(7, "command determinism (byte-identical outputs)",
                [&](std::string& d) { return criterion_determinism(cli, d); });

  // runtime budgets are part of the criteria
  bool all_pass = true;
  for (const auto& c : g_results) {
    bool in_budget = true;
    if (c.index == 1) in_budget = c.seconds < 30.0;
    if (c.index == 2) in_budget = c.seconds < 10.0;
    if (c.index == 4) in_budget = c.seconds < 300.0;
    if (!in_budget)
      std::printf("criterion %d: FAIL — runtime budget exceeded (%.1fs)\n", c.index,
                  c.seconds);
    all_pass = all_pass && c.pass && in_budget;
  }
  std::printf("%s\n", all_pass ? "ALL CRITERIA PASS" : "SOME CRITERIA FAILED");
  return all_pass ? 0 : 1;
}
