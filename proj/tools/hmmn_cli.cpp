// Command-line surface for the HMMN experiments: synthetic data generation,
// training, evaluation, the 40-baseline ablation sweep, gradient checking,
// and attention-trace inspection. Every command is reproducible from its
// flags and input files alone; exit codes are 0 (ok), 1 (runtime failure),
// 2 (usage).

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hmmn/json_io.hpp"

namespace {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("HMMN_LOG");
    if (!env) return LogLevel::warn;
    std::string s(env);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    if (s == "warn") return LogLevel::warn;
    if (s == "error") return LogLevel::error;
    if (s == "off") return LogLevel::off;
    return LogLevel::warn;
  }();
  return level;
}

void log_line(LogLevel lvl, const std::string& msg) {
  if (lvl < log_level()) return;
  const char* tag[] = {"debug", "info", "warn", "error"};
  std::fprintf(stderr, "[%s] %s\n", tag[static_cast<int>(lvl)], msg.c_str());
}

// ---------------------------------------------------------------------------
// Shared option bags. Dimensions left at 0 are inferred from the inputs
// (word dim from the vocabulary, region dim from the data, feature dim from
// the dataset's generator config when present).
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string out, vocab_out;
  hmmn::SyntheticConfig cfg;
  std::string mode = "answer-required";
};

struct TrainArgs {
  std::string data, vocab, dev, out, metrics_out;
  std::string variant = "hmmn";
  std::string optimizer = "sgd";
  std::string affinity = "answer-dot";
  double dev_fraction = 0.10;
  double lr = 0.005, lambda = 0.45, clip_norm = 0.0;
  std::size_t batch = 8, epochs = 50, patience = 10, hops = 2, threads = 1;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  bool normalize_coattention = false;
  bool float64 = true;
};

struct EvalArgs {
  std::string data, vocab, checkpoint, out;
  std::string variant;  // empty = use the checkpoint's
  std::size_t threads = 1;
  bool float64 = true;
};

struct AblateArgs {
  std::string data, vocab, checkpoint, out, json_out;
  std::size_t hops = 1, threads = 1, dim = 0;
  std::uint64_t seed = 0;
  bool float64 = true;
};

struct GradcheckArgs {
  std::string dims = "toy";
  std::string variant = "hmmn";
  std::string out;
  std::size_t instances = 20, max_entries = 500;
  double h = 1e-5, tol = 1e-4;
  std::uint64_t seed = 1;
};

struct AttendArgs {
  std::string data, vocab, checkpoint, out;
  std::size_t instance = 0;
  bool heatmap = false;
  bool float64 = true;
};

hmmn::AffinityMode parse_affinity(const std::string& s) {
  if (s == "answer-dot") return hmmn::AffinityMode::answer_dot;
  if (s == "retrieval-norm") return hmmn::AffinityMode::retrieval_norm;
  throw hmmn::ConfigError("unknown affinity mode '" + s + "'");
}

template <typename T>
struct Inputs {
  hmmn::Dataset<T> data;
  hmmn::Vocabulary<T> vocab;
};

template <typename T>
Inputs<T> load_inputs(const std::string& data_path, const std::string& vocab_path) {
  Inputs<T> in;
  in.data = hmmn::load_dataset<T>(data_path);
  in.vocab = hmmn::load_vocabulary<T>(vocab_path);
  log_line(LogLevel::info, "loaded " + std::to_string(in.data.instances.size()) +
                               " instances, vocab " + std::to_string(in.vocab.size()));
  return in;
}

template <typename T>
std::size_t infer_dim(const hmmn::Dataset<T>& data, std::size_t flag_dim) {
  if (flag_dim > 0) return flag_dim;
  if (data.generator) return data.generator->d;
  return 300;  // full-scale default for external data
}

template <typename T>
std::size_t region_dim(const hmmn::Dataset<T>& data) {
  for (const auto& inst : data.instances)
    for (const auto& frame : inst.frames)
      for (const auto& region : frame) return region.size();
  throw hmmn::SchemaError("dataset has no region features");
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

template <typename T>
int run_generate(const GenerateArgs& args) {
  hmmn::SyntheticConfig cfg = args.cfg;
  cfg.mode = hmmn::parse_cue_mode(args.mode);
  hmmn::SyntheticData<T> made = hmmn::generate_synthetic<T>(cfg);
  made.dataset.vocab_ref = args.vocab_out;
  hmmn::save_vocabulary(made.vocab, args.vocab_out);
  hmmn::save_dataset(made.dataset, args.out);
  log_line(LogLevel::info, "wrote " + args.out + " and " + args.vocab_out);
  return 0;
}

template <typename T>
int run_train(const TrainArgs& args) {
  Inputs<T> in = load_inputs<T>(args.data, args.vocab);

  hmmn::TrainConfig<T> cfg;
  cfg.lr = static_cast<T>(args.lr);
  cfg.batch = args.batch;
  cfg.epochs = args.epochs;
  cfg.patience = args.patience;
  cfg.seed = args.seed;
  cfg.variant = hmmn::parse_variant(args.variant);
  cfg.lambda = static_cast<T>(args.lambda);
  cfg.hops = args.hops;
  cfg.d = infer_dim(in.data, args.dim);
  cfg.d_w = in.vocab.word_dim();
  cfg.d_r = region_dim(in.data);
  cfg.optimizer = hmmn::parse_optimizer(args.optimizer);
  cfg.clip_norm = static_cast<T>(args.clip_norm);
  cfg.affinity = parse_affinity(args.affinity);
  cfg.normalize_coattention = args.normalize_coattention;
  cfg.threads = args.threads;

  hmmn::Dataset<T> train_set, dev_set;
  if (!args.dev.empty()) {
    train_set = std::move(in.data);
    dev_set = hmmn::load_dataset<T>(args.dev);
  } else {
    auto parts = hmmn::split(in.data, args.dev_fraction, args.seed);
    train_set = std::move(parts.first);
    dev_set = std::move(parts.second);
  }
  log_line(LogLevel::info, "train/dev = " + std::to_string(train_set.instances.size()) +
                               "/" + std::to_string(dev_set.instances.size()));

  hmmn::TrainResult<T> result = hmmn::train(cfg, train_set, dev_set, in.vocab);

  hmmn::Json config = hmmn::train_config_to_json(cfg);
  config["data"] = args.data;
  config["vocab"] = args.vocab;
  config["dev"] = args.dev;
  config["dev_fraction"] = args.dev_fraction;

  hmmn::save_checkpoint(result.params, cfg.variant, config, args.out);
  if (!args.metrics_out.empty()) {
    hmmn::detail::write_text_file(args.metrics_out,
                                  hmmn::metrics_to_json(result.metrics, config).dump(2) + "\n");
  }
  std::printf("best epoch %zu, dev accuracy %.4f\n", result.metrics.best_epoch,
              result.metrics.accuracy);
  std::fputs(hmmn::metrics_table(result.metrics).c_str(), stdout);
  return 0;
}

template <typename T>
int run_eval(const EvalArgs& args) {
  Inputs<T> in = load_inputs<T>(args.data, args.vocab);
  hmmn::Checkpoint<T> ckpt = hmmn::load_checkpoint<T>(args.checkpoint);
  hmmn::Variant variant =
      args.variant.empty() ? ckpt.variant : hmmn::parse_variant(args.variant);

  hmmn::Metrics<T> metrics =
      hmmn::evaluate(ckpt.params, in.data, in.vocab, variant, args.threads);

  hmmn::Json config = hmmn::Json::object();
  config["data"] = args.data;
  config["vocab"] = args.vocab;
  config["checkpoint"] = args.checkpoint;
  config["checkpoint_hash"] = hmmn::config_hash(ckpt.config);
  config["variant"] = hmmn::to_string(variant);
  config["float64"] = args.float64;

  if (!args.out.empty())
    hmmn::detail::write_text_file(args.out,
                                  hmmn::metrics_to_json(metrics, config).dump(2) + "\n");
  std::fputs(hmmn::metrics_table(metrics).c_str(), stdout);
  return 0;
}

template <typename T>
int run_ablate(const AblateArgs& args) {
  Inputs<T> in = load_inputs<T>(args.data, args.vocab);

  hmmn::ModelParams<T> params;
  if (!args.checkpoint.empty()) {
    params = hmmn::load_checkpoint<T>(args.checkpoint).params;
  } else {
    params = hmmn::init_params<T>(infer_dim(in.data, args.dim), in.vocab.word_dim(),
                                  region_dim(in.data), T(0.45), args.hops, args.seed);
  }
  params.hops = args.hops;

  auto specs = hmmn::enumerate_specs();
  std::string tsv = "table\tspec\taccuracy\tcorrect\ttotal\n";
  hmmn::Json rows = hmmn::Json::array();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    hmmn::Variant variant;
    variant.kind = hmmn::Variant::Kind::ablation;
    variant.spec = specs[i];
    hmmn::Metrics<T> m =
        hmmn::evaluate(params, in.data, in.vocab, variant, args.threads);
    const char* table = i < 8 ? "III" : "IV";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s\t%s\t%.6f\t%zu\t%zu\n", table,
                  hmmn::to_string(specs[i]).c_str(), m.accuracy, m.correct, m.total);
    tsv += buf;
    hmmn::Json row = hmmn::Json::object();
    row["table"] = table;
    row["spec"] = hmmn::to_string(specs[i]);
    row["accuracy"] = m.accuracy;
    row["correct"] = m.correct;
    row["total"] = m.total;
    rows.push_back(std::move(row));
  }

  if (!args.out.empty())
    hmmn::detail::write_text_file(args.out, tsv);
  else
    std::fputs(tsv.c_str(), stdout);
  if (!args.json_out.empty()) {
    hmmn::Json j = hmmn::Json::object();
    j["schema"] = 1;
    hmmn::Json config = hmmn::Json::object();
    config["data"] = args.data;
    config["vocab"] = args.vocab;
    config["checkpoint"] = args.checkpoint;
    config["hops"] = args.hops;
    config["seed"] = args.seed;
    config["float64"] = args.float64;
    j["config"] = std::move(config);
    j["rows"] = std::move(rows);
    hmmn::detail::write_text_file(args.json_out, j.dump(2) + "\n");
  }
  return 0;
}

// Gradient checking always runs in 64-bit; central differences drown in
// float32 rounding.
int run_gradcheck(const GradcheckArgs& args) {
  std::size_t d, d_w, d_r, m, n, vocab_size;
  std::size_t regions = 3, tokens = 3;
  if (args.dims == "toy") {
    d = 8; d_w = 6; d_r = 5; m = 4; n = 3; vocab_size = 10;
  } else if (args.dims == "small") {
    d = 16; d_w = 12; d_r = 10; m = 6; n = 4; vocab_size = 20;
  } else {
    throw hmmn::ConfigError("gradcheck: unknown --dims preset '" + args.dims + "'");
  }

  hmmn::Vocabulary<double> vocab =
      hmmn::random_vocabulary<double>(vocab_size, d_w, args.seed);
  hmmn::GradOptions<double> opts;
  opts.variant = hmmn::parse_variant(args.variant);

  double worst_w1 = 0, worst_w2 = 0, med_w1 = 0, med_w2 = 0;
  bool pass = true;
  for (std::size_t i = 0; i < args.instances; ++i) {
    hmmn::SplitMix64 rng(hmmn::derive_seed(args.seed, "gradcheck-instance", i));
    std::vector<hmmn::RawInstance<double>> batch{
        hmmn::random_instance<double>(rng, vocab, m, n, regions, tokens, d_r)};
    hmmn::ModelParams<double> params = hmmn::init_params<double>(
        d, d_w, d_r, 0.45, 2, hmmn::derive_seed(args.seed, "gradcheck-params", i));
    auto report = hmmn::grad_check(batch, vocab, params, args.h, args.max_entries,
                                   args.seed, opts);
    worst_w1 = std::max(worst_w1, report.w1.max_rel);
    worst_w2 = std::max(worst_w2, report.w2.max_rel);
    med_w1 = std::max(med_w1, report.w1.median_rel);
    med_w2 = std::max(med_w2, report.w2.median_rel);
    pass = pass && report.pass(args.tol);
  }

  std::printf("W1: max rel err %.3e, median rel err %.3e\n", worst_w1, med_w1);
  std::printf("W2: max rel err %.3e, median rel err %.3e\n", worst_w2, med_w2);
  std::printf("%s (tolerance %.1e, %zu instances, h %.1e, variant %s)\n",
              pass ? "PASS" : "FAIL", args.tol, args.instances, args.h,
              args.variant.c_str());

  if (!args.out.empty()) {
    hmmn::Json j = hmmn::Json::object();
    j["schema"] = 1;
    hmmn::Json config = hmmn::Json::object();
    config["seed"] = args.seed;
    config["dims"] = args.dims;
    config["instances"] = args.instances;
    config["h"] = args.h;
    config["tol"] = args.tol;
    config["variant"] = args.variant;
    j["config"] = std::move(config);
    j["w1_max_rel"] = worst_w1;
    j["w1_median_rel"] = med_w1;
    j["w2_max_rel"] = worst_w2;
    j["w2_median_rel"] = med_w2;
    j["pass"] = pass;
    hmmn::detail::write_text_file(args.out, j.dump(2) + "\n");
  }
  return pass ? 0 : 1;
}

// Ten-level ASCII ramp for attention weights in [0, 1].
char weight_char(double w) {
  static const char ramp[] = " .:-=+*#%@";
  int idx = static_cast<int>(w * 9.999);
  if (idx < 0) idx = 0;
  if (idx > 9) idx = 9;
  return ramp[idx];
}

template <typename T>
void print_heatmap(const hmmn::Prediction<T>& pred) {
  if (!pred.trace) return;
  for (std::size_t k = 0; k < pred.trace->answers.size(); ++k) {
    std::printf("answer %zu%s  p=%.4f\n", k,
                static_cast<int>(k) == pred.argmax ? " *" : "  ",
                static_cast<double>(pred.p[k]));
    const auto& hops = pred.trace->answers[k].hops;
    for (std::size_t t = 0; t < hops.size(); ++t) {
      std::string delta, zeta;
      for (const T& w : hops[t].delta) delta += weight_char(static_cast<double>(w));
      for (const T& w : hops[t].zeta) zeta += weight_char(static_cast<double>(w));
      std::printf("  hop %zu  subtitles |%s|  frames |%s|\n", t + 1, delta.c_str(),
                  zeta.c_str());
    }
  }
}

template <typename T>
int run_attend(const AttendArgs& args) {
  Inputs<T> in = load_inputs<T>(args.data, args.vocab);
  hmmn::Checkpoint<T> ckpt = hmmn::load_checkpoint<T>(args.checkpoint);
  if (args.instance >= in.data.instances.size())
    throw hmmn::ConfigError("attend: instance index out of range");

  hmmn::EncodedInstance<T> enc =
      hmmn::encode_instance(in.data.instances[args.instance], in.vocab, ckpt.params);
  hmmn::ForwardOptions<T> opts = hmmn::forward_options(ckpt.params);
  opts.want_trace = true;
  hmmn::Prediction<T> pred = hmmn::forward_variant(enc, ckpt.variant, opts);

  hmmn::Json j = hmmn::trace_to_json(pred, ckpt.variant, args.instance);
  if (!args.out.empty())
    hmmn::detail::write_text_file(args.out, j.dump(2) + "\n");
  else
    std::printf("%s\n", j.dump(2).c_str());
  if (args.heatmap) print_heatmap(pred);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Holistic multi-modal memory network: experiments and inspection"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML file");

  GenerateArgs gen;
  auto* cgen = app.add_subcommand("generate", "Generate a synthetic dataset + vocabulary");
  cgen->add_option("--out", gen.out, "Dataset JSON output path")->required();
  cgen->add_option("--vocab-out", gen.vocab_out, "Vocabulary TSV output path")->required();
  cgen->add_option("--seed", gen.cfg.seed, "Generator seed");
  cgen->add_option("--instances", gen.cfg.instances, "Instance count");
  cgen->add_option("--sentences", gen.cfg.sentences, "Subtitle sentences per instance");
  cgen->add_option("--frames", gen.cfg.frames, "Frames per instance");
  cgen->add_option("--regions", gen.cfg.regions, "Regions per frame");
  cgen->add_option("--vocab-size", gen.cfg.vocab_size, "Vocabulary size");
  cgen->add_option("--tokens", gen.cfg.tokens_per_sentence, "Tokens per sentence/answer");
  cgen->add_option("--dim", gen.cfg.d, "Feature dimension d");
  cgen->add_option("--word-dim", gen.cfg.d_w, "Word vector dimension d_w");
  cgen->add_option("--region-dim", gen.cfg.d_r, "Region feature dimension d_r");
  cgen->add_option("--cue", gen.cfg.cue_strength, "Cue strength in (0, 1]");
  cgen->add_option("--mode", gen.mode, "question-sufficient | answer-required");
  cgen->add_option("--name", gen.cfg.name, "Dataset name");

  TrainArgs tr;
  auto* ctr = app.add_subcommand("train", "Train a model variant with SGD");
  ctr->add_option("--data", tr.data, "Dataset JSON")->required();
  ctr->add_option("--vocab", tr.vocab, "Vocabulary TSV")->required();
  ctr->add_option("--dev", tr.dev, "Separate dev dataset (default: split --data)");
  ctr->add_option("--dev-fraction", tr.dev_fraction, "Dev fraction when splitting");
  ctr->add_option("--out", tr.out, "Checkpoint output path")->required();
  ctr->add_option("--metrics-out", tr.metrics_out, "Metrics JSON output path");
  ctr->add_option("--variant", tr.variant,
                  "hmmn | hmmn-no-answer | e2emn-S | e2emn-V | ablation:<spec>");
  ctr->add_option("--seed", tr.seed, "Run seed");
  ctr->add_option("--lr", tr.lr, "Learning rate");
  ctr->add_option("--batch", tr.batch, "Batch size");
  ctr->add_option("--epochs", tr.epochs, "Max epochs");
  ctr->add_option("--patience", tr.patience, "Early-stopping patience (epochs)");
  ctr->add_option("--lambda", tr.lambda, "Question tradeoff in the hop query");
  ctr->add_option("--hops", tr.hops, "Reasoning hops T");
  ctr->add_option("--dim", tr.dim, "Feature dimension d (default: from dataset)");
  ctr->add_option("--optimizer", tr.optimizer, "sgd | momentum | adam");
  ctr->add_option("--clip-norm", tr.clip_norm, "Global gradient-norm clip (0 = off)");
  ctr->add_option("--affinity", tr.affinity, "answer-dot | retrieval-norm");
  ctr->add_flag("--normalize-coattention", tr.normalize_coattention,
                "Row-softmax the inter-modal weights");
  ctr->add_option("--threads", tr.threads, "Worker threads");
  ctr->add_flag("--float64,!--float32", tr.float64, "Float width (default 64-bit)");

  EvalArgs ev;
  auto* cev = app.add_subcommand("eval", "Evaluate a checkpoint");
  cev->add_option("--data", ev.data, "Dataset JSON")->required();
  cev->add_option("--vocab", ev.vocab, "Vocabulary TSV")->required();
  cev->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  cev->add_option("--out", ev.out, "Metrics JSON output path");
  cev->add_option("--variant", ev.variant, "Override the checkpoint's variant");
  cev->add_option("--threads", ev.threads, "Worker threads");
  cev->add_flag("--float64,!--float32", ev.float64, "Float width (default 64-bit)");

  AblateArgs ab;
  auto* cab = app.add_subcommand("ablate", "Run all 40 attention-strategy baselines");
  cab->add_option("--data", ab.data, "Dataset JSON")->required();
  cab->add_option("--vocab", ab.vocab, "Vocabulary TSV")->required();
  cab->add_option("--checkpoint", ab.checkpoint, "Checkpoint (default: fresh init)");
  cab->add_option("--out", ab.out, "TSV output path (default: stdout)");
  cab->add_option("--json-out", ab.json_out, "JSON output path");
  cab->add_option("--hops", ab.hops, "Hops for the baseline network");
  cab->add_option("--seed", ab.seed, "Init seed when no checkpoint is given");
  cab->add_option("--dim", ab.dim, "Feature dimension d (default: from dataset)");
  cab->add_option("--threads", ab.threads, "Worker threads");
  cab->add_flag("--float64,!--float32", ab.float64, "Float width (default 64-bit)");

  GradcheckArgs gc;
  auto* cgc = app.add_subcommand("gradcheck",
                                 "Check analytic gradients against central differences");
  cgc->add_option("--seed", gc.seed, "Seed for instances and parameters");
  cgc->add_option("--dims", gc.dims, "toy | small");
  cgc->add_option("--instances", gc.instances, "Random instances to check");
  cgc->add_option("--step", gc.h, "Finite-difference step");
  cgc->add_option("--tol", gc.tol, "Max relative error tolerance");
  cgc->add_option("--variant", gc.variant, "Model variant to differentiate");
  cgc->add_option("--max-entries", gc.max_entries, "Entries checked per matrix");
  cgc->add_option("--out", gc.out, "JSON report output path");

  AttendArgs at;
  auto* cat = app.add_subcommand("attend", "Export attention traces for one instance");
  cat->add_option("--data", at.data, "Dataset JSON")->required();
  cat->add_option("--vocab", at.vocab, "Vocabulary TSV")->required();
  cat->add_option("--checkpoint", at.checkpoint, "Checkpoint path")->required();
  cat->add_option("--instance", at.instance, "Instance index");
  cat->add_option("--out", at.out, "Trace JSON output path (default: stdout)");
  cat->add_flag("--heatmap", at.heatmap, "Print an ASCII heatmap of delta/zeta");
  cat->add_flag("--float64,!--float32", at.float64, "Float width (default 64-bit)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(cgen)) return run_generate<double>(gen);
    if (app.got_subcommand(ctr))
      return tr.float64 ? run_train<double>(tr) : run_train<float>(tr);
    if (app.got_subcommand(cev))
      return ev.float64 ? run_eval<double>(ev) : run_eval<float>(ev);
    if (app.got_subcommand(cab))
      return ab.float64 ? run_ablate<double>(ab) : run_ablate<float>(ab);
    if (app.got_subcommand(cgc)) return run_gradcheck(gc);
    if (app.got_subcommand(cat))
      return at.float64 ? run_attend<double>(at) : run_attend<float>(at);
  } catch (const std::exception& e) {
    log_line(LogLevel::error, e.what());
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
