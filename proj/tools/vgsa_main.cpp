// vgsa: command-line front end for the visually grounded self-attentive
// sentence encoder.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vgsa/checkpoint.hpp"
#include "vgsa/evaluation.hpp"
#include "vgsa/gradient_suite.hpp"
#include "vgsa/synthetic.hpp"
#include "vgsa/trainer.hpp"

namespace {

using namespace vgsa;

struct GenSynthArgs {
  std::string out;
  std::size_t n = 512;
  std::size_t vocab = 64;
  std::size_t d_img = 64;
  std::uint64_t seed = 1;
};

struct TrainArgs {
  std::string corpus;
  std::string checkpoint;
  std::string metrics;
  std::string embeddings;
  std::string resume;
  std::string objective = "cap2all";
  TrainConfig config;
};

struct EvalArgs {
  std::string checkpoint;
  std::string corpus;
  std::size_t limit = 0;
  std::uint64_t seed = 1;
};

struct SalienceArgs {
  std::string checkpoint;
  std::string sentence;
  std::uint64_t seed = 1;
};

struct EmbedArgs {
  std::string checkpoint;
  std::string input;
  std::string output;
  std::uint64_t seed = 1;
};

struct GradcheckArgs {
  GradientSuiteOptions options;
};

int run_gen_synth(const GenSynthArgs& a) {
  const SyntheticCorpus s = gen_synthetic(a.n, a.vocab, a.d_img, a.seed);
  write_corpus(a.out, s.corpus);
  std::cout << "wrote " << s.corpus.records.size() << " samples (d_img=" << a.d_img << ") to " << a.out << "\n";
  return 0;
}

int run_train(TrainArgs& a, const CLI::App& cmd) {
  const Corpus corpus = read_corpus(a.corpus);
  std::ofstream log;
  if (!a.metrics.empty()) {
    log.open(a.metrics, a.resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("cannot write metrics log " + a.metrics);
  }

  std::optional<Checkpoint> start;
  std::optional<Dataset> data;
  if (!a.resume.empty()) {
    start = load_checkpoint(a.resume);
    if (cmd.count("--epochs") > 0) start->config.epochs = a.config.epochs;
    data = prepare_dataset(corpus, start->vocab);
  } else {
    a.config.objective = parse_objective(a.objective);
    a.config.validate();
    data = prepare_dataset(corpus, a.config.min_count);
  }
  const TrainConfig& config = start ? start->config : a.config;
  if (data->d_img != config.d_img) {
    throw std::invalid_argument("corpus d_img " + std::to_string(data->d_img) + " does not match --d-img " +
                                std::to_string(config.d_img));
  }

  Trainer trainer = [&] {
    if (start) return resume(*start, *data);
    const ModelDims dims = ModelDims::from_config(config, data->vocab.size());
    if (!a.embeddings.empty()) {
      const EmbeddingTable table = load_embeddings(a.embeddings, data->vocab, config.d_e, config.seed);
      std::cerr << "embedding coverage " << table.coverage << "\n";
      return Trainer(config, *data, init_params(dims, config.seed, &table.weights));
    }
    return Trainer(config, *data, init_params(dims, config.seed));
  }();

  while (trainer.epochs_done() < config.epochs) {
    const EpochMetrics m = trainer.run_epoch();
    if (log.is_open()) log << m.to_json() << '\n' << std::flush;
    std::cout << m.to_json() << '\n' << std::flush;
    save_checkpoint(a.checkpoint, snapshot(trainer, data->vocab));
  }
  if (trainer.epochs_done() == 0 || (start && start->epochs_done >= config.epochs)) {
    save_checkpoint(a.checkpoint, snapshot(trainer, data->vocab));
  }
  return 0;
}

int run_eval(const EvalArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Dataset data = prepare_dataset(read_corpus(a.corpus), ckpt.vocab);
  std::span<const Sample> pool(data.samples);
  if (a.limit > 0 && a.limit < pool.size()) pool = pool.first(a.limit);
  std::cout << to_json(retrieval_eval(ckpt.model, pool)) << "\n";
  return 0;
}

int run_salience(const SalienceArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  std::cout << salience(ckpt.model, ckpt.vocab, a.sentence).to_json() << "\n";
  return 0;
}

int run_embed(const EmbedArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  std::ifstream in(a.input);
  if (!in) throw std::runtime_error("cannot read " + a.input);
  if (a.output.empty() || a.output == "-") {
    embed(ckpt.model, ckpt.vocab, in, std::cout);
  } else {
    std::ofstream out(a.output);
    if (!out) throw std::runtime_error("cannot write " + a.output);
    embed(ckpt.model, ckpt.vocab, in, out);
  }
  return 0;
}

int run_gradcheck(const GradcheckArgs& a) {
  bool ok = true;
  for (const GradCheckResult& r : run_gradient_suite(a.options)) {
    std::printf("%-4s %-28s max_rel_err=%.3e points=%zu\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.max_rel_error, r.points);
    ok = ok && r.passed;
  }
  std::printf("%s (tolerance %.1e)\n", ok ? "all gradient checks passed" : "gradient checks FAILED",
              a.options.tolerance);
  return ok ? 0 : 1;
}

void add_config_flags(CLI::App* cmd, TrainArgs& a) {
  TrainConfig& c = a.config;
  cmd->add_option("--objective", a.objective, "cap2cap, cap2img or cap2all")->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "Epochs to train (total, when resuming)")->capture_default_str();
  cmd->add_option("--d-e", c.d_e, "Word embedding width")->capture_default_str();
  cmd->add_option("--d-cell", c.d_cell, "LSTM cell width")->capture_default_str();
  cmd->add_option("--d-a", c.d_a, "Attention hidden width")->capture_default_str();
  cmd->add_option("--n-a", c.n_a, "Number of attention heads")->capture_default_str();
  cmd->add_option("--d-img", c.d_img, "Image feature width (must match the corpus)")->capture_default_str();
  cmd->add_option("--d-p", c.d_p, "Projection hidden width (0 = d_img)")->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "Mini-batch size (>= 2)")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--beta1", c.beta1, "Adam beta1")->capture_default_str();
  cmd->add_option("--beta2", c.beta2, "Adam beta2")->capture_default_str();
  cmd->add_option("--adam-eps", c.adam_eps, "Adam epsilon")->capture_default_str();
  cmd->add_option("--clip", c.clip, "Elementwise gradient clip bound")->capture_default_str();
  cmd->add_option("--dropout", c.dropout, "Dropout in the projection head")->capture_default_str();
  cmd->add_option("--min-count", c.min_count, "Vocabulary frequency threshold")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visually grounded self-attentive sentence encoder"};
  app.require_subcommand(1);

  GenSynthArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synth", "Write a synthetic caption/image-feature corpus");
  gen_cmd->add_option("--out", gen.out, "Output JSONL path")->required();
  gen_cmd->add_option("--n", gen.n, "Number of samples")->capture_default_str();
  gen_cmd->add_option("--vocab", gen.vocab, "Content vocabulary size (>= 8)")->capture_default_str();
  gen_cmd->add_option("--d-img", gen.d_img, "Image feature width")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--corpus", train.corpus, "Corpus JSONL")->required();
  train_cmd->add_option("--checkpoint", train.checkpoint, "Checkpoint to write after each epoch")->required();
  train_cmd->add_option("--metrics", train.metrics, "Per-epoch metrics log (JSONL)");
  train_cmd->add_option("--embeddings", train.embeddings, "GloVe-format text vectors for W_E");
  train_cmd->add_option("--resume", train.resume, "Continue from this checkpoint");
  add_config_flags(train_cmd, train);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Sentence/image retrieval metrics");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint")->required();
  eval_cmd->add_option("--corpus", ev.corpus, "Corpus JSONL")->required();
  eval_cmd->add_option("--limit", ev.limit, "Use only the first N samples (0 = all)")->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "Random seed (evaluation is deterministic)");

  SalienceArgs sal;
  auto* sal_cmd = app.add_subcommand("salience", "Attention weights over a sentence, as JSON");
  sal_cmd->add_option("--checkpoint", sal.checkpoint, "Trained checkpoint")->required();
  sal_cmd->add_option("--sentence", sal.sentence, "Sentence to analyse")->required();
  sal_cmd->add_option("--seed", sal.seed, "Random seed (salience is deterministic)");

  EmbedArgs emb;
  auto* emb_cmd = app.add_subcommand("embed", "Write one sentence representation per input line");
  emb_cmd->add_option("--checkpoint", emb.checkpoint, "Trained checkpoint")->required();
  emb_cmd->add_option("--input", emb.input, "Text file, one sentence per line")->required();
  emb_cmd->add_option("--output", emb.output, "Output path (default stdout)");
  emb_cmd->add_option("--seed", emb.seed, "Random seed (embedding is deterministic)");

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gc_cmd->add_option("--seed", gc.options.seed, "Random seed")->capture_default_str();
  gc_cmd->add_option("--points", gc.options.points, "Random points per check")->capture_default_str();
  gc_cmd->add_option("--eps", gc.options.eps, "Finite-difference step")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc.options.tolerance, "Maximum relative error")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_cmd) return run_gen_synth(gen);
    if (*train_cmd) return run_train(train, *train_cmd);
    if (*eval_cmd) return run_eval(ev);
    if (*sal_cmd) return run_salience(sal);
    if (*emb_cmd) return run_embed(emb);
    if (*gc_cmd) return run_gradcheck(gc);
  } catch (const std::exception& e) {
    std::cerr << "vgsa: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
