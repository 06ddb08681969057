// Command-line interface: synthetic data generation, training, prediction,
// evaluation, and dataset statistics over the JSONL formats.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpmrc/checkpoint.hpp"
#include "mpmrc/metrics.hpp"
#include "mpmrc/model.hpp"
#include "mpmrc/synthetic.hpp"
#include "mpmrc/train.hpp"

using namespace mpmrc;

namespace {

Vocabulary build_vocab(const std::vector<Example>& examples) {
  Vocabulary v;
  for (const auto& ex : examples) {
    for (const auto& t : ex.question) {
      v.add_token(t);
      v.add_chars_of(t);
    }
    for (const auto& p : ex.passages)
      for (const auto& t : p) {
        v.add_token(t);
        v.add_chars_of(t);
      }
  }
  return v;
}

int cmd_train(const std::string& config_path, const std::string& train_path,
              const std::string& dev_path, const std::string& out_dir) {
  ModelConfig cfg = load_config(config_path);
  cfg.validate();

  PrepareStats train_stats;
  std::vector<Example> train = prepare_training(load_jsonl(train_path), cfg, &train_stats);
  if (train.empty()) throw IngestError("train: no usable training examples in " + train_path);
  std::cout << "train examples kept " << train_stats.kept << ", dropped (no span "
            << train_stats.dropped_no_span << ", truncated span " << train_stats.dropped_span_truncated
            << ", passage cut " << train_stats.dropped_passage_cut << ")\n";

  std::vector<Example> dev;
  if (!dev_path.empty()) {
    dev = load_jsonl(dev_path);
    if (cfg.dev_metric == "exact_span") {
      PrepareStats dev_stats;
      dev = prepare_training(std::move(dev), cfg, &dev_stats);
      std::cout << "dev examples kept " << dev_stats.kept << "\n";
    }
  }

  Vocabulary data_vocab = build_vocab(train);
  Rng rng(cfg.seed);
  std::unique_ptr<Model> model;
  if (!cfg.embedding_path.empty()) {
    WordTableInit init = load_word_table(data_vocab, cfg.embedding_path, cfg.word_dim, rng);
    std::cout << "loaded pretrained vectors for " << init.vocab.n_tokens() - 2 << " of "
              << data_vocab.n_tokens() - 2 << " tokens\n";
    model = std::make_unique<Model>(cfg, init.vocab, rng, &init);
  } else {
    model = std::make_unique<Model>(cfg, data_vocab, rng);
  }

  Adam adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  adam.attach(model->params());
  Trainer trainer(*model, adam);

  std::filesystem::create_directories(out_dir);
  std::ofstream log_file(out_dir + "/train.log");
  struct Tee : std::ostream, std::streambuf {
    std::ostream &a, &b;
    Tee(std::ostream& x, std::ostream& y) : std::ostream(this), a(x), b(y) {}
    int overflow(int c) override {
      a.put(static_cast<char>(c));
      b.put(static_cast<char>(c));
      return c;
    }
  } tee(std::cout, log_file);

  TrainResult result = trainer.run(train, dev, out_dir, tee);
  if (dev.empty()) {
    std::cout << "no dev set; final checkpoint written to " << result.checkpoint_path << "\n";
  } else {
    std::cout << "best dev " << cfg.dev_metric << " " << result.best_metric << " at epoch "
              << result.best_epoch << "; checkpoint " << result.checkpoint_path << "\n";
  }
  return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& input_path,
                const std::string& output_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  EmaScope ema(ckpt.model.params());  // evaluation always uses EMA weights
  std::vector<Example> examples = load_jsonl(input_path);
  std::ofstream out(output_path);
  if (!out) throw IoError("predict: cannot open " + output_path);
  const ModelConfig& cfg = ckpt.config;
  for (size_t off = 0; off < examples.size(); off += cfg.batch_size) {
    size_t hi = std::min(examples.size(), off + cfg.batch_size);
    std::vector<Example> chunk(examples.begin() + off, examples.begin() + hi);
    Batch batch = make_batch(chunk, cfg, ckpt.vocab);
    for (int b = 0; b < batch.size; ++b) {
      nlohmann::json j;
      j["id"] = batch.ids[b];
      try {
        Prediction pred = ckpt.model.predict_example(batch, b);
        std::string answer;
        for (size_t i = 0; i < pred.chosen.answer_tokens.size(); ++i) {
          if (i) answer.push_back(' ');
          answer += pred.chosen.answer_tokens[i];
        }
        j["answer_tokens"] = pred.chosen.answer_tokens;
        j["answer"] = answer;
        j["passage"] = pred.chosen.passage;
        j["span"] = {pred.chosen.passage, pred.chosen.start, pred.chosen.end};
        j["boundary_score"] = pred.chosen.boundary_score;
        j["content_score"] = pred.chosen.content_score;
        j["verification_score"] = pred.chosen.verification_score;
        j["score"] = pred.combined_score;
      } catch (const NoAnswerError& e) {
        j["error"] = e.what();
      }
      out << j.dump() << "\n";
    }
  }
  std::cout << "wrote predictions for " << examples.size() << " examples to " << output_path << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gold_path, double rouge_beta) {
  std::vector<Example> gold = load_jsonl(gold_path);
  std::ifstream in(pred_path);
  if (!in) throw IoError("eval: cannot open " + pred_path);

  struct Pred {
    Tokens tokens;
    Span span;
    bool has_span = false;
  };
  std::map<std::string, Pred> preds;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Pred p;
    if (j.contains("answer_tokens"))
      for (const auto& t : j.at("answer_tokens")) p.tokens.push_back(t.get<std::string>());
    else if (j.contains("answer"))
      p.tokens = metrics::split_ws(j.at("answer").get<std::string>());
    if (j.contains("span")) {
      p.span = {j["span"][0].get<int>(), j["span"][1].get<int>(), j["span"][2].get<int>()};
      p.has_span = true;
    }
    preds[j.at("id").get<std::string>()] = std::move(p);
  }

  std::vector<std::string> ids;
  std::vector<Tokens> cands;
  std::vector<std::vector<Tokens>> refs;
  std::vector<int> span_state;
  for (const auto& ex : gold) {
    auto it = preds.find(ex.id);
    if (it == preds.end()) continue;
    ids.push_back(ex.id);
    Tokens cand;
    for (const auto& t : it->second.tokens) cand.push_back(metrics::lowercase(t));
    cands.push_back(std::move(cand));
    std::vector<Tokens> r;
    for (const auto& s : ex.references) r.push_back(metrics::split_ws(metrics::lowercase(s)));
    refs.push_back(std::move(r));
    if (ex.gold_span && it->second.has_span)
      span_state.push_back(it->second.span == *ex.gold_span ? 1 : 0);
    else
      span_state.push_back(-1);
  }
  if (ids.empty()) throw IngestError("eval: no prediction/gold id overlap");

  auto rep = metrics::evaluate_corpus(ids, cands, refs, span_state, rouge_beta);
  nlohmann::json j;
  j["rouge_l"] = rep.rouge_l;
  j["bleu_1"] = rep.bleu_1;
  j["exact_span_accuracy"] = rep.exact_span_accuracy;
  j["n_cases"] = rep.n_cases;
  j["n_span_cases"] = rep.n_span_cases;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : rep.rows) {
    nlohmann::json r;
    r["id"] = row.id;
    r["rouge_l"] = row.rouge_l;
    if (row.has_span) r["span_match"] = row.span_match;
    rows.push_back(std::move(r));
  }
  j["per_example"] = std::move(rows);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_synth(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
  ModelConfig cfg = config_path.empty() ? ModelConfig{} : load_config(config_path);
  cfg.validate();
  auto [train, dev] = generate_synthetic(cfg, seed);
  std::filesystem::create_directories(out_dir);
  write_jsonl(train, out_dir + "/train.jsonl");
  write_jsonl(dev, out_dir + "/dev.jsonl");
  std::cout << "wrote " << train.size() << " train and " << dev.size() << " dev examples to "
            << out_dir << "\n";
  return 0;
}

int cmd_stats(const std::string& input_path, double threshold) {
  std::vector<Example> examples = load_jsonl(input_path);
  auto st = metrics::span_validity_stats(examples, threshold);
  nlohmann::json j;
  j["n_questions"] = st.n_questions;
  j["multiple_answers"] = st.multiple_answers;
  j["multiple_spans"] = st.multiple_spans;
  j["f1_threshold"] = st.threshold;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-passage reading comprehension with cross-passage answer verification"};
  app.require_subcommand(1);

  std::string config_path, train_path, dev_path, out_dir, ckpt_path, input_path, output_path,
      pred_path, gold_path;
  std::uint64_t seed = 42;
  double rouge_beta = 1.2, threshold = 0.7;

  auto* train = app.add_subcommand("train", "Train a model on JSONL data");
  train->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("--train", train_path, "Training JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--dev", dev_path, "Dev JSONL")->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "Output directory")->required();

  auto* predict = app.add_subcommand("predict", "Predict answers with a trained checkpoint");
  predict->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  predict->add_option("--input", input_path, "Input JSONL")->required()->check(CLI::ExistingFile);
  predict->add_option("--output", output_path, "Output JSONL")->required();

  auto* eval = app.add_subcommand("eval", "Score predictions against gold answers");
  eval->add_option("--pred", pred_path, "Prediction JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--gold", gold_path, "Gold JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--rouge-beta", rouge_beta, "ROUGE-L recall weight");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--out", out_dir, "Output directory")->required();

  auto* stats = app.add_subcommand("stats", "Multiple-answer / multiple-span statistics");
  stats->add_option("--input", input_path, "Input JSONL")->required()->check(CLI::ExistingFile);
  stats->add_option("--threshold", threshold, "Token-F1 validity threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config_path, train_path, dev_path, out_dir);
    if (*predict) return cmd_predict(ckpt_path, input_path, output_path);
    if (*eval) return cmd_eval(pred_path, gold_path, rouge_beta);
    if (*synth) return cmd_synth(config_path, seed, out_dir);
    if (*stats) return cmd_stats(input_path, threshold);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
