#pragma once

// Joint training loop: shuffled epochs, per-step forward of all three
// heads, joint loss with L2 on the weight matrices, Adam, EMA shadows, and
// EMA-weighted dev evaluation with early stopping.

#include <filesystem>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "mpmrc/checkpoint.hpp"
#include "mpmrc/model.hpp"

namespace mpmrc {

struct StepDiagnostics {
  double boundary = 0.0;
  double content = 0.0;
  double verify = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<double> loss_trace;  // per-step total loss
  double best_metric = -1.0;
  int best_epoch = -1;
  int steps = 0;
  std::string checkpoint_path;
};

// Swaps EMA weights in on construction and back out on destruction.
class EmaScope {
 public:
  explicit EmaScope(ParameterStore& store) : store_(store) { ema_swap(store_); }
  ~EmaScope() { ema_swap(store_); }
  EmaScope(const EmaScope&) = delete;
  EmaScope& operator=(const EmaScope&) = delete;

 private:
  ParameterStore& store_;
};

class Trainer {
 public:
  Trainer(Model& model, Adam& adam) : model_(model), adam_(adam) {}

  StepDiagnostics step(const Batch& batch) {
    const ModelConfig& cfg = model_.config();
    ++step_count_;
    auto losses = model_.batch_losses(batch);
    StepDiagnostics diag;
    diag.boundary = losses.boundary.item();
    diag.content = losses.content.item();
    diag.verify = losses.verify.item();
    check_finite(diag.boundary, "boundary");
    check_finite(diag.content, "content");
    check_finite(diag.verify, "verification");
    Tensor total = joint_loss(losses.boundary, losses.content, losses.verify, cfg.beta1, cfg.beta2);
    if (cfg.l2_weight != 0.0) {
      Tensor l2 = store().l2_term();
      diag.l2 = cfg.l2_weight * l2.item();
      total = add(total, scale(l2, cfg.l2_weight));
    }
    diag.total = total.item();
    check_finite(diag.total, "total");
    try {
      auto grads = backward(total, store());
      adam_.step(store(), grads);
    } catch (const NumericError& e) {
      throw NumericError("training step " + std::to_string(step_count_) + ": " + e.what());
    }
    ema_update(store(), cfg.ema_decay);
    return diag;
  }

  // Dev metric under EMA weights: exact-span accuracy or case-averaged
  // ROUGE-L, per config.
  double evaluate(const std::vector<Example>& dev) {
    if (dev.empty()) return 0.0;
    const ModelConfig& cfg = model_.config();
    EmaScope ema(store());
    int hits = 0, total = 0;
    double rouge_sum = 0.0;
    for (size_t off = 0; off < dev.size(); off += cfg.batch_size) {
      size_t hi = std::min(dev.size(), off + cfg.batch_size);
      std::vector<Example> chunk(dev.begin() + off, dev.begin() + hi);
      Batch batch = make_batch(chunk, cfg, model_.vocab());
      for (int b = 0; b < batch.size; ++b) {
        Prediction pred = model_.predict_example(batch, b);
        ++total;
        if (cfg.dev_metric == "exact_span") {
          if (batch.gold_passage[b] >= 0 && pred.chosen.passage == batch.gold_passage[b] &&
              pred.chosen.global_start == batch.gold_start_global[b] &&
              pred.chosen.global_end == batch.gold_end_global[b])
            ++hits;
        } else {
          std::vector<Tokens> refs;
          for (const auto& r : batch.references[b])
            refs.push_back(metrics::split_ws(metrics::lowercase(r)));
          Tokens cand;
          for (const auto& t : pred.chosen.answer_tokens) cand.push_back(metrics::lowercase(t));
          if (!refs.empty()) rouge_sum += metrics::rouge_l_multi(cand, refs, cfg.rouge_beta);
        }
      }
    }
    if (total == 0) return 0.0;
    return cfg.dev_metric == "exact_span" ? static_cast<double>(hits) / total : rouge_sum / total;
  }

  TrainResult run(const std::vector<Example>& train, const std::vector<Example>& dev,
                  const std::string& out_dir, std::ostream& log) {
    const ModelConfig& cfg = model_.config();
    if (train.empty()) throw ContractError("train: empty training set");
    TrainResult result;
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      result.checkpoint_path = out_dir + "/best.ckpt";
    }
    Rng shuffle_rng = Rng(cfg.seed).fork(17);
    std::vector<int> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    int stale = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      shuffle_rng.shuffle(order);
      StepDiagnostics epoch_diag;
      int epoch_steps = 0;
      for (size_t off = 0; off < order.size(); off += cfg.batch_size) {
        size_t hi = std::min(order.size(), off + cfg.batch_size);
        std::vector<Example> chunk;
        chunk.reserve(hi - off);
        for (size_t i = off; i < hi; ++i) chunk.push_back(train[order[i]]);
        StepDiagnostics diag = step(make_batch(chunk, cfg, model_.vocab()));
        result.loss_trace.push_back(diag.total);
        ++result.steps;
        ++epoch_steps;
        epoch_diag.boundary += diag.boundary;
        epoch_diag.content += diag.content;
        epoch_diag.verify += diag.verify;
        epoch_diag.total += diag.total;
      }
      double metric = evaluate(dev);
      log << "epoch " << epoch << " step " << result.steps << std::fixed << std::setprecision(6)
          << " loss " << epoch_diag.total / epoch_steps << " boundary "
          << epoch_diag.boundary / epoch_steps << " content " << epoch_diag.content / epoch_steps
          << " verify " << epoch_diag.verify / epoch_steps << " dev_" << cfg.dev_metric << " "
          << metric << "\n"
          << std::defaultfloat;
      if (!dev.empty() && metric > result.best_metric) {
        result.best_metric = metric;
        result.best_epoch = epoch;
        stale = 0;
        if (!result.checkpoint_path.empty()) save_checkpoint(model_, adam_, result.checkpoint_path);
      } else {
        ++stale;
      }
      if (!dev.empty() && stale > cfg.patience) {
        log << "early stop after epoch " << epoch << " (no improvement in " << stale
            << " evaluations)\n";
        break;
      }
    }
    if (dev.empty() && !result.checkpoint_path.empty())
      save_checkpoint(model_, adam_, result.checkpoint_path);
    return result;
  }

  int step_count() const { return step_count_; }

 private:
  ParameterStore& store() { return model_.params(); }

  void check_finite(double v, const char* component) {
    if (!std::isfinite(v))
      throw NumericError("training step " + std::to_string(step_count_) + ": " +
                         component + " loss is not finite");
  }

  Model& model_;
  Adam& adam_;
  int step_count_ = 0;
};

}  // namespace mpmrc
