// Acceptance suite: one pass/fail line per criterion, nonzero exit code on
// any failure. Training-based criteria run small seeded synthetic setups
// and finish in a few minutes on one core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "mpmrc/checkpoint.hpp"
#include "mpmrc/model.hpp"
#include "mpmrc/synthetic.hpp"
#include "mpmrc/train.hpp"

using namespace mpmrc;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& what, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << what << " ("
            << detail << ")\n";
  if (!pass) ++g_failures;
}

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
  std::vector<double> v(detail::shape_numel(shape));
  for (double& x : v) x = rng.uniform(-0.8, 0.8);
  return Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

LstmCellParams random_cell(int input, int hidden, Rng& rng) {
  LstmCellParams p;
  p.input = input;
  p.hidden = hidden;
  double bound = 1.0 / std::sqrt(static_cast<double>(input + hidden));
  std::vector<double> w(static_cast<size_t>(4 * hidden) * (input + hidden));
  for (double& v : w) v = rng.uniform(-bound, bound);
  p.W = Tensor::from_data({4 * hidden, input + hidden}, std::move(w), true);
  p.b = Tensor::zeros({4 * hidden}, true);
  return p;
}

Vocabulary vocab_for(const std::vector<Example>& examples) {
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

ModelConfig desk_config() {
  ModelConfig cfg;
  cfg.hidden_size = 8;
  cfg.word_dim = 16;
  cfg.char_dim = 4;
  cfg.batch_size = 16;
  cfg.ema_decay = 0.9;
  cfg.patience = 10000;
  cfg.max_span_len = 5;
  cfg.synth_vocab_size = 12;
  cfg.synth_n_passages = 5;
  cfg.synth_passage_len = 6;
  cfg.synth_answer_len = 2;
  cfg.synth_distractor_rate = 0.4;
  return cfg;
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity
// ---------------------------------------------------------------------------

void criterion1() {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  auto track = [&](const char* name, const gradcheck::Result& r) {
    if (r.max_rel_err > worst) {
      worst = r.max_rel_err;
      where = std::string(name) + " " + r.worst;
    }
  };

  {  // encoder + matcher
    Rng rng(1001);
    const int h = 2, din = 3;
    auto enc_q = random_cell(din, h, rng);
    auto enc_p = random_cell(din, h, rng);
    BiLstmParams fuse{random_cell(8 * h, h, rng), random_cell(8 * h, h, rng)};
    Tensor e_q = random_tensor({3, din}, rng);
    Tensor e_p = random_tensor({4, din}, rng);
    track("encoder+matcher",
          gradcheck::check(
              [&] {
                Tensor u_q = bilstm(e_q, enc_q, enc_q);
                Tensor u_p = bilstm(e_p, enc_p, enc_p);
                return sum(mul(match(u_q, u_p, Mask(3, 1), Mask(4, 1), fuse).v,
                               match(u_q, u_p, Mask(3, 1), Mask(4, 1), fuse).v));
              },
              {e_q, e_p, enc_q.W, enc_q.b, enc_p.W, fuse.fw.W, fuse.bw.W}));
  }
  {  // boundary head
    Rng rng(1002);
    BoundaryParams p;
    p.w1 = random_tensor({3}, rng);
    p.Wv = random_tensor({3, 4}, rng);
    p.Wh = random_tensor({3, 2}, rng);
    p.init_W = random_tensor({2, 4}, rng);
    p.init_b = Tensor::zeros({2}, true);
    p.cell = random_cell(4, 2, rng);
    Tensor matched = random_tensor({6, 4}, rng);
    Tensor summary = random_tensor({4}, rng);
    track("boundary", gradcheck::check(
                          [&] {
                            auto dist = predict_boundary(matched, Mask(6, 1), summary, p);
                            return boundary_loss_single(dist, 1, 4);
                          },
                          {matched, summary, p.w1, p.Wv, p.Wh, p.init_W, p.init_b, p.cell.W, p.cell.b}));
  }
  {  // content head
    Rng rng(1003);
    ContentParams p{random_tensor({3, 4}, rng), random_tensor({3}, rng)};
    Tensor matched = random_tensor({4, 4}, rng);
    Tensor emb = random_tensor({4, 5}, rng);
    track("content", gradcheck::check(
                         [&] {
                           Tensor probs = content_probs(matched, p);
                           Tensor loss = content_loss(probs, {0, 1, 1, 0}, Mask(4, 1));
                           Tensor r = answer_representation(probs, emb, Mask(4, 1));
                           return add(loss, sum(mul(r, r)));
                         },
                         {matched, emb, p.W, p.w}));
  }
  {  // verification head
    Rng rng(1004);
    VerificationParams p{random_tensor({3 * 3}, rng)};
    Tensor reprs = random_tensor({3, 3}, rng);
    track("verification", gradcheck::check(
                              [&] {
                                auto out = verify(reprs, p);
                                return verification_loss_single(out.probs, 0);
                              },
                              {reprs, p.w}));
  }
  {  // joint loss through the full model, every parameter
    ModelConfig cfg = desk_config();
    cfg.hidden_size = 3;
    cfg.word_dim = 4;
    cfg.char_dim = 2;
    cfg.synth_n_passages = 3;
    cfg.synth_n_train = 2;
    cfg.synth_n_dev = 1;
    auto [train, dev] = generate_synthetic(cfg, 1005);
    train = prepare_training(train, cfg);
    Vocabulary vocab = vocab_for(train);
    Rng rng(1005);
    Model model(cfg, vocab, rng);
    Batch batch = make_batch(train, cfg, vocab);
    std::vector<Tensor> leaves;
    for (auto& p : model.params().all()) leaves.push_back(p.tensor);
    track("joint", gradcheck::check(
                       [&] {
                         auto losses = model.batch_losses(batch);
                         return joint_loss(losses.boundary, losses.content, losses.verify, cfg.beta1,
                                           cfg.beta2);
                       },
                       leaves));
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream detail;
  detail << "max rel err " << worst << (where.empty() ? "" : " at " + where) << ", " << secs << " s";
  report(1, "reverse-mode gradients match central finite differences for every head and the joint loss",
         worst < 1e-6 && secs < 60.0, detail.str());
}

// ---------------------------------------------------------------------------
// 2. Normalization invariants
// ---------------------------------------------------------------------------

void criterion2() {
  Rng rng(2001);
  double worst = 0.0;
  bool diag_exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    {  // boundary distributions
      int tg = rng.uniform_int(2, 9);
      BoundaryParams p;
      p.w1 = random_tensor({3}, rng, false);
      p.Wv = random_tensor({3, 4}, rng, false);
      p.Wh = random_tensor({3, 2}, rng, false);
      p.init_W = random_tensor({2, 4}, rng, false);
      p.init_b = Tensor::zeros({2});
      p.cell = random_cell(4, 2, rng);
      auto dist = predict_boundary(random_tensor({tg, 4}, rng, false), Mask(tg, 1),
                                   random_tensor({4}, rng, false), p);
      double s1 = 0, s2 = 0;
      for (int i = 0; i < tg; ++i) {
        s1 += dist.start.at(i);
        s2 += dist.end.at(i);
      }
      worst = std::max({worst, std::fabs(s1 - 1.0), std::fabs(s2 - 1.0)});
    }
    {  // context-to-question attention
      int q = rng.uniform_int(1, 6), pp = rng.uniform_int(1, 6);
      Tensor s = random_tensor({q, pp}, rng, false);
      Tensor c2q = softmax_cols(s, Mask(q, 1));
      for (int k = 0; k < pp; ++k) {
        double sum = 0;
        for (int t = 0; t < q; ++t) sum += c2q.at(t, k);
        worst = std::max(worst, std::fabs(sum - 1.0));
      }
    }
    {  // cross-passage attention and verification probabilities
      int n = rng.uniform_int(1, 6);
      VerificationParams p{random_tensor({3 * 4}, rng, false)};
      auto out = verify(random_tensor({n, 4}, rng, false), p);
      for (int i = 0; i < n; ++i) {
        if (out.similarity.at(i, i) != 0.0) diag_exact = false;
        double sum = 0;
        for (int j = 0; j < n; ++j) sum += out.attention.at(i, j);
        worst = std::max(worst, std::fabs(sum - 1.0));
      }
      double sp = 0;
      for (int i = 0; i < n; ++i) sp += out.probs.at(i);
      worst = std::max(worst, std::fabs(sp - 1.0));
    }
  }
  std::ostringstream detail;
  detail << "1000 trials, worst |sum-1| " << worst << ", diagonal exact "
         << (diag_exact ? "yes" : "no");
  report(2, "boundary, attention and verification distributions normalize; similarity diagonal is 0",
         worst < 1e-9 && diag_exact, detail.str());
}

// ---------------------------------------------------------------------------
// 3. Oracle equivalence
// ---------------------------------------------------------------------------

std::vector<AnswerCandidate> oracle_extract(const BoundaryDistribution& dist, const OffsetTable& table,
                                            int max_span_len) {
  struct Entry {
    int p, s, e;
    double score;
  };
  std::vector<Entry> entries;
  for (int s = 0; s < table.total(); ++s)
    for (int e = 0; e < table.total(); ++e) {
      if (e < s || e - s >= max_span_len) continue;
      if (!dist.mask[s] || !dist.mask[e]) continue;
      auto [ps, ls] = table.to_local(s);
      auto [pe, le] = table.to_local(e);
      if (ps != pe) continue;
      entries.push_back({ps, s, e, dist.start.at(s) * dist.end.at(e)});
    }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.p != b.p) return a.p < b.p;
    if (a.score != b.score) return a.score > b.score;
    if (a.s != b.s) return a.s < b.s;
    return a.e < b.e;
  });
  std::vector<AnswerCandidate> out;
  int last = -1;
  for (const auto& en : entries) {
    if (en.p == last) continue;
    last = en.p;
    AnswerCandidate c;
    c.passage = en.p;
    c.global_start = en.s;
    c.global_end = en.e;
    c.boundary_score = en.score;
    out.push_back(c);
  }
  return out;
}

bool is_subsequence(const Tokens& small, const Tokens& big) {
  size_t j = 0;
  for (size_t i = 0; i < big.size() && j < small.size(); ++i)
    if (big[i] == small[j]) ++j;
  return j == small.size();
}

int lcs_oracle(const Tokens& a, const Tokens& b) {
  int best = 0;
  for (int mask = 0; mask < (1 << static_cast<int>(a.size())); ++mask) {
    Tokens sub;
    for (size_t i = 0; i < a.size(); ++i)
      if (mask & (1 << i)) sub.push_back(a[i]);
    if (static_cast<int>(sub.size()) > best && is_subsequence(sub, b))
      best = static_cast<int>(sub.size());
  }
  return best;
}

DerivedSpan oracle_gold_span(const Tokens& passage, const std::vector<std::string>& references) {
  struct Entry {
    int s, e;
    double score;
  };
  std::vector<Entry> entries;
  std::vector<Tokens> refs;
  for (const auto& r : references) refs.push_back(metrics::split_ws(metrics::lowercase(r)));
  for (int s = 0; s < static_cast<int>(passage.size()); ++s)
    for (int e = s; e < static_cast<int>(passage.size()); ++e) {
      Tokens span;
      for (int i = s; i <= e; ++i) span.push_back(metrics::lowercase(passage[i]));
      double sc = 0.0;
      for (const auto& ref : refs) sc = std::max(sc, metrics::rouge_l(span, ref));
      entries.push_back({s, e, sc});
    }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    int la = a.e - a.s, lb = b.e - b.s;
    if (la != lb) return la < lb;
    return a.s < b.s;
  });
  return {entries.front().s, entries.front().e, entries.front().score};
}

void criterion3() {
  Rng rng(3001);
  int extract_fail = 0, span_fail = 0, rouge_fail = 0;

  for (int trial = 0; trial < 200; ++trial) {
    int np = rng.uniform_int(1, 4);
    std::vector<int> lens(np);
    int total = 0;
    for (int& l : lens) {
      l = rng.uniform_int(1, 4);
      total += l;
    }
    if (total > 12) {
      --trial;
      continue;
    }
    OffsetTable table;
    table.begin = {0};
    for (int l : lens) table.begin.push_back(table.begin.back() + l);
    std::vector<double> a1(total), a2(total);
    double z1 = 0, z2 = 0;
    for (int i = 0; i < total; ++i) {
      a1[i] = rng.uniform(0.0, 1.0);
      a2[i] = rng.uniform(0.0, 1.0);
      z1 += a1[i];
      z2 += a2[i];
    }
    for (int i = 0; i < total; ++i) {
      a1[i] /= z1;
      a2[i] /= z2;
    }
    BoundaryDistribution dist{Tensor::from_data({total}, a1), Tensor::from_data({total}, a2),
                              Mask(total, 1)};
    int max_len = rng.uniform_int(1, 5);
    auto got = extract_candidates(dist, table, max_len, std::vector<Tokens>(np));
    auto expected = oracle_extract(dist, table, max_len);
    bool same = got.size() == expected.size();
    for (size_t i = 0; same && i < got.size(); ++i)
      same = got[i].passage == expected[i].passage && got[i].global_start == expected[i].global_start &&
             got[i].global_end == expected[i].global_end;
    if (!same) ++extract_fail;
  }

  for (int trial = 0; trial < 100; ++trial) {
    int n = rng.uniform_int(1, 12);
    Tokens passage(n);
    for (auto& t : passage) t = "w" + std::to_string(rng.uniform_int(0, 5));
    int rs = rng.uniform_int(0, n - 1), re = rng.uniform_int(rs, std::min(n - 1, rs + 3));
    std::string ref;
    for (int i = rs; i <= re; ++i) {
      if (i > rs) ref += " ";
      ref += passage[i];
    }
    std::vector<std::string> refs{ref, "w" + std::to_string(rng.uniform_int(0, 5))};
    auto got = derive_gold_span(passage, refs);
    auto expected = oracle_gold_span(passage, refs);
    if (got.start != expected.start || got.end != expected.end || got.score != expected.score)
      ++span_fail;
  }

  for (int trial = 0; trial < 500; ++trial) {
    Tokens a(rng.uniform_int(1, 8)), b(rng.uniform_int(1, 8));
    for (auto& t : a) t = "w" + std::to_string(rng.uniform_int(0, 3));
    for (auto& t : b) t = "w" + std::to_string(rng.uniform_int(0, 3));
    int lcs = lcs_oracle(a, b);
    double expected = 0.0;
    if (lcs > 0) {
      double p = static_cast<double>(lcs) / a.size();
      double r = static_cast<double>(lcs) / b.size();
      expected = (1.0 + 1.44) * p * r / (r + 1.44 * p);
    }
    if (metrics::rouge_l(a, b) != expected) ++rouge_fail;
  }

  std::ostringstream detail;
  detail << "extract mismatches " << extract_fail << "/200, gold-span mismatches " << span_fail
         << "/100, rouge mismatches " << rouge_fail << "/500";
  report(3, "candidate extraction, gold-span derivation and ROUGE-L match brute-force oracles",
         extract_fail == 0 && span_fail == 0 && rouge_fail == 0, detail.str());
}

// ---------------------------------------------------------------------------
// 4. Case-study score triples
// ---------------------------------------------------------------------------

void criterion4() {
  auto cand = [](double b, double c, double v) {
    AnswerCandidate a;
    a.boundary_score = b;
    a.content_score = c;
    a.verification_score = v;
    return a;
  };
  std::vector<AnswerCandidate> cands{
      cand(1.0e-2, 1.0e-1, 1.1e-1), cand(1.0e-4, 4.0e-2, 3.2e-2), cand(5.5e-3, 7.7e-2, 1.2e-1),
      cand(2.7e-3, 8.1e-2, 1.3e-1), cand(5.8e-4, 7.9e-2, 5.1e-2), cand(5.8e-3, 9.1e-2, 2.7e-1)};
  int chosen = select_by_product(cands);
  double p6 = 5.8e-3 * 9.1e-2 * 2.7e-1;
  double p1 = 1.0e-2 * 1.0e-1 * 1.1e-1;
  std::ostringstream detail;
  detail << "chose candidate " << chosen + 1 << ", product " << p6 << " vs " << p1;
  report(4, "the case-study score triples select the verified candidate over the boundary favorite",
         chosen == 5 && std::fabs(p6 - 1.425e-4) < 1e-6 && std::fabs(p1 - 1.1e-4) < 1e-12,
         detail.str());
}

// ---------------------------------------------------------------------------
// 5. Trainability
// ---------------------------------------------------------------------------

struct RunResult {
  double train_acc = 0.0;
  double dev_acc = 0.0;
  std::vector<double> trace;
};

RunResult run_training(const ModelConfig& cfg, bool vocab_includes_dev) {
  auto [train, dev] = generate_synthetic(cfg, cfg.seed);
  train = prepare_training(train, cfg);
  dev = prepare_training(dev, cfg);
  std::vector<Example> all = train;
  if (vocab_includes_dev) all.insert(all.end(), dev.begin(), dev.end());
  Vocabulary vocab = vocab_for(all);
  Rng rng(cfg.seed);
  Model model(cfg, vocab, rng);
  Adam adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  adam.attach(model.params());
  Trainer trainer(model, adam);
  std::ostringstream log;
  TrainResult r = trainer.run(train, {}, "", log);
  RunResult out;
  out.train_acc = trainer.evaluate(train);
  out.dev_acc = dev.empty() ? 0.0 : trainer.evaluate(dev);
  out.trace = std::move(r.loss_trace);
  return out;
}

void criterion5() {
  auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg = desk_config();
  cfg.learning_rate = 0.008;
  cfg.epochs = 200;
  cfg.seed = 42;
  cfg.synth_n_train = 50;
  cfg.synth_n_dev = 10;
  RunResult r = run_training(cfg, false);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream detail;
  detail << "train exact-span accuracy " << r.train_acc << " after " << cfg.epochs << " epochs, "
         << secs << " s";
  report(5, "full-model training overfits 50 synthetic examples to >= 95% exact-span accuracy",
         r.train_acc >= 0.95 && secs < 600.0, detail.str());
}

// ---------------------------------------------------------------------------
// 6. Verification usefulness (directional)
// ---------------------------------------------------------------------------

void criterion6() {
  ModelConfig base = desk_config();
  base.learning_rate = 0.003;
  base.epochs = 100;
  base.synth_n_train = 300;
  base.synth_n_dev = 200;
  double full_sum = 0.0, ablation_sum = 0.0;
  std::ostringstream detail;
  detail.precision(4);
  for (std::uint64_t seed : {1, 2, 3}) {
    ModelConfig full = base;
    full.seed = seed;
    ModelConfig ablation = base;
    ablation.seed = seed;
    ablation.beta1 = 0.0;
    ablation.beta2 = 0.0;
    double f = run_training(full, true).dev_acc;
    double a = run_training(ablation, true).dev_acc;
    full_sum += f;
    ablation_sum += a;
    detail << "seed " << seed << ": " << f << " vs " << a << "; ";
  }
  detail << "mean " << full_sum / 3 << " vs " << ablation_sum / 3;
  report(6, "full model's dev exact-span accuracy >= boundary-only ablation, averaged over 3 seeds",
         full_sum / 3 >= ablation_sum / 3, detail.str());
}

// ---------------------------------------------------------------------------
// 7. Determinism and persistence
// ---------------------------------------------------------------------------

void criterion7() {
  ModelConfig cfg = desk_config();
  cfg.learning_rate = 0.005;
  cfg.epochs = 5;
  cfg.seed = 77;
  cfg.synth_n_train = 12;
  cfg.synth_n_dev = 4;

  auto [train, dev] = generate_synthetic(cfg, cfg.seed);
  train = prepare_training(train, cfg);
  dev = prepare_training(dev, cfg);
  std::vector<Example> all = train;
  all.insert(all.end(), dev.begin(), dev.end());
  Vocabulary vocab = vocab_for(all);

  auto run_once = [&](Model& model, Adam& adam) {
    Trainer trainer(model, adam);
    std::ostringstream log;
    return trainer.run(train, {}, "", log).loss_trace;
  };

  Rng rng1(cfg.seed), rng2(cfg.seed);
  Model m1(cfg, vocab, rng1), m2(cfg, vocab, rng2);
  Adam a1(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  Adam a2 = a1;
  a1.attach(m1.params());
  a2.attach(m2.params());
  auto t1 = run_once(m1, a1);
  auto t2 = run_once(m2, a2);
  bool traces_equal = t1 == t2;

  std::string path = "acceptance_roundtrip.ckpt";
  save_checkpoint(m1, a1, path);
  Checkpoint loaded = load_checkpoint(path);
  std::remove(path.c_str());
  bool bits_equal = true;
  for (const auto& p : m1.params().all()) {
    const Parameter& q = loaded.model.params().at(p.name);
    if (p.tensor.data() != q.tensor.data() || p.ema != q.ema) bits_equal = false;
  }
  Batch batch = make_batch(dev, cfg, vocab);
  Batch batch2 = make_batch(dev, loaded.config, loaded.vocab);
  bool preds_equal = true;
  for (int b = 0; b < batch.size; ++b) {
    Prediction x = m1.predict_example(batch, b);
    Prediction y = loaded.model.predict_example(batch2, b);
    if (x.chosen.passage != y.chosen.passage || x.chosen.global_start != y.chosen.global_start ||
        x.chosen.global_end != y.chosen.global_end || x.combined_score != y.combined_score)
      preds_equal = false;
  }
  std::ostringstream detail;
  detail << "traces " << (traces_equal ? "identical" : "differ") << ", parameters "
         << (bits_equal ? "bit-identical" : "differ") << ", predictions "
         << (preds_equal ? "identical" : "differ");
  report(7, "identical seeds reproduce loss traces; checkpoints round-trip bit-exactly",
         traces_equal && bits_equal && preds_equal, detail.str());
}

// ---------------------------------------------------------------------------
// 8. Degenerate cases
// ---------------------------------------------------------------------------

void criterion8() {
  bool ok = true;
  std::ostringstream detail;

  {  // single passage: p^v = [1], zero loss
    Rng rng(8001);
    VerificationParams p{random_tensor({3 * 4}, rng, false)};
    auto out = verify(random_tensor({1, 4}, rng, false), p);
    double loss = verification_loss({out.probs}, {0}).item();
    if (out.probs.at(0) != 1.0 || std::fabs(loss) > 1e-12) ok = false;
    detail << "n=1 p=" << out.probs.at(0) << " loss=" << loss << "; ";
  }
  {  // uniform boundary distributions: loss 2 ln n
    const int n = 6;
    BoundaryDistribution dist{Tensor::full({n}, 1.0 / n), Tensor::full({n}, 1.0 / n), Mask(n, 1)};
    double loss = boundary_loss({dist}, {{0, n - 1}}).item();
    if (std::fabs(loss - 2.0 * std::log(n)) > 1e-12) ok = false;
    detail << "uniform boundary loss " << loss << " vs " << 2.0 * std::log(n) << "; ";
  }
  {  // uniform verification: loss ln n
    const int n = 5;
    double loss = verification_loss({Tensor::full({n}, 1.0 / n)}, {2}).item();
    if (std::fabs(loss - std::log(n)) > 1e-12) ok = false;
    detail << "uniform verification loss " << loss << " vs " << std::log(n) << "; ";
  }
  {  // zero task weights: joint equals boundary exactly
    Tensor lb = Tensor::scalar(0.731), lc = Tensor::scalar(5.0), lv = Tensor::scalar(9.0);
    double joint = joint_loss(lb, lc, lv, 0.0, 0.0).item();
    if (joint != 0.731) ok = false;
    detail << "beta=0 joint " << joint;
  }
  report(8, "degenerate cases behave exactly as specified", ok, detail.str());
}

}  // namespace

int main() {
  auto t0 = std::chrono::steady_clock::now();
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "CRITERIA FAILED") << " (" << secs
            << " s total)\n";
  return g_failures;
}
