// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "../golden_sentences.hpp"
#include "mcdn/checkpoint.hpp"
#include "mcdn/diagnostics.hpp"
#include "mcdn/encoder_scrn.hpp"
#include "mcdn/encoder_word.hpp"
#include "mcdn/head.hpp"
#include "mcdn/metrics.hpp"
#include "mcdn/model.hpp"
#include "mcdn/synthetic.hpp"
#include "mcdn/trainer.hpp"

using namespace mcdn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char *f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char *f, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Tensor random_tensor(Shape shape, Rng &rng, double scale = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double &x : v)
    x = scale * rng.normal();
  return Tensor::from(std::move(shape), std::move(v));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// ---------------------------------------------------------------- 1

Outcome gradients() {
  const auto r = check_model_gradients(reduced_config(), 1);
  std::string worst_name;
  for (const auto &p : r.params)
    if (p.relative == r.worst)
      worst_name = p.name;
  return {r.worst <= 1e-3 && r.seconds < 60.0,
          fmt("worst relative error %.2e, %.1f s", r.worst, r.seconds) + " (" + worst_name +
              ", " + std::to_string(r.params.size()) + " tensors)"};
}

// ---------------------------------------------------------------- 2

Outcome shapes() {
  const auto data = make_marker_dataset(4, 9);
  const Model model(Config{}, build_vocab(data, nullptr), 1);
  const auto batch = model.encode(data);
  ForwardTrace t;
  model.forward_example(batch, 0, {}, &t);
  const auto h_u = ops::concat({t.h_w, t.h_s});
  const bool ok = t.objects.bl.shape() == Shape{150} && t.objects.l.shape() == Shape{150} &&
                  t.objects.al.shape() == Shape{150} && t.h_g.shape() == Shape{128} &&
                  t.pairs.shape() == Shape{4, 428} && t.h_s.shape() == Shape{256} &&
                  h_u.shape() == Shape{384} && model.head().w3.shape() == Shape{384, 64} &&
                  t.probabilities.shape() == Shape{2};
  return {ok, "objects 3x" + std::to_string(t.objects.bl.numel()) + ", h_g " +
                  std::to_string(t.h_g.numel()) + ", pairs " + std::to_string(t.pairs.dim(0)) +
                  "x" + std::to_string(t.pairs.dim(1)) + ", h_s " +
                  std::to_string(t.h_s.numel()) + ", h_u " + std::to_string(h_u.numel())};
}

// ---------------------------------------------------------------- 3

Outcome focal_algebra() {
  LossConfig ce;
  ce.alpha = 0.5;
  ce.beta = 0.0;
  const LossConfig def;
  double ce_err = 0.0, ratio_err = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double p = i / 1001.0;
    ce_err = std::max(ce_err, std::abs(focal_loss_value(p, 1, ce) + 0.5 * std::log(p)));
    ce_err = std::max(ce_err, std::abs(focal_loss_value(p, 0, ce) + 0.5 * std::log(1.0 - p)));
    ratio_err = std::max(
        ratio_err, std::abs(focal_loss_value(p, 1, def) / focal_loss_value(1.0 - p, 0, def) - 3.0));
  }
  const double s1 = focal_loss_value(1.0, 1, def);
  const double s2 = focal_loss_value(0.5, 1, def);
  const double s3 = focal_loss_value(0.1, 0, def);
  const bool spots =
      std::abs(s1) <= 1e-6 && std::abs(s2 - 0.032491) <= 1e-6 && std::abs(s3 - 2.634e-6) <= 1e-6;
  return {ce_err <= 1e-9 && ratio_err <= 1e-12 && spots,
          fmt("CE gap %.1e, ratio gap %.1e", ce_err, ratio_err) +
              fmt(", spots %.6f %.4e", s2, s3)};
}

// ---------------------------------------------------------------- 4

Outcome attention_and_norm() {
  Rng rng(41);
  double row_err = 0.0, pad_mass = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(6), n = 1 + rng.below(8), dk = 1 + rng.below(5);
    Mask mask(n);
    for (auto &f : mask)
      f = rng.uniform() < 0.6;
    mask[rng.below(n)] = 1;
    // With V = I the attention output is the weight matrix itself.
    std::vector<double> eye(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      eye[i * n + i] = 1.0;
    const auto w = scaled_attention(random_tensor({m, dk}, rng, 3.0),
                                    random_tensor({n, dk}, rng, 3.0), Tensor::from({n, n}, eye),
                                    mask);
    for (std::size_t i = 0; i < m; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        total += w.at(i, j);
        if (!mask[j])
          pad_mass = std::max(pad_mass, std::abs(w.at(i, j)));
      }
      row_err = std::max(row_err, std::abs(total - 1.0));
    }
  }

  const auto data = make_marker_dataset(8, 10);
  const Model model(reduced_config(), build_vocab(data, nullptr), 3);
  const auto tight = model.encode(data);
  const auto wide = encode_batch(data, model.vocab(), model.config().model.max_len);
  double pad_drift = 0.0;
  for (std::size_t b = 0; b < data.size(); ++b) {
    ForwardTrace t1, t2;
    model.forward_example(tight, b, {}, &t1);
    model.forward_example(wide, b, {}, &t2);
    pad_drift = std::max(pad_drift, max_abs_diff(t1.h_w.data(), t2.h_w.data()));
    pad_drift = std::max(pad_drift, max_abs_diff(t1.probabilities.data(), t2.probabilities.data()));
  }

  // Shifts on a 2^-10 grid keep x + c exact, so layer norm must agree bit for bit.
  bool ln_exact = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(4), n = 2 + rng.below(9);
    std::vector<double> x(m * n);
    for (double &v : x)
      v = static_cast<double>(static_cast<std::int64_t>(rng.below(16384)) - 8192) / 1024.0;
    const auto gain = random_tensor({n}, rng), bias = random_tensor({n}, rng);
    const double c =
        static_cast<double>(static_cast<std::int64_t>(rng.below(65536)) - 32768) / 1024.0;
    auto xs = x;
    for (double &v : xs)
      v += c;
    const auto a = ops::layer_norm(Tensor::from({m, n}, x), gain, bias, 1e-5);
    const auto b = ops::layer_norm(Tensor::from({m, n}, xs), gain, bias, 1e-5);
    const auto da = a.data(), db = b.data();
    ln_exact = ln_exact && std::equal(da.begin(), da.end(), db.begin(), db.end());
  }
  return {row_err <= 1e-6 && pad_mass == 0.0 && pad_drift <= 1e-9 && ln_exact,
          fmt("row sum gap %.1e, pad weight %.1e", row_err, pad_mass) +
              fmt(", pad drift %.1e", pad_drift) +
              (ln_exact ? ", layer-norm shift exact" : ", layer-norm shift NOT exact")};
}

// ---------------------------------------------------------------- 5

Outcome relation_symmetry() {
  const auto data = make_marker_dataset(4, 1);
  double perm_err = 0.0, min_swap = INFINITY;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Model model(reduced_config(), build_vocab(data, nullptr), 1000 + seed);
    const auto &m = model.config().model;
    Rng rng(seed);
    const ObjectSet o{random_tensor({m.k}, rng), random_tensor({m.k}, rng),
                      random_tensor({m.k}, rng)};
    const auto hg = random_tensor({2 * m.dg}, rng);
    const auto pairs = build_pairs(o, hg);
    const auto h = relation_reason(pairs, model.scrn());
    std::vector<std::size_t> perm{0, 1, 2, 3};
    while (std::next_permutation(perm.begin(), perm.end())) {
      std::vector<Tensor> rows;
      for (auto i : perm)
        rows.push_back(ops::reshape(ops::slice_rows(pairs, i, i + 1), {pairs.dim(1)}));
      const auto p = relation_reason(ops::stack_rows(rows), model.scrn());
      perm_err = std::max(perm_err, max_abs_diff(p.data(), h.data()));
    }
    const auto swapped = relation_reason(build_pairs({o.al, o.l, o.bl}, hg), model.scrn());
    min_swap = std::min(min_swap, max_abs_diff(swapped.data(), h.data()));
  }
  return {perm_err <= 1e-12 && min_swap > 1e-6,
          fmt("permutation gap %.1e, smallest swap change %.2e over 100 seeds", perm_err,
              min_swap)};
}

// ---------------------------------------------------------------- 6

double pairwise_auroc(const std::vector<double> &s, const std::vector<int> &y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

double threshold_auprc(const std::vector<double> &s, const std::vector<int> &y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double positives = 0.0;
  for (int v : y)
    positives += v;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) {
        predicted += 1.0;
        tp += y[i];
      }
    ap += (tp / positives - prev_recall) * (tp / predicted);
    prev_recall = tp / positives;
  }
  return ap;
}

Outcome metric_oracles() {
  Rng rng(60);
  double err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    const bool coarse = rng.below(2) == 0;
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(coarse ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform());
      y.push_back(static_cast<int>(rng.below(2)));
    }
    y[0] = 1;
    y[1] = 0;
    err = std::max(err, std::abs(auroc(s, y) - pairwise_auroc(s, y)));
    err = std::max(err, std::abs(auprc(s, y) - threshold_auprc(s, y)));
  }
  const std::vector<double> s{0.9, 0.8, 0.3};
  const std::vector<int> y{1, 0, 1};
  const auto r = compute_metrics(s, y);
  const bool example = r.counts.tp == 1 && r.counts.fp == 1 && r.counts.fn == 1 &&
                       r.counts.tn == 0 && r.precision == 0.5 && r.recall == 0.5 &&
                       r.f1 == 0.5 && r.auroc && *r.auroc == 0.5;
  return {err <= 1e-9 && example,
          fmt("worst oracle gap %.1e over 200 sets", err) +
              (example ? ", 3-point example exact" : ", 3-point example WRONG")};
}

// ---------------------------------------------------------------- 7

Config overfit_config(bool diagnostic) {
  Config c;
  c.model.d = 32;
  c.train.epochs = 50;
  if (diagnostic) {
    c.model.dropout = 0.0;
    c.train.patience = 1000;
  }
  return c;
}

struct OverfitRun {
  TrainResult result;
  std::size_t first_perfect = 0;
  double seconds = 0.0;
};

OverfitRun overfit(const Config &cfg, const std::vector<SegmentedExample> &data) {
  Model model(cfg, build_vocab(data, nullptr), cfg.train.seed);
  OverfitRun run;
  const auto t0 = std::chrono::steady_clock::now();
  run.result = train(model, data, data, nullptr, [&](const EpochRecord &e) {
    if (!run.first_perfect && e.valid.f1 == 1.0)
      run.first_perfect = e.epoch;
  });
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

Outcome overfit_criterion(Model *trained_out, std::vector<SegmentedExample> &data_out) {
  const auto cfg = overfit_config(false);
  data_out = make_marker_dataset(64, cfg.train.seed);
  const auto a = overfit(cfg, data_out);
  const auto b = overfit(cfg, data_out);
  const bool deterministic = a.result.batch_losses == b.result.batch_losses &&
                             a.result.best_checkpoint == b.result.best_checkpoint;
  if (trained_out)
    *trained_out = deserialize_model(a.result.best_checkpoint);
  const double final_lr = a.result.epochs.back().lr;
  std::string detail = fmt("best train F1 %.3f at epoch %.0f", a.result.best_f1,
                           static_cast<double>(a.result.best_epoch));
  detail += fmt(", final lr %.1e, %.1f s per run", final_lr, a.seconds);
  detail += deterministic ? ", repeat run identical" : ", repeat run DIFFERS";
  return {a.first_perfect != 0 && deterministic, detail};
}

std::string overfit_diagnostic() {
  const auto cfg = overfit_config(true);
  const auto data = make_marker_dataset(64, cfg.train.seed);
  const auto run = overfit(cfg, data);
  if (run.first_perfect)
    return "dropout 0, no lr decay: train F1 1.000 at epoch " + std::to_string(run.first_perfect);
  return fmt("dropout 0, no lr decay: best train F1 %.3f", run.result.best_f1);
}

// ---------------------------------------------------------------- 8

Outcome golden_segmentation() {
  const AltLexLexicon lexicon(mcdn::testing::golden_markers());
  std::size_t ok = 0, total = 0;
  for (const auto &g : mcdn::testing::golden_sentences()) {
    ++total;
    const auto ex = prepare_example(RawExample{g.sentence, std::nullopt, std::nullopt}, lexicon);
    ok += ex.tokens.size() == g.n_tokens && ex.spans.altlex == g.altlex &&
          ex.spans.before == TokenRange{0, g.altlex.begin} &&
          ex.spans.after == TokenRange{g.altlex.end, g.n_tokens} && !ex.no_altlex;
  }
  return {ok == total && total == 5,
          std::to_string(ok) + "/" + std::to_string(total) + " sentences match"};
}

// ---------------------------------------------------------------- 9

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome checkpoint_round_trip(const Model &model, const std::vector<SegmentedExample> &data) {
  const auto dir = fs::temp_directory_path() / "mcdn_acceptance";
  fs::create_directories(dir);
  save_checkpoint(model, dir / "a.ckpt");
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(loaded, dir / "b.ckpt");
  const auto a = slurp(dir / "a.ckpt"), b = slurp(dir / "b.ckpt");
  const bool bytes = !a.empty() && a == b;
  const bool metrics = to_json(evaluate(model, data)) == to_json(evaluate(loaded, data));
  fs::remove_all(dir);
  return {bytes && metrics, std::to_string(a.size()) + " bytes" +
                                (bytes ? ", save-load-save identical" : ", bytes DIFFER") +
                                (metrics ? ", metrics identical" : ", metrics DIFFER")};
}

} // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char *name, const std::function<Outcome()> &fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception &e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "gradient check", gradients);
  report(2, "shape contract", shapes);
  report(3, "focal loss algebra", focal_algebra);
  report(4, "attention and layer norm", attention_and_norm);
  report(5, "relation reasoning symmetry", relation_symmetry);
  report(6, "metric oracles", metric_oracles);

  // The overfit model also feeds the checkpoint criterion.
  const auto scratch = make_marker_dataset(4, 1);
  Model trained(reduced_config(), build_vocab(scratch, nullptr), 1);
  std::vector<SegmentedExample> overfit_data;
  report(7, "overfit and determinism", [&] { return overfit_criterion(&trained, overfit_data); });
  try {
    std::printf("INFO  7 %-28s %s\n", "overfit diagnostic", overfit_diagnostic().c_str());
  } catch (const std::exception &e) {
    std::printf("INFO  7 %-28s threw: %s\n", "overfit diagnostic", e.what());
  }
  report(8, "golden segmentation", golden_segmentation);
  report(9, "checkpoint round trip", [&] {
    if (overfit_data.empty())
      overfit_data = make_marker_dataset(16, 1);
    return checkpoint_round_trip(trained, overfit_data);
  });

  const char *corpus = std::getenv("MCDN_ALTLEX_DIR");
  if (!corpus || !fs::exists(corpus))
    std::printf("SKIP 10 %-28s no corpus (set MCDN_ALTLEX_DIR)\n", "corpus results");
  else
    std::printf("SKIP 10 %-28s corpus run is manual: mcdn train on %s\n", "corpus results",
                corpus);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
