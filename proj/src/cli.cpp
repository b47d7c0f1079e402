// SPDX-License-Identifier: Apache-2.0
#include "mcdn/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

#include "mcdn/checkpoint.hpp"
#include "mcdn/diagnostics.hpp"
#include "mcdn/trainer.hpp"

namespace mcdn::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// --config, --seed and the per-field overrides shared by several subcommands.
struct ConfigOptions {
  struct Flag {
    std::string name;
    std::string key;
    bool integer = false;
    double real = 0.0;
    std::size_t count = 0;
    CLI::Option *option = nullptr;
  };

  std::string path;
  std::uint64_t seed = 0;
  CLI::Option *seed_option = nullptr;
  std::vector<Flag> flags{
      {"--lr", "lr", false},         {"--batch", "batch", true},
      {"--epochs", "epochs", true},  {"--d", "d", true},
      {"--n-blocks", "n_blocks", true}, {"--heads", "heads", true},
      {"--k", "k", true},            {"--dg", "dg", true},
      {"--alpha", "alpha", false},   {"--beta", "beta", false},
      {"--dropout", "dropout", false}, {"--l2", "l2", false},
      {"--max-len", "max_len", true}, {"--clip-norm", "clip_norm", false},
  };

  void attach(CLI::App *app) {
    app->add_option("--config", path, "Flat JSON config file");
    seed_option = app->add_option("--seed", seed, "Random seed");
    for (auto &f : flags)
      f.option = f.integer ? app->add_option(f.name, f.count, "Override " + f.key)
                           : app->add_option(f.name, f.real, "Override " + f.key);
  }

  bool overridden(const std::string &key) const {
    for (const auto &f : flags)
      if (f.key == key)
        return f.option->count() > 0;
    return false;
  }

  json overrides() const {
    json j = json::object();
    for (const auto &f : flags)
      if (f.option->count() > 0)
        j[f.key] = f.integer ? json(f.count) : json(f.real);
    if (seed_option->count() > 0)
      j["seed"] = seed;
    return j;
  }

  Config resolve(Config base = {}) const { return load_config(std::move(base), path, overrides()); }
};

json header(const Config &config) {
  return json{{"config", to_json(config)}, {"seed", config.train.seed}};
}

// Writes to `path`, or to `fallback` when the path is empty.
class Sink {
public:
  Sink(const std::string &path, std::ostream &fallback) {
    if (path.empty()) {
      stream_ = &fallback;
      return;
    }
    const fs::path p(path);
    if (p.has_parent_path())
      fs::create_directories(p.parent_path());
    file_ = std::make_unique<std::ofstream>(p);
    if (!*file_)
      throw std::runtime_error("cannot write " + path);
    stream_ = file_.get();
  }
  std::ostream &operator*() { return *stream_; }

private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream *stream_ = nullptr;
};

// Runs a loader, prefixing data errors with the file they came from.
template <typename F> auto from_file(const std::string &path, F &&load) {
  try {
    return load();
  } catch (const DataError &e) {
    throw DataError(e.kind(), 0, path + ": " + e.what());
  }
}

AltLexLexicon load_lexicon(const std::string &path) {
  if (path.empty())
    return AltLexLexicon{};
  return from_file(path, [&] { return AltLexLexicon::load(path); });
}

std::vector<SegmentedExample> load_examples(const std::string &path, const AltLexLexicon &lexicon,
                                            bool require_label) {
  return from_file(path, [&] {
    std::vector<SegmentedExample> out;
    for (const auto &raw : load_jsonl(path, require_label))
      out.push_back(prepare_example(raw, lexicon));
    return out;
  });
}

std::vector<std::string> read_lines(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw DataError(DataError::Kind::io, 0, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos)
      lines.push_back(line);
  }
  return lines;
}

json span_json(TokenRange r) { return json::array({r.begin, r.end}); }

std::string join(const Tokens &tokens, TokenRange r) {
  std::string s;
  for (std::size_t i = r.begin; i < r.end; ++i) {
    if (i > r.begin)
      s += ' ';
    s += tokens[i];
  }
  return s;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  ConfigOptions config;
  std::string train, valid, test, lexicon, embeddings, output;
  std::size_t runs = 0;
  CLI::Option *runs_option = nullptr;
};

double mean_of(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v)
    s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double> &v) {
  if (v.size() < 2)
    return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v)
    s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int run_train(const TrainArgs &args, std::ostream &out, std::ostream &err) {
  auto overrides = args.config.overrides();
  if (args.runs_option->count() > 0)
    overrides["runs"] = args.runs;
  Config cfg = load_config(Config{}, args.config.path, overrides);

  std::optional<WordVectors> vectors;
  if (!args.embeddings.empty()) {
    vectors = from_file(args.embeddings, [&] { return load_word2vec_text(args.embeddings); });
    if (args.config.overridden("d") && cfg.model.d != vectors->dim)
      throw ConfigError("--d " + std::to_string(cfg.model.d) +
                        " conflicts with the embedding dimension " +
                        std::to_string(vectors->dim));
    cfg.model.d = vectors->dim;
    cfg.validate();
  }

  const auto lexicon = load_lexicon(args.lexicon);
  const auto train_set = load_examples(args.train, lexicon, true);
  const auto valid_set = load_examples(args.valid, lexicon, true);
  std::vector<SegmentedExample> test_set;
  if (!args.test.empty())
    test_set = load_examples(args.test, lexicon, true);

  std::set<std::string> embedded;
  if (vectors)
    embedded.insert(vectors->tokens.begin(), vectors->tokens.end());
  const auto vocab = build_vocab(train_set, vectors ? &embedded : nullptr);

  const fs::path dir(args.output);
  fs::create_directories(dir);
  json summary = header(cfg);
  summary["vocabulary_size"] = vocab.size();
  summary["runs"] = json::array();
  std::vector<double> test_f1;

  for (std::size_t r = 0; r < cfg.train.runs; ++r) {
    Config run_cfg = cfg;
    run_cfg.train.seed = cfg.train.seed + r;
    const std::string suffix = cfg.train.runs == 1 ? "" : "_run" + std::to_string(r + 1);
    Model model(run_cfg, vocab, run_cfg.train.seed, vectors ? &*vectors : nullptr);

    std::ofstream log(dir / ("epochs" + suffix + ".jsonl"));
    log << header(run_cfg).dump() << '\n';
    const auto result = train(model, train_set, valid_set, &log, [&](const EpochRecord &e) {
      err << "run " << r + 1 << " epoch " << e.epoch << " lr " << e.lr << " loss "
          << e.train_loss << " valid F1 " << e.valid.f1 << '\n';
    });
    const auto ckpt = dir / ("model" + suffix + ".ckpt");
    save_checkpoint(model, ckpt);

    json entry{{"seed", run_cfg.train.seed},
               {"best_epoch", result.best_epoch},
               {"best_valid_f1", result.best_f1},
               {"checkpoint", ckpt.string()}};
    if (!test_set.empty()) {
      const auto metrics = evaluate(model, test_set, run_cfg.train.batch);
      entry["test"] = to_json(metrics);
      test_f1.push_back(metrics.f1);
    }
    summary["runs"].push_back(entry);
  }
  if (!test_f1.empty()) {
    summary["test_f1_mean"] = mean_of(test_f1);
    summary["test_f1_std"] = std_of(test_f1);
  }
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  out << summary.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- eval / predict

struct ModelArgs {
  std::string model, data, input, lexicon, output;
};

int run_eval(const ModelArgs &args, std::ostream &out) {
  const auto model = load_checkpoint(args.model);
  const auto data = load_examples(args.data, load_lexicon(args.lexicon), true);
  const auto metrics = evaluate(model, data, model.config().train.batch);
  json report = header(model.config());
  report["data"] = args.data;
  report["examples"] = data.size();
  report["metrics"] = to_json(metrics);
  Sink sink(args.output, out);
  *sink << report.dump(2) << '\n';
  return kOk;
}

int run_predict(const ModelArgs &args, std::ostream &out) {
  const auto model = load_checkpoint(args.model);
  const auto lexicon = load_lexicon(args.lexicon);
  std::vector<SegmentedExample> examples;
  std::vector<std::string> sentences = read_lines(args.input);
  for (const auto &s : sentences)
    examples.push_back(prepare_example({s, std::nullopt, std::nullopt}, lexicon));
  const auto probs = model.predict(examples, model.config().train.batch);
  Sink sink(args.output, out);
  *sink << header(model.config()).dump() << '\n';
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto &ex = examples[i];
    json row{{"sentence", sentences[i]},
             {"altlex", ex.no_altlex ? json(nullptr) : json(join(ex.tokens, ex.spans.altlex))},
             {"altlex_span", span_json(ex.spans.altlex)},
             {"probability", probs[i][kCausalClass]},
             {"label", predict_label(probs[i])},
             {"no_altlex", ex.no_altlex}};
    *sink << row.dump() << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- segment

struct SegmentArgs {
  ConfigOptions config;
  std::string input, data, lexicon, output;
};

int run_segment(const SegmentArgs &args, std::ostream &out) {
  const Config cfg = args.config.resolve();
  if (args.input.empty() == args.data.empty())
    throw UsageError("segment needs exactly one of --input or --data");
  const auto lexicon = load_lexicon(args.lexicon);
  std::vector<RawExample> raws;
  if (!args.input.empty())
    for (auto &s : read_lines(args.input))
      raws.push_back({std::move(s), std::nullopt, std::nullopt});
  else
    raws = from_file(args.data, [&] { return load_jsonl(args.data, false); });
  Sink sink(args.output, out);
  *sink << header(cfg).dump() << '\n';
  for (const auto &raw : raws) {
    const auto ex = prepare_example(raw, lexicon);
    json row{{"sentence", raw.sentence},
             {"tokens", ex.tokens},
             {"before", span_json(ex.spans.before)},
             {"altlex", span_json(ex.spans.altlex)},
             {"after", span_json(ex.spans.after)},
             {"before_text", join(ex.tokens, ex.spans.before)},
             {"altlex_text", join(ex.tokens, ex.spans.altlex)},
             {"after_text", join(ex.tokens, ex.spans.after)},
             {"no_altlex", ex.no_altlex}};
    if (raw.label)
      row["label"] = *raw.label;
    *sink << row.dump() << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  ConfigOptions config;
  double tolerance = 1e-3;
  double eps = 1e-4;
  std::string output;
};

int run_gradcheck(const GradcheckArgs &args, std::ostream &out) {
  Config base = reduced_config();
  base.train.seed = 1;
  const Config cfg = args.config.resolve(base);
  const auto report = check_model_gradients(cfg, cfg.train.seed, args.eps);
  json j = header(cfg);
  j["eps"] = args.eps;
  j["tolerance"] = args.tolerance;
  j["max_relative_error"] = report.worst;
  j["seconds"] = report.seconds;
  j["passed"] = report.passed(args.tolerance);
  j["parameters"] = json::array();
  for (const auto &p : report.params)
    j["parameters"].push_back({{"name", p.name},
                               {"size", p.size},
                               {"relative_error", p.relative},
                               {"grad_norm", p.grad_norm}});
  if (!args.output.empty()) {
    Sink sink(args.output, out);
    *sink << j.dump(2) << '\n';
  }
  for (const auto &p : report.params)
    out << std::left << std::setw(28) << p.name << std::right << std::setw(8) << p.size
        << "  rel " << std::scientific << std::setprecision(3) << p.relative
        << std::defaultfloat << '\n';
  out << "max relative error " << std::scientific << std::setprecision(3) << report.worst
      << std::defaultfloat << " (tolerance " << args.tolerance << ", " << std::fixed
      << std::setprecision(1) << report.seconds << " s)" << std::defaultfloat << '\n';
  return report.passed(args.tolerance) ? kOk : kGradcheckFailed;
}

} // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Multi-level causality detection: train, evaluate and inspect models", "mcdn"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto *train_cmd = app.add_subcommand("train", "Fit a model and write checkpoint, epoch log and summary");
  train_cmd->add_option("--train", train_args.train, "Training JSONL")->required();
  train_cmd->add_option("--valid", train_args.valid, "Validation JSONL")->required();
  train_cmd->add_option("--test", train_args.test, "Test JSONL, evaluated with the best model");
  train_cmd->add_option("--lexicon", train_args.lexicon, "AltLex phrase list, one per line");
  train_cmd->add_option("--embeddings", train_args.embeddings, "word2vec text vectors");
  train_cmd->add_option("--output", train_args.output, "Output directory")->required();
  train_args.runs_option = train_cmd->add_option("--runs", train_args.runs, "Repeated runs with seeds seed, seed+1, ...");
  train_args.config.attach(train_cmd);

  ModelArgs eval_args;
  auto *eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on labelled JSONL");
  eval_cmd->add_option("--model", eval_args.model, "Checkpoint")->required();
  eval_cmd->add_option("--data", eval_args.data, "Labelled JSONL")->required();
  eval_cmd->add_option("--lexicon", eval_args.lexicon, "AltLex phrase list");
  eval_cmd->add_option("--output", eval_args.output, "Metrics JSON (default stdout)");

  ModelArgs predict_args;
  auto *predict_cmd = app.add_subcommand("predict", "Classify plain-text sentences, one per line");
  predict_cmd->add_option("--model", predict_args.model, "Checkpoint")->required();
  predict_cmd->add_option("--input", predict_args.input, "Plain text, one sentence per line")->required();
  predict_cmd->add_option("--lexicon", predict_args.lexicon, "AltLex phrase list");
  predict_cmd->add_option("--output", predict_args.output, "JSONL output (default stdout)");

  SegmentArgs segment_args;
  auto *segment_cmd = app.add_subcommand("segment", "Split sentences into BL / L / AL spans");
  segment_cmd->add_option("--input", segment_args.input, "Plain text, one sentence per line");
  segment_cmd->add_option("--data", segment_args.data, "JSONL records");
  segment_cmd->add_option("--lexicon", segment_args.lexicon, "AltLex phrase list")->required();
  segment_cmd->add_option("--output", segment_args.output, "JSONL output (default stdout)");
  segment_args.config.attach(segment_cmd);

  GradcheckArgs gradcheck_args;
  auto *gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter gradient");
  gradcheck_cmd->add_option("--tolerance", gradcheck_args.tolerance, "Maximum relative error");
  gradcheck_cmd->add_option("--eps", gradcheck_args.eps, "Central-difference step");
  gradcheck_cmd->add_option("--output", gradcheck_args.output, "Report JSON");
  gradcheck_args.config.attach(gradcheck_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    app.exit(e, err, err);
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.back()->help());
    return kUsage;
  }

  try {
    if (*train_cmd)
      return run_train(train_args, out, err);
    if (*eval_cmd)
      return run_eval(eval_args, out);
    if (*predict_cmd)
      return run_predict(predict_args, out);
    if (*segment_cmd)
      return run_segment(segment_args, out);
    return run_gradcheck(gradcheck_args, out);
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError &e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const CheckpointError &e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kCheckpointError;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

} // namespace mcdn::cli
