// SPDX-License-Identifier: Apache-2.0
#include "mcdn/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

namespace mcdn {

using nlohmann::json;

std::vector<std::size_t> ModelConfig::channels_per_window() const {
  std::vector<std::size_t> out(windows.size(), k / windows.size());
  for (std::size_t i = 0; i < k % windows.size(); ++i)
    ++out[i];
  return out;
}

std::size_t ModelConfig::max_window() const {
  return windows.empty() ? 0 : *std::max_element(windows.begin(), windows.end());
}

void Config::validate() const {
  auto require = [](bool ok, const std::string &what) {
    if (!ok)
      throw ConfigError("invalid config: " + what);
  };
  const auto &m = model;
  require(m.d > 0, "d must be positive");
  require(m.n_blocks > 0, "n_blocks must be positive");
  require(m.heads > 0 && m.d % m.heads == 0, "heads must divide d");
  require(m.ffn_mult > 0, "ffn_mult must be positive");
  require(!m.windows.empty(), "windows must be nonempty");
  require(std::all_of(m.windows.begin(), m.windows.end(), [](auto w) { return w > 0; }),
          "windows must be positive");
  require(m.k >= m.windows.size(), "k must give every window at least one channel");
  require(m.dg > 0, "dg must be positive");
  require(m.gru_layers > 0, "gru_layers must be positive");
  require(m.dropout >= 0.0 && m.dropout < 1.0, "dropout must lie in [0, 1)");
  require(m.max_len > 0, "max_len must be positive");
  require(m.ln_eps > 0.0, "ln_eps must be positive");
  require(loss.alpha > 0.0 && loss.alpha < 1.0, "alpha must lie in (0, 1)");
  require(loss.beta >= 0.0, "beta must be non-negative");
  require(loss.l2 >= 0.0, "l2 must be non-negative");
  require(loss.clamp > 0.0 && loss.clamp < 0.5, "clamp must lie in (0, 0.5)");
  require(train.lr > 0.0, "lr must be positive");
  require(train.batch > 0, "batch must be positive");
  require(train.epochs > 0, "epochs must be positive");
  require(train.patience >= 1, "patience must be at least 1");
  require(train.lr_decay > 0.0 && train.lr_decay <= 1.0, "lr_decay must lie in (0, 1]");
  require(train.clip_norm > 0.0, "clip_norm must be positive");
  require(train.runs > 0, "runs must be positive");
}

namespace {

const char *pooling_name(Pooling p) { return p == Pooling::mean ? "mean" : "max"; }
const char *positional_name(Positional p) {
  return p == Positional::learned ? "learned" : "sinusoidal";
}

struct Field {
  std::function<json(const Config &)> get;
  std::function<void(Config &, const json &)> set;
};

template <typename T> T as(const json &v, const std::string &key);

template <> double as<double>(const json &v, const std::string &key) {
  if (!v.is_number())
    throw ConfigError("config key \"" + key + "\" expects a number");
  return v.get<double>();
}

bool is_count(const json &v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

template <> std::size_t as<std::size_t>(const json &v, const std::string &key) {
  if (!is_count(v))
    throw ConfigError("config key \"" + key + "\" expects a non-negative integer");
  return v.get<std::size_t>();
}

template <> bool as<bool>(const json &v, const std::string &key) {
  if (!v.is_boolean())
    throw ConfigError("config key \"" + key + "\" expects true or false");
  return v.get<bool>();
}

template <typename T, typename Member> Field field(Member member, std::string key) {
  return {[member](const Config &c) {
            Config copy = c;
            return json(member(copy));
          },
          [member, key](Config &c, const json &v) { member(c) = as<T>(v, key); }};
}

const std::map<std::string, Field> &fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
#define MCDN_FIELD(T, key, expr)                                                               \
  t[key] = field<T>([](Config &c) -> T & { return c.expr; }, key)
    MCDN_FIELD(std::size_t, "d", model.d);
    MCDN_FIELD(std::size_t, "n_blocks", model.n_blocks);
    MCDN_FIELD(std::size_t, "heads", model.heads);
    MCDN_FIELD(std::size_t, "ffn_mult", model.ffn_mult);
    MCDN_FIELD(std::size_t, "k", model.k);
    MCDN_FIELD(std::size_t, "dg", model.dg);
    MCDN_FIELD(std::size_t, "gru_layers", model.gru_layers);
    MCDN_FIELD(double, "dropout", model.dropout);
    MCDN_FIELD(std::size_t, "max_len", model.max_len);
    MCDN_FIELD(double, "ln_eps", model.ln_eps);
    MCDN_FIELD(bool, "freeze_embeddings", model.freeze_embeddings);
    MCDN_FIELD(double, "alpha", loss.alpha);
    MCDN_FIELD(double, "beta", loss.beta);
    MCDN_FIELD(double, "l2", loss.l2);
    MCDN_FIELD(double, "clamp", loss.clamp);
    MCDN_FIELD(double, "lr", train.lr);
    MCDN_FIELD(std::size_t, "batch", train.batch);
    MCDN_FIELD(std::size_t, "epochs", train.epochs);
    MCDN_FIELD(std::size_t, "patience", train.patience);
    MCDN_FIELD(double, "lr_decay", train.lr_decay);
    MCDN_FIELD(double, "clip_norm", train.clip_norm);
    MCDN_FIELD(std::size_t, "runs", train.runs);
#undef MCDN_FIELD
    t["seed"] = {[](const Config &c) { return json(c.train.seed); },
                 [](Config &c, const json &v) {
                   if (!is_count(v))
                     throw ConfigError("config key \"seed\" expects a non-negative integer");
                   c.train.seed = v.get<std::uint64_t>();
                 }};
    t["windows"] = {[](const Config &c) { return json(c.model.windows); },
                    [](Config &c, const json &v) {
                      if (!v.is_array() || v.empty())
                        throw ConfigError("config key \"windows\" expects a nonempty array");
                      std::vector<std::size_t> w;
                      for (const auto &x : v)
                        w.push_back(as<std::size_t>(x, "windows"));
                      c.model.windows = std::move(w);
                    }};
    t["pooling"] = {[](const Config &c) { return json(pooling_name(c.model.pooling)); },
                    [](Config &c, const json &v) {
                      if (v == "mean")
                        c.model.pooling = Pooling::mean;
                      else if (v == "max")
                        c.model.pooling = Pooling::max;
                      else
                        throw ConfigError("config key \"pooling\" expects \"mean\" or \"max\"");
                    }};
    t["positional"] = {
        [](const Config &c) { return json(positional_name(c.model.positional)); },
        [](Config &c, const json &v) {
          if (v == "learned")
            c.model.positional = Positional::learned;
          else if (v == "sinusoidal")
            c.model.positional = Positional::sinusoidal;
          else
            throw ConfigError("config key \"positional\" expects \"learned\" or \"sinusoidal\"");
        }};
    return t;
  }();
  return table;
}

} // namespace

json to_json(const Config &config) {
  json out = json::object();
  for (const auto &[key, f] : fields())
    out[key] = f.get(config);
  return out;
}

void apply_json(Config &config, const json &doc) {
  if (!doc.is_object())
    throw ConfigError("config document must be a JSON object");
  for (const auto &[key, value] : doc.items()) {
    auto it = fields().find(key);
    if (it == fields().end())
      throw ConfigError("unknown config key \"" + key + "\"");
    it->second.set(config, value);
  }
}

Config load_config(const std::filesystem::path &path, const json &overrides) {
  return load_config(Config{}, path, overrides);
}

Config load_config(Config config, const std::filesystem::path &path, const json &overrides) {
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in)
      throw ConfigError("cannot open config " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      json doc;
      try {
        doc = json::parse(text);
      } catch (const json::parse_error &e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
      }
      apply_json(config, doc);
    }
  }
  if (!overrides.is_null())
    apply_json(config, overrides);
  config.validate();
  return config;
}

} // namespace mcdn
