#include "mnl_lab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace mnl_lab {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

const std::set<std::string> kTopKeys = {"environment", "policies", "seeds",
                                        "output_dir", "threads", "audit",
                                        "grid"};
const std::set<std::string> kEnvKeys = {
    "type",          "context",          "n_items",     "assortment_size",
    "dim",           "horizon",          "truth_hidden", "revenues",
    "enforce_unit_ball", "feature_file", "truth_checkpoint"};
const std::set<std::string> kPolicyKeys = {"name", "params"};
const std::set<std::string> kAuditKeys = {"enabled", "dims", "caps", "pairs"};
const std::set<std::string> kGridKeys = {"c_lambda", "c_beta", "seeds"};

const std::set<std::string> kOnlMnlParams = {
    "hidden",        "kappa",          "mu",
    "c_lambda",      "c_beta",         "beta_mode",
    "t0",            "refit_every",    "pilot_lr",
    "pilot_iterations", "pilot_restarts", "round_lr",
    "round_iterations", "projection_radius", "param_cap",
    "feature_cap",   "c_h",            "init_scale",
    "gram_audit_every"};
const std::set<std::string> kEpsParams = {"hidden", "epsilon0", "decay",
                                          "floor",  "lr",       "iterations",
                                          "init_scale"};
const std::set<std::string> kUcbParams = {"alpha", "ridge", "newton_steps",
                                          "refit_every"};
const std::set<std::string> kTsParams = {"scale", "ridge", "newton_steps",
                                         "refit_every"};

void validate_policy_params(const PolicySpec& spec) {
  const std::string where = "policies." + spec.name + ".params";
  if (spec.name == "onl-mnl")
    reject_unknown_keys(spec.params, kOnlMnlParams, where);
  else if (spec.name == "eps-greedy-mnl")
    reject_unknown_keys(spec.params, kEpsParams, where);
  else if (spec.name == "ucb-mnl")
    reject_unknown_keys(spec.params, kUcbParams, where);
  else if (spec.name == "ts-mnl")
    reject_unknown_keys(spec.params, kTsParams, where);
  else if (spec.name == "uniform" || spec.name == "oracle")
    reject_unknown_keys(spec.params, {}, where);
  else
    throw ConfigError("unknown policy '" + spec.name + "'");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + key + "' has the wrong type");
  }
}

}  // namespace

ExperimentConfig parse_config_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(doc, kTopKeys, "config");
  ExperimentConfig cfg;
  cfg.echo = doc;

  if (doc.contains("environment")) {
    const json& env = doc.at("environment");
    reject_unknown_keys(env, kEnvKeys, "environment");
    cfg.env_type = get_or<std::string>(env, "type", cfg.env_type);
    if (cfg.env_type != "realizable" && cfg.env_type != "misspecified" &&
        cfg.env_type != "feature_file")
      throw ConfigError("environment.type must be realizable, misspecified "
                        "or feature_file");
    const std::string ctx = get_or<std::string>(env, "context", "gaussian");
    if (ctx == "gaussian")
      cfg.context_source = ContextSource::gaussian;
    else if (ctx == "uniform_box")
      cfg.context_source = ContextSource::uniform_box;
    else
      throw ConfigError("environment.context must be gaussian or uniform_box");
    if (cfg.env_type == "feature_file")
      cfg.context_source = ContextSource::feature_file;
    cfg.n_items = get_or<int>(env, "n_items", cfg.n_items);
    cfg.capacity = get_or<int>(env, "assortment_size", cfg.capacity);
    cfg.dim = get_or<int>(env, "dim", cfg.dim);
    cfg.horizon = get_or<int>(env, "horizon", cfg.horizon);
    cfg.truth_hidden = get_or<int>(env, "truth_hidden", cfg.truth_hidden);
    cfg.enforce_unit_ball =
        get_or<bool>(env, "enforce_unit_ball", cfg.enforce_unit_ball);
    cfg.feature_file = get_or<std::string>(env, "feature_file", "");
    cfg.truth_checkpoint = get_or<std::string>(env, "truth_checkpoint", "");
    if (env.contains("revenues")) {
      const json& rev = env.at("revenues");
      if (rev.is_string()) {
        cfg.revenues_mode = rev.get<std::string>();
        if (cfg.revenues_mode != "uniform")
          throw ConfigError("environment.revenues string must be 'uniform'");
      } else if (rev.is_array()) {
        cfg.revenues_mode = "array";
        cfg.revenues_array = rev.get<Vec>();
      } else {
        throw ConfigError("environment.revenues must be 'uniform' or array");
      }
    }
    if (cfg.n_items < 1 || cfg.capacity < 1 || cfg.dim < 1 ||
        cfg.horizon < 1)
      throw ConfigError("environment sizes must be positive");
    if (cfg.capacity > cfg.n_items)
      throw ConfigError("assortment_size must not exceed n_items");
    if (cfg.revenues_mode == "array" &&
        static_cast<int>(cfg.revenues_array.size()) != cfg.n_items)
      throw ConfigError("revenues array must have n_items entries");
    if (cfg.env_type == "feature_file" && cfg.feature_file.empty())
      throw ConfigError("feature_file environments need environment.feature_file");
    if (cfg.env_type == "feature_file" && cfg.truth_checkpoint.empty())
      throw ConfigError(
          "feature_file environments need environment.truth_checkpoint");
  }

  if (!doc.contains("policies") || !doc.at("policies").is_array() ||
      doc.at("policies").empty())
    throw ConfigError("config needs a non-empty policies array");
  for (const json& p : doc.at("policies")) {
    reject_unknown_keys(p, kPolicyKeys, "policies[]");
    PolicySpec spec;
    spec.name = p.at("name").get<std::string>();
    spec.params = p.contains("params") ? p.at("params") : json::object();
    validate_policy_params(spec);
    cfg.policies.push_back(std::move(spec));
  }

  if (doc.contains("seeds")) {
    cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  } else {
    cfg.seeds.resize(30);
    for (int i = 0; i < 30; ++i) cfg.seeds[i] = i;
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");

  cfg.output_dir = get_or<std::string>(doc, "output_dir", cfg.output_dir);
  cfg.threads = get_or<int>(doc, "threads", 0);

  if (doc.contains("audit")) {
    const json& a = doc.at("audit");
    reject_unknown_keys(a, kAuditKeys, "audit");
    cfg.audit.enabled = get_or<bool>(a, "enabled", true);
    if (a.contains("dims")) cfg.audit.dims = a.at("dims").get<std::vector<int>>();
    if (a.contains("caps")) cfg.audit.caps = a.at("caps").get<Vec>();
    cfg.audit.pairs = get_or<int>(a, "pairs", cfg.audit.pairs);
  }
  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    reject_unknown_keys(g, kGridKeys, "grid");
    if (g.contains("c_lambda")) cfg.grid.c_lambda = g.at("c_lambda").get<Vec>();
    if (g.contains("c_beta")) cfg.grid.c_beta = g.at("c_beta").get<Vec>();
    if (g.contains("seeds"))
      cfg.grid.seeds = g.at("seeds").get<std::vector<std::uint64_t>>();
  }
  return cfg;
}

// ---- TOML-lite ----

namespace {

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

json parse_toml_scalar(const std::string& raw) {
  const std::string v = strip(raw);
  if (v.empty()) throw ConfigError("empty value in config");
  if (v.front() == '"' && v.back() == '"' && v.size() >= 2)
    return v.substr(1, v.size() - 2);
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[') {
    if (v.back() != ']') throw ConfigError("unterminated array: " + v);
    json arr = json::array();
    std::string body = v.substr(1, v.size() - 2);
    std::stringstream ss(body);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string c = strip(cell);
      if (!c.empty()) arr.push_back(parse_toml_scalar(c));
    }
    return arr;
  }
  try {
    std::size_t used = 0;
    if (v.find_first_of(".eE") == std::string::npos) {
      const long long i = std::stoll(v, &used);
      if (used == v.size()) return i;
    }
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("cannot parse config value: " + v);
}

}  // namespace

json toml_lite_to_json(const std::string& text) {
  json root = json::object();
  json* section = &root;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      const bool array_table = line.rfind("[[", 0) == 0;
      const std::size_t close = line.find(array_table ? "]]" : "]");
      if (close == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) +
                          ": unterminated section header");
      std::string path = line.substr(array_table ? 2 : 1,
                                     close - (array_table ? 2 : 1));
      json* node = &root;
      std::stringstream ps(path);
      std::string part;
      std::vector<std::string> parts;
      while (std::getline(ps, part, '.')) parts.push_back(strip(part));
      for (std::size_t i = 0; i < parts.size(); ++i) {
        const bool last = i + 1 == parts.size();
        if (node->is_array()) {
          // Numeric path parts index into arrays of tables.
          const std::size_t idx = std::stoul(parts[i]);
          if (idx >= node->size())
            throw ConfigError("line " + std::to_string(lineno) +
                              ": array index out of range in section header");
          node = &(*node)[idx];
          continue;
        }
        if (last && array_table) {
          if (!node->contains(parts[i])) (*node)[parts[i]] = json::array();
          (*node)[parts[i]].push_back(json::object());
          node = &(*node)[parts[i]].back();
        } else {
          if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
          node = &(*node)[parts[i]];
        }
      }
      section = node;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    (*section)[key] = parse_toml_scalar(line.substr(eq + 1));
  }
  return root;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  // Sniff: a JSON document starts with '{'.
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    return parse_config_json(doc);
  }
  return parse_config_json(toml_lite_to_json(text));
}

void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects key=value, got: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  json* node = &doc;
  std::stringstream ps(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ps, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("--set key is empty");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    // Numeric path parts index arrays.
    if (node->is_array()) {
      node = &(*node)[std::stoul(parts[i])];
    } else {
      if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
      node = &(*node)[parts[i]];
    }
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;  // bare strings stay strings
  }
  if (node->is_array())
    (*node)[std::stoul(parts.back())] = parsed;
  else
    (*node)[parts.back()] = parsed;
}

// ---- factories ----

Environment make_environment(const ExperimentConfig& cfg, std::uint64_t seed) {
  Environment env;
  if (cfg.env_type == "realizable") {
    env = make_realizable_env(cfg.dim, cfg.truth_hidden, seed, cfg.n_items,
                              cfg.capacity, cfg.horizon, cfg.context_source);
  } else if (cfg.env_type == "misspecified") {
    env = make_misspecified_env(cfg.dim, seed, cfg.n_items, cfg.capacity,
                                cfg.horizon, cfg.context_source);
  } else {
    const FeatureTable table = load_feature_file(cfg.feature_file);
    if (table.dim != cfg.dim)
      throw DimensionMismatch("feature file dim " + std::to_string(table.dim) +
                              " != environment dim " + std::to_string(cfg.dim));
    env.source = ContextSource::feature_file;
    env.dim = cfg.dim;
    env.n_items = cfg.n_items;
    env.capacity = cfg.capacity;
    env.horizon = cfg.horizon;
    env.seed = seed;
    env.feature_rows = table.rows;
    std::ifstream in(cfg.truth_checkpoint);
    if (!in) throw IoError("cannot open " + cfg.truth_checkpoint);
    json ck;
    in >> ck;
    const std::string model_name = ck.at("model").at("type").get<std::string>();
    const int hidden = ck.at("model").value("hidden", 1);
    env.truth_model = make_model(model_name, cfg.dim, hidden);
    env.truth_params = ck.at("params").get<Vec>();
    if (static_cast<int>(env.truth_params.size()) !=
        env.truth_model->param_dim())
      throw DimensionMismatch("truth checkpoint params length mismatch");
    env.revenues = RevenueVector::uniform(cfg.n_items);
  }
  env.enforce_unit_ball = cfg.enforce_unit_ball;
  if (cfg.revenues_mode == "array")
    env.revenues = RevenueVector(cfg.revenues_array);
  else
    env.revenues = RevenueVector::uniform(cfg.n_items);
  return env;
}

namespace {

OptimizerConfig optimizer_from(const json& p, const std::string& lr_key,
                               const std::string& iter_key, double lr_def,
                               int iter_def) {
  OptimizerConfig opt;
  opt.learning_rate = get_or<double>(p, lr_key, lr_def);
  opt.iterations = get_or<int>(p, iter_key, iter_def);
  return opt;
}

}  // namespace

std::unique_ptr<Policy> make_policy(const PolicySpec& spec,
                                    const ExperimentConfig& cfg,
                                    const Environment& env, Rng init_rng) {
  const json& p = spec.params;
  if (spec.name == "onl-mnl") {
    OnlMnlConfig c;
    c.hidden = get_or<int>(p, "hidden", 3);
    c.kappa = get_or<double>(p, "kappa", c.kappa);
    c.mu = get_or<double>(p, "mu", c.mu);
    c.c_lambda = get_or<double>(p, "c_lambda", c.c_lambda);
    c.c_beta = get_or<double>(p, "c_beta", c.c_beta);
    const std::string mode = get_or<std::string>(p, "beta_mode", "linear");
    if (mode == "linear")
      c.beta_mode = Schedule::BetaMode::linear_in_t;
    else if (mode == "constant")
      c.beta_mode = Schedule::BetaMode::constant;
    else
      throw ConfigError("beta_mode must be linear or constant");
    c.t0 = get_or<int>(p, "t0", -1);
    c.refit_every = get_or<int>(p, "refit_every", 1);
    c.pilot_opt = optimizer_from(p, "pilot_lr", "pilot_iterations", 1e-4, 2000);
    c.pilot_opt.restarts = get_or<int>(p, "pilot_restarts", 1);
    c.round_opt = optimizer_from(p, "round_lr", "round_iterations", 1e-4, 50);
    c.round_opt.per_round_iterations = c.round_opt.iterations;
    const double radius = get_or<double>(p, "projection_radius", -1.0);
    if (radius > 0.0) {
      c.pilot_opt.projection_radius = radius;
      c.round_opt.projection_radius = radius;
    }
    c.param_cap = get_or<double>(p, "param_cap", c.param_cap);
    c.feature_cap = get_or<double>(p, "feature_cap", c.feature_cap);
    c.c_h_override = get_or<double>(p, "c_h", -1.0);
    c.init_scale = get_or<double>(p, "init_scale", c.init_scale);
    c.gram_audit_every = get_or<int>(p, "gram_audit_every", 100);
    auto model = std::make_shared<TwoLayerSigmoidNet>(env.dim, c.hidden);
    return std::make_unique<OnlMnlPolicy>(std::move(model), c, env.horizon,
                                          env.capacity, init_rng);
  }
  if (spec.name == "eps-greedy-mnl") {
    EpsGreedyConfig c;
    c.hidden = get_or<int>(p, "hidden", 3);
    c.epsilon0 = get_or<double>(p, "epsilon0", c.epsilon0);
    c.decay = get_or<double>(p, "decay", c.decay);
    c.floor = get_or<double>(p, "floor", c.floor);
    c.opt = optimizer_from(p, "lr", "iterations", 1e-4, 2000);
    c.init_scale = get_or<double>(p, "init_scale", c.init_scale);
    auto model = std::make_shared<TwoLayerSigmoidNet>(env.dim, c.hidden);
    return std::make_unique<EpsGreedyPolicy>(std::move(model), c,
                                             env.capacity, init_rng);
  }
  if (spec.name == "ucb-mnl" || spec.name == "ts-mnl") {
    LinearBaselineConfig c;
    c.alpha = get_or<double>(p, "alpha", c.alpha);
    c.ts_scale = get_or<double>(p, "scale", c.ts_scale);
    c.ridge = get_or<double>(p, "ridge", c.ridge);
    c.newton_steps = get_or<int>(p, "newton_steps", c.newton_steps);
    c.refit_every = get_or<int>(p, "refit_every", c.refit_every);
    const auto mode = spec.name == "ucb-mnl" ? LinearMnlPolicy::Mode::ucb
                                             : LinearMnlPolicy::Mode::thompson;
    return std::make_unique<LinearMnlPolicy>(mode, env.dim, c, env.capacity);
  }
  if (spec.name == "uniform")
    return std::make_unique<UniformPolicy>(env.capacity);
  if (spec.name == "oracle")
    return std::make_unique<OraclePolicy>(env.truth_model, env.truth_params,
                                          env.capacity);
  throw ConfigError("unknown policy '" + spec.name + "'");
}

int resolve_threads(int configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("MNL_LAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace mnl_lab
