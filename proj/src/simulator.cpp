#include "mnl_lab/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mnl_lab/assortment.hpp"
#include "mnl_lab/kernels.hpp"
#include "mnl_lab/mnl.hpp"

namespace mnl_lab {

Environment make_realizable_env(int dim, int m_hidden, std::uint64_t seed,
                                int n_items, int capacity, int horizon,
                                ContextSource source) {
  Environment env;
  env.source = source;
  env.dim = dim;
  env.n_items = n_items;
  env.capacity = capacity;
  env.horizon = horizon;
  env.seed = seed;
  env.truth_model = std::make_shared<TwoLayerSigmoidNet>(dim, m_hidden);
  Rng truth_rng = Rng(seed).stream("truth");
  env.truth_params.resize(env.truth_model->param_dim());
  for (double& v : env.truth_params) v = truth_rng.uniform(-1.0, 1.0);
  env.revenues = RevenueVector::uniform(n_items);
  return env;
}

Environment make_misspecified_env(int dim, std::uint64_t seed, int n_items,
                                  int capacity, int horizon,
                                  ContextSource source, double truth_scale) {
  Environment env;
  env.source = source;
  env.dim = dim;
  env.n_items = n_items;
  env.capacity = capacity;
  env.horizon = horizon;
  env.seed = seed;
  env.truth_model = std::make_shared<CosineMixtureUtility>(dim);
  Rng truth_rng = Rng(seed).stream("truth");
  env.truth_params.resize(dim);
  for (double& v : env.truth_params) v = truth_rng.uniform(-1.0, 1.0);
  // w* is a direction; normalize to truth_scale so the projection spread
  // (and with it the number of cosine periods the contexts sweep) is the
  // same for every seed.
  const double norm =
      std::sqrt(kern::sumsq(env.truth_params.data(), env.truth_params.size()));
  if (norm > 0.0)
    for (double& v : env.truth_params) v *= truth_scale / norm;
  env.revenues = RevenueVector::uniform(n_items);
  return env;
}

FeatureTable load_feature_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file " + path);
  std::string line;
  if (!std::getline(in, line))
    throw MalformedCsv(path + ": missing header row");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header[0] != "id")
    throw MalformedCsv(path + ": header must start with 'id'");
  bool has_label = !header.empty() && header.back() == "label";
  const int d = static_cast<int>(header.size()) - 1 - (has_label ? 1 : 0);
  if (d < 1) throw MalformedCsv(path + ": no feature columns");
  for (int j = 0; j < d; ++j) {
    const std::string expect = "f" + std::to_string(j);
    if (header[j + 1] != expect)
      throw MalformedCsv(path + ": header column " + std::to_string(j + 1) +
                         " is '" + header[j + 1] + "', expected '" + expect +
                         "'");
  }
  FeatureTable table;
  table.dim = d;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const std::size_t expected = header.size();
    if (cells.size() != expected && cells.size() != expected - (has_label ? 1 : 0))
      throw MalformedCsv(path + ": row " + std::to_string(row) + " has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(expected));
    Vec feats(d);
    for (int j = 0; j < d; ++j) {
      try {
        feats[j] = std::stod(cells[j + 1]);
      } catch (const std::exception&) {
        throw MalformedCsv(path + ": row " + std::to_string(row) +
                           " column " + std::to_string(j + 1) +
                           " is not a number");
      }
    }
    table.rows.push_back(std::move(feats));
  }
  if (table.rows.empty()) throw MalformedCsv(path + ": no data rows");
  return table;
}

ContextSet draw_context(const Environment& env, int round, Rng& rng) {
  const int n = env.n_items;
  const int d = env.dim;
  Vec flat(static_cast<std::size_t>(n) * d);
  switch (env.source) {
    case ContextSource::gaussian:
      for (double& v : flat) v = rng.normal();
      break;
    case ContextSource::uniform_box:
      for (double& v : flat) v = rng.uniform(-3.0, 3.0);
      break;
    case ContextSource::feature_file: {
      const int pool = static_cast<int>(env.feature_rows.size());
      if (pool < n)
        throw ConfigMismatch("feature pool smaller than n_items");
      if (static_cast<int>(env.feature_rows[0].size()) != d)
        throw DimensionMismatch("feature file dim != environment dim");
      // Sample N distinct rows (Floyd), then place them in draw order.
      std::vector<int> picked;
      picked.reserve(n);
      for (int j = pool - n; j < pool; ++j) {
        const int t = static_cast<int>(rng.uniform_int(j + 1));
        if (std::find(picked.begin(), picked.end(), t) == picked.end())
          picked.push_back(t);
        else
          picked.push_back(j);
      }
      // Shuffle so row order is not index-sorted.
      for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_int(i + 1));
        std::swap(picked[i], picked[j]);
      }
      for (int i = 0; i < n; ++i)
        std::copy(env.feature_rows[picked[i]].begin(),
                  env.feature_rows[picked[i]].end(),
                  flat.begin() + static_cast<std::size_t>(i) * d);
      break;
    }
  }
  return ContextSet(n, d, std::move(flat), round, env.enforce_unit_ball);
}

double RunTrace::cum_regret_at(int round) const {
  for (const auto& r : rounds)
    if (r.round == round) return r.regret_cum;
  throw IndexOutOfRange("round not in trace");
}

RunTrace run_episode(const Environment& env, Policy& policy,
                     std::uint64_t seed) {
  if (policy.capacity() != env.capacity)
    throw ConfigMismatch("policy capacity != environment capacity");
  if (!env.truth_model) throw ConfigMismatch("environment lacks a truth");

  const auto start = std::chrono::steady_clock::now();
  Rng root(seed);
  Rng ctx_rng = root.stream("contexts");
  Rng choice_rng = root.stream("choices");
  Rng policy_rng = root.stream("policy");

  RunTrace trace;
  trace.policy_name = policy.name();
  trace.seed = seed;
  trace.rounds.reserve(env.horizon);

  Vec truth_all(env.n_items);
  double cum = 0.0;
  for (int t = 1; t <= env.horizon; ++t) {
    const ContextSet ctx = draw_context(env, t, ctx_rng);
    const Assortment offered = policy.choose(ctx, env.revenues, policy_rng);

    for (int i = 0; i < env.n_items; ++i)
      truth_all[i] = env.true_utility(ctx.item(i));
    const double oracle_value =
        oracle_optimal_reward(truth_all, env.revenues, env.capacity);

    const int k = offered.size();
    Vec u_offered(k), r_offered(k);
    for (int i = 0; i < k; ++i) {
      u_offered[i] = truth_all[offered.items()[i]];
      r_offered[i] = env.revenues[offered.items()[i]];
    }
    const auto dist = choice_probabilities(u_offered);
    const auto pick_pos = sample_choice(dist, choice_rng);
    std::optional<int> chosen_item;
    if (pick_pos.has_value()) chosen_item = offered.items()[*pick_pos];

    const ChoiceRecord rec(ctx, offered, chosen_item);
    policy.update(rec);

    const double played_value = expected_reward(u_offered, r_offered);
    const double inst = oracle_value - played_value;
    cum += inst;

    const DecisionDiag& diag = policy.last_diag();
    double optimism = std::numeric_limits<double>::quiet_NaN();
    if (!diag.offered_scores.empty()) {
      int count = 0;
      for (int i = 0; i < k; ++i)
        if (diag.offered_scores[i] >= u_offered[i] - 1e-12) ++count;
      optimism = double(count) / double(k);
    }
    trace.rounds.push_back({t, inst, cum, offered.items(),
                            chosen_item.value_or(-1), diag.beta, optimism,
                            diag.max_grad_norm, diag.explored});
  }
  if (const auto* log = policy.gram_log()) trace.gram = *log;
  if (const auto* onl = dynamic_cast<const OnlMnlPolicy*>(&policy)) {
    trace.lambda = onl->schedule().lambda();
    trace.d_w = onl->schedule().d_w;
    trace.t0 = onl->schedule().t0;
  }
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return trace;
}

}  // namespace mnl_lab
