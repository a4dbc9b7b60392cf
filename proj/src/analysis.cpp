#include "mnl_lab/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "mnl_lab/kernels.hpp"
#include "mnl_lab/mnl.hpp"

namespace mnl_lab {

namespace {

int grid_resolution_for(int dim) {
  switch (dim) {
    case 1: return 2001;
    case 2: return 201;
    case 3: return 61;
    case 4: return 21;
    case 5: return 13;
    default: return 9;
  }
}

// Uniform point in the ball ||a|| <= cap: normal direction, radius U^{1/d}.
Vec ball_point(int dim, double cap, Rng& rng) {
  Vec a(dim);
  double norm_sq = 0.0;
  for (double& v : a) {
    v = rng.normal();
    norm_sq += v * v;
  }
  const double norm = std::sqrt(norm_sq);
  const double radius =
      cap * std::pow(rng.uniform01(), 1.0 / double(dim));
  if (norm > 0.0)
    for (double& v : a) v *= radius / norm;
  return a;
}

double median_of(Vec values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2]
               : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

LemmaCheckResult check_reverse_lipschitz(int dim, double cap, int n_pairs,
                                         Rng& rng, double kappa0_override) {
  LemmaCheckResult out;
  out.lemma_id = "reverse_lipschitz";
  out.kappa0 = kappa0_override > 0.0
                   ? kappa0_override
                   : reverse_lipschitz_constant(dim, cap,
                                                grid_resolution_for(dim));
  out.min_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_pairs; ++i) {
    const Vec a = ball_point(dim, cap, rng);
    const Vec b = ball_point(dim, cap, rng);
    const Vec ha = mnl_probability_map(a);
    const Vec hb = mnl_probability_map(b);
    double dh_sq = 0.0, dab_sq = 0.0;
    for (int j = 0; j < dim; ++j) {
      dh_sq += (ha[j] - hb[j]) * (ha[j] - hb[j]);
      dab_sq += (a[j] - b[j]) * (a[j] - b[j]);
    }
    const double margin =
        std::sqrt(dh_sq) - out.kappa0 * std::sqrt(dab_sq);
    if (margin < out.min_margin) {
      out.min_margin = margin;
      out.worst_witness = a;
      out.worst_witness.insert(out.worst_witness.end(), b.begin(), b.end());
    }
  }
  out.n_instances = n_pairs;
  out.pass = out.min_margin >= -1e-12;
  return out;
}

double function_error(const Environment& env, const UtilityModel& model,
                      const Vec& params, int n_samples, Rng& rng) {
  double total = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const ContextSet ctx = draw_context(env, s, rng);
    const Assortment sample =
        uniform_assortment_sample(env.n_items, env.capacity, rng);
    double round_err = 0.0;
    for (const int i : sample.items()) {
      const double diff =
          model.value(params, ctx.item(i)) - env.true_utility(ctx.item(i));
      round_err += diff * diff;
    }
    total += round_err;
  }
  return total / double(n_samples);
}

std::vector<PilotConvergenceRow> check_pilot_convergence(
    const PilotConvergenceSpec& spec) {
  std::vector<PilotConvergenceRow> rows;
  for (const int t0 : spec.t0_grid) {
    PilotConvergenceRow row;
    row.t0 = t0;
    for (int s = 0; s < spec.n_seeds; ++s) {
      const std::uint64_t seed = spec.base_seed + s;
      Environment env;
      std::unique_ptr<UtilityModel> model;
      if (spec.linear_class) {
        env = make_realizable_env(spec.dim, 1, seed, spec.n_items,
                                  spec.capacity, t0, spec.source);
        // Linear truth: replace the net by a linear model with Unif[-1,1] w.
        env.truth_model = std::make_shared<LinearUtility>(spec.dim);
        Rng truth_rng = Rng(seed).stream("truth");
        env.truth_params.resize(spec.dim);
        for (double& v : env.truth_params) v = truth_rng.uniform(-1.0, 1.0);
        model = std::make_unique<LinearUtility>(spec.dim);
      } else {
        env = make_realizable_env(spec.dim, spec.hidden, seed, spec.n_items,
                                  spec.capacity, t0, spec.source);
        model = std::make_unique<TwoLayerSigmoidNet>(spec.dim, spec.hidden);
      }
      // t0 uniform-exploration rounds.
      Rng root(seed);
      Rng ctx_rng = root.stream("contexts");
      Rng choice_rng = root.stream("choices");
      Rng policy_rng = root.stream("policy");
      Rng init_rng = root.stream("init");
      PilotLoss loss(*model);
      for (int t = 1; t <= t0; ++t) {
        const ContextSet ctx = draw_context(env, t, ctx_rng);
        const Assortment offered =
            uniform_assortment_sample(env.n_items, env.capacity, policy_rng);
        Vec u(offered.size());
        for (int i = 0; i < offered.size(); ++i)
          u[i] = env.true_utility(ctx.item(offered.items()[i]));
        const auto pick = sample_choice(choice_probabilities(u), choice_rng);
        std::optional<int> chosen;
        if (pick.has_value()) chosen = offered.items()[*pick];
        loss.add_record(ChoiceRecord(ctx, offered, chosen));
      }
      Vec init(model->param_dim());
      for (double& v : init) v = init_rng.uniform(-1.0, 1.0);
      const Vec fitted = fit_pilot(loss, init, spec.opt, init_rng);
      Rng eval_rng = root.stream("eval");
      row.per_seed_error.push_back(function_error(
          env, *model, fitted, spec.eval_samples, eval_rng));
    }
    row.median_function_error = median_of(row.per_seed_error);
    double sum = 0.0;
    for (const double e : row.per_seed_error) sum += e;
    row.mean_function_error = sum / double(row.per_seed_error.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

OptimismSummary check_optimism_rate(const std::vector<RunTrace>& traces) {
  OptimismSummary out;
  double hits = 0.0;
  for (const auto& trace : traces) {
    for (const auto& round : trace.rounds) {
      if (!std::isfinite(round.optimism_frac)) continue;
      const int k = static_cast<int>(round.assortment.size());
      hits += round.optimism_frac * k;
      out.total_items += k;
      ++out.rounds;
    }
  }
  out.fraction = out.total_items > 0 ? hits / double(out.total_items) : 0.0;
  return out;
}

}  // namespace mnl_lab
