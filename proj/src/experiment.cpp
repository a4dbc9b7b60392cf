#include "mnl_lab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "mnl_lab/analysis.hpp"
#include "mnl_lab/confidence.hpp"

namespace mnl_lab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string join_items(const std::vector<int>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '|';
    out += std::to_string(items[i]);
  }
  return out;
}

std::vector<int> split_items(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, '|'))
    if (!cell.empty()) out.push_back(std::stoi(cell));
  return out;
}

}  // namespace

void write_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "round,regret_inst,regret_cum,assortment,chosen,beta_t,"
         "optimism_frac\n";
  for (const auto& r : trace.rounds) {
    out << r.round << ',' << fmt(r.regret_inst) << ',' << fmt(r.regret_cum)
        << ',' << join_items(r.assortment) << ',' << r.chosen << ','
        << fmt(r.beta) << ',' << fmt(r.optimism_frac) << '\n';
  }
}

RunTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw MalformedCsv(path + ": empty trace");
  RunTrace trace;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7)
      throw MalformedCsv(path + ": line " + std::to_string(lineno));
    RoundLog r{};
    r.round = std::stoi(cells[0]);
    r.regret_inst = std::stod(cells[1]);
    r.regret_cum = std::stod(cells[2]);
    r.assortment = split_items(cells[3]);
    r.chosen = std::stoi(cells[4]);
    r.beta = std::stod(cells[5]);
    r.optimism_frac = std::stod(cells[6]);
    trace.rounds.push_back(std::move(r));
  }
  return trace;
}

void write_gram_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "round,min_eig,inv_drift,beta_t,lhs_potential,rhs_potential\n";
  for (const auto& g : trace.gram)
    out << g.round << ',' << fmt(g.min_eig) << ',' << fmt(g.inv_drift) << ','
        << fmt(g.beta) << ',' << fmt(g.lhs_potential) << ','
        << fmt(g.rhs_potential) << '\n';
}

void write_trace_sidecar(const std::string& path, const RunTrace& trace,
                         const ExperimentConfig& cfg) {
  json j = {{"policy", trace.policy_name},
            {"seed", trace.seed},
            {"wall_seconds", trace.wall_seconds},
            {"final_regret", trace.final_regret()},
            {"lambda", trace.lambda},
            {"d_w", trace.d_w},
            {"t0", trace.t0},
            {"config", cfg.echo}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

AggregateResult aggregate_traces(std::vector<RunTrace> traces, int horizon,
                                 const std::vector<std::string>& policy_order) {
  AggregateResult agg;
  agg.horizon = horizon;
  for (const std::string& policy : policy_order) {
    AggregateCurve curve;
    curve.policy = policy;
    curve.mean.assign(horizon, 0.0);
    curve.stddev.assign(horizon, 0.0);
    int count = 0;
    for (const auto& trace : traces) {
      if (trace.policy_name != policy) continue;
      if (static_cast<int>(trace.rounds.size()) != horizon)
        throw ConfigMismatch("trace length != horizon");
      for (int t = 0; t < horizon; ++t)
        curve.mean[t] += trace.rounds[t].regret_cum;
      curve.wall_mean += trace.wall_seconds;
      ++count;
    }
    if (count == 0) continue;
    for (double& v : curve.mean) v /= count;
    curve.wall_mean /= count;
    for (const auto& trace : traces) {
      if (trace.policy_name != policy) continue;
      for (int t = 0; t < horizon; ++t) {
        const double d = trace.rounds[t].regret_cum - curve.mean[t];
        curve.stddev[t] += d * d;
      }
    }
    for (double& v : curve.stddev) v = std::sqrt(v / count);
    curve.final_mean = curve.mean.back();
    curve.final_std = curve.stddev.back();
    agg.curves.push_back(std::move(curve));
  }
  agg.traces = std::move(traces);
  return agg;
}

namespace {

struct Task {
  std::size_t policy_idx;
  std::size_t seed_idx;
};

// Display labels; duplicate policy names get a positional suffix so runs
// of the same policy under different parameters aggregate separately.
std::vector<std::string> policy_labels(const ExperimentConfig& cfg) {
  std::vector<std::string> labels;
  std::map<std::string, int> seen;
  for (const auto& spec : cfg.policies) seen[spec.name]++;
  std::map<std::string, int> counter;
  for (const auto& spec : cfg.policies) {
    if (seen[spec.name] > 1)
      labels.push_back(spec.name + "#" +
                       std::to_string(++counter[spec.name]));
    else
      labels.push_back(spec.name);
  }
  return labels;
}

std::vector<RunTrace> run_all(const ExperimentConfig& cfg) {
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < cfg.policies.size(); ++p)
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) tasks.push_back({p, s});
  std::vector<RunTrace> traces(tasks.size());
  const std::vector<std::string> labels = policy_labels(cfg);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;
  const int n_threads =
      std::max(1, std::min<int>(resolve_threads(cfg.threads),
                                static_cast<int>(tasks.size())));
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) break;
      try {
        const Task& task = tasks[i];
        const std::uint64_t seed = cfg.seeds[task.seed_idx];
        const Environment env = make_environment(cfg, seed);
        Rng init_rng = Rng(seed).stream("init").stream(
            cfg.policies[task.policy_idx].name);
        auto policy =
            make_policy(cfg.policies[task.policy_idx], cfg, env, init_rng);
        traces[i] = run_episode(env, *policy, seed);
        traces[i].policy_name = labels[task.policy_idx];
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        error_message = e.what();
        failed.store(true);
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load()) throw Error("experiment failed: " + error_message);
  return traces;
}

}  // namespace

AggregateResult run_experiment_in_memory(const ExperimentConfig& cfg) {
  return aggregate_traces(run_all(cfg), cfg.horizon, policy_labels(cfg));
}

void write_aggregate_csv(const std::string& path, const AggregateResult& agg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "policy,round,regret_mean,regret_std\n";
  for (const auto& curve : agg.curves)
    for (int t = 0; t < agg.horizon; ++t)
      out << curve.policy << ',' << (t + 1) << ',' << fmt(curve.mean[t])
          << ',' << fmt(curve.stddev[t]) << '\n';
}

AggregateResult run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  AggregateResult agg = run_experiment_in_memory(cfg);
  for (const auto& trace : agg.traces) {
    const std::string stem =
        trace.policy_name + "_" + std::to_string(trace.seed);
    write_trace_csv(cfg.output_dir + "/trace_" + stem + ".csv", trace);
    write_trace_sidecar(cfg.output_dir + "/trace_" + stem + ".json", trace,
                        cfg);
    if (!trace.gram.empty())
      write_gram_csv(cfg.output_dir + "/gram_" + stem + ".csv", trace);
  }
  write_aggregate_csv(cfg.output_dir + "/aggregate.csv", agg);
  write_regret_svg(cfg.output_dir + "/regret.svg", agg);
  return agg;
}

// ---- SVG plot ----

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

void write_regret_svg(const std::string& path, const AggregateResult& agg) {
  const int width = 860, height = 540;
  const int ml = 70, mr = 180, mt = 40, mb = 60;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;
  double y_max = 1.0;
  for (const auto& c : agg.curves)
    for (int t = 0; t < agg.horizon; ++t)
      y_max = std::max(y_max, c.mean[t] + c.stddev[t]);
  y_max *= 1.05;
  const auto x_of = [&](double t) {
    return ml + plot_w * (t - 1.0) / std::max(1.0, double(agg.horizon - 1));
  };
  const auto y_of = [&](double v) { return mt + plot_h * (1.0 - v / y_max); };

  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // Axes and ticks.
  out << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\""
      << ml + plot_w << "\" y2=\"" << mt + plot_h
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double tv = 1.0 + (agg.horizon - 1) * i / 5.0;
    const double vv = y_max * i / 5.0;
    out << "<text x=\"" << x_of(tv) << "\" y=\"" << mt + plot_h + 20
        << "\" font-size=\"12\" text-anchor=\"middle\">" << int(tv)
        << "</text>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << y_of(vv) + 4
        << "\" font-size=\"12\" text-anchor=\"end\">" << fmt(vv)
        << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << y_of(vv) << "\" x2=\""
        << ml + plot_w << "\" y2=\"" << y_of(vv)
        << "\" stroke=\"#dddddd\"/>\n";
  }
  out << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 15
      << "\" font-size=\"14\" text-anchor=\"middle\">round</text>\n";
  out << "<text x=\"18\" y=\"" << mt + plot_h / 2
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 "
         "18 "
      << mt + plot_h / 2 << ")\">cumulative regret</text>\n";

  int color = 0;
  for (const auto& c : agg.curves) {
    const char* col = kPalette[color % 8];
    // +-1 std band.
    std::string band = "<path d=\"M";
    for (int t = 0; t < agg.horizon; ++t) {
      band += fmt(x_of(t + 1)) + " " +
              fmt(y_of(std::min(y_max, c.mean[t] + c.stddev[t]))) + " L";
    }
    for (int t = agg.horizon - 1; t >= 0; --t) {
      band += fmt(x_of(t + 1)) + " " +
              fmt(y_of(std::max(0.0, c.mean[t] - c.stddev[t])));
      if (t) band += " L";
    }
    band += " Z\" fill=\"";
    band += col;
    band += "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    out << band;
    out << "<polyline fill=\"none\" stroke=\"" << col
        << "\" stroke-width=\"1.8\" points=\"";
    for (int t = 0; t < agg.horizon; ++t)
      out << fmt(x_of(t + 1)) << ',' << fmt(y_of(c.mean[t])) << ' ';
    out << "\"/>\n";
    const int ly = mt + 20 + color * 22;
    out << "<line x1=\"" << ml + plot_w + 10 << "\" y1=\"" << ly << "\" x2=\""
        << ml + plot_w + 40 << "\" y2=\"" << ly << "\" stroke=\"" << col
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + plot_w + 46 << "\" y=\"" << ly + 4
        << "\" font-size=\"12\">" << c.policy << "</text>\n";
    ++color;
  }
  out << "</svg>\n";
}

// ---- audit ----

namespace {

struct GramFileRow {
  int round;
  double min_eig, inv_drift, beta, lhs, rhs;
};

std::vector<GramFileRow> read_gram_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<GramFileRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw MalformedCsv(path + ": bad gram row");
    rows.push_back({std::stoi(cells[0]), std::stod(cells[1]),
                    std::stod(cells[2]), std::stod(cells[3]),
                    std::stod(cells[4]), std::stod(cells[5])});
  }
  return rows;
}

}  // namespace

bool run_audit(const ExperimentConfig& cfg, const std::string& trace_dir,
               const std::string& out_dir) {
  fs::create_directories(out_dir);
  json report = json::object();
  std::ostringstream md;
  md << "# Audit report\n\n";
  bool all_pass = true;

  // Collect runs from sidecar files.
  std::vector<fs::path> sidecars;
  for (const auto& entry : fs::directory_iterator(trace_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("trace_", 0) == 0 && entry.path().extension() == ".json")
      sidecars.push_back(entry.path());
  }
  std::sort(sidecars.begin(), sidecars.end());
  if (sidecars.empty())
    throw MissingDiagnostics("no trace sidecars found in " + trace_dir);

  md << "## Elliptical potential and Gram-state audit\n\n";
  json runs = json::array();
  for (const auto& sidecar : sidecars) {
    std::ifstream in(sidecar);
    json meta;
    in >> meta;
    const std::string policy = meta.at("policy").get<std::string>();
    const std::uint64_t seed = meta.at("seed").get<std::uint64_t>();
    const std::string stem = policy + "_" + std::to_string(seed);
    json run = {{"policy", policy}, {"seed", seed}};

    const std::string gram_path = trace_dir + "/gram_" + stem + ".csv";
    if (fs::exists(gram_path)) {
      const double lambda = meta.at("lambda").get<double>();
      const auto rows = read_gram_csv(gram_path);
      bool potential_ok = true, drift_ok = true, eig_ok = true;
      int potential_bad = -1, drift_bad = -1, eig_bad = -1;
      for (const auto& row : rows) {
        if (potential_ok && row.lhs > row.rhs + 1e-12) {
          potential_ok = false;
          potential_bad = row.round;
        }
        if (drift_ok && row.inv_drift > 1e-8) {
          drift_ok = false;
          drift_bad = row.round;
        }
        if (eig_ok && row.min_eig < lambda * (1.0 - 1e-9)) {
          eig_ok = false;
          eig_bad = row.round;
        }
      }
      run["elliptical_potential"] = {{"pass", potential_ok},
                                     {"first_bad_round", potential_bad}};
      run["inverse_drift"] = {{"pass", drift_ok},
                              {"first_bad_round", drift_bad}};
      run["min_eigenvalue"] = {{"pass", eig_ok}, {"first_bad_round", eig_bad}};
      all_pass = all_pass && potential_ok && drift_ok && eig_ok;
      md << "- `" << stem << "`: elliptical potential "
         << (potential_ok ? "PASS" : "FAIL (first bad round " +
                                         std::to_string(potential_bad) + ")")
         << ", inverse drift "
         << (drift_ok
                 ? "PASS"
                 : "FAIL (first bad round " + std::to_string(drift_bad) + ")")
         << ", min eigenvalue "
         << (eig_ok ? "PASS"
                    : "FAIL (first bad round " + std::to_string(eig_bad) + ")")
         << "\n";
    }

    // Optimism summary (informational).
    const std::string trace_path = trace_dir + "/trace_" + stem + ".csv";
    if (fs::exists(trace_path)) {
      RunTrace trace = read_trace_csv(trace_path);
      const auto summary = check_optimism_rate({trace});
      run["optimism_fraction"] = summary.fraction;
      run["optimism_rounds"] = summary.rounds;
      if (summary.rounds > 0)
        md << "  - optimism fraction " << fmt(summary.fraction) << " over "
           << summary.rounds << " scored rounds (informational)\n";
    }
    runs.push_back(std::move(run));
  }
  report["runs"] = runs;

  md << "\n## Reverse-Lipschitz fuzzing\n\n";
  json lipschitz = json::array();
  if (cfg.audit.enabled) {
    for (const int dim : cfg.audit.dims) {
      for (const double cap : cfg.audit.caps) {
        Rng rng = Rng(20250810)
                      .stream("audit-lipschitz")
                      .stream(static_cast<std::uint64_t>(dim))
                      .stream(static_cast<std::uint64_t>(cap * 1000));
        const auto res =
            check_reverse_lipschitz(dim, cap, cfg.audit.pairs, rng);
        all_pass = all_pass && res.pass;
        lipschitz.push_back({{"dim", dim},
                             {"cap", cap},
                             {"kappa0", res.kappa0},
                             {"min_margin", res.min_margin},
                             {"pass", res.pass}});
        md << "- dim " << dim << ", cap " << fmt(cap) << ": kappa0 "
           << fmt(res.kappa0) << ", min margin " << fmt(res.min_margin)
           << " over " << res.n_instances << " pairs: "
           << (res.pass ? "PASS" : "FAIL") << "\n";
      }
    }
  }
  report["reverse_lipschitz"] = lipschitz;
  report["all_pass"] = all_pass;

  md << "\n## Result\n\n"
     << (all_pass ? "All checks PASS.\n" : "At least one check FAILED.\n");

  std::ofstream md_out(out_dir + "/audit.md");
  md_out << md.str();
  std::ofstream json_out(out_dir + "/audit.json");
  json_out << report.dump(2) << "\n";
  return all_pass;
}

// ---- grid search ----

GridResult grid_search(const ExperimentConfig& cfg) {
  std::size_t target = cfg.policies.size();
  for (std::size_t i = 0; i < cfg.policies.size(); ++i)
    if (cfg.policies[i].name == "onl-mnl") {
      target = i;
      break;
    }
  if (target == cfg.policies.size())
    throw ConfigError("grid search needs an onl-mnl policy in the config");

  GridResult result;
  result.best = {0.0, 0.0, std::numeric_limits<double>::infinity()};
  for (const double cl : cfg.grid.c_lambda) {
    for (const double cb : cfg.grid.c_beta) {
      ExperimentConfig point = cfg;
      point.policies = {cfg.policies[target]};
      point.policies[0].params["c_lambda"] = cl;
      point.policies[0].params["c_beta"] = cb;
      point.seeds = cfg.grid.seeds;
      const AggregateResult agg = run_experiment_in_memory(point);
      double final_mean = 0.0;
      for (const auto& curve : agg.curves)
        if (curve.policy == "onl-mnl") final_mean = curve.final_mean;
      result.table.push_back({cl, cb, final_mean});
      if (final_mean < result.best.mean_final_regret)
        result.best = result.table.back();
    }
  }
  fs::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir + "/grid.csv");
  if (!out) throw IoError("cannot write grid.csv");
  out << "c_lambda,c_beta,mean_final_regret\n";
  for (const auto& p : result.table)
    out << fmt(p.c_lambda) << ',' << fmt(p.c_beta) << ','
        << fmt(p.mean_final_regret) << '\n';
  return result;
}

}  // namespace mnl_lab
