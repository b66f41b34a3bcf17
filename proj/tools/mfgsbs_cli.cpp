// Command-line front end: simulate, learn, eval, bench.
//
// Exit codes: 0 success, 2 validation error, 3 timeout, 4 internal error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mfgsbs/mfgsbs.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfgsbs;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitTimeout = 3;
constexpr int kExitInternal = 4;

// Writes through a sibling temp file and renames, so readers never see a
// partial file.
void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw ValidationError("failed writing '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string table_csv(const DiscreteTable& t) {
  std::ostringstream out;
  write_csv(out, t);
  return out.str();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct LearnOptions {
  HyperParams hyper;
  SearchConfig search;
  std::string factors = "1,2,3";
  std::string likelihood = "reverse";
  std::string scope = "undirected";
  std::string parents = "empty";
  std::string algorithm = "ges";
  bool plain_marginals = false;
  unsigned threads = 1;
  double timeout_s = 14400.0;

  void finalize() {
    hyper.factors = FactorMask::parse(factors);
    hyper.likelihood = likelihood == "disconnected" ? LikelihoodReference::Disconnected : LikelihoodReference::Reverse;
    hyper.factor3_scope = scope == "all" ? Factor3Scope::AllTargetPairs : Factor3Scope::UndirectedInCpdag;
    hyper.factor3_parents = parents == "cpdag" ? Factor3Parents::InterventionCpdag : Factor3Parents::Empty;
    hyper.drop_target_terms = !plain_marginals;
    search.algorithm = algorithm == "hc" ? SearchAlgorithm::HillClimb : SearchAlgorithm::Ges;
    search.bdeu = hyper.bdeu;
    validate(hyper);
  }

  json to_json() const {
    return {{"alpha_sig", hyper.significance},
            {"cutoff", hyper.cutoff},
            {"max_sepset", hyper.max_sepset},
            {"ess", hyper.bdeu.ess},
            {"factors", hyper.factors.to_string()},
            {"likelihood", likelihood},
            {"factor3_scope", scope},
            {"factor3_parents", parents},
            {"plain_marginals", plain_marginals},
            {"search", algorithm},
            {"max_indegree", search.max_indegree},
            {"seed", search.seed},
            {"timeout_s", timeout_s}};
  }
};

void add_learn_options(CLI::App* app, LearnOptions& o) {
  app->add_option("--alpha-sig", o.hyper.significance, "CI test significance level t")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--cutoff", o.hyper.cutoff, "posterior cut-off c")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  app->add_option("--max-sepset", o.hyper.max_sepset, "largest conditioning set k")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--ess", o.hyper.bdeu.ess, "BDeu equivalent sample size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--factors", o.factors, "prior factors to use, e.g. 1,2,3 or 1")->capture_default_str();
  app->add_option("--likelihood", o.likelihood, "posterior reference structure")
      ->check(CLI::IsMember({"reverse", "disconnected"}))
      ->capture_default_str();
  app->add_option("--factor3-scope", o.scope, "pairs receiving score changes")
      ->check(CLI::IsMember({"undirected", "all"}))
      ->capture_default_str();
  app->add_option("--factor3-parents", o.parents, "parent set of the scored node")
      ->check(CLI::IsMember({"empty", "cpdag"}))
      ->capture_default_str();
  app->add_flag("--plain-marginals", o.plain_marginals, "keep forced targets' terms in the pair marginals");
  app->add_option("--search", o.algorithm, "CPDAG learner")->check(CLI::IsMember({"ges", "hc"}))->capture_default_str();
  app->add_option("--max-indegree", o.search.max_indegree, "search in-degree cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--seed", o.search.seed, "seed for search perturbations")->capture_default_str();
  app->add_option("--timeout", o.timeout_s, "wall-clock limit in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

// ---------------------------------------------------------------------------

int cmd_simulate(const fs::path& spec_path, const fs::path& plan_path, const fs::path& out_dir) {
  const auto spec = load_spec(spec_path);
  const auto plan = load_plan(plan_path);
  const auto sim = simulate(spec, plan);
  fs::create_directories(out_dir);

  json manifest;
  write_atomic(out_dir / plan.observational.path, table_csv(sim.bundle.observational));
  manifest["observational"] = plan.observational.path;
  manifest["interventional"] = json::array();
  for (std::size_t i = 0; i < plan.interventional.size(); ++i) {
    const auto& entry = plan.interventional[i];
    write_atomic(out_dir / entry.path, table_csv(sim.bundle.interventional[i].table));
    manifest["interventional"].push_back({{"path", entry.path}, {"targets", entry.targets}});
  }
  write_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  write_atomic(out_dir / "true_dag.txt", to_text(sim.truth.dag));
  write_atomic(out_dir / "true_mag.txt", to_text(sim.truth.mag));
  std::cout << "wrote " << (plan.interventional.size() + 1) << " data sets to " << out_dir.string() << "\n";
  return 0;
}

int cmd_learn(const fs::path& manifest, const fs::path& out_dir, LearnOptions opt) {
  opt.finalize();
  const auto bundle = load_manifest(manifest);
  for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << "\n";
  const auto control = RunControl::with_timeout(opt.threads, std::chrono::duration<double>(opt.timeout_s));
  const auto result = run_mfgs_bs(bundle, opt.hyper, opt.search, control);
  auto diag = diagnostics_to_json(result.diagnostics, bundle.observational.names());
  diag["config"] = opt.to_json();
  write_atomic(out_dir / "pag.txt", to_text(result.pag));
  write_atomic(out_dir / "edge_probs.json", edge_probs_to_json(result.probs).dump(2) + "\n");
  write_atomic(out_dir / "diagnostics.json", diag.dump(2) + "\n");
  std::cout << "learnt " << result.pag.num_edges() << " edges; wrote " << out_dir.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& pag_path, const fs::path& mag_path, const std::string& out, const std::string& penalties) {
  const auto pag = from_text(read_text(pag_path));
  const auto mag = from_text(read_text(mag_path));
  if (pag.size() != mag.size()) throw ValidationError("graphs have different node sets");
  for (const auto& name : mag.names()) {
    if (!pag.contains(name)) throw ValidationError("node '" + name + "' is missing from " + pag_path.string());
  }
  const auto matrix = penalties.empty() ? PenaltyMatrix{} : PenaltyMatrix::load(penalties);
  const auto tally = compare(pag, mag, matrix);
  const auto metrics = metrics_json(tally, pag.num_edges());
  std::cout << metrics.dump(2) << "\n";
  if (!out.empty()) write_atomic(out, metrics.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// Bench

struct Sweep {
  std::vector<std::string> latents;
  std::vector<std::size_t> sample_sizes{1000};
  std::vector<int> sets{1};
  std::vector<int> targets_per_set{1};
  int repeats = 5;
  int orderings = 0;  // > 0: per repeat, run this many random orderings of one simulation
  std::uint64_t seed = 1;
};

Sweep load_sweep(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  Sweep s;
  try {
    if (doc.contains("latents")) s.latents = doc["latents"].get<std::vector<std::string>>();
    if (doc.contains("sample_sizes")) s.sample_sizes = doc["sample_sizes"].get<std::vector<std::size_t>>();
    if (doc.contains("sets")) s.sets = doc["sets"].get<std::vector<int>>();
    if (doc.contains("targets_per_set")) s.targets_per_set = doc["targets_per_set"].get<std::vector<int>>();
    if (doc.contains("repeats")) s.repeats = doc["repeats"].get<int>();
    if (doc.contains("orderings")) s.orderings = doc["orderings"].get<int>();
    if (doc.contains("seed")) s.seed = doc["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError("sweep: " + std::string(e.what()));
  }
  if (s.repeats < 1) throw ValidationError("sweep: repeats must be >= 1");
  if (s.orderings < 0) throw ValidationError("sweep: orderings must be >= 0");
  if (s.sample_sizes.empty() || s.sets.empty() || s.targets_per_set.empty()) throw ValidationError("sweep: empty axis");
  for (auto n : s.sample_sizes) {
    if (n < 1) throw ValidationError("sweep: sample sizes must be >= 1");
  }
  for (int k : s.sets) {
    if (k < 0) throw ValidationError("sweep: number of sets must be >= 0");
  }
  return s;
}

struct RunRow {
  std::size_t n = 0;
  int sets = 0;
  int targets = 0;
  int repeat = 0;
  int ordering = -1;
  double precision = 0, recall = 0, f1 = 0, bsf = 0;
  std::size_t learnt_edges = 0;
  double runtime_s = 0;
  std::string status = "ok";
};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

int cmd_bench(const fs::path& spec_path, const fs::path& sweep_path, const fs::path& out, LearnOptions opt) {
  opt.finalize();
  const auto spec = load_spec(spec_path);
  const auto sweep = load_sweep(sweep_path);
  for (const auto& l : sweep.latents) spec.index_of(l);

  struct Job {
    std::size_t cell;
    RunRow row;
  };
  std::vector<Job> jobs;
  std::size_t cell = 0;
  for (auto n : sweep.sample_sizes) {
    for (int k : sweep.sets) {
      for (int t : sweep.targets_per_set) {
        for (int r = 0; r < sweep.repeats; ++r) {
          const int per = std::max(1, sweep.orderings);
          for (int o = 0; o < per; ++o) {
            RunRow row;
            row.n = n;
            row.sets = k;
            row.targets = t;
            row.repeat = r;
            row.ordering = sweep.orderings > 0 ? o : -1;
            jobs.push_back({cell, row});
          }
        }
        ++cell;
      }
    }
  }

  parallel_for(jobs.size(), opt.threads, [&](std::size_t j) {
    auto& job = jobs[j];
    auto& row = job.row;
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto plan_seed = derive_seed(sweep.seed, "plan", {job.cell, static_cast<std::uint64_t>(row.repeat)});
      const auto plan = random_plan(spec, sweep.latents, row.sets, row.targets, row.n, plan_seed);
      auto sim = simulate(spec, plan);
      if (row.ordering >= 0) {
        std::mt19937_64 rng(derive_seed(sweep.seed, "ordering",
                                        {job.cell, static_cast<std::uint64_t>(row.repeat),
                                         static_cast<std::uint64_t>(row.ordering)}));
        std::shuffle(sim.bundle.interventional.begin(), sim.bundle.interventional.end(), rng);
      }
      const auto control = RunControl::with_timeout(1, std::chrono::duration<double>(opt.timeout_s));
      const auto result = run_mfgs_bs(sim.bundle, opt.hyper, opt.search, control);
      const auto tally = compare(result.pag, sim.truth.mag);
      const auto s = f1(tally);
      row.precision = s.precision;
      row.recall = s.recall;
      row.f1 = s.f1;
      row.bsf = (tally.a > 0 && tally.i > 0) ? bsf(tally) : std::nan("");
      row.learnt_edges = result.pag.num_edges();
    } catch (const TimeoutError&) {
      row.status = "T";
    } catch (const std::exception& e) {
      row.status = std::string("F:") + e.what();
    }
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  std::ostringstream csv;
  csv << "n,sets,targets_per_set,repeat,ordering,precision,recall,f1,bsf,learnt_edges,runtime_s,status,f1_sd,bsf_sd\n";
  auto emit = [&](const RunRow& r, const std::string& repeat, const std::string& f1_sd, const std::string& bsf_sd) {
    csv << r.n << ',' << r.sets << ',' << r.targets << ',' << repeat << ','
        << (r.ordering >= 0 ? std::to_string(r.ordering) : std::string()) << ',' << r.precision << ',' << r.recall << ','
        << r.f1 << ',' << r.bsf << ',' << r.learnt_edges << ',' << r.runtime_s << ',' << csv_escape(r.status) << ','
        << f1_sd << ',' << bsf_sd << '\n';
  };
  auto sd = [](const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double v = 0.0;
    for (double x : xs) v += (x - mean) * (x - mean);
    return std::sqrt(v / static_cast<double>(xs.size() - 1));
  };
  for (std::size_t c = 0; c < cell; ++c) {
    std::vector<const RunRow*> rows;
    for (const auto& job : jobs) {
      if (job.cell == c) rows.push_back(&job.row);
    }
    for (const auto* r : rows) emit(*r, std::to_string(r->repeat), "", "");
    RunRow mean = *rows.front();
    mean.ordering = -1;
    mean.precision = mean.recall = mean.f1 = mean.bsf = mean.runtime_s = 0.0;
    std::size_t ok = 0;
    double edges = 0.0;
    std::vector<double> f1s, bsfs;
    for (const auto* r : rows) {
      mean.runtime_s += r->runtime_s;
      if (r->status != "ok") continue;
      ++ok;
      mean.precision += r->precision;
      mean.recall += r->recall;
      mean.f1 += r->f1;
      mean.bsf += r->bsf;
      edges += static_cast<double>(r->learnt_edges);
      f1s.push_back(r->f1);
      bsfs.push_back(r->bsf);
    }
    mean.runtime_s /= static_cast<double>(rows.size());
    if (ok > 0) {
      const double k = static_cast<double>(ok);
      mean.precision /= k;
      mean.recall /= k;
      mean.f1 /= k;
      mean.bsf /= k;
      mean.learnt_edges = static_cast<std::size_t>(std::lround(edges / k));
    }
    mean.status = ok == rows.size() ? "ok" : std::to_string(rows.size() - ok) + " failed";
    std::ostringstream f1_sd, bsf_sd;
    f1_sd << sd(f1s, mean.f1);
    bsf_sd << sd(bsfs, mean.bsf);
    emit(mean, "mean", f1_sd.str(), bsf_sd.str());
  }
  write_atomic(out, csv.str());
  std::cout << "ran " << jobs.size() << " runs over " << cell << " cells; wrote " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn partial ancestral graphs from observational and interventional discrete data"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "sample data sets and ground truth from a network spec");
  std::string sim_spec, sim_plan, sim_out;
  sim->add_option("--spec", sim_spec, "network spec JSON")->required();
  sim->add_option("--plan", sim_plan, "intervention plan JSON")->required();
  sim->add_option("--out", sim_out, "output directory")->required();

  auto* learn = app.add_subcommand("learn", "learn a PAG from a manifest of data sets");
  std::string manifest, learn_out;
  LearnOptions learn_opts;
  learn->add_option("--manifest", manifest, "manifest JSON")->required();
  learn->add_option("--out", learn_out, "output directory")->required();
  add_learn_options(learn, learn_opts);

  auto* eval = app.add_subcommand("eval", "score a learnt PAG against a true MAG");
  std::string pag, mag, eval_out, penalties;
  eval->add_option("--pag", pag, "learnt graph file")->required();
  eval->add_option("--mag", mag, "true MAG file")->required();
  eval->add_option("--out", eval_out, "also write the metrics JSON here");
  eval->add_option("--penalties", penalties, "edge credit overrides JSON");

  auto* bench = app.add_subcommand("bench", "run simulate, learn and eval over a parameter sweep");
  std::string bench_spec, sweep, bench_out;
  LearnOptions bench_opts;
  bench->add_option("--spec", bench_spec, "network spec JSON")->required();
  bench->add_option("--sweep", sweep, "sweep JSON")->required();
  bench->add_option("--out", bench_out, "output CSV")->required();
  add_learn_options(bench, bench_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*sim) return cmd_simulate(sim_spec, sim_plan, sim_out);
    if (*learn) return cmd_learn(manifest, learn_out, learn_opts);
    if (*eval) return cmd_eval(pag, mag, eval_out, penalties);
    if (*bench) return cmd_bench(bench_spec, sweep, bench_out, bench_opts);
  } catch (const TimeoutError& e) {
    std::cerr << "timeout: " << e.what() << "\n";
    return kExitTimeout;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
