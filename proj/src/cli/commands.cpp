#include "dfac/cli/commands.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "dfac/cli/experiment.hpp"
#include "dfac/cli/verify.hpp"
#include "dfac/error.hpp"
#include "dfac/eval/metrics.hpp"
#include "dfac/training/learner.hpp"

namespace dfac::cli {

namespace fs = std::filesystem;

namespace {

struct Job {
  training::TrainConfig config;
  fs::path out_dir;
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot write file");
  out << j.dump(2) << "\n";
}

std::string suffix(std::uint64_t seed) { return "_seed" + std::to_string(seed); }

void run_job(const Job& job, const envs::MatrixGameSpec& spec) {
  fs::create_directories(job.out_dir);
  const auto& c = job.config;
  const auto result = training::train(c, spec);
  {
    std::ofstream log(job.out_dir / ("log" + suffix(c.seed) + ".csv"));
    training::write_log_csv(result.log, log);
  }
  nlohmann::json ckpt = training::checkpoint_json(c, result.model);
  ckpt["spec"] = envs::spec_to_json(spec);
  write_json(job.out_dir / ("ckpt" + suffix(c.seed) + ".json"), ckpt);

  nlohmann::json audit = nlohmann::json::array();
  bool all_hold = true;
  for (const auto& d : result.digm) {
    audit.push_back({{"episode", d.episode},
                     {"holds", d.holds},
                     {"joint_argmax", spec.joint_label(d.joint_argmax)},
                     {"agent_argmax", spec.joint_label(d.agent_argmax)}});
    all_hold = all_hold && d.holds;
  }
  write_json(job.out_dir / ("metrics" + suffix(c.seed) + ".json"),
             {{"method", mixers::method_id(c.method)},
              {"seed", c.seed},
              {"episodes", c.episodes},
              {"steps", result.steps},
              {"metrics", eval::to_json(result.final_metrics, spec)},
              {"digm_all_hold", all_hold},
              {"digm_audit", audit}});
  std::fprintf(stderr, "%s seed %llu: qdist %.3f wdist %.3f return %g digm %s\n", mixers::method_label(c.method).c_str(),
               static_cast<unsigned long long>(c.seed), result.final_metrics.qdist, result.final_metrics.wdist,
               result.final_metrics.ret, all_hold ? "ok" : "violated");
}

bool run_jobs(const std::vector<Job>& jobs, const envs::MatrixGameSpec& spec, std::size_t parallel) {
  if (parallel <= 1) {
    for (const auto& j : jobs) run_job(j, spec);
    return true;
  }
  std::fflush(nullptr);
  std::size_t next = 0, running = 0;
  bool ok = true;
  while (next < jobs.size() || running > 0) {
    while (running < parallel && next < jobs.size()) {
      const pid_t pid = fork();
      if (pid < 0) throw Error("fork failed");
      if (pid == 0) {
        int code = 0;
        try {
          run_job(jobs[next], spec);
        } catch (const std::exception& e) {
          std::fprintf(stderr, "error: %s\n", e.what());
          code = 1;
        }
        std::fflush(nullptr);
        _exit(code);
      }
      ++next;
      ++running;
    }
    int status = 0;
    if (wait(&status) > 0) {
      --running;
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ok = false;
    }
  }
  return ok;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(item.substr(0, dash)), hi = std::stoull(item.substr(dash + 1));
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      } else {
        seeds.push_back(std::stoull(item));
      }
    } catch (const std::exception&) {
      throw DomainError("bad seed list '" + text + "'");
    }
  }
  if (seeds.empty()) throw DomainError("empty seed list");
  return seeds;
}

std::vector<std::string> split_methods(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string method;
  std::optional<std::size_t> episodes;
  std::string out;
  std::size_t parallel = 1;
};

int cmd_train(const TrainArgs& a) {
  const fs::path config_path(a.config);
  nlohmann::json raw = read_json_file(config_path);
  std::vector<std::string> methods;
  if (!a.method.empty()) {
    methods = split_methods(a.method);
  } else {
    if (!raw.is_object() || !raw.contains("method") || !raw["method"].is_string())
      throw FormatError("config field 'method' is required");
    methods.push_back(raw["method"].get<std::string>());
  }
  std::vector<ExperimentConfig> experiments;
  for (const auto& m : methods) {
    nlohmann::json j = raw;
    if (!a.method.empty()) {
      // a method override takes that method's defaults for every unset field
      j["method"] = m;
    }
    ExperimentConfig e = experiment_from_json(j, config_path.parent_path());
    if (a.episodes) e.train.episodes = *a.episodes;
    if (const char* env_seed = std::getenv("DFAC_SEED"); env_seed && *env_seed) e.seeds = parse_seed_list(env_seed);
    if (!a.seeds.empty()) e.seeds = parse_seed_list(a.seeds);
    if (a.seed) e.seeds = {*a.seed};
    if (!a.out.empty()) e.out = a.out;
    experiments.push_back(std::move(e));
  }
  const envs::MatrixGameSpec spec = envs::load_spec(experiments.front().env_path);
  for (const auto& e : experiments)
    if (e.env_path != experiments.front().env_path) throw DomainError("all methods must share one game");

  std::vector<Job> jobs;
  for (const auto& e : experiments) {
    const fs::path dir = methods.size() > 1 ? fs::path(e.out) / mixers::method_id(e.train.method) : fs::path(e.out);
    for (std::uint64_t s : e.seeds) {
      Job job{e.train, dir};
      job.config.seed = s;
      jobs.push_back(job);
    }
  }
  const bool ok = run_jobs(jobs, spec, a.parallel);

  nlohmann::json summary = nlohmann::json::array();
  std::printf("%-10s %8s %8s %8s %6s %s\n", "Method", "Q-dist", "W-dist", "Return", "Seeds", "DIGM");
  for (std::size_t m = 0; m < experiments.size(); ++m) {
    const auto& e = experiments[m];
    const fs::path dir = methods.size() > 1 ? fs::path(e.out) / mixers::method_id(e.train.method) : fs::path(e.out);
    std::vector<double> q, w, r;
    bool digm = true;
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::uint64_t s : e.seeds) {
      const fs::path p = dir / ("metrics" + suffix(s) + ".json");
      if (!fs::exists(p)) continue;
      const nlohmann::json mj = read_json_file(p);
      q.push_back(mj["metrics"]["qdist"].get<double>());
      w.push_back(mj["metrics"]["wdist"].get<double>());
      r.push_back(mj["metrics"]["return"].get<double>());
      digm = digm && mj["digm_all_hold"].get<bool>();
      per_seed.push_back({{"seed", s}, {"qdist", q.back()}, {"wdist", w.back()}, {"return", r.back()}});
    }
    if (q.empty()) continue;
    std::printf("%-10s %8.2f %8.2f %8.2f %6zu %s\n", mixers::method_label(e.train.method).c_str(), median(q),
                median(w), median(r), q.size(), digm ? "ok" : "violated");
    summary.push_back({{"method", mixers::method_id(e.train.method)},
                       {"median_qdist", median(q)},
                       {"median_wdist", median(w)},
                       {"median_return", median(r)},
                       {"digm_all_hold", digm},
                       {"seeds", per_seed}});
  }
  fs::create_directories(experiments.front().out);
  write_json(fs::path(experiments.front().out) / "summary.json", summary);
  return ok ? 0 : 1;
}

struct EvalArgs {
  std::string checkpoint;
  std::string spec;
  std::string out;
  std::size_t grid = 10000;
  std::string action;
};

envs::MatrixGameSpec spec_for(const nlohmann::json& ckpt, const std::string& spec_path) {
  if (!spec_path.empty()) return envs::load_spec(spec_path);
  if (ckpt.contains("spec")) return envs::spec_from_json(ckpt["spec"], "checkpoint spec");
  return envs::table1_spec();
}

int cmd_eval(const EvalArgs& a) {
  const nlohmann::json ckpt = read_json_file(a.checkpoint);
  const envs::MatrixGameSpec spec = spec_for(ckpt, a.spec);
  training::TrainConfig config;
  const auto model = training::load_checkpoint(ckpt, spec, &config);
  const auto report = eval::evaluate_metrics(model, spec, {a.grid, config.n_eval_quantiles});
  nlohmann::json j = eval::to_json(report, spec);
  j["method"] = mixers::method_id(config.method);
  j["seed"] = config.seed;
  const auto audit = eval::audit_digm(model, spec, config.n_eval_quantiles);
  j["digm_holds"] = audit.holds;
  std::printf("%-10s %8s %8s %8s\n", "Method", "Q-dist", "W-dist", "Return");
  std::printf("%-10s %8.4f %8.4f %8.2f\n", mixers::method_label(config.method).c_str(), report.qdist, report.wdist,
              report.ret);
  if (!a.out.empty()) write_json(a.out, j);
  return 0;
}

int cmd_export(const EvalArgs& a) {
  const nlohmann::json ckpt = read_json_file(a.checkpoint);
  const envs::MatrixGameSpec spec = spec_for(ckpt, a.spec);
  const auto model = training::load_checkpoint(ckpt, spec);
  const auto joint = spec.parse_joint_action(a.action);
  const nlohmann::json j = eval::export_factorization(model, spec, joint, a.grid);
  if (a.out.empty())
    std::cout << j.dump() << "\n";
  else
    write_json(a.out, j);
  return 0;
}

int cmd_verify(const std::string& out) {
  const auto results = run_verify();
  std::size_t failed = 0;
  for (const auto& r : results) {
    std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    failed += r.passed ? 0 : 1;
  }
  std::printf("%zu/%zu checks passed\n", results.size() - failed, results.size());
  if (!out.empty()) write_json(out, verify_json(results));
  return failed == 0 ? 0 : 1;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Distributional value-function factorization on cooperative matrix games"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train one or more methods over one or more seeds");
  train->add_option("--config", ta.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", ta.seed, "Single seed (overrides DFAC_SEED and the config)");
  train->add_option("--seeds", ta.seeds, "Seed list, e.g. 0,1,2 or 0-4");
  train->add_option("--method", ta.method, "Method id or comma-separated ids");
  train->add_option("--episodes", ta.episodes, "Number of training episodes");
  train->add_option("--out", ta.out, "Output directory");
  train->add_option("--parallel", ta.parallel, "Concurrent runs")->check(CLI::PositiveNumber);

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint against the game's ground truth");
  evalc->add_option("checkpoint", ea.checkpoint, "Checkpoint JSON")->required();
  evalc->add_option("--spec", ea.spec, "Game spec (defaults to the one stored in the checkpoint)");
  evalc->add_option("--grid", ea.grid, "Quantile levels for the metrics")->check(CLI::PositiveNumber);
  evalc->add_option("--out", ea.out, "Write the report here");

  EvalArgs xa;
  auto* exportc = app.add_subcommand("export", "Export Z_GT, Z_jt and Z_k of one joint action");
  exportc->add_option("checkpoint", xa.checkpoint, "Checkpoint JSON")->required();
  exportc->add_option("--action", xa.action, "Joint action, e.g. B1,B2")->required();
  exportc->add_option("--spec", xa.spec, "Game spec (defaults to the one stored in the checkpoint)");
  exportc->add_option("--grid", xa.grid, "Quantile levels")->check(CLI::PositiveNumber);
  exportc->add_option("--out", xa.out, "Output file (stdout when omitted)");

  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "Run the oracle self-checks");
  verify->add_option("--out", verify_out, "Write machine-readable results here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (*train) return cmd_train(ta);
    if (*evalc) return cmd_eval(ea);
    if (*exportc) return cmd_export(xa);
    if (*verify) return cmd_verify(verify_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace dfac::cli
