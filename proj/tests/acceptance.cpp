// Acceptance run: one PASS/FAIL line per criterion.
//
// DFAC_ACCEPT_JOBS   concurrent training processes (default: hardware threads)
// DFAC_ACCEPT_OUT    directory for per-run results (default: ./acceptance_runs)

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "dfac/cli/verify.hpp"
#include "dfac/dist/distributions.hpp"
#include "dfac/envs/matrix_game.hpp"
#include "dfac/mixers/mix.hpp"
#include "dfac/training/learner.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dfac;
using mixers::Method;

namespace {

constexpr std::size_t kSeeds = 5;
constexpr std::size_t kEpisodes = 20000;

struct Line {
  int id;
  bool pass;
  std::string what;
};

std::vector<Line> lines;

void report(int id, bool pass, const std::string& what) {
  lines.push_back({id, pass, what});
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::size_t env_size(const char* name, std::size_t fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  return std::max<std::size_t>(1, std::strtoul(v, nullptr, 10));
}

fs::path result_path(const fs::path& dir, Method m, std::uint64_t seed) {
  return dir / (mixers::method_id(m) + "_seed" + std::to_string(seed) + ".json");
}

void train_one(Method m, std::uint64_t seed, const envs::MatrixGameSpec& spec, const fs::path& dir) {
  training::TrainConfig c = training::TrainConfig::defaults(m);
  c.seed = seed;
  c.episodes = kEpisodes;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = training::train(c, spec);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json digm = nlohmann::json::array();
  bool all = true;
  for (const auto& d : r.digm) {
    digm.push_back({{"episode", d.episode}, {"holds", d.holds}});
    all = all && d.holds;
  }
  const nlohmann::json j{{"method", mixers::method_id(m)},
                         {"seed", seed},
                         {"qdist", r.final_metrics.qdist},
                         {"wdist", r.final_metrics.wdist},
                         {"return", r.final_metrics.ret},
                         {"digm_all_hold", all},
                         {"checkpoints", r.digm.size()},
                         {"seconds", secs},
                         {"digm", digm}};
  const fs::path p = result_path(dir, m, seed);
  std::ofstream(p.string() + ".tmp") << j.dump(1);
  fs::rename(p.string() + ".tmp", p);
  std::fprintf(stderr, "[train] %s seed %llu: return %g qdist %.3f wdist %.3f digm %s (%.0fs)\n",
               mixers::method_label(m).c_str(), static_cast<unsigned long long>(seed), r.final_metrics.ret,
               r.final_metrics.qdist, r.final_metrics.wdist, all ? "ok" : "VIOLATED", secs);
}

// Runs every (method, seed) pair in forked workers; returns the parsed results.
std::map<Method, std::vector<nlohmann::json>> train_all(const envs::MatrixGameSpec& spec) {
  const fs::path dir = std::getenv("DFAC_ACCEPT_OUT") ? fs::path(std::getenv("DFAC_ACCEPT_OUT")) : fs::path("acceptance_runs");
  fs::create_directories(dir);
  const std::size_t jobs = env_size("DFAC_ACCEPT_JOBS", std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::pair<Method, std::uint64_t>> queue;
  for (Method m : mixers::kAllMethods)
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
      fs::remove(result_path(dir, m, s));
      queue.emplace_back(m, s);
    }
  std::fflush(nullptr);
  std::size_t next = 0, running = 0;
  while (next < queue.size() || running > 0) {
    while (running < jobs && next < queue.size()) {
      const auto [m, s] = queue[next++];
      const pid_t pid = fork();
      if (pid < 0) {
        std::perror("fork");
        std::exit(2);
      }
      if (pid == 0) {
        int code = 0;
        try {
          train_one(m, s, spec, dir);
        } catch (const std::exception& e) {
          std::fprintf(stderr, "[train] %s seed %llu failed: %s\n", mixers::method_label(m).c_str(),
                       static_cast<unsigned long long>(s), e.what());
          code = 1;
        }
        std::fflush(nullptr);
        _exit(code);
      }
      ++running;
    }
    int status = 0;
    if (wait(&status) > 0) --running;
  }
  std::map<Method, std::vector<nlohmann::json>> out;
  for (const auto& [m, s] : queue) {
    std::ifstream in(result_path(dir, m, s));
    if (in) out[m].push_back(nlohmann::json::parse(in));
  }
  return out;
}

void training_criteria(const envs::MatrixGameSpec& spec) {
  const auto results = train_all(spec);
  std::map<Method, double> ret, wd, qd;
  bool complete = true;
  std::printf("%-10s %8s %8s %8s %6s\n", "Method", "Q-dist", "W-dist", "Return", "Runs");
  for (Method m : mixers::kAllMethods) {
    std::vector<double> r, w, q;
    const auto it = results.find(m);
    if (it != results.end())
      for (const auto& j : it->second) {
        r.push_back(j["return"].get<double>());
        w.push_back(j["wdist"].get<double>());
        q.push_back(j["qdist"].get<double>());
      }
    if (r.size() != kSeeds) {
      complete = false;
      std::printf("%-10s missing runs (%zu of %zu)\n", mixers::method_label(m).c_str(), r.size(), kSeeds);
      continue;
    }
    ret[m] = median(r);
    wd[m] = median(w);
    qd[m] = median(q);
    std::printf("%-10s %8.3f %8.3f %8g %6zu\n", mixers::method_label(m).c_str(), qd[m], wd[m], ret[m], r.size());
  }
  std::fflush(stdout);

  {
    bool ok = complete;
    std::string what;
    for (Method m : mixers::kAllMethods) {
      if (!ret.count(m)) continue;
      const double v = ret[m];
      bool good;
      if (m == Method::Qplex || m == Method::Dplex) good = v == 8.0;
      else if (m == Method::DplexC51) good = v == 6.0 || v == 8.0;
      else good = v == 6.0;
      ok = ok && good;
      what += mixers::method_label(m) + "=" + fmt(v, 0) + (good ? "" : "(!)") + " ";
    }
    report(1, ok, "median Return over 5 seeds: " + what);
  }
  {
    auto lt = [&](Method a, Method b) { return wd.count(a) && wd.count(b) && wd[a] < wd[b]; };
    const bool ok = complete && lt(Method::Ddn, Method::Vdn) && lt(Method::Dmix, Method::Qmix) &&
                    lt(Method::Dplex, Method::Qplex);
    report(2, ok,
           "median W-dist DDN " + fmt(wd[Method::Ddn]) + " < VDN " + fmt(wd[Method::Vdn]) + ", DMIX " +
               fmt(wd[Method::Dmix]) + " < QMIX " + fmt(wd[Method::Qmix]) + ", DPLEX " + fmt(wd[Method::Dplex]) +
               " < QPLEX " + fmt(wd[Method::Qplex]));
  }
  {
    const bool ok = complete && qd.count(Method::Qplex) && qd.count(Method::Dplex) && qd[Method::Qplex] <= 0.5 &&
                    qd[Method::Dplex] <= 0.5;
    report(3, ok, "median Q-dist QPLEX " + fmt(qd[Method::Qplex]) + ", DPLEX " + fmt(qd[Method::Dplex]) + " (bound 0.5)");
  }
  {
    bool ok = complete;
    std::size_t checkpoints = 0;
    std::string failures;
    for (const auto& [m, runs] : results)
      for (const auto& j : runs) {
        checkpoints += j["checkpoints"].get<std::size_t>();
        if (j["checkpoints"].get<std::size_t>() == 0) ok = false;
        for (const auto& d : j["digm"])
          if (!d["holds"].get<bool>()) {
            ok = false;
            failures += " " + mixers::method_label(m) + "/seed" + std::to_string(j["seed"].get<int>()) + "@" +
                        std::to_string(d["episode"].get<int>());
          }
      }
    if (failures.size() > 300) failures = failures.substr(0, 300) + " ...";
    report(8, ok, "DIGM held at " + std::string(ok ? "all " : "not all ") + std::to_string(checkpoints) +
                      " logged checkpoints" + (failures.empty() ? "" : ":" + failures));
  }
}

void oracle_criteria() {
  const auto checks = cli::run_verify(0);
  auto find = [&](const std::string& name) -> const cli::CheckResult* {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  };
  {
    const auto* c = find("digm/exp_mixer_counterexample");
    report(4, c && c->passed, c ? c->detail : "check missing");
  }
  {
    std::size_t n = 0, passed = 0;
    for (const auto& c : checks)
      if (c.name.rfind("gradient/", 0) == 0) {
        ++n;
        passed += c.passed ? 1 : 0;
      }
    report(5, n >= 100 && passed == n,
           std::to_string(passed) + "/" + std::to_string(n) + " finite-difference checks below 1e-4 relative error");
  }
  {
    const auto* f = find("convolution/fft_matches_direct");
    const auto* c = find("convolution/coin_sum");
    const auto* p = find("projection/hand_cases");
    report(6, f && c && p && f->passed && c->passed && p->passed,
           (f ? f->detail : "fft missing") + "; coin sum " + (c && c->passed ? "exact" : "wrong") + "; projection " +
               (p && p->passed ? "exact" : "wrong"));
  }
}

void identity_criterion() {
  Rng rng(7);
  double worst_mean = 0.0, worst_identity = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t k = 1 + rng.uniform_index(4), n = 1 + rng.uniform_index(64);
    std::vector<double> levels(n);
    for (double& l : levels) l = rng.uniform();
    std::sort(levels.begin(), levels.end());
    std::vector<dist::QuantileBatch> z;
    std::vector<double> q;
    for (std::size_t a = 0; a < k; ++a) {
      dist::QuantileBatch b{levels, {}};
      double v = 40.0 * rng.uniform() - 20.0;
      for (std::size_t i = 0; i < n; ++i) b.values.push_back(v += 3.0 * rng.uniform());
      q.push_back(dist::expectation(b));
      z.push_back(std::move(b));
    }
    const auto phi = mixers::shape_sum(z, q);
    worst_mean = std::max(worst_mean, std::fabs(dist::expectation(phi)));
    double psi = 0.0;
    for (double v : q) psi += v;
    const auto joint = mixers::dfac_mix(psi, phi);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (const auto& b : z) sum += b.values[i];
      worst_identity = std::max(worst_identity, std::fabs(joint.values[i] - sum));
    }
  }
  report(7, worst_mean <= 1e-12 && worst_identity <= 1e-12,
         "shape_sum largest |mean| " + sci(worst_mean) + " over 1000 inputs; DDN identity largest error " +
             sci(worst_identity) + " (bound 1e-12)");
}

void environment_criterion(const envs::MatrixGameSpec& spec) {
  const std::size_t n = 100000;
  Rng rng(9);
  bool ok = true;
  double worst = 0.0;
  for (std::size_t idx = 0; idx < spec.joint_count(); ++idx) {
    const auto joint = spec.joint_action(idx);
    const auto& truth = spec.payoff[idx];
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = envs::step(spec, joint, rng).reward;
      s += r;
      s2 += r * r;
    }
    const double mean = s / n, var = (s2 - n * mean * mean) / (n - 1);
    const double var_true = truth.std * truth.std;
    const double se_mean = truth.std / std::sqrt(static_cast<double>(n));
    const double se_var = var_true * std::sqrt(2.0 / (n - 1));
    double zm, zv;
    if (var_true == 0.0) {
      zm = mean == truth.mean ? 0.0 : INFINITY;
      zv = std::fabs(var) < 1e-9 ? 0.0 : INFINITY;
    } else {
      zm = std::fabs(mean - truth.mean) / se_mean;
      zv = std::fabs(var - var_true) / se_var;
    }
    worst = std::max({worst, zm, zv});
    ok = ok && zm <= 5.0 && zv <= 5.0;
  }
  report(9, ok, "every cell within " + fmt(worst, 2) + " standard errors at 1e5 samples (bound 5)");
}

}  // namespace

int main() {
  const auto spec = envs::table1_spec();
  environment_criterion(spec);
  oracle_criteria();
  identity_criterion();
  training_criteria(spec);

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  std::size_t passed = 0;
  std::printf("\nsummary\n");
  for (const auto& l : lines) {
    std::printf("criterion %d: %s\n", l.id, l.pass ? "PASS" : "FAIL");
    passed += l.pass ? 1 : 0;
  }
  std::printf("%zu/%zu criteria passed\n", passed, lines.size());
  return passed == lines.size() ? 0 : 1;
}
