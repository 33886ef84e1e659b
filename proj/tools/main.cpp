#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tmsgd.h"

namespace {

int status_to_exit(tmsgd_status st) {
  switch (st) {
    case TMSGD_OK:
      return 0;
    case TMSGD_ERR_INVALID_ARGUMENT:
      return 1;
    default:
      return 2;  // io / internal
  }
}

int fail(const char* sub, tmsgd_status st) {
  std::fprintf(stderr, "error: %s\n", tmsgd_last_error());
  std::printf("RESULT %s status=fail\n", sub);
  return status_to_exit(st);
}

// --out falls back to $TMSGD_OUT_ROOT/<subcommand> when the flag is omitted.
bool resolve_out(std::string& out, const char* sub) {
  if (!out.empty()) return true;
  const char* root = std::getenv("TMSGD_OUT_ROOT");
  if (root != nullptr && root[0] != '\0') {
    out = std::string(root) + "/" + sub;
    return true;
  }
  std::fprintf(stderr,
               "error: --out is required (or set TMSGD_OUT_ROOT)\n");
  return false;
}

bool write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  return static_cast<bool>(f);
}

struct GenArgs {
  size_t m = 0, n = 0;
  uint64_t seed = 1;
  std::string out;
};

int run_gen(GenArgs& a) {
  if (a.m == 0) {
    std::fprintf(stderr, "error: --m must be >= 1\n");
    return 1;
  }
  if (a.n == 0) {
    std::fprintf(stderr, "error: --n must be >= 1\n");
    return 1;
  }
  if (!resolve_out(a.out, "gen")) return 1;
  tmsgd_system* sys = nullptr;
  tmsgd_status st = tmsgd_system_generate(a.m, a.n, a.seed, &sys);
  if (st == TMSGD_OK) st = tmsgd_system_save(sys, a.out.c_str());
  tmsgd_system_free(sys);
  if (st != TMSGD_OK) return fail("gen", st);
  std::printf("RESULT gen status=ok m=%zu n=%zu seed=%llu out=%s\n", a.m, a.n,
              static_cast<unsigned long long>(a.seed), a.out.c_str());
  return 0;
}

struct SolveArgs {
  std::string in;
  std::string method = "tuple-msgd";
  double p = 1.0;
  size_t ell = 1;
  std::string schedule = "fixed";
  double alpha = 1e-3;
  double mu = 0.0;
  int project = -1;
  double radius = 0.0;
  size_t iters = 0;
  uint64_t seed = 1;
  size_t thin = 1;
  std::string out;
};

int run_solve(SolveArgs& a) {
  if (!resolve_out(a.out, "solve")) return 1;
  tmsgd_system* sys = nullptr;
  tmsgd_status st = tmsgd_system_load(a.in.c_str(), &sys);
  if (st != TMSGD_OK) return fail("solve", st);

  tmsgd_solve_config cfg;
  cfg.method = a.method.c_str();
  cfg.p = a.p;
  cfg.ell = a.ell;
  cfg.schedule = a.schedule.c_str();
  cfg.alpha = a.alpha;
  cfg.mu = a.mu;
  cfg.project = a.project;
  cfg.radius = a.radius;
  cfg.iterations = a.iters;
  cfg.seed = a.seed;

  tmsgd_trace* tr = nullptr;
  st = tmsgd_solve(sys, &cfg, &tr);
  tmsgd_system_free(sys);
  if (st != TMSGD_OK) return fail("solve", st);

  // out is a directory; trace.csv and config.json land inside it
  const std::string trace_path = a.out + "/trace.csv";
  const std::string config_path = a.out + "/config.json";
  std::error_code ec;
  std::filesystem::create_directories(a.out, ec);
  st = tmsgd_trace_write_csv(tr, trace_path.c_str(), a.thin);
  char* config_json = nullptr;
  if (st == TMSGD_OK) st = tmsgd_trace_config_json(tr, &config_json);
  bool wrote_config = false;
  if (st == TMSGD_OK && config_json != nullptr)
    wrote_config = write_text_file(config_path, std::string(config_json) + "\n");
  tmsgd_string_free(config_json);
  const double final_error = tmsgd_trace_final_error(tr);
  tmsgd_trace_free(tr);
  if (st != TMSGD_OK) return fail("solve", st);
  if (!wrote_config) {
    std::fprintf(stderr, "error: cannot write %s\n", config_path.c_str());
    std::printf("RESULT solve status=fail\n");
    return 2;
  }
  std::printf("final error: %.17g\n", final_error);
  std::printf("RESULT solve status=ok method=%s final=%.17g trace=%s config=%s\n",
              a.method.c_str(), final_error, trace_path.c_str(),
              config_path.c_str());
  return 0;
}

struct CheckArgs {
  std::string suite = "all";
  std::string options;  // raw JSON overrides
  std::string report;   // optional report path
  std::vector<size_t> ells;
  std::vector<double> ps;
  size_t m = 0, n = 0;
  uint64_t seed = 0;
  bool seed_set = false;
};

int run_check(CheckArgs& a) {
  nlohmann::json opt = nlohmann::json::object();
  if (!a.options.empty()) {
    try {
      opt = nlohmann::json::parse(a.options);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: --options parse error: %s\n", e.what());
      return 1;
    }
  }
  if (a.m != 0) opt["m"] = a.m;
  if (a.n != 0) opt["n"] = a.n;
  if (!a.ells.empty()) opt["ells"] = a.ells;
  if (!a.ps.empty()) opt["ps"] = a.ps;
  if (a.seed_set) opt["seed"] = a.seed;

  char* report = nullptr;
  int all_pass = 0;
  const std::string opt_text = opt.dump();
  const tmsgd_status st =
      tmsgd_check_run(a.suite.c_str(), opt_text.c_str(), &report, &all_pass);
  if (st != TMSGD_OK) {
    tmsgd_string_free(report);
    return fail("check", st);
  }
  if (!a.report.empty()) {
    if (!write_text_file(a.report, std::string(report) + "\n")) {
      std::fprintf(stderr, "error: cannot write %s\n", a.report.c_str());
      tmsgd_string_free(report);
      std::printf("RESULT check status=fail\n");
      return 2;
    }
  } else {
    std::printf("%s\n", report);
  }
  tmsgd_string_free(report);
  std::printf("RESULT check status=%s suite=%s\n", all_pass ? "ok" : "fail",
              a.suite.c_str());
  return all_pass ? 0 : 2;
}

struct BenchArgs {
  std::string preset;
  std::string spec;
  std::string out;
  size_t replications = 0;
  size_t iters = 0;
  uint64_t seed = 0;
  bool seed_set = false;
  size_t workers = 1;
  size_t thin = 1;
};

int run_bench(BenchArgs& a) {
  if (a.preset.empty() == a.spec.empty()) {
    std::fprintf(stderr, "error: give exactly one of --preset or --spec\n");
    return 1;
  }
  if (!resolve_out(a.out, "bench")) return 1;
  nlohmann::json overrides = nlohmann::json::object();
  if (a.replications != 0) overrides["replications"] = a.replications;
  if (a.iters != 0) overrides["iterations"] = a.iters;
  if (a.seed_set) overrides["seed"] = a.seed;
  overrides["workers"] = a.workers;
  overrides["thin"] = a.thin;

  const std::string target = a.preset.empty() ? a.spec : a.preset;
  char* summary = nullptr;
  const tmsgd_status st = tmsgd_bench_run(target.c_str(), a.out.c_str(),
                                          overrides.dump().c_str(), &summary);
  if (st != TMSGD_OK) {
    tmsgd_string_free(summary);
    return fail("bench", st);
  }
  size_t cells = 0;
  try {
    const nlohmann::json s = nlohmann::json::parse(summary);
    for (const auto& cell : s.at("cells")) {
      cells++;
      std::string line = "cell p=" + cell.at("p").dump() +
                         " ell=" + cell.at("ell").dump() +
                         " best=" + cell.at("best").get<std::string>();
      for (const auto& [mth, err] : cell.at("final_mean_error").items())
        line += " " + mth + "=" + err.dump();
      std::printf("%s\n", line.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: summary parse error: %s\n", e.what());
    tmsgd_string_free(summary);
    std::printf("RESULT bench status=fail\n");
    return 2;
  }
  tmsgd_string_free(summary);
  std::printf("RESULT bench status=ok target=%s cells=%zu out=%s\n",
              target.c_str(), cells, a.out.c_str());
  return 0;
}

struct CgmArgs {
  std::string input;
  std::string schema;
  std::string out;
  size_t readings = 5;
  double window_seconds = 300.0;
  double missing_frac = 0.4;
  double alpha = 1e-3;
  size_t iters = 0;
  uint64_t seed = 1;
  double reject_cap = 0.1;
  size_t thin = 1;
};

int run_cgm(CgmArgs& a) {
  if (!resolve_out(a.out, "cgm")) return 1;
  nlohmann::json opt;
  opt["readings_per_window"] = a.readings;
  opt["window_span_seconds"] = a.window_seconds;
  opt["missing_fraction"] = a.missing_frac;
  opt["alpha"] = a.alpha;
  opt["iterations"] = a.iters;
  opt["seed"] = a.seed;
  opt["reject_cap"] = a.reject_cap;
  opt["thin"] = a.thin;

  char* summary = nullptr;
  const tmsgd_status st = tmsgd_cgm_run(a.input.c_str(), a.schema.c_str(),
                                        a.out.c_str(), opt.dump().c_str(),
                                        &summary);
  if (st != TMSGD_OK) {
    tmsgd_string_free(summary);
    return fail("cgm", st);
  }
  std::string windows = "?", p = "?";
  try {
    const nlohmann::json s = nlohmann::json::parse(summary);
    windows = s.at("windows").dump();
    p = s.at("p").dump();
    for (const auto& [run, err] : s.at("final_errors").items())
      std::printf("%s final=%s\n", run.c_str(), err.dump().c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: summary parse error: %s\n", e.what());
    tmsgd_string_free(summary);
    std::printf("RESULT cgm status=fail\n");
    return 2;
  }
  tmsgd_string_free(summary);
  std::printf("RESULT cgm status=ok windows=%s p=%s out=%s\n", windows.c_str(),
              p.c_str(), a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic solvers for least-squares with tuple-missing data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tmsgd_version());

  GenArgs gen;
  CLI::App* cgen = app.add_subcommand("gen", "generate a Gaussian system");
  cgen->add_option("--m", gen.m, "rows")->required();
  cgen->add_option("--n", gen.n, "columns")->required();
  cgen->add_option("--seed", gen.seed, "rng seed");
  cgen->add_option("--out", gen.out, "output directory");

  SolveArgs solve;
  CLI::App* csolve = app.add_subcommand("solve", "run a solver on a system");
  csolve->add_option("--in", solve.in, "system directory (A.txt, y.txt, xstar.txt)")
      ->required();
  csolve->add_option("--method", solve.method, "sgd | msgd | tuple-msgd");
  csolve->add_option("--p", solve.p, "tuple presence probability");
  csolve->add_option("--ell", solve.ell, "tuple length");
  csolve->add_option("--schedule", solve.schedule, "fixed | inv-mu-k");
  csolve->add_option("--alpha", solve.alpha, "fixed step size");
  csolve->add_option("--mu", solve.mu, "inv-mu-k constant (0 = compute)");
  csolve->add_option("--project", solve.project,
                     "-1 auto, 0 off, 1 on (ball of --radius)");
  csolve->add_option("--radius", solve.radius, "projection radius (0 = auto)");
  csolve->add_option("--iters", solve.iters, "iteration count")->required();
  csolve->add_option("--seed", solve.seed, "rng seed");
  csolve->add_option("--thin", solve.thin, "trace thinning stride");
  csolve->add_option("--out", solve.out, "output directory");

  CheckArgs check;
  CLI::App* ccheck = app.add_subcommand("check", "run verification oracles");
  ccheck->add_option("--suite", check.suite,
                     "all | unbiased | bias | bound | convergence");
  ccheck->add_option("--options", check.options, "options JSON overrides");
  ccheck->add_option("--report", check.report, "write report JSON here");
  ccheck->add_option("--m", check.m, "instance rows");
  ccheck->add_option("--n", check.n, "instance columns");
  ccheck->add_option("--ell", check.ells, "tuple lengths to test");
  ccheck->add_option("--p", check.ps, "presence probabilities to test");
  ccheck->add_option("--seed", check.seed, "rng seed")
      ->each([&check](const std::string&) { check.seed_set = true; });

  BenchArgs bench;
  CLI::App* cbench = app.add_subcommand("bench", "run an experiment grid");
  cbench->add_option("--preset", bench.preset,
                     "fig1 | fig2 | fig3 | fig1-mini | fig2-mini | fig3-mini");
  cbench->add_option("--spec", bench.spec, "experiment spec JSON file");
  cbench->add_option("--out", bench.out, "output directory");
  cbench->add_option("--replications", bench.replications,
                     "override replication count");
  cbench->add_option("--iters", bench.iters, "override iteration count");
  cbench->add_option("--seed", bench.seed, "override base seed")
      ->each([&bench](const std::string&) { bench.seed_set = true; });
  cbench->add_option("--workers", bench.workers, "parallel replication workers");
  cbench->add_option("--thin", bench.thin, "trace thinning stride");

  CgmArgs cgm;
  CLI::App* ccgm = app.add_subcommand("cgm", "windowed sensor pipeline");
  ccgm->add_option("--input", cgm.input, "sensor CSV")->required();
  ccgm->add_option("--schema", cgm.schema, "column schema JSON")->required();
  ccgm->add_option("--out", cgm.out, "output directory");
  ccgm->add_option("--readings", cgm.readings, "readings per window");
  ccgm->add_option("--window-seconds", cgm.window_seconds, "window span");
  ccgm->add_option("--missing-frac", cgm.missing_frac,
                   "target missing fraction");
  ccgm->add_option("--alpha", cgm.alpha, "fixed step size");
  ccgm->add_option("--iters", cgm.iters, "iteration count (0 = 5x windows)");
  ccgm->add_option("--seed", cgm.seed, "rng seed");
  ccgm->add_option("--reject-cap", cgm.reject_cap,
                   "max tolerated malformed-row fraction");
  ccgm->add_option("--thin", cgm.thin, "trace thinning stride");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (app.got_subcommand(cgen)) return run_gen(gen);
  if (app.got_subcommand(csolve)) return run_solve(solve);
  if (app.got_subcommand(ccheck)) return run_check(check);
  if (app.got_subcommand(cbench)) return run_bench(bench);
  if (app.got_subcommand(ccgm)) return run_cgm(cgm);
  return 1;
}
