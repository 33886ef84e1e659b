#include "tmsgd.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "core/cgm.hpp"
#include "core/experiment.hpp"
#include "core/linear_system.hpp"
#include "core/solver.hpp"
#include "core/theory.hpp"
#include "core/util.hpp"

#include "json.hpp"

struct tmsgd_system {
  tmsgd::LinearSystem sys;
};

struct tmsgd_trace {
  tmsgd::ErrorTrace tr;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
tmsgd_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return TMSGD_OK;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return TMSGD_ERR_INVALID_ARGUMENT;
  } catch (const tmsgd::io_error& e) {
    g_last_error = e.what();
    return TMSGD_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TMSGD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return TMSGD_ERR_INTERNAL;
  }
}

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

extern "C" {

const char* tmsgd_version(void) { return "1.0.0"; }

const char* tmsgd_last_error(void) { return g_last_error.c_str(); }

void tmsgd_string_free(char* s) { std::free(s); }

tmsgd_status tmsgd_system_generate(size_t m, size_t n, uint64_t seed,
                                   tmsgd_system** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    auto* h = new tmsgd_system{tmsgd::generate_gaussian_system(m, n, seed)};
    *out = h;
  });
}

tmsgd_status tmsgd_system_load(const char* dir, tmsgd_system** out) {
  return guarded([&] {
    require(dir != nullptr && out != nullptr, "dir and out must not be null");
    auto* h = new tmsgd_system{tmsgd::load_system(dir)};
    *out = h;
  });
}

tmsgd_status tmsgd_system_save(const tmsgd_system* sys, const char* dir) {
  return guarded([&] {
    require(sys != nullptr && dir != nullptr, "sys and dir must not be null");
    tmsgd::save_system(sys->sys, dir);
  });
}

tmsgd_status tmsgd_system_dims(const tmsgd_system* sys, size_t* m, size_t* n) {
  return guarded([&] {
    require(sys != nullptr && m != nullptr && n != nullptr,
            "sys, m and n must not be null");
    *m = sys->sys.A.rows;
    *n = sys->sys.A.cols;
  });
}

void tmsgd_system_free(tmsgd_system* sys) { delete sys; }

tmsgd_status tmsgd_solve(const tmsgd_system* sys, const tmsgd_solve_config* cfg,
                         tmsgd_trace** out) {
  return guarded([&] {
    require(sys != nullptr && cfg != nullptr && out != nullptr,
            "sys, cfg and out must not be null");
    require(cfg->method != nullptr, "cfg->method must not be null");

    tmsgd::SolverConfig sc;
    sc.method = tmsgd::method_from_string(cfg->method);
    sc.model = {cfg->ell, cfg->p};
    const std::string schedule =
        cfg->schedule == nullptr ? "fixed" : cfg->schedule;
    if (schedule == "fixed") {
      sc.schedule = {tmsgd::ScheduleKind::fixed, cfg->alpha, 0.0};
    } else if (schedule == "inv-mu-k") {
      double mu = cfg->mu;
      if (mu <= 0.0) {
        const tmsgd::MuResult mr = tmsgd::strong_convexity_mu(sys->sys.A);
        require(!mr.rank_deficient,
                "system is rank deficient; supply mu explicitly");
        mu = mr.mu;
      }
      sc.schedule = {tmsgd::ScheduleKind::inv_mu_k, 0.0, mu};
    } else {
      throw std::invalid_argument("unknown schedule: " + schedule);
    }
    const bool project = cfg->project < 0
                             ? sc.schedule.kind == tmsgd::ScheduleKind::inv_mu_k
                             : cfg->project > 0;
    if (project) {
      double radius = cfg->radius;
      if (radius <= 0.0)
        radius = 2.0 * std::sqrt(tmsgd::norm_sq(sys->sys.x_star));
      sc.projection = {true, radius};
    }
    sc.iterations = cfg->iterations;
    sc.seed = cfg->seed;

    auto* h = new tmsgd_trace{tmsgd::run_solver(sys->sys, sc)};
    *out = h;
  });
}

size_t tmsgd_trace_length(const tmsgd_trace* tr) {
  return tr == nullptr ? 0 : tr->tr.errors.size();
}

tmsgd_status tmsgd_trace_errors(const tmsgd_trace* tr, double* buf, size_t len) {
  return guarded([&] {
    require(tr != nullptr && buf != nullptr, "tr and buf must not be null");
    require(len >= tr->tr.errors.size(), "buffer too small for trace");
    std::memcpy(buf, tr->tr.errors.data(),
                tr->tr.errors.size() * sizeof(double));
  });
}

double tmsgd_trace_final_error(const tmsgd_trace* tr) {
  if (tr == nullptr || tr->tr.errors.empty()) return -1.0;
  return tr->tr.errors.back();
}

tmsgd_status tmsgd_trace_write_csv(const tmsgd_trace* tr, const char* path,
                                   size_t thin) {
  return guarded([&] {
    require(tr != nullptr && path != nullptr, "tr and path must not be null");
    tmsgd::write_trace_csv(tr->tr, path, thin == 0 ? 1 : thin);
  });
}

tmsgd_status tmsgd_trace_config_json(const tmsgd_trace* tr, char** out) {
  return guarded([&] {
    require(tr != nullptr && out != nullptr, "tr and out must not be null");
    *out = dup_string(tr->tr.config_json);
    require(*out != nullptr, "allocation failed");
  });
}

void tmsgd_trace_free(tmsgd_trace* tr) { delete tr; }

tmsgd_status tmsgd_check_run(const char* suite, const char* options_json,
                             char** report_json, int* all_pass) {
  return guarded([&] {
    require(suite != nullptr, "suite must not be null");
    const tmsgd::CheckOptions opt = tmsgd::check_options_from_json(
        options_json == nullptr ? "" : options_json);
    const tmsgd::CheckReport report = tmsgd::run_checks(suite, opt);
    if (all_pass != nullptr) *all_pass = report.all_pass ? 1 : 0;
    if (report_json != nullptr) {
      *report_json = dup_string(report.json);
      require(*report_json != nullptr, "allocation failed");
    }
  });
}

tmsgd_status tmsgd_bench_run(const char* preset_or_path, const char* out_dir,
                             const char* overrides_json, char** summary_json) {
  return guarded([&] {
    require(preset_or_path != nullptr && out_dir != nullptr,
            "preset_or_path and out_dir must not be null");
    tmsgd::ExperimentSpec spec =
        tmsgd::is_preset(preset_or_path)
            ? tmsgd::preset(preset_or_path)
            : tmsgd::spec_from_json(tmsgd::read_file(preset_or_path));

    std::size_t workers = 1, thin = 1;
    if (overrides_json != nullptr && overrides_json[0] != '\0') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(overrides_json);
      } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("overrides parse error: ") +
                                    e.what());
      }
      try {
        spec.replications = j.value("replications", spec.replications);
        spec.seed = j.value("seed", spec.seed);
        spec.iterations = j.value("iterations", spec.iterations);
        workers = j.value("workers", workers);
        thin = j.value("thin", thin);
      } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("overrides field error: ") +
                                    e.what());
      }
    }
    const tmsgd::ExperimentResult res =
        tmsgd::run_experiment(spec, out_dir, workers, thin);
    if (summary_json != nullptr) {
      *summary_json = dup_string(res.summary_json);
      require(*summary_json != nullptr, "allocation failed");
    }
  });
}

tmsgd_status tmsgd_cgm_run(const char* input_csv, const char* schema_path,
                           const char* out_dir, const char* options_json,
                           char** summary_json) {
  return guarded([&] {
    require(input_csv != nullptr && schema_path != nullptr && out_dir != nullptr,
            "input_csv, schema_path and out_dir must not be null");
    const tmsgd::CgmOptions opt = tmsgd::cgm_options_from_json(
        options_json == nullptr ? "" : options_json);
    const tmsgd::CgmRunResult res =
        tmsgd::run_cgm(input_csv, schema_path, out_dir, opt);
    if (summary_json != nullptr) {
      *summary_json = dup_string(res.summary_json);
      require(*summary_json != nullptr, "allocation failed");
    }
  });
}

}  // extern "C"
