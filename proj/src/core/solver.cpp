#include "core/solver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "core/util.hpp"

namespace tmsgd {

Method method_from_string(const std::string& name) {
  if (name == "sgd") return Method::sgd;
  if (name == "msgd") return Method::msgd;
  if (name == "tuple-msgd") return Method::tuple_msgd;
  throw std::invalid_argument("unknown method: " + name);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::sgd: return "sgd";
    case Method::msgd: return "msgd";
    case Method::tuple_msgd: return "tuple-msgd";
  }
  return "?";
}

double StepSchedule::at(std::size_t k) const {
  if (kind == ScheduleKind::fixed) return alpha;
  return 1.0 / (mu * static_cast<double>(k));
}

Vec project_ball(const Vec& x, double radius) {
  check_arg(radius > 0.0, "projection radius must be positive");
  const double nrm = std::sqrt(norm_sq(x));
  if (nrm <= radius) return x;
  Vec out = x;
  const double scale = radius / nrm;
  for (double& v : out) v *= scale;
  return out;
}

namespace {

void project_in_place(Vec& x, double radius) {
  const double nrm = std::sqrt(norm_sq(x));
  if (nrm <= radius) return;
  const double scale = radius / nrm;
  for (double& v : x) v *= scale;
}

}  // namespace

void sgd_step(const double* arow, std::size_t n, double y, double alpha,
              Vec& x) {
  const double r = dot(arow, x.data(), n) - y;
  for (std::size_t c = 0; c < n; ++c) x[c] -= alpha * (r * arow[c]);
}

void msgd_step(const double* arow, std::size_t n, double y, double p,
               double alpha, Vec& x) {
  const double r = (dot(arow, x.data(), n) - p * y) / (p * p);
  const double ccoef = (1.0 - p) / (p * p);
  for (std::size_t c = 0; c < n; ++c) {
    const double s = arow[c] * x[c];
    x[c] -= alpha * (r * arow[c] - ccoef * (arow[c] * s));
  }
}

void tuple_msgd_step(const double* arow, std::size_t n, double y, double p,
                     std::size_t ell, double alpha, Vec& x) {
  const double r = (dot(arow, x.data(), n) - p * y) / (p * p);
  const double ccoef = (1.0 - p) / (p * p);
  for (std::size_t t = 0; t < n / ell; ++t) {
    const std::size_t lo = t * ell, hi = lo + ell;
    double s = 0.0;
    for (std::size_t c = lo; c < hi; ++c) s += arow[c] * x[c];
    for (std::size_t c = lo; c < hi; ++c)
      x[c] -= alpha * (r * arow[c] - ccoef * (arow[c] * s));
  }
}

Vec update_direction(Method method, const double* arow, std::size_t n, double y,
                     double p, std::size_t ell, const Vec& x) {
  Vec h(n, 0.0);
  switch (method) {
    case Method::sgd: {
      const double r = dot(arow, x.data(), n) - y;
      for (std::size_t c = 0; c < n; ++c) h[c] = r * arow[c];
      break;
    }
    case Method::msgd: {
      const double r = (dot(arow, x.data(), n) - p * y) / (p * p);
      const double ccoef = (1.0 - p) / (p * p);
      for (std::size_t c = 0; c < n; ++c)
        h[c] = r * arow[c] - ccoef * (arow[c] * (arow[c] * x[c]));
      break;
    }
    case Method::tuple_msgd: {
      const double r = (dot(arow, x.data(), n) - p * y) / (p * p);
      const double ccoef = (1.0 - p) / (p * p);
      for (std::size_t t = 0; t < n / ell; ++t) {
        const std::size_t lo = t * ell, hi = lo + ell;
        double s = 0.0;
        for (std::size_t c = lo; c < hi; ++c) s += arow[c] * x[c];
        for (std::size_t c = lo; c < hi; ++c)
          h[c] = r * arow[c] - ccoef * (arow[c] * s);
      }
      break;
    }
  }
  return h;
}

namespace {

std::string config_to_json(const LinearSystem& sys, const SolverConfig& cfg) {
  nlohmann::json j;
  j["method"] = to_string(cfg.method);
  j["m"] = sys.A.rows;
  j["n"] = sys.A.cols;
  j["p"] = cfg.model.p;
  j["ell"] = cfg.model.ell;
  j["schedule"] =
      cfg.schedule.kind == ScheduleKind::fixed ? "fixed" : "inv-mu-k";
  if (cfg.schedule.kind == ScheduleKind::fixed)
    j["alpha"] = cfg.schedule.alpha;
  else
    j["mu"] = cfg.schedule.mu;
  j["projection"] = {{"enabled", cfg.projection.enabled},
                     {"radius", cfg.projection.enabled ? cfg.projection.radius : 0.0}};
  j["iterations"] = cfg.iterations;
  j["seed"] = cfg.seed;
  j["x0"] = cfg.x0.empty() ? "zero" : "custom";
  j["mask_source"] = cfg.fixed_mask ? "fixed" : "sampled";
  return j.dump(2);
}

}  // namespace

ErrorTrace run_solver(const LinearSystem& sys, const SolverConfig& cfg) {
  validate_system(sys);
  const std::size_t m = sys.A.rows, n = sys.A.cols;
  validate_model(cfg.model, n);
  if (cfg.schedule.kind == ScheduleKind::fixed)
    check_arg(cfg.schedule.alpha >= 0.0, "alpha must be >= 0");
  else
    check_arg(cfg.schedule.mu > 0.0, "inv-mu-k schedule requires mu > 0");
  if (cfg.projection.enabled)
    check_arg(cfg.projection.radius > 0.0, "projection radius must be positive");
  check_arg(cfg.x0.empty() || cfg.x0.size() == n, "x0 length must equal n");
  if (cfg.fixed_mask) {
    check_arg(cfg.fixed_mask->rows == m && cfg.fixed_mask->cols == n,
              "fixed mask dimensions must match the system");
    for (std::size_t i = 0; i < m; ++i) {
      const std::uint8_t* mrow = cfg.fixed_mask->row(i);
      for (std::size_t t = 0; t < n / cfg.model.ell; ++t)
        for (std::size_t c = t * cfg.model.ell; c < (t + 1) * cfg.model.ell; ++c)
          check_arg(mrow[c] == mrow[t * cfg.model.ell],
                    "fixed mask must be constant within each tuple");
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  ErrorTrace trace;
  trace.config_json = config_to_json(sys, cfg);
  trace.errors.reserve(cfg.iterations + 1);

  Vec x = cfg.x0.empty() ? Vec(n, 0.0) : cfg.x0;
  trace.errors.push_back(error_sq(x, sys.x_star));

  Rng rng(cfg.seed);
  std::vector<std::uint8_t> mask_buf(n, 1);
  Vec arow(n, 0.0);

  for (std::size_t k = 1; k <= cfg.iterations; ++k) {
    const std::size_t i = rng.uniform_index(m);
    const std::uint8_t* mrow;
    if (cfg.fixed_mask) {
      mrow = cfg.fixed_mask->row(i);
    } else {
      sample_mask_row(cfg.model, n, rng, mask_buf.data());
      mrow = mask_buf.data();
    }
    apply_mask_row(sys.A.row(i), mrow, n, arow.data());
    const double alpha = cfg.schedule.at(k);
    switch (cfg.method) {
      case Method::sgd:
        sgd_step(arow.data(), n, sys.y[i], alpha, x);
        break;
      case Method::msgd:
        msgd_step(arow.data(), n, sys.y[i], cfg.model.p, alpha, x);
        break;
      case Method::tuple_msgd:
        tuple_msgd_step(arow.data(), n, sys.y[i], cfg.model.p, cfg.model.ell,
                        alpha, x);
        break;
    }
    if (cfg.projection.enabled) project_in_place(x, cfg.projection.radius);
    trace.errors.push_back(error_sq(x, sys.x_star));
  }

  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return trace;
}

void write_trace_csv(const ErrorTrace& trace, const std::string& path,
                     std::size_t thin) {
  check_arg(thin >= 1, "thin must be >= 1");
  std::string out = "iteration,error\n";
  out.reserve(trace.errors.size() / thin * 24 + 32);
  const std::size_t last = trace.errors.size() - 1;
  for (std::size_t k = 0; k < trace.errors.size(); ++k) {
    if (k % thin != 0 && k != last) continue;
    out += std::to_string(k);
    out += ',';
    out += fmt_full(trace.errors[k]);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<std::pair<std::size_t, double>> read_trace_csv(
    const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "iteration,error")
    throw io_error("bad trace header in " + path);
  std::vector<std::pair<std::size_t, double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw io_error("bad trace row in " + path);
    rows.emplace_back(std::stoull(line.substr(0, comma)),
                      std::stod(line.substr(comma + 1)));
  }
  return rows;
}

}  // namespace tmsgd
