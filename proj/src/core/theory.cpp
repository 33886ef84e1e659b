#include "core/theory.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "json.hpp"

#include "core/util.hpp"

namespace tmsgd {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

void direction_into(Method method, const double* arow, std::size_t n, double y,
                    double p, std::size_t ell, const Vec& x, Vec& h) {
  switch (method) {
    case Method::sgd: {
      const double r = dot(arow, x.data(), n) - y;
      for (std::size_t c = 0; c < n; ++c) h[c] = r * arow[c];
      return;
    }
    case Method::msgd: {
      const double r = (dot(arow, x.data(), n) - p * y) / (p * p);
      const double ccoef = (1.0 - p) / (p * p);
      for (std::size_t c = 0; c < n; ++c)
        h[c] = r * arow[c] - ccoef * (arow[c] * (arow[c] * x[c]));
      return;
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
      return;
    }
  }
}

}  // namespace

MuResult strong_convexity_mu(const DenseMatrix& A) {
  check_arg(A.rows >= 1 && A.cols >= 1, "matrix must be non-empty");
  check_arg(A.rows >= A.cols, "mu is defined for overdetermined systems");
  RowMajorMap map(A.data.data(), static_cast<Eigen::Index>(A.rows),
                  static_cast<Eigen::Index>(A.cols));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(map);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  const double smax = sv(0);
  MuResult out;
  out.mu = smin * smin / static_cast<double>(A.rows);
  const double tol = std::numeric_limits<double>::epsilon() *
                     static_cast<double>(std::max(A.rows, A.cols)) * smax;
  out.rank_deficient = smin <= tol;
  return out;
}

double bound_G(const LinearSystem& sys, double p, double B) {
  validate_system(sys);
  check_arg(p > 0.0 && p <= 1.0, "p must be in (0, 1]");
  check_arg(B >= 0.0, "B must be >= 0");
  const std::size_t m = sys.A.rows, n = sys.A.cols;
  double sum4 = 0.0, sumy2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r2 = dot(sys.A.row(i), sys.A.row(i), n);
    sum4 += r2 * r2;
    sumy2 += sys.y[i] * sys.y[i] * r2;
  }
  const double md = static_cast<double>(m);
  return 2.0 * B / (md * p * p * p) * sum4 + 2.0 / (md * p) * sumy2;
}

double convergence_bound(double G, double mu, std::size_t k) {
  check_arg(G >= 0.0, "G must be >= 0");
  check_arg(mu > 0.0, "convergence bound requires mu > 0");
  check_arg(k >= 1, "k must be >= 1");
  return 17.0 * G * (1.0 + std::log(static_cast<double>(k))) /
         (mu * mu * static_cast<double>(k));
}

Vec bias_term(const DenseMatrix& A, double p, std::size_t ell, const Vec& x) {
  check_arg(A.rows >= 1 && A.cols >= 1, "matrix must be non-empty");
  TupleMissingModel model{ell, p};
  validate_model(model, A.cols);
  check_arg(x.size() == A.cols, "x length must equal column count");
  const std::size_t m = A.rows, n = A.cols;
  Vec out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = A.row(i);
    for (std::size_t t = 0; t < n / ell; ++t) {
      const std::size_t lo = t * ell, hi = lo + ell;
      double s = 0.0;
      for (std::size_t c = lo; c < hi; ++c) s += row[c] * x[c];
      // (L - I) (.) (A_i^T A_i) x restricted to this tuple
      for (std::size_t c = lo; c < hi; ++c)
        out[c] += row[c] * (s - row[c] * x[c]);
    }
  }
  const double scale = (1.0 - p) / (p * static_cast<double>(m));
  for (double& v : out) v *= scale;
  return out;
}

Vec exact_expected_update(const LinearSystem& sys, Method method,
                          const TupleMissingModel& model, const Vec& x) {
  validate_system(sys);
  const std::size_t m = sys.A.rows, n = sys.A.cols;
  validate_model(model, n);
  check_arg(x.size() == n, "x length must equal column count");
  check_arg(n / model.ell <= 12,
            "exact enumeration capped at n/ell <= 12 tuples");
  check_arg(m <= 10000, "exact enumeration capped at m <= 10000 rows");

  const MaskEnumeration e = enumerate_masks(n, model.ell, model.p);
  Vec acc(n, 0.0), comp(n, 0.0), arow(n, 0.0), h(n, 0.0);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t mi = 0; mi < e.masks.size(); ++mi) {
    const double w = e.probs[mi] * inv_m;
    if (w == 0.0) continue;
    const std::uint8_t* mask = e.masks[mi].data();
    for (std::size_t i = 0; i < m; ++i) {
      apply_mask_row(sys.A.row(i), mask, n, arow.data());
      direction_into(method, arow.data(), n, sys.y[i], model.p, model.ell, x, h);
      // compensated (Neumaier) accumulation: the identities this oracle
      // certifies cancel across ~2^(n/ell) * m terms, and a plain sum leaves
      // rounding residue above the tolerances they are checked at
      for (std::size_t c = 0; c < n; ++c) {
        const double t = w * h[c];
        const double s = acc[c] + t;
        if (std::abs(acc[c]) >= std::abs(t))
          comp[c] += (acc[c] - s) + t;
        else
          comp[c] += (t - s) + acc[c];
        acc[c] = s;
      }
    }
  }
  for (std::size_t c = 0; c < n; ++c) acc[c] += comp[c];
  return acc;
}

McUpdate mc_expected_update(const LinearSystem& sys, Method method,
                            const TupleMissingModel& model, const Vec& x,
                            std::size_t samples, std::uint64_t seed) {
  validate_system(sys);
  const std::size_t m = sys.A.rows, n = sys.A.cols;
  validate_model(model, n);
  check_arg(x.size() == n, "x length must equal column count");
  check_arg(samples >= 2, "need at least 2 samples");

  Rng rng(seed);
  Vec sum(n, 0.0), sumsq(n, 0.0), arow(n, 0.0), h(n, 0.0);
  std::vector<std::uint8_t> mask(n, 1);
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i = rng.uniform_index(m);
    sample_mask_row(model, n, rng, mask.data());
    apply_mask_row(sys.A.row(i), mask.data(), n, arow.data());
    direction_into(method, arow.data(), n, sys.y[i], model.p, model.ell, x, h);
    for (std::size_t c = 0; c < n; ++c) {
      sum[c] += h[c];
      sumsq[c] += h[c] * h[c];
    }
  }
  McUpdate out;
  out.samples = samples;
  out.mean.resize(n);
  out.stderr_coord.resize(n);
  const double ns = static_cast<double>(samples);
  for (std::size_t c = 0; c < n; ++c) {
    out.mean[c] = sum[c] / ns;
    const double var =
        std::max(0.0, (sumsq[c] - sum[c] * sum[c] / ns) / (ns - 1.0));
    out.stderr_coord[c] = std::sqrt(var / ns);
  }
  return out;
}

double mc_second_moment(const LinearSystem& sys, const TupleMissingModel& model,
                        const Vec& x, std::size_t samples, std::uint64_t seed) {
  validate_system(sys);
  const std::size_t m = sys.A.rows, n = sys.A.cols;
  validate_model(model, n);
  check_arg(x.size() == n, "x length must equal column count");
  check_arg(samples >= 1, "need at least 1 sample");

  Rng rng(seed);
  Vec arow(n, 0.0), h(n, 0.0);
  std::vector<std::uint8_t> mask(n, 1);
  double acc = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i = rng.uniform_index(m);
    sample_mask_row(model, n, rng, mask.data());
    apply_mask_row(sys.A.row(i), mask.data(), n, arow.data());
    direction_into(Method::tuple_msgd, arow.data(), n, sys.y[i], model.p,
                   model.ell, x, h);
    acc += dot(h.data(), h.data(), n);
  }
  return acc / static_cast<double>(samples);
}

namespace {

// Tolerance convention: relative with an absolute floor of 1e-12.
struct Dev {
  double abs = 0.0;
  double scale = 0.0;
  bool within(double rtol) const { return abs <= rtol * scale + 1e-12; }
};

Dev deviation(const Vec& a, const Vec& b) {
  Dev d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d.abs = std::max(d.abs, std::abs(a[i] - b[i]));
    d.scale = std::max({d.scale, std::abs(a[i]), std::abs(b[i])});
  }
  return d;
}

double max_abs(const Vec& a) {
  double v = 0.0;
  for (double x : a) v = std::max(v, std::abs(x));
  return v;
}

Vec random_x(std::size_t n, Rng& rng, double scale = 1.0) {
  Vec x(n);
  for (double& v : x) v = scale * rng.normal();
  return x;
}

}  // namespace

CheckOptions check_options_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = json_text.empty() ? nlohmann::json::object()
                          : nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("options parse error: ") + e.what());
  }
  try {
    CheckOptions o;
    o.m = j.value("m", o.m);
    o.n = j.value("n", o.n);
    o.ells = j.value("ells", o.ells);
    o.ps = j.value("ps", o.ps);
    o.seed = j.value("seed", o.seed);
    o.x_draws = j.value("x_draws", o.x_draws);
    o.mc_samples = j.value("mc_samples", o.mc_samples);
    o.conv_m = j.value("conv_m", o.conv_m);
    o.conv_n = j.value("conv_n", o.conv_n);
    o.conv_ell = j.value("conv_ell", o.conv_ell);
    o.conv_p = j.value("conv_p", o.conv_p);
    o.conv_reps = j.value("conv_reps", o.conv_reps);
    o.conv_maxk = j.value("conv_maxk", o.conv_maxk);
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("options field error: ") + e.what());
  }
}

CheckReport run_checks(const std::string& suite, const CheckOptions& opt) {
  const bool all = suite == "all";
  check_arg(all || suite == "unbiased" || suite == "bias" || suite == "bound" ||
                suite == "convergence",
            "unknown check suite: " + suite);

  nlohmann::json checks = nlohmann::json::array();
  bool all_pass = true;
  auto add = [&](nlohmann::json j, bool pass) {
    j["pass"] = pass;
    checks.push_back(std::move(j));
    all_pass = all_pass && pass;
  };

  const LinearSystem sys =
      generate_gaussian_system(opt.m, opt.n, mix_seed(opt.seed, 100));
  Rng xrng(mix_seed(opt.seed, 200));

  if (all || suite == "unbiased") {
    const double tol = 1e-10;
    for (std::size_t ell : opt.ells) {
      if (opt.n % ell != 0) continue;
      for (double p : opt.ps) {
        Dev worst;
        bool ok = true;
        for (std::size_t d = 0; d < opt.x_draws; ++d) {
          const Vec x = random_x(opt.n, xrng);
          const Vec h =
              exact_expected_update(sys, Method::tuple_msgd, {ell, p}, x);
          const Dev dv = deviation(h, full_gradient(sys, x));
          ok = ok && dv.within(tol);
          if (dv.abs > worst.abs) worst = dv;
        }
        add({{"name", "unbiased ell=" + std::to_string(ell) + " p=" + fmt_compact(p)},
             {"max_abs_deviation", worst.abs},
             {"scale", worst.scale},
             {"rel_tolerance", tol}},
            ok);
      }
    }
  }

  if (all || suite == "bias") {
    const double tol = 1e-10;
    for (std::size_t ell : opt.ells) {
      if (opt.n % ell != 0) continue;
      for (double p : opt.ps) {
        Dev worst;
        bool ok = true;
        double degenerate_norm = 0.0;
        for (std::size_t d = 0; d < opt.x_draws; ++d) {
          const Vec x = random_x(opt.n, xrng);
          Vec gap = exact_expected_update(sys, Method::msgd, {ell, p}, x);
          const Vec g = full_gradient(sys, x);
          for (std::size_t c = 0; c < opt.n; ++c) gap[c] -= g[c];
          const Vec predicted = bias_term(sys.A, p, ell, x);
          if (ell == 1 || p == 1.0)
            degenerate_norm = std::max(degenerate_norm, max_abs(predicted));
          const Dev dv = deviation(gap, predicted);
          ok = ok && dv.within(tol);
          if (dv.abs > worst.abs) worst = dv;
        }
        // bias_term must vanish identically when the model degenerates
        const bool pass =
            ok && (!(ell == 1 || p == 1.0) || degenerate_norm <= 1e-14);
        nlohmann::json j = {
            {"name", "bias ell=" + std::to_string(ell) + " p=" + fmt_compact(p)},
            {"max_abs_deviation", worst.abs},
            {"scale", worst.scale},
            {"rel_tolerance", tol}};
        if (ell == 1 || p == 1.0) j["degenerate_bias_norm"] = degenerate_norm;
        add(std::move(j), pass);
      }
    }
  }

  if (all || suite == "bound") {
    std::size_t ell = 1;
    for (std::size_t cand : opt.ells)
      if (opt.n % cand == 0) ell = cand;
    for (double p : opt.ps) {
      const double radius = 2.0 * std::sqrt(norm_sq(sys.x_star));
      const double B = radius * radius;
      const double G = bound_G(sys, p, B);
      double worst_ratio = 0.0;
      for (std::size_t d = 0; d < opt.x_draws; ++d) {
        Vec x = random_x(opt.n, xrng);
        x = project_ball(x, radius);
        const double est = mc_second_moment(sys, {ell, p}, x, opt.mc_samples,
                                            mix_seed(opt.seed, 300 + d));
        worst_ratio = std::max(worst_ratio, est / G);
      }
      add({{"name", "bound p=" + fmt_compact(p) + " ell=" + std::to_string(ell)},
           {"G", G},
           {"B", B},
           {"max_mc_over_G", worst_ratio}},
          worst_ratio <= 1.0);
    }
  }

  if (all || suite == "convergence") {
    const LinearSystem csys = generate_gaussian_system(
        opt.conv_m, opt.conv_n, mix_seed(opt.seed, 400));
    const MuResult mu = strong_convexity_mu(csys.A);
    const double radius = 2.0 * std::sqrt(norm_sq(csys.x_star));
    const double B = radius * radius;
    const double G = bound_G(csys, opt.conv_p, B);
    std::vector<std::size_t> ks;
    for (std::size_t k = 100; k <= opt.conv_maxk; k *= 10) ks.push_back(k);
    if (ks.empty()) ks.push_back(opt.conv_maxk);
    Vec mean_at(ks.size(), 0.0);
    for (std::size_t r = 0; r < opt.conv_reps; ++r) {
      SolverConfig cfg;
      cfg.method = Method::tuple_msgd;
      cfg.model = {opt.conv_ell, opt.conv_p};
      cfg.schedule = {ScheduleKind::inv_mu_k, 0.0, mu.mu};
      cfg.projection = {true, radius};
      cfg.iterations = ks.back();
      cfg.seed = mix_seed(opt.seed, 500 + r);
      const ErrorTrace tr = run_solver(csys, cfg);
      for (std::size_t j = 0; j < ks.size(); ++j)
        mean_at[j] += tr.errors[ks[j]];
    }
    bool pass = true;
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t j = 0; j < ks.size(); ++j) {
      mean_at[j] /= static_cast<double>(opt.conv_reps);
      const double bound = convergence_bound(G, mu.mu, ks[j]);
      points.push_back({{"k", ks[j]}, {"mean_error", mean_at[j]}, {"bound", bound}});
      pass = pass && mean_at[j] <= bound;
    }
    add({{"name", "convergence"},
         {"mu", mu.mu},
         {"G", G},
         {"B", B},
         {"points", points}},
        pass);
  }

  nlohmann::json report;
  report["suite"] = suite;
  report["all_pass"] = all_pass;
  report["options"] = {{"m", opt.m},       {"n", opt.n},
                       {"ells", opt.ells}, {"ps", opt.ps},
                       {"seed", opt.seed}, {"x_draws", opt.x_draws},
                       {"mc_samples", opt.mc_samples}};
  report["checks"] = std::move(checks);
  CheckReport out;
  out.all_pass = all_pass;
  out.json = report.dump(2);
  return out;
}

}  // namespace tmsgd
