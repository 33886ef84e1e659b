#include "core/cgm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>

#include <Eigen/Dense>
#include "json.hpp"

#include "core/linear_system.hpp"
#include "core/util.hpp"

namespace tmsgd {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_double(const std::string& cell, double* out) {
  if (cell.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace

CgmSchema schema_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw io_error(std::string("schema parse error: ") + e.what());
  }
  try {
    CgmSchema s;
    s.timestamp = j.at("timestamp").get<std::string>();
    s.features = j.at("features").get<std::vector<std::string>>();
    s.noise = j.at("noise").get<std::string>();
    s.glucose = j.at("glucose").get<std::string>();
    if (s.features.empty())
      throw io_error("schema needs at least one feature column");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("schema field error: ") + e.what());
  }
}

SensorLoad load_sensor_csv(const std::string& path, const CgmSchema& schema,
                           double reject_cap) {
  check_arg(reject_cap >= 0.0 && reject_cap <= 1.0,
            "reject_cap must be in [0, 1]");
  const std::string text = read_file(path);
  SensorLoad out;
  if (text.empty()) return out;

  std::size_t pos = 0, lineno = 0;
  auto next_line = [&](std::string* line) {
    if (pos >= text.size()) return false;
    const std::size_t nl = text.find('\n', pos);
    *line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++lineno;
    return true;
  };

  std::string line;
  if (!next_line(&line)) return out;
  const std::vector<std::string> header = split_csv(line);
  auto col_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw io_error("schema column not found in header: " + name);
  };
  const std::size_t ts_col = col_index(schema.timestamp);
  const std::size_t noise_col = col_index(schema.noise);
  const std::size_t glu_col = col_index(schema.glucose);
  std::vector<std::size_t> feat_cols;
  for (const auto& f : schema.features) feat_cols.push_back(col_index(f));

  struct Parsed {
    std::size_t line;
    SensorRecord rec;
  };
  std::vector<Parsed> rows;
  while (next_line(&line)) {
    if (trim(line).empty()) continue;
    ++out.total_rows;
    const std::vector<std::string> cells = split_csv(line);
    std::size_t need = std::max({ts_col, noise_col, glu_col});
    for (std::size_t c : feat_cols) need = std::max(need, c);
    if (cells.size() <= need) {
      out.rejects.emplace_back(lineno, "too few cells");
      continue;
    }
    SensorRecord rec;
    std::string bad;
    if (!parse_double(cells[ts_col], &rec.timestamp)) bad = schema.timestamp;
    if (bad.empty() && !parse_double(cells[noise_col], &rec.noise))
      bad = schema.noise;
    if (bad.empty()) {
      for (std::size_t fi = 0; fi < feat_cols.size(); ++fi) {
        double v;
        if (!parse_double(cells[feat_cols[fi]], &v)) {
          bad = schema.features[fi];
          break;
        }
        rec.features.push_back(v);
      }
    }
    if (bad.empty() && !cells[glu_col].empty()) {
      if (parse_double(cells[glu_col], &rec.glucose))
        rec.has_glucose = true;
      else
        bad = schema.glucose;
    }
    if (!bad.empty()) {
      out.rejects.emplace_back(lineno, "non-numeric " + bad);
      continue;
    }
    rows.push_back({lineno, std::move(rec)});
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Parsed& a, const Parsed& b) {
                     return a.rec.timestamp < b.rec.timestamp;
                   });
  out.records.reserve(rows.size());
  for (auto& r : rows) {
    if (!out.records.empty() &&
        !(out.records.back().timestamp < r.rec.timestamp)) {
      out.rejects.emplace_back(r.line, "duplicate timestamp");
      continue;
    }
    out.records.push_back(std::move(r.rec));
  }

  if (out.total_rows > 0 &&
      static_cast<double>(out.rejects.size()) >
          reject_cap * static_cast<double>(out.total_rows)) {
    throw io_error("too many malformed rows: " +
                   std::to_string(out.rejects.size()) + " of " +
                   std::to_string(out.total_rows));
  }
  return out;
}

WindowedSystem window_features(const std::vector<SensorRecord>& records,
                               std::size_t readings_per_window,
                               double window_span_seconds) {
  check_arg(readings_per_window >= 1, "readings_per_window must be >= 1");
  check_arg(window_span_seconds > 0.0, "window span must be positive");
  WindowedSystem out;
  out.readings_per_window = readings_per_window;
  if (records.empty()) {
    out.C = DenseMatrix(0, 0);
    out.reading_noise = DenseMatrix(0, 0);
    return out;
  }
  const std::size_t f = records.front().features.size();
  for (const auto& r : records)
    check_arg(r.features.size() == f, "feature arity must be constant");
  out.ell = f;

  const double t0 = records.front().timestamp;
  std::vector<std::vector<std::size_t>> windows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto w = static_cast<std::size_t>(
        std::floor((records[i].timestamp - t0) / window_span_seconds));
    if (w >= windows.size()) windows.resize(w + 1);
    windows[w].push_back(i);
  }

  std::vector<std::pair<double, double>> glucose_events;  // (time, value)
  for (const auto& r : records)
    if (r.has_glucose) glucose_events.emplace_back(r.timestamp, r.glucose);

  const std::size_t width = readings_per_window * f;
  std::vector<double> cdata, ndata;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& idx = windows[w];
    const double end_t = t0 + static_cast<double>(w + 1) * window_span_seconds;
    if (idx.size() < readings_per_window) {
      ++out.dropped_windows;
      continue;
    }
    // last glucose reading at or before the window end
    auto it = std::upper_bound(
        glucose_events.begin(), glucose_events.end(), end_t,
        [](double t, const std::pair<double, double>& e) { return t < e.first; });
    if (it == glucose_events.begin()) {
      ++out.dropped_windows;
      continue;
    }
    out.g.push_back(std::prev(it)->second);
    for (std::size_t j = 0; j < readings_per_window; ++j) {
      const std::size_t k =
          readings_per_window == 1
              ? 0
              : j * (idx.size() - 1) / (readings_per_window - 1);
      const SensorRecord& rec = records[idx[k]];
      cdata.insert(cdata.end(), rec.features.begin(), rec.features.end());
      ndata.push_back(rec.noise);
    }
  }

  out.C = DenseMatrix(out.g.size(), width);
  out.C.data = std::move(cdata);
  out.reading_noise = DenseMatrix(out.g.size(), readings_per_window);
  out.reading_noise.data = std::move(ndata);
  return out;
}

NoiseMask noise_threshold_mask(const DenseMatrix& reading_noise, std::size_t f,
                               double target_missing_fraction) {
  check_arg(f >= 1, "feature arity must be >= 1");
  check_arg(target_missing_fraction >= 0.0 && target_missing_fraction < 1.0,
            "target missing fraction must be in [0, 1)");
  NoiseMask out;
  const std::size_t rows = reading_noise.rows;
  const std::size_t rpw = reading_noise.cols;
  const std::size_t total = rows * rpw;
  out.mask = MaskMatrix(rows, rpw * f);
  if (total == 0) return out;

  std::vector<double> sorted(reading_noise.data);
  std::sort(sorted.begin(), sorted.end());
  const double q = 1.0 - target_missing_fraction;
  // small slack so q * total at an exact integer stays that integer
  auto k = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(total) - 1e-9));
  k = std::min(std::max<std::size_t>(k, 1), total);
  out.threshold = sorted[k - 1];

  std::size_t masked = 0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < rpw; ++j)
      if (reading_noise.at(i, j) > out.threshold) {
        ++masked;
        for (std::size_t c = j * f; c < (j + 1) * f; ++c)
          out.mask.row(i)[c] = 0;
      }
  out.realized_missing =
      static_cast<double>(masked) / static_cast<double>(total);
  return out;
}

void apply_noise_mask(WindowedSystem& sys, double target_missing_fraction) {
  NoiseMask nm =
      noise_threshold_mask(sys.reading_noise, sys.ell, target_missing_fraction);
  sys.mask = std::move(nm.mask);
  sys.threshold = nm.threshold;
  sys.realized_missing = nm.realized_missing;
}

ConsistentSystem consistent_rhs(const DenseMatrix& C, const Vec& g) {
  check_arg(C.rows >= 1 && C.cols >= 1, "C must be non-empty");
  check_arg(g.size() == C.rows, "g length must equal row count");
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::MatrixXd Cm =
      Eigen::Map<const RowMajor>(C.data.data(), static_cast<Eigen::Index>(C.rows),
                                 static_cast<Eigen::Index>(C.cols));
  const Eigen::VectorXd gv =
      Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Cm);
  const Eigen::VectorXd xls = cod.solve(gv);
  const Eigen::VectorXd ghat = Cm * xls;
  ConsistentSystem out;
  out.x_star.assign(xls.data(), xls.data() + xls.size());
  out.ghat.assign(ghat.data(), ghat.data() + ghat.size());
  return out;
}

CgmOptions cgm_options_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = json_text.empty() ? nlohmann::json::object()
                          : nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("options parse error: ") + e.what());
  }
  try {
    CgmOptions o;
    o.readings_per_window = j.value("readings_per_window", o.readings_per_window);
    o.window_span_seconds = j.value("window_span_seconds", o.window_span_seconds);
    o.missing_fraction = j.value("missing_fraction", o.missing_fraction);
    o.alpha = j.value("alpha", o.alpha);
    o.iterations = j.value("iterations", o.iterations);
    o.seed = j.value("seed", o.seed);
    o.reject_cap = j.value("reject_cap", o.reject_cap);
    o.thin = j.value("thin", o.thin);
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("options field error: ") + e.what());
  }
}

CgmRunResult run_cgm(const std::string& input_csv,
                     const std::string& schema_path, const std::string& out_dir,
                     const CgmOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  check_arg(opt.alpha > 0.0, "alpha must be positive");
  check_arg(opt.thin >= 1, "thin must be >= 1");

  const std::string schema_text = read_file(schema_path);
  const CgmSchema schema = schema_from_json(schema_text);
  const SensorLoad load = load_sensor_csv(input_csv, schema, opt.reject_cap);
  WindowedSystem sys = window_features(load.records, opt.readings_per_window,
                                       opt.window_span_seconds);
  if (sys.C.rows == 0) throw io_error("no usable windows in input");
  if (sys.C.rows < sys.C.cols)
    throw io_error("underdetermined window system: " +
                   std::to_string(sys.C.rows) + " windows for " +
                   std::to_string(sys.C.cols) + " columns");
  apply_noise_mask(sys, opt.missing_fraction);
  const double p = 1.0 - sys.realized_missing;
  if (p <= 0.0) throw io_error("noise threshold masked every reading");
  const ConsistentSystem cs = consistent_rhs(sys.C, sys.g);
  const std::size_t iters =
      opt.iterations == 0 ? 5 * sys.C.rows : opt.iterations;

  LinearSystem lin;
  lin.A = sys.C;
  lin.y = cs.ghat;
  lin.x_star = cs.x_star;

  ensure_dir(out_dir);
  const std::filesystem::path base(out_dir);
  write_matrix_text((base / "C.txt").string(), sys.C);
  write_vector_text((base / "g.txt").string(), sys.g);
  write_vector_text((base / "ghat.txt").string(), cs.ghat);
  write_vector_text((base / "xstar.txt").string(), cs.x_star);
  DenseMatrix maskd(sys.mask.rows, sys.mask.cols);
  for (std::size_t i = 0; i < sys.mask.bits.size(); ++i)
    maskd.data[i] = sys.mask.bits[i] ? 1.0 : 0.0;
  write_matrix_text((base / "mask.txt").string(), maskd);

  nlohmann::json solves = nlohmann::json::object();
  nlohmann::json finals = nlohmann::json::object();
  std::vector<std::string> trace_files;
  for (const char* mode : {"fixed", "synthetic"}) {
    for (Method method : {Method::sgd, Method::msgd, Method::tuple_msgd}) {
      SolverConfig cfg;
      cfg.method = method;
      cfg.model = {sys.ell, p};
      cfg.schedule = {ScheduleKind::fixed, opt.alpha, 0.0};
      cfg.iterations = iters;
      cfg.seed = opt.seed;
      cfg.fixed_mask = std::string(mode) == "fixed" ? &sys.mask : nullptr;
      const ErrorTrace tr = run_solver(lin, cfg);
      const std::string name = to_string(method) + "_" + mode;
      const std::string fname = "trace_" + name + ".csv";
      write_trace_csv(tr, (base / fname).string(), opt.thin);
      trace_files.push_back(fname);
      solves[name] = nlohmann::json::parse(tr.config_json);
      finals[name] = tr.errors.back();
    }
  }

  nlohmann::json rejects = nlohmann::json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(load.rejects.size(), 20); ++i)
    rejects.push_back({{"line", load.rejects[i].first},
                       {"reason", load.rejects[i].second}});

  nlohmann::json prov;
  prov["input"] = input_csv;
  prov["schema"] = schema_path;
  prov["rows_parsed"] = load.total_rows;
  prov["rows_rejected"] = load.rejects.size();
  prov["reject_sample"] = rejects;
  prov["windows"] = sys.C.rows;
  prov["dropped_windows"] = sys.dropped_windows;
  prov["readings_per_window"] = sys.readings_per_window;
  prov["ell"] = sys.ell;
  prov["noise_threshold"] = sys.threshold;
  prov["target_missing_fraction"] = opt.missing_fraction;
  prov["realized_missing_fraction"] = sys.realized_missing;
  prov["p"] = p;
  prov["iterations"] = iters;
  prov["alpha"] = opt.alpha;
  prov["seed"] = opt.seed;
  prov["solves"] = solves;
  const std::string prov_text = prov.dump(2) + "\n";
  write_file((base / "provenance.json").string(), prov_text);

  nlohmann::json manifest;
  manifest["invocation"] = {{"input", input_csv},
                            {"schema", schema_path},
                            {"readings_per_window", opt.readings_per_window},
                            {"window_span_seconds", opt.window_span_seconds},
                            {"missing_fraction", opt.missing_fraction},
                            {"alpha", opt.alpha},
                            {"iterations", iters},
                            {"seed", opt.seed},
                            {"reject_cap", opt.reject_cap},
                            {"thin", opt.thin}};
  manifest["inputs"] = {{"input_csv", file_checksum(input_csv)},
                        {"schema", fnv1a64_hex(schema_text)}};
  nlohmann::json files = nlohmann::json::object();
  for (const char* f : {"C.txt", "g.txt", "ghat.txt", "xstar.txt", "mask.txt",
                        "provenance.json"})
    files[f] = file_checksum((base / f).string());
  for (const auto& f : trace_files) files[f] = file_checksum((base / f).string());
  manifest["files"] = files;
  manifest["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  manifest["status"] = "ok";
  write_file((base / "manifest.json").string(), manifest.dump(2) + "\n");

  nlohmann::json summary;
  summary["windows"] = sys.C.rows;
  summary["ell"] = sys.ell;
  summary["p"] = p;
  summary["realized_missing_fraction"] = sys.realized_missing;
  summary["noise_threshold"] = sys.threshold;
  summary["final_errors"] = finals;
  CgmRunResult out;
  out.summary_json = summary.dump(2) + "\n";
  return out;
}

}  // namespace tmsgd
