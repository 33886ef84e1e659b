#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/dense.hpp"
#include "core/missing.hpp"
#include "core/solver.hpp"

namespace tmsgd {

// Column mapping for the sensor CSV: {"timestamp": <col>, "features":
// [<cols>...], "noise": <col>, "glucose": <col>}. Feature arity is the tuple
// length of the resulting system.
struct CgmSchema {
  std::string timestamp;
  std::vector<std::string> features;
  std::string noise;
  std::string glucose;
};

CgmSchema schema_from_json(const std::string& json_text);

struct SensorRecord {
  double timestamp = 0.0;  // seconds since epoch
  Vec features;
  double noise = 0.0;
  bool has_glucose = false;
  double glucose = 0.0;
};

struct SensorLoad {
  std::vector<SensorRecord> records;  // timestamp-sorted
  std::size_t total_rows = 0;         // data rows seen (header excluded)
  // (1-based file line, reason); malformed rows land here instead of aborting
  std::vector<std::pair<std::size_t, std::string>> rejects;
};

// Throws io_error when the file is unreadable, a schema column is absent, or
// the reject fraction exceeds reject_cap. An empty file is an empty stream.
SensorLoad load_sensor_csv(const std::string& path, const CgmSchema& schema,
                           double reject_cap = 0.1);

struct WindowedSystem {
  DenseMatrix C;             // windows x (readings_per_window * f)
  Vec g;                     // glucose target per window
  DenseMatrix reading_noise; // windows x readings_per_window
  MaskMatrix mask;           // noise-threshold mask, tuple-constant, ell = f
  std::size_t ell = 1;       // feature arity f
  std::size_t readings_per_window = 0;
  std::size_t dropped_windows = 0;
  double threshold = 0.0;
  double realized_missing = 0.0;  // exact zero-fraction of mask
};

// Fixed [start, start + span) windows anchored at the first record. A window
// keeps readings_per_window of its records, evenly spaced by index, readings
// concatenated left to right in time order. Target: last glucose reading at
// or before the window end; windows short on records or target are dropped
// and counted. The mask fields stay defaulted (see noise_threshold_mask).
WindowedSystem window_features(const std::vector<SensorRecord>& records,
                               std::size_t readings_per_window,
                               double window_span_seconds);

struct NoiseMask {
  MaskMatrix mask;
  double threshold = 0.0;
  double realized_missing = 0.0;
};

// Threshold = the (1 - target_missing_fraction) quantile of all reading noise
// values; readings strictly above it lose their whole f-wide feature tuple.
NoiseMask noise_threshold_mask(const DenseMatrix& reading_noise, std::size_t f,
                               double target_missing_fraction);

// Applies noise_threshold_mask to sys in place.
void apply_noise_mask(WindowedSystem& sys, double target_missing_fraction);

struct ConsistentSystem {
  Vec ghat;    // orthogonal projection of g onto col(C)
  Vec x_star;  // minimum-norm least-squares solution of C x = g
};

// Rank-revealing complete orthogonal decomposition of C; ghat = C * x_star.
ConsistentSystem consistent_rhs(const DenseMatrix& C, const Vec& g);

struct CgmOptions {
  std::size_t readings_per_window = 5;
  double window_span_seconds = 300.0;
  double missing_fraction = 0.4;
  double alpha = 1e-3;
  std::size_t iterations = 0;  // 0 means 5 * windows
  std::uint64_t seed = 1;
  double reject_cap = 0.1;
  std::size_t thin = 1;
};

// Tolerant parse: absent keys keep their defaults, "{}" is valid.
CgmOptions cgm_options_from_json(const std::string& json_text);

struct CgmRunResult {
  std::string summary_json;
};

// Full pipeline: load, window, mask, project, then run sgd / msgd /
// tuple-msgd in fixed-mask mode (missingness from the data) and in
// synthetic-mask mode (fresh tuple masks at the realized presence fraction),
// all runs seed-paired. Writes C.txt, g.txt, ghat.txt, xstar.txt, mask.txt,
// per-run trace CSVs, provenance.json and manifest.json under out_dir.
CgmRunResult run_cgm(const std::string& input_csv,
                     const std::string& schema_path, const std::string& out_dir,
                     const CgmOptions& opt);

}  // namespace tmsgd
