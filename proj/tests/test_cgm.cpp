#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "core/cgm.hpp"
#include "core/rng.hpp"
#include "core/util.hpp"

using namespace tmsgd;

namespace {

std::filesystem::path tmp_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "tmsgd_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

CgmSchema test_schema() {
  return schema_from_json(
      R"({"timestamp":"ts","features":["f1","f2"],"noise":"nz","glucose":"glu"})");
}

// 1 Hz stream with one reading per second, glucose on every record.
std::string synth_csv(std::size_t seconds, std::uint64_t seed,
                      double t0 = 1000.0) {
  Rng rng(seed);
  std::string out = "ts,f1,f2,nz,glu\n";
  for (std::size_t i = 0; i < seconds; ++i) {
    out += fmt_full(t0 + static_cast<double>(i)) + "," + fmt_full(rng.normal()) +
           "," + fmt_full(rng.normal()) + "," + fmt_full(rng.uniform()) + "," +
           fmt_full(150.0 + 5.0 * rng.normal()) + "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("schema parsing") {
  const CgmSchema s = test_schema();
  CHECK(s.timestamp == "ts");
  CHECK(s.features == std::vector<std::string>({"f1", "f2"}));
  CHECK(s.noise == "nz");
  CHECK(s.glucose == "glu");
  CHECK_THROWS_AS(schema_from_json(R"({"timestamp":"ts"})"), io_error);
  CHECK_THROWS_AS(
      schema_from_json(
          R"({"timestamp":"t","features":[],"noise":"n","glucose":"g"})"),
      io_error);
  CHECK_THROWS_AS(schema_from_json("not json"), io_error);
}

TEST_CASE("empty csv gives an empty stream") {
  const auto dir = tmp_dir("cgm_empty");
  const std::string path = (dir / "e.csv").string();
  write_file(path, "");
  const SensorLoad load = load_sensor_csv(path, test_schema());
  CHECK(load.records.empty());
  CHECK(load.total_rows == 0);
  CHECK(load.rejects.empty());

  write_file(path, "ts,f1,f2,nz,glu\n");  // header only
  CHECK(load_sensor_csv(path, test_schema()).records.empty());
}

TEST_CASE("well-formed rows round-trip exactly and sort by timestamp") {
  const auto dir = tmp_dir("cgm_roundtrip");
  const std::string path = (dir / "r.csv").string();
  write_file(path,
             "ts,f1,f2,nz,glu\n"
             "30,0.5,-1.25,0.75,\n"
             "10,1.5,2.5,0.25,140.5\n"
             "20,-3.5,4.75,0.5,150.25\n");
  const SensorLoad load = load_sensor_csv(path, test_schema());
  REQUIRE(load.records.size() == 3);
  CHECK(load.total_rows == 3);
  CHECK(load.rejects.empty());
  CHECK(load.records[0].timestamp == 10.0);
  CHECK(load.records[0].features == Vec({1.5, 2.5}));
  CHECK(load.records[0].noise == 0.25);
  CHECK(load.records[0].has_glucose);
  CHECK(load.records[0].glucose == 140.5);
  CHECK(load.records[1].timestamp == 20.0);
  CHECK(load.records[2].timestamp == 30.0);
  CHECK_FALSE(load.records[2].has_glucose);  // empty glucose cell
}

TEST_CASE("malformed rows are rejected with their line numbers") {
  const auto dir = tmp_dir("cgm_rejects");
  const std::string path = (dir / "m.csv").string();
  std::string text = "ts,f1,f2,nz,glu\n";
  for (int i = 0; i < 100; ++i) {
    if (i == 55)
      text += "555,oops,1,0.5,\n";  // line 57 in the file
    else
      text += fmt_full(1000.0 + i) + ",1,2,0.5,150\n";
  }
  write_file(path, text);
  const SensorLoad load = load_sensor_csv(path, test_schema());
  CHECK(load.records.size() == 99);
  CHECK(load.total_rows == 100);
  REQUIRE(load.rejects.size() == 1);
  CHECK(load.rejects[0].first == 57);
  CHECK(load.rejects[0].second.find("f1") != std::string::npos);

  // short rows and duplicate timestamps are rejected too
  write_file(path, "ts,f1,f2,nz,glu\n1,2\n5,1,1,0.5,\n5,2,2,0.5,\n");
  const SensorLoad dup = load_sensor_csv(path, test_schema(), 1.0);
  CHECK(dup.records.size() == 1);
  CHECK(dup.rejects.size() == 2);
}

TEST_CASE("reject cap aborts the load") {
  const auto dir = tmp_dir("cgm_cap");
  const std::string path = (dir / "c.csv").string();
  write_file(path, "ts,f1,f2,nz,glu\n1,x,1,0.5,\n2,1,1,0.5,\n");
  CHECK_THROWS_AS(load_sensor_csv(path, test_schema(), 0.1), io_error);
  CHECK_NOTHROW(load_sensor_csv(path, test_schema(), 0.5));
}

TEST_CASE("a missing schema column is a fatal io error naming it") {
  const auto dir = tmp_dir("cgm_badcol");
  const std::string path = (dir / "b.csv").string();
  write_file(path, "ts,f1,nz,glu\n1,1,0.5,\n");
  try {
    load_sensor_csv(path, test_schema());
    FAIL("expected io_error");
  } catch (const io_error& e) {
    CHECK(std::string(e.what()).find("f2") != std::string::npos);
  }
}

TEST_CASE("window rows concatenate the selected readings in time order") {
  std::vector<SensorRecord> records;
  for (int i = 0; i < 5; ++i) {
    SensorRecord r;
    r.timestamp = 100.0 + 60.0 * i;
    r.features = {10.0 + i, 20.0 + i};
    r.noise = 0.1;
    r.has_glucose = true;
    r.glucose = 150.0;
    records.push_back(r);
  }
  const WindowedSystem sys = window_features(records, 5, 300.0);
  REQUIRE(sys.C.rows == 1);
  REQUIRE(sys.C.cols == 10);
  CHECK(sys.ell == 2);
  const std::vector<double> expect = {10, 20, 11, 21, 12, 22, 13, 23, 14, 24};
  CHECK(sys.C.data == expect);
  CHECK(sys.g == Vec({150.0}));
  CHECK(sys.dropped_windows == 0);
}

TEST_CASE("surplus readings are down-selected evenly by index") {
  std::vector<SensorRecord> records;
  for (int i = 0; i < 10; ++i) {
    SensorRecord r;
    r.timestamp = 30.0 * i;  // 10 readings inside one 300 s window
    r.features = {30.0 * i};
    r.noise = 0.0;
    r.has_glucose = true;
    r.glucose = 1.0;
    records.push_back(r);
  }
  const WindowedSystem sys = window_features(records, 5, 300.0);
  REQUIRE(sys.C.rows == 1);
  // indices floor(j * 9 / 4) = 0, 2, 4, 6, 9
  CHECK(sys.C.data == std::vector<double>({0, 60, 120, 180, 270}));
}

TEST_CASE("short and target-less windows are dropped and counted") {
  std::vector<SensorRecord> records;
  auto push = [&](double t, bool glucose) {
    SensorRecord r;
    r.timestamp = t;
    r.features = {1.0, 2.0};
    r.noise = 0.0;
    r.has_glucose = glucose;
    r.glucose = 150.0;
    records.push_back(r);
  };
  // window 0: full but no glucose has been seen yet -> no target, dropped
  for (double t : {0.0, 60.0, 120.0, 180.0, 240.0}) push(t, false);
  // window 1: only 3 readings -> dropped short
  for (double t : {310.0, 370.0, 430.0}) push(t, true);
  // window 2: full with glucose
  for (double t : {600.0, 660.0, 720.0, 780.0, 840.0}) push(t, true);
  const WindowedSystem sys = window_features(records, 5, 300.0);
  CHECK(sys.C.rows == 1);
  CHECK(sys.dropped_windows == 2);
  CHECK(sys.g == Vec({150.0}));
}

TEST_CASE("the glucose target is the last reading at or before window end") {
  std::vector<SensorRecord> records;
  for (int i = 0; i < 5; ++i) {
    SensorRecord r;
    r.timestamp = 60.0 * i;
    r.features = {1.0};
    r.noise = 0.0;
    r.has_glucose = true;
    r.glucose = 100.0 + i;  // last in-window reading carries 104
    records.push_back(r);
  }
  const WindowedSystem sys = window_features(records, 5, 300.0);
  REQUIRE(sys.g.size() == 1);
  CHECK(sys.g[0] == 104.0);
}

TEST_CASE("noise threshold quantile hand cases") {
  DenseMatrix noise(2, 2);
  noise.data = {1, 2, 3, 4};

  const NoiseMask none = noise_threshold_mask(noise, 1, 0.0);
  for (auto b : none.mask.bits) CHECK(b == 1);
  CHECK(none.realized_missing == 0.0);

  const NoiseMask quarter = noise_threshold_mask(noise, 1, 0.25);
  CHECK(quarter.threshold == 3.0);
  CHECK(quarter.realized_missing == 0.25);  // only the 4 is above
  CHECK(quarter.mask.at(1, 1) == 0);
  CHECK(quarter.mask.at(1, 0) == 1);

  const NoiseMask half = noise_threshold_mask(noise, 1, 0.5);
  CHECK(half.threshold == 2.0);
  CHECK(half.realized_missing == 0.5);

  // f = 2: a noisy reading knocks out its whole tuple
  const NoiseMask wide = noise_threshold_mask(noise, 2, 0.25);
  CHECK(wide.mask.cols == 4);
  CHECK(wide.mask.at(1, 2) == 0);
  CHECK(wide.mask.at(1, 3) == 0);
  CHECK(wide.mask.at(1, 0) == 1);

  // degenerate all-equal noise: nothing is strictly above the threshold
  DenseMatrix flat(1, 4);
  flat.data = {5, 5, 5, 5};
  const NoiseMask deg = noise_threshold_mask(flat, 1, 0.4);
  CHECK(deg.threshold == 5.0);
  CHECK(deg.realized_missing == 0.0);
}

TEST_CASE("consistent_rhs is an orthogonal projection") {
  Rng rng(88);
  DenseMatrix C(20, 4);
  for (double& v : C.data) v = rng.normal();

  SUBCASE("range elements are fixed") {
    Vec v(4);
    for (double& x : v) x = rng.normal();
    Vec g(20, 0.0);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 4; ++j) g[i] += C.at(i, j) * v[j];
    const ConsistentSystem cs = consistent_rhs(C, g);
    for (std::size_t i = 0; i < 20; ++i)
      CHECK(cs.ghat[i] == doctest::Approx(g[i]).epsilon(1e-10));
  }

  SUBCASE("random g: idempotence, orthogonality, consistency") {
    Vec g(20);
    for (double& x : g) x = rng.normal();
    const ConsistentSystem cs = consistent_rhs(C, g);

    const ConsistentSystem again = consistent_rhs(C, cs.ghat);
    double scale = 0.0;
    for (double v : cs.ghat) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < 20; ++i)
      CHECK(std::abs(again.ghat[i] - cs.ghat[i]) <= 1e-10 * scale);

    for (std::size_t j = 0; j < 4; ++j) {
      double along = 0.0;
      for (std::size_t i = 0; i < 20; ++i)
        along += C.at(i, j) * (cs.ghat[i] - g[i]);
      CHECK(std::abs(along) <= 1e-10 * 20.0);
    }

    for (std::size_t i = 0; i < 20; ++i) {
      double cx = 0.0;
      for (std::size_t j = 0; j < 4; ++j) cx += C.at(i, j) * cs.x_star[j];
      CHECK(cx == doctest::Approx(cs.ghat[i]).epsilon(1e-10));
    }
  }

  SUBCASE("square invertible C reproduces g") {
    DenseMatrix S(3, 3);
    S.data = {2, 0, 0, 0, 3, 0, 0, 0, 4};
    const Vec g = {1.0, 2.0, 3.0};
    const ConsistentSystem cs = consistent_rhs(S, g);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(cs.ghat[i] == doctest::Approx(g[i]).epsilon(1e-12));
  }
}

TEST_CASE("cgm options parsing") {
  const CgmOptions def = cgm_options_from_json("{}");
  CHECK(def.readings_per_window == 5);
  CHECK(def.window_span_seconds == 300.0);
  CHECK(def.missing_fraction == 0.4);
  const CgmOptions o = cgm_options_from_json(
      R"({"readings_per_window":3,"missing_fraction":0.2,"seed":9})");
  CHECK(o.readings_per_window == 3);
  CHECK(o.missing_fraction == 0.2);
  CHECK(o.seed == 9);
  CHECK_THROWS_AS(cgm_options_from_json("{oops"), std::invalid_argument);
}

TEST_CASE("run_cgm end to end on a small fixture") {
  const auto dir = tmp_dir("cgm_run");
  const std::string csv = (dir / "sensor.csv").string();
  const std::string schema = (dir / "schema.json").string();
  write_file(csv, synth_csv(40 * 300, 5));  // 40 complete windows
  write_file(
      schema,
      R"({"timestamp":"ts","features":["f1","f2"],"noise":"nz","glucose":"glu"})");

  CgmOptions opt;
  opt.seed = 3;
  const CgmRunResult res =
      run_cgm(csv, schema, (dir / "out").string(), opt);
  const nlohmann::json summary = nlohmann::json::parse(res.summary_json);
  CHECK(summary.at("windows") == 40);
  CHECK(summary.at("ell") == 2);
  const double p = summary.at("p").get<double>();
  CHECK(p == doctest::Approx(0.6).epsilon(0.02));
  CHECK(summary.at("final_errors").size() == 6);

  for (const char* f :
       {"C.txt", "g.txt", "ghat.txt", "xstar.txt", "mask.txt",
        "provenance.json", "manifest.json", "trace_sgd_fixed.csv",
        "trace_msgd_synthetic.csv", "trace_tuple-msgd_fixed.csv"})
    CHECK(std::filesystem::exists(dir / "out" / f));

  const nlohmann::json prov = nlohmann::json::parse(
      read_file((dir / "out" / "provenance.json").string()));
  CHECK(prov.at("windows") == 40);
  CHECK(prov.at("p").get<double>() ==
        1.0 - prov.at("realized_missing_fraction").get<double>());
  CHECK(prov.at("solves").size() == 6);

  const DenseMatrix C = read_matrix_text((dir / "out" / "C.txt").string());
  CHECK(C.rows == 40);
  CHECK(C.cols == 10);
  const auto trace =
      read_trace_csv((dir / "out" / "trace_tuple-msgd_fixed.csv").string());
  CHECK(trace.size() == 201);  // 5 * 40 iterations + start
}

TEST_CASE("missing fraction zero makes every method identical") {
  const auto dir = tmp_dir("cgm_nomask");
  const std::string csv = (dir / "sensor.csv").string();
  const std::string schema = (dir / "schema.json").string();
  write_file(csv, synth_csv(20 * 300, 6));
  write_file(
      schema,
      R"({"timestamp":"ts","features":["f1","f2"],"noise":"nz","glucose":"glu"})");
  CgmOptions opt;
  opt.missing_fraction = 0.0;
  run_cgm(csv, schema, (dir / "out").string(), opt);
  const std::string sgd_syn =
      read_file((dir / "out" / "trace_sgd_synthetic.csv").string());
  CHECK(sgd_syn ==
        read_file((dir / "out" / "trace_msgd_synthetic.csv").string()));
  CHECK(sgd_syn ==
        read_file((dir / "out" / "trace_tuple-msgd_synthetic.csv").string()));
  const std::string sgd_fix =
      read_file((dir / "out" / "trace_sgd_fixed.csv").string());
  CHECK(sgd_fix ==
        read_file((dir / "out" / "trace_tuple-msgd_fixed.csv").string()));
}
