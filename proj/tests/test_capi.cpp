#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tmsgd.h"

namespace {

std::filesystem::path tmp_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "tmsgd_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

tmsgd_solve_config base_config() {
  tmsgd_solve_config cfg{};
  cfg.method = "sgd";
  cfg.p = 1.0;
  cfg.ell = 1;
  cfg.schedule = "fixed";
  cfg.alpha = 1e-3;
  cfg.mu = 0.0;
  cfg.project = -1;
  cfg.radius = 0.0;
  cfg.iterations = 500;
  cfg.seed = 3;
  return cfg;
}

std::string grab(char* s) {
  std::string out = s ? s : "";
  tmsgd_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("version and error-string basics") {
  REQUIRE(tmsgd_version() != nullptr);
  CHECK(std::string(tmsgd_version()) == "1.0.0");
  REQUIRE(tmsgd_last_error() != nullptr);
  tmsgd_string_free(nullptr);  // must be a no-op
  tmsgd_system_free(nullptr);
  tmsgd_trace_free(nullptr);
}

TEST_CASE("generate, dims, save, load round-trip") {
  tmsgd_system* sys = nullptr;
  REQUIRE(tmsgd_system_generate(40, 6, 7, &sys) == TMSGD_OK);
  size_t m = 0, n = 0;
  REQUIRE(tmsgd_system_dims(sys, &m, &n) == TMSGD_OK);
  CHECK(m == 40);
  CHECK(n == 6);

  const auto dir = tmp_dir("capi_roundtrip");
  REQUIRE(tmsgd_system_save(sys, dir.string().c_str()) == TMSGD_OK);
  for (const char* f : {"A.txt", "y.txt", "xstar.txt"})
    CHECK(std::filesystem::exists(dir / f));

  tmsgd_system* back = nullptr;
  REQUIRE(tmsgd_system_load(dir.string().c_str(), &back) == TMSGD_OK);
  REQUIRE(tmsgd_system_dims(back, &m, &n) == TMSGD_OK);
  CHECK(m == 40);
  CHECK(n == 6);

  // identical solves on original and reloaded copy prove a bitwise round-trip
  const tmsgd_solve_config cfg = base_config();
  tmsgd_trace *t1 = nullptr, *t2 = nullptr;
  REQUIRE(tmsgd_solve(sys, &cfg, &t1) == TMSGD_OK);
  REQUIRE(tmsgd_solve(back, &cfg, &t2) == TMSGD_OK);
  REQUIRE(tmsgd_trace_length(t1) == 501);
  std::vector<double> e1(501), e2(501);
  REQUIRE(tmsgd_trace_errors(t1, e1.data(), e1.size()) == TMSGD_OK);
  REQUIRE(tmsgd_trace_errors(t2, e2.data(), e2.size()) == TMSGD_OK);
  CHECK(std::memcmp(e1.data(), e2.data(), 501 * sizeof(double)) == 0);

  tmsgd_trace_free(t1);
  tmsgd_trace_free(t2);
  tmsgd_system_free(back);
  tmsgd_system_free(sys);
}

TEST_CASE("trace accessors and config echo") {
  tmsgd_system* sys = nullptr;
  REQUIRE(tmsgd_system_generate(60, 8, 11, &sys) == TMSGD_OK);
  tmsgd_solve_config cfg = base_config();
  cfg.method = "tuple-msgd";
  cfg.p = 0.7;
  cfg.ell = 2;
  cfg.iterations = 400;
  tmsgd_trace* tr = nullptr;
  REQUIRE(tmsgd_solve(sys, &cfg, &tr) == TMSGD_OK);
  REQUIRE(tmsgd_trace_length(tr) == 401);

  std::vector<double> errs(401);
  REQUIRE(tmsgd_trace_errors(tr, errs.data(), errs.size()) == TMSGD_OK);
  CHECK(tmsgd_trace_final_error(tr) == errs.back());
  CHECK(errs.front() > 0.0);

  // too-small buffer is rejected with an explanation
  double tiny[4];
  CHECK(tmsgd_trace_errors(tr, tiny, 4) == TMSGD_ERR_INVALID_ARGUMENT);
  CHECK(std::string(tmsgd_last_error()).size() > 0);

  const auto dir = tmp_dir("capi_trace");
  const auto csv = (dir / "t.csv").string();
  REQUIRE(tmsgd_trace_write_csv(tr, csv.c_str(), 100) == TMSGD_OK);
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,error");
  size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);  // 0,100,200,300,400; the final row is the last multiple

  char* cfg_json = nullptr;
  REQUIRE(tmsgd_trace_config_json(tr, &cfg_json) == TMSGD_OK);
  const nlohmann::json j = nlohmann::json::parse(grab(cfg_json));
  CHECK(j.at("method") == "tuple-msgd");
  CHECK(j.at("p") == 0.7);
  CHECK(j.at("ell") == 2);
  CHECK(j.at("schedule") == "fixed");

  tmsgd_trace_free(tr);
  tmsgd_system_free(sys);
}

TEST_CASE("inv-mu-k resolves mu and the projection radius") {
  tmsgd_system* sys = nullptr;
  REQUIRE(tmsgd_system_generate(80, 5, 2, &sys) == TMSGD_OK);
  tmsgd_solve_config cfg = base_config();
  cfg.schedule = "inv-mu-k";
  cfg.iterations = 200;
  tmsgd_trace* tr = nullptr;
  REQUIRE(tmsgd_solve(sys, &cfg, &tr) == TMSGD_OK);
  char* cfg_json = nullptr;
  REQUIRE(tmsgd_trace_config_json(tr, &cfg_json) == TMSGD_OK);
  const nlohmann::json j = nlohmann::json::parse(grab(cfg_json));
  CHECK(j.at("schedule") == "inv-mu-k");
  CHECK(j.at("mu").get<double>() > 0.0);
  CHECK(j.at("projection").at("enabled").get<bool>());
  CHECK(j.at("projection").at("radius").get<double>() > 0.0);
  tmsgd_trace_free(tr);
  tmsgd_system_free(sys);
}

TEST_CASE("argument and io errors map to distinct statuses") {
  tmsgd_system* sys = nullptr;
  CHECK(tmsgd_system_generate(3, 5, 1, &sys) == TMSGD_ERR_INVALID_ARGUMENT);
  CHECK(std::string(tmsgd_last_error()).size() > 0);
  CHECK(tmsgd_system_generate(10, 2, 1, nullptr) == TMSGD_ERR_INVALID_ARGUMENT);

  CHECK(tmsgd_system_load("/nonexistent/tmsgd/dir", &sys) == TMSGD_ERR_IO);
  CHECK(std::string(tmsgd_last_error()).size() > 0);

  REQUIRE(tmsgd_system_generate(20, 4, 1, &sys) == TMSGD_OK);
  tmsgd_solve_config cfg = base_config();
  tmsgd_trace* tr = nullptr;

  cfg.method = "newton";
  CHECK(tmsgd_solve(sys, &cfg, &tr) == TMSGD_ERR_INVALID_ARGUMENT);
  cfg = base_config();
  cfg.ell = 3;  // does not divide n = 4
  cfg.method = "tuple-msgd";
  cfg.p = 0.5;
  CHECK(tmsgd_solve(sys, &cfg, &tr) == TMSGD_ERR_INVALID_ARGUMENT);
  cfg = base_config();
  cfg.p = 1.5;
  CHECK(tmsgd_solve(sys, &cfg, &tr) == TMSGD_ERR_INVALID_ARGUMENT);
  CHECK(tmsgd_solve(nullptr, &cfg, &tr) == TMSGD_ERR_INVALID_ARGUMENT);
  CHECK(tmsgd_solve(sys, nullptr, &tr) == TMSGD_ERR_INVALID_ARGUMENT);

  double buf[1];
  CHECK(tmsgd_trace_errors(nullptr, buf, 1) == TMSGD_ERR_INVALID_ARGUMENT);
  tmsgd_system_free(sys);
}

TEST_CASE("check_run reports verdicts through the boundary") {
  const char* opts =
      R"({"m":30,"n":6,"ells":[1,2],"ps":[0.5,0.9],"mc_samples":4000,"seed":2})";
  char* report = nullptr;
  int all_pass = 0;
  REQUIRE(tmsgd_check_run("unbiased", opts, &report, &all_pass) == TMSGD_OK);
  CHECK(all_pass == 1);
  const nlohmann::json j = nlohmann::json::parse(grab(report));
  CHECK(j.at("suite") == "unbiased");
  REQUIRE(j.at("checks").is_array());
  CHECK(j.at("checks").size() > 0);
  for (const auto& c : j.at("checks")) CHECK(c.at("pass").get<bool>());

  CHECK(tmsgd_check_run("nonsense", nullptr, &report, &all_pass) ==
        TMSGD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("bench_run honors overrides and writes the layout") {
  const auto dir = tmp_dir("capi_bench");
  char* summary = nullptr;
  REQUIRE(tmsgd_bench_run(
              "fig2-mini", dir.string().c_str(),
              R"({"replications":2,"workers":2,"thin":200,"iterations":2000})",
              &summary) == TMSGD_OK);
  const nlohmann::json j = nlohmann::json::parse(grab(summary));
  REQUIRE(j.at("cells").size() == 2);
  for (const auto& cell : j.at("cells")) {
    CHECK(cell.at("final_mean_error").size() == 3);
    CHECK(cell.at("best").is_string());
  }
  CHECK(std::filesystem::exists(dir / "summary.json"));
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "spec.json"));

  CHECK(tmsgd_bench_run("no-such-preset", dir.string().c_str(), nullptr,
                        &summary) == TMSGD_ERR_IO);
  CHECK(std::string(tmsgd_last_error()).size() > 0);
}

TEST_CASE("cgm_run through the boundary") {
  const auto dir = tmp_dir("capi_cgm");
  const auto csv = dir / "sensor.csv";
  {
    std::ofstream out(csv);
    out << "ts,f1,f2,nz,glu\n";
    for (int i = 0; i < 10 * 300; ++i) {
      const double t = 1000.0 + i;
      out << t << ',' << std::sin(0.1 * i) << ',' << std::cos(0.17 * i) << ','
          << 0.5 + 0.5 * std::sin(12.9898 * i) << ',' << 150.0 + std::sin(0.01 * i)
          << '\n';
    }
  }
  const auto schema = dir / "schema.json";
  {
    std::ofstream out(schema);
    out << R"({"timestamp":"ts","features":["f1","f2"],"noise":"nz","glucose":"glu"})";
  }

  char* summary = nullptr;
  REQUIRE(tmsgd_cgm_run(csv.string().c_str(), schema.string().c_str(),
                        (dir / "out").string().c_str(),
                        R"({"missing_fraction":0.3,"seed":4})",
                        &summary) == TMSGD_OK);
  const nlohmann::json j = nlohmann::json::parse(grab(summary));
  CHECK(j.at("windows") == 10);
  CHECK(j.at("ell") == 2);
  CHECK(j.at("final_errors").size() == 6);
  CHECK(std::filesystem::exists(dir / "out" / "provenance.json"));

  // schema naming an absent column is an io failure
  {
    std::ofstream out(schema);
    out << R"({"timestamp":"ts","features":["f1","missing_col"],"noise":"nz","glucose":"glu"})";
  }
  CHECK(tmsgd_cgm_run(csv.string().c_str(), schema.string().c_str(),
                      (dir / "out2").string().c_str(), nullptr,
                      &summary) == TMSGD_ERR_IO);
  CHECK(std::string(tmsgd_last_error()).find("missing_col") !=
        std::string::npos);

  CHECK(tmsgd_cgm_run(nullptr, schema.string().c_str(),
                      (dir / "out3").string().c_str(), nullptr,
                      &summary) == TMSGD_ERR_INVALID_ARGUMENT);
}
