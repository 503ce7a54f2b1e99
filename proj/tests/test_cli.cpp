#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mjp/cli.hpp"

using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
  json report;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = mjp::cli_run(args, out, err);
  CliResult r{code, out.str(), err.str(), json()};
  if (!r.out.empty() && r.out[0] == '{') r.report = json::parse(r.out);
  return r;
}

std::string write_model(const std::string& name, const json& doc) {
  const auto dir = std::filesystem::temp_directory_path() / "mjp_cli_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream f(path, std::ios::binary);
  f << doc.dump(2);
  return path.string();
}

std::string yule_file() {
  return write_model("yule.json",
                     json{{"name", "yule"},
                          {"space", {{"kind", "countable"}, {"truncation_default", 32}}},
                          {"rates",
                           {{"family", "birth_death"},
                            {"birth", {{"family", "affine"}, {"a", 1.0}, {"b", 1.0}}},
                            {"death", {{"family", "zero"}}}}},
                          {"modulation", {{"family", "constant"}, {"value", 1.0}}},
                          {"drift",
                           {{"expr_family", "affine_state"},
                            {"a", 1.0},
                            {"b", 1.0},
                            {"constant", 1.0}}},
                          {"sets", {{"family", "prefix"}}}});
}

std::string doubling_file(bool bounded_drift) {
  json drift;
  if (bounded_drift)
    drift = {{"expr_family", "bounded_geometric"},
             {"a", 2.0},
             {"b", 1.0},
             {"ratio", 2.0},
             {"constant", 0.5}};
  else
    drift = {{"expr_family", "affine_state"}, {"a", 1.0}, {"b", 1.0}, {"constant", 1.0}};
  return write_model(bounded_drift ? "doubling_f.json" : "doubling_v.json",
                     json{{"name", "doubling"},
                          {"space", {{"kind", "countable"}, {"truncation_default", 20}}},
                          {"rates",
                           {{"family", "birth_death"},
                            {"birth", {{"family", "geometric"}, {"scale", 1.0}, {"ratio", 2.0}}},
                            {"death", {{"family", "zero"}}}}},
                          {"modulation", {{"family", "constant"}, {"value", 1.0}}},
                          {"drift", drift},
                          {"sets", {{"family", "prefix"}}}});
}

std::string flip_flop_file() {
  return write_model(
      "flipflop.json",
      json{{"name", "flip-flop"},
           {"space", {{"kind", "countable"}, {"truncation_default", 2}}},
           {"rates",
            {{"family", "birth_death"},
             {"birth", {{"family", "table"}, {"values", {1.0}}, {"default", 0.0}}},
             {"death", {{"family", "table"}, {"values", {0.0, 2.0}}, {"default", 0.0}}}}},
           {"modulation", {{"family", "constant"}, {"value", 1.0}}},
           {"drift", {{"expr_family", "constant"}, {"value", 1.0}, {"constant", 0.0}}},
           {"sets", {{"family", "all"}}}});
}

}  // namespace

TEST_CASE("cli: validate the shipped families") {
  const auto r = run({"--model", yule_file(), "validate", "--truncation", "40",
                      "--times", "0,1,5"});
  CHECK(r.code == 0);
  CHECK(r.report["results"]["pass"] == true);
  CHECK(r.report["results"]["max_residual"] == 0.0);
  CHECK(r.report["model_digest"].get<std::string>().size() == 16);
}

TEST_CASE("cli: transition masses as JSON") {
  const auto r = run({"--model", flip_flop_file(), "transition", "--t", "1", "--x", "0",
                      "--method", "ode", "--target", "0"});
  CHECK(r.code == 0);
  const double p00 = r.report["results"]["masses"]["0"].get<double>();
  CHECK(p00 == doctest::Approx(2.0 / 3.0 + std::exp(-3.0) / 3.0).epsilon(1e-6));
  CHECK(r.report["results"]["target_mass"].get<double>() == doctest::Approx(p00));
}

TEST_CASE("cli: transition CSV curve") {
  const auto r = run({"--model", flip_flop_file(), "--format", "csv", "transition",
                      "--t", "1", "--x", "0", "--target", "0", "--curve-points", "8"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("u,mass\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 10);  // header + 9 grid rows
}

TEST_CASE("cli: simulate CSV trajectory") {
  const auto r = run({"--model", yule_file(), "--format", "csv", "simulate", "--x", "0",
                      "--horizon", "1", "--seed", "5"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("t,x\n", 0) == 0);
}

TEST_CASE("cli: drift-check certifies and refutes with matching exit codes") {
  const auto ok = run({"--model", yule_file(), "drift-check", "--condition", "5",
                       "--alpha", "1", "--truncation", "24"});
  CHECK(ok.code == 0);
  CHECK(ok.report["results"]["verdict"] == "certified-on-domain");

  const auto bad = run({"--model", doubling_file(false), "drift-check", "--condition", "5",
                        "--alpha", "1", "--truncation", "16"});
  CHECK(bad.code == 2);
  CHECK(bad.report["results"]["verdict"] == "refuted");
  CHECK(bad.report["results"]["refutation"]["state"] == 2);
}

TEST_CASE("cli: explosion-prob exit codes separate explosive from bounded") {
  const auto expl = run({"--model", doubling_file(false), "explosion-prob", "--x", "0",
                         "--horizon", "2", "--paths", "2000", "--jump-cap", "400",
                         "--seed", "7"});
  CHECK(expl.code == 2);
  CHECK(expl.report["results"]["estimate"].get<double>() > 0.2);
  CHECK(expl.report["results"]["cap_diagnostic_ok"] == true);

  const auto flat = run({"--model", flip_flop_file(), "explosion-prob", "--x", "0",
                         "--horizon", "2", "--paths", "500", "--jump-cap", "500",
                         "--seed", "7"});
  CHECK(flat.code == 0);
  CHECK(flat.report["results"]["estimate"] == 0.0);
}

TEST_CASE("cli: resolvent and embedded-solve") {
  const auto res = run({"--model", flip_flop_file(), "resolvent", "--alpha", "1",
                        "--x", "0", "--schedule", "2"});
  CHECK(res.code == 0);
  CHECK(res.report["results"]["value"].get<double>() == doctest::Approx(1.0).epsilon(1e-3));

  const auto emb = run({"--model", doubling_file(false), "embedded-solve", "--alpha", "1",
                        "--truncation", "64", "--window", "4"});
  CHECK(emb.code == 2);
  CHECK(emb.report["results"]["verdict"] == "explosive");

  const auto emb2 = run({"--model", flip_flop_file(), "embedded-solve", "--alpha", "1",
                         "--truncation", "32", "--window", "2"});
  CHECK(emb2.code == 0);
  CHECK(emb2.report["results"]["verdict"] == "nonexplosive");
}

TEST_CASE("cli: transform emits the reweighted kernel") {
  const auto r = run({"--model", yule_file(), "transform", "--truncation", "8"});
  CHECK(r.code == 0);
  const auto& st0 = r.report["results"]["states"][0]["at"][0];
  CHECK(st0["delta_rate"].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(st0["total_rate"].get<double>() == doctest::Approx(2.0));
}

TEST_CASE("cli: dynkin-check verdicts") {
  const auto ok = run({"--model", yule_file(), "dynkin-check", "--t", "1", "--x", "0",
                       "--schedule", "32,48"});
  CHECK(ok.code == 0);
  CHECK(ok.report["results"]["dynkin_holds"] == true);
  CHECK(ok.report["results"]["transformed_verdict"] == "nonexplosive");
  CHECK(ok.report["results"]["equivalence_holds"] == true);

  const auto broken = run({"--model", doubling_file(true), "dynkin-check", "--t", "2",
                           "--x", "0", "--schedule", "16,20"});
  CHECK(broken.code == 2);
  CHECK(broken.report["results"]["dynkin_holds"] == false);
  CHECK(broken.report["results"]["transformed_verdict"] == "explosive");
  CHECK(broken.report["results"]["equivalence_holds"] == true);
}

TEST_CASE("cli: missing and malformed model files diagnose on exit 1") {
  const auto missing = run({"--model", "/nonexistent/nowhere.json", "validate"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("cannot open") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "mjp_cli_tests";
  std::filesystem::create_directories(dir);
  const auto bad_path = (dir / "broken.json").string();
  std::ofstream(bad_path) << "{ not json";
  const auto malformed = run({"--model", bad_path, "validate"});
  CHECK(malformed.code == 1);
  CHECK(malformed.err.find("not valid JSON") != std::string::npos);
}

TEST_CASE("cli: reports are byte-identical across thread counts") {
  const std::vector<std::string> base = {"--model",  doubling_file(false),
                                         "explosion-prob", "--x", "0", "--horizon", "2",
                                         "--paths", "2000", "--jump-cap", "400",
                                         "--seed", "99"};
  auto with_threads = [&](const char* n) {
    auto args = base;
    args.insert(args.begin(), {"--threads", n});
    return run(args);
  };
  const auto a = with_threads("1");
  const auto b = with_threads("4");
  CHECK(a.report["results"].dump() == b.report["results"].dump());
  CHECK(a.report["seeds"].dump() == b.report["seeds"].dump());
  CHECK(a.report["budgets"].dump() == b.report["budgets"].dump());
}
