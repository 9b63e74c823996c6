// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "smru/audio.hpp"
#include "smru/scenario.hpp"

using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args) {
  const std::string out_path = "/tmp/smru_cli_out.txt";
  const std::string err_path = "/tmp/smru_cli_err.txt";
  const std::string cmd = std::string(SMRU_CLI_PATH) + " " + args + " >" + out_path +
                          " 2>" + err_path;
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(rc);
  std::stringstream so, se;
  so << std::ifstream(out_path).rdbuf();
  se << std::ifstream(err_path).rdbuf();
  r.out = so.str();
  r.err = se.str();
  return r;
}

// Minimal JSON-schema checker covering the subset the shipped schemas use:
// type, required, properties, items, enum, oneOf.
bool schema_validate(const json& schema, const json& value, std::string& why);

bool type_matches(const std::string& type, const json& value) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
  if (type == "number") return value.is_number();
  return false;
}

bool schema_validate(const json& schema, const json& value, std::string& why) {
  if (schema.contains("oneOf")) {
    for (const auto& sub : schema["oneOf"]) {
      std::string ignore;
      if (schema_validate(sub, value, ignore)) return true;
    }
    why = "no oneOf branch matched";
    return false;
  }
  if (schema.contains("type") && !type_matches(schema["type"].get<std::string>(), value)) {
    why = "type mismatch, wanted " + schema["type"].get<std::string>();
    return false;
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"])
      if (e == value) found = true;
    if (!found) {
      why = "value not in enum";
      return false;
    }
  }
  if (value.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema["required"])
        if (!value.contains(key.get<std::string>())) {
          why = "missing required key '" + key.get<std::string>() + "'";
          return false;
        }
    if (schema.contains("properties"))
      for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it)
        if (value.contains(it.key()))
          if (!schema_validate(it.value(), value[it.key()], why)) {
            why = it.key() + ": " + why;
            return false;
          }
  }
  if (value.is_array() && schema.contains("items"))
    for (const auto& item : value)
      if (!schema_validate(schema["items"], item, why)) return false;
  return true;
}

json load_schema(const std::string& name) {
  std::ifstream f(std::string(SMRU_SOURCE_DIR) + "/schemas/" + name);
  REQUIRE(f.good());
  return json::parse(f);
}

void check_against_schema(const json& value, const std::string& schema_name) {
  std::string why;
  const bool ok = schema_validate(load_schema(schema_name), value, why);
  INFO("schema ", schema_name, ": ", why);
  CHECK(ok);
}

}  // namespace

TEST_CASE("macs command: table, JSON and schema") {
  const RunResult table = run_cli("macs --preset T");
  CHECK(table.exit_code == 0);
  CHECK(table.out.find("total") != std::string::npos);

  const RunResult js = run_cli("macs --preset T --json");
  REQUIRE(js.exit_code == 0);
  const json parsed = json::parse(js.out);
  check_against_schema(parsed, "complexity.schema.json");
  CHECK(parsed["embedding"] == 10);
}

TEST_CASE("simulate writes scenes and a schema-conforming manifest") {
  const std::string dir = "/tmp/smru_cli_scenes";
  (void)!std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str());
  const RunResult r = run_cli("simulate --out-dir " + dir +
                              " --seed 3 --duration 1.5 --scenario DT --ser 5 --snr 10 "
                              "--count 2");
  REQUIRE(r.exit_code == 0);
  std::ifstream mf(dir + "/manifest.json");
  REQUIRE(mf.good());
  const json manifest = json::parse(mf);
  check_against_schema(manifest, "manifest.schema.json");
  REQUIRE(manifest["scenes"].size() == 2);
  const auto mic = smru::read_wav(manifest["scenes"][0]["files"]["mic"]);
  CHECK(mic.samples.size() == 24000);
}

TEST_CASE("process is deterministic and streaming matches offline") {
  const std::string dir = "/tmp/smru_cli_proc";
  (void)!std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str());

  // build a short scene via the simulator
  smru::SceneSpec spec;
  spec.seed = 8;
  spec.duration_s = 1.2;
  spec.scenario = smru::Scenario::DT;
  spec.ser_db = 5.0;
  spec.snr_db = 10.0;
  const smru::Scene scene = smru::mix_scene(spec);
  smru::write_wav(dir + "/mic.wav", scene.mic);
  smru::write_wav(dir + "/far.wav", scene.farend);
  smru::write_wav(dir + "/near.wav", scene.nearend);

  const std::string base_args = "process --mic " + dir + "/mic.wav --farend " + dir +
                                "/far.wav --preset T --seed 4 --target " + dir + "/near.wav";
  const RunResult a = run_cli(base_args + " --out " + dir + "/out_a.wav");
  REQUIRE(a.exit_code == 0);
  check_against_schema(json::parse(a.out), "metrics.schema.json");

  const RunResult b = run_cli(base_args + " --out " + dir + "/out_b.wav");
  REQUIRE(b.exit_code == 0);

  // bit-identical output files
  std::ifstream fa(dir + "/out_a.wav", std::ios::binary);
  std::ifstream fb(dir + "/out_b.wav", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);

  const RunResult s = run_cli(base_args + " --streaming --out " + dir + "/out_s.wav");
  REQUIRE(s.exit_code == 0);
  const json ja = json::parse(a.out), js = json::parse(s.out);
  CHECK(std::abs(ja["metrics"]["erle_db"].get<double>() -
                 js["metrics"]["erle_db"].get<double>()) < 1e-5);
  CHECK(std::abs(ja["metrics"]["si_snr_db"].get<double>() -
                 js["metrics"]["si_snr_db"].get<double>()) < 1e-5);
}

TEST_CASE("init-weights then process with the file") {
  const std::string dir = "/tmp/smru_cli_w";
  (void)!std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str());
  const RunResult iw = run_cli("init-weights --preset T --seed 4 --out " + dir + "/w.bin");
  REQUIRE(iw.exit_code == 0);

  smru::SceneSpec spec;
  spec.seed = 9;
  spec.duration_s = 1.0;
  spec.scenario = smru::Scenario::DT;
  spec.ser_db = 5.0;
  spec.snr_db = 10.0;
  const smru::Scene scene = smru::mix_scene(spec);
  smru::write_wav(dir + "/mic.wav", scene.mic);
  smru::write_wav(dir + "/far.wav", scene.farend);

  const RunResult with_file =
      run_cli("process --mic " + dir + "/mic.wav --farend " + dir + "/far.wav --preset T "
              "--weights " + dir + "/w.bin --out " + dir + "/out_file.wav");
  REQUIRE(with_file.exit_code == 0);
  const RunResult with_seed =
      run_cli("process --mic " + dir + "/mic.wav --farend " + dir + "/far.wav --preset T "
              "--seed 4 --out " + dir + "/out_seed.wav");
  REQUIRE(with_seed.exit_code == 0);

  std::ifstream fa(dir + "/out_file.wav", std::ios::binary);
  std::ifstream fb(dir + "/out_seed.wav", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("bench emits schema-conforming JSON") {
  const RunResult r = run_cli("bench --preset T --seconds 2");
  REQUIRE(r.exit_code == 0);
  const json parsed = json::parse(r.out);
  check_against_schema(parsed, "bench.schema.json");
  CHECK(parsed["rtf"].get<double>() > 0.0);
}

TEST_CASE("error exit codes: usage=2, format=3") {
  CHECK(run_cli("process --mic only").exit_code == 2);
  CHECK(run_cli("nonsense").exit_code == 2);

  const RunResult missing = run_cli(
      "process --mic /tmp/does_not_exist.wav --farend /tmp/nope.wav --out /tmp/x.wav");
  CHECK(missing.exit_code == 3);
  CHECK(json::parse(missing.err)["error"]["code"] == "format");
}
