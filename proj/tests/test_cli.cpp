/* Copyright 2026 The wsad Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "wsad/cli.hpp"
#include "wsad/feature_map.hpp"

using wsad::testing::TempDir;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  args.insert(args.begin(), "wsad");
  const int code = wsad::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  const auto bytes = wsad::read_file_bytes(p);
  return std::string(bytes.begin(), bytes.end());
}

// Small dataset so every stage runs in well under a second.
std::string make_data(const TempDir& dir, const std::string& extra_anomaly = "4") {
  const std::string root = (dir / "data").string();
  const auto r = cli({"synth", "--out", root, "--seed", "3", "--normal-train", "12", "--anomaly-train", extra_anomaly,
                      "--normal-test", "8", "--anomaly-test", "8", "--height", "8", "--width", "8", "--channels",
                      "8", "--blob", "3x3"});
  REQUIRE(r.code == 0);
  return root + "/manifest.jsonl";
}

const std::vector<std::string> kFast{"--epochs", "5", "--batch", "64", "--lr", "1e-3"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli({"run", "--no-such-flag"}).code == wsad::kExitUsage);
  CHECK(cli({"frobnicate"}).code == wsad::kExitUsage);
  CHECK(cli({"mine", "--bank", "x"}).code == wsad::kExitUsage);  // missing required options
  CHECK(cli({}).code == wsad::kExitUsage);

  // Same contract through the real binary.
  if (const char* bin = std::getenv("WSAD_BIN")) {
    const std::string cmd = std::string("\"") + bin + "\" run --no-such-flag >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 2);
    const std::string ok = std::string("\"") + bin + "\" --help >/dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(ok.c_str())) == 0);
  }
}

TEST_CASE("missing upstream artifacts name the producing command") {
  TempDir dir;
  const auto manifest = make_data(dir);
  const auto r = cli({"mine", "--manifest", manifest, "--bank", (dir / "nope").string(), "--out",
                      (dir / "mined").string()});
  CHECK(r.code == wsad::kExitFailure);
  CHECK(r.err.find("wsad bank build") != std::string::npos);

  const auto t = cli({"train", "--bank", (dir / "nope").string(), "--augmented", (dir / "aug").string(), "--out",
                      (dir / "m.wsdm").string()});
  CHECK(t.code == wsad::kExitFailure);
  CHECK(t.err.find("wsad bank build") != std::string::npos);
}

TEST_CASE("bank build works directly on raw maps without an aggregate step") {
  TempDir dir;
  const auto manifest = make_data(dir);
  const auto r = cli({"bank", "build", "--manifest", manifest, "--out", (dir / "bank").string()});
  REQUIRE(r.code == 0);
  CHECK(wsad::read_feature_map(dir / "bank.wsfx").height == 12 * 8 * 8);
}

TEST_CASE("aggregate then bank build matches the direct path") {
  TempDir dir;
  const auto manifest = make_data(dir);
  REQUIRE(cli({"aggregate", "--manifest", manifest, "--out", (dir / "agg").string()}).code == 0);
  REQUIRE(cli({"bank", "build", "--manifest", (dir / "agg/manifest.jsonl").string(), "--out",
               (dir / "b1").string()}).code == 0);
  REQUIRE(cli({"bank", "build", "--manifest", manifest, "--out", (dir / "b2").string()}).code == 0);
  CHECK(slurp(dir / "b1.wsfx") == slurp(dir / "b2.wsfx"));
}

TEST_CASE("staged pipeline reproduces a one-shot run bytewise") {
  TempDir dir;
  const auto manifest = make_data(dir);
  const std::string s = (dir / "staged").string();
  REQUIRE(cli({"bank", "build", "--manifest", manifest, "--out", s + "/bank", "--seed", "7"}).code == 0);
  REQUIRE(cli({"mine", "--manifest", manifest, "--bank", s + "/bank", "--r", "0.2", "--out", s + "/mined"}).code == 0);
  REQUIRE(cli({"mix", "--mined", s + "/mined", "--bank", s + "/bank", "--seed", "7", "--out", s + "/aug"}).code == 0);
  REQUIRE(cli(with({"train", "--bank", s + "/bank", "--augmented", s + "/aug", "--seed", "7", "--out",
                    s + "/model.wsdm"},
                   kFast))
              .code == 0);
  REQUIRE(cli({"score", "--model", s + "/model.wsdm", "--manifest", manifest, "--out", s + "/scores.jsonl"}).code ==
          0);
  const auto ev = cli({"eval", "--scores", s + "/scores.jsonl", "--out", s + "/report.json"});
  REQUIRE(ev.code == 0);

  const std::string o = (dir / "oneshot").string();
  REQUIRE(cli(with({"run", "--manifest", manifest, "--out", o, "--seed", "7", "--r", "0.2"}, kFast)).code == 0);

  CHECK(slurp(s + "/bank.wsfx") == slurp(o + "/bank.wsfx"));
  CHECK(slurp(s + "/mined.wsfx") == slurp(o + "/mined.wsfx"));
  CHECK(slurp(s + "/aug.wsfx") == slurp(o + "/run-0/augmented.wsfx"));
  CHECK(slurp(s + "/model.wsdm") == slurp(o + "/run-0/model.wsdm"));
  CHECK(slurp(s + "/scores.jsonl") == slurp(o + "/run-0/scores.jsonl"));
}

TEST_CASE("run.json replays to identical results; flags override it") {
  TempDir dir;
  const auto manifest = make_data(dir);
  const std::string a = (dir / "a").string();
  REQUIRE(cli(with({"run", "--manifest", manifest, "--out", a, "--seed", "2"}, kFast)).code == 0);
  const std::string b = (dir / "b").string();
  REQUIRE(cli({"run", "--config", a + "/run.json", "--out", b}).code == 0);
  CHECK(slurp(a + "/run-0/scores.jsonl") == slurp(b + "/run-0/scores.jsonl"));
  CHECK(slurp(a + "/report.json") == slurp(b + "/report.json"));

  const std::string c = (dir / "c").string();
  REQUIRE(cli({"run", "--config", a + "/run.json", "--out", c, "--seed", "3"}).code == 0);
  CHECK(slurp(a + "/run-0/model.wsdm") != slurp(c + "/run-0/model.wsdm"));
}

TEST_CASE("repeated runs report mean and std") {
  TempDir dir;
  const auto manifest = make_data(dir);
  const std::string o = (dir / "rep").string();
  REQUIRE(cli(with({"run", "--manifest", manifest, "--out", o, "--repeat", "3"}, kFast)).code == 0);
  for (int i = 0; i < 3; ++i) CHECK(std::filesystem::exists(o + "/run-" + std::to_string(i) + "/scores.jsonl"));
  const auto report = nlohmann::json::parse(slurp(o + "/report.json"));
  CHECK(report["runs"].size() == 3);
  CHECK(report["summary"]["auroc"].contains("std"));
  CHECK(slurp(o + "/report.md").find("±") != std::string::npos);

  // eval over the per-run files agrees with the run's own aggregation.
  const auto ev = cli({"eval", "--scores", o + "/run-0/scores.jsonl", "--scores", o + "/run-1/scores.jsonl",
                       "--scores", o + "/run-2/scores.jsonl", "--out", (dir / "ev.json").string()});
  REQUIRE(ev.code == 0);
  CHECK(slurp(dir / "ev.json") == slurp(o + "/report.json"));
}

TEST_CASE("ablation flags change only the intended stages") {
  TempDir dir;
  const auto manifest = make_data(dir);
  const std::string nm = (dir / "no-mining").string();
  REQUIRE(cli(with({"run", "--manifest", manifest, "--out", nm, "--no-mining"}, kFast)).code == 0);
  const auto mined = wsad::read_feature_map(nm + "/mined.wsfx");
  CHECK(mined.height == 4 * 8 * 8);  // every anomaly-image feature kept

  const std::string nx = (dir / "no-mixing").string();
  REQUIRE(cli(with({"run", "--manifest", manifest, "--out", nx, "--no-mixing"}, kFast)).code == 0);
  CHECK(slurp(nx + "/mined.wsfx") == slurp(nx + "/run-0/augmented.wsfx"));
}

TEST_CASE("no anomaly images falls back to kNN scoring") {
  TempDir dir;
  const auto manifest = make_data(dir, "0");
  const std::string o = (dir / "knn").string();
  const auto r = cli({"run", "--manifest", manifest, "--out", o});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("kNN") != std::string::npos);
  CHECK(std::filesystem::exists(o + "/run-0/scores.jsonl"));
  CHECK_FALSE(std::filesystem::exists(o + "/mined.wsfx"));

  // The staged kNN scorer gives the same file.
  REQUIRE(cli({"score", "--knn-bank", o + "/bank", "--manifest", manifest, "--out", (dir / "s.jsonl").string()})
              .code == 0);
  CHECK(slurp(dir / "s.jsonl") == slurp(o + "/run-0/scores.jsonl"));
}

TEST_CASE("score writes maps and renders on request") {
  TempDir dir;
  const auto manifest = make_data(dir);
  const std::string o = (dir / "r").string();
  REQUIRE(cli(with({"run", "--manifest", manifest, "--out", o, "--write-maps", "--render"}, kFast)).code == 0);
  CHECK(std::filesystem::exists(o + "/run-0/maps/test-anomaly-0000.wsfx"));
  CHECK(std::filesystem::exists(o + "/run-0/renders/test-anomaly-0000.pgm"));
}
