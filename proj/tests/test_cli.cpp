// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr together
};

Run cli(const std::string& args, const fs::path& cwd = fs::temp_directory_path()) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" DGDM_CLI_PATH "' " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("dgdm_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kTiny =
    "-s dataset.n_clips=8 -s dataset.height=16 -s dataset.width=16 -s dataset.digit_size=8 "
    "-s dataset.input_length=2 -s dataset.forecast_length=2 -s dataset.dir=data";

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli("--help").code, 0);
  EXPECT_EQ(cli("sample --help").code, 0);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("train --bogus").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("config").code, 2);
  EXPECT_EQ(cli("sample --split test").code, 2);  // --checkpoint is required
}

TEST(Cli, UnknownKeyNamesTheKey) {
  auto r = cli("config show -s train.learning_rate=3");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("train.learning_rate"), std::string::npos);
  const auto dir = scratch("badfile");
  std::ofstream(dir / "c.json") << R"({"model": {"pb": {"bse": 3}}})";
  r = cli("config show -c c.json", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("model.pb.bse"), std::string::npos);
  EXPECT_EQ(cli("config show -s svs.mode=wide").code, 2);
  EXPECT_EQ(cli("config show -s model.pb.groups=5").code, 2);
}

TEST(Cli, ConfigCommandsPrintJson) {
  auto r = cli("config defaults");
  ASSERT_EQ(r.code, 0);
  auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["diffusion.T"], 1000);
  r = cli("config show -s train.batch_size=3");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["train.batch_size"], 3);
  for (const char* s : {"config schema", "config report-schema"}) {
    r = cli(s);
    ASSERT_EQ(r.code, 0) << s;
    EXPECT_EQ(nlohmann::json::parse(r.out)["$schema"], "https://json-schema.org/draft/2020-12/schema");
  }
}

TEST(Cli, DataAndCheckpointFailures) {
  const auto dir = scratch("data");
  EXPECT_EQ(cli("gen-data " + kTiny, dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "data" / "manifest.json"));
  auto r = cli("gen-data " + kTiny, dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("--force"), std::string::npos);
  EXPECT_EQ(cli("gen-data --force " + kTiny, dir).code, 0);
  EXPECT_EQ(cli("train -s dataset.dir=missing", dir).code, 3);
  EXPECT_EQ(cli("train " + kTiny + " -s dataset.height=32", dir).code, 2);
  EXPECT_EQ(cli("sample --checkpoint nothing.pt", dir).code, 2);
  EXPECT_EQ(cli("eval -f nothing --out e", dir).code, 2);
  EXPECT_EQ(cli("train " + kTiny + " --resume auto -s output.dir=fresh", dir).code, 3);
}
