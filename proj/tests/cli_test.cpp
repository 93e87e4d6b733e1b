// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aclora/vector_store.hpp"

namespace aclora {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(ACLORA_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("aclora_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(CliTest, IngestThreeDocsOfTwoHundredFiftyTokens) {
  fs::create_directories(dir_ / "docs");
  for (int d = 0; d < 3; ++d) {
    std::ofstream f(dir_ / "docs" / ("d" + std::to_string(d) + ".txt"));
    for (int i = 0; i < 250; ++i) f << "w" << d << "_" << i << (i % 17 == 16 ? "\n" : " ");
  }
  const auto r = run("ingest " + (dir_ / "docs").string() + " --tag law --store " + (dir_ / "s.acstore").string() +
                     " --chunk-size 100 --dim 32");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto store = VectorStore::load(dir_ / "s.acstore");
  EXPECT_EQ(store.size(), 9U);
  EXPECT_EQ(store.count_tag(AdapterId("law")), 9U);
  EXPECT_EQ(store.dim(), 32U);

  // Dimension disagreement with an existing store is a runtime error.
  EXPECT_EQ(run("ingest " + (dir_ / "docs").string() + " --tag law --store " + (dir_ / "s.acstore").string() + " --dim 64").code, 2);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("query --user u").code, 1);
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("ingest /nonexistent --tag a --store x.acstore").code, 1);
  EXPECT_EQ(run("query --user u --text hi --config " + (dir_ / "missing.json").string()).code, 2);
  EXPECT_EQ(run("bench latency --adapters 3..1").code, 1);
  EXPECT_EQ(run("bench retrieval --corpus synthetic --k 20").code, 1);
}

TEST_F(CliTest, BenchLatencyCsv) {
  const auto r = run("bench latency --adapters 1..3 --reps 3 --warmup 1 --dim 16 --hidden 16 --rank 2");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("active_adapters,median_ttft_ms,p95_ttft_ms,samples\n", 0), 0U);
  EXPECT_EQ(lines(r.out), 4U);
  EXPECT_NE(r.out.find("\n3,"), std::string::npos);
  EXPECT_EQ(r.out.find('\r'), std::string::npos);
}

TEST_F(CliTest, BenchRetrievalSyntheticAndFile) {
  auto r = run("bench retrieval --corpus synthetic");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("topic,queries,hit_rate,mean_retrieved\n", 0), 0U);
  EXPECT_EQ(lines(r.out), 6U);

  std::ofstream(dir_ / "c.jsonl") << R"({"topic": "red", "kind": "document", "text": "apple cherry rose ruby apple cherry"})" "\n"
                                  << R"({"topic": "blue", "kind": "document", "text": "sky ocean sapphire sky ocean"})" "\n"
                                  << R"({"topic": "red", "kind": "query", "text": "ruby apple"})" "\n"
                                  << R"({"topic": "blue", "kind": "query", "text": "ocean sky"})" "\n";
  r = run("bench retrieval --corpus " + (dir_ / "c.jsonl").string() + " --k 1 --fetch-k 2");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("red,1,1.000000,1.000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("blue,1,1.000000,1.000000"), std::string::npos) << r.out;
}

TEST_F(CliTest, AuditCsvAndJson) {
  std::ofstream(dir_ / "p.jsonl") << R"({"id": "p1", "text": "a b c d e f"})" "\n";
  std::ofstream(dir_ / "t.jsonl") << R"({"id": "t1", "text": "x a b c d y"})" "\n";
  auto r = run("audit --pred " + (dir_ / "p.jsonl").string() + " --train " + (dir_ / "t.jsonl").string() + " --n 2,4,5");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out,
            "prediction_id,n,absolute,relative,interval_count\n"
            "p1,2,4,0.666667,1\n"
            "p1,4,4,0.666667,1\n"
            "p1,5,0,0.000000,0\n");
  r = run("audit --json --pred " + (dir_ / "p.jsonl").string() + " --train " + (dir_ / "t.jsonl").string() + " --n 3");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"absolute\":4"), std::string::npos) << r.out;
  EXPECT_EQ(run("audit --pred " + (dir_ / "p.jsonl").string() + " --train " + (dir_ / "t.jsonl").string() + " --n 0").code, 1);
}

TEST_F(CliTest, InitThenQuery) {
  ASSERT_EQ(run("init " + dir_.string() + " --dim 64").code, 0);
  const auto r = run("query --config " + (dir_ / "aclora.json").string() + " --user alice --text \"" +
                     [&] {
                       std::ifstream in(dir_ / "sample_queries.txt");
                       std::string tag, text;
                       std::getline(in, tag, '\t');
                       std::getline(in, text);
                       return text;
                     }() +
                     "\"");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("\"topic0\""), std::string::npos) << r.out;
  EXPECT_EQ(run("query --config " + (dir_ / "aclora.json").string() + " --user alice --text \"  \"").code, 1);
}

}  // namespace
}  // namespace aclora
