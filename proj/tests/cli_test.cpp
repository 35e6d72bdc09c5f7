#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "clpose/cli.hpp"

namespace clpose {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "clpose");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("clpose_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::vector<std::string> listing() const {
    std::vector<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(dir_)) names.push_back(e.path().lexically_relative(dir_).string());
    std::sort(names.begin(), names.end());
    return names;
  }

  fs::path dir_;
};

TEST_F(CliTest, RoundtripOnSyntheticData) {
  const auto r = run({"--seed", "3", "roundtrip", "--count", "50", "--keypoints", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["keypoints"], 150);
  EXPECT_LT(j["max_error"].get<double>(), 1e-6);
  EXPECT_EQ(j["fallback_count"], 0);
  EXPECT_GT(j["argmax_mean_error"].get<double>(), 1.0);
}

TEST_F(CliTest, GradcheckSeedZeroPasses) {
  const auto r = run({"--seed", "0", "gradcheck", "--width", "128", "--height", "128"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_LT(j["max_relative_error"].get<double>(), 1e-4);
  EXPECT_TRUE(j["pass"].get<bool>());
}

TEST_F(CliTest, GradcheckExitsNonzeroAboveTolerance) {
  // A zero tolerance cannot be met by finite differences.
  const auto r = run({"gradcheck", "--pairs", "1", "--width", "64", "--height", "64", "--tolerance", "0"});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(nlohmann::json::parse(r.out)["pass"].get<bool>());
}

TEST_F(CliTest, EncodeDecodeAndLoss) {
  const auto synth = path("synth.json");
  ASSERT_EQ(run({"--seed", "1", "--out", synth, "synth", "--count", "2", "--keypoints", "2"}).code, 0);
  const auto enc = run({"--out", path("maps"), "encode", "--annotations", synth});
  ASSERT_EQ(enc.code, 0) << enc.err;
  EXPECT_EQ(nlohmann::json::parse(enc.out)["files"], nlohmann::json::parse(R"(["0_0.clm", "1_0.clm"])"));

  const auto set = ingest_simple(synth);
  const auto dec = run({"decode", path("maps/0_0.clm")});
  ASSERT_EQ(dec.code, 0) << dec.err;
  const auto kps = nlohmann::json::parse(dec.out)["keypoints"];
  ASSERT_EQ(kps.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(kps[k]["x"].get<double>(), set.images[0].instances[0].keypoints[k].x, 1e-3);
    EXPECT_NEAR(kps[k]["y"].get<double>(), set.images[0].instances[0].keypoints[k].y, 1e-3);
  }
  EXPECT_EQ(run({"decode", "--decoder", "argmax", path("maps/0_0.clm")}).code, 0);

  for (const std::string variant : {"composite", "peak-mse", "grmi"}) {
    const auto same = run({"loss", "--target", path("maps/0_0.clm"), "--predicted", path("maps/0_0.clm"),
                           "--variant", variant});
    ASSERT_EQ(same.code, 0) << same.err;
    const auto j = nlohmann::json::parse(same.out);
    EXPECT_EQ(j["variant"], variant);
    if (variant != "grmi") {
      EXPECT_EQ(j["total"].get<double>(), 0.0);
    }
  }
  const auto diff = run({"loss", "--target", path("maps/0_0.clm"), "--predicted", path("maps/1_0.clm")});
  EXPECT_GT(nlohmann::json::parse(diff.out)["total"].get<double>(), 0.0);
}

TEST_F(CliTest, EvalPckPerfectPredictions) {
  const auto synth = path("gt.json");
  ASSERT_EQ(run({"--out", synth, "synth", "--count", "5", "--keypoints", "3"}).code, 0);
  const auto r = run({"eval-pck", "--predictions", synth, "--annotations", synth});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["overall"].get<double>(), 1.0);
  const auto h = run({"eval-pck", "--predictions", synth, "--annotations", synth, "--normalizer", "head",
                      "--alpha", "0.5"});
  EXPECT_EQ(nlohmann::json::parse(h.out)["overall"].get<double>(), 1.0);
}

TEST_F(CliTest, EvalOksPerfectPredictions) {
  const auto synth = path("gt.json");
  ASSERT_EQ(run({"--out", synth, "synth", "--count", "4", "--keypoints", "2"}).code, 0);
  const auto r = run({"eval-oks", "--predictions", synth, "--annotations", synth});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["ap"].get<double>(), 1.0);
  EXPECT_EQ(j["ar"].get<double>(), 1.0);
}

TEST_F(CliTest, FitReportsConvergedDecode) {
  const auto r = run({"fit", "--count", "2", "--max-iters", "3000", "--stop-loss", "1e-3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["instances"], 2);
  EXPECT_LT(j["max_decode_error"].get<double>(), 0.5);
}

TEST_F(CliTest, SweepCsv) {
  const auto r = run({"sweep-stride", "--count", "100", "--strides", "4,32"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "stride,grid_width,grid_height,composite_mean_error,argmax_mean_error,n_omega_mean,plane_count");
  std::string row;
  std::getline(lines, row);
  EXPECT_EQ(row.rfind("4,64,64,", 0), 0u) << row;
  std::getline(lines, row);
  EXPECT_EQ(row.rfind("32,8,8,", 0), 0u) << row;
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"--norm-mode", "cubic", "roundtrip"}).code, 2);
  EXPECT_EQ(run({"--tau", "1.5", "roundtrip", "--count", "1"}).code, 2);
  EXPECT_EQ(run({"--stride", "0", "roundtrip", "--count", "1"}).code, 2);
  EXPECT_EQ(run({"encode"}).code, 2);
  EXPECT_EQ(run({"decode"}).code, 2);
}

TEST_F(CliTest, OperationalErrorsExitOne) {
  const auto r = run({"decode", path("absent.clm")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("absent.clm"), std::string::npos);
  write_file_atomic(path("bad.clm"), "XXXXjunk");
  EXPECT_EQ(run({"decode", path("bad.clm")}).code, 1);
}

TEST_F(CliTest, IdenticalInputsGiveIdenticalBytes) {
  const std::vector<std::vector<std::string>> commands = {
      {"--seed", "4", "roundtrip", "--count", "20"},
      {"--seed", "4", "gradcheck", "--pairs", "2", "--width", "64", "--height", "64"},
      {"--seed", "4", "synth", "--count", "3", "--keypoints", "2"},
      {"--seed", "4", "sweep-stride", "--count", "20", "--noise-kind", "offset-jitter", "--noise-magnitude", "0.1"},
      {"--seed", "4", "fit", "--count", "1", "--max-iters", "50", "--init", "noise"},
  };
  for (const auto& cmd : commands) {
    const auto a = run(cmd);
    const auto b = run(cmd);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
  }
  ASSERT_EQ(run({"--out", path("a.json"), "synth", "--count", "3"}).code, 0);
  ASSERT_EQ(run({"--out", path("b.json"), "synth", "--count", "3"}).code, 0);
  EXPECT_EQ(read_file(path("a.json")), read_file(path("b.json")));
}

TEST_F(CliTest, FailuresLeaveNoOutputFiles) {
  // A keypoint outside its image makes encoding fail part way through.
  AnnotationSet set;
  set.profile = "synthetic-1";
  ImageEntry ok{0, 64, 64, {}};
  PoseInstance inside;
  inside.keypoints = {{10.0, 10.0, Visibility::kVisible}};
  ok.instances.push_back(inside);
  ImageEntry bad{1, 64, 64, {}};
  PoseInstance outside;
  outside.keypoints = {{100.0, 10.0, Visibility::kVisible}};
  bad.instances.push_back(outside);
  set.images = {ok, bad};
  write_simple(set, path("set.json"));

  EXPECT_EQ(run({"--out", path("maps"), "encode", "--annotations", path("set.json")}).code, 1);
  for (const auto& name : listing()) {
    EXPECT_EQ(name.find(".clm"), std::string::npos) << name;
    EXPECT_EQ(name.find(".partial"), std::string::npos) << name;
  }

  EXPECT_EQ(run({"--out", path("report.json"), "decode", path("missing.clm")}).code, 1);
  EXPECT_FALSE(fs::exists(path("report.json")));
}

}  // namespace
}  // namespace clpose
