// Copyright 2026 The zacn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "zacn/io.hpp"

namespace zacn {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("zacn_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
    io::save_intrinsics(path("cam.txt"), {40.0, 40.0, 15.5, 11.5});
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Runs the CLI with `args`; stdout and stderr go to files in the temp dir.
  int run(const std::string& args) {
    const std::string cmd =
        std::string(ZACN_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string err() const { return io::read_file(path("stderr.txt")); }
  std::string out() const { return io::read_file(path("stdout.txt")); }

  fs::path dir_;
};

DepthMap tilted_plane(std::size_t h, std::size_t w, const CameraIntrinsics& k) {
  const Point3 n{0.3, -0.4, 0.866};
  DepthMap d(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      d.at(r, c) = 2.0 / dot(n, pixel_ray({static_cast<double>(c), static_cast<double>(r)}, k));
    }
  }
  return d;
}

TEST_F(CliTest, OffsetsOnConstantDepth) {
  io::save_depth_pgm(path("flat.pgm"), DepthMap(24, 32, 1.5));
  ASSERT_EQ(run("offsets --depth " + path("flat.pgm") + " --intrinsics " + path("cam.txt") +
                " --kernel 3 --dilation 1 --stride 1 --padding 1 --out " + path("f.zoff")),
            0)
      << err();
  const OffsetField f = io::load_offsets(path("f.zoff"));
  EXPECT_EQ(f.channels, 18u);
  EXPECT_EQ(f.height, 24u);
  EXPECT_EQ(f.width, 32u);
  EXPECT_LT(f.max_abs(), 1e-6f);
  EXPECT_NE(out().find("18 channels"), std::string::npos);
}

TEST_F(CliTest, OffsetsHonoursStrideAndZref) {
  io::save_depth_pfm(path("plane.pfm"), tilted_plane(24, 32, {40, 40, 15.5, 11.5}));
  ASSERT_EQ(run("offsets --depth " + path("plane.pfm") + " --intrinsics " + path("cam.txt") +
                " --kernel 5 --dilation 2 --stride 2 --padding 4 --zref 3 --out " + path("f.zoff")),
            0)
      << err();
  const OffsetField f = io::load_offsets(path("f.zoff"), ConvSpec{5, 2, 2, 4});
  EXPECT_EQ(f.height, 12u);
  EXPECT_EQ(f.width, 16u);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run("offsets --intrinsics " + path("cam.txt") +
                " --kernel 3 --dilation 1 --stride 1 --padding 0 --out " + path("f.zoff")),
            2);
  EXPECT_NE(err().find("--depth"), std::string::npos);
  EXPECT_EQ(run("offsets --bogus"), 2);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("show-rf --depth a --intrinsics b --at 3 --kernel 3 --dilation 1 --out c"), 2);
}

TEST_F(CliTest, RunErrorsNameTheFile) {
  io::write_file(path("bad.pgm"), "P5\n2 2\n255\n....");
  EXPECT_EQ(run("offsets --depth " + path("bad.pgm") + " --intrinsics " + path("cam.txt") +
                " --kernel 3 --dilation 1 --stride 1 --padding 0 --out " + path("f.zoff")),
            1);
  EXPECT_NE(err().find("bad.pgm"), std::string::npos);
  io::save_depth_pgm(path("flat.pgm"), DepthMap(24, 32, 1.5));
  EXPECT_EQ(run("offsets --depth " + path("flat.pgm") + " --intrinsics " + path("cam.txt") +
                " --kernel 4 --dilation 1 --stride 1 --padding 0 --out " + path("f.zoff")),
            1);
  EXPECT_EQ(run("offsets --depth " + path("missing.pgm") + " --intrinsics " + path("cam.txt") +
                " --kernel 3 --dilation 1 --stride 1 --padding 0 --out " + path("f.zoff")),
            1);
  EXPECT_NE(err().find("missing.pgm"), std::string::npos);
}

TEST_F(CliTest, ShowRfFrontoParallelMarksTheRegularGrid) {
  io::save_depth_pgm(path("flat.pgm"), DepthMap(24, 32, 2.0));
  ASSERT_EQ(run("show-rf --depth " + path("flat.pgm") + " --intrinsics " + path("cam.txt") +
                " --at 10,12 --kernel 3 --dilation 2 --out " + path("rf.ppm")),
            0)
      << err();
  const Tensor img = io::load_rgb(path("rf.ppm"));
  ASSERT_EQ(img.shape(), (Shape{3, 24, 32}));
  int red = 0;
  for (std::size_t r = 0; r < 24; ++r) {
    for (std::size_t c = 0; c < 32; ++c) {
      const bool is_red = img.at(0, r, c) == 1.0 && img.at(1, r, c) == 0.0 && img.at(2, r, c) == 0.0;
      const bool expected = (r == 10 || r == 12 || r == 14) && (c == 8 || c == 10 || c == 12);
      EXPECT_EQ(is_red, expected) << r << "," << c;
      red += is_red;
    }
  }
  EXPECT_EQ(red, 9);
}

TEST_F(CliTest, ShowRfVerifiesPlanarity) {
  io::save_depth_pfm(path("plane.pfm"), tilted_plane(24, 32, {40, 40, 15.5, 11.5}));
  ASSERT_EQ(run("show-rf --depth " + path("plane.pfm") + " --intrinsics " + path("cam.txt") +
                " --at 16,12 --kernel 3 --dilation 1 --out " + path("rf.ppm") + " --verify"),
            0)
      << err();
  EXPECT_NE(out().find("depth-adapted"), std::string::npos);
  EXPECT_NE(out().find("verify: max distance"), std::string::npos);
  EXPECT_EQ(io::read_file(path("rf.ppm")).substr(0, 2), "P6");
}

TEST_F(CliTest, ShowRfOutOfBounds) {
  io::save_depth_pgm(path("flat.pgm"), DepthMap(24, 32, 2.0));
  EXPECT_EQ(run("show-rf --depth " + path("flat.pgm") + " --intrinsics " + path("cam.txt") +
                " --at 32,0 --kernel 3 --dilation 1 --out " + path("rf.ppm")),
            1);
  EXPECT_NE(err().find("--at"), std::string::npos);
}

TEST_F(CliTest, TrainIsDeterministicAndEvalReproducesIt) {
  io::write_file(path("cfg.txt"),
                 "channels=4\nkernels=3\ndilations=1\nlearning_rate=0.05\nmomentum=0.9\nepochs=2\n"
                 "height=16\nwidth=16\ntest_scenes=3\n");
  const std::string common = "train --config " + path("cfg.txt") + " --scenes 4 --seed 11 --out ";
  ASSERT_EQ(run(common + path("a")), 0) << err();
  ASSERT_EQ(run(common + path("b")), 0) << err();
  const std::string metrics = io::read_file(path("a/metrics.txt"));
  EXPECT_EQ(metrics, io::read_file(path("b/metrics.txt")));
  EXPECT_EQ(io::read_file(path("a/loss.csv")), io::read_file(path("b/loss.csv")));
  for (const char* key : {"acc=", "m_acc=", "m_iou=", "fw_iou="}) EXPECT_NE(metrics.find(key), std::string::npos);

  ASSERT_EQ(run("eval --model " + path("a") + " --scenes 3 --seed 11"), 0) << err();
  EXPECT_EQ(out(), metrics);
}

TEST_F(CliTest, TrainWithoutGuidanceCompletes) {
  io::write_file(path("cfg.txt"), "channels=4\nkernels=3\ndilations=1\nepochs=1\nheight=16\nwidth=16\n"
                                  "test_scenes=2\ndepth_guidance=0\n");
  ASSERT_EQ(run("train --config " + path("cfg.txt") + " --scenes 2 --seed 1 --out " + path("m")), 0) << err();
  const auto kv = io::load_key_values(path("m/metrics.txt"));
  for (const char* key : {"acc", "m_acc", "m_iou", "fw_iou"}) EXPECT_TRUE(kv.contains(key)) << key;
}

TEST_F(CliTest, DivergenceExitsWithStep) {
  io::write_file(path("cfg.txt"), "channels=4\nkernels=3\ndilations=1\nepochs=50\nlearning_rate=1e306\n"
                                  "momentum=0.9\nheight=16\nwidth=16\ntest_scenes=1\ndepth_guidance=0\n");
  EXPECT_EQ(run("train --config " + path("cfg.txt") + " --scenes 2 --seed 1 --out " + path("m")), 1);
  EXPECT_NE(err().find("step"), std::string::npos);
}

TEST_F(CliTest, BadConfigNamesTheKey) {
  io::write_file(path("cfg.txt"), "widht=16\n");
  EXPECT_EQ(run("train --config " + path("cfg.txt") + " --scenes 2 --seed 1 --out " + path("m")), 1);
  EXPECT_NE(err().find("widht"), std::string::npos);
}

}  // namespace
}  // namespace zacn
