// SPDX-License-Identifier: Apache-2.0
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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / "siplab_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir.string() + "' && '" SIPLAB_CLI_PATH "' " + args + " >out.txt 2>err.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string file(const std::string& name) const {
    std::ifstream in(dir / name);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path dir;
};

}  // namespace

TEST_F(Cli, HelpSucceeds) { EXPECT_EQ(run("--help"), 0); }

TEST_F(Cli, UsageErrorsAreConfigErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("--preset huge gen-data"), 2);
  EXPECT_EQ(run("pdp-report"), 2);
}

TEST_F(Cli, BadConfigFileIsConfigError) {
  std::ofstream(dir / "bad.cfg") << "no_such_key = 1\n";
  EXPECT_EQ(run("--config bad.cfg gen-data"), 2);
  EXPECT_NE(file("err.txt").find("no_such_key"), std::string::npos);
  EXPECT_EQ(run("--config missing.cfg gen-data"), 2);
}

TEST_F(Cli, BadFilesAreFormatErrors) {
  std::ofstream(dir / "junk.sipckpt") << "not a container";
  EXPECT_EQ(run("inspect-ckpt junk.sipckpt"), 3);
  EXPECT_EQ(run("inspect-ckpt missing.sipckpt"), 3);
  EXPECT_EQ(run("--preset tiny pdp-report --checkpoint junk.sipckpt"), 3);
  std::ofstream(dir / "tiny.cfg") << "dataset = junk.sipckpt\n";
  EXPECT_EQ(run("--preset tiny --config tiny.cfg train"), 3);
}

TEST_F(Cli, TinyWorkflow) {
  ASSERT_EQ(run("--preset tiny --out o gen-data"), 0);
  EXPECT_TRUE(fs::exists(dir / "o" / "dataset.sipds"));
  ASSERT_EQ(run("--preset tiny --seed 3 --out o train"), 0);
  EXPECT_EQ(file("o/metrics.csv").substr(0, 45), "epoch,train_loss,val_loss,val_nmse_db,lr,seed");
  ASSERT_TRUE(fs::exists(dir / "o" / "best.sipckpt"));
  EXPECT_EQ(run("inspect-ckpt o/best.sipckpt"), 0);
  EXPECT_NE(file("out.txt").find("sipckpt-v1"), std::string::npos);
  EXPECT_EQ(run("--preset tiny --out o pdp-report --checkpoint o/best.sipckpt"), 2);
  std::ofstream(dir / "wide.cfg") << "S = 12\n";
  ASSERT_EQ(run("--preset tiny --config wide.cfg --out w train"), 0);
  EXPECT_EQ(run("--preset tiny --config wide.cfg --out w pdp-report --checkpoint w/best.sipckpt"), 0);
  EXPECT_TRUE(fs::exists(dir / "w" / "pdp_report.csv"));
  EXPECT_TRUE(fs::exists(dir / "w" / "plots" / "pdp_user1.svg"));
  std::ofstream(dir / "sweep.cfg") << "eval.trials = 4\n";
  EXPECT_EQ(run("--preset tiny --config sweep.cfg --out o eval-sweep --casip o/best.sipckpt --sipce o/best.sipckpt"), 0);
  EXPECT_EQ(file("o/sweep.csv").substr(0, 9), "scheme,sn");
  EXPECT_TRUE(fs::exists(dir / "o" / "plots" / "nmse.svg"));
  EXPECT_EQ(run("--preset tiny --config sweep.cfg --out o eval-sweep"), 3);
}

TEST_F(Cli, GradCheckPasses) { EXPECT_EQ(run("grad-check --coords 8"), 0); }
