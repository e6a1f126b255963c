#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "pgr/io.hpp"
#include "pgr/metrics.hpp"
#include "pgr/random.hpp"

using namespace pgr;
namespace fs = std::filesystem;

#ifndef PGR_CLI_PATH
#error "PGR_CLI_PATH must point at the pgr executable"
#endif
#ifndef PGR_DATA_DIR
#error "PGR_DATA_DIR must point at the data directory"
#endif

namespace {

struct CliRun {
  int status = -1;
  std::string output;
};

CliRun pgr_cli(const std::string& args) {
  const std::string cmd = std::string(PGR_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string kernel(const std::string& name) { return (fs::path(PGR_DATA_DIR) / "kernels" / name).string(); }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pgr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string smooth_image(const std::string& name, std::size_t size, std::uint64_t seed) const {
    RandomStream rng(seed);
    ImageTensor x(Shape{1, size, size});
    const double a = rng.uniform(0.5, 2.0);
    const double b = rng.uniform(0.5, 2.0);
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j)
        x.at(0, i, j) = 0.5 + 0.3 * std::sin(a * static_cast<double>(i) / 4.0) * std::cos(b * static_cast<double>(j) / 5.0);
    const std::string p = path(name);
    io::write_pnm(p, x);
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, NoiselessIdentityDegradeRoundTrip) {
  const std::string img = smooth_image("x.pgm", 16, 1);
  const CliRun r = pgr_cli("degrade --task deblur --kernel " + kernel("identity.txt") + " --sigma-e 0 --input " +
                        img + " --output " + path("y.pgt"));
  ASSERT_EQ(r.status, 0) << r.output;
  const ImageTensor x = io::read_image(img);
  const ImageTensor y = io::read_tensor(path("y.pgt"));
  EXPECT_LT(max_abs_diff(x, y), 1e-7);
  const std::string meta = slurp(path("y.pgt.meta"));
  EXPECT_NE(meta.find("sigma-e=0\n"), std::string::npos) << meta;
  EXPECT_NE(meta.find("task=deblur"), std::string::npos);
}

TEST_F(Cli, DegradeIsReproducible) {
  const std::string img = smooth_image("x.pgm", 16, 2);
  const std::string common = "degrade --task deblur --kernel " + kernel("gaussian_5x5_std10.txt") +
                             " --sigma-e 0.05 --seed 9 --input " + img + " --output ";
  ASSERT_EQ(pgr_cli(common + path("a.pgt")).status, 0);
  ASSERT_EQ(pgr_cli(common + path("b.pgt")).status, 0);
  EXPECT_EQ(slurp(path("a.pgt")), slurp(path("b.pgt")));
}

TEST_F(Cli, MissingKernelIsValidationFailure) {
  const std::string img = smooth_image("x.pgm", 8, 3);
  const std::string missing = path("no_such_kernel.txt");
  const CliRun r = pgr_cli("degrade --task deblur --kernel " + missing + " --input " + img + " --output " +
                        path("y.pgt"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find(missing), std::string::npos) << r.output;
}

TEST_F(Cli, UnknownFlagIsValidationFailure) {
  EXPECT_EQ(pgr_cli("restore --no-such-flag 1").status, 2);
  EXPECT_EQ(pgr_cli("").status, 2);
}

TEST_F(Cli, EvalReportsPsnr) {
  const Shape sh{1, 4, 4};
  io::write_tensor(path("ref.pgt"), ImageTensor(sh, 0.5));
  io::write_tensor(path("same.pgt"), ImageTensor(sh, 0.5));
  io::write_tensor(path("off.pgt"), ImageTensor(sh, 0.625));
  io::write_tensor(path("far.pgt"), ImageTensor(sh, 0.75));
  const std::string ref = path("ref.pgt");
  CliRun r = pgr_cli("eval --restored " + path("same.pgt") + " --reference " + ref);
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("same.pgt inf"), std::string::npos) << r.output;

  r = pgr_cli("eval --restored " + path("off.pgt") + " " + path("far.pgt") + " " + path("same.pgt") +
              " --reference " + ref + " " + ref + " " + ref);
  ASSERT_EQ(r.status, 0) << r.output;
  const double p_off = 10.0 * std::log10(1.0 / (0.125 * 0.125));
  const double p_far = 10.0 * std::log10(1.0 / (0.25 * 0.25));
  std::ostringstream expect;
  expect << std::fixed << std::setprecision(4) << "off.pgt " << p_off;
  EXPECT_NE(r.output.find(expect.str()), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("mean inf"), std::string::npos) << r.output;

  r = pgr_cli("eval --restored " + path("off.pgt") + " " + path("far.pgt") + " --reference " + ref + " " + ref);
  std::ostringstream mean;
  mean << std::fixed << std::setprecision(4) << "mean " << (p_off + p_far) / 2.0;
  EXPECT_NE(r.output.find(mean.str()), std::string::npos) << r.output;

  io::write_tensor(path("ten.pgt"), ImageTensor(sh, 0.6));
  r = pgr_cli("eval --restored " + path("ten.pgt") + " --reference " + ref);
  EXPECT_NE(r.output.find("ten.pgt 20.0000"), std::string::npos) << r.output;
}

TEST_F(Cli, NoiselessIdbpMatchesIdpg) {
  const std::string img = smooth_image("x.pgm", 16, 4);
  ASSERT_EQ(pgr_cli("degrade --task deblur --kernel " + kernel("gaussian_5x5_std10.txt") +
                    " --sigma-e 0 --input " + img + " --output " + path("y.pgt"))
                .status,
            0);
  const std::string base = "restore --measurement " + path("y.pgt") + " --T 20 --output ";
  ASSERT_EQ(pgr_cli(base + path("idpg.pgt") + " --method idpg").status, 0);
  ASSERT_EQ(pgr_cli(base + path("idbp.pgt") + " --method idbp").status, 0);
  EXPECT_EQ(slurp(path("idpg.pgt")), slurp(path("idbp.pgt")));
}

TEST_F(Cli, DdpgRestoreOnLargerImage) {
  const std::string img = smooth_image("x.pgm", 64, 5);
  ASSERT_EQ(pgr_cli("degrade --task sr --scale 2 --kernel " + kernel("bicubic_x2.txt") +
                    " --sigma-e 0.02 --seed 1 --input " + img + " --output " + path("y.pgt"))
                .status,
            0);
  const CliRun r = pgr_cli("restore --measurement " + path("y.pgt") + " --method ddpg --T 25 --seed 3 --output " +
                        path("x_hat.pgt") + " --image-out " + path("x_hat.pgm") + " --trace " + path("trace.txt"));
  ASSERT_EQ(r.status, 0) << r.output;
  const ImageTensor est = io::read_tensor(path("x_hat.pgt"));
  EXPECT_EQ(est.shape(), (Shape{1, 64, 64}));
  EXPECT_TRUE(est.all_finite());
  EXPECT_TRUE(fs::exists(path("x_hat.pgm")));
  EXPECT_TRUE(fs::exists(path("trace.txt")));
}

TEST_F(Cli, ConfigEchoReproducesRun) {
  const std::string img = smooth_image("x.pgm", 16, 6);
  ASSERT_EQ(pgr_cli("degrade --task deblur --kernel " + kernel("gaussian_5x5_std10.txt") +
                    " --sigma-e 0.03 --seed 2 --input " + img + " --output " + path("y.pgt"))
                .status,
            0);
  ASSERT_EQ(pgr_cli("restore --measurement " + path("y.pgt") + " --T 15 --gamma 2 --output " + path("a.pgt"))
                .status,
            0);
  const CliRun rerun =
      pgr_cli("restore --config " + path("a.pgt.config") + " --output " + path("b.pgt"));
  ASSERT_EQ(rerun.status, 0) << rerun.output;
  EXPECT_EQ(slurp(path("a.pgt")), slurp(path("b.pgt")));
}

TEST_F(Cli, VerifySingleCheck) {
  const CliRun r = pgr_cli("verify --check claim4");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(r.output.rfind("claim4 PASS", 0), 0u) << r.output;
  EXPECT_EQ(r.output.find("claim1"), std::string::npos);
}

TEST_F(Cli, VerifyInjectedViolation) {
  const CliRun r = pgr_cli("verify --check theorem1 --draws 10 --inject-violation");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("assumption (b)"), std::string::npos) << r.output;
}
