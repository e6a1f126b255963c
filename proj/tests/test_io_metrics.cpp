#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pgr/io.hpp"
#include "pgr/linops.hpp"
#include "pgr/metrics.hpp"

using namespace pgr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pgr_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(RandomStream, SameSeedSameDraws) {
  RandomStream a(99);
  RandomStream b(99);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(RandomStream, SplitIsStableAndDoesNotAdvanceParent) {
  RandomStream parent(5);
  RandomStream c1 = parent.split("noise");
  RandomStream c2 = parent.split("noise");
  RandomStream other = parent.split("init");
  const double v1 = c1.normal();
  EXPECT_EQ(v1, c2.normal());
  EXPECT_NE(v1, other.normal());
  RandomStream fresh(5);
  EXPECT_EQ(parent.next_u64(), fresh.next_u64());
}

TEST(RandomStream, NormalMoments) {
  RandomStream rng(11);
  double s = 0.0;
  double s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Tensor, ShapeMismatchThrows) {
  ImageTensor a(Shape{1, 2, 2});
  ImageTensor b(Shape{1, 2, 3});
  EXPECT_THROW(a += b, DimensionError);
  EXPECT_THROW(dot(a, b), DimensionError);
}

TEST(Tensor, Clamped) {
  ImageTensor a(Shape{1, 1, 3}, std::vector<double>{-0.5, 0.25, 2.0});
  const ImageTensor c = clamped(a);
  EXPECT_EQ(c[0], 0.0);
  EXPECT_EQ(c[1], 0.25);
  EXPECT_EQ(c[2], 1.0);
}

TEST(TensorFile, RoundTripIsFloat32Exact) {
  RandomStream rng(3);
  const ImageTensor x = rng.normal(Shape{3, 5, 7});
  const fs::path p = scratch("rt.pgt");
  io::write_tensor(p, x);
  const ImageTensor y = io::read_tensor(p);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], static_cast<double>(static_cast<float>(x[i])));
}

TEST(TensorFile, RejectsCorruptInput) {
  EXPECT_THROW(io::decode_tensor("PGT0garbagegarbage"), IoError);
  std::string bytes = io::encode_tensor(ImageTensor(Shape{1, 2, 2}));
  bytes.pop_back();
  EXPECT_THROW(io::decode_tensor(bytes), IoError);
  EXPECT_THROW(io::read_tensor(scratch("does_not_exist.pgt")), IoError);
}

TEST(Pnm, RoundTripQuantizes) {
  ImageTensor x(Shape{3, 2, 3});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) / 17.0;
  const fs::path p = scratch("rt.ppm");
  io::write_pnm(p, x);
  const ImageTensor y = io::read_image(p);
  ASSERT_EQ(y.shape(), x.shape());
  EXPECT_LE(max_abs_diff(y, x), 0.5 / 255.0 + 1e-12);
  EXPECT_THROW(io::write_pnm(scratch("bad.pgm"), ImageTensor(Shape{2, 2, 2})), ValidationError);
}

TEST(KernelFile, RoundTripAndErrors) {
  const Kernel k(2, 3, {0.1, 0.2, 0.3, 0.15, 0.15, 0.1});
  const fs::path p = scratch("k.txt");
  io::write_kernel(p, k);
  const Kernel r = io::read_kernel(p);
  EXPECT_EQ(r.height, 2u);
  EXPECT_EQ(r.width, 3u);
  EXPECT_EQ(r.taps, k.taps);
  std::ofstream(scratch("short.txt")) << "2 2\n1 2 3\n";
  EXPECT_THROW(io::read_kernel(scratch("short.txt")), IoError);
  std::ofstream(scratch("long.txt")) << "1 1\n1 2\n";
  EXPECT_THROW(io::read_kernel(scratch("long.txt")), IoError);
}

TEST(MaskFile, RoundTripAndRejectsNonBinary) {
  io::MaskGrid m{2, 2, {1, 0, 0, 1}};
  io::write_mask(scratch("m.txt"), m);
  EXPECT_EQ(io::read_mask(scratch("m.txt")).keep, m.keep);
  std::ofstream(scratch("m_bad.txt")) << "1 2\n1 0.5\n";
  EXPECT_THROW(io::read_mask(scratch("m_bad.txt")), IoError);
}

TEST(Degrade, NoiselessIsExactForward) {
  RandomStream rng(4);
  const ImageTensor x = rng.normal(Shape{1, 8, 8});
  const LinearOperator op = CircularConvolution(oracle::random_kernel(3, 3, rng), x.shape());
  EXPECT_EQ(degrade(op, x, {0.0, 7}), apply(op, x));
}

TEST(Degrade, ResidualHasRequestedStatistics) {
  const Shape sh{1, 128, 128};
  const ImageTensor x(sh, 0.3);
  const LinearOperator op = CircularConvolution(delta_kernel(), sh);
  const double sigma = 0.05;
  const ImageTensor r = degrade(op, x, {sigma, 12}) - x;
  double mean = 0.0;
  for (double v : r.values()) mean += v;
  mean /= static_cast<double>(r.size());
  const double var = squared_norm(r) / static_cast<double>(r.size()) - mean * mean;
  EXPECT_NEAR(mean, 0.0, 4.0 * sigma / 128.0);
  EXPECT_NEAR(std::sqrt(var), sigma, 0.02 * sigma);
}

TEST(Degrade, SeedDeterminesNoise) {
  const Shape sh{1, 8, 8};
  const ImageTensor x(sh, 0.5);
  const LinearOperator op = CircularConvolution(delta_kernel(), sh);
  EXPECT_EQ(degrade(op, x, {0.1, 3}), degrade(op, x, {0.1, 3}));
  EXPECT_NE(degrade(op, x, {0.1, 3}), degrade(op, x, {0.1, 4}));
  EXPECT_THROW(degrade(op, x, {-0.1, 3}), ValidationError);
}

TEST(Psnr, ReferenceValues) {
  const Shape sh{1, 4, 4};
  const ImageTensor ref(sh, 0.5);
  EXPECT_TRUE(std::isinf(psnr(ref, ref)));
  const ImageTensor off(sh, 0.6);
  EXPECT_NEAR(psnr(off, ref), 20.0, 1e-9);
  EXPECT_DOUBLE_EQ(psnr(off, ref), psnr(ref, off));
  const ImageTensor shifted_ref(sh, 0.2);
  const ImageTensor shifted_off(sh, 0.3);
  EXPECT_NEAR(psnr(shifted_off, shifted_ref), 20.0, 1e-9);
  EXPECT_NEAR(psnr(off, ref, 2.0), 20.0 + 20.0 * std::log10(2.0), 1e-9);
}

TEST(Psnr, MatchesDirectComputation) {
  RandomStream rng(8);
  const ImageTensor a = rng.normal(Shape{3, 6, 6});
  const ImageTensor b = rng.normal(Shape{3, 6, 6});
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / (acc / static_cast<double>(a.size()))), 1e-12);
  EXPECT_THROW(psnr(a, ImageTensor(Shape{1, 6, 6})), DimensionError);
}
