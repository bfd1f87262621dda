#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fpv/mesh.hpp"

using namespace fpv;
using cd = std::complex<double>;

namespace {

const DeviceModel& model() {
  static const auto m = DeviceModel::default_model();
  return *m;
}

Eigen::MatrixXcd random_complex(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXcd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = cd(n(rng), n(rng));
  return m;
}

// Embeds a 2x2 transfer at (row, row+1) of an n x n identity.
Eigen::MatrixXcd embed(int n, int row, const Transfer& t) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(n, n);
  m.block(row, row, 2, 2) = t;
  return m;
}

}  // namespace

TEST(Clements, RoundTripAcrossSizes) {
  std::mt19937_64 rng(11);
  for (int n : {2, 3, 4, 5, 8, 16}) {
    for (int k = 0; k < 5; ++k) {
      const Eigen::MatrixXcd u = random_unitary(n, rng);
      const MeshProgram p = clements_decompose(u);
      EXPECT_EQ(p.size, n);
      EXPECT_EQ(static_cast<int>(p.mzis.size()), n * (n - 1) / 2);
      EXPECT_LT((reconstruct(p) - u).cwiseAbs().maxCoeff(), 1e-10);
      for (int i = 0; i < n; ++i) EXPECT_NEAR(std::abs(p.d[i]), 1.0, 1e-10);
    }
  }
}

TEST(Clements, ReconstructIsExplicitProduct) {
  std::mt19937_64 rng(2);
  const MeshProgram p = clements_decompose(random_unitary(5, rng));
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(5, 5);
  for (const auto& z : p.mzis) m = embed(5, z.row, ideal_transfer(z.theta, z.phi)) * m;
  m = p.d.asDiagonal() * m;
  EXPECT_LT((reconstruct(p) - m).norm(), 1e-12);
}

TEST(Clements, ColumnsFollowTheRectangularGrid) {
  std::mt19937_64 rng(4);
  const MeshProgram p = clements_decompose(random_unitary(6, rng));
  const Placement pl = place_oiu(6, 0.0, 0.0);
  ASSERT_EQ(pl.mzis.size(), p.mzis.size());
  std::vector<std::pair<int, int>> a, b;
  for (const auto& z : p.mzis) a.emplace_back(z.col, z.row);
  for (const auto& z : pl.mzis) b.emplace_back(z.col, z.row);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  for (const auto& z : p.mzis) {
    EXPECT_EQ((z.row - z.col) % 2, 0);
    EXPECT_LT(z.col, 6);
    EXPECT_LT(z.row, 5);
  }
}

TEST(Clements, IdentityAndPermutation) {
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(4, 4);
  EXPECT_LT((reconstruct(clements_decompose(id)) - id).norm(), 1e-12);
  Eigen::MatrixXcd perm = Eigen::MatrixXcd::Zero(4, 4);
  perm(0, 3) = perm(1, 0) = perm(2, 1) = perm(3, 2) = 1.0;
  EXPECT_LT((reconstruct(clements_decompose(perm)) - perm).norm(), 1e-10);
}

TEST(Clements, RejectsNonUnitary) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(3, 3);
  m(0, 0) = 1.1;
  EXPECT_THROW(clements_decompose(m), std::invalid_argument);
  EXPECT_THROW(clements_decompose(Eigen::MatrixXcd::Identity(3, 2)), std::invalid_argument);
}

TEST(MeshProgram, JsonRoundTripAndValidation) {
  std::mt19937_64 rng(6);
  const MeshProgram p = clements_decompose(random_unitary(4, rng));
  const MeshProgram q = mesh_program_from_json(to_json(p));
  EXPECT_LT((reconstruct(q) - reconstruct(p)).norm(), 1e-14);
  MeshProgram bad = p;
  bad.mzis[0].row = 3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(RandomUnitary, UnitaryAndHaarFirstMoment) {
  std::mt19937_64 rng(8);
  const int n = 6, k = 4000;
  double mean = 0.0;
  for (int i = 0; i < k; ++i) {
    const Eigen::MatrixXcd u = random_unitary(n, rng);
    if (i < 20) {
      EXPECT_LT((u.adjoint() * u - Eigen::MatrixXcd::Identity(n, n)).norm(), 1e-12);
    }
    mean += std::norm(u(0, 0));
  }
  // E|U_00|^2 = 1/n for Haar measure; the variance is (n-1)/(n^2 (n+1)).
  mean /= k;
  const double sd = std::sqrt((n - 1.0) / (n * n * (n + 1.0)) / k);
  EXPECT_NEAR(mean, 1.0 / n, 4.0 * sd);
}

TEST(RandomUnitary, DiagonalPhaseIsUniform) {
  // Without the R-phase fix the phases of U_00 would cluster near zero.
  std::mt19937_64 rng(9);
  double re = 0.0;
  for (int i = 0; i < 3000; ++i) re += std::cos(std::arg(random_unitary(3, rng)(0, 0)));
  EXPECT_NEAR(re / 3000, 0.0, 0.06);
}

TEST(SigmaArray, RealizesSingularValues) {
  const SigmaArray s = SigmaArray::realize({2.0, 1.0, 0.5, 0.0});
  EXPECT_DOUBLE_EQ(s.gain, 2.0);
  EXPECT_NEAR(s.thetas[0], std::numbers::pi, 1e-15);
  EXPECT_NEAR(s.thetas[3], 0.0, 1e-15);
  const Eigen::VectorXcd v = sigma_nominal(s);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(v[i].real(), s.values[i], 1e-12);
    EXPECT_NEAR(v[i].imag(), 0.0, 1e-12);
  }
  EXPECT_THROW(SigmaArray::realize({1.0, -0.1}), std::invalid_argument);
}

TEST(Layer, RectangularDecompositionReproducesWeights) {
  std::mt19937_64 rng(10);
  for (auto [r, c] : {std::pair{4, 4}, std::pair{3, 5}, std::pair{6, 2}}) {
    const Eigen::MatrixXcd w = random_complex(r, c, rng);
    const LayerDecomposition dec = decompose_layer(w);
    EXPECT_EQ(dec.n_out, r);
    EXPECT_EQ(dec.n_in, c);
    EXPECT_EQ(dec.u.size, r);
    EXPECT_EQ(dec.vh.size, c);
    EXPECT_EQ(static_cast<int>(dec.sigma.size()), std::min(r, c));
    EXPECT_LT((dec.nominal() - w).cwiseAbs().maxCoeff(), 1e-10);
    const auto hw = LayerHardware::nominal(dec);
    const auto zero = LayerVariations::zero(dec);
    EXPECT_LT((deviated_weight(dec, hw, zero, model()) - w).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Layer, DeviatedWeightMatchesHandEmbedding) {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXcd w = random_complex(4, 4, rng);
  const LayerDecomposition dec = decompose_layer(w);
  const auto hw = LayerHardware::nominal(dec);
  auto vars = LayerVariations::zero(dec);
  vars.u[2].arms[0] = {4.0, 1.0};
  vars.u[2].arms[3] = {-3.0, 0.5};
  vars.u[2].dcs[0] = {6.0, 0.0};
  for (PhaseReference ref : {PhaseReference::kAbsolute, PhaseReference::kDifferential}) {
    const PerturbOptions opt{ref, true};
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(4, 4);
    for (std::size_t i = 0; i < dec.u.mzis.size(); ++i) {
      const auto& z = dec.u.mzis[i];
      const Transfer t = i == 2 ? perturbed_transfer({z.theta, z.phi, hw.u[i]}, vars.u[2], model(), opt)
                                : ideal_transfer(z.theta, z.phi);
      u = embed(4, z.row, t) * u;
    }
    u = dec.u.d.asDiagonal() * u;
    const Eigen::MatrixXcd expect = u * sigma_nominal(dec.sigma).asDiagonal() * reconstruct(dec.vh);
    EXPECT_LT((deviated_weight(dec, hw, vars, model(), opt) - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Layer, SpanSizeMismatchThrows) {
  std::mt19937_64 rng(13);
  const MeshProgram p = clements_decompose(random_unitary(4, rng));
  std::vector<ArmVariations> vars(p.mzis.size() - 1);
  EXPECT_THROW(reconstruct(p, {}, vars, model()), std::invalid_argument);
}

TEST(Placement, OiuGrid) {
  const Placement p = place_oiu(4, 100.0, 50.0);
  EXPECT_EQ(p.mzis.size(), 6u);
  EXPECT_DOUBLE_EQ(p.extent.x0, 100.0);
  EXPECT_DOUBLE_EQ(p.extent.y0, 50.0);
  EXPECT_DOUBLE_EQ(p.extent.width(), 4 * 340.0);
  EXPECT_DOUBLE_EQ(p.extent.height(), 3 * 30.0 + 30.0);
  for (const auto& m : p.mzis) {
    EXPECT_DOUBLE_EQ(m.box.x0, 100.0 + 340.0 * m.col);
    EXPECT_DOUBLE_EQ(m.box.y0, 50.0 + 30.0 * m.row);
    EXPECT_DOUBLE_EQ(m.box.height(), 60.0);
  }
  EXPECT_THROW(place_oiu(1, 0, 0), std::invalid_argument);
}

TEST(Placement, SigmaColumnsDoNotOverlap) {
  const Placement p = place_sigma_array(5, 0.0, 0.0);
  ASSERT_EQ(p.mzis.size(), 5u);
  for (std::size_t i = 0; i < p.mzis.size(); ++i) {
    for (std::size_t j = i + 1; j < p.mzis.size(); ++j) {
      const Rect& a = p.mzis[i].box;
      const Rect& b = p.mzis[j].box;
      const bool overlap = a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
      EXPECT_FALSE(overlap) << i << " " << j;
    }
  }
  EXPECT_THROW(place_sigma_array(0, 0, 0), std::invalid_argument);
}

TEST(Placement, SampledVariationsMatchPerMziSampling) {
  VariationParams vp;
  vp.corr_length = 100;
  const Placement p = place_oiu(4, 10.0, 10.0);
  const VariationMap map = generate_die_map(vp, 0.0, 0.0, 1400.0, 200.0);
  const auto vars = sample_mzi_vars(p, map, {});
  for (std::size_t i = 0; i < p.mzis.size(); ++i) {
    const ArmVariations v = sample_mzi(map, MziDesign{}, p.mzis[i].box.x0, p.mzis[i].box.y0);
    EXPECT_EQ(vars[i].arms[2].rho_w, v.arms[2].rho_w);
  }
}

TEST(PhaseShifters, SquareOfEachMeshSize) {
  std::mt19937_64 rng(14);
  std::vector<LayerDecomposition> layers{decompose_layer(random_complex(16, 16, rng)),
                                         decompose_layer(random_complex(16, 16, rng)),
                                         decompose_layer(random_complex(10, 16, rng))};
  EXPECT_EQ(phase_shifter_count(layers), 1380u);
}
