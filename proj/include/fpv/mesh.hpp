#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "fpv/mzi.hpp"
#include "fpv/varmap.hpp"

namespace fpv {

// One MZI of a rectangular mesh acting on modes (row, row + 1).
struct MeshMzi {
  int col = 0;
  int row = 0;
  double theta = 0.0;
  double phi = 0.0;
};

// Light passes mzis[0], mzis[1], ... and finally the output phase screen d:
// U = diag(d) * T_{n-1} * ... * T_0.
struct MeshProgram {
  int size = 0;
  std::vector<MeshMzi> mzis;
  Eigen::VectorXcd d;

  void validate() const;
};

nlohmann::json to_json(const MeshProgram& p);
MeshProgram mesh_program_from_json(const nlohmann::json& j);

// Rectangular (Clements) decomposition. Throws std::invalid_argument when
// ||U^H U - I|| exceeds `tolerance`.
MeshProgram clements_decompose(const Eigen::MatrixXcd& u, double tolerance = 1e-8);

// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of
// R's diagonal moved into Q.
Eigen::MatrixXcd random_unitary(int n, std::mt19937_64& rng);

// Left-multiplies rows (row, row + 1) of m by t.
void apply_transfer(Eigen::MatrixXcd& m, int row, const Transfer& t);

Eigen::MatrixXcd reconstruct(const MeshProgram& program);
// Perturbed reconstruction. `designs` may be empty (nominal strip MZIs);
// otherwise both spans hold one entry per MZI in program order.
Eigen::MatrixXcd reconstruct(const MeshProgram& program, std::span<const MziDesign> designs,
                             std::span<const ArmVariations> vars, const DeviceModel& model,
                             PerturbOptions options = {});

// Diagonal attenuator array: value i is gain * |T00(theta_i, 0)| with
// theta_i = 2 asin(sigma_i / gain) and gain = max sigma.
struct SigmaArray {
  std::vector<double> values;
  std::vector<double> thetas;
  double gain = 0.0;

  static SigmaArray realize(std::vector<double> values);
  std::size_t size() const { return values.size(); }
};

Eigen::VectorXcd sigma_nominal(const SigmaArray& s);
Eigen::VectorXcd sigma_deviated(const SigmaArray& s, std::span<const MziDesign> designs,
                                std::span<const ArmVariations> vars, const DeviceModel& model,
                                PerturbOptions options = {});

// W = U * Sigma * V^H for an n_out x n_in layer.
struct LayerDecomposition {
  int n_in = 0;
  int n_out = 0;
  MeshProgram u;
  MeshProgram vh;
  SigmaArray sigma;

  Eigen::MatrixXcd nominal() const;
};

LayerDecomposition decompose_layer(const Eigen::MatrixXcd& w);

// Physical design of every MZI of a layer, per sub-array, in program order.
struct LayerHardware {
  std::vector<MziDesign> u;
  std::vector<MziDesign> vh;
  std::vector<MziDesign> sigma;

  static LayerHardware nominal(const LayerDecomposition& dec, Geometry g = Geometry::kStrip);
};

struct LayerVariations {
  std::vector<ArmVariations> u;
  std::vector<ArmVariations> vh;
  std::vector<ArmVariations> sigma;

  static LayerVariations zero(const LayerDecomposition& dec);
};

Eigen::MatrixXcd deviated_weight(const LayerDecomposition& dec, const LayerHardware& hw,
                                 const LayerVariations& vars, const DeviceModel& model,
                                 PerturbOptions options = {});

struct PlacedMzi {
  int col = 0;
  int row = 0;
  Rect box;
};

struct Placement {
  std::vector<PlacedMzi> mzis;
  Rect extent;
};

// Clements grid of an N-mode OIU, in the same (col, row) order as
// clements_decompose emits.
Placement place_oiu(int n, double origin_x, double origin_y);
// Sigma attenuators in two staggered columns.
Placement place_sigma_array(int count, double origin_x, double origin_y);

std::vector<ArmVariations> sample_mzi_vars(const Placement& placement, const VariationMap& map,
                                           std::span<const MziDesign> designs);

// Heater count convention: N^2 per N-mode unitary (both phases of every MZI
// plus the N output phases).
std::size_t phase_shifter_count(std::span<const LayerDecomposition> layers);

}  // namespace fpv
