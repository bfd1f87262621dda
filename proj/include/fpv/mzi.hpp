#pragma once

#include <array>
#include <string_view>

#include <Eigen/Core>

#include "fpv/photonics.hpp"
#include "fpv/varmap.hpp"

namespace fpv {

using Transfer = Eigen::Matrix2cd;

// Physical MZI design: Arm1/Arm3 carry the phi/theta heaters on the upper
// (lower mode index) path, Arm2/Arm4 are the opposite arms.
struct MziDesign {
  Geometry geometry = Geometry::kStrip;
  std::array<double, 4> arm_widths{kNominalWidthNm, kNominalWidthNm, kNominalWidthNm,
                                   kNominalWidthNm};
  std::array<double, 4> arm_lengths{kArmLengthUm, kArmLengthUm, kArmLengthUm, kArmLengthUm};
  DcSpec dc1{};
  DcSpec dc2{};

  static MziDesign nominal(Geometry g = Geometry::kStrip);
  void validate() const;
  bool operator==(const MziDesign&) const;
};

struct MziConfig {
  double theta = 0.0;
  double phi = 0.0;
  MziDesign design{};

  void validate() const;
};

struct ArmVariation {
  double rho_w = 0.0;  // nm
  double rho_t = 0.0;  // nm
};

struct ArmVariations {
  std::array<ArmVariation, 4> arms{};
  std::array<ArmVariation, 2> dcs{};

  bool is_zero() const;
};

// How the arm phases enter the perturbed matrix. kAbsolute keeps both arms'
// accumulated phases e^{i dB L}; kDifferential references each heater stage
// to its opposite arm, keeping only the phase difference between the arms.
// The width optimizer only ever balances arm pairs, so common-mode phase is
// something it cannot see; kAbsolute leaves it in and scrambles any mesh.
enum class PhaseReference { kAbsolute, kDifferential };

std::string_view to_string(PhaseReference p);
PhaseReference phase_reference_from_string(std::string_view s);

struct PerturbOptions {
  PhaseReference phase = PhaseReference::kDifferential;
  bool couplers = false;  // apply coupling-ratio deviations
};

// B(kappa) = [[sqrt(1-k), i sqrt(k)], [i sqrt(k), sqrt(1-k)]]
Transfer coupler(double kappa);
// B * P_theta * B * P_phi with 50:50 couplers.
Transfer ideal_transfer(double theta, double phi);

struct PhaseNoise {
  double dc1 = 0.0;  // |dB1 L1 - dB2 L2|
  double dc2 = 0.0;  // |dB3 L3 - dB4 L4|
  double total() const { return dc1 + dc2; }
};

PhaseNoise arm_phase_noise(const MziDesign& design, const ArmVariations& vars,
                           const DeviceModel& model);

// Per-arm accumulated phase dB_i * L_i in rad.
std::array<double, 4> arm_phases(const MziDesign& design, const ArmVariations& vars,
                                 const DeviceModel& model);
// Perturbed coupling ratios (kappa1', kappa2').
std::array<double, 2> perturbed_kappas(const MziDesign& design, const ArmVariations& vars,
                                       const DeviceModel& model);

Transfer perturbed_transfer(const MziConfig& config, const ArmVariations& vars,
                            const DeviceModel& model, PerturbOptions options = {});

// In-box layout of one MZI (um). The box is l_MZI x 2 g_MZI; mode k enters
// at y = 15 and mode k+1 at y = 45.
namespace layout {
inline constexpr double kMziLength = 340.0;
inline constexpr double kPortPitch = 30.0;
inline constexpr double kBoxHeight = 2.0 * kPortPitch;
inline constexpr double kPhiArmX0 = 10.0;
inline constexpr double kPhiArmX1 = 145.0;
inline constexpr double kDc1X0 = 150.0;
inline constexpr double kDc1X1 = 160.0;
inline constexpr double kThetaArmX0 = 165.0;
inline constexpr double kThetaArmX1 = 300.0;
inline constexpr double kDc2X0 = 305.0;
inline constexpr double kDc2X1 = 315.0;
inline constexpr double kUpperArmY = 22.5;
inline constexpr double kLowerArmY = 37.5;
inline constexpr double kCouplerY = 30.0;
}  // namespace layout

// Sampling rectangle of arm i (0..3) for an MZI box with corner (x0, y0).
Rect arm_rect(const MziDesign& design, int arm, double box_x0, double box_y0);
// Coupler footprint: both waveguides plus the gap.
Rect dc_rect(const MziDesign& design, int dc, double box_x0, double box_y0);

ArmVariations sample_mzi(const VariationMap& map, const MziDesign& design, double box_x0,
                         double box_y0);

}  // namespace fpv
