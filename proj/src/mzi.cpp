#include "fpv/mzi.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace fpv {

namespace {

using cd = std::complex<double>;
constexpr cd kI{0.0, 1.0};

bool finite(double v) { return std::isfinite(v); }

double coupler_width_nm() { return kNominalWidthNm; }

}  // namespace

MziDesign MziDesign::nominal(Geometry g) {
  MziDesign d;
  d.geometry = g;
  return d;
}

void MziDesign::validate() const {
  for (double w : arm_widths) {
    if (!(w >= kMinWidthNm && w <= kMaxWidthNm)) {
      throw std::invalid_argument("MZI arm width outside [350, 1200] nm");
    }
  }
  for (double l : arm_lengths) {
    if (!(l > 0.0) || !finite(l)) throw std::invalid_argument("MZI arm length must be positive");
  }
  dc1.validate();
  dc2.validate();
}

bool MziDesign::operator==(const MziDesign& o) const {
  auto dc_eq = [](const DcSpec& a, const DcSpec& b) {
    return a.length_um == b.length_um && a.gap_nm == b.gap_nm && a.kappa == b.kappa &&
           a.input_field == b.input_field;
  };
  return geometry == o.geometry && arm_widths == o.arm_widths && arm_lengths == o.arm_lengths &&
         dc_eq(dc1, o.dc1) && dc_eq(dc2, o.dc2);
}

void MziConfig::validate() const {
  if (!finite(theta) || !finite(phi)) throw std::invalid_argument("MZI phases must be finite");
  design.validate();
}

bool ArmVariations::is_zero() const {
  for (const auto& a : arms) {
    if (a.rho_w != 0.0 || a.rho_t != 0.0) return false;
  }
  for (const auto& d : dcs) {
    if (d.rho_w != 0.0 || d.rho_t != 0.0) return false;
  }
  return true;
}

Transfer coupler(double kappa) {
  const double t = std::sqrt(1.0 - kappa);
  const double k = std::sqrt(kappa);
  Transfer b;
  b << t, kI * k, kI * k, t;
  return b;
}

Transfer ideal_transfer(double theta, double phi) {
  const Transfer b = coupler(0.5);
  const Transfer p_theta = Eigen::Vector2cd(std::polar(1.0, theta), 1.0).asDiagonal();
  const Transfer p_phi = Eigen::Vector2cd(std::polar(1.0, phi), 1.0).asDiagonal();
  return b * p_theta * b * p_phi;
}

std::array<double, 4> arm_phases(const MziDesign& design, const ArmVariations& vars,
                                 const DeviceModel& model) {
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) {
    out[i] = model.delta_beta(design.geometry, design.arm_widths[i], vars.arms[i].rho_w,
                              vars.arms[i].rho_t) *
             design.arm_lengths[i];
  }
  return out;
}

PhaseNoise arm_phase_noise(const MziDesign& design, const ArmVariations& vars,
                           const DeviceModel& model) {
  const auto p = arm_phases(design, vars, model);
  return {std::abs(p[0] - p[1]), std::abs(p[2] - p[3])};
}

std::array<double, 2> perturbed_kappas(const MziDesign& design, const ArmVariations& vars,
                                       const DeviceModel& model) {
  std::array<double, 2> out{};
  const DcSpec* specs[2] = {&design.dc1, &design.dc2};
  for (int i = 0; i < 2; ++i) {
    const double dn = model.delta_n(design.geometry, coupler_width_nm(), vars.dcs[i].rho_w,
                                    vars.dcs[i].rho_t);
    out[i] = perturbed_kappa(*specs[i], delta_kappa(*specs[i], dn, model.wavelength_nm()));
  }
  return out;
}

std::string_view to_string(PhaseReference p) {
  return p == PhaseReference::kAbsolute ? "absolute" : "differential";
}

PhaseReference phase_reference_from_string(std::string_view s) {
  if (s == "absolute") return PhaseReference::kAbsolute;
  if (s == "differential") return PhaseReference::kDifferential;
  throw std::invalid_argument("unknown phase reference '" + std::string(s) + "'");
}

Transfer perturbed_transfer(const MziConfig& config, const ArmVariations& vars,
                            const DeviceModel& model, PerturbOptions options) {
  const auto p = arm_phases(config.design, vars, model);
  std::array<double, 2> kappa{config.design.dc1.kappa, config.design.dc2.kappa};
  if (options.couplers) kappa = perturbed_kappas(config.design, vars, model);

  cd phi_upper = std::polar(1.0, config.phi + p[0]);
  cd phi_lower = std::polar(1.0, p[1]);
  cd theta_upper = std::polar(1.0, config.theta + p[2]);
  cd theta_lower = std::polar(1.0, p[3]);
  if (options.phase == PhaseReference::kDifferential) {
    phi_upper = std::polar(1.0, config.phi + (p[0] - p[1]));
    phi_lower = 1.0;
    theta_upper = std::polar(1.0, config.theta + (p[2] - p[3]));
    theta_lower = 1.0;
  }
  const Transfer p_phi = Eigen::Vector2cd(phi_upper, phi_lower).asDiagonal();
  const Transfer p_theta = Eigen::Vector2cd(theta_upper, theta_lower).asDiagonal();
  return coupler(kappa[1]) * p_theta * coupler(kappa[0]) * p_phi;
}

Rect arm_rect(const MziDesign& design, int arm, double box_x0, double box_y0) {
  if (arm < 0 || arm > 3) throw std::out_of_range("arm index must be 0..3");
  const bool phi_stage = arm < 2;
  const bool upper = arm % 2 == 0;
  const double x0 = phi_stage ? layout::kPhiArmX0 : layout::kThetaArmX0;
  const double x1 = phi_stage ? layout::kPhiArmX1 : layout::kThetaArmX1;
  const double yc = upper ? layout::kUpperArmY : layout::kLowerArmY;
  const double half = 0.5 * design.arm_widths[arm] * 1e-3;
  return {box_x0 + x0, box_y0 + yc - half, box_x0 + x1, box_y0 + yc + half};
}

Rect dc_rect(const MziDesign& design, int dc, double box_x0, double box_y0) {
  if (dc < 0 || dc > 1) throw std::out_of_range("coupler index must be 0..1");
  const DcSpec& spec = dc == 0 ? design.dc1 : design.dc2;
  const double x0 = dc == 0 ? layout::kDc1X0 : layout::kDc2X0;
  const double x1 = dc == 0 ? layout::kDc1X1 : layout::kDc2X1;
  const double half = 0.5 * (2.0 * coupler_width_nm() + spec.gap_nm) * 1e-3;
  return {box_x0 + x0, box_y0 + layout::kCouplerY - half, box_x0 + x1,
          box_y0 + layout::kCouplerY + half};
}

ArmVariations sample_mzi(const VariationMap& map, const MziDesign& design, double box_x0,
                         double box_y0) {
  ArmVariations v;
  for (int i = 0; i < 4; ++i) {
    const RegionMean m = sample_region(map, arm_rect(design, i, box_x0, box_y0));
    v.arms[i] = {m.width_nm, m.thick_nm};
  }
  for (int i = 0; i < 2; ++i) {
    const RegionMean m = sample_region(map, dc_rect(design, i, box_x0, box_y0));
    v.dcs[i] = {m.width_nm, m.thick_nm};
  }
  return v;
}

}  // namespace fpv
