#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fpv {

// Nominal device parameters (nm / um).
inline constexpr double kNominalWidthNm = 470.0;
inline constexpr double kNominalThicknessNm = 220.0;
inline constexpr double kRidgeSlabNm = 150.0;
inline constexpr double kWavelengthNm = 1550.0;
inline constexpr double kArmLengthUm = 135.0;
inline constexpr double kMinWidthNm = 350.0;
inline constexpr double kMaxWidthNm = 1200.0;

enum class Geometry { kStrip, kRidge };

std::string_view to_string(Geometry g);
Geometry geometry_from_string(std::string_view s);

struct WaveguideSpec {
  Geometry geometry = Geometry::kStrip;
  double width_nm = kNominalWidthNm;
  double thickness_nm = kNominalThicknessNm;
  double slab_height_nm = 0.0;
  double wavelength_nm = kWavelengthNm;

  static WaveguideSpec strip(double width_nm, double thickness_nm = kNominalThicknessNm,
                             double wavelength_nm = kWavelengthNm);
  static WaveguideSpec ridge(double width_nm, double thickness_nm = kNominalThicknessNm,
                             double slab_height_nm = kRidgeSlabNm,
                             double wavelength_nm = kWavelengthNm);
  // Nominal waveguide of the given geometry and width.
  static WaveguideSpec nominal(Geometry g, double width_nm = kNominalWidthNm);

  // Design-range check: 350 <= w <= 1200, t > h >= 0, lambda > 0.
  void validate() const;
};

// Maps a waveguide cross-section to its fundamental quasi-TE effective index.
class EffIndexModel {
 public:
  virtual ~EffIndexModel() = default;
  // Throws std::domain_error outside the model's validity box.
  virtual double n_eff(const WaveguideSpec& spec) const = 0;
  virtual std::string provenance() const = 0;
};

enum class Cladding { kAir, kOxide };

struct Materials {
  double n_si = 3.476;
  double n_sio2 = 1.444;
  double n_air = 1.0;
};

// Effective-index method: a TE slab solve through the silicon thickness,
// then a TM slab solve across the width with the side regions' slab indices
// (cladding for strip, the etched slab for ridge).
class EimModel final : public EffIndexModel {
 public:
  explicit EimModel(Cladding top = Cladding::kAir, Materials materials = {});
  double n_eff(const WaveguideSpec& spec) const override;
  std::string provenance() const override;

  // Validity box used by n_eff.
  static constexpr double kMinWidth = 300.0;
  static constexpr double kMaxWidth = 1300.0;
  static constexpr double kMinThickness = 150.0;
  static constexpr double kMaxThickness = 300.0;

 private:
  Cladding top_;
  Materials mat_;
};

// Tabulated n_eff(w, t) grids per geometry at a single wavelength, with
// bilinear interpolation. Loaded from JSON or CSV.
class TableModel final : public EffIndexModel {
 public:
  struct Grid {
    Geometry geometry = Geometry::kStrip;
    double slab_height_nm = 0.0;
    std::vector<double> widths;      // ascending
    std::vector<double> thicknesses; // ascending
    std::vector<double> values;      // row-major [thickness][width]
  };

  TableModel(double wavelength_nm, std::vector<Grid> grids, std::string source);

  double n_eff(const WaveguideSpec& spec) const override;
  std::string provenance() const override;

  nlohmann::json to_json() const;
  static TableModel from_json(const nlohmann::json& j);
  // CSV columns: geometry,slab_height_nm,wavelength_nm,width_nm,thickness_nm,n_eff
  static TableModel from_csv(std::istream& is, std::string source);
  static TableModel load(const std::filesystem::path& path);
  // Samples another model on the given axes.
  static TableModel tabulate(const EffIndexModel& model, double wavelength_nm,
                             const std::vector<Geometry>& geometries,
                             const std::vector<double>& widths,
                             const std::vector<double>& thicknesses,
                             double slab_height_nm = kRidgeSlabNm);

 private:
  const Grid& grid_for(const WaveguideSpec& spec) const;

  double wavelength_nm_;
  std::vector<Grid> grids_;
  std::string source_;
};

enum class Partial { kWidth, kThickness };

// Checked evaluation: the result must be a guided index in (n_SiO2, n_Si).
double n_eff(const EffIndexModel& model, const WaveguideSpec& spec);
// Central finite difference, per nm.
double dn_eff(const EffIndexModel& model, const WaveguideSpec& spec, Partial which,
              double step_nm = 1.0);
// Linearized propagation-constant change in rad/um for deviations in nm.
double delta_beta(const EffIndexModel& model, const WaveguideSpec& spec, double rho_w_nm,
                  double rho_t_nm);

struct DcSpec {
  double length_um = 10.0;
  double gap_nm = 200.0;
  double kappa = 0.5;
  double input_field = 1.0;

  void validate() const;
};

// I * sin^2(pi * L_DC * dn / lambda0).
double delta_kappa(const DcSpec& dc, double delta_n, double wavelength_nm = kWavelengthNm);
// kappa + delta_kappa clamped to [0, 1]; logs a warning when clamping.
double perturbed_kappa(const DcSpec& dc, double delta_kappa);
// Coupled-region index change from the footprint-averaged deviations.
double delta_n_dc(const EffIndexModel& model, const DcSpec& dc, const WaveguideSpec& spec,
                  double rho_w_nm, double rho_t_nm);

// 1 um of taper per 100 nm of width change.
double taper_length(double w_from_nm, double w_to_nm);

struct Sensitivity {
  double dn_dw = 0.0;  // per nm
  double dn_dt = 0.0;  // per nm
};

// Index model plus the fixed process point (thickness, slab, wavelength), with
// partials pre-tabulated at every integer width of the design range.
class DeviceModel {
 public:
  explicit DeviceModel(std::shared_ptr<const EffIndexModel> model,
                       double thickness_nm = kNominalThicknessNm,
                       double slab_height_nm = kRidgeSlabNm,
                       double wavelength_nm = kWavelengthNm);

  // Air-clad EIM at the nominal process point.
  static std::shared_ptr<const DeviceModel> default_model();

  const EffIndexModel& index_model() const { return *model_; }
  double wavelength_nm() const { return wavelength_nm_; }
  double thickness_nm() const { return thickness_nm_; }
  double k0_per_um() const;

  WaveguideSpec spec(Geometry g, double width_nm) const;
  Sensitivity sensitivity(Geometry g, double width_nm) const;
  double delta_n(Geometry g, double width_nm, double rho_w_nm, double rho_t_nm) const;
  double delta_beta(Geometry g, double width_nm, double rho_w_nm, double rho_t_nm) const;

 private:
  std::shared_ptr<const EffIndexModel> model_;
  double thickness_nm_;
  double slab_height_nm_;
  double wavelength_nm_;
  std::array<std::vector<Sensitivity>, 2> table_;
};

}  // namespace fpv
