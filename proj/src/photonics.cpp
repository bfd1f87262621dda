#include "fpv/photonics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>
#include <spdlog/spdlog.h>

namespace fpv {

namespace {

enum class Polarization { kTE, kTM };

// Fundamental-mode index of a three-layer slab (substrate / core / cover).
double slab_index(double n_core, double n_sub, double n_cover, double thickness_um, double k0,
                  Polarization pol) {
  const double lo = std::max(n_sub, n_cover);
  if (!(n_core > lo)) throw std::domain_error("slab core index must exceed its claddings");
  const double a_sub = pol == Polarization::kTM ? (n_core * n_core) / (n_sub * n_sub) : 1.0;
  const double a_cov = pol == Polarization::kTM ? (n_core * n_core) / (n_cover * n_cover) : 1.0;
  auto dispersion = [&](double n) {
    const double kappa = std::sqrt(std::max(n_core * n_core - n * n, 0.0));
    const double g_sub = std::sqrt(std::max(n * n - n_sub * n_sub, 0.0));
    const double g_cov = std::sqrt(std::max(n * n - n_cover * n_cover, 0.0));
    return k0 * thickness_um * kappa - std::atan2(a_sub * g_sub, kappa) -
           std::atan2(a_cov * g_cov, kappa);
  };
  const double a = lo + 1e-13;
  const double b = n_core - 1e-13;
  if (!(dispersion(a) > 0.0)) throw std::domain_error("slab is below cutoff");
  boost::uintmax_t max_iter = 200;
  const auto [left, right] = boost::math::tools::toms748_solve(
      dispersion, a, b, boost::math::tools::eps_tolerance<double>(52), max_iter);
  return 0.5 * (left + right);
}

void check_range(double v, double lo, double hi, const char* what) {
  if (!(v >= lo && v <= hi)) {
    throw std::domain_error(std::string(what) + " outside the model validity box");
  }
}

std::size_t bracket(const std::vector<double>& axis, double v) {
  const auto it = std::upper_bound(axis.begin(), axis.end(), v);
  const auto hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - axis.begin()), 1,
                                          axis.size() - 1);
  return hi - 1;
}

}  // namespace

std::string_view to_string(Geometry g) { return g == Geometry::kStrip ? "strip" : "ridge"; }

Geometry geometry_from_string(std::string_view s) {
  if (s == "strip") return Geometry::kStrip;
  if (s == "ridge") return Geometry::kRidge;
  throw std::invalid_argument("unknown waveguide geometry '" + std::string(s) + "'");
}

WaveguideSpec WaveguideSpec::strip(double width_nm, double thickness_nm, double wavelength_nm) {
  return {Geometry::kStrip, width_nm, thickness_nm, 0.0, wavelength_nm};
}

WaveguideSpec WaveguideSpec::ridge(double width_nm, double thickness_nm, double slab_height_nm,
                                   double wavelength_nm) {
  return {Geometry::kRidge, width_nm, thickness_nm, slab_height_nm, wavelength_nm};
}

WaveguideSpec WaveguideSpec::nominal(Geometry g, double width_nm) {
  return g == Geometry::kStrip ? strip(width_nm) : ridge(width_nm);
}

void WaveguideSpec::validate() const {
  if (!(width_nm >= kMinWidthNm && width_nm <= kMaxWidthNm)) {
    throw std::invalid_argument("waveguide width outside [350, 1200] nm");
  }
  if (!(slab_height_nm >= 0.0) || !(thickness_nm > slab_height_nm)) {
    throw std::invalid_argument("waveguide requires t > h >= 0");
  }
  if (geometry == Geometry::kStrip && slab_height_nm != 0.0) {
    throw std::invalid_argument("strip waveguide has no slab");
  }
  if (!(wavelength_nm > 0.0)) throw std::invalid_argument("wavelength must be positive");
}

EimModel::EimModel(Cladding top, Materials materials) : top_(top), mat_(materials) {}

double EimModel::n_eff(const WaveguideSpec& spec) const {
  check_range(spec.width_nm, kMinWidth, kMaxWidth, "width");
  check_range(spec.thickness_nm, kMinThickness, kMaxThickness, "thickness");
  check_range(spec.wavelength_nm, 1200.0, 1700.0, "wavelength");
  const double k0 = 2.0 * std::numbers::pi / (spec.wavelength_nm * 1e-3);
  const double cover = top_ == Cladding::kAir ? mat_.n_air : mat_.n_sio2;

  const double n_core =
      slab_index(mat_.n_si, mat_.n_sio2, cover, spec.thickness_nm * 1e-3, k0, Polarization::kTE);
  double n_side = cover;
  if (spec.geometry == Geometry::kRidge) {
    if (!(spec.slab_height_nm > 0.0 && spec.slab_height_nm < spec.thickness_nm)) {
      throw std::domain_error("ridge slab height must lie in (0, t)");
    }
    n_side = slab_index(mat_.n_si, mat_.n_sio2, cover, spec.slab_height_nm * 1e-3, k0,
                        Polarization::kTE);
  }
  return slab_index(n_core, n_side, n_side, spec.width_nm * 1e-3, k0, Polarization::kTM);
}

std::string EimModel::provenance() const {
  return std::string("analytic-surrogate: effective index method, ") +
         (top_ == Cladding::kAir ? "air" : "oxide") + " top cladding";
}

TableModel::TableModel(double wavelength_nm, std::vector<Grid> grids, std::string source)
    : wavelength_nm_(wavelength_nm), grids_(std::move(grids)), source_(std::move(source)) {
  for (const auto& g : grids_) {
    if (g.widths.size() < 2 || g.thicknesses.size() < 2 ||
        g.values.size() != g.widths.size() * g.thicknesses.size()) {
      throw std::invalid_argument("n_eff table grid has inconsistent axes");
    }
    if (!std::is_sorted(g.widths.begin(), g.widths.end()) ||
        !std::is_sorted(g.thicknesses.begin(), g.thicknesses.end())) {
      throw std::invalid_argument("n_eff table axes must be ascending");
    }
  }
}

const TableModel::Grid& TableModel::grid_for(const WaveguideSpec& spec) const {
  for (const auto& g : grids_) {
    if (g.geometry != spec.geometry) continue;
    if (spec.geometry == Geometry::kRidge && std::abs(g.slab_height_nm - spec.slab_height_nm) > 1e-9) {
      continue;
    }
    return g;
  }
  throw std::domain_error("n_eff table has no grid for this geometry");
}

double TableModel::n_eff(const WaveguideSpec& spec) const {
  if (std::abs(spec.wavelength_nm - wavelength_nm_) > 1e-9) {
    throw std::domain_error("n_eff table tabulated at a different wavelength");
  }
  const Grid& g = grid_for(spec);
  check_range(spec.width_nm, g.widths.front(), g.widths.back(), "width");
  check_range(spec.thickness_nm, g.thicknesses.front(), g.thicknesses.back(), "thickness");
  const std::size_t i = bracket(g.widths, spec.width_nm);
  const std::size_t j = bracket(g.thicknesses, spec.thickness_nm);
  const double fx = (spec.width_nm - g.widths[i]) / (g.widths[i + 1] - g.widths[i]);
  const double fy =
      (spec.thickness_nm - g.thicknesses[j]) / (g.thicknesses[j + 1] - g.thicknesses[j]);
  const std::size_t nw = g.widths.size();
  const double v00 = g.values[j * nw + i];
  const double v01 = g.values[j * nw + i + 1];
  const double v10 = g.values[(j + 1) * nw + i];
  const double v11 = g.values[(j + 1) * nw + i + 1];
  return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

std::string TableModel::provenance() const { return "table: " + source_; }

nlohmann::json TableModel::to_json() const {
  nlohmann::json grids = nlohmann::json::array();
  for (const auto& g : grids_) {
    grids.push_back({{"geometry", std::string(to_string(g.geometry))},
                     {"slab_height_nm", g.slab_height_nm},
                     {"width_nm", g.widths},
                     {"thickness_nm", g.thicknesses},
                     {"n_eff", g.values}});
  }
  return {{"format", "fpv-neff-table"},
          {"provenance", source_},
          {"wavelength_nm", wavelength_nm_},
          {"grids", grids}};
}

TableModel TableModel::from_json(const nlohmann::json& j) {
  std::vector<Grid> grids;
  for (const auto& jg : j.at("grids")) {
    Grid g;
    g.geometry = geometry_from_string(jg.at("geometry").get<std::string>());
    g.slab_height_nm = jg.value("slab_height_nm", 0.0);
    g.widths = jg.at("width_nm").get<std::vector<double>>();
    g.thicknesses = jg.at("thickness_nm").get<std::vector<double>>();
    g.values = jg.at("n_eff").get<std::vector<double>>();
    grids.push_back(std::move(g));
  }
  return TableModel(j.at("wavelength_nm").get<double>(), std::move(grids),
                    j.value("provenance", std::string("json")));
}

TableModel TableModel::from_csv(std::istream& is, std::string source) {
  struct Row {
    Geometry g;
    double h, lambda, w, t, n;
  };
  std::vector<Row> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("geometry", 0) == 0) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw std::invalid_argument("n_eff CSV row needs 6 columns: " + line);
    rows.push_back({geometry_from_string(cells[0]), std::stod(cells[1]), std::stod(cells[2]),
                    std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5])});
  }
  if (rows.empty()) throw std::invalid_argument("empty n_eff CSV");
  const double lambda = rows.front().lambda;
  std::vector<Grid> grids;
  for (Geometry geo : {Geometry::kStrip, Geometry::kRidge}) {
    std::vector<Row> sel;
    for (const auto& r : rows) {
      if (r.g == geo) sel.push_back(r);
    }
    if (sel.empty()) continue;
    Grid g;
    g.geometry = geo;
    g.slab_height_nm = sel.front().h;
    for (const auto& r : sel) {
      if (std::abs(r.lambda - lambda) > 1e-9) {
        throw std::invalid_argument("n_eff CSV mixes wavelengths");
      }
      g.widths.push_back(r.w);
      g.thicknesses.push_back(r.t);
    }
    std::sort(g.widths.begin(), g.widths.end());
    g.widths.erase(std::unique(g.widths.begin(), g.widths.end()), g.widths.end());
    std::sort(g.thicknesses.begin(), g.thicknesses.end());
    g.thicknesses.erase(std::unique(g.thicknesses.begin(), g.thicknesses.end()),
                        g.thicknesses.end());
    g.values.assign(g.widths.size() * g.thicknesses.size(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : sel) {
      const auto i = static_cast<std::size_t>(
          std::lower_bound(g.widths.begin(), g.widths.end(), r.w) - g.widths.begin());
      const auto k = static_cast<std::size_t>(
          std::lower_bound(g.thicknesses.begin(), g.thicknesses.end(), r.t) - g.thicknesses.begin());
      g.values[k * g.widths.size() + i] = r.n;
    }
    if (std::any_of(g.values.begin(), g.values.end(), [](double v) { return std::isnan(v); })) {
      throw std::invalid_argument("n_eff CSV grid is not complete");
    }
    grids.push_back(std::move(g));
  }
  return TableModel(lambda, std::move(grids), std::move(source));
}

TableModel TableModel::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  if (path.extension() == ".csv") return from_csv(is, path.string());
  return from_json(nlohmann::json::parse(is));
}

TableModel TableModel::tabulate(const EffIndexModel& model, double wavelength_nm,
                                const std::vector<Geometry>& geometries,
                                const std::vector<double>& widths,
                                const std::vector<double>& thicknesses, double slab_height_nm) {
  std::vector<Grid> grids;
  for (Geometry geo : geometries) {
    Grid g;
    g.geometry = geo;
    g.slab_height_nm = geo == Geometry::kRidge ? slab_height_nm : 0.0;
    g.widths = widths;
    g.thicknesses = thicknesses;
    for (double t : thicknesses) {
      for (double w : widths) {
        g.values.push_back(model.n_eff({geo, w, t, g.slab_height_nm, wavelength_nm}));
      }
    }
    grids.push_back(std::move(g));
  }
  return TableModel(wavelength_nm, std::move(grids), "tabulated " + model.provenance());
}

double n_eff(const EffIndexModel& model, const WaveguideSpec& spec) {
  const double n = model.n_eff(spec);
  const Materials mat;
  if (!std::isfinite(n) || !(n > mat.n_sio2 && n < mat.n_si)) {
    throw std::domain_error("effective index outside the guided range");
  }
  return n;
}

double dn_eff(const EffIndexModel& model, const WaveguideSpec& spec, Partial which,
              double step_nm) {
  WaveguideSpec plus = spec;
  WaveguideSpec minus = spec;
  double& p = which == Partial::kWidth ? plus.width_nm : plus.thickness_nm;
  double& m = which == Partial::kWidth ? minus.width_nm : minus.thickness_nm;
  p += step_nm;
  m -= step_nm;
  return (n_eff(model, plus) - n_eff(model, minus)) / (2.0 * step_nm);
}

double delta_beta(const EffIndexModel& model, const WaveguideSpec& spec, double rho_w_nm,
                  double rho_t_nm) {
  const double k0 = 2.0 * std::numbers::pi / (spec.wavelength_nm * 1e-3);
  const double dw = dn_eff(model, spec, Partial::kWidth);
  const double dt = dn_eff(model, spec, Partial::kThickness);
  return k0 * (dw * rho_w_nm + dt * rho_t_nm);
}

void DcSpec::validate() const {
  if (!(length_um > 0.0)) throw std::invalid_argument("DC length must be positive");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("DC kappa outside [0, 1]");
}

double delta_kappa(const DcSpec& dc, double delta_n, double wavelength_nm) {
  const double s = std::sin(std::numbers::pi * dc.length_um * 1e3 * delta_n / wavelength_nm);
  return dc.input_field * s * s;
}

double perturbed_kappa(const DcSpec& dc, double delta_kappa) {
  const double k = dc.kappa + delta_kappa;
  if (k < 0.0 || k > 1.0) {
    spdlog::warn("DC coupling {:.4f} outside [0, 1]; clamped", k);
    return std::clamp(k, 0.0, 1.0);
  }
  return k;
}

double delta_n_dc(const EffIndexModel& model, const DcSpec& dc, const WaveguideSpec& spec,
                  double rho_w_nm, double rho_t_nm) {
  dc.validate();
  return dn_eff(model, spec, Partial::kWidth) * rho_w_nm +
         dn_eff(model, spec, Partial::kThickness) * rho_t_nm;
}

double taper_length(double w_from_nm, double w_to_nm) {
  return std::abs(w_to_nm - w_from_nm) / 100.0;
}

DeviceModel::DeviceModel(std::shared_ptr<const EffIndexModel> model, double thickness_nm,
                         double slab_height_nm, double wavelength_nm)
    : model_(std::move(model)),
      thickness_nm_(thickness_nm),
      slab_height_nm_(slab_height_nm),
      wavelength_nm_(wavelength_nm) {
  if (!model_) throw std::invalid_argument("DeviceModel needs an index model");
  const int n = static_cast<int>(kMaxWidthNm - kMinWidthNm) + 1;
  for (Geometry g : {Geometry::kStrip, Geometry::kRidge}) {
    auto& tab = table_[static_cast<int>(g)];
    tab.reserve(n);
    for (int i = 0; i < n; ++i) {
      const WaveguideSpec s = spec(g, kMinWidthNm + i);
      tab.push_back({dn_eff(*model_, s, Partial::kWidth), dn_eff(*model_, s, Partial::kThickness)});
    }
  }
}

std::shared_ptr<const DeviceModel> DeviceModel::default_model() {
  static const auto model = std::make_shared<const DeviceModel>(std::make_shared<EimModel>());
  return model;
}

double DeviceModel::k0_per_um() const {
  return 2.0 * std::numbers::pi / (wavelength_nm_ * 1e-3);
}

WaveguideSpec DeviceModel::spec(Geometry g, double width_nm) const {
  return g == Geometry::kStrip
             ? WaveguideSpec::strip(width_nm, thickness_nm_, wavelength_nm_)
             : WaveguideSpec::ridge(width_nm, thickness_nm_, slab_height_nm_, wavelength_nm_);
}

Sensitivity DeviceModel::sensitivity(Geometry g, double width_nm) const {
  const double idx = width_nm - kMinWidthNm;
  if (idx >= 0.0 && width_nm <= kMaxWidthNm && idx == std::floor(idx)) {
    return table_[static_cast<int>(g)][static_cast<std::size_t>(idx)];
  }
  const WaveguideSpec s = spec(g, width_nm);
  return {dn_eff(*model_, s, Partial::kWidth), dn_eff(*model_, s, Partial::kThickness)};
}

double DeviceModel::delta_n(Geometry g, double width_nm, double rho_w_nm, double rho_t_nm) const {
  const Sensitivity s = sensitivity(g, width_nm);
  return s.dn_dw * rho_w_nm + s.dn_dt * rho_t_nm;
}

double DeviceModel::delta_beta(Geometry g, double width_nm, double rho_w_nm,
                               double rho_t_nm) const {
  const Sensitivity s = sensitivity(g, width_nm);
  return k0_per_um() * (s.dn_dw * rho_w_nm + s.dn_dt * rho_t_nm);
}

}  // namespace fpv
