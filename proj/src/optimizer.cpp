#include "fpv/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace fpv {

namespace {

constexpr int kWindow = 50;
constexpr int kWidthCount = static_cast<int>(kMaxWidthNm - kMinWidthNm) + 1;

double width_of(int i) { return kMinWidthNm + i; }

}  // namespace

RegionPolicy RegionPolicy::parse(std::string_view s) {
  if (s == "none" || s == "no-opt") return none();
  if (s.size() >= 2 && (s[0] == 'R' || s[0] == 'r')) {
    const std::string digits(s.substr(1));
    if (digits.find_first_not_of("0123456789") == std::string::npos) {
      const int n = std::stoi(digits);
      if (n >= 1) return {n};
    }
  }
  throw std::invalid_argument("unknown region policy '" + std::string(s) + "'");
}

std::string RegionPolicy::name() const { return size > 0 ? "R" + std::to_string(size) : "none"; }

std::vector<int> assign_regions(const Placement& placement, int size) {
  if (size < 1) throw std::invalid_argument("region size must be positive");
  std::vector<std::size_t> order(placement.mzis.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ma = placement.mzis[a];
    const auto& mb = placement.mzis[b];
    if (ma.row / 2 != mb.row / 2) return ma.row / 2 < mb.row / 2;
    return ma.col < mb.col;
  });
  std::vector<int> region(placement.mzis.size(), -1);
  int id = -1;
  int filled = size;
  int band = -1;
  for (std::size_t i : order) {
    const int b = placement.mzis[i].row / 2;
    if (filled == size || b != band) {
      ++id;
      filled = 0;
      band = b;
    }
    region[i] = id;
    ++filled;
  }
  return region;
}

double arm_length_for_width(double width_nm) {
  return kArmLengthUm + taper_length(kNominalWidthNm, width_nm);
}

MziDesign design_for_widths(Geometry g, const std::array<double, 4>& widths) {
  MziDesign d = MziDesign::nominal(g);
  d.arm_widths = widths;
  for (int i = 0; i < 4; ++i) d.arm_lengths[i] = arm_length_for_width(widths[i]);
  d.validate();
  return d;
}

ArmVariations mean_variations(std::span<const ArmVariations> vars, std::span<const int> members) {
  if (members.empty()) throw std::invalid_argument("region has no MZIs");
  ArmVariations m;
  for (int idx : members) {
    const auto& v = vars[static_cast<std::size_t>(idx)];
    for (int a = 0; a < 4; ++a) {
      m.arms[a].rho_w += v.arms[a].rho_w;
      m.arms[a].rho_t += v.arms[a].rho_t;
    }
    for (int c = 0; c < 2; ++c) {
      m.dcs[c].rho_w += v.dcs[c].rho_w;
      m.dcs[c].rho_t += v.dcs[c].rho_t;
    }
  }
  const double n = static_cast<double>(members.size());
  for (auto& a : m.arms) {
    a.rho_w /= n;
    a.rho_t /= n;
  }
  for (auto& c : m.dcs) {
    c.rho_w /= n;
    c.rho_t /= n;
  }
  return m;
}

double stage_objective(const DeviceModel& model, Geometry g, double w_upper,
                       const ArmVariation& upper, double w_lower, const ArmVariation& lower) {
  const double a = model.delta_beta(g, w_upper, upper.rho_w, upper.rho_t) *
                   arm_length_for_width(w_upper);
  const double b = model.delta_beta(g, w_lower, lower.rho_w, lower.rho_t) *
                   arm_length_for_width(w_lower);
  return std::abs(a - b);
}

StageWidths optimize_stage(const DeviceModel& model, Geometry g,
                           std::span<const ArmVariation> upper,
                           std::span<const ArmVariation> lower) {
  if (upper.size() != lower.size() || upper.empty()) {
    throw std::invalid_argument("optimize_stage needs matching, non-empty arm lists");
  }
  const std::size_t n = upper.size();
  // fu[w * n + i]: phase error of member i's upper arm at width index w.
  std::vector<double> fu(kWidthCount * n), fl(kWidthCount * n);
  for (int w = 0; w < kWidthCount; ++w) {
    const double width = width_of(w);
    const double len = arm_length_for_width(width);
    for (std::size_t i = 0; i < n; ++i) {
      fu[w * n + i] = model.delta_beta(g, width, upper[i].rho_w, upper[i].rho_t) * len;
      fl[w * n + i] = model.delta_beta(g, width, lower[i].rho_w, lower[i].rho_t) * len;
    }
  }
  auto cost = [&](int iu, int il) {
    const double* a = &fu[iu * n];
    const double* b = &fl[il * n];
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::abs(a[i] - b[i]);
    return sum / static_cast<double>(n);
  };
  const int nominal = static_cast<int>(kNominalWidthNm - kMinWidthNm);
  struct Best {
    double j = std::numeric_limits<double>::infinity();
    int change = 0;
    int sum = 0;
    int iu = 0;
    int il = 0;
  };
  auto consider = [&](Best& best, int iu, int il) {
    const double j = cost(iu, il);
    const int change = std::abs(iu - nominal) + std::abs(il - nominal);
    const int sum = iu + il;
    if (j < best.j || (j == best.j && (change < best.change ||
                                       (change == best.change && sum < best.sum)))) {
      best = {j, change, sum, iu, il};
    }
  };

  Best best;
  for (int iu = 0; iu < kWidthCount; ++iu) {
    const int lo = std::max(0, iu - kWindow);
    const int hi = std::min(kWidthCount - 1, iu + kWindow);
    for (int il = lo; il <= hi; ++il) consider(best, iu, il);
  }
  if (std::abs(best.iu - best.il) == kWindow) {
    for (int iu = 0; iu < kWidthCount; ++iu) {
      for (int il = 0; il < kWidthCount; ++il) consider(best, iu, il);
    }
  }
  return {width_of(best.iu), width_of(best.il), best.j};
}

StageWidths optimize_stage(const DeviceModel& model, Geometry g, const ArmVariation& upper,
                           const ArmVariation& lower) {
  return optimize_stage(model, g, std::span(&upper, 1), std::span(&lower, 1));
}

MziDesign optimize_mzi(const DeviceModel& model, Geometry g, const ArmVariations& target) {
  const StageWidths phi = optimize_stage(model, g, target.arms[0], target.arms[1]);
  const StageWidths theta = optimize_stage(model, g, target.arms[2], target.arms[3]);
  return design_for_widths(g, {phi.upper, phi.lower, theta.upper, theta.lower});
}

MziDesign optimize_mzi(const DeviceModel& model, Geometry g, std::span<const ArmVariations> vars,
                       std::span<const int> members) {
  if (members.empty()) throw std::invalid_argument("region has no MZIs");
  std::array<std::vector<ArmVariation>, 4> arms;
  for (int idx : members) {
    const auto& v = vars[static_cast<std::size_t>(idx)];
    for (int a = 0; a < 4; ++a) arms[a].push_back(v.arms[a]);
  }
  const StageWidths phi = optimize_stage(model, g, arms[0], arms[1]);
  const StageWidths theta = optimize_stage(model, g, arms[2], arms[3]);
  return design_for_widths(g, {phi.upper, phi.lower, theta.upper, theta.lower});
}

std::string_view to_string(RegionObjective o) {
  return o == RegionObjective::kMemberMean ? "member-mean" : "region-mean";
}

RegionObjective region_objective_from_string(std::string_view s) {
  if (s == "member-mean") return RegionObjective::kMemberMean;
  if (s == "region-mean") return RegionObjective::kRegionMean;
  throw std::invalid_argument("unknown region objective '" + std::string(s) + "'");
}

RegionDesign region_optimize(const Placement& placement, std::span<const ArmVariations> vars,
                             RegionPolicy policy, Geometry g, const DeviceModel& model,
                             RegionObjective scoring) {
  if (vars.size() != placement.mzis.size()) {
    throw std::invalid_argument("need one variation entry per placed MZI");
  }
  RegionDesign out;
  out.policy = policy;
  out.geometry = g;
  out.scoring = scoring;
  if (!policy.optimizes()) {
    out.region_of.assign(placement.mzis.size(), -1);
    out.designs.assign(placement.mzis.size(), MziDesign::nominal(g));
    return out;
  }
  out.region_of = assign_regions(placement, policy.size);
  const int regions = out.region_of.empty()
                          ? 0
                          : *std::max_element(out.region_of.begin(), out.region_of.end()) + 1;
  std::vector<std::vector<int>> members(static_cast<std::size_t>(regions));
  for (std::size_t i = 0; i < out.region_of.size(); ++i) {
    members[static_cast<std::size_t>(out.region_of[i])].push_back(static_cast<int>(i));
  }
  std::vector<MziDesign> region_designs;
  const MziDesign nominal = MziDesign::nominal(g);
  for (const auto& m : members) {
    if (scoring == RegionObjective::kRegionMean) {
      const ArmVariations mean = mean_variations(vars, m);
      const MziDesign d = optimize_mzi(model, g, mean);
      region_designs.push_back(d);
      out.objective.push_back(arm_phase_noise(d, mean, model).total());
      out.nominal_objective.push_back(arm_phase_noise(nominal, mean, model).total());
      continue;
    }
    const MziDesign d = optimize_mzi(model, g, vars, m);
    region_designs.push_back(d);
    double j = 0.0, j0 = 0.0;
    for (int idx : m) {
      j += arm_phase_noise(d, vars[static_cast<std::size_t>(idx)], model).total();
      j0 += arm_phase_noise(nominal, vars[static_cast<std::size_t>(idx)], model).total();
    }
    out.objective.push_back(j / static_cast<double>(m.size()));
    out.nominal_objective.push_back(j0 / static_cast<double>(m.size()));
  }
  out.designs.reserve(placement.mzis.size());
  for (int r : out.region_of) out.designs.push_back(region_designs[static_cast<std::size_t>(r)]);
  return out;
}

RegionDesign region_optimize(const Placement& placement, const VariationMap& map,
                             RegionPolicy policy, Geometry g, const DeviceModel& model,
                             RegionObjective scoring) {
  const std::vector<MziDesign> nominal(placement.mzis.size(), MziDesign::nominal(g));
  const auto vars = sample_mzi_vars(placement, map, nominal);
  return region_optimize(placement, vars, policy, g, model, scoring);
}

nlohmann::json design_table_json(const RegionDesign& design) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < design.designs.size(); ++i) {
    const auto& d = design.designs[i];
    std::array<double, 4> tapers{};
    for (int a = 0; a < 4; ++a) tapers[a] = taper_length(kNominalWidthNm, d.arm_widths[a]);
    rows.push_back({{"mzi", i},
                    {"region", design.region_of[i]},
                    {"arm_widths_nm", d.arm_widths},
                    {"taper_lengths_um", tapers},
                    {"arm_lengths_um", d.arm_lengths}});
  }
  return {{"policy", design.policy.name()},
          {"geometry", std::string(to_string(design.geometry))},
          {"scoring", std::string(to_string(design.scoring))},
          {"region_objective_rad", design.objective},
          {"nominal_objective_rad", design.nominal_objective},
          {"mzis", rows}};
}

double footprint_area(double width_nm) {
  const double taper = taper_length(kNominalWidthNm, width_nm);
  const double taper_width = 0.5 * (kNominalWidthNm + width_nm);
  return 4.0 * (width_nm * kArmLengthUm + taper_width * taper);
}

double area_overhead(double width_nm) {
  return footprint_area(width_nm) / footprint_area(kNominalWidthNm) - 1.0;
}

MziDesign WorstCaseDesign::design(Geometry g) const {
  return design_for_widths(g, {width_nm, width_nm, width_nm, width_nm});
}

WorstCaseDesign worst_case_design(double width_nm) {
  if (!(width_nm >= kMinWidthNm && width_nm <= kMaxWidthNm)) {
    throw std::invalid_argument("width outside [350, 1200] nm");
  }
  WorstCaseDesign d;
  d.width_nm = width_nm;
  d.taper_um = taper_length(kNominalWidthNm, width_nm);
  d.arm_length_um = arm_length_for_width(width_nm);
  d.overhead = area_overhead(width_nm);
  return d;
}

WorstCaseDesign worst_case_optimize(double area_budget) {
  if (!(area_budget >= 0.0)) throw std::invalid_argument("area budget must be non-negative");
  for (int w = static_cast<int>(kMaxWidthNm); w >= static_cast<int>(kNominalWidthNm); --w) {
    if (area_overhead(w) <= area_budget) return worst_case_design(w);
  }
  spdlog::warn("no width fits an area budget of {}; keeping the nominal design", area_budget);
  return worst_case_design(kNominalWidthNm);
}

std::vector<MziConfig> apply_design(const MeshProgram& program,
                                    std::span<const MziDesign> designs) {
  if (designs.size() != program.mzis.size()) {
    throw std::invalid_argument("need one design per MZI");
  }
  std::vector<MziConfig> out;
  out.reserve(designs.size());
  for (std::size_t i = 0; i < designs.size(); ++i) {
    designs[i].validate();
    out.push_back({program.mzis[i].theta, program.mzis[i].phi, designs[i]});
  }
  return out;
}

}  // namespace fpv
