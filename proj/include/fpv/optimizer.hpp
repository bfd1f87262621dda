#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fpv/mesh.hpp"
#include "fpv/mzi.hpp"

namespace fpv {

// Region size in MZIs; 0 means no optimization.
struct RegionPolicy {
  int size = 0;

  static RegionPolicy none() { return {0}; }
  static RegionPolicy parse(std::string_view s);  // "none", "R1", "R3", "R6", "R12"
  std::string name() const;
  bool optimizes() const { return size > 0; }
};

// Region id per placed MZI. MZIs are walked band by band (a band is a pair
// of adjacent port rows), left to right, and cut into runs of `size`.
std::vector<int> assign_regions(const Placement& placement, int size);

// Arm length for a heater arm widened from the nominal width, tapers included.
double arm_length_for_width(double width_nm);

// Design with the given arm widths and rule-derived arm lengths.
MziDesign design_for_widths(Geometry g, const std::array<double, 4>& widths);

// Per-arm mean over a set of MZIs (arms and couplers separately).
ArmVariations mean_variations(std::span<const ArmVariations> vars, std::span<const int> members);

// |dB1 L1 - dB2 L2| with lengths following the taper rule.
double stage_objective(const DeviceModel& model, Geometry g, double w_upper,
                       const ArmVariation& upper, double w_lower, const ArmVariation& lower);

struct StageWidths {
  double upper = kNominalWidthNm;
  double lower = kNominalWidthNm;
  double objective = 0.0;
};

// Exhaustive 1 nm search over [350, 1200] minimizing the mean over members of
// |dB_u L_u - dB_l L_l|, with upper[i] and lower[i] belonging to one MZI. The
// lower width is first searched within +-50 nm of the upper one; the full
// grid is searched when the best pair sits on that window's edge. Ties go to
// the smallest total width change, then the smallest widths.
StageWidths optimize_stage(const DeviceModel& model, Geometry g,
                           std::span<const ArmVariation> upper,
                           std::span<const ArmVariation> lower);
StageWidths optimize_stage(const DeviceModel& model, Geometry g, const ArmVariation& upper,
                           const ArmVariation& lower);

MziDesign optimize_mzi(const DeviceModel& model, Geometry g, const ArmVariations& target);
// One shared design for vars[members].
MziDesign optimize_mzi(const DeviceModel& model, Geometry g, std::span<const ArmVariations> vars,
                       std::span<const int> members);

// What a region's shared design is scored on.
//  kMemberMean: phase noise averaged over the member MZIs.
//  kRegionMean: phase noise of one MZI seeing the members' mean variations.
// The second cancels well only when members share the same deviation sign
// pattern, which short correlation lengths break.
enum class RegionObjective { kMemberMean, kRegionMean };

std::string_view to_string(RegionObjective o);
RegionObjective region_objective_from_string(std::string_view s);

struct RegionDesign {
  RegionPolicy policy;
  Geometry geometry = Geometry::kStrip;
  std::vector<int> region_of;       // per MZI
  std::vector<MziDesign> designs;   // per MZI
  RegionObjective scoring = RegionObjective::kMemberMean;
  std::vector<double> objective;          // per region, rad
  std::vector<double> nominal_objective;  // same score for the nominal design

  std::size_t region_count() const { return objective.size(); }
};

// One design per region. `vars` holds one entry per placed MZI, sampled with
// nominal designs.
RegionDesign region_optimize(const Placement& placement, std::span<const ArmVariations> vars,
                             RegionPolicy policy, Geometry g, const DeviceModel& model,
                             RegionObjective scoring = RegionObjective::kMemberMean);
RegionDesign region_optimize(const Placement& placement, const VariationMap& map,
                             RegionPolicy policy, Geometry g, const DeviceModel& model,
                             RegionObjective scoring = RegionObjective::kMemberMean);

nlohmann::json design_table_json(const RegionDesign& design);

// Four-arm waveguide footprint in nm*um, tapers counted at their mean width.
double footprint_area(double width_nm);
// footprint_area(w) / footprint_area(470) - 1.
double area_overhead(double width_nm);

struct WorstCaseDesign {
  double width_nm = kNominalWidthNm;
  double taper_um = 0.0;
  double arm_length_um = kArmLengthUm;
  double overhead = 0.0;

  MziDesign design(Geometry g) const;
};

WorstCaseDesign worst_case_design(double width_nm);
// Widest integer equal-arm width in [470, 1200] within the budget.
WorstCaseDesign worst_case_optimize(double area_budget);

// Pairs phases with their per-MZI physical designs.
std::vector<MziConfig> apply_design(const MeshProgram& program,
                                    std::span<const MziDesign> designs);

}  // namespace fpv
