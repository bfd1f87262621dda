#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "fpv/metrics.hpp"
#include "fpv/spnn.hpp"

namespace fpv {

// Missing or inconsistent inputs the caller can fix from the command line.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Batch settings shared by every subcommand. Built-in defaults follow the
// Table I variation parameters; a JSON file may override any subset of keys.
struct ExperimentConfig {
  std::string network = "net1";  // net1 (d = 16) or net2 (d = 64)
  VariationParams variation{};   // 1x sigma; seed is ignored in favor of `seed`
  std::vector<double> sigma_scales{0.5, 1.0, 2.0};
  std::vector<double> corr_lengths{100.0, 1000.0};
  Geometry geometry = Geometry::kRidge;  // region designs of sweep-fig5 / optimize-region
  RegionPolicy policy{3};
  RegionObjective scoring = RegionObjective::kMemberMean;
  std::vector<std::string> strategies{"no-opt",   "R1-strip", "R3-strip",  "R6-strip",
                                      "R12-strip", "R3-ridge", "R6-ridge", "R12-ridge"};
  std::vector<VariationMode> modes{VariationMode::kWidth, VariationMode::kWidthThickness};
  std::vector<double> budgets{0.01, 0.02, 0.04, 0.08, 0.16, 0.32};
  PerturbOptions perturb{};
  int trials = 5;
  int unitaries = 100;
  int unitary_size = 16;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = all cores

  std::filesystem::path mnist_dir = FPV_DATA_DIR "/mnist";
  std::filesystem::path weights;     // empty: <output_dir>/<network>.json
  std::filesystem::path output_dir;  // empty: FPV_OUTPUT_DIR or "results"

  TrainParams training{};

  int feature_dim() const;
  std::filesystem::path weights_path() const;
  // Throws UsageError.
  void validate() const;
};

// Default output directory: $FPV_OUTPUT_DIR when set, else "results".
std::filesystem::path default_output_dir();

nlohmann::json to_json(const ExperimentConfig& c);
// Keys absent from `j` keep the values already in `base`; unknown keys are
// rejected so typos do not pass silently.
ExperimentConfig merge_config(ExperimentConfig base, const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

// Trained network mapped to meshes plus its test set.
struct NetworkContext {
  SpnnModel model;
  PhotonicNetwork network;
  Eigen::MatrixXcd x_test;
  std::vector<std::uint8_t> y_test;
  double nominal_accuracy = 0.0;  // software forward pass
};

// Loads the weight archive; trains and saves one first when it is missing
// and `train_if_missing` is set, otherwise throws UsageError.
NetworkContext prepare_network(const ExperimentConfig& cfg, bool train_if_missing);

// Plain comma-separated tables; fields never contain commas or quotes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws std::out_of_range
  double number(std::size_t row, const std::string& name) const;
  const std::string& text(std::size_t row, const std::string& name) const;
};

void write_csv(const CsvTable& t, const std::filesystem::path& path);
CsvTable read_csv(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

struct Fig5Row {
  double sigma_scale = 1.0;
  double corr_length = 0.0;
  std::string policy;
  BoxStats stats;
  double iqr_cv = 0.0;  // spread of the IQR over 10 equal batches of unitaries
};

struct Fig5Result {
  std::vector<Fig5Row> rows;
  // samples[row][k]: RVD of unitary k under rows[row].
  std::vector<std::vector<double>> samples;
};

// Haar 16x16 unitaries on one OIU footprint, W+T variations. The no-opt row
// uses nominal strip MZIs; R-policies use cfg.geometry region designs.
Fig5Result run_figure5_rvd(const ExperimentConfig& cfg, const DeviceModel& model);
CsvTable fig5_table(const Fig5Result& r);

struct Fig6Row {
  double sigma_scale = 1.0;
  double corr_length = 0.0;
  std::string strategy;
  VariationMode mode = VariationMode::kWidthThickness;
  int trial = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double rvd = 0.0;
  double normalized_rvd = 0.0;
};

struct Fig6Cell {
  double sigma_scale = 1.0;
  double corr_length = 0.0;
  std::string strategy;
  VariationMode mode = VariationMode::kWidthThickness;
  MeanStd accuracy;
  MeanStd rvd;
};

struct Fig6Result {
  double nominal_accuracy = 0.0;
  std::vector<Fig6Row> rows;
  std::vector<Fig6Cell> cells;
  LinearFit rvd_fit;  // accuracy against RVD over the cell means
  bool fit_valid = false;
};

// Every (sigma scale, corr length, strategy, mode, trial). Trial t of every
// cell shares map seed cfg.seed + t.
Fig6Result run_figure6_sweep(const ExperimentConfig& cfg, const NetworkContext& ctx,
                             const DeviceModel& model);
CsvTable fig6_table(const Fig6Result& r);
nlohmann::json fig6_summary(const Fig6Result& r);

struct Table3Row {
  double budget = 0.0;
  WorstCaseDesign design;
  double corr_length = 0.0;
  MeanStd pre;
  MeanStd post;
};

// Width-only variations at 1x sigma (sigma_scales is ignored), strip MZIs.
std::vector<Table3Row> run_table3_sweep(const ExperimentConfig& cfg, const NetworkContext& ctx,
                                        const DeviceModel& model);
CsvTable table3_table(std::span<const Table3Row> rows);

}  // namespace fpv
