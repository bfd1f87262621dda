#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "fpv/mesh.hpp"
#include "fpv/metrics.hpp"
#include "fpv/optimizer.hpp"
#include "fpv/varmap.hpp"

namespace fpv {

struct Dataset {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;  // image-major, row-major per image
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const;
};

// IDX image/label pair; gzip-compressed files are inflated transparently.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
// <dir>/train-images-idx3-ubyte[.gz] etc.
Dataset load_mnist(const std::filesystem::path& dir, bool train);

enum class FeatureEncoding { kComplex, kModulus };

std::string_view to_string(FeatureEncoding e);
FeatureEncoding feature_encoding_from_string(std::string_view s);

struct FeatureVector {
  Eigen::VectorXcd values;
  bool zero = false;  // input had no spectral energy; values left at zero
};

// Centered 2-D FFT of the image (pixels scaled to [0, 1]), central k x k
// block with k = sqrt(dim), flattened row-major and normalized to unit L2.
FeatureVector extract_features(std::span<const std::uint8_t> image, int rows, int cols, int dim,
                               FeatureEncoding encoding = FeatureEncoding::kComplex);
// One column per sample.
Eigen::MatrixXcd feature_matrix(const Dataset& data, int dim,
                                FeatureEncoding encoding = FeatureEncoding::kComplex);

// FC(d,d)-SP-FC(d,d)-SP-FC(d,10)-LSM, with every layer computing
// f(|W x|) on complex fields.
struct SpnnModel {
  int feature_dim = 16;
  FeatureEncoding encoding = FeatureEncoding::kComplex;
  std::vector<Eigen::MatrixXcd> weights;

  std::uint64_t seed = 0;
  int epochs = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;

  static SpnnModel create(int feature_dim, std::uint64_t seed,
                          FeatureEncoding encoding = FeatureEncoding::kComplex);
  void validate() const;
};

nlohmann::json to_json(const SpnnModel& m);
SpnnModel spnn_model_from_json(const nlohmann::json& j);
void save_model(const SpnnModel& m, const std::filesystem::path& path);
SpnnModel load_model(const std::filesystem::path& path);

// Log-probabilities, 10 x n.
Eigen::MatrixXd forward(std::span<const Eigen::MatrixXcd> weights, const Eigen::MatrixXcd& x);
std::vector<int> predict(std::span<const Eigen::MatrixXcd> weights, const Eigen::MatrixXcd& x);
double accuracy(std::span<const Eigen::MatrixXcd> weights, const Eigen::MatrixXcd& x,
                std::span<const std::uint8_t> labels);

struct TrainParams {
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 1e-2;
  double lr_decay = 0.97;  // per epoch
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Adam on the real and imaginary parts. Throws std::domain_error when the
// loss diverges.
TrainReport train(SpnnModel& model, const Eigen::MatrixXcd& x_train,
                  std::span<const std::uint8_t> y_train, const Eigen::MatrixXcd& x_test,
                  std::span<const std::uint8_t> y_test, const TrainParams& params);

// Placement of one layer: V^H mesh, attenuator array, U mesh left to right.
struct LayerFloorplan {
  Placement vh;
  Placement sigma;
  Placement u;
};

struct PhotonicNetwork {
  std::vector<LayerDecomposition> layers;
  std::vector<LayerFloorplan> floorplan;
  Rect extent;

  std::vector<Eigen::MatrixXcd> nominal_weights() const;
  std::size_t phase_shifter_count() const;
};

// Layers are stacked vertically, each row separated by `gap` um.
PhotonicNetwork build_network(std::span<const Eigen::MatrixXcd> weights, double gap = 60.0);

using NetworkHardware = std::vector<LayerHardware>;
using NetworkVariations = std::vector<LayerVariations>;

NetworkHardware nominal_hardware(const PhotonicNetwork& net, Geometry g = Geometry::kStrip);
NetworkHardware uniform_hardware(const PhotonicNetwork& net, const MziDesign& design);

NetworkVariations sample_network(const PhotonicNetwork& net, const VariationMap& map,
                                 const NetworkHardware& hw);

// Region optimization of every sub-array; regions never span two arrays.
NetworkHardware optimize_network(const PhotonicNetwork& net, const VariationMap& map,
                                 RegionPolicy policy, Geometry g, const DeviceModel& model,
                                 RegionObjective scoring = RegionObjective::kMemberMean);

std::vector<Eigen::MatrixXcd> deviated_weights(const PhotonicNetwork& net,
                                               const NetworkHardware& hw,
                                               const NetworkVariations& vars,
                                               const DeviceModel& model,
                                               PerturbOptions options = {});

// Die map over the network extent plus one cell of margin.
VariationMap network_die_map(const PhotonicNetwork& net, const VariationParams& params);

enum class VariationMode { kWidth, kWidthThickness };

std::string_view to_string(VariationMode m);
VariationMode variation_mode_from_string(std::string_view s);

// Optimizer choice for one Monte Carlo cell.
struct DesignStrategy {
  enum class Kind { kNominal, kRegion, kWorstCase };
  Kind kind = Kind::kNominal;
  RegionPolicy policy{};
  Geometry geometry = Geometry::kStrip;
  double worst_case_width = kNominalWidthNm;
  RegionObjective scoring = RegionObjective::kMemberMean;

  static DesignStrategy nominal() { return {}; }
  static DesignStrategy region(RegionPolicy p, Geometry g,
                               RegionObjective scoring = RegionObjective::kMemberMean) {
    return {Kind::kRegion, p, g, kNominalWidthNm, scoring};
  }
  static DesignStrategy worst_case(double width) {
    return {Kind::kWorstCase, {}, Geometry::kStrip, width};
  }
  std::string label() const;
  // Inverse of label(): "no-opt", "R3-strip", "R1-ridge", "worst-case-600".
  static DesignStrategy parse(std::string_view s);
};

struct TrialSpec {
  VariationParams params{};
  VariationMode mode = VariationMode::kWidthThickness;
  DesignStrategy strategy{};
  PerturbOptions perturb{};
};

struct TrialResult {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  RvdReport rvd;
};

// One die: fresh map from spec.params (seed included), designs, deviated
// weights, accuracy on the given test features.
TrialResult run_trial(const PhotonicNetwork& net, const Eigen::MatrixXcd& x_test,
                      std::span<const std::uint8_t> y_test, const TrialSpec& spec,
                      const DeviceModel& model);

struct MonteCarloResult {
  std::vector<TrialResult> trials;
  MeanStd accuracy;
  MeanStd rvd;
};

// Trial i uses map seed base.seed + i. Trials run on up to `threads` workers
// (0 = all cores); results do not depend on the thread count.
MonteCarloResult monte_carlo_accuracy(const PhotonicNetwork& net, const Eigen::MatrixXcd& x_test,
                                      std::span<const std::uint8_t> y_test,
                                      const TrialSpec& base, int trials,
                                      const DeviceModel& model, int threads = 0);

}  // namespace fpv
