#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fpv/spnn.hpp"

using namespace fpv;
using cd = std::complex<double>;
namespace fs = std::filesystem;

namespace {

const DeviceModel& model() {
  static const auto m = DeviceModel::default_model();
  return *m;
}

const Dataset& mnist_test() {
  static const Dataset d = load_mnist(fs::path(FPV_DATA_DIR) / "mnist", false);
  return d;
}

Dataset first_n(const Dataset& d, std::size_t n) {
  Dataset out;
  out.rows = d.rows;
  out.cols = d.cols;
  const std::size_t px = static_cast<std::size_t>(d.rows) * d.cols;
  out.pixels.assign(d.pixels.begin(), d.pixels.begin() + n * px);
  out.labels.assign(d.labels.begin(), d.labels.begin() + n);
  return out;
}

void write_be32(std::ofstream& os, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  os.write(b, 4);
}

}  // namespace

TEST(Features, MatchNaiveDft) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> px(0, 255);
  const int rows = 12, cols = 10;
  std::vector<std::uint8_t> img(rows * cols);
  for (auto& p : img) p = static_cast<std::uint8_t>(px(rng));
  for (int dim : {4, 9, 16}) {
    const int k = static_cast<int>(std::lround(std::sqrt(dim)));
    Eigen::VectorXcd want(dim);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        const int u = i - k / 2, v = j - k / 2;
        cd s = 0.0;
        for (int m = 0; m < rows; ++m) {
          for (int n = 0; n < cols; ++n) {
            const double a = -2.0 * std::numbers::pi * (double(u) * m / rows + double(v) * n / cols);
            s += img[m * cols + n] / 255.0 * std::polar(1.0, a);
          }
        }
        want[i * k + j] = s;
      }
    }
    want /= want.norm();
    const FeatureVector got = extract_features(img, rows, cols, dim);
    EXPECT_FALSE(got.zero);
    EXPECT_LT((got.values - want).cwiseAbs().maxCoeff(), 1e-9) << dim;
    const FeatureVector mod = extract_features(img, rows, cols, dim, FeatureEncoding::kModulus);
    EXPECT_LT((mod.values - want.cwiseAbs().cast<cd>()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Features, ZeroAndConstantImages) {
  const std::vector<std::uint8_t> zero(28 * 28, 0);
  const FeatureVector z = extract_features(zero, 28, 28, 16);
  EXPECT_TRUE(z.zero);
  EXPECT_EQ(z.values.norm(), 0.0);

  const std::vector<std::uint8_t> flat(28 * 28, 200);
  const FeatureVector c = extract_features(flat, 28, 28, 16);
  // Only the zero frequency survives; it sits at the block center (2, 2).
  for (int i = 0; i < 16; ++i) {
    EXPECT_NEAR(std::abs(c.values[i]), i == 2 * 4 + 2 ? 1.0 : 0.0, 1e-12);
  }
  EXPECT_THROW(extract_features(flat, 28, 28, 15), std::invalid_argument);
  EXPECT_THROW(extract_features(flat, 28, 27, 16), std::invalid_argument);
}

TEST(Mnist, LoadsTestSet) {
  const Dataset& d = mnist_test();
  EXPECT_GE(d.size(), 1000u);
  EXPECT_EQ(d.rows, 28);
  EXPECT_EQ(d.cols, 28);
  for (int i = 0; i < 100; ++i) EXPECT_LT(d.labels[i], 10);
  EXPECT_THROW(load_mnist("/nonexistent", false), std::runtime_error);
}

TEST(Mnist, RawIdxRoundTrip) {
  const auto dir = fs::temp_directory_path() / "fpv_test_idx";
  fs::create_directories(dir);
  {
    std::ofstream im(dir / "img", std::ios::binary), lb(dir / "lbl", std::ios::binary);
    write_be32(im, 0x803);
    write_be32(im, 2);
    write_be32(im, 2);
    write_be32(im, 3);
    const char px[12] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    im.write(px, 12);
    write_be32(lb, 0x801);
    write_be32(lb, 2);
    const char l[2] = {7, 3};
    lb.write(l, 2);
  }
  const Dataset d = load_idx(dir / "img", dir / "lbl");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.rows, 2);
  EXPECT_EQ(d.cols, 3);
  EXPECT_EQ(d.image(1)[0], 6);
  EXPECT_EQ(d.labels[0], 7);
  EXPECT_THROW(load_idx(dir / "lbl", dir / "img"), std::runtime_error);
}

TEST(Model, JsonRoundTripAndValidation) {
  SpnnModel m = SpnnModel::create(16, 5);
  m.epochs = 3;
  m.test_accuracy = 0.5;
  const SpnnModel b = spnn_model_from_json(to_json(m));
  ASSERT_EQ(b.weights.size(), 3u);
  for (int l = 0; l < 3; ++l) EXPECT_EQ((b.weights[l] - m.weights[l]).norm(), 0.0);
  EXPECT_EQ(b.epochs, 3);
  EXPECT_EQ(b.feature_dim, 16);
  const auto path = fs::temp_directory_path() / "fpv_test_model.json";
  save_model(m, path);
  EXPECT_EQ((load_model(path).weights[2] - m.weights[2]).norm(), 0.0);
  m.weights[1].resize(3, 3);
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(Forward, InvariantToLayerGlobalPhase) {
  const SpnnModel m = SpnnModel::create(16, 6);
  const Eigen::MatrixXcd x = feature_matrix(first_n(mnist_test(), 50), 16);
  auto w = m.weights;
  w[0] *= std::polar(1.0, 0.7);
  w[2] *= std::polar(1.0, -2.1);
  EXPECT_LT((forward(w, x) - forward(m.weights, x)).cwiseAbs().maxCoeff(), 1e-12);
  // Log-probabilities normalize.
  const Eigen::MatrixXd lp = forward(m.weights, x);
  for (int c = 0; c < lp.cols(); ++c) EXPECT_NEAR(lp.col(c).array().exp().sum(), 1.0, 1e-12);
}

TEST(Train, SingleClassIsLearned) {
  const Dataset d = first_n(mnist_test(), 200);
  const Eigen::MatrixXcd x = feature_matrix(d, 16);
  const std::vector<std::uint8_t> y(200, 4);
  SpnnModel m = SpnnModel::create(16, 7);
  TrainParams p;
  p.epochs = 5;
  const TrainReport r = train(m, x, y, x, y, p);
  EXPECT_EQ(r.epoch_loss.size(), 5u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_DOUBLE_EQ(r.test_accuracy, 1.0);
}

TEST(Train, ZeroLearningRateKeepsWeights) {
  const Dataset d = first_n(mnist_test(), 64);
  const Eigen::MatrixXcd x = feature_matrix(d, 16);
  SpnnModel m = SpnnModel::create(16, 8);
  const auto before = m.weights;
  TrainParams p;
  p.epochs = 2;
  p.learning_rate = 0.0;
  train(m, x, d.labels, x, d.labels, p);
  for (int l = 0; l < 3; ++l) EXPECT_EQ((m.weights[l] - before[l]).norm(), 0.0);
  p.batch_size = 0;
  EXPECT_THROW(train(m, x, d.labels, x, d.labels, p), std::invalid_argument);
}

TEST(Network, FloorplanAndPhaseShifters) {
  const SpnnModel m = SpnnModel::create(16, 9);
  const PhotonicNetwork net = build_network(m.weights);
  EXPECT_EQ(net.layers.size(), 3u);
  EXPECT_EQ(net.phase_shifter_count(), 1380u);
  EXPECT_DOUBLE_EQ(net.extent.width(), 11560.0);
  EXPECT_DOUBLE_EQ(net.extent.height(), 1560.0);
  // Sub-arrays never overlap.
  std::vector<Rect> boxes;
  for (const auto& f : net.floorplan) {
    for (const Placement* p : {&f.vh, &f.sigma, &f.u}) {
      for (const auto& z : p->mzis) boxes.push_back(z.box);
    }
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const Rect& a = boxes[i];
      const Rect& b = boxes[j];
      ASSERT_FALSE(a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1);
    }
  }
}

TEST(Network, ZeroVariationReproducesSoftware) {
  const SpnnModel m = SpnnModel::create(16, 10);
  const PhotonicNetwork net = build_network(m.weights);
  const auto nom = net.nominal_weights();
  for (int l = 0; l < 3; ++l) EXPECT_LT((nom[l] - m.weights[l]).cwiseAbs().maxCoeff(), 1e-10);
  VariationParams vp;
  vp.sigma_w = vp.sigma_t = 0.0;
  const NetworkHardware hw = nominal_hardware(net);
  const auto vars = sample_network(net, network_die_map(net, vp), hw);
  const auto dev = deviated_weights(net, hw, vars, model());
  for (int l = 0; l < 3; ++l) EXPECT_LT((dev[l] - m.weights[l]).cwiseAbs().maxCoeff(), 1e-10);
}

class MonteCarlo : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const Dataset d = first_n(mnist_test(), 300);
    x_ = new Eigen::MatrixXcd(feature_matrix(d, 16));
    y_ = new std::vector<std::uint8_t>(d.labels);
    net_ = new PhotonicNetwork(build_network(SpnnModel::create(16, 11).weights));
  }
  static void TearDownTestSuite() {
    delete x_;
    delete y_;
    delete net_;
  }
  static Eigen::MatrixXcd* x_;
  static std::vector<std::uint8_t>* y_;
  static PhotonicNetwork* net_;
};

Eigen::MatrixXcd* MonteCarlo::x_ = nullptr;
std::vector<std::uint8_t>* MonteCarlo::y_ = nullptr;
PhotonicNetwork* MonteCarlo::net_ = nullptr;

TEST_F(MonteCarlo, ZeroSigmaGivesNominal) {
  TrialSpec spec;
  spec.params.sigma_w = spec.params.sigma_t = 0.0;
  const double nominal = accuracy(net_->nominal_weights(), *x_, *y_);
  for (const char* s : {"no-opt", "R3-strip", "worst-case-600"}) {
    spec.strategy = DesignStrategy::parse(s);
    const MonteCarloResult r = monte_carlo_accuracy(*net_, *x_, *y_, spec, 2, model(), 1);
    EXPECT_DOUBLE_EQ(r.accuracy.mean, nominal) << s;
    EXPECT_EQ(r.accuracy.stddev, 0.0);
    EXPECT_LT(r.rvd.mean, 1e-10);
  }
}

TEST_F(MonteCarlo, DeterministicAndThreadIndependent) {
  TrialSpec spec;
  spec.params.corr_length = 100.0;
  spec.params.seed = 40;
  spec.strategy = DesignStrategy::parse("R3-ridge");
  const auto a = monte_carlo_accuracy(*net_, *x_, *y_, spec, 3, model(), 1);
  const auto b = monte_carlo_accuracy(*net_, *x_, *y_, spec, 3, model(), 3);
  ASSERT_EQ(a.trials.size(), 3u);
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(a.trials[t].seed, 40u + t);
    EXPECT_EQ(a.trials[t].accuracy, b.trials[t].accuracy);
    EXPECT_EQ(a.trials[t].rvd.mean_rvd, b.trials[t].rvd.mean_rvd);
  }
  EXPECT_GT(a.rvd.mean, 0.0);
  EXPECT_THROW(monte_carlo_accuracy(*net_, *x_, *y_, spec, 0, model()), std::invalid_argument);
}

TEST(Strategy, ParseAndLabelRoundTrip) {
  for (const char* s : {"no-opt", "R1-strip", "R3-ridge", "R12-strip", "worst-case-600"}) {
    EXPECT_EQ(DesignStrategy::parse(s).label(), s);
  }
  EXPECT_EQ(DesignStrategy::parse("none").kind, DesignStrategy::Kind::kNominal);
  EXPECT_THROW(DesignStrategy::parse("R3"), std::invalid_argument);
  EXPECT_THROW(DesignStrategy::parse("R3-rib"), std::invalid_argument);
  EXPECT_THROW(DesignStrategy::parse("worst-case-2000"), std::invalid_argument);
  EXPECT_EQ(variation_mode_from_string(to_string(VariationMode::kWidth)), VariationMode::kWidth);
  EXPECT_THROW(variation_mode_from_string("T"), std::invalid_argument);
}
