#include "fpv/spnn.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <zlib.h>

#include "fft_util.hpp"
#include "parallel.hpp"

namespace fpv {

namespace {

using cd = std::complex<double>;

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> buf(1 << 16);
  for (;;) {
    const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(f);
      throw std::runtime_error("failed to read " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::filesystem::path resolve(const std::filesystem::path& dir, const std::string& stem) {
  for (const std::string& name : {stem, stem + ".gz"}) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) return p;
  }
  throw std::runtime_error("missing MNIST file " + (dir / stem).string() + "[.gz]");
}

double softplus(double a) { return a > 30.0 ? a : std::log1p(std::exp(a)); }
double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd out(a.rows(), a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double m = a.col(c).maxCoeff();
    const double lse = m + std::log((a.col(c).array() - m).exp().sum());
    out.col(c) = a.col(c).array() - lse;
  }
  return out;
}

}  // namespace

std::span<const std::uint8_t> Dataset::image(std::size_t i) const {
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  return {pixels.data() + i * n, n};
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);
  if (img.size() < 16 || be32(img, 0) != 0x00000803) {
    throw std::runtime_error(images.string() + " is not an IDX image file");
  }
  if (lab.size() < 8 || be32(lab, 0) != 0x00000801) {
    throw std::runtime_error(labels.string() + " is not an IDX label file");
  }
  Dataset d;
  const std::size_t n = be32(img, 4);
  d.rows = static_cast<int>(be32(img, 8));
  d.cols = static_cast<int>(be32(img, 12));
  const std::size_t px = static_cast<std::size_t>(d.rows) * d.cols;
  if (be32(lab, 4) != n || img.size() != 16 + n * px || lab.size() != 8 + n) {
    throw std::runtime_error("IDX image and label files disagree in size");
  }
  d.pixels.assign(img.begin() + 16, img.end());
  d.labels.assign(lab.begin() + 8, lab.end());
  for (auto l : d.labels) {
    if (l > 9) throw std::runtime_error("IDX label outside 0..9");
  }
  return d;
}

Dataset load_mnist(const std::filesystem::path& dir, bool train) {
  const std::string prefix = train ? "train" : "t10k";
  return load_idx(resolve(dir, prefix + "-images-idx3-ubyte"),
                  resolve(dir, prefix + "-labels-idx1-ubyte"));
}

std::string_view to_string(FeatureEncoding e) {
  return e == FeatureEncoding::kComplex ? "complex" : "modulus";
}

FeatureEncoding feature_encoding_from_string(std::string_view s) {
  if (s == "complex") return FeatureEncoding::kComplex;
  if (s == "modulus") return FeatureEncoding::kModulus;
  throw std::invalid_argument("unknown feature encoding '" + std::string(s) + "'");
}

FeatureVector extract_features(std::span<const std::uint8_t> image, int rows, int cols, int dim,
                               FeatureEncoding encoding) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
  if (k * k != dim || k < 1 || k > std::min(rows, cols)) {
    throw std::invalid_argument("feature dimension must be a square that fits the image");
  }
  if (image.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("image size does not match its dimensions");
  }
  const std::size_t n = image.size();
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  detail::FftwPlan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan.plan = fftw_plan_dft_2d(rows, cols, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = image[i] / 255.0;
    buf[i][1] = 0.0;
  }
  fftw_execute(plan.plan);

  // After fftshift the zero frequency sits at (rows/2, cols/2).
  FeatureVector fv;
  fv.values.resize(dim);
  const int r0 = rows / 2 - k / 2;
  const int c0 = cols / 2 - k / 2;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const int r = (r0 + i + rows - rows / 2) % rows;
      const int c = (c0 + j + cols - cols / 2) % cols;
      const cd v{buf[r * cols + c][0], buf[r * cols + c][1]};
      fv.values[i * k + j] = encoding == FeatureEncoding::kComplex ? v : cd{std::abs(v), 0.0};
    }
  }
  fftw_free(buf);
  const double norm = fv.values.norm();
  if (norm > 0.0) {
    fv.values /= norm;
  } else {
    fv.values.setZero();
    fv.zero = true;
  }
  return fv;
}

Eigen::MatrixXcd feature_matrix(const Dataset& data, int dim, FeatureEncoding encoding) {
  Eigen::MatrixXcd x(dim, static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) =
        extract_features(data.image(i), data.rows, data.cols, dim, encoding).values;
  }
  return x;
}

SpnnModel SpnnModel::create(int feature_dim, std::uint64_t seed, FeatureEncoding encoding) {
  if (feature_dim < 1) throw std::invalid_argument("feature dimension must be positive");
  SpnnModel m;
  m.feature_dim = feature_dim;
  m.encoding = encoding;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int d = feature_dim;
  for (auto [rows, cols] : {std::pair{d, d}, std::pair{d, d}, std::pair{10, d}}) {
    Eigen::MatrixXcd w(rows, cols);
    const double s = 1.0 / std::sqrt(2.0 * cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = {s * nd(rng), s * nd(rng)};
    m.weights.push_back(std::move(w));
  }
  return m;
}

void SpnnModel::validate() const {
  const int d = feature_dim;
  if (weights.size() != 3 || weights[0].rows() != d || weights[0].cols() != d ||
      weights[1].rows() != d || weights[1].cols() != d || weights[2].rows() != 10 ||
      weights[2].cols() != d) {
    throw std::invalid_argument("network must be FC(d,d)-FC(d,d)-FC(d,10)");
  }
  for (const auto& w : weights) {
    if (!w.allFinite()) throw std::invalid_argument("network weights must be finite");
  }
}

nlohmann::json to_json(const SpnnModel& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const auto& w = m.weights[l];
    std::vector<double> re, im;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        re.push_back(w(r, c).real());
        im.push_back(w(r, c).imag());
      }
    }
    layers.push_back({{"n_in", w.cols()},
                      {"n_out", w.rows()},
                      {"activation", l + 1 < m.weights.size() ? "softplus" : "logsoftmax"},
                      {"real", re},
                      {"imag", im}});
  }
  return {{"format", "fpv-spnn"},
          {"feature_dim", m.feature_dim},
          {"encoding", std::string(to_string(m.encoding))},
          {"layers", layers},
          {"training",
           {{"seed", m.seed},
            {"epochs", m.epochs},
            {"train_accuracy", m.train_accuracy},
            {"test_accuracy", m.test_accuracy}}}};
}

SpnnModel spnn_model_from_json(const nlohmann::json& j) {
  SpnnModel m;
  m.feature_dim = j.at("feature_dim").get<int>();
  m.encoding = feature_encoding_from_string(j.value("encoding", std::string("complex")));
  for (const auto& jl : j.at("layers")) {
    const int rows = jl.at("n_out").get<int>();
    const int cols = jl.at("n_in").get<int>();
    const auto re = jl.at("real").get<std::vector<double>>();
    const auto im = jl.at("imag").get<std::vector<double>>();
    if (re.size() != static_cast<std::size_t>(rows) * cols || im.size() != re.size()) {
      throw std::invalid_argument("weight array does not match layer dimensions");
    }
    Eigen::MatrixXcd w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) w(r, c) = {re[r * cols + c], im[r * cols + c]};
    }
    m.weights.push_back(std::move(w));
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    m.seed = t.value("seed", std::uint64_t{0});
    m.epochs = t.value("epochs", 0);
    m.train_accuracy = t.value("train_accuracy", 0.0);
    m.test_accuracy = t.value("test_accuracy", 0.0);
  }
  m.validate();
  return m;
}

void save_model(const SpnnModel& m, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << to_json(m).dump(1) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

SpnnModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return spnn_model_from_json(nlohmann::json::parse(is));
}

Eigen::MatrixXd forward(std::span<const Eigen::MatrixXcd> weights, const Eigen::MatrixXcd& x) {
  if (weights.empty()) throw std::invalid_argument("network has no layers");
  Eigen::MatrixXcd h = x;
  Eigen::MatrixXd a;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].cols() != h.rows()) {
      throw std::invalid_argument("layer input dimension mismatch");
    }
    a = (weights[l] * h).cwiseAbs();
    if (l + 1 < weights.size()) h = a.unaryExpr(&softplus).cast<cd>();
  }
  return log_softmax(a);
}

std::vector<int> predict(std::span<const Eigen::MatrixXcd> weights, const Eigen::MatrixXcd& x) {
  const Eigen::MatrixXd out = forward(weights, x);
  std::vector<int> pred(static_cast<std::size_t>(out.cols()));
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    Eigen::Index best = 0;
    out.col(c).maxCoeff(&best);
    pred[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return pred;
}

double accuracy(std::span<const Eigen::MatrixXcd> weights, const Eigen::MatrixXcd& x,
                std::span<const std::uint8_t> labels) {
  if (static_cast<std::size_t>(x.cols()) != labels.size()) {
    throw std::invalid_argument("feature and label counts differ");
  }
  if (labels.empty()) return 0.0;
  const auto pred = predict(weights, x);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

namespace {

struct AdamState {
  Eigen::MatrixXd m_re, m_im, v_re, v_im;
};

}  // namespace

TrainReport train(SpnnModel& model, const Eigen::MatrixXcd& x_train,
                  std::span<const std::uint8_t> y_train, const Eigen::MatrixXcd& x_test,
                  std::span<const std::uint8_t> y_test, const TrainParams& params) {
  model.validate();
  if (static_cast<std::size_t>(x_train.cols()) != y_train.size() || y_train.empty()) {
    throw std::invalid_argument("training features and labels disagree");
  }
  if (x_train.rows() != model.feature_dim) {
    throw std::invalid_argument("training features do not match the model input");
  }
  if (params.epochs < 0 || params.batch_size < 1 || !(params.learning_rate >= 0.0)) {
    throw std::invalid_argument("invalid training hyperparameters");
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const std::size_t layers = model.weights.size();
  std::vector<AdamState> adam(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto r = model.weights[l].rows();
    const auto c = model.weights[l].cols();
    adam[l] = {Eigen::MatrixXd::Zero(r, c), Eigen::MatrixXd::Zero(r, c),
               Eigen::MatrixXd::Zero(r, c), Eigen::MatrixXd::Zero(r, c)};
  }

  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> order(y_train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainReport report;
  long step = 0;
  double lr = params.learning_rate;

  std::vector<Eigen::MatrixXcd> z(layers);
  std::vector<Eigen::MatrixXcd> h(layers + 1);
  std::vector<Eigen::MatrixXd> a(layers);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t end = std::min(order.size(), start + params.batch_size);
      const auto bs = static_cast<Eigen::Index>(end - start);
      h[0].resize(x_train.rows(), bs);
      for (Eigen::Index i = 0; i < bs; ++i) {
        h[0].col(i) = x_train.col(static_cast<Eigen::Index>(order[start + i]));
      }
      for (std::size_t l = 0; l < layers; ++l) {
        z[l] = model.weights[l] * h[l];
        a[l] = z[l].cwiseAbs();
        if (l + 1 < layers) h[l + 1] = a[l].unaryExpr(&softplus).cast<cd>();
      }
      const Eigen::MatrixXd logp = log_softmax(a[layers - 1]);
      Eigen::MatrixXd g_a = logp.array().exp();
      for (Eigen::Index i = 0; i < bs; ++i) {
        const int y = y_train[order[start + i]];
        loss_sum -= logp(y, i);
        g_a(y, i) -= 1.0;
      }
      g_a /= static_cast<double>(bs);

      ++step;
      for (std::size_t li = layers; li-- > 0;) {
        // d|z|/dz direction; the subgradient at z = 0 is taken as 0.
        Eigen::MatrixXcd g_z(z[li].rows(), z[li].cols());
        for (Eigen::Index i = 0; i < g_z.size(); ++i) {
          const double m = a[li].data()[i];
          g_z.data()[i] = m > 0.0 ? g_a.data()[i] * z[li].data()[i] / m : cd{0.0, 0.0};
        }
        const Eigen::MatrixXcd g_w = g_z * h[li].adjoint();
        if (li > 0) {
          const Eigen::MatrixXd g_h = (model.weights[li].adjoint() * g_z).real();
          g_a = g_h.cwiseProduct(a[li - 1].unaryExpr(&sigmoid));
        }
        auto& s = adam[li];
        const Eigen::MatrixXd gr = g_w.real();
        const Eigen::MatrixXd gi = g_w.imag();
        s.m_re = kBeta1 * s.m_re + (1 - kBeta1) * gr;
        s.m_im = kBeta1 * s.m_im + (1 - kBeta1) * gi;
        s.v_re = kBeta2 * s.v_re + (1 - kBeta2) * gr.cwiseAbs2();
        s.v_im = kBeta2 * s.v_im + (1 - kBeta2) * gi.cwiseAbs2();
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        const Eigen::MatrixXd d_re =
            (s.m_re / c1).array() / ((s.v_re / c2).array().sqrt() + kEps);
        const Eigen::MatrixXd d_im =
            (s.m_im / c1).array() / ((s.v_im / c2).array().sqrt() + kEps);
        model.weights[li].real() -= lr * d_re;
        model.weights[li].imag() -= lr * d_im;
      }
    }
    const double loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(loss)) throw std::domain_error("training diverged (non-finite loss)");
    report.epoch_loss.push_back(loss);
    lr *= params.lr_decay;
  }
  report.train_accuracy = accuracy(model.weights, x_train, y_train);
  report.test_accuracy = x_test.cols() > 0 ? accuracy(model.weights, x_test, y_test) : 0.0;
  model.epochs += params.epochs;
  model.seed = params.seed;
  model.train_accuracy = report.train_accuracy;
  model.test_accuracy = report.test_accuracy;
  return report;
}

std::vector<Eigen::MatrixXcd> PhotonicNetwork::nominal_weights() const {
  std::vector<Eigen::MatrixXcd> out;
  for (const auto& l : layers) out.push_back(l.nominal());
  return out;
}

std::size_t PhotonicNetwork::phase_shifter_count() const {
  return fpv::phase_shifter_count(layers);
}

PhotonicNetwork build_network(std::span<const Eigen::MatrixXcd> weights, double gap) {
  if (weights.empty()) throw std::invalid_argument("network has no layers");
  PhotonicNetwork net;
  double y = 0.0;
  double x_max = 0.0;
  for (const auto& w : weights) {
    LayerDecomposition dec = decompose_layer(w);
    LayerFloorplan fp;
    double x = 0.0;
    fp.vh = place_oiu(dec.n_in, x, y);
    x = fp.vh.extent.x1;
    fp.sigma = place_sigma_array(static_cast<int>(dec.sigma.size()), x, y);
    x = fp.sigma.extent.x1;
    fp.u = place_oiu(dec.n_out, x, y);
    x_max = std::max(x_max, fp.u.extent.x1);
    const double height =
        std::max({fp.vh.extent.y1, fp.sigma.extent.y1, fp.u.extent.y1}) - y;
    y += height + gap;
    net.layers.push_back(std::move(dec));
    net.floorplan.push_back(std::move(fp));
  }
  net.extent = {0.0, 0.0, x_max, y - gap};
  return net;
}

NetworkHardware nominal_hardware(const PhotonicNetwork& net, Geometry g) {
  NetworkHardware hw;
  for (const auto& l : net.layers) hw.push_back(LayerHardware::nominal(l, g));
  return hw;
}

NetworkHardware uniform_hardware(const PhotonicNetwork& net, const MziDesign& design) {
  NetworkHardware hw;
  for (const auto& l : net.layers) {
    hw.push_back({std::vector<MziDesign>(l.u.mzis.size(), design),
                  std::vector<MziDesign>(l.vh.mzis.size(), design),
                  std::vector<MziDesign>(l.sigma.size(), design)});
  }
  return hw;
}

NetworkVariations sample_network(const PhotonicNetwork& net, const VariationMap& map,
                                 const NetworkHardware& hw) {
  if (hw.size() != net.layers.size()) throw std::invalid_argument("hardware/layer mismatch");
  NetworkVariations out;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& fp = net.floorplan[l];
    out.push_back({sample_mzi_vars(fp.u, map, hw[l].u), sample_mzi_vars(fp.vh, map, hw[l].vh),
                   sample_mzi_vars(fp.sigma, map, hw[l].sigma)});
  }
  return out;
}

NetworkHardware optimize_network(const PhotonicNetwork& net, const VariationMap& map,
                                 RegionPolicy policy, Geometry g, const DeviceModel& model,
                                 RegionObjective scoring) {
  NetworkHardware hw;
  for (const auto& fp : net.floorplan) {
    hw.push_back({region_optimize(fp.u, map, policy, g, model, scoring).designs,
                  region_optimize(fp.vh, map, policy, g, model, scoring).designs,
                  region_optimize(fp.sigma, map, policy, g, model, scoring).designs});
  }
  return hw;
}

std::vector<Eigen::MatrixXcd> deviated_weights(const PhotonicNetwork& net,
                                               const NetworkHardware& hw,
                                               const NetworkVariations& vars,
                                               const DeviceModel& model,
                                               PerturbOptions options) {
  if (hw.size() != net.layers.size() || vars.size() != net.layers.size()) {
    throw std::invalid_argument("hardware/variation/layer mismatch");
  }
  std::vector<Eigen::MatrixXcd> out;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    out.push_back(deviated_weight(net.layers[l], hw[l], vars[l], model, options));
  }
  return out;
}

VariationMap network_die_map(const PhotonicNetwork& net, const VariationParams& params) {
  const double m = params.mesh_size;
  return generate_die_map(params, net.extent.x0 - m, net.extent.y0 - m,
                          net.extent.width() + 2.0 * m, net.extent.height() + 2.0 * m);
}

std::string_view to_string(VariationMode m) {
  return m == VariationMode::kWidth ? "W" : "W+T";
}

VariationMode variation_mode_from_string(std::string_view s) {
  if (s == "W" || s == "w" || s == "width") return VariationMode::kWidth;
  if (s == "W+T" || s == "w+t" || s == "width+thickness") return VariationMode::kWidthThickness;
  throw std::invalid_argument("unknown variation mode '" + std::string(s) + "'");
}

std::string DesignStrategy::label() const {
  switch (kind) {
    case Kind::kNominal:
      return "no-opt";
    case Kind::kRegion:
      return policy.name() + "-" + std::string(to_string(geometry));
    case Kind::kWorstCase:
      return "worst-case-" + std::to_string(static_cast<int>(worst_case_width));
  }
  return "unknown";
}

DesignStrategy DesignStrategy::parse(std::string_view s) {
  if (s == "no-opt" || s == "none") return nominal();
  constexpr std::string_view kWorst = "worst-case-";
  if (s.starts_with(kWorst)) {
    const std::string w(s.substr(kWorst.size()));
    if (w.empty() || w.find_first_not_of("0123456789.") != std::string::npos) {
      throw std::invalid_argument("bad worst-case width in '" + std::string(s) + "'");
    }
    worst_case_design(std::stod(w));  // range check
    return worst_case(std::stod(w));
  }
  const auto dash = s.find('-');
  if (dash == std::string_view::npos) {
    throw std::invalid_argument("strategy '" + std::string(s) + "' needs a geometry suffix");
  }
  return region(RegionPolicy::parse(s.substr(0, dash)), geometry_from_string(s.substr(dash + 1)));
}

TrialResult run_trial(const PhotonicNetwork& net, const Eigen::MatrixXcd& x_test,
                      std::span<const std::uint8_t> y_test, const TrialSpec& spec,
                      const DeviceModel& model) {
  VariationMap map = network_die_map(net, spec.params);
  if (spec.mode == VariationMode::kWidth) map = map.without_thickness();

  NetworkHardware hw;
  switch (spec.strategy.kind) {
    case DesignStrategy::Kind::kNominal:
      hw = nominal_hardware(net);
      break;
    case DesignStrategy::Kind::kRegion:
      hw = optimize_network(net, map, spec.strategy.policy, spec.strategy.geometry, model,
                            spec.strategy.scoring);
      break;
    case DesignStrategy::Kind::kWorstCase:
      hw = uniform_hardware(net, worst_case_design(spec.strategy.worst_case_width)
                                     .design(spec.strategy.geometry));
      break;
  }
  const NetworkVariations vars = sample_network(net, map, hw);
  const auto nominal = net.nominal_weights();
  const auto deviated = deviated_weights(net, hw, vars, model, spec.perturb);

  TrialResult r;
  r.seed = spec.params.seed;
  r.accuracy = accuracy(deviated, x_test, y_test);
  std::vector<double> unitary_rvd;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& dec = net.layers[l];
    unitary_rvd.push_back(rvd(reconstruct(dec.u), reconstruct(dec.u, hw[l].u, vars[l].u, model,
                                                              spec.perturb)));
    unitary_rvd.push_back(rvd(reconstruct(dec.vh), reconstruct(dec.vh, hw[l].vh, vars[l].vh,
                                                               model, spec.perturb)));
  }
  r.rvd = make_rvd_report(std::move(unitary_rvd), net.phase_shifter_count());
  r.rvd.seed = spec.params.seed;
  r.rvd.corr_length = spec.params.corr_length;
  return r;
}

MonteCarloResult monte_carlo_accuracy(const PhotonicNetwork& net, const Eigen::MatrixXcd& x_test,
                                      std::span<const std::uint8_t> y_test,
                                      const TrialSpec& base, int trials,
                                      const DeviceModel& model, int threads) {
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  MonteCarloResult out;
  out.trials.resize(static_cast<std::size_t>(trials));
  detail::parallel_for(out.trials.size(), threads, [&](std::size_t t) {
    TrialSpec spec = base;
    spec.params.seed = base.params.seed + t;
    out.trials[t] = run_trial(net, x_test, y_test, spec, model);
  });
  std::vector<double> acc, rv;
  for (const auto& t : out.trials) {
    acc.push_back(t.accuracy);
    rv.push_back(t.rvd.mean_rvd);
  }
  out.accuracy = mean_std(acc);
  out.rvd = mean_std(rv);
  return out;
}

}  // namespace fpv
