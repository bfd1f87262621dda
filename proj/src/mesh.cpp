#include "fpv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace fpv {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

double wrap_phase(double a) {
  double r = std::fmod(a, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  return r;
}

// Right-multiplies columns (k, k+1) of m by t.
void apply_right(Eigen::MatrixXcd& m, int k, const Transfer& t) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const cd a = m(r, k);
    const cd b = m(r, k + 1);
    m(r, k) = a * t(0, 0) + b * t(1, 0);
    m(r, k + 1) = a * t(0, 1) + b * t(1, 1);
  }
}

void check_spans(const MeshProgram& p, std::span<const MziDesign> designs,
                 std::span<const ArmVariations> vars) {
  if (vars.size() != p.mzis.size()) {
    throw std::invalid_argument("need one variation entry per MZI");
  }
  if (!designs.empty() && designs.size() != p.mzis.size()) {
    throw std::invalid_argument("need one design per MZI");
  }
}

}  // namespace

void MeshProgram::validate() const {
  if (size < 1) throw std::invalid_argument("mesh size must be positive");
  if (mzis.size() != static_cast<std::size_t>(size) * (size - 1) / 2) {
    throw std::invalid_argument("mesh must hold N(N-1)/2 MZIs");
  }
  if (d.size() != size) throw std::invalid_argument("output phase screen must have N entries");
  for (const auto& m : mzis) {
    if (m.row < 0 || m.row + 1 >= size) throw std::invalid_argument("MZI row out of range");
    if (!std::isfinite(m.theta) || !std::isfinite(m.phi)) {
      throw std::invalid_argument("MZI phases must be finite");
    }
  }
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (std::abs(std::abs(d[i]) - 1.0) > 1e-9) {
      throw std::invalid_argument("output phases must have unit modulus");
    }
  }
}

nlohmann::json to_json(const MeshProgram& p) {
  nlohmann::json mzis = nlohmann::json::array();
  for (std::size_t i = 0; i < p.mzis.size(); ++i) {
    const auto& m = p.mzis[i];
    mzis.push_back({{"order", i}, {"col", m.col}, {"row", m.row}, {"theta", m.theta},
                    {"phi", m.phi}});
  }
  nlohmann::json d = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.d.size(); ++i) d.push_back({p.d[i].real(), p.d[i].imag()});
  return {{"size", p.size}, {"mzis", mzis}, {"d", d}};
}

MeshProgram mesh_program_from_json(const nlohmann::json& j) {
  MeshProgram p;
  p.size = j.at("size").get<int>();
  std::vector<std::pair<std::size_t, MeshMzi>> entries;
  for (const auto& jm : j.at("mzis")) {
    entries.emplace_back(jm.at("order").get<std::size_t>(),
                         MeshMzi{jm.at("col").get<int>(), jm.at("row").get<int>(),
                                 jm.at("theta").get<double>(), jm.at("phi").get<double>()});
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& e : entries) p.mzis.push_back(e.second);
  const auto& jd = j.at("d");
  p.d.resize(static_cast<Eigen::Index>(jd.size()));
  for (std::size_t i = 0; i < jd.size(); ++i) {
    p.d[static_cast<Eigen::Index>(i)] = {jd[i].at(0).get<double>(), jd[i].at(1).get<double>()};
  }
  p.validate();
  return p;
}

Eigen::MatrixXcd random_unitary(int n, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("unitary size must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXcd z(n, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) z(r, c) = cd(normal(rng), normal(rng));
  }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ();
  const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < n; ++k) {
    const double a = std::abs(r(k, k));
    if (a > 0.0) q.col(k) *= r(k, k) / a;
  }
  return q;
}

void apply_transfer(Eigen::MatrixXcd& m, int row, const Transfer& t) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const cd a = m(row, c);
    const cd b = m(row + 1, c);
    m(row, c) = t(0, 0) * a + t(0, 1) * b;
    m(row + 1, c) = t(1, 0) * a + t(1, 1) * b;
  }
}

// Nulls U's lower triangle alternately from the right (T^-1 on columns) and
// from the left (T on rows). The left factors are then moved through the
// residual diagonal, T(th, ph)^-1 diag(d1, d2) = diag(d1', d2') T(th, ph'),
// so the program ends with a single output phase screen.
MeshProgram clements_decompose(const Eigen::MatrixXcd& u, double tolerance) {
  if (u.rows() != u.cols() || u.rows() < 1) {
    throw std::invalid_argument("clements_decompose needs a square matrix");
  }
  const int n = static_cast<int>(u.rows());
  const double err =
      (u.adjoint() * u - Eigen::MatrixXcd::Identity(n, n)).norm();
  if (!(err <= tolerance)) throw std::invalid_argument("matrix is not unitary");

  Eigen::MatrixXcd m = u;
  std::vector<MeshMzi> rights;
  std::vector<MeshMzi> lefts;
  for (int i = 0; i < n - 1; ++i) {
    if (i % 2 == 0) {
      for (int j = 0; j <= i; ++j) {
        const int r = n - 1 - j;
        const int k = i - j;
        const cd a = m(r, k);
        const cd b = m(r, k + 1);
        const double theta = 2.0 * std::atan2(std::abs(b), std::abs(a));
        const double phi = wrap_phase(kPi + std::arg(a) - std::arg(b));
        apply_right(m, k, ideal_transfer(theta, phi).adjoint());
        rights.push_back({0, k, theta, phi});
      }
    } else {
      for (int j = 1; j <= i + 1; ++j) {
        const int r = n + j - i - 2;
        const int k = r - 1;
        const int c = j - 1;
        const cd a = m(k, c);
        const cd b = m(r, c);
        const double theta = 2.0 * std::atan2(std::abs(a), std::abs(b));
        const double phi = wrap_phase(std::arg(b) - std::arg(a));
        apply_transfer(m, k, ideal_transfer(theta, phi));
        lefts.push_back({0, k, theta, phi});
      }
    }
  }

  Eigen::VectorXcd d = m.diagonal();
  std::vector<MeshMzi> order = rights;
  for (auto it = lefts.rbegin(); it != lefts.rend(); ++it) {
    const int k = it->row;
    const cd d1 = d[k];
    const cd d2 = d[k + 1];
    const double phi = wrap_phase(std::arg(d1) - std::arg(d2));
    d[k] = -std::polar(1.0, -it->theta - it->phi) * d2;
    d[k + 1] = -std::polar(1.0, -it->theta) * d2;
    order.push_back({0, k, it->theta, phi});
  }
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] /= std::abs(d[i]);

  std::vector<int> depth(static_cast<std::size_t>(n), 0);
  for (auto& mzi : order) {
    const int col = std::max(depth[mzi.row], depth[mzi.row + 1]);
    mzi.col = col;
    depth[mzi.row] = depth[mzi.row + 1] = col + 1;
  }
  std::stable_sort(order.begin(), order.end(), [](const MeshMzi& a, const MeshMzi& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });

  MeshProgram p;
  p.size = n;
  p.mzis = std::move(order);
  p.d = std::move(d);
  return p;
}

Eigen::MatrixXcd reconstruct(const MeshProgram& program) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(program.size, program.size);
  for (const auto& mzi : program.mzis) {
    apply_transfer(m, mzi.row, ideal_transfer(mzi.theta, mzi.phi));
  }
  return program.d.asDiagonal() * m;
}

Eigen::MatrixXcd reconstruct(const MeshProgram& program, std::span<const MziDesign> designs,
                             std::span<const ArmVariations> vars, const DeviceModel& model,
                             PerturbOptions options) {
  check_spans(program, designs, vars);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(program.size, program.size);
  for (std::size_t i = 0; i < program.mzis.size(); ++i) {
    const auto& mzi = program.mzis[i];
    MziConfig cfg{mzi.theta, mzi.phi, designs.empty() ? MziDesign{} : designs[i]};
    apply_transfer(m, mzi.row, perturbed_transfer(cfg, vars[i], model, options));
  }
  return program.d.asDiagonal() * m;
}

SigmaArray SigmaArray::realize(std::vector<double> values) {
  SigmaArray s;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("singular values must be finite and non-negative");
    }
    s.gain = std::max(s.gain, v);
  }
  for (double v : values) {
    const double a = s.gain > 0.0 ? std::min(v / s.gain, 1.0) : 0.0;
    s.thetas.push_back(2.0 * std::asin(a));
  }
  s.values = std::move(values);
  return s;
}

Eigen::VectorXcd sigma_nominal(const SigmaArray& s) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const cd t00 = ideal_transfer(s.thetas[i], 0.0)(0, 0);
    const cd ref = cd{0.0, 1.0} * std::polar(1.0, 0.5 * s.thetas[i]);
    out[static_cast<Eigen::Index>(i)] = s.gain * t00 * std::conj(ref);
  }
  return out;
}

Eigen::VectorXcd sigma_deviated(const SigmaArray& s, std::span<const MziDesign> designs,
                                std::span<const ArmVariations> vars, const DeviceModel& model,
                                PerturbOptions options) {
  if (vars.size() != s.size() || (!designs.empty() && designs.size() != s.size())) {
    throw std::invalid_argument("need one design and variation entry per attenuator");
  }
  Eigen::VectorXcd out(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    MziConfig cfg{s.thetas[i], 0.0, designs.empty() ? MziDesign{} : designs[i]};
    const cd t00 = perturbed_transfer(cfg, vars[i], model, options)(0, 0);
    const cd ref = cd{0.0, 1.0} * std::polar(1.0, 0.5 * s.thetas[i]);
    out[static_cast<Eigen::Index>(i)] = s.gain * t00 * std::conj(ref);
  }
  return out;
}

namespace {

Eigen::MatrixXcd compose(const Eigen::MatrixXcd& u, const Eigen::VectorXcd& sigma,
                         const Eigen::MatrixXcd& vh) {
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(u.cols(), vh.rows());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) s(i, i) = sigma[i];
  return u * s * vh;
}

}  // namespace

Eigen::MatrixXcd LayerDecomposition::nominal() const {
  return compose(reconstruct(u), sigma_nominal(sigma), reconstruct(vh));
}

LayerDecomposition decompose_layer(const Eigen::MatrixXcd& w) {
  if (w.size() == 0 || !w.allFinite()) {
    throw std::invalid_argument("layer weights must be finite and non-empty");
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  LayerDecomposition dec;
  dec.n_out = static_cast<int>(w.rows());
  dec.n_in = static_cast<int>(w.cols());
  dec.u = clements_decompose(svd.matrixU());
  dec.vh = clements_decompose(svd.matrixV().adjoint());
  const auto& sv = svd.singularValues();
  dec.sigma = SigmaArray::realize(std::vector<double>(sv.data(), sv.data() + sv.size()));
  return dec;
}

LayerHardware LayerHardware::nominal(const LayerDecomposition& dec, Geometry g) {
  const MziDesign d = MziDesign::nominal(g);
  return {std::vector<MziDesign>(dec.u.mzis.size(), d),
          std::vector<MziDesign>(dec.vh.mzis.size(), d),
          std::vector<MziDesign>(dec.sigma.size(), d)};
}

LayerVariations LayerVariations::zero(const LayerDecomposition& dec) {
  return {std::vector<ArmVariations>(dec.u.mzis.size()),
          std::vector<ArmVariations>(dec.vh.mzis.size()),
          std::vector<ArmVariations>(dec.sigma.size())};
}

Eigen::MatrixXcd deviated_weight(const LayerDecomposition& dec, const LayerHardware& hw,
                                 const LayerVariations& vars, const DeviceModel& model,
                                 PerturbOptions options) {
  return compose(reconstruct(dec.u, hw.u, vars.u, model, options),
                 sigma_deviated(dec.sigma, hw.sigma, vars.sigma, model, options),
                 reconstruct(dec.vh, hw.vh, vars.vh, model, options));
}

namespace {

Rect bounding(const std::vector<PlacedMzi>& mzis) {
  Rect r = mzis.front().box;
  for (const auto& m : mzis) {
    r.x0 = std::min(r.x0, m.box.x0);
    r.y0 = std::min(r.y0, m.box.y0);
    r.x1 = std::max(r.x1, m.box.x1);
    r.y1 = std::max(r.y1, m.box.y1);
  }
  return r;
}

}  // namespace

Placement place_oiu(int n, double origin_x, double origin_y) {
  if (n < 2) throw std::invalid_argument("an OIU needs at least two modes");
  Placement p;
  for (int c = 0; c < n; ++c) {
    for (int k = c % 2; k + 1 < n; k += 2) {
      const double x = origin_x + c * layout::kMziLength;
      const double y = origin_y + k * layout::kPortPitch;
      p.mzis.push_back({c, k, {x, y, x + layout::kMziLength, y + layout::kBoxHeight}});
    }
  }
  p.extent = bounding(p.mzis);
  return p;
}

Placement place_sigma_array(int count, double origin_x, double origin_y) {
  if (count < 1) throw std::invalid_argument("attenuator array must not be empty");
  Placement p;
  for (int i = 0; i < count; ++i) {
    const int c = i % 2;
    const int k = 2 * (i / 2);
    const double x = origin_x + c * layout::kMziLength;
    const double y = origin_y + k * layout::kPortPitch;
    p.mzis.push_back({c, k, {x, y, x + layout::kMziLength, y + layout::kBoxHeight}});
  }
  p.extent = bounding(p.mzis);
  return p;
}

std::vector<ArmVariations> sample_mzi_vars(const Placement& placement, const VariationMap& map,
                                           std::span<const MziDesign> designs) {
  if (!designs.empty() && designs.size() != placement.mzis.size()) {
    throw std::invalid_argument("need one design per placed MZI");
  }
  std::vector<ArmVariations> out;
  out.reserve(placement.mzis.size());
  for (std::size_t i = 0; i < placement.mzis.size(); ++i) {
    const MziDesign d = designs.empty() ? MziDesign{} : designs[i];
    out.push_back(sample_mzi(map, d, placement.mzis[i].box.x0, placement.mzis[i].box.y0));
  }
  return out;
}

std::size_t phase_shifter_count(std::span<const LayerDecomposition> layers) {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<std::size_t>(l.u.size) * l.u.size;
    n += static_cast<std::size_t>(l.vh.size) * l.vh.size;
  }
  return n;
}

}  // namespace fpv
