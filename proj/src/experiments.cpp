#include "fpv/experiments.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "parallel.hpp"

namespace fpv {

namespace {

const std::set<std::string> kConfigKeys = {
    "network",    "sigma_w",      "sigma_t",  "mesh_size",  "radial_amplitude", "sigma_scales",
    "corr_lengths", "geometry",   "policy",   "scoring",    "strategies",       "modes",
    "budgets",    "phase_reference", "couplers", "trials",  "unitaries",        "unitary_size",
    "seed",       "threads",      "mnist_dir", "weights",   "output_dir",       "training"};

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

VariationParams cell_params(const ExperimentConfig& cfg, double scale, double corr_length,
                            std::uint64_t seed) {
  VariationParams p = cfg.variation.scaled(scale);
  p.corr_length = corr_length;
  p.seed = seed;
  return p;
}

double iqr_spread(const std::vector<double>& samples) {
  const std::size_t batches = std::min<std::size_t>(10, samples.size() / 4);
  if (batches < 2) return 0.0;
  const std::size_t per = samples.size() / batches;
  std::vector<double> iqrs;
  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<double> chunk(samples.begin() + static_cast<std::ptrdiff_t>(b * per),
                              samples.begin() + static_cast<std::ptrdiff_t>((b + 1) * per));
    iqrs.push_back(box_stats(std::move(chunk)).iqr());
  }
  const MeanStd m = mean_std(iqrs);
  return m.mean > 0.0 ? m.stddev / m.mean : 0.0;
}

}  // namespace

int ExperimentConfig::feature_dim() const {
  if (network == "net1") return 16;
  if (network == "net2") return 64;
  throw UsageError("network must be net1 or net2, got '" + network + "'");
}

std::filesystem::path ExperimentConfig::weights_path() const {
  if (!weights.empty()) return weights;
  return (output_dir.empty() ? default_output_dir() : output_dir) / (network + ".json");
}

void ExperimentConfig::validate() const {
  feature_dim();
  if (trials < 1) throw UsageError("trials must be at least 1");
  if (unitaries < 1) throw UsageError("unitaries must be at least 1");
  if (unitary_size < 2) throw UsageError("unitary size must be at least 2");
  if (sigma_scales.empty()) throw UsageError("need at least one sigma scale");
  if (corr_lengths.empty()) throw UsageError("need at least one correlation length");
  for (double s : sigma_scales) {
    if (!(s >= 0.0)) throw UsageError("sigma scales must be non-negative");
  }
  for (double l : corr_lengths) {
    if (!(l > 0.0)) throw UsageError("correlation lengths must be positive");
  }
  for (double b : budgets) {
    if (!(b >= 0.0)) throw UsageError("area budgets must be non-negative");
  }
  if (modes.empty()) throw UsageError("need at least one variation mode");
  if (strategies.empty()) throw UsageError("need at least one design strategy");
  for (const auto& s : strategies) {
    try {
      DesignStrategy::parse(s);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (threads < 0) throw UsageError("threads must be non-negative");
  if (training.epochs < 0 || training.batch_size < 1) throw UsageError("bad training settings");
}

std::filesystem::path default_output_dir() {
  const char* env = std::getenv("FPV_OUTPUT_DIR");
  return env != nullptr && *env != '\0' ? std::filesystem::path(env) : "results";
}

nlohmann::json to_json(const ExperimentConfig& c) {
  std::vector<std::string> modes;
  for (auto m : c.modes) modes.emplace_back(to_string(m));
  return {{"network", c.network},
          {"sigma_w", c.variation.sigma_w},
          {"sigma_t", c.variation.sigma_t},
          {"mesh_size", c.variation.mesh_size},
          {"radial_amplitude", c.variation.radial_amplitude},
          {"sigma_scales", c.sigma_scales},
          {"corr_lengths", c.corr_lengths},
          {"geometry", std::string(to_string(c.geometry))},
          {"policy", c.policy.name()},
          {"scoring", std::string(to_string(c.scoring))},
          {"strategies", c.strategies},
          {"modes", modes},
          {"budgets", c.budgets},
          {"phase_reference", std::string(to_string(c.perturb.phase))},
          {"couplers", c.perturb.couplers},
          {"trials", c.trials},
          {"unitaries", c.unitaries},
          {"unitary_size", c.unitary_size},
          {"seed", c.seed},
          {"threads", c.threads},
          {"mnist_dir", c.mnist_dir.string()},
          {"weights", c.weights.string()},
          {"output_dir", c.output_dir.string()},
          {"training",
           {{"epochs", c.training.epochs},
            {"batch_size", c.training.batch_size},
            {"learning_rate", c.training.learning_rate},
            {"lr_decay", c.training.lr_decay}}}};
}

ExperimentConfig merge_config(ExperimentConfig c, const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kConfigKeys.contains(key)) throw UsageError("unknown config key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("network", c.network);
    get("sigma_w", c.variation.sigma_w);
    get("sigma_t", c.variation.sigma_t);
    get("mesh_size", c.variation.mesh_size);
    get("radial_amplitude", c.variation.radial_amplitude);
    get("sigma_scales", c.sigma_scales);
    get("corr_lengths", c.corr_lengths);
    if (j.contains("geometry")) c.geometry = geometry_from_string(j.at("geometry").get<std::string>());
    if (j.contains("policy")) c.policy = RegionPolicy::parse(j.at("policy").get<std::string>());
    if (j.contains("scoring")) {
      c.scoring = region_objective_from_string(j.at("scoring").get<std::string>());
    }
    get("strategies", c.strategies);
    if (j.contains("modes")) {
      c.modes.clear();
      for (const auto& m : j.at("modes")) {
        c.modes.push_back(variation_mode_from_string(m.get<std::string>()));
      }
    }
    get("budgets", c.budgets);
    if (j.contains("phase_reference")) {
      c.perturb.phase = phase_reference_from_string(j.at("phase_reference").get<std::string>());
    }
    get("couplers", c.perturb.couplers);
    get("trials", c.trials);
    get("unitaries", c.unitaries);
    get("unitary_size", c.unitary_size);
    get("seed", c.seed);
    get("threads", c.threads);
    if (j.contains("mnist_dir")) c.mnist_dir = j.at("mnist_dir").get<std::string>();
    if (j.contains("weights")) c.weights = j.at("weights").get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("training")) {
      const auto& t = j.at("training");
      if (t.contains("epochs")) c.training.epochs = t.at("epochs").get<int>();
      if (t.contains("batch_size")) c.training.batch_size = t.at("batch_size").get<int>();
      if (t.contains("learning_rate")) c.training.learning_rate = t.at("learning_rate").get<double>();
      if (t.contains("lr_decay")) c.training.lr_decay = t.at("lr_decay").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  return merge_config(std::move(base), read_json(path));
}

NetworkContext prepare_network(const ExperimentConfig& cfg, bool train_if_missing) {
  const int dim = cfg.feature_dim();
  const auto path = cfg.weights_path();
  if (!train_if_missing && !std::filesystem::exists(path)) {
    throw UsageError("no weights at " + path.string() +
                     "; run `fpvsim train` first or pass --train");
  }
  NetworkContext ctx;
  const Dataset test = load_mnist(cfg.mnist_dir, false);
  if (std::filesystem::exists(path)) {
    ctx.model = load_model(path);
    if (ctx.model.feature_dim != dim) {
      throw UsageError(path.string() + " holds a d=" + std::to_string(ctx.model.feature_dim) +
                       " model but " + cfg.network + " needs d=" + std::to_string(dim));
    }
    ctx.x_test = feature_matrix(test, dim, ctx.model.encoding);
  } else {
    spdlog::info("training {} (d={}) for {} epochs", cfg.network, dim, cfg.training.epochs);
    const Dataset train_set = load_mnist(cfg.mnist_dir, true);
    ctx.model = SpnnModel::create(dim, cfg.seed);
    ctx.x_test = feature_matrix(test, dim, ctx.model.encoding);
    const auto x_train = feature_matrix(train_set, dim, ctx.model.encoding);
    TrainParams tp = cfg.training;
    tp.seed = cfg.seed;
    train(ctx.model, x_train, train_set.labels, ctx.x_test, test.labels, tp);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    save_model(ctx.model, path);
  }
  ctx.y_test = test.labels;
  ctx.network = build_network(ctx.model.weights);
  ctx.nominal_accuracy = accuracy(ctx.model.weights, ctx.x_test, ctx.y_test);
  return ctx;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::out_of_range("no CSV column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return std::stod(rows.at(row).at(column(name)));
}

const std::string& CsvTable::text(std::size_t row, const std::string& name) const {
  return rows.at(row).at(column(name));
}

void write_csv(const CsvTable& t, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i];
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw std::invalid_argument("CSV row width mismatch");
    line(r);
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path.string() + " is empty");
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split(line));
    if (t.rows.back().size() != t.header.size()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(t.rows.size()) +
                               " has the wrong number of fields");
    }
  }
  return t;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

Fig5Result run_figure5_rvd(const ExperimentConfig& cfg, const DeviceModel& model) {
  const int n = cfg.unitary_size;
  const std::vector<RegionPolicy> policies{RegionPolicy::none(), {12}, {6}, {3}, {1}};

  std::vector<Eigen::MatrixXcd> unitaries;
  std::mt19937_64 rng(cfg.seed);
  for (int k = 0; k < cfg.unitaries; ++k) unitaries.push_back(random_unitary(n, rng));
  std::vector<MeshProgram> programs;
  for (const auto& u : unitaries) programs.push_back(clements_decompose(u));

  const Placement placement = place_oiu(n, 0.0, 0.0);
  const Rect& e = placement.extent;
  const std::vector<MziDesign> strip(placement.mzis.size(), MziDesign::nominal(Geometry::kStrip));

  Fig5Result out;
  for (double scale : cfg.sigma_scales) {
    for (double l : cfg.corr_lengths) {
      // rvd[policy][unitary]
      std::vector<std::vector<double>> rvd(policies.size(),
                                           std::vector<double>(unitaries.size()));
      detail::parallel_for(unitaries.size(), cfg.threads, [&](std::size_t k) {
        const VariationParams p = cell_params(cfg, scale, l, cfg.seed + k);
        const double m = p.mesh_size;
        const VariationMap map =
            generate_die_map(p, e.x0 - m, e.y0 - m, e.width() + 2 * m, e.height() + 2 * m);
        const auto nominal_vars = sample_mzi_vars(placement, map, strip);
        const Eigen::MatrixXcd ideal = reconstruct(programs[k]);
        for (std::size_t pi = 0; pi < policies.size(); ++pi) {
          std::vector<MziDesign> designs = strip;
          if (policies[pi].optimizes()) {
            const std::vector<MziDesign> nominal(placement.mzis.size(),
                                                 MziDesign::nominal(cfg.geometry));
            const auto vars0 = sample_mzi_vars(placement, map, nominal);
            designs = region_optimize(placement, vars0, policies[pi], cfg.geometry, model,
                                      cfg.scoring)
                          .designs;
          }
          const auto vars =
              policies[pi].optimizes() ? sample_mzi_vars(placement, map, designs) : nominal_vars;
          rvd[pi][k] = fpv::rvd(ideal, reconstruct(programs[k], designs, vars, model, cfg.perturb));
        }
      });
      for (std::size_t pi = 0; pi < policies.size(); ++pi) {
        Fig5Row row;
        row.sigma_scale = scale;
        row.corr_length = l;
        row.policy = policies[pi].name();
        row.stats = box_stats(rvd[pi]);
        row.iqr_cv = iqr_spread(rvd[pi]);
        out.rows.push_back(row);
        out.samples.push_back(std::move(rvd[pi]));
      }
      spdlog::info("fig5: sigma x{} l={} um done", scale, l);
    }
  }
  return out;
}

CsvTable fig5_table(const Fig5Result& r) {
  CsvTable t;
  t.header = {"sigma_scale", "corr_length_um", "policy", "count", "mean", "min", "whisker_low",
              "q1", "median", "q3", "whisker_high", "max", "iqr", "iqr_cv"};
  for (const auto& row : r.rows) {
    const auto& s = row.stats;
    t.rows.push_back({format_number(row.sigma_scale), format_number(row.corr_length), row.policy,
                      std::to_string(s.count), format_number(s.mean), format_number(s.min),
                      format_number(s.whisker_low), format_number(s.q1), format_number(s.median),
                      format_number(s.q3), format_number(s.whisker_high), format_number(s.max),
                      format_number(s.iqr()), format_number(row.iqr_cv)});
  }
  return t;
}

Fig6Result run_figure6_sweep(const ExperimentConfig& cfg, const NetworkContext& ctx,
                             const DeviceModel& model) {
  Fig6Result out;
  out.nominal_accuracy = ctx.nominal_accuracy;
  for (double scale : cfg.sigma_scales) {
    for (double l : cfg.corr_lengths) {
      for (const auto& label : cfg.strategies) {
        for (VariationMode mode : cfg.modes) {
          TrialSpec spec;
          spec.params = cell_params(cfg, scale, l, cfg.seed);
          spec.mode = mode;
          spec.strategy = DesignStrategy::parse(label);
          spec.strategy.scoring = cfg.scoring;
          spec.perturb = cfg.perturb;
          const MonteCarloResult mc = monte_carlo_accuracy(ctx.network, ctx.x_test, ctx.y_test,
                                                           spec, cfg.trials, model, cfg.threads);
          for (std::size_t t = 0; t < mc.trials.size(); ++t) {
            const auto& tr = mc.trials[t];
            out.rows.push_back({scale, l, label, mode, static_cast<int>(t), tr.seed, tr.accuracy,
                                tr.rvd.mean_rvd, tr.rvd.normalized_rvd});
          }
          out.cells.push_back({scale, l, label, mode, mc.accuracy, mc.rvd});
          spdlog::info("fig6: sigma x{} l={} {} {}: accuracy {:.4f} +- {:.4f}", scale, l, label,
                       to_string(mode), mc.accuracy.mean, mc.accuracy.stddev);
        }
      }
    }
  }
  std::vector<double> x, y;
  for (const auto& c : out.cells) {
    x.push_back(c.rvd.mean);
    y.push_back(c.accuracy.mean);
  }
  try {
    out.rvd_fit = linear_fit(x, y);
    out.fit_valid = true;
  } catch (const std::domain_error&) {
    out.fit_valid = false;  // too few cells or no spread
  }
  return out;
}

CsvTable fig6_table(const Fig6Result& r) {
  CsvTable t;
  t.header = {"sigma_scale", "corr_length_um", "strategy", "mode",          "trial",
              "seed",        "accuracy",       "rvd",      "normalized_rvd"};
  for (const auto& row : r.rows) {
    t.rows.push_back({format_number(row.sigma_scale), format_number(row.corr_length),
                      row.strategy, std::string(to_string(row.mode)), std::to_string(row.trial),
                      std::to_string(row.seed), format_number(row.accuracy),
                      format_number(row.rvd), format_number(row.normalized_rvd)});
  }
  return t;
}

nlohmann::json fig6_summary(const Fig6Result& r) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"sigma_scale", c.sigma_scale},
                     {"corr_length_um", c.corr_length},
                     {"strategy", c.strategy},
                     {"mode", std::string(to_string(c.mode))},
                     {"accuracy_mean", c.accuracy.mean},
                     {"accuracy_std", c.accuracy.stddev},
                     {"rvd_mean", c.rvd.mean},
                     {"rvd_std", c.rvd.stddev}});
  }
  nlohmann::json j = {{"nominal_accuracy", r.nominal_accuracy}, {"cells", cells}};
  if (r.fit_valid) {
    j["rvd_accuracy_fit"] = {{"slope", r.rvd_fit.slope},
                             {"intercept", r.rvd_fit.intercept},
                             {"r_squared", r.rvd_fit.r_squared}};
  }
  return j;
}

std::vector<Table3Row> run_table3_sweep(const ExperimentConfig& cfg, const NetworkContext& ctx,
                                        const DeviceModel& model) {
  std::vector<Table3Row> out;
  std::map<double, MeanStd> pre;  // per corr length; identical for every budget
  for (double budget : cfg.budgets) {
    const WorstCaseDesign design = worst_case_optimize(budget);
    for (double l : cfg.corr_lengths) {
      TrialSpec spec;
      spec.params = cell_params(cfg, 1.0, l, cfg.seed);
      spec.mode = VariationMode::kWidth;
      spec.perturb = cfg.perturb;
      if (!pre.contains(l)) {
        spec.strategy = DesignStrategy::nominal();
        pre[l] = monte_carlo_accuracy(ctx.network, ctx.x_test, ctx.y_test, spec, cfg.trials,
                                      model, cfg.threads)
                     .accuracy;
      }
      spec.strategy = DesignStrategy::worst_case(design.width_nm);
      const MeanStd post = monte_carlo_accuracy(ctx.network, ctx.x_test, ctx.y_test, spec,
                                                cfg.trials, model, cfg.threads)
                               .accuracy;
      out.push_back({budget, design, l, pre[l], post});
      spdlog::info("table3: budget {:.0f}% width {} nm l={} um: {:.4f} -> {:.4f}", budget * 100,
                   design.width_nm, l, pre[l].mean, post.mean);
    }
  }
  return out;
}

CsvTable table3_table(std::span<const Table3Row> rows) {
  CsvTable t;
  t.header = {"budget",       "width_nm",     "taper_um",      "arm_length_um", "overhead",
              "corr_length_um", "pre_accuracy", "pre_std",     "post_accuracy", "post_std"};
  for (const auto& r : rows) {
    t.rows.push_back({format_number(r.budget), format_number(r.design.width_nm),
                      format_number(r.design.taper_um), format_number(r.design.arm_length_um),
                      format_number(r.design.overhead), format_number(r.corr_length),
                      format_number(r.pre.mean), format_number(r.pre.stddev),
                      format_number(r.post.mean), format_number(r.post.stddev)});
  }
  return t;
}

}  // namespace fpv
