// fpvsim: batch driver for maps, training, mesh programs, evaluation,
// optimization and the figure/table sweeps.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "fpv/experiments.hpp"

namespace fs = std::filesystem;
using namespace fpv;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDomain = 4;

// Flags shared by every subcommand. Unset flags leave the config untouched so
// the precedence is flag > --config file > built-in defaults.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> network;
  std::optional<std::string> mnist;
  std::optional<std::string> weights;
  std::optional<int> threads;
  std::optional<int> trials;
  std::optional<std::string> phase;
  std::optional<bool> couplers;
  std::optional<std::string> scoring;
  bool verbose = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON config file");
    app->add_option("--seed", seed, "RNG seed (maps, training, unitaries)");
    app->add_option("--output-dir", output_dir, "output directory (default $FPV_OUTPUT_DIR)");
    app->add_option("--network", network, "net1 or net2");
    app->add_option("--mnist", mnist, "directory with the MNIST IDX files");
    app->add_option("--weights", weights, "weight archive (JSON)");
    app->add_option("--threads", threads, "worker threads, 0 = all cores");
    app->add_option("--trials", trials, "Monte Carlo trials per cell");
    app->add_option("--phase-reference", phase, "differential or absolute");
    app->add_option("--couplers", couplers, "apply coupler deviations (true/false)");
    app->add_option("--scoring", scoring, "region objective: member-mean or region-mean");
    app->add_flag("-v,--verbose", verbose, "debug logging");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config.empty()) c = load_config(config, c);
    if (seed) c.seed = *seed;
    if (output_dir) c.output_dir = *output_dir;
    if (network) c.network = *network;
    if (mnist) c.mnist_dir = *mnist;
    if (weights) c.weights = *weights;
    if (threads) c.threads = *threads;
    if (trials) c.trials = *trials;
    try {
      if (phase) c.perturb.phase = phase_reference_from_string(*phase);
      if (scoring) c.scoring = region_objective_from_string(*scoring);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (couplers) c.perturb.couplers = *couplers;
    if (c.output_dir.empty()) c.output_dir = default_output_dir();
    c.validate();
    return c;
  }
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("'" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError("empty number list");
  return out;
}

void report(const fs::path& p) { std::cout << p.string() << '\n'; }

// Rectangle of the network's die map, computed from layer sizes only.
Rect network_die(const ExperimentConfig& c) {
  const SpnnModel m = SpnnModel::create(c.feature_dim(), c.seed);
  const PhotonicNetwork net = build_network(m.weights);
  const double g = c.variation.mesh_size;
  return {net.extent.x0 - g, net.extent.y0 - g, net.extent.x1 + g, net.extent.y1 + g};
}

VariationMap load_or_generate(const std::string& map_path, const ExperimentConfig& c,
                              double scale, double corr_length, const Rect& area) {
  if (!map_path.empty()) {
    return fs::path(map_path).extension() == ".json" ? variation_map_from_json(read_json(map_path))
                                                     : load_map(map_path);
  }
  VariationParams p = c.variation.scaled(scale);
  p.corr_length = corr_length;
  p.seed = c.seed;
  return generate_die_map(p, area.x0, area.y0, area.width(), area.height());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fabrication-process-variation simulator for coherent photonic networks"};
  app.require_subcommand(1);
  CommonFlags flags;

  // genmap
  auto* genmap = app.add_subcommand("genmap", "generate a die (or wafer) variation map");
  flags.attach(genmap);
  double gm_corr = 1000.0, gm_scale = 1.0, gm_width = 0.0, gm_height = 0.0, gm_wafer = 0.0;
  std::string gm_out;
  genmap->add_option("--corr-length", gm_corr, "correlation length in um");
  genmap->add_option("--sigma-scale", gm_scale, "multiplier on sigma_w and sigma_t");
  genmap->add_option("--width", gm_width, "die width in um (default: network die)");
  genmap->add_option("--height", gm_height, "die height in um (default: network die)");
  genmap->add_option("--wafer", gm_wafer, "generate a whole wafer of this diameter (um)");
  genmap->add_option("-o,--out", gm_out, "output file (.json or binary .fpvmap)");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a network on FFT-MNIST features");
  flags.attach(train_cmd);
  std::optional<int> epochs;
  train_cmd->add_option("--epochs", epochs, "training epochs");

  // decompose
  auto* decompose = app.add_subcommand("decompose", "SVD + Clements programs of every layer");
  flags.attach(decompose);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Monte Carlo accuracy of one design strategy");
  flags.attach(evaluate);
  std::string ev_strategy = "no-opt", ev_mode = "W+T";
  double ev_corr = 1000.0, ev_scale = 1.0;
  bool ev_train = false;
  evaluate->add_option("--strategy", ev_strategy, "no-opt, R<n>-strip, R<n>-ridge, worst-case-<w>");
  evaluate->add_option("--mode", ev_mode, "W or W+T");
  evaluate->add_option("--corr-length", ev_corr, "correlation length in um");
  evaluate->add_option("--sigma-scale", ev_scale, "multiplier on sigma_w and sigma_t");
  evaluate->add_flag("--train", ev_train, "train the network when no weights exist");

  // optimize-region
  auto* opt_region = app.add_subcommand("optimize-region", "region-based width optimization");
  flags.attach(opt_region);
  std::string or_policy, or_geometry, or_map;
  double or_corr = 1000.0, or_scale = 1.0;
  int or_oiu = 0;
  opt_region->add_option("--policy", or_policy, "none, R1, R3, R6, R12");
  opt_region->add_option("--geometry", or_geometry, "strip or ridge");
  opt_region->add_option("--map", or_map, "variation map (default: generated from --seed)");
  opt_region->add_option("--corr-length", or_corr, "correlation length of a generated map");
  opt_region->add_option("--sigma-scale", or_scale, "sigma multiplier of a generated map");
  opt_region->add_option("--oiu", or_oiu, "optimize a standalone N-mode OIU instead of a network");

  // optimize-worstcase
  auto* opt_worst = app.add_subcommand("optimize-worstcase", "equal-arm widening under an area budget");
  flags.attach(opt_worst);
  double ow_budget = 0.08;
  opt_worst->add_option("--budget", ow_budget, "area-overhead budget as a fraction (0.08 = 8%)");

  // sweeps
  auto* fig5 = app.add_subcommand("sweep-fig5", "RVD box statistics over random unitaries");
  flags.attach(fig5);
  std::string f5_scales, f5_lengths;
  std::optional<int> f5_count;
  fig5->add_option("--unitaries", f5_count, "number of Haar unitaries");
  fig5->add_option("--sigma-scales", f5_scales, "comma list, e.g. 1");
  fig5->add_option("--corr-lengths", f5_lengths, "comma list in um");

  auto* fig6 = app.add_subcommand("sweep-fig6", "accuracy under variations for every strategy");
  flags.attach(fig6);
  std::string f6_scales, f6_lengths, f6_strategies;
  bool f6_train = false;
  fig6->add_option("--sigma-scales", f6_scales, "comma list, e.g. 0.5,1,2");
  fig6->add_option("--corr-lengths", f6_lengths, "comma list in um");
  fig6->add_option("--strategies", f6_strategies, "comma list of strategy labels");
  fig6->add_flag("--train", f6_train, "train the network when no weights exist");

  auto* table3 = app.add_subcommand("sweep-table3", "worst-case design per area budget");
  flags.attach(table3);
  std::string t3_budgets, t3_lengths;
  bool t3_train = false;
  table3->add_option("--budgets", t3_budgets, "comma list of fractions");
  table3->add_option("--corr-lengths", t3_lengths, "comma list in um");
  table3->add_flag("--train", t3_train, "train the network when no weights exist");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    spdlog::set_level(flags.verbose ? spdlog::level::debug : spdlog::level::info);
    ExperimentConfig cfg = flags.resolve();
    const auto model = DeviceModel::default_model();
    const fs::path out = cfg.output_dir;

    if (*genmap) {
      VariationParams p = cfg.variation.scaled(gm_scale);
      p.corr_length = gm_corr;
      p.seed = cfg.seed;
      VariationMap map;
      if (gm_wafer > 0.0) {
        map = generate_wafer_map(p, gm_wafer);
      } else {
        Rect area = network_die(cfg);
        if (gm_width > 0.0) area.x1 = area.x0 + gm_width;
        if (gm_height > 0.0) area.y1 = area.y0 + gm_height;
        map = generate_die_map(p, area.x0, area.y0, area.width(), area.height());
      }
      const fs::path path = gm_out.empty() ? out / "map.fpvmap" : fs::path(gm_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      if (path.extension() == ".json") {
        write_json(to_json(map), path);
      } else {
        save_map(map, path);
      }
      report(path);
    } else if (*train_cmd) {
      if (epochs) cfg.training.epochs = *epochs;
      const fs::path path = cfg.weights_path();
      if (fs::exists(path)) fs::remove(path);
      const NetworkContext ctx = prepare_network(cfg, true);
      std::cout << "test accuracy " << ctx.nominal_accuracy << '\n';
      report(path);
    } else if (*decompose) {
      const NetworkContext ctx = prepare_network(cfg, false);
      nlohmann::json layers = nlohmann::json::array();
      for (const auto& l : ctx.network.layers) {
        layers.push_back({{"n_in", l.n_in},
                          {"n_out", l.n_out},
                          {"u", to_json(l.u)},
                          {"vh", to_json(l.vh)},
                          {"sigma", l.sigma.values},
                          {"sigma_thetas", l.sigma.thetas},
                          {"gain", l.sigma.gain}});
      }
      const fs::path path = out / (cfg.network + "_mesh.json");
      write_json({{"network", cfg.network},
                  {"phase_shifters", ctx.network.phase_shifter_count()},
                  {"layers", layers}},
                 path);
      report(path);
    } else if (*evaluate) {
      TrialSpec spec;
      spec.params = cfg.variation.scaled(ev_scale);
      spec.params.corr_length = ev_corr;
      spec.params.seed = cfg.seed;
      spec.mode = variation_mode_from_string(ev_mode);
      spec.strategy = DesignStrategy::parse(ev_strategy);
      const NetworkContext ctx = prepare_network(cfg, ev_train);
      spec.strategy.scoring = cfg.scoring;
      spec.perturb = cfg.perturb;
      const MonteCarloResult mc = monte_carlo_accuracy(ctx.network, ctx.x_test, ctx.y_test, spec,
                                                       cfg.trials, *model, cfg.threads);
      nlohmann::json trials = nlohmann::json::array();
      for (const auto& t : mc.trials) {
        trials.push_back({{"seed", t.seed},
                          {"accuracy", t.accuracy},
                          {"rvd", t.rvd.mean_rvd},
                          {"layer_rvd", t.rvd.layer_rvd},
                          {"normalized_rvd", t.rvd.normalized_rvd}});
      }
      const nlohmann::json j = {{"strategy", spec.strategy.label()},
                                {"mode", std::string(to_string(spec.mode))},
                                {"sigma_scale", ev_scale},
                                {"corr_length_um", ev_corr},
                                {"nominal_accuracy", ctx.nominal_accuracy},
                                {"accuracy_mean", mc.accuracy.mean},
                                {"accuracy_std", mc.accuracy.stddev},
                                {"rvd_mean", mc.rvd.mean},
                                {"trials", trials}};
      const fs::path path = out / "evaluate.json";
      write_json(j, path);
      std::printf("%s %s: accuracy %.4f +- %.4f (nominal %.4f)\n", spec.strategy.label().c_str(),
                  ev_mode.c_str(), mc.accuracy.mean, mc.accuracy.stddev, ctx.nominal_accuracy);
      report(path);
    } else if (*opt_region) {
      const RegionPolicy policy = or_policy.empty() ? cfg.policy : RegionPolicy::parse(or_policy);
      const Geometry g = or_geometry.empty() ? cfg.geometry : geometry_from_string(or_geometry);
      nlohmann::json j;
      if (or_oiu > 0) {
        const Placement pl = place_oiu(or_oiu, 0.0, 0.0);
        const double m = cfg.variation.mesh_size;
        const Rect area{pl.extent.x0 - m, pl.extent.y0 - m, pl.extent.x1 + m, pl.extent.y1 + m};
        const VariationMap map = load_or_generate(or_map, cfg, or_scale, or_corr, area);
        j = design_table_json(region_optimize(pl, map, policy, g, *model, cfg.scoring));
      } else {
        const SpnnModel shape = SpnnModel::create(cfg.feature_dim(), cfg.seed);
        const PhotonicNetwork net = build_network(shape.weights);
        const VariationMap map = load_or_generate(or_map, cfg, or_scale, or_corr, network_die(cfg));
        j["layers"] = nlohmann::json::array();
        for (const auto& fp : net.floorplan) {
          j["layers"].push_back(
              {{"vh", design_table_json(region_optimize(fp.vh, map, policy, g, *model, cfg.scoring))},
               {"sigma",
                design_table_json(region_optimize(fp.sigma, map, policy, g, *model, cfg.scoring))},
               {"u", design_table_json(region_optimize(fp.u, map, policy, g, *model, cfg.scoring))}});
        }
      }
      const fs::path path = out / ("designs_" + policy.name() + "_" +
                                   std::string(to_string(g)) + ".json");
      write_json(j, path);
      report(path);
    } else if (*opt_worst) {
      const WorstCaseDesign d = worst_case_optimize(ow_budget);
      const nlohmann::json j = {{"budget", ow_budget},
                                {"width_nm", d.width_nm},
                                {"taper_um", d.taper_um},
                                {"arm_length_um", d.arm_length_um},
                                {"overhead", d.overhead}};
      const fs::path path = out / "worst_case.json";
      write_json(j, path);
      std::cout << j.dump() << '\n';
      report(path);
    } else if (*fig5) {
      if (f5_count) cfg.unitaries = *f5_count;
      if (!f5_scales.empty()) cfg.sigma_scales = parse_list(f5_scales);
      if (!f5_lengths.empty()) cfg.corr_lengths = parse_list(f5_lengths);
      cfg.validate();
      const Fig5Result r = run_figure5_rvd(cfg, *model);
      const fs::path path = out / "fig5_rvd.csv";
      write_csv(fig5_table(r), path);
      report(path);
    } else if (*fig6) {
      if (!f6_scales.empty()) cfg.sigma_scales = parse_list(f6_scales);
      if (!f6_lengths.empty()) cfg.corr_lengths = parse_list(f6_lengths);
      if (!f6_strategies.empty()) {
        cfg.strategies.clear();
        std::stringstream ss(f6_strategies);
        std::string s;
        while (std::getline(ss, s, ',')) cfg.strategies.push_back(s);
      }
      cfg.validate();
      const NetworkContext ctx = prepare_network(cfg, f6_train);
      const Fig6Result r = run_figure6_sweep(cfg, ctx, *model);
      const fs::path csv = out / "fig6_accuracy.csv";
      const fs::path summary = out / "fig6_summary.json";
      write_csv(fig6_table(r), csv);
      write_json(fig6_summary(r), summary);
      report(csv);
      report(summary);
    } else if (*table3) {
      if (!t3_budgets.empty()) cfg.budgets = parse_list(t3_budgets);
      if (!t3_lengths.empty()) cfg.corr_lengths = parse_list(t3_lengths);
      cfg.validate();
      const NetworkContext ctx = prepare_network(cfg, t3_train);
      const auto rows = run_table3_sweep(cfg, ctx, *model);
      const fs::path path = out / "table3_worst_case.csv";
      write_csv(table3_table(rows), path);
      report(path);
    }
    return 0;
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::domain_error& e) {
    spdlog::error("numerical error: {}", e.what());
    return kExitDomain;
  } catch (const std::out_of_range& e) {
    spdlog::error("numerical error: {}", e.what());
    return kExitDomain;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("I/O error: {}", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    spdlog::error("I/O error: {}", e.what());
    return kExitIo;
  }
}
