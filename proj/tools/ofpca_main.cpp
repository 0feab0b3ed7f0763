// Command-line frontend: simulate, fit, eval, export-fpc.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "ofpca/fit.hpp"
#include "ofpca/model_io.hpp"

namespace {

using namespace ofpca;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_truth_sidecar(const std::string& path, const SimTruth& truth,
                         long n, std::uint64_t seed) {
  nlohmann::json doc;
  doc["setting"] = truth.name();
  doc["seed"] = seed;
  doc["n"] = n;
  doc["dims"] = truth.dims();
  doc["components"] = truth.components();
  doc["eigenvalues"] = std::vector<double>(
      truth.eigenvalues().data(),
      truth.eigenvalues().data() + truth.eigenvalues().size());
  doc["noise_sd"] = truth.noise_sd();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

int cmd_simulate(const std::string& setting, long n, std::uint64_t seed,
                 const std::string& out_path) {
  const SimTruth truth = SimTruth::by_name(setting);
  if (n < 1) throw ConfigError("subject count must be >= 1");
  const SimData data = generate(truth, n, seed);
  write_subjects_ndjson(out_path, data.subjects);
  write_truth_sidecar(out_path + ".truth.json", truth, n, seed);
  std::cout << "wrote " << data.subjects.size() << " subjects to " << out_path
            << "\n";
  return 0;
}

SimTruth truth_from_arg(const std::string& arg) {
  if (arg == "1d" || arg == "2d" || arg.rfind("builtin:", 0) == 0)
    return SimTruth::by_name(arg);
  // Otherwise a sidecar metadata file naming the setting.
  std::ifstream in(arg);
  if (!in) throw DataError("cannot open truth file " + arg);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("truth file " + arg + ": " + e.what());
  }
  if (!doc.contains("setting"))
    throw DataError("truth file " + arg + " lacks a \"setting\" entry");
  return SimTruth::by_name(doc.at("setting").get<std::string>());
}

int cmd_fit(const std::string& data_path, const std::string& format,
            const std::optional<std::string>& config_path,
            const std::vector<std::pair<std::string, std::string>>& overrides,
            const std::string& model_out, const std::string& metrics_out,
            const std::string& tuning_out) {
  FitConfig config;
  if (config_path) config = FitConfig::from_file(*config_path);
  for (const auto& [key, value] : overrides) config.set(key, value);
  config.validate();

  DataSource source;
  source.path = data_path;
  if (format == "ndjson") source.format = DataFormat::ndjson;
  else if (format == "csv") source.format = DataFormat::csv;
  else throw ConfigError("unknown data format \"" + format + "\"");
  source.dims = config.dims;

  std::vector<Subject> subjects = read_subjects(source);
  center_subjects(subjects, config.center, config.effective_domain(),
                  config.center_bins);

  const SplineSpace space = space_from_config(config);
  const FitResult result = run_fit(subjects, space, config);

  save_model(model_out, model_file_from_fit(result, config, space));
  if (!metrics_out.empty())
    write_metrics_csv(metrics_out, diagnostics(result.history));
  if (!tuning_out.empty()) write_tuning_csv(tuning_out, result.tuning_log);

  std::cout << "fit " << subjects.size() << " subjects, "
            << result.stats.total_steps << " steps, tau=" << fmt(result.tau_final)
            << ", max residual=" << fmt(result.stats.max_residual) << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& truth_arg,
             int grid, const std::string& report_out) {
  const ModelFile model = load_model(model_path);
  const SimTruth truth = truth_from_arg(truth_arg);

  FpcEstimate estimate{model.make_space(), model.coef, model.eigenvalues,
                       model.noise_var};
  if (estimate.space.dims() != truth.dims())
    throw DataError("model and truth domains have different dimensions");
  const int resolution = grid > 0 ? grid : (truth.dims() == 1 ? 201 : 101);
  const Vector rmse = fpc_rmse(estimate, truth, resolution);

  for (int r = 0; r < rmse.size(); ++r)
    std::cout << "fpc_" << (r + 1) << " rmse " << fmt(rmse[r]) << "\n";

  if (!report_out.empty()) {
    nlohmann::json doc;
    doc["model"] = model_path;
    doc["truth"] = truth.name();
    doc["grid"] = resolution;
    doc["rmse"] = std::vector<double>(rmse.data(), rmse.data() + rmse.size());
    doc["eigenvalues"] = std::vector<double>(
        model.eigenvalues.data(),
        model.eigenvalues.data() + model.eigenvalues.size());
    doc["noise_var"] = model.noise_var;
    std::ofstream out(report_out);
    if (!out) throw DataError("cannot write " + report_out);
    out << doc.dump(2) << '\n';
  }
  return 0;
}

int cmd_export_fpc(const std::string& model_path, int grid,
                   const std::string& out_path) {
  const ModelFile model = load_model(model_path);
  FpcEstimate estimate{model.make_space(), model.coef, model.eigenvalues,
                       model.noise_var};
  const int d = estimate.space.dims();
  const int resolution = grid > 0 ? grid : (d == 1 ? 201 : 101);
  const Matrix pts = grid_points(estimate.space.domain(), resolution);
  const Matrix values = estimate.eval_components(pts);

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write " + out_path);
  for (int c = 0; c < d; ++c) out << (c ? "," : "") << "loc_" << (c + 1);
  for (int r = 0; r < estimate.rank(); ++r) out << ",fpc_" << (r + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (int c = 0; c < d; ++c) out << (c ? "," : "") << fmt(pts(i, c));
    for (int r = 0; r < estimate.rank(); ++r) out << ',' << fmt(values(i, r));
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + out_path);
  std::cout << "wrote " << pts.rows() << " rows to " << out_path << "\n";
  return 0;
}

// Config keys exposed as --kebab-case flags.
const std::vector<std::string> kConfigKeys = {
    "rank",       "dims",      "domain",     "degree",   "inner_knots",
    "batch_size", "epochs",    "optimizer",  "averaging", "step_a",
    "step_gamma", "beta1",     "beta2",      "adam_eps", "delta",
    "q",          "omega",     "beam_width", "branching", "rho",
    "tau_init",   "tau_max",   "n_init",     "ridge",    "seed",
    "k_a",        "shuffle",   "center",     "center_bins"};

std::string kebab(const std::string& key) {
  std::string out = key;
  for (char& c : out)
    if (c == '_') c = '-';
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming functional principal component estimation"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string sim_setting = "1d";
  long sim_n = 0;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  simulate->add_option("--setting", sim_setting, "1d or 2d");
  simulate->add_option("--n", sim_n, "number of subjects")->required();
  simulate->add_option("--seed", sim_seed, "generator seed");
  simulate->add_option("--out", sim_out, "output NDJSON path")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the streaming model");
  std::string fit_data, fit_format = "ndjson";
  std::string fit_model_out, fit_metrics_out, fit_tuning_out;
  std::optional<std::string> fit_config;
  fit->add_option("--data", fit_data, "input data path")->required();
  fit->add_option("--format", fit_format, "ndjson or csv");
  fit->add_option("--config", fit_config, "key=value config file");
  fit->add_option("--model-out", fit_model_out, "model output path")->required();
  fit->add_option("--metrics-out", fit_metrics_out, "metrics CSV path");
  fit->add_option("--tuning-out", fit_tuning_out, "tuning path CSV");
  std::map<std::string, std::string> fit_flag_values;
  for (const std::string& key : kConfigKeys) {
    fit->add_option_function<std::string>(
        "--" + kebab(key),
        [&fit_flag_values, key](const std::string& v) {
          fit_flag_values[key] = v;
        },
        "config key " + key);
  }

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a model against a truth");
  std::string eval_model, eval_truth, eval_report;
  int eval_grid = 0;
  eval->add_option("--model", eval_model, "model file")->required();
  eval->add_option("--truth", eval_truth,
                   "builtin:1d, builtin:2d, or a truth sidecar file")
      ->required();
  eval->add_option("--grid", eval_grid, "grid resolution per axis");
  eval->add_option("--report", eval_report, "JSON report path");

  // export-fpc
  auto* export_fpc =
      app.add_subcommand("export-fpc", "Export component values on a grid");
  std::string exp_model, exp_out;
  int exp_grid = 0;
  export_fpc->add_option("--model", exp_model, "model file")->required();
  export_fpc->add_option("--grid", exp_grid, "grid resolution per axis");
  export_fpc->add_option("--out", exp_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed())
      return cmd_simulate(sim_setting, sim_n, sim_seed, sim_out);
    if (fit->parsed()) {
      std::vector<std::pair<std::string, std::string>> overrides(
          fit_flag_values.begin(), fit_flag_values.end());
      return cmd_fit(fit_data, fit_format, fit_config, overrides,
                     fit_model_out, fit_metrics_out, fit_tuning_out);
    }
    if (eval->parsed())
      return cmd_eval(eval_model, eval_truth, eval_grid, eval_report);
    if (export_fpc->parsed())
      return cmd_export_fpc(exp_model, exp_grid, exp_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const StateError& e) {
    std::cerr << "state error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
