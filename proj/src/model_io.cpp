#include "ofpca/model_io.hpp"

#include <fstream>

#include "json.hpp"

namespace ofpca {

using nlohmann::json;

SplineSpace ModelFile::make_space() const {
  return SplineSpace(domain, inner_knots, degree);
}

ModelFile model_file_from_fit(const FitResult& result, const FitConfig& config,
                              const SplineSpace& space) {
  ModelFile model;
  model.domain = space.domain();
  model.degree.clear();
  model.inner_knots.clear();
  for (int j = 0; j < space.dims(); ++j) {
    const MarginalSpline& m = space.marginal(j);
    model.degree.push_back(m.degree());
    model.inner_knots.push_back(m.size() - m.degree() - 1);
  }
  model.coef = result.params.coef.theta;
  model.eigenvalues = result.params.eigenvalues;
  model.noise_var = result.params.noise_var;
  model.var_floor = result.params.var_floor;
  model.tau_path = result.tau_path;
  model.tau_final = result.tau_final;
  model.seed = config.seed;
  model.epochs = config.epochs;
  model.total_steps = result.stats.total_steps;
  model.optimizer = config.optimizer == OptimizerKind::radam ? "radam" : "rsgd";
  model.averaging = config.averaging;
  model.max_residual = result.stats.max_residual;
  return model;
}

void save_model(const std::string& path, const ModelFile& model) {
  json spec;
  json domain = json::array();
  for (const Interval& iv : model.domain)
    domain.push_back({{"lo", iv.lo}, {"hi", iv.hi}});
  spec["domain"] = std::move(domain);
  spec["degree"] = model.degree;
  spec["inner_knots"] = model.inner_knots;

  json coef = json::array();
  for (Eigen::Index i = 0; i < model.coef.rows(); ++i)
    for (Eigen::Index j = 0; j < model.coef.cols(); ++j)
      coef.push_back(model.coef(i, j));

  json tau_path = json::array();
  for (const auto& [block, tau] : model.tau_path)
    tau_path.push_back({{"block", block}, {"tau", tau}});

  json doc;
  doc["format_version"] = model.format_version;
  doc["space"] = std::move(spec);
  doc["p"] = model.coef.rows();
  doc["rank"] = model.coef.cols();
  doc["coef"] = std::move(coef);
  doc["eigenvalues"] = std::vector<double>(
      model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
  doc["noise_var"] = model.noise_var;
  doc["var_floor"] = model.var_floor;
  doc["tau_path"] = std::move(tau_path);
  doc["tau_final"] = model.tau_final;
  doc["fit"] = {{"seed", model.seed},
                {"epochs", model.epochs},
                {"total_steps", model.total_steps},
                {"optimizer", model.optimizer},
                {"averaging", model.averaging},
                {"max_residual", model.max_residual}};

  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path);
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw DataError("model file " + path + ": " + e.what());
  }

  try {
    ModelFile model;
    model.format_version = doc.at("format_version").get<int>();
    if (model.format_version != 1)
      throw DataError("unsupported model format version");
    for (const json& iv : doc.at("space").at("domain"))
      model.domain.push_back(
          {iv.at("lo").get<double>(), iv.at("hi").get<double>()});
    model.degree = doc.at("space").at("degree").get<std::vector<int>>();
    model.inner_knots =
        doc.at("space").at("inner_knots").get<std::vector<int>>();

    const long p = doc.at("p").get<long>();
    const long rank = doc.at("rank").get<long>();
    const auto coef = doc.at("coef").get<std::vector<double>>();
    if (static_cast<long>(coef.size()) != p * rank)
      throw DataError("coefficient array has the wrong length");
    model.coef.resize(p, rank);
    for (long i = 0; i < p; ++i)
      for (long j = 0; j < rank; ++j) model.coef(i, j) = coef[i * rank + j];

    const auto eigen = doc.at("eigenvalues").get<std::vector<double>>();
    if (static_cast<long>(eigen.size()) != rank)
      throw DataError("eigenvalue array has the wrong length");
    model.eigenvalues =
        Eigen::Map<const Vector>(eigen.data(), static_cast<long>(eigen.size()));
    model.noise_var = doc.at("noise_var").get<double>();
    model.var_floor = doc.at("var_floor").get<double>();
    for (const json& row : doc.at("tau_path"))
      model.tau_path.emplace_back(row.at("block").get<long>(),
                                  row.at("tau").get<double>());
    model.tau_final = doc.at("tau_final").get<double>();
    const json& fit = doc.at("fit");
    model.seed = fit.at("seed").get<std::uint64_t>();
    model.epochs = fit.at("epochs").get<int>();
    model.total_steps = fit.at("total_steps").get<long>();
    model.optimizer = fit.at("optimizer").get<std::string>();
    model.averaging = fit.at("averaging").get<bool>();
    model.max_residual = fit.at("max_residual").get<double>();

    const SplineSpace space = model.make_space();
    if (space.size() != p) throw DataError("basis size mismatch in model file");
    const StiefelGeometry geometry(space.gram());
    const double residual = geometry.feasibility_residual(model.coef);
    if (!(residual < 1e-6))
      throw DataError("model coefficients are infeasible: residual " +
                      std::to_string(residual));
    return model;
  } catch (const json::exception& e) {
    throw DataError("model file " + path + ": " + e.what());
  }
}

}  // namespace ofpca
