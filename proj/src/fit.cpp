#include "ofpca/fit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ofpca {

namespace {

double to_double(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": cannot parse number \"" +
                      value + "\"");
  }
}

long to_long(const std::string& value, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": cannot parse integer \"" +
                      value + "\"");
  }
}

bool to_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes" || value == "on")
    return true;
  if (value == "false" || value == "0" || value == "no" || value == "off")
    return false;
  throw ConfigError("config key " + key + ": cannot parse boolean \"" + value +
                    "\"");
}

std::vector<std::string> split(const std::string& value, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

std::vector<double> to_doubles(const std::string& value,
                               const std::string& key) {
  std::vector<double> out;
  for (const std::string& f : split(value, ',')) out.push_back(to_double(f, key));
  return out;
}

std::vector<int> to_ints(const std::string& value, const std::string& key) {
  std::vector<int> out;
  for (const std::string& f : split(value, ','))
    out.push_back(static_cast<int>(to_long(f, key)));
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

int env_workers() {
  const char* raw = std::getenv("OFPCA_WORKERS");
  if (!raw) return 1;
  const int w = std::atoi(raw);
  return w > 0 ? w : 1;
}

}  // namespace

void FitConfig::set(const std::string& key, const std::string& value) {
  if (key == "rank" || key == "r") rank = static_cast<int>(to_long(value, key));
  else if (key == "dims") dims = static_cast<int>(to_long(value, key));
  else if (key == "domain") {
    const auto fields = to_doubles(value, key);
    if (fields.size() % 2 != 0)
      throw ConfigError("config key domain: expected lo,hi pairs");
    domain.clear();
    for (std::size_t i = 0; i < fields.size(); i += 2)
      domain.push_back({fields[i], fields[i + 1]});
  } else if (key == "degree") degree = to_ints(value, key);
  else if (key == "inner_knots") inner_knots = to_ints(value, key);
  else if (key == "batch_size") batch_size = static_cast<int>(to_long(value, key));
  else if (key == "epochs") epochs = static_cast<int>(to_long(value, key));
  else if (key == "optimizer") {
    if (value == "rsgd") optimizer = OptimizerKind::rsgd;
    else if (value == "radam") optimizer = OptimizerKind::radam;
    else throw ConfigError("config key optimizer: expected rsgd or radam");
  } else if (key == "averaging") averaging = to_bool(value, key);
  else if (key == "step_a") step_a = to_double(value, key);
  else if (key == "step_gamma") step_gamma = to_double(value, key);
  else if (key == "beta1") beta1 = to_double(value, key);
  else if (key == "beta2") beta2 = to_double(value, key);
  else if (key == "adam_eps") adam_eps = to_double(value, key);
  else if (key == "delta") delta = to_double(value, key);
  else if (key == "q") q = static_cast<int>(to_long(value, key));
  else if (key == "omega") omega = to_double(value, key);
  else if (key == "beam_width") beam_width = static_cast<int>(to_long(value, key));
  else if (key == "branching") branching = static_cast<int>(to_long(value, key));
  else if (key == "rho") rho = to_double(value, key);
  else if (key == "tau_init") tau_init = to_doubles(value, key);
  else if (key == "tau_max") tau_max = to_double(value, key);
  else if (key == "n_init") n_init = static_cast<int>(to_long(value, key));
  else if (key == "ridge") ridge = to_double(value, key);
  else if (key == "seed") seed = static_cast<std::uint64_t>(to_long(value, key));
  else if (key == "k_a") k_a = to_long(value, key);
  else if (key == "shuffle") shuffle = to_bool(value, key);
  else if (key == "center") {
    if (value == "none") center = CenterMode::none;
    else if (value == "binned" || value == "grid-binned-mean")
      center = CenterMode::binned_mean;
    else throw ConfigError("config key center: expected none or binned");
  } else if (key == "center_bins") center_bins = static_cast<int>(to_long(value, key));
  else throw ConfigError("unknown config key \"" + key + "\"");
}

FitConfig FitConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  FitConfig config;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    config.set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  return config;
}

std::vector<Interval> FitConfig::effective_domain() const {
  if (domain.empty())
    return std::vector<Interval>(dims, Interval{0.0, 1.0});
  if (static_cast<int>(domain.size()) != dims)
    throw ConfigError("domain list does not match dims");
  return domain;
}

std::vector<int> FitConfig::per_dim(const std::vector<int>& values,
                                    const char* what) const {
  if (static_cast<int>(values.size()) == dims) return values;
  if (values.size() == 1) return std::vector<int>(dims, values[0]);
  throw ConfigError(std::string(what) + " list does not match dims");
}

std::vector<double> FitConfig::effective_tau_init() const {
  if (!tau_init.empty()) return tau_init;
  const double top = tau_max > 0.0 ? tau_max : (dims == 1 ? 0.1 : 0.001);
  std::vector<double> taus;
  const int count = beam_width * branching;
  for (int i = 0; i < count; ++i) taus.push_back(top * std::pow(10.0, -i));
  return taus;
}

void FitConfig::validate() const {
  if (rank < 1) throw ConfigError("rank must be >= 1");
  if (dims < 1) throw ConfigError("dims must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(step_a > 0.0)) throw ConfigError("step_a must be positive");
  if (step_gamma < 0.0 || step_gamma > 1.0)
    throw ConfigError("step_gamma must lie in [0, 1]");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (q < 1) throw ConfigError("q must be >= 1");
  if (omega <= 0.0 || omega >= 1.0)
    throw ConfigError("omega must lie in (0, 1)");
  if (beam_width < 1 || branching < 1)
    throw ConfigError("beam_width and branching must be >= 1");
  if (!(rho > 1.0)) throw ConfigError("rho must exceed 1");
  if (!tau_init.empty() &&
      static_cast<int>(tau_init.size()) != beam_width * branching)
    throw ConfigError("tau_init must list beam_width * branching values");
  for (double tau : tau_init)
    if (!(tau > 0.0)) throw ConfigError("tau_init values must be positive");
  if (n_init < 1) throw ConfigError("n_init must be >= 1");
  if (!(ridge >= 0.0)) throw ConfigError("ridge must be non-negative");
  if (center_bins < 1) throw ConfigError("center_bins must be >= 1");
  effective_domain();
  per_dim(degree, "degree");
  per_dim(inner_knots, "inner_knots");
}

SplineSpace space_from_config(const FitConfig& config) {
  return SplineSpace(config.effective_domain(),
                     config.per_dim(config.inner_knots, "inner_knots"),
                     config.per_dim(config.degree, "degree"));
}

namespace {

OptimizerState make_opt_state(const FitConfig& config, const SplineSpace& space,
                              const ModelParams& init, long k_a) {
  OptimizerState opt;
  opt.kind = config.optimizer;
  opt.adam = AdamState::zero(space.size(), config.rank, config.beta1,
                             config.beta2, config.adam_eps);
  if (config.averaging) opt.avg = AvgState::from(init, k_a);
  return opt;
}

// Mean stacked gradient norm over mini-batches of the initialization
// subjects, evaluated at the initial parameters with no penalty. Used to
// scale RSGD steps to the magnitude of the normalized RAdam direction.
double mean_gradient_norm(const std::vector<SubjectDesign>& designs,
                          long n_init, int batch_size,
                          const SplineSpace& space,
                          const StiefelGeometry& geom,
                          const ModelParams& params) {
  double total = 0.0;
  long batches = 0;
  std::vector<int> batch;
  for (long start = 0; start < n_init; start += batch_size) {
    batch.clear();
    for (long i = start; i < std::min<long>(start + batch_size, n_init); ++i)
      batch.push_back(static_cast<int>(i));
    const BatchEval ev =
        eval_design_batch(designs, batch, space, params, 0.0, true);
    const Matrix riem = geom.riemannian_grad(params.coef, ev.grads.d_coef);
    const double sq = riem.squaredNorm() + ev.grads.d_log_eigen.squaredNorm() +
                      ev.grads.d_log_noise * ev.grads.d_log_noise;
    total += std::sqrt(sq);
    ++batches;
  }
  return batches > 0 ? total / batches : 1.0;
}

void track(FitStats& stats, const StepInfo& info) {
  stats.max_residual = std::max(stats.max_residual, info.residual);
  if (!(info.residual < 1e-8)) ++stats.feasibility_violations;
}

}  // namespace

FitResult run_fit(const std::vector<Subject>& subjects,
                  const SplineSpace& space, const FitConfig& config) {
  config.validate();
  if (subjects.empty()) throw DataError("no subjects to fit");
  if (config.rank > space.size())
    throw ConfigError("rank exceeds the basis size");

  const std::vector<SubjectDesign> designs = make_designs(subjects, space);
  const StiefelGeometry geometry(space.gram());

  const long n = static_cast<long>(subjects.size());
  const long n_init = std::min<long>(config.n_init, n);
  const ModelParams init =
      batch_init(std::span(subjects).first(n_init), space, config.rank,
                 config.ridge, config.delta);

  StepSchedule schedule{config.step_a, config.step_gamma, 1.0};
  FitStats stats;
  if (config.optimizer == OptimizerKind::rsgd) {
    const double mean_norm = mean_gradient_norm(
        designs, n_init, config.batch_size, space, geometry, init);
    schedule.rsgd_norm_scale = mean_norm > 1e-12 ? 1.0 / mean_norm : 1.0;
  }
  stats.rsgd_norm_scale = schedule.rsgd_norm_scale;

  const BatchPlan plan{config.batch_size, config.epochs, config.seed,
                       config.shuffle};
  const std::vector<MiniBatch> batches = make_batches(n, plan);
  const long steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long k_a =
      config.k_a >= 1 ? config.k_a : std::max<long>(1, steps_per_epoch / 2);
  const int workers = env_workers();

  // Epoch 1: beam-search tuning over blocks of q mini-batches.
  Beam beam = make_beam(config.effective_tau_init(), config.beam_width,
                        config.branching, config.rho, config.omega, config.q,
                        init, make_opt_state(config, space, init, k_a));

  FitResult result;
  const long full_blocks = steps_per_epoch / config.q;
  long consumed = 0;
  for (long b = 0; b < full_blocks; ++b) {
    const bool last_block = (b == full_blocks - 1) &&
                            (steps_per_epoch % config.q == 0);
    beam_round(beam, designs,
               std::span(batches).subspan(consumed, config.q), space, geometry,
               schedule, b + 1, true, !last_block, workers,
               stats.max_residual, stats.feasibility_violations,
               &result.tuning_log);
    consumed += config.q;
  }
  if (consumed < steps_per_epoch) {
    // Trailing partial block: update only.
    beam_round(beam, designs,
               std::span(batches).subspan(consumed, steps_per_epoch - consumed),
               space, geometry, schedule, full_blocks + 1, false, false,
               workers, stats.max_residual, stats.feasibility_violations,
               nullptr);
    consumed = steps_per_epoch;
  }

  if (full_blocks == 0)
    for (Candidate& cand : beam.candidates) cand.abv.flush_partial();

  Candidate winner = best_candidate(beam);
  result.tau_final = winner.tau;
  result.tau_path = std::move(winner.lineage);
  ChainState chain = std::move(winner.chain);
  std::vector<StepRecord> history = std::move(winner.history);

  // Remaining epochs: single chain, smoothing parameter frozen.
  for (long i = steps_per_epoch; i < static_cast<long>(batches.size()); ++i) {
    const MiniBatch& mb = batches[i];
    const StepInfo info =
        advance_chain(chain, geometry, designs, mb.subjects, space,
                      result.tau_final, schedule, mb.step);
    StepRecord rec;
    rec.step = mb.step;
    rec.grad_norm = info.grad_norm;
    rec.v_score = info.pre_update_loss;
    rec.tau = result.tau_final;
    rec.eigenvalues = chain.params.eigenvalues;
    rec.noise_var = chain.params.noise_var;
    history.push_back(std::move(rec));
    track(stats, info);
  }
  stats.total_steps = static_cast<long>(batches.size());

  result.last_iterate = chain.params;
  result.params = chain.opt.avg ? chain.opt.avg->to_params(chain.params)
                                : chain.params;
  result.history = std::move(history);
  result.stats = stats;
  return result;
}

}  // namespace ofpca
