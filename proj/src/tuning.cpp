#include "ofpca/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace ofpca {

void AbvState::add(double v_score) {
  block_sum += v_score;
  block_count += 1;
  if (block_count == block_size) {
    const double block_avg = block_sum / block_size;
    abv = (1.0 - omega) * block_avg + omega * abv;
    blocks_seen += 1;
    block_sum = 0.0;
    block_count = 0;
  }
}

void AbvState::flush_partial() {
  if (block_count == 0) return;
  const double block_avg = block_sum / block_count;
  abv = (1.0 - omega) * block_avg + omega * abv;
  blocks_seen += 1;
  block_sum = 0.0;
  block_count = 0;
}

double validation_score(const std::vector<SubjectDesign>& designs,
                        std::span<const int> batch, const SplineSpace& space,
                        const ModelParams& params) {
  return eval_design_batch(designs, batch, space, params, 0.0, false)
      .data_loss;
}

Beam make_beam(const std::vector<double>& taus, int width, int branching,
               double rho, double omega, int block_size,
               const ModelParams& init, const OptimizerState& opt) {
  if (width < 1 || branching < 1)
    throw ConfigError("beam width and branching factor must be >= 1");
  if (static_cast<int>(taus.size()) != width * branching)
    throw ConfigError("initial tau set must have width * branching entries");
  if (!(rho > 1.0)) throw ConfigError("expansion ratio must exceed 1");

  Beam beam;
  beam.width = width;
  beam.branching = branching;
  beam.expand_ratio = rho;
  beam.candidates.reserve(taus.size());
  for (double tau : taus) {
    if (!(tau > 0.0)) throw ConfigError("smoothing parameters must be positive");
    Candidate c;
    c.tau = tau;
    c.chain = ChainState{init, opt};
    c.abv.omega = omega;
    c.abv.block_size = block_size;
    c.lineage.emplace_back(0, tau);
    beam.candidates.push_back(std::move(c));
  }
  return beam;
}

namespace {

// Candidate ordering used for both selection and final choice.
bool better(const Candidate& a, int ia, const Candidate& b, int ib) {
  if (a.abv.abv != b.abv.abv) return a.abv.abv < b.abv.abv;
  if (a.tau != b.tau) return a.tau < b.tau;
  return ia < ib;
}

void run_candidate(Candidate& cand, const std::vector<SubjectDesign>& designs,
                   std::span<const MiniBatch> block, const SplineSpace& space,
                   const StiefelGeometry& geom, const StepSchedule& schedule,
                   double& max_residual, long& violations) {
  for (const MiniBatch& mb : block) {
    const StepInfo info =
        advance_chain(cand.chain, geom, designs, mb.subjects, space, cand.tau,
                      schedule, mb.step);
    cand.abv.add(info.pre_update_loss);
    StepRecord rec;
    rec.step = mb.step;
    rec.grad_norm = info.grad_norm;
    rec.v_score = info.pre_update_loss;
    rec.tau = cand.tau;
    rec.eigenvalues = cand.chain.params.eigenvalues;
    rec.noise_var = cand.chain.params.noise_var;
    cand.history.push_back(std::move(rec));
    max_residual = std::max(max_residual, info.residual);
    if (!(info.residual < 1e-8)) ++violations;
  }
}

}  // namespace

void beam_round(Beam& beam, const std::vector<SubjectDesign>& designs,
                std::span<const MiniBatch> block, const SplineSpace& space,
                const StiefelGeometry& geom, const StepSchedule& schedule,
                long block_index, bool select, bool expand, int workers,
                double& max_residual, long& feasibility_violations,
                std::vector<TuneLogRow>* log) {
  const int n_cand = static_cast<int>(beam.candidates.size());

  // Stage 1: update every chain on the same mini-batches, scoring each batch
  // before the step that consumes it.
  if (workers > 1 && n_cand > 1) {
    std::vector<double> residuals(n_cand, 0.0);
    std::vector<long> viols(n_cand, 0);
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, n_cand);
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        for (int i = t; i < n_cand; i += n_threads)
          run_candidate(beam.candidates[i], designs, block, space, geom,
                        schedule, residuals[i], viols[i]);
      });
    }
    for (auto& th : pool) th.join();
    for (int i = 0; i < n_cand; ++i) {
      max_residual = std::max(max_residual, residuals[i]);
      feasibility_violations += viols[i];
    }
  } else {
    for (Candidate& cand : beam.candidates)
      run_candidate(cand, designs, block, space, geom, schedule, max_residual,
                    feasibility_violations);
  }

  if (!select) return;

  // Stage 2: keep the `width` candidates with the smallest ABV.
  std::vector<int> order(n_cand);
  for (int i = 0; i < n_cand; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return better(beam.candidates[a], a, beam.candidates[b], b);
  });

  if (log) {
    for (int i = 0; i < n_cand; ++i) {
      TuneLogRow row;
      row.block = block_index;
      row.candidate = i;
      row.tau = beam.candidates[i].tau;
      row.abv = beam.candidates[i].abv.abv;
      row.selected = (i == order[0]);
      log->push_back(row);
    }
  }

  if (!expand) return;

  // Stage 3: each survivor spawns `branching` children on a multiplicative
  // tau grid around its own value; children continue the survivor's chain.
  std::vector<Candidate> next;
  next.reserve(beam.capacity());
  for (int w = 0; w < beam.width; ++w) {
    const Candidate& parent = beam.candidates[order[w]];
    for (int b = 0; b < beam.branching; ++b) {
      const double exponent = b - 0.5 * (beam.branching - 1);
      Candidate child = parent;
      child.tau =
          std::max(parent.tau * std::pow(beam.expand_ratio, exponent), 1e-16);
      child.lineage.emplace_back(block_index + 1, child.tau);
      next.push_back(std::move(child));
    }
  }
  beam.candidates = std::move(next);
}

const Candidate& best_candidate(const Beam& beam) {
  if (beam.candidates.empty()) throw StateError("beam has no candidates");
  const Candidate* best = nullptr;
  int best_idx = -1;
  bool any_block = false;
  for (int i = 0; i < static_cast<int>(beam.candidates.size()); ++i) {
    const Candidate& c = beam.candidates[i];
    if (c.abv.blocks_seen > 0) any_block = true;
    if (!best || better(c, i, *best, best_idx)) {
      best = &c;
      best_idx = i;
    }
  }
  if (!any_block)
    throw StateError("no completed validation block before selection");
  return *best;
}

}  // namespace ofpca
