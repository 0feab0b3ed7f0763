#pragma once

#include <utility>
#include <vector>

#include "ofpca/optim.hpp"
#include "ofpca/stream.hpp"

namespace ofpca {

/// Averaged block validation score: per-batch validation scores are pooled
/// into blocks of q mini-batches, and each completed block average is folded
/// into an exponentially weighted running score
/// abv <- (1 - omega) * block_average + omega * abv, starting from 0.
struct AbvState {
  double omega = 0.5;
  int block_size = 20;  // q, mini-batches per block
  double block_sum = 0.0;
  int block_count = 0;
  double abv = 0.0;
  long blocks_seen = 0;

  void add(double v_score);
  /// Folds a partial block (if any) as if it were complete.
  void flush_partial();
};

/// Record of one optimizer step, kept per chain for diagnostics.
struct StepRecord {
  long step = 0;
  double grad_norm = 0.0;
  double v_score = 0.0;
  double tau = 0.0;
  Vector eigenvalues;
  double noise_var = 0.0;
};

/// One (smoothing parameter, model chain) pair explored by the beam search.
struct Candidate {
  double tau = 0.0;
  ChainState chain;
  AbvState abv;
  std::vector<std::pair<long, double>> lineage;  // (block, tau)
  std::vector<StepRecord> history;
};

struct Beam {
  std::vector<Candidate> candidates;
  int width = 2;        // W survivors per round
  int branching = 3;    // B children per survivor
  double expand_ratio = 3.1622776601683795;  // rho

  int capacity() const { return width * branching; }
};

struct TuneLogRow {
  long block = 0;
  int candidate = 0;
  double tau = 0.0;
  double abv = 0.0;
  bool selected = false;
};

/// Unpenalized average discrepancy of the incoming batch; by contract it is
/// evaluated at the parameters *before* the update that consumes the batch.
double validation_score(const std::vector<SubjectDesign>& designs,
                        std::span<const int> batch, const SplineSpace& space,
                        const ModelParams& params);

Beam make_beam(const std::vector<double>& taus, int width, int branching,
               double rho, double omega, int block_size,
               const ModelParams& init, const OptimizerState& opt);

/// One tuning round over a block of mini-batches: every candidate takes one
/// optimizer step per batch (scoring the batch first), then the W candidates
/// with the smallest ABV survive and each spawns `branching` children on a
/// multiplicative tau grid. Selection and expansion can be disabled for the
/// trailing partial block of an epoch. Candidates are independent, so stage 1
/// may run on `workers` threads with results identical to the serial order.
void beam_round(Beam& beam, const std::vector<SubjectDesign>& designs,
                std::span<const MiniBatch> block, const SplineSpace& space,
                const StiefelGeometry& geom, const StepSchedule& schedule,
                long block_index, bool select, bool expand, int workers,
                double& max_residual, long& feasibility_violations,
                std::vector<TuneLogRow>* log);

/// Candidate with the smallest ABV; ties broken by smaller tau, then lower
/// index. Requires at least one completed block.
const Candidate& best_candidate(const Beam& beam);

}  // namespace ofpca
