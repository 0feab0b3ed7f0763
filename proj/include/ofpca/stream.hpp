#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ofpca/model.hpp"

namespace ofpca {

enum class DataFormat { ndjson, csv };

/// NDJSON is the canonical format: one subject per line,
/// {"id": string, "points": [{"loc": [d reals], "y": real}]}.
/// CSV rows are id,loc_1,...,loc_d,y with observations grouped by
/// consecutive id; `dims` must then be set.
struct DataSource {
  std::string path;
  DataFormat format = DataFormat::ndjson;
  int dims = 0;             // 0: infer from the first record (NDJSON only)
  long declared_count = -1; // optional; checked when >= 0
};

std::vector<Subject> read_subjects(const DataSource& source);
void write_subjects_ndjson(const std::string& path,
                           std::span<const Subject> subjects);

struct BatchPlan {
  int batch_size = 5;
  int epochs = 1;
  std::uint64_t seed = 1;
  /// Epoch 1 keeps arrival order; later epochs are reshuffled (seeded) when
  /// set.
  bool shuffle_later_epochs = true;
};

struct MiniBatch {
  long step = 0;  // global step index, continuous across epochs
  int epoch = 1;
  std::vector<int> subjects;  // indices into the subject sequence
};

/// Deterministic mini-batch sequence over all epochs; the final short batch
/// of each epoch is kept.
std::vector<MiniBatch> make_batches(long n_subjects, const BatchPlan& plan);

enum class CenterMode { none, binned_mean };

/// Two-pass centering: per-cell means on a regular grid over the domain are
/// subtracted from every observation.
void center_subjects(std::vector<Subject>& subjects, CenterMode mode,
                     const std::vector<Interval>& domain, int bins_per_dim);

}  // namespace ofpca
