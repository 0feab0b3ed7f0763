#include "ofpca/stream.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "ofpca/rng.hpp"

namespace ofpca {

namespace {

using nlohmann::json;

Subject subject_from_json(const json& record, long line_no, int& dims) {
  if (!record.is_object() || !record.contains("id") ||
      !record.contains("points"))
    throw DataError("line " + std::to_string(line_no) +
                    ": expected an object with \"id\" and \"points\"");
  Subject s;
  s.id = record.at("id").get<std::string>();
  const json& points = record.at("points");
  if (!points.is_array() || points.empty())
    throw DataError("line " + std::to_string(line_no) +
                    ": \"points\" must be a non-empty array");

  const long m = static_cast<long>(points.size());
  for (long j = 0; j < m; ++j) {
    const json& pt = points[j];
    if (!pt.is_object() || !pt.contains("loc") || !pt.contains("y"))
      throw DataError("line " + std::to_string(line_no) + ": point " +
                      std::to_string(j) + " needs \"loc\" and \"y\"");
    const json& loc = pt.at("loc");
    if (!loc.is_array() || loc.empty())
      throw DataError("line " + std::to_string(line_no) + ": point " +
                      std::to_string(j) + " has an invalid \"loc\"");
    const int d = static_cast<int>(loc.size());
    if (dims == 0) dims = d;
    if (d != dims)
      throw DataError("line " + std::to_string(line_no) + ": point " +
                      std::to_string(j) + " has dimension " +
                      std::to_string(d) + ", expected " +
                      std::to_string(dims));
    if (j == 0) {
      s.locations.resize(m, dims);
      s.values.resize(m);
    }
    for (int c = 0; c < dims; ++c) {
      if (!loc[c].is_number())
        throw DataError("line " + std::to_string(line_no) +
                        ": non-numeric location");
      s.locations(j, c) = loc[c].get<double>();
    }
    if (!pt.at("y").is_number())
      throw DataError("line " + std::to_string(line_no) +
                      ": non-numeric value");
    s.values[j] = pt.at("y").get<double>();
  }
  return s;
}

std::vector<Subject> read_ndjson(const DataSource& source) {
  std::ifstream in(source.path);
  if (!in) throw DataError("cannot open " + source.path);
  std::vector<Subject> subjects;
  std::string line;
  long line_no = 0;
  int dims = source.dims;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    subjects.push_back(subject_from_json(record, line_no, dims));
  }
  return subjects;
}

double parse_double(const std::string& field, long line_no) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw DataError("line " + std::to_string(line_no) +
                    ": cannot parse number \"" + field + "\"");
  return value;
}

std::vector<Subject> read_csv(const DataSource& source) {
  if (source.dims < 1)
    throw ConfigError("CSV input requires the domain dimension");
  std::ifstream in(source.path);
  if (!in) throw DataError("cannot open " + source.path);

  std::vector<Subject> subjects;
  std::vector<Vector> locs;
  std::vector<double> vals;
  std::string current_id;
  const int d = source.dims;

  auto flush = [&]() {
    if (locs.empty()) return;
    Subject s;
    s.id = current_id;
    s.locations.resize(static_cast<long>(locs.size()), d);
    s.values.resize(static_cast<long>(vals.size()));
    for (std::size_t j = 0; j < locs.size(); ++j) {
      s.locations.row(static_cast<long>(j)) = locs[j].transpose();
      s.values[static_cast<long>(j)] = vals[j];
    }
    subjects.push_back(std::move(s));
    locs.clear();
    vals.clear();
  };

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> fields;
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (static_cast<int>(fields.size()) != d + 2)
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(d + 2) + " fields, got " +
                      std::to_string(fields.size()));
    if (fields[0] != current_id) {
      flush();
      current_id = fields[0];
    }
    Vector loc(d);
    for (int c = 0; c < d; ++c) loc[c] = parse_double(fields[1 + c], line_no);
    locs.push_back(std::move(loc));
    vals.push_back(parse_double(fields[d + 1], line_no));
  }
  flush();
  return subjects;
}

}  // namespace

std::vector<Subject> read_subjects(const DataSource& source) {
  std::vector<Subject> subjects = source.format == DataFormat::ndjson
                                      ? read_ndjson(source)
                                      : read_csv(source);
  if (subjects.empty())
    std::cerr << "warning: " << source.path << " contains no subjects\n";
  if (source.declared_count >= 0 &&
      static_cast<long>(subjects.size()) != source.declared_count)
    throw DataError("expected " + std::to_string(source.declared_count) +
                    " subjects, found " + std::to_string(subjects.size()));
  return subjects;
}

void write_subjects_ndjson(const std::string& path,
                           std::span<const Subject> subjects) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const Subject& s : subjects) {
    json points = json::array();
    for (long j = 0; j < s.values.size(); ++j) {
      json loc = json::array();
      for (long c = 0; c < s.locations.cols(); ++c)
        loc.push_back(s.locations(j, c));
      points.push_back({{"loc", std::move(loc)}, {"y", s.values[j]}});
    }
    const json record = {{"id", s.id}, {"points", std::move(points)}};
    out << record.dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

std::vector<MiniBatch> make_batches(long n_subjects, const BatchPlan& plan) {
  if (plan.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (plan.epochs < 1) throw ConfigError("epoch count must be >= 1");

  std::vector<MiniBatch> batches;
  long step = 0;
  std::vector<int> order(n_subjects);
  for (long i = 0; i < n_subjects; ++i) order[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= plan.epochs; ++epoch) {
    if (epoch > 1 && plan.shuffle_later_epochs) {
      // Self-contained Fisher-Yates so the stream is identical everywhere.
      PhiloxRng rng(plan.seed,
                    0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(epoch));
      for (long i = n_subjects - 1; i > 0; --i) {
        const long j = static_cast<long>(rng.next_u64() %
                                         static_cast<std::uint64_t>(i + 1));
        std::swap(order[i], order[j]);
      }
    }
    for (long start = 0; start < n_subjects; start += plan.batch_size) {
      MiniBatch mb;
      mb.step = ++step;
      mb.epoch = epoch;
      const long end = std::min<long>(start + plan.batch_size, n_subjects);
      mb.subjects.assign(order.begin() + start, order.begin() + end);
      batches.push_back(std::move(mb));
    }
  }
  return batches;
}

void center_subjects(std::vector<Subject>& subjects, CenterMode mode,
                     const std::vector<Interval>& domain, int bins_per_dim) {
  if (mode == CenterMode::none) return;
  if (bins_per_dim < 1) throw ConfigError("bin count must be >= 1");
  const int d = static_cast<int>(domain.size());

  auto cell_of = [&](const Subject& s, long j) {
    long cell = 0;
    for (int c = 0; c < d; ++c) {
      const double width = domain[c].hi - domain[c].lo;
      const double rel = (s.locations(j, c) - domain[c].lo) / width;
      long bin = static_cast<long>(rel * bins_per_dim);
      bin = std::min<long>(std::max<long>(bin, 0), bins_per_dim - 1);
      cell = cell * bins_per_dim + bin;
    }
    return cell;
  };

  long n_cells = 1;
  for (int c = 0; c < d; ++c) n_cells *= bins_per_dim;
  std::vector<double> sums(n_cells, 0.0);
  std::vector<long> counts(n_cells, 0);
  for (const Subject& s : subjects)
    for (long j = 0; j < s.values.size(); ++j) {
      const long cell = cell_of(s, j);
      sums[cell] += s.values[j];
      counts[cell] += 1;
    }
  for (Subject& s : subjects)
    for (long j = 0; j < s.values.size(); ++j) {
      const long cell = cell_of(s, j);
      if (counts[cell] > 0) s.values[j] -= sums[cell] / counts[cell];
    }
}

}  // namespace ofpca
