#include <cstdio>
#include <fstream>
#include <map>

#include "doctest.h"
#include "ofpca/stream.hpp"

using namespace ofpca;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/ofpca_test_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE_BEGIN("stream");

TEST_CASE("ndjson subjects parse with locations and values") {
  TempFile file("subjects.ndjson",
                R"({"id":"s1","points":[{"loc":[0.5],"y":1.2}]}
{"id":"s2","points":[{"loc":[0.1],"y":0.3},{"loc":[0.9],"y":-0.7}]}
)");
  const auto subjects = read_subjects({file.path, DataFormat::ndjson});
  REQUIRE(subjects.size() == 2);
  CHECK(subjects[0].id == "s1");
  CHECK(subjects[0].values.size() == 1);
  CHECK(subjects[0].locations(0, 0) == doctest::Approx(0.5));
  CHECK(subjects[0].values[0] == doctest::Approx(1.2));
  CHECK(subjects[1].values.size() == 2);
}

TEST_CASE("ndjson parse errors carry line numbers") {
  TempFile file("bad.ndjson",
                R"({"id":"s1","points":[{"loc":[0.5],"y":1.2}]}
{"id":"s2","points":)");
  CHECK_THROWS_WITH_AS(read_subjects({file.path, DataFormat::ndjson}),
                       doctest::Contains("line 2"), DataError);

  TempFile mixed("mixed.ndjson",
                 R"({"id":"s1","points":[{"loc":[0.5],"y":1.2}]}
{"id":"s2","points":[{"loc":[0.1,0.2],"y":0.3}]}
)");
  CHECK_THROWS_WITH_AS(read_subjects({mixed.path, DataFormat::ndjson}),
                       doctest::Contains("dimension"), DataError);
}

TEST_CASE("csv rows group by consecutive id") {
  TempFile file("subjects.csv",
                "s1,0.25,0.75,2.0\n"
                "s1,0.5,0.5,1.0\n"
                "s2,0.1,0.9,-1.0\n");
  DataSource source{file.path, DataFormat::csv, 2};
  const auto subjects = read_subjects(source);
  REQUIRE(subjects.size() == 2);
  CHECK(subjects[0].values.size() == 2);
  CHECK(subjects[0].locations(0, 0) == doctest::Approx(0.25));
  CHECK(subjects[0].locations(0, 1) == doctest::Approx(0.75));
  CHECK(subjects[0].values[0] == doctest::Approx(2.0));
  CHECK(subjects[1].id == "s2");

  DataSource no_dims{file.path, DataFormat::csv, 0};
  CHECK_THROWS_AS(read_subjects(no_dims), ConfigError);
}

TEST_CASE("empty files produce an empty sequence") {
  TempFile file("empty.ndjson", "");
  CHECK(read_subjects({file.path, DataFormat::ndjson}).empty());
}

TEST_CASE("declared counts are enforced") {
  TempFile file("count.ndjson",
                R"({"id":"s1","points":[{"loc":[0.5],"y":1.2}]}
)");
  DataSource source{file.path, DataFormat::ndjson, 0, 2};
  CHECK_THROWS_AS(read_subjects(source), DataError);
  source.declared_count = 1;
  CHECK(read_subjects(source).size() == 1);
}

TEST_CASE("ndjson round trip preserves subjects") {
  std::vector<Subject> subjects(2);
  subjects[0].id = "a";
  subjects[0].locations = Matrix(1, 2);
  subjects[0].locations << 0.25, 0.5;
  subjects[0].values = Vector(1);
  subjects[0].values << -1.25;
  subjects[1].id = "b";
  subjects[1].locations = Matrix(2, 2);
  subjects[1].locations << 0.1, 0.2, 0.3, 0.4;
  subjects[1].values = Vector(2);
  subjects[1].values << 0.5, 0.75;

  const std::string path = "/tmp/ofpca_test_roundtrip.ndjson";
  write_subjects_ndjson(path, subjects);
  const auto loaded = read_subjects({path, DataFormat::ndjson});
  std::remove(path.c_str());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[1].id == "b");
  CHECK((loaded[1].locations - subjects[1].locations).norm() == 0.0);
  CHECK((loaded[1].values - subjects[1].values).norm() == 0.0);
}

TEST_CASE("batches partition each epoch with a trailing short batch") {
  const BatchPlan plan{5, 1, 7, true};
  const auto batches = make_batches(12, plan);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].subjects.size() == 5);
  CHECK(batches[1].subjects.size() == 5);
  CHECK(batches[2].subjects.size() == 2);
  CHECK(batches[0].step == 1);
  CHECK(batches[2].step == 3);

  // Epoch 1 keeps arrival order.
  CHECK(batches[0].subjects == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("multi-epoch batches cover every subject exactly once per epoch") {
  const BatchPlan plan{4, 3, 11, true};
  const auto batches = make_batches(10, plan);
  std::map<int, std::map<int, int>> seen;  // epoch -> subject -> count
  long max_step = 0;
  for (const MiniBatch& mb : batches) {
    for (int s : mb.subjects) seen[mb.epoch][s] += 1;
    max_step = std::max(max_step, mb.step);
  }
  CHECK(max_step == static_cast<long>(batches.size()));
  for (int epoch = 1; epoch <= 3; ++epoch) {
    REQUIRE(seen[epoch].size() == 10);
    for (const auto& [subject, count] : seen[epoch]) CHECK(count == 1);
  }
}

TEST_CASE("batch streams are deterministic in the seed") {
  const BatchPlan plan{3, 2, 1234, true};
  const auto a = make_batches(11, plan);
  const auto b = make_batches(11, plan);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i].subjects == b[i].subjects);

  // Later epochs are reshuffled.
  bool any_difference = false;
  const long per_epoch = 4;
  for (long i = 0; i < per_epoch; ++i)
    if (a[i].subjects != a[per_epoch + i].subjects) any_difference = true;
  CHECK(any_difference);

  const BatchPlan other{3, 2, 99, true};
  const auto c = make_batches(11, other);
  bool differs = false;
  for (std::size_t i = per_epoch; i < c.size(); ++i)
    if (a[i].subjects != c[i].subjects) differs = true;
  CHECK(differs);
}

TEST_CASE("centering subtracts per-cell means") {
  std::vector<Subject> subjects(3);
  for (int i = 0; i < 3; ++i) {
    subjects[i].id = "s" + std::to_string(i);
    subjects[i].locations = Matrix(2, 1);
    subjects[i].locations << 0.1 * (i + 1), 0.8;
    subjects[i].values = Vector(2);
    subjects[i].values << 4.0, 4.0;
  }
  std::vector<Subject> untouched = subjects;
  center_subjects(untouched, CenterMode::none, {{0.0, 1.0}}, 1);
  CHECK((untouched[0].values - subjects[0].values).norm() == 0.0);

  // Constant data, a single bin: everything becomes zero.
  std::vector<Subject> one_bin = subjects;
  center_subjects(one_bin, CenterMode::binned_mean, {{0.0, 1.0}}, 1);
  for (const Subject& s : one_bin) CHECK(s.values.cwiseAbs().maxCoeff() == 0.0);

  // Per-bin means vanish after centering.
  std::vector<Subject> binned = subjects;
  for (int i = 0; i < 3; ++i) binned[i].values << 1.0 + i, -2.0 * i;
  center_subjects(binned, CenterMode::binned_mean, {{0.0, 1.0}}, 4);
  std::map<long, double> sums;
  std::map<long, long> counts;
  for (const Subject& s : binned)
    for (long j = 0; j < s.values.size(); ++j) {
      const long bin =
          std::min<long>(3, static_cast<long>(s.locations(j, 0) * 4));
      sums[bin] += s.values[j];
      counts[bin] += 1;
    }
  for (const auto& [bin, total] : sums)
    CHECK(std::abs(total / counts[bin]) < 1e-12);
}

TEST_SUITE_END();
