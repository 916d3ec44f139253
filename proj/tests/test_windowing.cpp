#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "pyrseiz/windowing.hpp"

using namespace pyrseiz;

namespace {

Vector<double> ramp(Index n) {
  Vector<double> v(n);
  for (Index i = 0; i < n; ++i) v(i) = double(i);
  return v;
}

std::vector<EegRecord> ramp_records(std::string_view sets, int per_set) {
  std::vector<EegRecord> out;
  for (char s : sets)
    for (int i = 1; i <= per_set; ++i) {
      Vector<double> v = ramp(4097);
      v = v.array().sin() * double(i) + double(s);
      out.push_back(make_record(s, i, v));
    }
  return out;
}

}  // namespace

TEST_CASE("window counts") {
  CHECK(count_windows(4097, 512, 64) == 57);
  CHECK(count_windows(4097, 512, 128) == 29);
  CHECK(count_windows(1024, 512, 256) == 3);
  CHECK(count_windows(1024, 512, 128) == 5);
  CHECK(count_windows(512, 512, 7) == 1);
  CHECK_THROWS_AS(count_windows(511, 512, 64), Error);
  CHECK_THROWS_AS(count_windows(4097, 512, 0), Error);
}

TEST_CASE("window count formula agrees with enumeration") {
  Rng rng(1);
  std::uniform_int_distribution<Index> len(1, 600), win(1, 200), stride(1, 50);
  int checked = 0;
  while (checked < 1000) {
    const Index L = len(rng), W = win(rng), S = stride(rng);
    if (W > L) continue;
    Index n = 0;
    for (Index start = 0; start + W <= L; start += S) ++n;
    REQUIRE(count_windows(L, W, S) == n);
    ++checked;
  }
}

TEST_CASE("normalization") {
  Vector<double> x(5);
  x << 0, 1, 2, 3, 4;
  const auto z = normalize(x);
  CHECK(z(0) == doctest::Approx(-1.4142135623730951));
  CHECK(z(1) == doctest::Approx(-0.7071067811865476));
  CHECK(z(2) == doctest::Approx(0.0));
  CHECK(z(4) == doctest::Approx(1.4142135623730951));

  Vector<double> two(2);
  two << 1, 3;
  CHECK(normalize(two)(0) == doctest::Approx(-1.0));
  CHECK(normalize(two)(1) == doctest::Approx(1.0));

  CHECK(normalize(Vector<double>::Constant(4, 5.0)) == Vector<double>::Zero(4));
  CHECK(normalize(Vector<double>::Constant(512, 3.7)) == Vector<double>::Zero(512));
  CHECK_THROWS_AS(normalize(Vector<double>()), Error);
}

TEST_CASE("normalization is idempotent and shift-scale invariant") {
  Rng rng(2);
  std::normal_distribution<double> n(3.0, 20.0);
  for (int t = 0; t < 20; ++t) {
    Vector<double> x(512);
    for (Index i = 0; i < 512; ++i) x(i) = n(rng);
    const auto z = normalize(x);
    CHECK(std::abs(z.mean()) < 1e-12);
    CHECK((z.array() - z.mean()).square().mean() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((normalize(z) - z).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((normalize((x.array() * 5.0 - 40.0).matrix()) - z).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("scheme parameters") {
  const auto s1 = SchemeSpec::scheme1(), s2 = SchemeSpec::scheme2();
  CHECK(s1.train_stride == 64);
  CHECK(s1.ensemble_width() == 3);
  CHECK(s2.train_stride == 128);
  CHECK(s2.ensemble_width() == 5);
  CHECK(SchemeSpec::from_id(2).id == 2);
  CHECK_THROWS_AS(SchemeSpec::from_id(3), Error);
}

TEST_CASE("training augmentation counts and offsets") {
  const auto records = ramp_records("AE", 3);
  const auto ec = define_case("A-E");
  const auto w1 = augment_training(records, ec, SchemeSpec::scheme1());
  CHECK(w1.size() == 6 * 57);
  CHECK(augment_training(records, ec, SchemeSpec::scheme2()).size() == 6 * 29);
  CHECK(w1[1].origin.offset == 64);
  CHECK(w1[56].origin.offset == 56 * 64);
  CHECK(w1[57].origin.record_id == "A002");
  CHECK(w1.back().label == 1);
  CHECK(w1.front().label == 0);
  CHECK(w1[5].values == normalize(records[0].samples.segment(5 * 64, 512)));
  CHECK_THROWS_AS(augment_training(records, define_case("A-B"), SchemeSpec::scheme1()), Error);
}

TEST_CASE("ninety records give the per-class window totals") {
  SynthesisSpec spec;
  spec.records_per_class = 90;
  spec.profiles = default_profiles(2);
  const auto records = synthesize_dataset(spec);
  const auto ec = define_case("A-B");
  for (auto [scheme, total] : {std::pair{SchemeSpec::scheme1(), 5130}, std::pair{SchemeSpec::scheme2(), 2610}}) {
    const auto w = augment_training(records, ec, scheme);
    CHECK(std::count_if(w.begin(), w.end(), [](const Window& x) { return x.label == 0; }) == total);
  }
}

TEST_CASE("test segmentation") {
  const auto records = ramp_records("E", 1);
  const auto ec = define_case("A-E");
  for (const auto& scheme : {SchemeSpec::scheme1(), SchemeSpec::scheme2()}) {
    const auto inst = segment_testing(records[0], ec, scheme);
    REQUIRE(inst.size() == 4);
    for (int s = 0; s < 4; ++s) {
      CHECK(inst[s].subsignal == s);
      CHECK(inst[s].label == 1);
      CHECK(inst[s].record_id == "E001");
      REQUIRE(Index(inst[s].windows.size()) == scheme.ensemble_width());
      for (std::size_t w = 0; w < inst[s].windows.size(); ++w) {
        const Index offset = s * 1024 + Index(w) * scheme.test_window_stride;
        CHECK(inst[s].windows[w].origin.offset == offset);
        CHECK(inst[s].windows[w].values == normalize(records[0].samples.segment(offset, 512)));
        CHECK(offset + 512 <= (s + 1) * 1024);
      }
    }
  }
}

TEST_CASE("short signals cannot be segmented for testing") {
  const auto r = make_record('A', 1, Vector<double>::Zero(4000), 0);
  CHECK_THROWS_AS(segment_signal(r, 0, SchemeSpec::scheme1()), Error);
}

TEST_CASE("train and test windows of a fold come from disjoint records") {
  SynthesisSpec spec;
  spec.records_per_class = 10;
  spec.profiles = default_profiles(3);
  const auto records = synthesize_dataset(spec);
  const auto ec = define_case("AB-C");
  for (Seed seed = 1; seed <= 5; ++seed) {
    const auto plan = plan_folds(strata_for_case(records, ec), 5, seed);
    for (int f = 0; f < 5; ++f) {
      const auto test_ids = plan.test_ids(f);
      const std::set<std::string> test(test_ids.begin(), test_ids.end());
      std::vector<EegRecord> train_records;
      for (const auto& r : records)
        if (ec.contains(r.set_label) && !test.contains(r.id())) train_records.push_back(r);
      for (const auto& w : augment_training(train_records, ec, SchemeSpec::scheme1()))
        REQUIRE_FALSE(test.contains(w.origin.record_id));
    }
  }
}

TEST_CASE("window stacking and text dump") {
  const auto records = ramp_records("A", 1);
  const auto w = augment_training(records, define_case("A-E"), SchemeSpec::scheme2());
  const auto m = stack_windows(std::span(w).first(3));
  CHECK(m.rows() == 512);
  CHECK(m.cols() == 3);
  CHECK(m.col(2) == w[2].values);
  CHECK(stack_windows({}).size() == 0);

  const auto path = std::filesystem::temp_directory_path() / "pyrseiz_windows.txt";
  write_windows_text(std::span(w).first(2), path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), ',') == 511);
  }
  CHECK(lines == 2);
}
