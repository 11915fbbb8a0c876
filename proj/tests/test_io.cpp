#include <sqnkit/sqnkit.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace sqnkit;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t commas(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), ',')); }

Trace small_trace(bool with_ref) {
  Trace t;
  for (std::size_t s = 0; s < 3; ++s) {
    EpochRecord r;
    r.epoch = s;
    r.data_passes = 1.5 * double(s);
    r.f = 1.0 / double(s + 1);
    if (with_ref) r.subopt = 0.1 / double(s + 1);
    r.grad_norm = 0.3;
    r.wall_ms = 12.5;
    t.records.push_back(r);
  }
  return t;
}

}  // namespace

TEST(Parse, OptionNames) {
  EXPECT_EQ(parse_outer("1"), OuterOption::I);
  EXPECT_EQ(parse_outer("IV"), OuterOption::IV);
  EXPECT_EQ(parse_outer("last"), OuterOption::last);
  EXPECT_THROW(parse_outer("5"), Error);
  EXPECT_EQ(parse_curvature("block"), CurvatureMode::block);
  EXPECT_THROW(parse_curvature("newton"), Error);
  EXPECT_EQ(parse_anchor("subsampled"), AnchorMode::subsampled);
  EXPECT_THROW(parse_anchor("half"), Error);
  EXPECT_EQ(parse_sampling("uniform"), SamplingMode::uniform);
  EXPECT_THROW(parse_sampling("other"), Error);
}

TEST(ConfigJson, RoundTrip) {
  SolverConfig c;
  c.b = 7;
  c.b_H = 33;
  c.eta = 0.125;
  c.outer = OuterOption::III;
  c.curvature = CurvatureMode::block;
  c.anchor = AnchorMode::subsampled;
  c.sampling = SamplingMode::uniform;
  c.seed = 123456789012345ULL;
  c.skip_first_pair = true;
  SolverConfig back;
  apply_json(Json::parse(to_json(c).dump()), back);
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.seed, c.seed);
}

TEST(ConfigJson, OverlayAndErrors) {
  SolverConfig c;
  apply_json(Json{{"m", 9}, {"outer", 2}}, c);
  EXPECT_EQ(c.m, 9u);
  EXPECT_EQ(c.outer, OuterOption::II);
  EXPECT_EQ(c.b, SolverConfig{}.b);
  EXPECT_THROW(apply_json(Json{{"bogus", 1}}, c), Error);
  EXPECT_THROW(apply_json(Json::array({1, 2}), c), Error);
}

TEST(TraceCsv, HeaderRowsAndEmptySubopt) {
  std::ostringstream a, b;
  write_trace_csv(a, small_trace(true));
  write_trace_csv(b, small_trace(false), false);
  const auto la = lines(a.str()), lb = lines(b.str());
  ASSERT_EQ(la.size(), 4u);
  EXPECT_EQ(la[0], kTraceCsvHeader);
  for (const auto& l : la) EXPECT_EQ(commas(l), 8u);
  EXPECT_EQ(la[2], "1,1.5,0.5,0.05,0.3,0,0,0,12.5");
  EXPECT_EQ(lb[2], "1,1.5,0.5,,0.3,0,0,0,0");
}

TEST(TraceCsv, NumbersRoundTrip) {
  Trace t;
  EpochRecord r;
  r.f = 0.1 + 0.2;
  r.data_passes = 1.0 / 3.0;
  t.records.push_back(r);
  std::ostringstream o;
  write_trace_csv(o, t);
  const auto row = lines(o.str())[1];
  std::vector<std::string> cells;
  std::stringstream ss(row);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  EXPECT_EQ(std::stod(cells[1]), r.data_passes);
  EXPECT_EQ(std::stod(cells[2]), r.f);
}

TEST(CompareCsv, SortedLongFormat) {
  std::vector<VariantTrace> v{{"zeta", small_trace(true)}, {"alpha", small_trace(true)}};
  std::ostringstream o;
  write_compare_csv(o, v);
  const auto l = lines(o.str());
  ASSERT_EQ(l.size(), 7u);
  EXPECT_EQ(l[0], "variant,epoch,data_passes,subopt");
  EXPECT_EQ(l[1].rfind("alpha,0,", 0), 0u);
  EXPECT_EQ(l[4].rfind("zeta,0,", 0), 0u);
}

TEST(Json, NonFiniteBecomesNull) {
  Rate r;
  const Json j = to_json(r);
  EXPECT_TRUE(j.dump().find("null") != std::string::npos);
  EXPECT_NO_THROW(Json::parse(j.dump()));
}

TEST(Json, ReadFileErrors) {
  EXPECT_THROW(read_json_file("/nonexistent/dir/x.json"), Error);
  const std::string path = ::testing::TempDir() + "sqnkit_bad.json";
  {
    std::ofstream f(path);
    f << "{not json";
  }
  EXPECT_THROW(read_json_file(path), Error);
  {
    std::ofstream f(path);
    f << R"({"b": 3})";
  }
  EXPECT_EQ(read_json_file(path)["b"], 3);
  std::remove(path.c_str());
}

TEST(Json, ReferenceRoundTrip) {
  ReferenceSolution s;
  s.x_star = Vector::LinSpaced(3, -1.0, 0.7);
  s.f_star = 0.123456789;
  s.grad_norm = 1e-11;
  s.tolerance = 1e-10;
  s.iterations = 17;
  const auto back = reference_from_json(Json::parse(to_json(s).dump()));
  EXPECT_EQ(back.x_star, s.x_star);
  EXPECT_EQ(back.f_star, s.f_star);
}
