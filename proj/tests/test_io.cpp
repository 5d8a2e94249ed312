#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "hecop/io.hpp"

using namespace hecop;
using namespace hecop::io;

TEST(Csv, SeventeenDigitsRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::exp(0.5)}) {
    const auto s = format_double(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
  }
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Csv, Rfc4180Quoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  CsvWriter w({"x", "y"});
  w.row({"1", "a,b"});
  EXPECT_EQ(w.str(), "x,y\r\n1,\"a,b\"\r\n");
  EXPECT_THROW(w.row({"1"}), InvalidArgument);
}

TEST(Config, ParsesFlatKeyValue) {
  const auto c = parse_config_text("# comment\ncase = A\n\nN=50   # trailing\n tau=0.5\r\n");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.at("case"), "A");
  EXPECT_EQ(c.at("N"), "50");
  EXPECT_EQ(c.at("tau"), "0.5");
  EXPECT_THROW(parse_config_text("novalue\n"), InvalidArgument);
  EXPECT_THROW(parse_config_text("=3\n"), InvalidArgument);
  EXPECT_THROW(parse_config_text("a=1\na=2\n"), InvalidArgument);
  EXPECT_THROW(parse_config_file("/nonexistent/hecop.cfg"), InvalidArgument);
}

TEST(Json, SortedKeysAndIsolatedTimestamp) {
  const Config cfg{{"zeta", "1"}, {"alpha", "2"}};
  auto a = metadata("test", cfg, "2000-01-01T00:00:00Z");
  auto b = metadata("test", cfg, "2001-01-01T00:00:00Z");
  EXPECT_EQ(a["schema_version"], kSchemaVersion);
  EXPECT_EQ(a["version"], version_hash());
  const auto s = dump(a);
  EXPECT_LT(s.find("\"config\""), s.find("\"generated_at\""));
  EXPECT_LT(s.find("\"generated_at\""), s.find("\"kind\""));
  EXPECT_LT(s.find("\"alpha\""), s.find("\"zeta\""));
  EXPECT_NE(a, b);
  a.erase("generated_at");
  b.erase("generated_at");
  EXPECT_EQ(dump(a), dump(b));
}

TEST(Json, NonFiniteAsStrings) {
  EXPECT_EQ(json_number(std::numeric_limits<double>::infinity()), json("inf"));
  EXPECT_EQ(json_number(1.5), json(1.5));
  const double x = 0.1 + 0.2;
  EXPECT_EQ(json::parse(json_number(x).dump()).get<double>(), x);
}

TEST(Reports, CsvRowPerMomentAndJsonFields) {
  EmpiricalReport r;
  r.family = Family::A;
  r.k = std::numeric_limits<double>::infinity();
  r.N = 10;
  r.tau = 0.5;
  r.horizon = 0.025;
  r.transform = Transform::EXP2;
  r.estimate = empirical_moments({{0.0, 0.1}, {0.2, -0.1}}, Transform::EXP2, 3);
  r.target = target_moments(Transform::EXP2, 0.5, 3);
  r.replicas = 2;
  r.seed = 7;
  const auto csv = reports_csv({r, r});
  std::size_t lines = 0;
  for (char c : csv) lines += (c == '\n');
  EXPECT_EQ(lines, 1u + 2u * 3u);
  EXPECT_NE(csv.find("A,inf,10,0.5,TILDE,0.025000000000000001,EXP2,1,"), std::string::npos);
  const auto j = to_json(r);
  EXPECT_EQ(j["k"], "inf");
  EXPECT_EQ(j["estimate"]["moments"].size(), 4u);
  EXPECT_EQ(j["within_tolerance"].size(), 3u);
}

TEST(Reports, DensityGridAndEnsemble) {
  const auto g = subordination_density(1.0, GridSpec::for_time(1.0, 201));
  const auto csv = density_grid_csv(g);
  EXPECT_EQ(csv.substr(0, 7), "x,rho\r\n");
  const auto side = to_json(g);
  EXPECT_NEAR(side["mass"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(side["grid"]["points"], 201);
  EXPECT_EQ(side["convergence"]["etas"].size(), 3u);

  const auto e = run_ensemble(RootCase(Family::A, 3), 1.0, 0.1, SchemeConfig::for_horizon(0.1, 50), 2, 1, Clock::HO);
  const auto ts = terminal_states_csv(e);
  std::size_t lines = 0;
  for (char c : ts) lines += (c == '\n');
  EXPECT_EQ(lines, 1u + 6u);
}

TEST(Files, WriteCreatesDirectories) {
  const auto dir = std::filesystem::temp_directory_path() / "hecop_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_text(dir / "a.csv", "x\r\n1\r\n");
  std::ifstream f(dir / "a.csv", std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_EQ(ss.str(), "x\r\n1\r\n");
  std::filesystem::remove_all(dir.parent_path());
}
