#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "phasemetric/cli.hpp"

using namespace phasemetric;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json fit_of(const std::string& out) { return json::parse(out.substr(out.find("\n\n") + 2)); }

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / "phasemetric_cli_test";
  std::filesystem::create_directories(d);
  return d / name;
}

}  // namespace

TEST(Cli, CatalogueListOnePerLine) {
  auto r = run({"catalogue", "list"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(lines(r.out), catalogue_names());
}

TEST(Cli, ScanExample7) {
  auto r = run({"scan", "--entry", "example7", "--k", "2", "--m", "3", "--method", "certificate"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(r.out);
  EXPECT_EQ(ls[0], "lambda,lower,upper,rho0,witness_id,method");
  auto fit = fit_of(r.out);
  EXPECT_NEAR(fit["slope_upper"].get<double>(), 2.0 / 3, 0.01);
  EXPECT_NEAR(fit["slope_lower"].get<double>(), 2.0 / 3, 0.01);
  for (const char* k : {"slope_lower", "slope_upper", "r2_lower", "r2_upper", "expected_exponent"}) EXPECT_TRUE(fit.contains(k));
}

TEST(Cli, ExpectIsACiHook) {
  std::vector<std::string> base = {"scan", "--entry", "example7(2,3)", "--lambda-max", "65536", "--tol", "0.01"};
  auto good = base, bad = base;
  good.insert(good.end(), {"--expect", "0.6667"});
  bad.insert(bad.end(), {"--expect", "0.5"});
  EXPECT_EQ(run(good).code, 0);
  auto r = run(bad);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("expectation failed"), std::string::npos);
}

TEST(Cli, ObstructionFlagship) {
  auto r = run({"obstruction", "--lambda", "x^6+y^6+x^2*y^2", "--degree", "6"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("verdict INCONSISTENT"), std::string::npos);
  for (const char* e : {"3*f[1,0] + 3*g[0,1] = 1", "7*f[1,0] + g[0,1] = 1", "f[1,0] + 7*g[0,1] = 1"})
    EXPECT_NE(r.out.find(e), std::string::npos) << e;
  auto q = run({"obstruction", "--lambda", "x^4+y^4+x^2*y^2", "--degree", "6"});
  EXPECT_NE(q.out.find("verdict CONSISTENT"), std::string::npos);
  EXPECT_NE(q.out.find("f[1,0] = 1/6"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"frobnicate"},
           {"scan"},
           {"scan", "--entry", "nope"},
           {"scan", "--entry", "example6_pair"},
           {"scan", "--entry", "elliptic2d", "--k", "2"},
           {"scan", "--entry", "example7", "--method", "fast"},
           {"scan", "--entry", "example7", "--plotdata"},
           {"sigma", "--entry", "elliptic2d", "--point", "1,2,3"},
           {"symplectic", "--entry", "heisenberg", "--point", "0,0,0,0,0,0"},
           {"obstruction", "--lambda", "x^6+y^6", "--degree", "4"},
           {"lemma53", "--lambda", "x^2*y^2"},
           {"scan", "--spec", "/nonexistent/spec.json"},
       }) {
    auto r = run(args);
    EXPECT_EQ(r.code, 2) << (args.empty() ? "<none>" : args[0]) << " " << r.err;
  }
}

TEST(Cli, ComputationErrorsExitOne) {
  auto r = run({"dist", "--entry", "example7", "--lambda", "1e300"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("NON_FINITE"), std::string::npos);
}

TEST(Cli, MalformedSpecFileIsAParseError) {
  auto p = scratch("broken.json");
  std::ofstream(p) << "{\"name\": \"x\", \"variables\": [\"x\"]";
  auto r = run({"symbols", "--spec", p.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("PARSE"), std::string::npos);
}

TEST(Cli, PointwiseCommands) {
  EXPECT_EQ(run({"sigma", "--entry", "elliptic2d", "--point", "0,0,3,4"}).out, "5\n");
  EXPECT_EQ(run({"order", "--entry", "grusin", "--m", "3", "--at", "0,0"}).out, "3\n");
  EXPECT_EQ(run({"order", "--entry", "grusin", "--m", "3", "--at", "1,0"}).out, "1\n");
  // bracket tau appears twice (indices 1.2 and 2.1), so nu = sqrt(2 R)
  EXPECT_EQ(run({"nu", "--entry", "grusin", "--at", "0,0", "--R", "16"}).out, "5.65685425\n");
  auto s = run({"symplectic", "--entry", "heisenberg", "--point", "0,0,0,0,0,1"});
  EXPECT_EQ(s.out, "is_symplectic true\nspan true\n");
  auto b = run({"brackets", "--entry", "grusin", "--order", "2"});
  EXPECT_EQ(lines(b.out).back(), "2,2,1.2,tau");
}

TEST(Cli, RoundTripThroughSpecFiles) {
  for (const auto& spec : catalogue_defaults()) {
    std::string name = spec.name;
    auto path = scratch("rt_" + std::to_string(std::hash<std::string>{}(name)) + ".json");
    ASSERT_EQ(run({"catalogue", "export", name, "--out", path.string()}).code, 0) << name;
    for (std::vector<std::string> cmd : {std::vector<std::string>{"symbols"}, {"brackets", "--order", "2"}}) {
      auto a = cmd, b = cmd;
      a.insert(a.end(), {"--entry", name});
      b.insert(b.end(), {"--spec", path.string()});
      EXPECT_EQ(run(a).out, run(b).out) << name;
    }
    if (spec.certificate.empty()) continue;
    std::string lam = format_g9(spec.cert_range.lo);
    auto a = run({"dist", "--entry", name, "--lambda", lam});
    auto b = run({"dist", "--spec", path.string(), "--lambda", lam});
    ASSERT_EQ(a.code, 0) << name << a.err;
    EXPECT_EQ(a.out, b.out) << name;
  }
}

TEST(Cli, JobsDoNotChangeOutput) {
  std::vector<std::string> args = {"scan", "--entry", "example8", "--method", "both", "--lambda-max", "8192"};
  auto one = run(args);
  ::setenv("PHASEMETRIC_JOBS", "3", 1);
  auto three = run(args);
  ::unsetenv("PHASEMETRIC_JOBS");
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_EQ(one.out, three.out);
}

TEST(Cli, OutFilesAndPlotData) {
  auto prefix = scratch("heis").string();
  auto r = run({"varrho", "--entry", "heisenberg", "--R-max", "1024", "--out", prefix, "--plotdata", "--expect", "0.5",
                "--tol", "0.02"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(slurp(prefix + ".fit.json"))["slope"].get<double>(), 0.5);
  auto dat = lines(slurp(prefix + ".dat"));
  ASSERT_EQ(dat.size(), 5u);
  EXPECT_EQ(dat[0], "6 3.5");  // log2 64, log2 sqrt(2*64)

  auto sp = scratch("e7").string();
  ASSERT_EQ(run({"scan", "--entry", "example7", "--lambda-max", "65536", "--out", sp, "--plotdata"}).code, 0);
  EXPECT_EQ(lines(slurp(sp + ".csv")).size(), 8u);
  auto lower = lines(slurp(sp + ".lower.dat"));
  ASSERT_EQ(lower.size(), 7u);
  EXPECT_EQ(lower[2], "12 8");  // lambda 2^12, lower lambda^(2/3) = 2^8
}

TEST(Cli, Lemma53Report) {
  auto csv = scratch("l53.csv").string();
  auto r = run({"lemma53", "--lambda", "x^6+y^6+x^2*y^2", "--csv", csv});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_LE(j["residual"].get<double>(), 0.02);
  EXPECT_EQ(j["grid"]["n_theta"], 96);
  EXPECT_EQ(lines(slurp(csv))[0], "r,theta,f,g,h,residual");
}
