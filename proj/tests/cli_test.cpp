#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "msadm/model.h"
#include "test_util.h"

#ifndef MSADM_CLI_PATH
#define MSADM_CLI_PATH "msadm"
#endif

namespace msadm {
namespace {

using json = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_file(const std::string& stem) {
  return ::testing::TempDir() + stem;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  const std::string tag = std::to_string(counter++);
  const std::string out_path = temp_file("cli_stdout_" + tag);
  const std::string err_path = temp_file("cli_stderr_" + tag);
  const std::string cmd = env_prefix + std::string(MSADM_CLI_PATH) + " " +
                          args + " >" + out_path + " 2>" + err_path;
  const int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

GTEST_TEST(CliTest, HelpExitsZero) {
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("check --help").code, 0);
}

GTEST_TEST(CliTest, BadUsageExitsTwo) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("frobnicate x.json").code, 2);
  EXPECT_EQ(run_cli("check missing_file.json").code, 2);
  EXPECT_EQ(run_cli("check " + test::fixture_path("example1.json") +
                    " --method thermal")
                .code,
            2);
}

GTEST_TEST(CliTest, CheckCertifiesTheContinuousFixture) {
  const std::string cert = temp_file("ex1_cert.json");
  CliResult r = run_cli("check " + test::fixture_path("example1.json") +
                        " --json --out " + cert);
  ASSERT_EQ(r.code, 0) << r.err;
  json rep = json::parse(r.out);
  EXPECT_EQ(rep["schema_version"], 1);
  EXPECT_EQ(rep["command"], "check");
  EXPECT_EQ(rep["coupling"], "adjoint");
  EXPECT_EQ(rep["criterion"]["verdict"], "feasible");
  EXPECT_GT(rep["criterion"]["margin"].get<double>(), 1e-4);
  EXPECT_NEAR(rep["oracle"]["value"].get<double>(), -1.017606, 1e-4);
  EXPECT_TRUE(rep["oracle"]["stable"].get<bool>());
  EXPECT_EQ(rep["exit_code"], 0);

  CliResult v = run_cli("verify " + test::fixture_path("example1.json") + " " +
                        cert + " --tol 1e-8");
  EXPECT_EQ(v.code, 0) << v.out << v.err;
  EXPECT_NE(v.out.find("pass"), std::string::npos);
}

GTEST_TEST(CliTest, CheckRejectsTheDiscreteFixture) {
  CliResult r =
      run_cli("check " + test::fixture_path("example2.json") + " --json");
  EXPECT_EQ(r.code, 1);
  json rep = json::parse(r.out);
  EXPECT_EQ(rep["criterion"]["verdict"], "infeasible");
  EXPECT_NEAR(rep["oracle"]["value"].get<double>(), 9.579091, 1e-3);
  EXPECT_FALSE(rep["oracle"]["stable"].get<bool>());
  EXPECT_EQ(rep["admissible"], "no (moment spectrum unstable)");
}

GTEST_TEST(CliTest, SpectralMethodUsesTheOracleAlone) {
  EXPECT_EQ(run_cli("check " + test::fixture_path("example1.json") +
                    " --method spectral")
                .code,
            0);
  EXPECT_EQ(run_cli("check " + test::fixture_path("example2.json") +
                    " --method spectral")
                .code,
            1);
}

GTEST_TEST(CliTest, LiftedCriterionIsContinuousOnly) {
  CliResult r = run_cli("check " + test::fixture_path("example1.json") +
                        " --method lifted-lmi --json");
  EXPECT_EQ(r.code, 1);  // structurally infeasible for rank-deficient E
  json rep = json::parse(r.out);
  EXPECT_EQ(rep["criterion"]["verdict"], "infeasible");
  EXPECT_EQ(run_cli("check " + test::fixture_path("example2.json") +
                    " --method lifted-lmi")
                .code,
            2);
}

GTEST_TEST(CliTest, CheckReportsAreByteIdentical) {
  const std::string args =
      "check " + test::fixture_path("example2.json") + " --json";
  CliResult a = run_cli(args);
  CliResult b = run_cli(args);
  EXPECT_EQ(a.code, b.code);
  EXPECT_EQ(a.out, b.out);
  EXPECT_FALSE(a.out.empty());
}

GTEST_TEST(CliTest, VerifySurfacesTheNullBasisResidual) {
  CliResult r = run_cli("verify " + test::fixture_path("example2.json") + " " +
                        test::fixture_path("example2_cert.json") + " --json");
  EXPECT_EQ(r.code, 1);
  json rep = json::parse(r.out);
  EXPECT_FALSE(rep["pass"].get<bool>());
  EXPECT_FALSE(rep["precondition_ok"].get<bool>());
  EXPECT_NEAR(rep["etf_residual"].get<double>(), 0.09, 1e-6);
  EXPECT_LE(rep["ef_residual"].get<double>(), 1e-12);

  CliResult text = run_cli("verify " + test::fixture_path("example2.json") +
                           " " + test::fixture_path("example2_cert.json"));
  EXPECT_EQ(text.code, 1);
  EXPECT_NE(text.out.find("E^T F"), std::string::npos);
}

GTEST_TEST(CliTest, VerifyRejectsMismatchedCertificates) {
  CliResult r = run_cli("verify " + test::fixture_path("example2.json") + " " +
                        test::fixture_path("example1_cert.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("certificate"), std::string::npos);
}

GTEST_TEST(CliTest, SimulateWritesDeterministicCsv) {
  const std::string csv1 = temp_file("sim1.csv");
  const std::string csv2 = temp_file("sim2.csv");
  const std::string base = "simulate " + test::fixture_path("example1.json") +
                           " --paths 200 --horizon 0.5 --seed 42 --out ";
  EXPECT_EQ(run_cli(base + csv1).code, 0);
  EXPECT_EQ(run_cli(base + csv2).code, 0);
  const std::string c1 = read_file(csv1);
  EXPECT_EQ(c1, read_file(csv2));
  EXPECT_EQ(c1.rfind("time,mean_sq_norm,stderr", 0), 0u);
}

GTEST_TEST(CliTest, SeedComesFromTheEnvironmentByDefault) {
  const std::string a = temp_file("env_a.csv");
  const std::string b = temp_file("env_b.csv");
  const std::string c = temp_file("env_c.csv");
  const std::string d = temp_file("env_d.csv");
  const std::string base = "simulate " + test::fixture_path("example1.json") +
                           " --paths 100 --horizon 0.3 --out ";
  EXPECT_EQ(run_cli(base + a, "SSA_SEED=123 ").code, 0);
  EXPECT_EQ(run_cli(base + b, "SSA_SEED=123 ").code, 0);
  EXPECT_EQ(run_cli(base + c + " --seed 123").code, 0);
  EXPECT_EQ(run_cli(base + d, "SSA_SEED=99 ").code, 0);
  EXPECT_EQ(read_file(a), read_file(b));
  EXPECT_EQ(read_file(a), read_file(c));  // flag and env agree
  EXPECT_NE(read_file(a), read_file(d));
  EXPECT_EQ(run_cli(base + a, "SSA_SEED=junk ").code, 2);
}

GTEST_TEST(CliTest, SimulateEnforcesConsistentStarts) {
  const std::string base = "simulate " + test::fixture_path("example1.json") +
                           " --paths 5 --horizon 0.1 --x0 1,0";
  EXPECT_EQ(run_cli(base).code, 2);
  EXPECT_EQ(run_cli(base + " --project-x0").code, 0);
}

GTEST_TEST(CliTest, SimulateFlagsDivergenceButStillWrites) {
  const std::string csv = temp_file("diverge.csv");
  CliResult r = run_cli("simulate " + test::fixture_path("example2.json") +
                        " --paths 200 --horizon 5 --seed 1 --json --out " +
                        csv);
  EXPECT_EQ(r.code, 1);
  json rep = json::parse(r.out);
  EXPECT_TRUE(rep["summary"]["diverged"].get<bool>());
  EXPECT_GT(rep["summary"]["ratio"].get<double>(), 100.0);
  EXPECT_FALSE(read_file(csv).empty());
}

GTEST_TEST(CliTest, LiftExportFeedsBackIntoAnalysis) {
  const std::string lifted = temp_file("lifted2.json");
  CliResult r = run_cli("lift " + test::fixture_path("example2.json") +
                        " --out " + lifted + " --json");
  ASSERT_EQ(r.code, 0) << r.err;
  json rep = json::parse(r.out);
  EXPECT_EQ(rep["dim"], 6);
  EXPECT_TRUE(rep["pencil_regular"].get<bool>());

  // The exported deterministic model is analyzable by the same tool; its
  // second moment doubles the lifted growth rate, far above one.
  CliResult chk = run_cli("check " + lifted + " --method spectral --json");
  EXPECT_EQ(chk.code, 1);
  json crep = json::parse(chk.out);
  EXPECT_GT(crep["oracle"]["value"].get<double>(), 50.0);

  const std::string lifted1 = temp_file("lifted1.json");
  CliResult r1 = run_cli("lift " + test::fixture_path("example1.json") +
                         " --out " + lifted1 + " --json");
  ASSERT_EQ(r1.code, 0);
  EXPECT_FALSE(json::parse(r1.out)["pencil_regular"].get<bool>());
}

GTEST_TEST(CliTest, ForceOverridesTheRangeConditionRefusal) {
  Model m = load_model_file(test::fixture_path("example1.json"));
  m.C[1](1, 0) = 0.2;  // noise leaves range(E)
  const std::string path = temp_file("offrange.json");
  std::ofstream(path) << save_model(m);
  CliResult refuse = run_cli("check " + path + " --method lmi");
  EXPECT_EQ(refuse.code, 2);
  EXPECT_NE(refuse.err.find("--force"), std::string::npos);
  CliResult forced = run_cli("check " + path + " --method lmi --force");
  EXPECT_NE(forced.code, 2) << forced.err;
}

}  // namespace
}  // namespace msadm
