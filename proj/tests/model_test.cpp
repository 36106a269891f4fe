#include "msadm/model.h"

#include <string>

#include <gtest/gtest.h>

#include "test_util.h"

namespace msadm {
namespace {

GTEST_TEST(ModelTest, LoadsContinuousFixture) {
  Model m = load_model_file(test::fixture_path("example1.json"));
  EXPECT_EQ(m.kind, Kind::kContinuous);
  EXPECT_EQ(m.n, 2);
  EXPECT_EQ(m.N, 2);
  Matrix E(2, 2);
  E << 1, 0, 0, 0;
  EXPECT_TRUE(m.E.isApprox(E));
  EXPECT_DOUBLE_EQ(m.A[0](0, 1), 0.7);
  EXPECT_DOUBLE_EQ(m.A[1](1, 0), 0.3);
  EXPECT_DOUBLE_EQ(m.C[0](0, 0), 0.4);
  EXPECT_DOUBLE_EQ(m.transition(0, 1), 0.6);
  EXPECT_TRUE(m.x0.empty());
  EXPECT_TRUE(validate(m).all_ok());
}

GTEST_TEST(ModelTest, InputOutputFormExpandsToDrift) {
  // Discrete fixture carries G; the drift is I - G + E.
  Model m = load_model_file(test::fixture_path("example2.json"));
  EXPECT_EQ(m.kind, Kind::kDiscrete);
  Matrix A1(2, 2), A2(2, 2);
  A1 << 1.1, 0.1, -0.3, 0.9;
  A2 << 1.0, 0.1, -0.4, 0.5;
  EXPECT_TRUE(m.A[0].isApprox(A1, 1e-14));
  EXPECT_TRUE(m.A[1].isApprox(A2, 1e-14));
  EXPECT_TRUE(validate(m).all_ok());
}

GTEST_TEST(ModelTest, SaveLoadRoundTrip) {
  Model m = load_model_file(test::fixture_path("example1.json"));
  m.x0 = {1.0, 0.4};
  Model back = load_model(save_model(m));
  EXPECT_EQ(back.kind, m.kind);
  EXPECT_TRUE(back.E.isApprox(m.E, 0));
  for (int i = 0; i < m.N; ++i) {
    EXPECT_TRUE(back.A[i].isApprox(m.A[i], 0));
    EXPECT_TRUE(back.C[i].isApprox(m.C[i], 0));
  }
  EXPECT_TRUE(back.transition.isApprox(m.transition, 0));
  EXPECT_EQ(back.x0, m.x0);
}

GTEST_TEST(ModelTest, RejectsMalformedDocuments) {
  const std::string base = R"({"kind":"continuous","n":1,"N":1,
    "E":[[1.0]],"A":[[[0.5]]],"C":[[[0.1]]],"transition":[[0.0]]})";
  EXPECT_NO_THROW(load_model(base));
  EXPECT_THROW(load_model("not json"), std::invalid_argument);
  EXPECT_THROW(load_model(R"({"kind":"sampled","n":1,"N":1,"E":[[1]],
    "A":[[[1]]],"C":[[[0]]],"transition":[[0]]})"),
               std::invalid_argument);
  // Wrong row count in E.
  EXPECT_THROW(load_model(R"({"kind":"continuous","n":2,"N":1,"E":[[1,0]],
    "A":[[[1,0],[0,1]]],"C":[[[0,0],[0,0]]],"transition":[[0]]})"),
               std::invalid_argument);
  // Drift list shorter than N.
  EXPECT_THROW(load_model(R"({"kind":"continuous","n":1,"N":2,"E":[[1]],
    "A":[[[1]]],"C":[[[0]],[[0]]],"transition":[[-1,1],[1,-1]]})"),
               std::invalid_argument);
  // A and G together, or G on a continuous model.
  EXPECT_THROW(load_model(R"({"kind":"discrete","n":1,"N":1,"E":[[1]],
    "A":[[[1]]],"G":[[[1]]],"C":[[[0]]],"transition":[[1]]})"),
               std::invalid_argument);
  EXPECT_THROW(load_model(R"({"kind":"continuous","n":1,"N":1,"E":[[1]],
    "G":[[[1]]],"C":[[[0]]],"transition":[[0]]})"),
               std::invalid_argument);
  // Non-finite entry and bad x0 length.
  EXPECT_THROW(load_model(R"({"kind":"continuous","n":1,"N":1,"E":[[1e999]],
    "A":[[[1]]],"C":[[[0]]],"transition":[[0]]})"),
               std::invalid_argument);
  EXPECT_THROW(load_model(R"({"kind":"continuous","n":1,"N":1,"E":[[1]],
    "A":[[[1]]],"C":[[[0]]],"transition":[[0]],"x0":[1,2]})"),
               std::invalid_argument);
  EXPECT_THROW(load_model_file("/nonexistent/path.json"), std::invalid_argument);
}

GTEST_TEST(ModelTest, ValidateFlagsNoiseOutsideRangeOfE) {
  Model m = load_model_file(test::fixture_path("example1.json"));
  m.C[1](1, 0) = 0.2;  // second row of E is zero, so rank [E C] jumps to 2
  ValidationReport rep = validate(m);
  EXPECT_TRUE(rep.range_condition[0]);
  EXPECT_FALSE(rep.range_condition[1]);
  EXPECT_FALSE(rep.all_ok());
}

GTEST_TEST(ModelTest, ValidateFlagsNonRegularPencil) {
  Model m = load_model_file(test::fixture_path("example1.json"));
  // With the second row of E zero, zeroing that row of A makes
  // det(sE - A) vanish identically.
  m.A[0].row(1).setZero();
  ValidationReport rep = validate(m);
  EXPECT_FALSE(rep.regular[0]);
  EXPECT_TRUE(rep.regular[1]);
}

GTEST_TEST(ModelTest, ValidateChecksTransitionRows) {
  Model m = load_model_file(test::fixture_path("example1.json"));
  m.transition(0, 0) = -0.7;  // row no longer sums to zero
  EXPECT_FALSE(validate(m).transition_ok);
  m.transition(0, 1) = -0.1;  // negative off-diagonal rate
  m.transition(0, 0) = 0.1;
  EXPECT_FALSE(validate(m).transition_ok);

  Model d = load_model_file(test::fixture_path("example2.json"));
  d.transition(1, 1) = 0.6;  // row sums to 0.9
  EXPECT_FALSE(validate(d).transition_ok);
}

GTEST_TEST(ModelTest, RandomStructuredModelsValidate) {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 20; ++trial) {
    test::RandomModelOptions opt;
    opt.kind = trial % 2 == 0 ? Kind::kContinuous : Kind::kDiscrete;
    opt.n = 3;
    opt.r = 2;
    Model m = test::random_model(&g, opt);
    ValidationReport rep = validate(m);
    EXPECT_TRUE(rep.transition_ok);
    for (bool b : rep.range_condition) EXPECT_TRUE(b);
  }
}

}  // namespace
}  // namespace msadm
