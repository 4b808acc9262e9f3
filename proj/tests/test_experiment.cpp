#include <doctest.h>

#include <cstdlib>

#include "crtforest/errors.hpp"
#include "crtforest/experiment.hpp"

using crt::CalibrationMethod;
using crt::Scenario;

TEST_CASE("scenario names") {
  const auto geo = Scenario::parse("Geo(0.5)");
  CHECK(geo.kind() == Scenario::Kind::kConditioned);
  CHECK(geo.offspring()->family == crt::OffspringFamily::kGeometric);
  CHECK(Scenario::parse("Bin(0.35)").offspring()->family == crt::OffspringFamily::kStrictBinary);
  CHECK(Scenario::parse("Bin2(0.5)").offspring()->family == crt::OffspringFamily::kBinomial2);
  CHECK(Scenario::parse("GW-Bin(2,0.5)").kind() == Scenario::Kind::kUnconditioned);
  CHECK(Scenario::parse("Phylo.bd").kind() == Scenario::Kind::kBirthDeath);
  CHECK(Scenario::parse("Phylo.coal").kind() == Scenario::Kind::kCoalescent);
  CHECK(Scenario::parse("cgw:uub").offspring()->family == crt::OffspringFamily::kUnorderedUnaryBinary);
  CHECK(Scenario::parse("gw:geo:0.5").kind() == Scenario::Kind::kUnconditioned);
  CHECK(Scenario::parse("bd:1:0.5").kind() == Scenario::Kind::kBirthDeath);
  CHECK(Scenario::parse("mary:3").kind() == Scenario::Kind::kConditioned);
  CHECK_THROWS_AS(Scenario::parse("Tree(1)"), crt::DomainError);
  CHECK_THROWS_AS(Scenario::parse("bd:x"), crt::DomainError);
}

TEST_CASE("scenario sizes") {
  crt::RngStream rng(81, 0);
  const auto lengths = crt::BranchLengthSpec::uniform(0, 2);
  // Strict binary trees have an odd vertex count; the table alias rounds up.
  CHECK(Scenario::parse("Bin(0.5)").sample(1000, lengths, rng).size() == 1001);
  CHECK_THROWS_AS(Scenario::parse("cgw:strictbin:0.5").sample(1000, lengths, rng), crt::InfeasibleSize);
  CHECK(Scenario::parse("Geo(0.5)").sample(1000, lengths, rng).size() == 1000);
  CHECK(Scenario::parse("GW-Bin(2,0.5)").sample(100, lengths, rng).size() <= 100);
  CHECK(Scenario::parse("Phylo.bd").sample(101, lengths, rng).leaf_count() == 51);
  CHECK(Scenario::parse("Phylo.coal").sample(101, lengths, rng).size() == 101);
}

TEST_CASE("calibration methods") {
  for (const char* name : {"ltree-chi2", "dyck-chi2", "ltree-F", "dyck-F", "ltree-perm", "dyck-perm"}) {
    CHECK(crt::to_string(crt::parse_calibration_method(name)) == name);
  }
  CHECK_THROWS_AS(crt::parse_calibration_method("ks"), crt::DomainError);
  CHECK_FALSE(crt::is_two_sample(CalibrationMethod::kDyckChi2));
  CHECK(crt::is_two_sample(CalibrationMethod::kLtreePerm));
}

TEST_CASE("calibration does not depend on the thread count") {
  crt::CalibrationConfig c;
  c.scenario = Scenario::parse("Geo(0.5)");
  c.methods = {CalibrationMethod::kLtreeChi2, CalibrationMethod::kDyckF, CalibrationMethod::kLtreePerm};
  c.num_trees = 10;
  c.n_vertices = 200;
  c.trials = 12;
  c.alpha = 0.3;
  c.permutations = 100;
  c.seed = 5;
  c.threads = 1;
  const auto serial = crt::run_calibration(c);
  c.threads = 4;
  const auto parallel = crt::run_calibration(c);
  REQUIRE(serial.size() == 3);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].rejections == parallel[i].rejections);
    CHECK(crt::to_csv(serial[i]) == crt::to_csv(parallel[i]));
  }
  CHECK(serial[0].distribution == "Geo(0.5)");
  CHECK(serial[0].trials == 12);
  CHECK(serial[0].reject_rate == doctest::Approx(serial[0].rejections / 12.0));
}

TEST_CASE("calibration rejects bad configurations") {
  crt::CalibrationConfig c;
  c.methods = {CalibrationMethod::kLtreeChi2};
  c.trials = 0;
  CHECK_THROWS_AS(crt::run_calibration(c), crt::DomainError);
  c.trials = 1;
  c.methods.clear();
  CHECK_THROWS_AS(crt::run_calibration(c), crt::DomainError);
  c.methods = {CalibrationMethod::kLtreeChi2};
  c.alpha = 1.0;
  CHECK_THROWS_AS(crt::run_calibration(c), crt::DomainError);
  c.alpha = 0.01;
  c.scenario = Scenario::parse("cgw:strictbin:0.5");
  c.n_vertices = 100;
  CHECK_THROWS_AS(crt::run_calibration(c), crt::InfeasibleSize);
}

TEST_CASE("csv rows") {
  const crt::CalibrationRow row{"GW-Bin(2,0.5)", CalibrationMethod::kDyckPerm, 100, 0.01, 200, 17, 0.085, 3};
  CHECK(crt::calibration_csv_header() == "distribution,method,sample_size,alpha,trials,reject_rate,seed");
  CHECK(crt::to_csv(row) == "\"GW-Bin(2,0.5)\",dyck-perm,100,0.01,200,0.085,3");
}

TEST_CASE("thread count from the environment") {
  setenv("CRT_FOREST_THREADS", "3", 1);
  CHECK(crt::default_thread_count() == 3);
  setenv("CRT_FOREST_THREADS", "junk", 1);
  CHECK(crt::default_thread_count() >= 1);
  unsetenv("CRT_FOREST_THREADS");
}
