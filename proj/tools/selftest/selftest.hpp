#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "distort/distortion.hpp"
#include "distort/tree.hpp"

namespace distort::selftest {

struct Options {
  double tolerance_scale = 1.0;
  unsigned threads = 1;
  std::uint64_t seed = 20240611;
  // comma-separated suite names, criterion numbers or "ACn" labels; empty runs all
  std::string filter;
};

struct Result {
  int id = 0;
  std::string suite;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Criterion {
  int id;
  std::string suite;
  std::string title;
  std::function<Result(const Options&)> run;
};

const std::vector<Criterion>& criteria();
bool selected(const Criterion& c, const std::string& filter);
// Runs the selected criteria in order; on_result sees each one as it finishes.
std::vector<Result> run(const Options& opt, const std::function<void(const Result&)>& on_result = {});
std::string format_line(const Result& r);

// Generators for randomized tree tests.
TreeModel random_tree(std::mt19937_64& rng, std::size_t max_periods, double up_lo = 0.2, double up_hi = 0.8);
DistortionSpec random_distortion(std::mt19937_64& rng, double horizon);
// Increasing payoff over lattice index m = -N..N (2N+1 values, normalized to [0,1]).
std::vector<double> random_index_payoff(std::mt19937_64& rng, std::size_t N);
// Restriction of an index payoff to level n of a tree with N periods.
std::vector<double> payoff_on_level(const std::vector<double>& by_index, std::size_t N, std::size_t n);

}  // namespace distort::selftest
