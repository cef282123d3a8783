// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include <cstdlib>
#include <iostream>
#include <string>

#include "selftest.hpp"

int main(int argc, char** argv) {
  distort::selftest::Options opt;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--filter") opt.filter = argv[i + 1];
    else if (flag == "--tolerance-scale") opt.tolerance_scale = std::strtod(argv[i + 1], nullptr);
    else if (flag == "--seed") opt.seed = std::strtoull(argv[i + 1], nullptr, 10);
    else {
      std::cerr << "usage: distort_acceptance [--filter F] [--tolerance-scale S] [--seed N]\n";
      return 2;
    }
  }
  int failed = 0;
  distort::selftest::run(opt, [&](const distort::selftest::Result& r) {
    std::cout << distort::selftest::format_line(r) << std::endl;
    failed += r.pass ? 0 : 1;
  });
  return failed == 0 ? 0 : 1;
}
