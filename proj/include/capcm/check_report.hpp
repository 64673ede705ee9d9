#pragma once

#include <string>
#include <vector>

namespace capcm {

/// Outcome of one numerical check.
struct CheckReport {
  std::string name;
  std::vector<double> values;
  double tolerance = 0.0;
  bool pass = false;
  std::string grid;
  std::string note;
};

}  // namespace capcm
