#ifndef DPTCOP_COMMON_HPP
#define DPTCOP_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dptcop {

// Error taxonomy shared by the library and the CLI exit codes:
//   usage_error   -> caller misused an interface (exit 2)
//   data_error    -> input values outside the contract (exit 3)
//   numeric_error -> an iterative routine failed to converge (exit 4)
struct usage_error : std::invalid_argument {
  explicit usage_error(const std::string& msg) : std::invalid_argument(msg) {}
};

struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A point of the unit square.
struct Point {
  double u = 0.0;
  double v = 0.0;
};

// Compensated summation; grid mass totals at level 10+ need it to hold
// the 1e-12 normalization contract.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline double kahan_total(const std::vector<double>& xs) {
  KahanSum k;
  for (double x : xs) k.add(x);
  return k.value();
}

}  // namespace dptcop

#endif
