#include "bellkit/behavior.hpp"

#include <cstdio>
#include <istream>

#include "csv.hpp"

namespace bellkit {

double Behavior::correlation(int x, int y) const {
  return at(x, y, 1, 1) + at(x, y, -1, -1) - at(x, y, 1, -1) - at(x, y, -1, 1);
}

std::array<double, 4> Behavior::context(int x, int y) const {
  return {at(x, y, 1, 1), at(x, y, 1, -1), at(x, y, -1, 1), at(x, y, -1, -1)};
}

std::string format_behavior_csv(const Behavior& b) {
  std::string out = "x,y,a,b,p\n";
  char buf[64];
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      for (int a : {1, -1}) {
        for (int bb : {1, -1}) {
          std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.17g\n", x, y, a, bb, b.at(x, y, a, bb));
          out += buf;
        }
      }
    }
  }
  return out;
}

Behavior parse_behavior_csv(std::istream& in) {
  Behavior b;
  std::array<bool, 16> seen{};
  std::size_t rows = 0;
  csv::read(in, {"x", "y", "a", "b", "p"}, [&](const std::vector<std::string>& f, std::size_t line) {
    const int x = csv::bit_field(f[0], line);
    const int y = csv::bit_field(f[1], line);
    const int a = csv::sign_field(f[2], line).value();
    const int bb = csv::sign_field(f[3], line).value();
    const auto k = Behavior::index(x, y, a, bb);
    if (seen[k]) csv::fail(line, "duplicate cell");
    seen[k] = true;
    b.p[k] = csv::real_field(f[4], line);
    ++rows;
  });
  if (rows != 16) throw Error("behavior file must have 16 rows, got " + std::to_string(rows));
  return b;
}

}  // namespace bellkit
