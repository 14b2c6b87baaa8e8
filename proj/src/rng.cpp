#include "bellkit/rng.hpp"

#include <sstream>

#include "bellkit/error.hpp"

namespace bellkit {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RngSeed derive_seed(RngSeed seed, std::uint64_t index) {
  return RngSeed{mix64(mix64(seed.value) ^ mix64(index + 0x5851f42d4c957f2dULL))};
}

Rng::Rng(RngSeed seed) : engine_(seed.value) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::string Rng::save() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  std::mt19937_64 engine;
  is >> engine;
  if (is.fail()) throw Error("invalid rng state");
  engine_ = engine;
}

}  // namespace bellkit
